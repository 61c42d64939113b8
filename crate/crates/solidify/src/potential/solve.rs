//! Linear solves for the Dirichlet Laplacian of a cluster restricted to a vertex subset.

use crate::cluster_graph::{ClusterGraph, VertexSet};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Dense Cholesky is used up to this many unknowns; larger systems go to PCG.
pub const DENSE_LIMIT: usize = 4000;
/// Largest system the iterative solver accepts.
pub const ITERATIVE_LIMIT: usize = 8_000_000;

const NONE: u32 = u32::MAX;
const CHUNK: usize = 4096;

/// Sum in fixed-size chunks, combined in order, so the result never depends on the
/// number of worker threads.
pub fn det_sum(v: &[f64]) -> f64 {
    let parts: Vec<f64> = v.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    parts.iter().sum()
}

pub fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> =
        a.par_chunks(CHUNK).zip(b.par_chunks(CHUNK)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).collect();
    parts.iter().sum()
}

/// Matrix-free operator L = D − A restricted to the unknowns, where D carries the full
/// degree μ_v (edges to non-unknowns act as Dirichlet boundary).
pub struct Restricted<'a> {
    pub g: &'a ClusterGraph,
    /// Vertex id of each unknown.
    pub verts: Vec<u32>,
    /// Unknown index of each vertex, or `u32::MAX`.
    pub index: Vec<u32>,
}

impl<'a> Restricted<'a> {
    pub fn new(g: &'a ClusterGraph, unknowns: &VertexSet) -> Self {
        let verts = unknowns.to_vec();
        let mut index = vec![NONE; g.len()];
        for (i, &v) in verts.iter().enumerate() {
            index[v as usize] = i as u32;
        }
        Restricted { g, verts, index }
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn unknown(&self, v: u32) -> Option<usize> {
        let i = self.index[v as usize];
        (i != NONE).then_some(i as usize)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let v = self.verts[i];
            let mut s = self.g.mu(v) as f64 * x[i];
            for &u in self.g.neighbors(v) {
                let j = self.index[u as usize];
                if j != NONE {
                    s -= x[j as usize];
                }
            }
            *yi = s;
        });
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in self.verts.iter().enumerate() {
            m[(i, i)] = self.g.mu(v) as f64;
            for &u in self.g.neighbors(v) {
                if let Some(j) = self.unknown(u) {
                    m[(i, j)] -= 1.0;
                }
            }
        }
        m
    }

    /// Max-norm of b − Lx.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        y.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Factorization kept for repeated right-hand sides.
pub enum Solver<'a> {
    Dense { op: Restricted<'a>, chol: nalgebra::Cholesky<f64, nalgebra::Dyn> },
    Iterative { op: Restricted<'a>, tol: f64 },
}

impl<'a> Solver<'a> {
    pub fn new(op: Restricted<'a>, tol: f64) -> Result<Self> {
        let n = op.len();
        if n > ITERATIVE_LIMIT {
            return Err(Error::Capacity(format!("{n} unknowns exceeds the exact-solve limit {ITERATIVE_LIMIT}; use Monte Carlo")));
        }
        grounded(&op)?;
        if n <= DENSE_LIMIT {
            let chol = op
                .dense()
                .cholesky()
                .ok_or_else(|| Error::Structural("Dirichlet matrix is singular (an interior component has no boundary)".into()))?;
            Ok(Solver::Dense { op, chol })
        } else {
            Ok(Solver::Iterative { op, tol })
        }
    }

    pub fn op(&self) -> &Restricted<'a> {
        match self {
            Solver::Dense { op, .. } | Solver::Iterative { op, .. } => op,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Solved> {
        match self {
            Solver::Dense { op, chol } => {
                let x = chol.solve(&DVector::from_column_slice(b));
                let x: Vec<f64> = x.iter().copied().collect();
                let residual = op.residual(&x, b);
                Ok(Solved { x, residual, iterations: 0 })
            }
            Solver::Iterative { op, tol } => pcg(op, b, *tol),
        }
    }

    /// Full inverse, dense mode only.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        match self {
            Solver::Dense { chol, .. } => Ok(chol.inverse()),
            Solver::Iterative { op, .. } => {
                Err(Error::Capacity(format!("dense inverse needs at most {DENSE_LIMIT} unknowns, got {}", op.len())))
            }
        }
    }
}

/// Every component of the unknowns must have an edge leaving the unknown set, otherwise
/// the restricted Laplacian is singular.
fn grounded(op: &Restricted) -> Result<()> {
    let n = op.len();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..n {
        let v = op.verts[i];
        if op.g.neighbors(v).iter().any(|&u| op.index[u as usize] == NONE) {
            seen[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        for &u in op.g.neighbors(op.verts[i]) {
            if let Some(j) = op.unknown(u) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(Error::Structural(format!(
            "vertex {} lies in an interior component with no boundary; the system is singular",
            op.verts[i]
        ))),
        None => Ok(()),
    }
}

/// Jacobi-preconditioned conjugate gradients, stopped on the true max-norm residual.
pub fn pcg(op: &Restricted, b: &[f64], tol: f64) -> Result<Solved> {
    let n = op.len();
    let dinv: Vec<f64> = op.verts.iter().map(|&v| 1.0 / op.g.mu(v) as f64).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = det_dot(&r, &z);
    let max_iter = 20 * n + 1000;
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let target = tol * scale;
    let mut it = 0;
    loop {
        let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rmax <= 0.25 * target || rz == 0.0 {
            let residual = op.residual(&x, b);
            if residual <= target {
                return Ok(Solved { x, residual, iterations: it });
            }
            // Recurrence drifted from the true residual; restart from the current iterate.
            op.apply(&x, &mut q);
            r.par_iter_mut().zip(b.par_iter().zip(q.par_iter())).for_each(|(ri, (bi, qi))| *ri = bi - qi);
            z.par_iter_mut().zip(r.par_iter().zip(dinv.par_iter())).for_each(|(zi, (ri, di))| *zi = ri * di);
            p.copy_from_slice(&z);
            rz = det_dot(&r, &z);
        }
        if it >= max_iter {
            return Err(Error::Structural(format!("conjugate gradients did not converge in {max_iter} iterations")));
        }
        op.apply(&p, &mut q);
        let pq = det_dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::Structural("Dirichlet matrix is singular (an interior component has no boundary)".into()));
        }
        let a = rz / pq;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += a * pi);
        r.par_iter_mut().zip(q.par_iter()).for_each(|(ri, qi)| *ri -= a * qi);
        z.par_iter_mut().zip(r.par_iter().zip(dinv.par_iter())).for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_new = det_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        it += 1;
    }
}
