//! Finite-volume potential theory on a cluster: harmonic hitting probabilities, the Green
//! function, equilibrium measures and capacities, and heat kernels.
//!
//! Transience is replaced by killing on a chosen vertex set, usually the window face.

pub mod kernel;
pub mod solve;

use crate::cluster_graph::{ClusterGraph, VertexSet};
use crate::error::{domain, Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;
use solve::{Restricted, Solver};

pub use kernel::{
    admissible, gaussian_envelope_fit, heat_kernel, kernel_mass, killed_heat_kernel, poisson_truncation, EnvelopeFit,
    KernelSample,
};

pub const SOLVE_TOL: f64 = 1e-12;

/// The walk on `g` absorbed on `killed`.
pub struct DirichletSystem<'a> {
    g: &'a ClusterGraph,
    killed: VertexSet,
    interior: VertexSet,
}

#[derive(Clone, Debug)]
pub struct HitProb {
    pub h: Vec<f64>,
    /// Max-norm residual of the harmonic equations.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumResult {
    pub e: Vec<f64>,
    pub capacity: f64,
    #[serde(skip)]
    pub h: Vec<f64>,
}

/// Dense Green function on the interior.
pub struct Green {
    index: Vec<u32>,
    m: DMatrix<f64>,
}

impl Green {
    /// g(x, y); zero when either point is killed.
    pub fn get(&self, x: u32, y: u32) -> f64 {
        let (i, j) = (self.index[x as usize], self.index[y as usize]);
        if i == u32::MAX || j == u32::MAX {
            0.0
        } else {
            self.m[(i as usize, j as usize)]
        }
    }

    pub fn symmetry_residual(&self) -> f64 {
        let n = self.m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)]).abs());
            }
        }
        worst
    }
}

impl<'a> DirichletSystem<'a> {
    pub fn new(g: &'a ClusterGraph, killed: VertexSet) -> Result<Self> {
        if killed.capacity() != g.len() {
            return domain("killed set sized for a different graph");
        }
        let interior = killed.complement();
        if let Some(v) = interior.iter().find(|&v| g.mu(v) == 0) {
            return Err(Error::Structural(format!("interior vertex {v} is isolated")));
        }
        Ok(DirichletSystem { g, killed, interior })
    }

    /// Killed on the window face.
    pub fn window(g: &'a ClusterGraph) -> Result<Self> {
        DirichletSystem::new(g, g.face_set())
    }

    pub fn graph(&self) -> &ClusterGraph {
        self.g
    }

    pub fn killed(&self) -> &VertexSet {
        &self.killed
    }

    pub fn interior(&self) -> &VertexSet {
        &self.interior
    }

    fn check_set(&self, a: &VertexSet) -> Result<()> {
        if a.capacity() != self.g.len() {
            return domain("vertex set sized for a different graph");
        }
        if !a.is_disjoint(&self.killed) {
            return domain("set meets the killed vertices");
        }
        Ok(())
    }

    /// P_x[H_A < H_killed] for every vertex.
    pub fn hit_prob(&self, a: &VertexSet) -> Result<HitProb> {
        self.check_set(a)?;
        let unknowns = self.interior.difference(a);
        let mut h: Vec<f64> = (0..self.g.len() as u32).map(|v| a.contains(v) as u8 as f64).collect();
        if unknowns.is_empty() {
            return Ok(HitProb { h, residual: 0.0 });
        }
        let op = Restricted::new(self.g, &unknowns);
        let b: Vec<f64> = op
            .verts
            .iter()
            .map(|&v| self.g.neighbors(v).iter().filter(|&&u| a.contains(u)).count() as f64)
            .collect();
        let solver = Solver::new(op, SOLVE_TOL)?;
        let sol = solver.solve(&b)?;
        for (i, &v) in solver.op().verts.iter().enumerate() {
            h[v as usize] = sol.x[i];
        }
        Ok(HitProb { h, residual: sol.residual })
    }

    /// g(x, y) = (expected time spent at y)/μ_y, which is the inverse of the Laplacian
    /// restricted to the interior.
    pub fn green(&self) -> Result<Green> {
        if self.killed.is_empty() {
            return domain("no killed vertices, the Green function is infinite");
        }
        let solver = Solver::new(Restricted::new(self.g, &self.interior), SOLVE_TOL)?;
        let m = solver.inverse()?;
        Ok(Green { index: solver.op().index.clone(), m })
    }

    /// The column g(·, y), for systems too large for [`DirichletSystem::green`].
    pub fn green_column(&self, y: u32) -> Result<Vec<f64>> {
        if self.killed.is_empty() {
            return domain("no killed vertices, the Green function is infinite");
        }
        if !self.interior.contains(y) {
            return Ok(vec![0.0; self.g.len()]);
        }
        let solver = Solver::new(Restricted::new(self.g, &self.interior), SOLVE_TOL)?;
        let op = solver.op();
        let mut b = vec![0.0; op.len()];
        b[op.unknown(y).unwrap()] = 1.0;
        let sol = solver.solve(&b)?;
        let mut out = vec![0.0; self.g.len()];
        for (i, &v) in op.verts.iter().enumerate() {
            out[v as usize] = sol.x[i];
        }
        Ok(out)
    }

    /// e_A(x) = μ_x P_x[H̃_A > H_killed] on A, and its total mass.
    pub fn equilibrium(&self, a: &VertexSet) -> Result<EquilibriumResult> {
        self.check_set(a)?;
        if a.is_empty() {
            return domain("equilibrium measure of the empty set");
        }
        let hp = self.hit_prob(a)?;
        let mut e = vec![0.0; self.g.len()];
        for x in a.iter() {
            let back: f64 = self.g.neighbors(x).iter().map(|&y| hp.h[y as usize]).sum();
            e[x as usize] = (self.g.mu(x) as f64 - back).max(0.0);
        }
        let capacity = a.iter().map(|x| e[x as usize]).sum();
        Ok(EquilibriumResult { e, capacity, h: hp.h })
    }

    pub fn capacity(&self, a: &VertexSet) -> Result<f64> {
        Ok(self.equilibrium(a)?.capacity)
    }

    /// max over probes of |P_x[H_A < kill] − Σ_y g(x,y) e_A(y)|.
    pub fn last_exit_residual(&self, green: &Green, eq: &EquilibriumResult, a: &VertexSet, probes: &[u32]) -> f64 {
        probes
            .iter()
            .map(|&x| {
                let s: f64 = a.iter().map(|y| green.get(x, y) * eq.e[y as usize]).sum();
                (eq.h[x as usize] - s).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InterfaceBound {
    pub cap_interface: f64,
    pub cap_set: f64,
    pub min_hit: f64,
    pub slack: f64,
    pub holds: bool,
}

/// cap(Σ) ≥ min_{x∈A} P_x[H_Σ < kill] · cap(A), checked to `tol`.
pub fn interface_capacity_bound(sys: &DirichletSystem, sigma: &VertexSet, a: &VertexSet, tol: f64) -> Result<InterfaceBound> {
    let cs = sys.capacity(sigma)?;
    let ca = sys.capacity(a)?;
    let h = sys.hit_prob(sigma)?.h;
    let min_hit = a.iter().map(|x| h[x as usize]).fold(f64::INFINITY, f64::min);
    let slack = cs - min_hit * ca;
    Ok(InterfaceBound { cap_interface: cs, cap_set: ca, min_hit, slack, holds: slack >= -tol })
}

/// Capacity of the center site of a full-lattice window killed on its faces.
pub fn singleton_capacity(dim: usize, side: u64) -> Result<f64> {
    let g = ClusterGraph::full_window(dim, side)?;
    let sys = DirichletSystem::window(&g)?;
    let c = g.window().center();
    let x = g.vertex_of_point(&c)?;
    sys.capacity(&VertexSet::from_ids(g.len(), [x]))
}

/// Least-squares fit of c(N) = a + b/N; returns (a, b).
pub fn extrapolate_inverse_side(points: &[(u64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return domain("need at least two window sides to extrapolate");
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(s, _)| 1.0 / *s as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return domain("window sides must differ");
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}
