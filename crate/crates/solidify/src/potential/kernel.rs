//! Heat kernels by uniformization: with unit jump rate, P_x[X_t = y] is a Poisson(t)
//! mixture of jump-chain transition probabilities.

use super::solve::det_sum;
use crate::cluster_graph::{ClusterGraph, VertexSet};
use crate::error::{domain, Error, Result};
use rayon::prelude::*;
use serde::Serialize;

/// Upper bound on (vertices × Poisson terms) accepted in exact mode.
pub const WORK_LIMIT: f64 = 2e10;

/// Smallest K with P[Poisson(t) > K] ≤ tol, from the Chernoff bound
/// P[N ≥ m] ≤ e^{−t}(et/m)^m for m > t.
pub fn poisson_truncation(t: f64, tol: f64) -> usize {
    if t == 0.0 {
        return 0;
    }
    let log_tol = tol.ln();
    let mut m = t.floor() as usize + 1;
    loop {
        let mf = m as f64;
        let log_bound = -t + mf * (1.0 + t.ln() - mf.ln());
        if log_bound <= log_tol {
            return m - 1;
        }
        m += 1;
    }
}

fn uniformized(g: &ClusterGraph, keep: Option<&VertexSet>, t: f64, x: u32, tol: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be finite and non-negative, got {t}"));
    }
    if x as usize >= g.len() {
        return domain(format!("vertex {x} not in the cluster"));
    }
    let n = g.len();
    let k_max = poisson_truncation(t, tol);
    if n as f64 * (k_max + 1) as f64 > WORK_LIMIT {
        return Err(Error::Capacity(format!(
            "exact heat kernel needs {} Poisson terms on {n} vertices; use Monte Carlo",
            k_max + 1
        )));
    }
    let inv_mu: Vec<f64> = (0..n as u32).map(|v| 1.0 / g.mu(v).max(1) as f64).collect();
    let mut v = vec![0.0; n];
    v[x as usize] = 1.0;
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut log_w = -t;
    let lt = t.ln();
    for k in 0..=k_max {
        let w = log_w.exp();
        if w > 0.0 {
            acc.par_iter_mut().zip(v.par_iter()).for_each(|(a, p)| *a += w * p);
        }
        if k == k_max {
            break;
        }
        next.par_iter_mut().enumerate().for_each(|(y, out)| {
            if keep.is_some_and(|u| !u.contains(y as u32)) {
                *out = 0.0;
                return;
            }
            *out = g.neighbors(y as u32).iter().map(|&z| v[z as usize] * inv_mu[z as usize]).sum();
        });
        std::mem::swap(&mut v, &mut next);
        log_w += lt - ((k + 1) as f64).ln();
    }
    Ok(acc.iter().zip(&inv_mu).map(|(a, m)| a * m).collect())
}

/// q_t(x, ·) = P_x[X_t = ·]/μ_·, truncation error at most `tol`.
pub fn heat_kernel(g: &ClusterGraph, t: f64, x: u32, tol: f64) -> Result<Vec<f64>> {
    uniformized(g, None, t, x, tol)
}

/// Kernel of the walk killed on leaving `u`.
pub fn killed_heat_kernel(g: &ClusterGraph, u: &VertexSet, t: f64, x: u32, tol: f64) -> Result<Vec<f64>> {
    if u.capacity() != g.len() {
        return domain("set sized for a different graph");
    }
    if !u.contains(x) {
        return domain(format!("start vertex {x} is outside the set"));
    }
    uniformized(g, Some(u), t, x, tol)
}

/// Σ_y q_t(x,y) μ_y.
pub fn kernel_mass(g: &ClusterGraph, q: &[f64]) -> f64 {
    let w: Vec<f64> = q.iter().enumerate().map(|(y, v)| v * g.mu(y as u32) as f64).collect();
    det_sum(&w)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelSample {
    pub t: f64,
    /// ℓ¹ distance between the two points.
    pub dist1: u64,
    pub q: f64,
}

/// Sample range where the Gaussian bounds are claimed: t ≥ max(r, |x−y|₁^{3/2}).
pub fn admissible(t: f64, dist1: u64, r: f64) -> bool {
    t >= r.max((dist1 as f64).powf(1.5))
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeFit {
    /// Lower envelope c1·t^{−d/2}·exp(−c2·|x−y|₁²/t).
    pub c1: f64,
    pub c2: f64,
    /// Upper envelope c3·t^{−d/2}·exp(−c4·|x−y|₁²/t).
    pub c3: f64,
    pub c4: f64,
    /// Least-squares slope of log(q·t^{d/2}) against |x−y|₁²/t.
    pub slope: f64,
    pub rms_residual: f64,
    pub lower_violations: usize,
    pub upper_violations: usize,
}

/// Fits a common Gaussian profile by least squares, then shifts it down and up to
/// envelope the sample.
pub fn gaussian_envelope_fit(samples: &[KernelSample], dim: usize) -> Result<EnvelopeFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.q > 0.0)
        .map(|s| ((s.dist1 as f64).powi(2) / s.t, s.q.ln() + 0.5 * dim as f64 * s.t.ln()))
        .collect();
    if pts.len() < 2 {
        return domain("need at least two positive kernel samples");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return domain("samples do not separate distances; cannot fit a profile");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = -(sxy / sxx);
    let b = slope.max(0.0);
    let a = my + b * mx;
    let rms = (pts.iter().map(|p| (p.1 - (a - b * p.0)).powi(2)).sum::<f64>() / n).sqrt();
    let shifted: Vec<f64> = pts.iter().map(|p| p.1 + b * p.0).collect();
    let lo = shifted.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (c1, c3) = (lo.exp(), hi.exp());
    let env = |c: f64, s: &KernelSample| c * s.t.powf(-0.5 * dim as f64) * (-b * (s.dist1 as f64).powi(2) / s.t).exp();
    let rel = 1e-12;
    let lower_violations = samples.iter().filter(|s| s.q < env(c1, s) * (1.0 - rel)).count();
    let upper_violations = samples.iter().filter(|s| s.q > env(c3, s) * (1.0 + rel)).count();
    Ok(EnvelopeFit { c1, c2: b, c3, c4: b, slope, rms_residual: rms, lower_violations, upper_violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::{label_clusters, largest_cluster, Model, PercConfig};

    #[test]
    fn truncation_bound_is_valid() {
        // Compare with the exact Poisson tail computed by summation.
        for t in [0.5, 4.0, 30.0, 200.0] {
            let k = poisson_truncation(t, 1e-12);
            let mut logp = -t;
            let mut cdf = 0.0;
            for j in 0..=k {
                if j > 0 {
                    logp += t.ln() - (j as f64).ln();
                }
                cdf += logp.exp();
            }
            assert!(1.0 - cdf <= 1e-12 + 1e-14, "t={t} k={k}");
        }
        assert_eq!(poisson_truncation(0.0, 1e-12), 0);
    }

    #[test]
    fn time_zero_is_diagonal() {
        let g = ClusterGraph::full_window(3, 4).unwrap();
        let q = heat_kernel(&g, 0.0, 5, 1e-12).unwrap();
        for (y, v) in q.iter().enumerate() {
            let want = if y == 5 { 1.0 / g.mu(5) as f64 } else { 0.0 };
            assert_eq!(*v, want);
        }
    }

    #[test]
    fn mass_and_symmetry() {
        let cfg = PercConfig::generate(Model::Site, 3, 10, 0.7, 1).unwrap();
        let g = largest_cluster(&cfg, &label_clusters(&cfg)).unwrap();
        let t = 3.5;
        let qa = heat_kernel(&g, t, 0, 1e-13).unwrap();
        assert!((kernel_mass(&g, &qa) - 1.0).abs() < 1e-11);
        for y in (0..g.len() as u32).step_by(11) {
            let qy = heat_kernel(&g, t, y, 1e-13).unwrap();
            assert!((qy[0] - qa[y as usize]).abs() < 1e-10);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        let g = ClusterGraph::full_window(3, 6).unwrap();
        let (s, t) = (1.5, 2.25);
        let x = 7;
        let y = 100;
        let qs = heat_kernel(&g, s, x, 1e-14).unwrap();
        let qt = heat_kernel(&g, t, y, 1e-14).unwrap();
        let qst = heat_kernel(&g, s + t, x, 1e-14).unwrap();
        let conv: f64 = (0..g.len()).map(|z| qs[z] * qt[z] * g.mu(z as u32) as f64).sum();
        assert!((conv - qst[y as usize]).abs() < 1e-9);
    }

    #[test]
    fn killed_kernel_cases() {
        let g = ClusterGraph::full_window(3, 5).unwrap();
        let x = g.vertex_of(&[0, 0, 0]).unwrap();
        let all = VertexSet::all(g.len());
        assert_eq!(killed_heat_kernel(&g, &all, 2.0, x, 1e-13).unwrap(), heat_kernel(&g, 2.0, x, 1e-13).unwrap());
        let single = VertexSet::from_ids(g.len(), [x]);
        let q = killed_heat_kernel(&g, &single, 1.7, x, 1e-14).unwrap();
        assert!((q[x as usize] - (-1.7f64).exp() / 6.0).abs() < 1e-14);
        assert!(killed_heat_kernel(&g, &single, 1.0, x + 1, 1e-12).is_err());
        let ball = g.ball_set(&[0, 0, 0], 1);
        let qk = killed_heat_kernel(&g, &ball, 3.0, x, 1e-13).unwrap();
        let qf = heat_kernel(&g, 3.0, x, 1e-13).unwrap();
        assert!(qk.iter().zip(&qf).all(|(a, b)| *a <= b + 1e-15));
        assert!(kernel_mass(&g, &qk) < 1.0);
    }

    #[test]
    fn envelope_rejects_degenerate_input() {
        let s = KernelSample { t: 10.0, dist1: 1, q: 0.01 };
        assert!(gaussian_envelope_fit(&[s], 3).is_err());
        assert!(gaussian_envelope_fit(&[s, s], 3).is_err());
    }
}
