//! Test sets U₀/U₁, porous interfaces, resonance sets, and the desk-scale experiments
//! built on them: escape from interfaces, capacity ratios, one-step hitting and cascades.

use crate::cluster_graph::{ClusterGraph, VertexSet};
use crate::density::{subsample, DensityContext, Variant, VolumeIndex};
use crate::error::{domain, Error, Result};
use crate::lattice::{blow_up, sup_dist, Point, ShapeSpec};
use crate::percolation::{label_clusters, largest_cluster, Model, PercConfig};
use crate::potential::DirichletSystem;
use crate::rng::{hash3, stream, unit};
use crate::schedule::{growth_check, GrowthPair, GrowthReport};
use crate::walk::{
    estimate_hit_before, run_gamma_cascade, run_jump_chain, wilson, Cause, CascadePlan, Guard, HitQuery, StopSpec,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::io::{BufRead, Write};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureKind {
    SolidShell,
    PerforatedShell { hole_fraction: f64 },
    TwoBoxNonconvex { hole_fraction: f64 },
}

impl FixtureKind {
    fn hole_fraction(&self) -> f64 {
        match self {
            FixtureKind::SolidShell => 0.0,
            FixtureKind::PerforatedShell { hole_fraction } | FixtureKind::TwoBoxNonconvex { hole_fraction } => {
                *hole_fraction
            }
        }
    }

    /// The continuum set A.
    pub fn shape(&self) -> ShapeSpec {
        match self {
            FixtureKind::TwoBoxNonconvex { .. } => ShapeSpec::Union {
                parts: vec![
                    ShapeSpec::Box { center: vec![-0.25, 0.0, 0.0], half: vec![0.125, 0.125, 0.125] },
                    ShapeSpec::Box { center: vec![0.25, 0.0, 0.0], half: vec![0.125, 0.125, 0.125] },
                ],
            },
            _ => ShapeSpec::Box { center: vec![0.0; 3], half: vec![0.25; 3] },
        }
    }
}

/// Geometry and randomness of one standard problem. Everything is in d = 3.
#[derive(Clone, Debug, Serialize)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub n: u64,
    pub side: u64,
    pub p: f64,
    pub seed: u64,
    pub ell_star: u32,
    pub epsilon: u64,
    pub shell_thickness: u64,
    /// Holes at S are refilled where P_x[H_Σ < τ_ε] would drop below this.
    pub min_chi: Option<f64>,
    /// Radius bounding U₀; defaults to the window-inscribed ball.
    pub b_n: Option<f64>,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind, n: u64) -> Self {
        FixtureSpec {
            kind,
            n,
            side: 2 * n + 1,
            p: 0.75,
            seed: 1,
            ell_star: (n / 4).max(1).ilog2(),
            epsilon: 2,
            shell_thickness: 1,
            min_chi: None,
            b_n: None,
        }
    }
}

pub struct InterfaceProblem {
    pub spec: FixtureSpec,
    pub g: ClusterGraph,
    pub a_n: VertexSet,
    pub u0: VertexSet,
    pub u1: VertexSet,
    /// ∂U₀ relative to the cluster.
    pub s: VertexSet,
    pub sigma: VertexSet,
    pub b_n: f64,
    /// Holes refilled to keep the interface condition.
    pub refilled: u64,
}

/// Sites within sup-distance r of a marked site.
fn dilate(vi: &VolumeIndex, g: &ClusterGraph, r: u64) -> VertexSet {
    VertexSet::from_predicate(g, |v| vi.count(&g.point(v).0, r).count > 0)
}

/// Builds A_N, U₀ = cluster ∩ (A_N dilated by 2^{ℓ*}), S = ∂U₀, and Σ = the cluster sites
/// at sup-distance 1..=thickness from that dilation, perforated by independent holes.
pub fn build_standard_problem(spec: &FixtureSpec) -> Result<InterfaceProblem> {
    let hf = spec.kind.hole_fraction();
    if !(0.0..=1.0).contains(&hf) {
        return domain(format!("hole fraction {hf} outside [0, 1]"));
    }
    if spec.epsilon == 0 || spec.shell_thickness == 0 {
        return domain("epsilon and shell thickness must be positive");
    }
    let cfg = PercConfig::generate(Model::Site, 3, spec.side, spec.p, spec.seed)?;
    let lab = label_clusters(&cfg);
    let g = largest_cluster(&cfg, &lab)?;
    let w = g.window().clone();
    let shape = spec.kind.shape();
    let pts = blow_up(&shape, spec.n, &w)?;
    let mut mask = crate::bitset::BitSet::new(w.len());
    for p in &pts {
        mask.insert(w.point_index(p)?);
    }
    let margin = 1u64 << spec.ell_star;
    let reach = margin + spec.shell_thickness;
    let (lo, hi) = shape.scaled_bbox(spec.n as f64).unwrap();
    let up = w.upper();
    if (0..3).any(|k| lo[k] - (reach as i64) <= w.origin().0[k] || hi[k] + reach as i64 >= up[k]) {
        return domain(format!(
            "A_N plus margin 2^ℓ* = {margin} and shell {} does not fit strictly inside a window of side {}",
            spec.shell_thickness, spec.side
        ));
    }
    let a_vi = VolumeIndex::from_mask(&w, &mask);
    let a_n = VertexSet::from_predicate(&g, |v| mask.get(g.site(v)));
    let u0 = dilate(&a_vi, &g, margin);
    let u1 = u0.complement();
    let s = g.boundary_relative(&u0)?;
    let shell = dilate(&a_vi, &g, reach).difference(&u0);
    let mut sigma = VertexSet::from_predicate(&g, |v| {
        shell.contains(v) && unit(hash3(spec.seed, stream::HOLES, g.site(v) as u64)) >= hf
    });
    let mut refilled = 0;
    if let Some(chi) = spec.min_chi {
        for x in s.to_vec() {
            if sigma.contains(x) || !shell.contains(x) {
                continue;
            }
            if local_hit_prob(&g, &sigma, x, spec.epsilon) < chi {
                sigma.insert(x);
                refilled += 1;
            }
        }
    }
    let b_n = spec.b_n.unwrap_or(((spec.side - 1) / 2) as f64);
    Ok(InterfaceProblem { spec: spec.clone(), g, a_n, u0, u1, s, sigma, b_n, refilled })
}

/// P_x[H_Σ < τ_ε] by a dense solve on B(x, ε−1) ∩ cluster.
pub fn local_hit_prob(g: &ClusterGraph, sigma: &VertexSet, x: u32, eps: u64) -> f64 {
    if sigma.contains(x) {
        return 1.0;
    }
    if eps == 0 {
        return 0.0;
    }
    let cx = g.point(x).0;
    let ball = g.ball_set(&cx, eps - 1);
    let unknowns: Vec<u32> = ball.iter().filter(|&v| !sigma.contains(v)).collect();
    let n = unknowns.len();
    let pos = |v: u32| unknowns.binary_search(&v).ok();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    for (i, &v) in unknowns.iter().enumerate() {
        m[(i, i)] = g.mu(v) as f64;
        for &u in g.neighbors(v) {
            if let Some(j) = pos(u) {
                m[(i, j)] -= 1.0;
            } else if ball.contains(u) {
                b[i] += 1.0;
            }
        }
    }
    let sol = match m.cholesky() {
        Some(c) => c.solve(&b),
        None => return 0.0,
    };
    sol[pos(x).unwrap()].clamp(0.0, 1.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassU {
    pub member: bool,
    pub bounded: bool,
    /// A violating (x, ℓ) with its density.
    pub witness: Option<(Point, u32, f64)>,
}

/// U₀ ∈ 𝒰: U₀ ⊆ B(0, b_N) and σ_ℓ(x) ≤ ½ for x ∈ A_N ∩ cluster and ℓ ≤ ℓ*.
pub fn class_u_membership(g: &ClusterGraph, a_n: &VertexSet, u0: &VertexSet, ell_star: u32, b_n: f64) -> ClassU {
    let origin = vec![0i64; g.dim()];
    let bounded = u0.iter().all(|v| sup_dist(&g.point(v).0, &origin) as f64 <= b_n);
    let ctx = DensityContext::new(g);
    let u1 = ctx.subset_index(&u0.complement());
    let xs = a_n.to_vec();
    for ell in 0..=ell_star {
        let bad = xs.par_iter().find_first(|&&x| ctx.density_at(&u1, &g.point(x).0, 1u64 << ell).value > 0.5);
        if let Some(&x) = bad {
            let p = g.point(x);
            let s = ctx.density_at(&u1, &p.0, 1u64 << ell).value;
            return ClassU { member: false, bounded, witness: Some((p, ell, s)) };
        }
    }
    ClassU { member: bounded, bounded, witness: None }
}

#[derive(Clone, Debug, Serialize)]
pub struct InterfaceCheck {
    pub method: &'static str,
    pub chi: f64,
    pub chi_hat: f64,
    /// Wilson 95% interval at the minimizer, for the Monte Carlo method.
    pub ci: Option<(f64, f64)>,
    pub worst: Option<Point>,
    pub member: bool,
}

/// min_{x∈S} P_x[H_Σ < τ_ε] ≥ χ with exact local solves.
pub fn interface_membership_exact(g: &ClusterGraph, s: &VertexSet, sigma: &VertexSet, eps: u64, chi: f64) -> InterfaceCheck {
    let xs = s.to_vec();
    let probs: Vec<f64> = xs.par_iter().map(|&x| local_hit_prob(g, sigma, x, eps)).collect();
    let (mut best, mut at) = (f64::INFINITY, None);
    for (p, &x) in probs.iter().zip(&xs) {
        if *p < best {
            best = *p;
            at = Some(x);
        }
    }
    if xs.is_empty() {
        best = 1.0;
    }
    InterfaceCheck { method: "exact", chi, chi_hat: best, ci: None, worst: at.map(|x| g.point(x)), member: best >= chi }
}

/// Query for H_target < τ_r from x. The walk engine lets an entrance win a tie with the
/// radius stop, so the target is cut down to the open ball to keep the inequality strict.
fn strict_radius_query(g: &ClusterGraph, target: &VertexSet, x: u32, r: u64) -> HitQuery {
    let inside = if r == 0 { VertexSet::empty(g.len()) } else { g.ball_set(&g.point(x).0, r - 1) };
    let mut q = HitQuery::new(target.intersection(&inside), Guard::Radius(r));
    q.window_kill = false;
    q
}

/// Same check by Monte Carlo at every x ∈ S.
pub fn interface_membership_mc(
    g: &ClusterGraph,
    s: &VertexSet,
    sigma: &VertexSet,
    eps: u64,
    chi: f64,
    replicas: u64,
    seed: u64,
) -> Result<InterfaceCheck> {
    let (mut best, mut at, mut ci) = (1.0, None, None);
    for (k, x) in s.iter().enumerate() {
        let q = strict_radius_query(g, sigma, x, eps);
        let e = estimate_hit_before(g, x, &q, replicas, seed.wrapping_add(k as u64))?;
        if at.is_none() || e.p_hat < best {
            best = e.p_hat;
            at = Some(x);
            ci = Some(e.ci);
        }
    }
    Ok(InterfaceCheck { method: "mc", chi, chi_hat: best, ci, worst: at.map(|x| g.point(x)), member: best >= chi })
}

/// Vertices of A_N ∩ cluster to start walks from: all of them up to `cap`, otherwise an
/// equal deterministic share from each octant.
pub fn sample_starts(g: &ClusterGraph, a: &VertexSet, cap: usize, seed: u64) -> Vec<u32> {
    let all = a.to_vec();
    if all.len() <= cap {
        return all;
    }
    let d = g.dim();
    let mut oct: Vec<Vec<u32>> = vec![Vec::new(); 1 << d];
    for &v in &all {
        let p = g.point(v).0;
        let k = (0..d).fold(0usize, |acc, i| acc | ((p[i] >= 0) as usize) << i);
        oct[k].push(v);
    }
    let share = cap.div_ceil(oct.len());
    let mut out: Vec<u32> =
        oct.into_iter().enumerate().flat_map(|(k, vs)| subsample(vs, share, seed ^ k as u64)).collect();
    out.sort_unstable();
    out.truncate(cap);
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapePoint {
    pub x: Point,
    pub replicas: u64,
    /// Walks that reached the window face before Σ (escape = never hits).
    pub escaped: u64,
    pub undecided: u64,
    pub pessimistic: f64,
    pub ci: (f64, f64),
    /// Escapes re-counted as eventual hits.
    pub optimistic: f64,
    /// 1 − P_x[H_Σ < window] from the exact solve, when available.
    pub exact: Option<f64>,
}

/// Per-start Monte Carlo estimate of P_x[walk reaches the window face before `target`].
pub fn escape_estimates(g: &ClusterGraph, target: &VertexSet, starts: &[u32], replicas: u64, seed: u64) -> Result<Vec<EscapePoint>> {
    let spec = StopSpec::new(200_000_000).target("sigma", target.clone()).window_kill(true);
    starts
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            if target.contains(x) {
                return Ok(EscapePoint {
                    x: g.point(x),
                    replicas,
                    escaped: 0,
                    undecided: 0,
                    pessimistic: 0.0,
                    ci: (0.0, 0.0),
                    optimistic: 0.0,
                    exact: None,
                });
            }
            let s = seed.wrapping_add(k as u64);
            let causes: Vec<Cause> = (0..replicas)
                .into_par_iter()
                .map(|r| run_jump_chain(g, x, &spec, s, r).map(|o| o.cause))
                .collect::<Result<_>>()?;
            let escaped = causes.iter().filter(|c| **c == Cause::Window).count() as u64;
            let undecided = causes.iter().filter(|c| **c == Cause::Budget).count() as u64;
            let n = replicas as f64;
            Ok(EscapePoint {
                x: g.point(x),
                replicas,
                escaped,
                undecided,
                pessimistic: (escaped + undecided) as f64 / n,
                ci: wilson(escaped + undecided, replicas, 1.96),
                optimistic: undecided as f64 / n,
                exact: None,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityRatio {
    pub cap_sigma: f64,
    pub cap_a: f64,
    pub ratio: f64,
    pub min_hit: f64,
    /// cap(Σ) − min_x P_x[H_Σ < kill]·cap(A_N ∩ cluster).
    pub chained_slack: f64,
    pub chained_holds: bool,
}

/// Exact finite-volume capacities with killing on the window face, and the chained bound.
/// Also returns the hitting probabilities of Σ.
pub fn capacity_ratio(p: &InterfaceProblem, tol: f64) -> Result<(CapacityRatio, Vec<f64>)> {
    let sys = DirichletSystem::window(&p.g)?;
    if !p.sigma.is_disjoint(sys.killed()) || !p.a_n.is_disjoint(sys.killed()) {
        return domain("Σ and A_N must stay off the window face");
    }
    if p.sigma.is_empty() {
        let cap_a = sys.capacity(&p.a_n)?;
        let cr = CapacityRatio { cap_sigma: 0.0, cap_a, ratio: 0.0, min_hit: 0.0, chained_slack: 0.0, chained_holds: true };
        return Ok((cr, vec![0.0; p.g.len()]));
    }
    let es = sys.equilibrium(&p.sigma)?;
    let cap_a = sys.capacity(&p.a_n)?;
    let min_hit = p.a_n.iter().map(|x| es.h[x as usize]).fold(f64::INFINITY, f64::min);
    let slack = es.capacity - min_hit * cap_a;
    let cr = CapacityRatio {
        cap_sigma: es.capacity,
        cap_a,
        ratio: es.capacity / cap_a,
        min_hit,
        chained_slack: slack,
        chained_holds: slack >= -tol,
    };
    Ok((cr, es.h))
}

#[derive(Clone, Debug, Serialize)]
pub struct AbsorptionRow {
    pub n: u64,
    pub side: u64,
    pub seed: u64,
    pub epsilon: u64,
    pub two_ell_star: u64,
    pub a_n: f64,
    pub b_n: f64,
    pub c_n: f64,
    pub sigma_size: usize,
    pub refilled: u64,
    pub class_u: ClassU,
    pub interface: InterfaceCheck,
    pub starts: usize,
    pub replicas: u64,
    pub sup_pessimistic: f64,
    pub sup_ci: (f64, f64),
    pub sup_optimistic: f64,
    pub sup_exact: f64,
    pub capacity: CapacityRatio,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbsorptionReport {
    pub growth: GrowthReport,
    pub rows: Vec<AbsorptionRow>,
}

/// One entry of a size sweep: the fixture plus the sequences a_N, b_N, c_N at that N.
#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub fixture: FixtureSpec,
    pub a_n: f64,
    pub b_n: f64,
    pub c_n: f64,
}

/// Runs the escape and capacity sweep. Parameter constraints are checked up front and a
/// violation rejects the run with the inequality named.
pub fn absorption_experiment(
    entries: &[SweepEntry],
    chi: f64,
    sample_cap: usize,
    replicas: u64,
    delta_s: f64,
) -> Result<AbsorptionReport> {
    let growth = growth_check(&GrowthPair {
        n: entries.iter().map(|e| e.fixture.n as f64).collect(),
        a: entries.iter().map(|e| e.a_n).collect(),
        b: entries.iter().map(|e| e.b_n).collect(),
        delta_s,
    })?;
    if !growth.holds() {
        return domain(format!("growth condition on (a_N, b_N) fails: {growth:?}"));
    }
    for e in entries {
        let f = &e.fixture;
        let two = (1u64 << f.ell_star) as f64;
        if f.epsilon as f64 / two > e.c_n {
            return domain(format!("N = {}: ε/2^ℓ* = {} exceeds c_N = {}", f.n, f.epsilon as f64 / two, e.c_n));
        }
        if two < e.a_n || two > e.b_n {
            return domain(format!("N = {}: a_N ≤ 2^ℓ* ≤ b_N fails ({} ≤ {two} ≤ {})", f.n, e.a_n, e.b_n));
        }
    }
    let mut rows = Vec::new();
    for e in entries {
        let mut f = e.fixture.clone();
        f.b_n = Some(e.b_n);
        let p = build_standard_problem(&f)?;
        let class_u = class_u_membership(&p.g, &p.a_n, &p.u0, f.ell_star, p.b_n);
        let interface = interface_membership_exact(&p.g, &p.s, &p.sigma, f.epsilon, chi);
        let (capacity, h) = capacity_ratio(&p, 1e-9)?;
        let starts = sample_starts(&p.g, &p.a_n, sample_cap, f.seed);
        let mut pts = escape_estimates(&p.g, &p.sigma, &starts, replicas, f.seed ^ 0xE5CA)?;
        for (pt, &x) in pts.iter_mut().zip(&starts) {
            pt.exact = Some(1.0 - h[x as usize]);
        }
        let worst = pts.iter().max_by(|a, b| a.pessimistic.total_cmp(&b.pessimistic)).unwrap();
        let sup_exact = p.a_n.iter().map(|x| 1.0 - h[x as usize]).fold(0.0, f64::max);
        rows.push(AbsorptionRow {
            n: f.n,
            side: f.side,
            seed: f.seed,
            epsilon: f.epsilon,
            two_ell_star: 1 << f.ell_star,
            a_n: e.a_n,
            b_n: e.b_n,
            c_n: e.c_n,
            sigma_size: p.sigma.count(),
            refilled: p.refilled,
            class_u,
            interface,
            starts: starts.len(),
            replicas,
            sup_pessimistic: worst.pessimistic,
            sup_ci: worst.ci,
            sup_optimistic: pts.iter().map(|p| p.optimistic).fold(0.0, f64::max),
            sup_exact,
            capacity,
        });
    }
    Ok(AbsorptionReport { growth, rows })
}

/// {x : #{ℓ ∈ scales : σ̃_ℓ(x) ∈ [α̃, 1−α̃]} ≥ J}.
pub fn resonance_set(ctx: &DensityContext, u1: &VertexSet, scales: &[u32], j: usize, alpha_tilde: f64) -> Result<VertexSet> {
    if scales.is_empty() {
        return domain("no scales given for the resonance set");
    }
    let g = ctx.graph();
    let idx = ctx.subset_index(u1);
    let mut counts = vec![0usize; g.len()];
    for &ell in scales {
        let f = ctx.field_with(&idx, "", ell, Variant::SigmaTilde);
        for (c, &s) in counts.iter_mut().zip(&f.values) {
            *c += (s >= alpha_tilde && s <= 1.0 - alpha_tilde) as usize;
        }
    }
    Ok(VertexSet::from_ids(g.len(), (0..g.len() as u32).filter(|&v| counts[v as usize] >= j)))
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiReport {
    pub resonance_size: usize,
    pub points: Vec<EscapePoint>,
    pub sup_pessimistic: f64,
    pub sup_optimistic: f64,
}

/// Φ̂(x) = P_x[window before Res] for each start; 1 everywhere when Res is empty.
pub fn estimate_phi(g: &ClusterGraph, res: &VertexSet, starts: &[u32], replicas: u64, seed: u64) -> Result<PhiReport> {
    let points = if res.is_empty() {
        starts
            .iter()
            .map(|&x| EscapePoint {
                x: g.point(x),
                replicas: 0,
                escaped: 0,
                undecided: 0,
                pessimistic: 1.0,
                ci: (1.0, 1.0),
                optimistic: 1.0,
                exact: Some(1.0),
            })
            .collect()
    } else {
        escape_estimates(g, res, starts, replicas, seed)?
    };
    Ok(PhiReport {
        resonance_size: res.count(),
        sup_pessimistic: points.iter().map(|p| p.pessimistic).fold(f64::NEG_INFINITY, f64::max),
        sup_optimistic: points.iter().map(|p| p.optimistic).fold(f64::NEG_INFINITY, f64::max),
        points,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OneStepProbe {
    pub x: Point,
    pub average: f64,
    pub p_hat: f64,
    pub ci: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct OneStepReport {
    pub ell: u32,
    pub ell_prime: u32,
    pub delta: f64,
    pub replicas: u64,
    pub skipped: usize,
    pub probes: Vec<OneStepProbe>,
    /// Smallest estimate over probes: the measured c₁(δ).
    pub min_p: f64,
    pub min_ci: (f64, f64),
}

/// For each probe x, estimates P_x[H_{σ_{ℓ′} ∈ [m−δ, m+δ]} < τ_{2^ℓ}] with m the ball
/// average of σ_{ℓ′} over B(x, 2^ℓ). Probes with δ > m ∧ (1−m) ∧ ¼ are skipped.
#[allow(clippy::too_many_arguments)]
pub fn one_step_experiment(
    ctx: &DensityContext,
    u1: &VertexSet,
    ell: u32,
    ell_prime: u32,
    delta: f64,
    probes: &[u32],
    replicas: u64,
    seed: u64,
) -> Result<OneStepReport> {
    let g = ctx.graph();
    let sig = ctx.field(u1, "", ell_prime, Variant::Sigma).values;
    let fs = ctx.function_index(&sig);
    let mut out = Vec::new();
    let mut skipped = 0;
    for (k, &x) in probes.iter().enumerate() {
        let m = ctx.average_at(&fs, &g.point(x).0, ell).value;
        if !(delta > 0.0 && delta <= m.min(1.0 - m).min(0.25)) {
            skipped += 1;
            continue;
        }
        let target = VertexSet::from_ids(
            g.len(),
            (0..g.len() as u32).filter(|&v| (sig[v as usize] - m).abs() <= delta),
        );
        let q = strict_radius_query(g, &target, x, 1u64 << ell);
        let e = estimate_hit_before(g, x, &q, replicas, seed.wrapping_add(k as u64))?;
        out.push(OneStepProbe { x: g.point(x), average: m, p_hat: e.p_hat, ci: e.ci });
    }
    if out.is_empty() {
        return domain("every probe failed the δ precondition");
    }
    let worst = out.iter().min_by(|a, b| a.p_hat.total_cmp(&b.p_hat)).unwrap();
    Ok(OneStepReport {
        ell,
        ell_prime,
        delta,
        replicas,
        skipped,
        min_p: worst.p_hat,
        min_ci: worst.ci,
        probes: out,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CascadeReport {
    pub ells: Vec<u32>,
    pub probes_used: usize,
    pub probes_skipped: usize,
    pub trials: u64,
    pub successes: u64,
    /// Empirical c₂(J).
    pub rate: f64,
    pub ci: (f64, f64),
    pub budget_exhausted: u64,
    pub extent_violations: u64,
    pub sigma_tilde_violations: u64,
}

/// Runs the cascade from each probe with |σ_{ℓ₀}(x) − ½| ≤ `tolerance`.
pub fn cascade_experiment(
    g: &ClusterGraph,
    plan: &CascadePlan,
    probes: &[u32],
    tolerance: f64,
    replicas: u64,
    seed: u64,
    step_budget: u64,
) -> Result<CascadeReport> {
    let used: Vec<u32> = probes.iter().copied().filter(|&x| (plan.sigma(0, x) - 0.5).abs() <= tolerance).collect();
    let records: Vec<(bool, bool, usize, usize)> = used
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, &x)| {
            (0..replicas).map(move |r| {
                run_gamma_cascade(g, x, plan, seed.wrapping_add(k as u64), r, step_budget).map(|rec| {
                    (rec.success, rec.budget_exhausted, rec.extent_violations(plan), rec.sigma_tilde_violations(plan))
                })
            })
        })
        .collect::<Result<_>>()?;
    let trials = records.len() as u64;
    let successes = records.iter().filter(|r| r.0).count() as u64;
    let mut rep = CascadeReport {
        ells: plan.ells.clone(),
        probes_used: used.len(),
        probes_skipped: probes.len() - used.len(),
        trials,
        successes,
        rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        ci: wilson(successes, trials, 1.96),
        budget_exhausted: records.iter().filter(|r| r.1).count() as u64,
        extent_violations: 0,
        sigma_tilde_violations: 0,
    };
    for r in records.iter().filter(|r| r.0) {
        rep.extent_violations += r.2 as u64;
        rep.sigma_tilde_violations += r.3 as u64;
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct HitSigmaReport {
    pub ell: u32,
    pub probes_used: usize,
    pub probes_skipped: usize,
    pub pairs: usize,
    /// min over probes and starts of P_y[H_Σ < T_{B(x₀, 5·2^ℓ)}]: the measured c₅.
    pub min_p: f64,
}

/// Exact P_y[H_Σ < T_{B(x₀,5·2^ℓ)}] for y ∈ B(x₀, 2^ℓ/4) at probes x₀ whose σ̃_ℓ is in
/// [α̃, 1−α̃]; `starts_per_probe` caps the y's examined per probe.
#[allow(clippy::too_many_arguments)]
pub fn hit_sigma_experiment(
    ctx: &DensityContext,
    u1: &VertexSet,
    sigma: &VertexSet,
    ell: u32,
    eps: u64,
    alpha_tilde: f64,
    probes: &[u32],
    starts_per_probe: usize,
    seed: u64,
) -> Result<HitSigmaReport> {
    if 4 * eps > 1u64 << ell {
        return domain(format!("need ε ≤ 2^ℓ/4 (ε = {eps}, ℓ = {ell})"));
    }
    let g = ctx.graph();
    let st = ctx.field(u1, "", ell, Variant::SigmaTilde).values;
    let mut used = 0;
    let mut pairs = 0;
    let mut min_p = f64::INFINITY;
    for &x0 in probes {
        let s = st[x0 as usize];
        if s < alpha_tilde || s > 1.0 - alpha_tilde {
            continue;
        }
        used += 1;
        let c = g.point(x0).0;
        let region = g.ball_set(&c, 5 << ell);
        let sys = DirichletSystem::new(g, region.complement())?;
        let h = sys.hit_prob(&sigma.intersection(&region))?.h;
        let near = subsample(g.ball_set(&c, (1u64 << ell) / 4).to_vec(), starts_per_probe, seed ^ x0 as u64);
        for y in near {
            pairs += 1;
            min_p = min_p.min(h[y as usize]);
        }
    }
    if used == 0 {
        return Err(Error::Domain("no probe satisfies the σ̃ precondition".into()));
    }
    Ok(HitSigmaReport { ell, probes_used: used, probes_skipped: probes.len() - used, pairs, min_p })
}

/// Text format: one point per line as whitespace-separated integers, `#` starts a comment.
pub fn write_vertex_set(g: &ClusterGraph, s: &VertexSet, out: &mut impl Write) -> Result<()> {
    let mut c = vec![0i64; g.dim()];
    for v in s.iter() {
        g.coords_into(v, &mut c);
        let line: Vec<String> = c.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_vertex_set(g: &ClusterGraph, input: impl BufRead) -> Result<VertexSet> {
    let mut pts = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let c: Vec<i64> = body
            .split_whitespace()
            .map(|t| t.parse::<i64>().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1))))
            .collect::<Result<_>>()?;
        if c.len() != g.dim() {
            return Err(Error::Parse(format!("line {}: expected {} coordinates, got {}", no + 1, g.dim(), c.len())));
        }
        pts.push(Point(c));
    }
    VertexSet::from_points(g, &pts)
}
