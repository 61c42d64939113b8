//! Simple random walk on a cluster: the embedded jump chain, the constant-speed
//! continuous-time walk, stopping times, and the γ-cascade.

use crate::cluster_graph::{ClusterGraph, VertexSet};
use crate::density::{DensityContext, Variant};
use crate::error::{domain, Error, Result};
use crate::rng::{exp1, replica_rng, stream};
use crate::schedule::ScaleSchedule;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Which stopping conditions to watch. At every visited vertex (including the start)
/// stops are tested in the order targets, exits, radii, window face.
#[derive(Clone, Debug)]
pub struct StopSpec {
    /// Entrance stops: fire when the walk is in the set.
    pub targets: Vec<(String, VertexSet)>,
    /// Exit stops: fire when the walk is outside the set.
    pub exits: Vec<(String, VertexSet)>,
    /// τ_r stops: fire when the sup-distance from the start reaches r.
    pub radii: Vec<u64>,
    pub step_budget: u64,
    /// Treat vertices on the window face as an absorbing escape.
    pub window_kill: bool,
}

impl StopSpec {
    pub fn new(step_budget: u64) -> Self {
        StopSpec { targets: Vec::new(), exits: Vec::new(), radii: Vec::new(), step_budget, window_kill: false }
    }

    pub fn target(mut self, name: &str, s: VertexSet) -> Self {
        self.targets.push((name.to_string(), s));
        self
    }

    pub fn exit(mut self, name: &str, s: VertexSet) -> Self {
        self.exits.push((name.to_string(), s));
        self
    }

    pub fn radius(mut self, r: u64) -> Self {
        self.radii.push(r);
        self
    }

    pub fn window_kill(mut self, on: bool) -> Self {
        self.window_kill = on;
        self
    }

    fn validate(&self, g: &ClusterGraph) -> Result<()> {
        if self.step_budget == 0 {
            return domain("step budget must be at least 1");
        }
        if self.targets.is_empty() && self.exits.is_empty() && self.radii.is_empty() && !self.window_kill {
            return domain("no stopping condition given");
        }
        for (name, s) in self.targets.iter().chain(&self.exits) {
            if s.capacity() != g.len() {
                return domain(format!("set {name} is sized for {} vertices, graph has {}", s.capacity(), g.len()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Cause {
    Target(usize),
    Exit(usize),
    Radius(usize),
    Window,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkOutcome {
    pub cause: Cause,
    pub position: u32,
    pub jumps: u64,
    /// Sum of holding times; zero for the jump chain.
    pub elapsed: f64,
    /// Largest sup-distance from the start along the path.
    pub extent: u64,
}

fn check_start(g: &ClusterGraph, x0: u32) -> Result<()> {
    if x0 as usize >= g.len() {
        return domain(format!("start vertex {x0} not in the cluster"));
    }
    if g.mu(x0) == 0 {
        return Err(Error::Structural(format!("start vertex {x0} has no open edges")));
    }
    Ok(())
}

fn fired(g: &ClusterGraph, spec: &StopSpec, v: u32, dist: u64) -> Option<Cause> {
    if let Some(i) = spec.targets.iter().position(|(_, s)| s.contains(v)) {
        return Some(Cause::Target(i));
    }
    if let Some(i) = spec.exits.iter().position(|(_, s)| !s.contains(v)) {
        return Some(Cause::Exit(i));
    }
    if let Some(i) = spec.radii.iter().position(|&r| dist >= r) {
        return Some(Cause::Radius(i));
    }
    if spec.window_kill && g.on_window_face(v) {
        return Some(Cause::Window);
    }
    None
}

#[inline]
fn step(g: &ClusterGraph, v: u32, rng: &mut ChaCha8Rng) -> u32 {
    let nb = g.neighbors(v);
    nb[rng.gen_range(0..nb.len())]
}

fn run(g: &ClusterGraph, x0: u32, spec: &StopSpec, seed: u64, replica: u64, timed: bool) -> Result<WalkOutcome> {
    check_start(g, x0)?;
    spec.validate(g)?;
    let mut jump = replica_rng(seed, stream::JUMP, replica);
    let mut hold = replica_rng(seed, stream::HOLD, replica);
    let d = g.dim();
    let mut origin = vec![0i64; d];
    g.coords_into(x0, &mut origin);
    let mut cur = vec![0i64; d];
    let mut v = x0;
    let (mut jumps, mut elapsed, mut extent) = (0u64, 0.0f64, 0u64);
    loop {
        g.coords_into(v, &mut cur);
        let dist = crate::lattice::sup_dist(&origin, &cur);
        extent = extent.max(dist);
        if let Some(cause) = fired(g, spec, v, dist) {
            return Ok(WalkOutcome { cause, position: v, jumps, elapsed, extent });
        }
        if jumps == spec.step_budget {
            return Ok(WalkOutcome { cause: Cause::Budget, position: v, jumps, elapsed, extent });
        }
        if timed {
            elapsed += exp1(hold.gen::<f64>());
        }
        v = step(g, v, &mut jump);
        jumps += 1;
    }
}

/// Embedded discrete chain: each step moves to a uniform open neighbor.
pub fn run_jump_chain(g: &ClusterGraph, x0: u32, spec: &StopSpec, seed: u64, replica: u64) -> Result<WalkOutcome> {
    run(g, x0, spec, seed, replica, false)
}

/// Constant-speed walk: the same jump sequence as [`run_jump_chain`] for the same
/// `(seed, replica)`, with unit-mean exponential holding times from a separate stream.
pub fn run_ct_walk(g: &ClusterGraph, x0: u32, spec: &StopSpec, seed: u64, replica: u64) -> Result<WalkOutcome> {
    run(g, x0, spec, seed, replica, true)
}

/// Position of the continuous-time walk at time `t`, for kernel histograms.
pub fn ct_position_at(g: &ClusterGraph, x0: u32, t: f64, seed: u64, replica: u64) -> Result<u32> {
    check_start(g, x0)?;
    let mut jump = replica_rng(seed, stream::JUMP, replica);
    let mut hold = replica_rng(seed, stream::HOLD, replica);
    let mut v = x0;
    let mut clock = exp1(hold.gen::<f64>());
    while clock <= t {
        v = step(g, v, &mut jump);
        clock += exp1(hold.gen::<f64>());
    }
    Ok(v)
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let mid = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

#[derive(Clone, Debug)]
pub enum Guard {
    Radius(u64),
    Exit(VertexSet),
}

#[derive(Clone, Debug, Serialize)]
pub struct HitEstimate {
    pub replicas: u64,
    pub hits: u64,
    /// Walks absorbed at the window face before either event.
    pub escapes: u64,
    /// Walks that used up the step budget.
    pub undecided: u64,
    pub p_hat: f64,
    /// Wilson 95% interval of `p_hat`.
    pub ci: (f64, f64),
    /// Bound that counts every escape and undecided walk as a hit.
    pub p_pessimistic: f64,
}

#[derive(Clone, Debug)]
pub struct HitQuery {
    pub target: VertexSet,
    pub guard: Guard,
    pub window_kill: bool,
    pub step_budget: u64,
}

impl HitQuery {
    pub fn new(target: VertexSet, guard: Guard) -> Self {
        HitQuery { target, guard, window_kill: true, step_budget: 100_000_000 }
    }

    fn spec(&self) -> StopSpec {
        let mut s = StopSpec::new(self.step_budget).target("target", self.target.clone()).window_kill(self.window_kill);
        match &self.guard {
            Guard::Radius(r) => s.radii.push(*r),
            Guard::Exit(u) => s.exits.push(("guard".into(), u.clone())),
        }
        s
    }
}

/// Outcome of one path for a hit-before query.
pub fn hit_outcome(g: &ClusterGraph, x0: u32, q: &HitQuery, seed: u64, replica: u64) -> Result<Cause> {
    Ok(run_jump_chain(g, x0, &q.spec(), seed, replica)?.cause)
}

/// Monte Carlo estimate of P_x[H_target < guard]. Window escapes count against the hit.
pub fn estimate_hit_before(g: &ClusterGraph, x0: u32, q: &HitQuery, replicas: u64, seed: u64) -> Result<HitEstimate> {
    if replicas == 0 {
        return domain("need at least one replica");
    }
    let spec = q.spec();
    check_start(g, x0)?;
    spec.validate(g)?;
    let causes: Vec<Cause> =
        (0..replicas).into_par_iter().map(|r| run_jump_chain(g, x0, &spec, seed, r).map(|o| o.cause)).collect::<Result<_>>()?;
    let hits = causes.iter().filter(|c| matches!(c, Cause::Target(_))).count() as u64;
    let escapes = causes.iter().filter(|c| matches!(c, Cause::Window)).count() as u64;
    let undecided = causes.iter().filter(|c| matches!(c, Cause::Budget)).count() as u64;
    Ok(HitEstimate {
        replicas,
        hits,
        escapes,
        undecided,
        p_hat: hits as f64 / replicas as f64,
        ci: wilson(hits, replicas, 1.96),
        p_pessimistic: (hits + escapes + undecided) as f64 / replicas as f64,
    })
}

/// Scales, intervals and precomputed densities for one cascade.
#[derive(Clone, Debug)]
pub struct CascadePlan {
    /// ℓ₀ > ℓ₁ > … > ℓ_J.
    pub ells: Vec<u32>,
    pub intervals: Vec<(f64, f64)>,
    pub alpha_tilde: f64,
    sigma: Vec<Vec<f64>>,
    sigma_tilde: Vec<Vec<f64>>,
}

impl CascadePlan {
    pub fn new(ctx: &DensityContext, u1: &VertexSet, ells: &[u32], intervals: &[(f64, f64)], alpha_tilde: f64) -> Result<Self> {
        if ells.is_empty() || ells.len() != intervals.len() {
            return domain(format!("{} scales for {} intervals", ells.len(), intervals.len()));
        }
        if ells.windows(2).any(|w| w[0] <= w[1]) {
            return domain("scales must be strictly decreasing");
        }
        let idx = ctx.subset_index(u1);
        let sigma = ells.iter().map(|&l| ctx.field_with(&idx, "", l, Variant::Sigma).values).collect();
        let sigma_tilde = ells.iter().map(|&l| ctx.field_with(&idx, "", l, Variant::SigmaTilde).values).collect();
        Ok(CascadePlan { ells: ells.to_vec(), intervals: intervals.to_vec(), alpha_tilde, sigma, sigma_tilde })
    }

    /// Uses the intervals and α̃ of a schedule with the given scales (J + 1 of them).
    pub fn from_schedule(ctx: &DensityContext, u1: &VertexSet, s: &ScaleSchedule, ells: &[u32]) -> Result<Self> {
        if ells.len() != s.j as usize + 1 {
            return domain(format!("schedule has J = {} but {} scales were given", s.j, ells.len()));
        }
        CascadePlan::new(ctx, u1, ells, &s.intervals, s.alpha_tilde)
    }

    pub fn j(&self) -> usize {
        self.ells.len() - 1
    }

    pub fn sigma(&self, j: usize, v: u32) -> f64 {
        self.sigma[j][v as usize]
    }

    fn in_interval(&self, j: usize, v: u32) -> bool {
        let (a, b) = self.intervals[j];
        let s = self.sigma(j, v);
        s >= a && s <= b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeRecord {
    pub success: bool,
    /// Stage at which the cascade stopped short, if it did.
    pub failed_stage: Option<usize>,
    pub budget_exhausted: bool,
    /// X_{γ_j} for each completed stage.
    pub anchors: Vec<u32>,
    /// sup |X_s − X_{γ_j}| over γ_j ≤ s ≤ end of run.
    pub extents: Vec<u64>,
    /// σ̃_{ℓ_j}(X_{γ_J}) for all j, filled on success.
    pub sigma_tilde_end: Vec<f64>,
    pub jumps: u64,
}

impl CascadeRecord {
    /// Violations of the (3/2)·2^{ℓ_j} extent bound.
    pub fn extent_violations(&self, plan: &CascadePlan) -> usize {
        self.extents.iter().zip(&plan.ells).filter(|(&e, &l)| 2 * e > 3 << l).count()
    }

    /// Violations of σ̃ ∈ [α̃, 1 − α̃].
    pub fn sigma_tilde_violations(&self, plan: &CascadePlan) -> usize {
        let a = plan.alpha_tilde;
        self.sigma_tilde_end.iter().filter(|&&s| s < a || s > 1.0 - a).count()
    }
}

/// Runs the jump chain through the stages γ₀ ≤ γ₁ ≤ … ≤ γ_J. Stage j succeeds when
/// the walk enters {σ_{ℓ_{j+1}} ∈ I_{j+1}} strictly before it has moved sup-distance
/// 2^{ℓ_j} from X_{γ_j}.
pub fn run_gamma_cascade(
    g: &ClusterGraph,
    x0: u32,
    plan: &CascadePlan,
    seed: u64,
    replica: u64,
    step_budget: u64,
) -> Result<CascadeRecord> {
    check_start(g, x0)?;
    if plan.sigma[0].len() != g.len() {
        return domain("cascade plan was built for a different graph");
    }
    let jj = plan.j();
    let d = g.dim();
    let mut rng = replica_rng(seed, stream::JUMP, replica);
    let mut rec = CascadeRecord {
        success: false,
        failed_stage: None,
        budget_exhausted: false,
        anchors: Vec::with_capacity(jj + 1),
        extents: Vec::with_capacity(jj + 1),
        sigma_tilde_end: Vec::new(),
        jumps: 0,
    };
    if !plan.in_interval(0, x0) {
        rec.failed_stage = Some(0);
        return Ok(rec);
    }
    let mut anchor_coords: Vec<Vec<i64>> = Vec::with_capacity(jj + 1);
    let push_anchor = |rec: &mut CascadeRecord, ac: &mut Vec<Vec<i64>>, v: u32| {
        rec.anchors.push(v);
        rec.extents.push(0);
        ac.push(g.point(v).0);
    };
    push_anchor(&mut rec, &mut anchor_coords, x0);
    let mut v = x0;
    let mut cur = vec![0i64; d];
    for j in 0..jj {
        let r = 1u64 << plan.ells[j];
        loop {
            g.coords_into(v, &mut cur);
            for (e, a) in rec.extents.iter_mut().zip(&anchor_coords) {
                *e = (*e).max(crate::lattice::sup_dist(a, &cur));
            }
            if crate::lattice::sup_dist(&anchor_coords[j], &cur) >= r {
                rec.failed_stage = Some(j + 1);
                return Ok(rec);
            }
            if plan.in_interval(j + 1, v) {
                break;
            }
            if rec.jumps == step_budget {
                rec.failed_stage = Some(j + 1);
                rec.budget_exhausted = true;
                return Ok(rec);
            }
            v = step(g, v, &mut rng);
            rec.jumps += 1;
        }
        push_anchor(&mut rec, &mut anchor_coords, v);
    }
    rec.success = true;
    rec.sigma_tilde_end = (0..=jj).map(|j| plan.sigma_tilde[j][v as usize]).collect();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::half_space;
    use crate::percolation::{label_clusters, largest_cluster, Model, PercConfig};

    fn cluster(side: u64, seed: u64) -> ClusterGraph {
        let cfg = PercConfig::generate(Model::Site, 3, side, 0.75, seed).unwrap();
        largest_cluster(&cfg, &label_clusters(&cfg)).unwrap()
    }

    #[test]
    fn start_in_target_fires_at_zero() {
        let g = cluster(8, 1);
        let t = VertexSet::from_ids(g.len(), [0]);
        let o = run_jump_chain(&g, 0, &StopSpec::new(10).target("t", t), 1, 0).unwrap();
        assert_eq!((o.cause, o.jumps), (Cause::Target(0), 0));
        let o = run_jump_chain(&g, 0, &StopSpec::new(10).radius(0), 1, 0).unwrap();
        assert_eq!((o.cause, o.jumps), (Cause::Radius(0), 0));
    }

    #[test]
    fn spec_validation() {
        let g = cluster(8, 1);
        assert!(run_jump_chain(&g, 0, &StopSpec::new(10), 1, 0).is_err());
        assert!(run_jump_chain(&g, 0, &StopSpec::new(0).radius(1), 1, 0).is_err());
        assert!(run_jump_chain(&g, g.len() as u32, &StopSpec::new(5).radius(1), 1, 0).is_err());
        let o = run_jump_chain(&g, 0, &StopSpec::new(5).radius(1000), 1, 0).unwrap();
        assert_eq!((o.cause, o.jumps), (Cause::Budget, 5));
    }

    #[test]
    fn priority_order() {
        let g = ClusterGraph::full_window(3, 5).unwrap();
        let x = g.vertex_of(&[0, 0, 0]).unwrap();
        let all = VertexSet::all(g.len());
        let none = VertexSet::empty(g.len());
        let spec = StopSpec::new(3).target("t", all.clone()).exit("e", none.clone()).radius(0);
        assert_eq!(run_jump_chain(&g, x, &spec, 0, 0).unwrap().cause, Cause::Target(0));
        let spec = StopSpec::new(3).exit("e", none).radius(0);
        assert_eq!(run_jump_chain(&g, x, &spec, 0, 0).unwrap().cause, Cause::Exit(0));
    }

    #[test]
    fn jump_chain_and_ct_agree() {
        let g = cluster(10, 4);
        let t = VertexSet::from_ids(g.len(), (0..g.len() as u32).filter(|v| v % 13 == 5));
        let spec = StopSpec::new(10_000).target("t", t).radius(4).window_kill(true);
        for r in 0..200 {
            let a = run_jump_chain(&g, 0, &spec, 9, r).unwrap();
            let b = run_ct_walk(&g, 0, &spec, 9, r).unwrap();
            assert_eq!((a.cause, a.position, a.jumps, a.extent), (b.cause, b.position, b.jumps, b.extent));
            assert_eq!(a.elapsed, 0.0);
        }
    }

    #[test]
    fn holding_times_have_unit_mean() {
        let g = ClusterGraph::full_window(3, 9).unwrap();
        let spec = StopSpec::new(10_000).radius(100);
        let (mut t, mut n) = (0.0, 0u64);
        for r in 0..100 {
            let o = run_ct_walk(&g, 0, &spec, 3, r).unwrap();
            t += o.elapsed;
            n += o.jumps;
        }
        assert_eq!(n, 1_000_000);
        assert!((t / n as f64 - 1.0).abs() < 0.01);
    }

    #[test]
    fn neighbors_as_target_hit_surely() {
        let g = ClusterGraph::full_window(3, 7).unwrap();
        let x = g.vertex_of(&[0, 0, 0]).unwrap();
        let t = VertexSet::from_ids(g.len(), g.neighbors(x).iter().copied());
        let e = estimate_hit_before(&g, x, &HitQuery::new(t, Guard::Radius(2)), 500, 1).unwrap();
        assert_eq!(e.p_hat, 1.0);
        let e = estimate_hit_before(&g, x, &HitQuery::new(VertexSet::empty(g.len()), Guard::Radius(2)), 500, 1).unwrap();
        assert_eq!(e.p_hat, 0.0);
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson(0, 10, 1.96).0, 0.0);
        assert_eq!(wilson(10, 10, 1.96).1, 1.0);
    }

    #[test]
    fn cascade_degenerate_cases() {
        let g = ClusterGraph::full_window(3, 17).unwrap();
        let ctx = DensityContext::new(&g);
        let x = g.vertex_of(&[0, 0, 0]).unwrap();
        let u1 = half_space(&g, 0, 1);
        // σ_1(0) = 2/5 on the full lattice.
        let plan = CascadePlan::new(&ctx, &u1, &[1], &[(0.35, 0.45)], 0.1).unwrap();
        let rec = run_gamma_cascade(&g, x, &plan, 0, 0, 100).unwrap();
        assert!(rec.success);
        assert_eq!(rec.extents, vec![0]);
        let plan = CascadePlan::new(&ctx, &u1, &[1], &[(0.45, 0.55)], 0.1).unwrap();
        assert_eq!(run_gamma_cascade(&g, x, &plan, 0, 0, 100).unwrap().failed_stage, Some(0));
        let empty = VertexSet::empty(g.len());
        let plan = CascadePlan::new(&ctx, &empty, &[2, 0], &[(0.4, 0.6), (0.4, 0.6)], 0.1).unwrap();
        assert!(!run_gamma_cascade(&g, x, &plan, 0, 0, 100).unwrap().success);
        assert!(CascadePlan::new(&ctx, &u1, &[0, 2], &[(0.4, 0.6), (0.4, 0.6)], 0.1).is_err());
    }

    #[test]
    fn cascade_successes_respect_bounds() {
        let g = ClusterGraph::full_window(3, 41).unwrap();
        let ctx = DensityContext::new(&g);
        let u1 = half_space(&g, 0, 1);
        let x = g.vertex_of(&[0, 0, 0]).unwrap();
        let plan = CascadePlan::new(&ctx, &u1, &[3, 1], &[(0.45, 0.55), (0.4, 0.6)], 3.0 / 640.0).unwrap();
        let mut wins = 0;
        for r in 0..200 {
            let rec = run_gamma_cascade(&g, x, &plan, 5, r, 1_000_000).unwrap();
            if rec.success {
                wins += 1;
                assert_eq!(rec.extent_violations(&plan), 0);
                assert_eq!(rec.sigma_tilde_violations(&plan), 0);
                assert_eq!(rec.anchors.len(), 2);
            }
        }
        assert!(wins > 0);
    }
}
