//! Local densities of a subset of the cluster, ball averages, and the volume
//! regularity checks they rely on.

use crate::bitset::BitSet;
use crate::cluster_graph::{ClusterGraph, VertexSet};
use crate::error::{domain, Result};
use crate::lattice::Window;
use crate::percolation::{label_clusters, PercConfig};
use crate::rng::{hash3, stream};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Accumulator for inclusion-exclusion box sums. `u32` wraps, which is exact as long as
/// every true box sum fits in 32 bits.
pub trait Acc: Copy + Default + Send + Sync {
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
}

impl Acc for u32 {
    #[inline]
    fn add(self, o: Self) -> Self {
        self.wrapping_add(o)
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.wrapping_sub(o)
    }
}

impl Acc for f64 {
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
}

/// d-dimensional summed-area table over a window, padded with a zero layer on the low side.
#[derive(Clone, Debug)]
pub struct PrefixSum<T> {
    dim: usize,
    n: usize,
    strides: Vec<usize>,
    data: Vec<T>,
}

impl<T: Acc> PrefixSum<T> {
    pub fn build(w: &Window, value: impl Fn(usize) -> T) -> Self {
        let d = w.dim();
        let side = w.side() as usize;
        let n = side + 1;
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * n;
        }
        let mut data = vec![T::default(); strides[0] * n];
        for i in 0..w.len() {
            let mut rest = i;
            let mut j = 0;
            for k in (0..d).rev() {
                j += (rest % side + 1) * strides[k];
                rest /= side;
            }
            data[j] = value(i);
        }
        for k in 0..d {
            let s = strides[k];
            for j in s..data.len() {
                if (j / s) % n != 0 {
                    data[j] = data[j].add(data[j - s]);
                }
            }
        }
        PrefixSum { dim: d, n, strides, data }
    }

    /// Sum over the inclusive box with local corners `lo..=hi`. The box must be non-empty
    /// and inside the window.
    pub fn box_sum(&self, lo: &[usize], hi: &[usize]) -> T {
        let mut pos = T::default();
        let mut neg = T::default();
        for mask in 0..(1usize << self.dim) {
            let mut j = 0;
            for k in 0..self.dim {
                let c = if mask >> k & 1 == 1 { lo[k] } else { hi[k] + 1 };
                debug_assert!(c < self.n);
                j += c * self.strides[k];
            }
            if mask.count_ones() % 2 == 0 {
                pos = pos.add(self.data[j]);
            } else {
                neg = neg.add(self.data[j]);
            }
        }
        pos.sub(neg)
    }
}

/// Counts of a site set in sup-balls, answered in O(2^d).
#[derive(Clone, Debug)]
pub struct VolumeIndex {
    window: Window,
    sums: PrefixSum<u32>,
}

/// A clipped ball count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallCount {
    pub count: u64,
    /// Number of lattice sites in the clipped ball.
    pub sites: u64,
    pub truncated: bool,
}

impl VolumeIndex {
    pub fn from_mask(w: &Window, mask: &BitSet) -> Self {
        VolumeIndex { window: w.clone(), sums: PrefixSum::build(w, |i| mask.get(i) as u32) }
    }

    pub fn from_graph(g: &ClusterGraph) -> Self {
        VolumeIndex::from_mask(g.window(), &graph_mask(g))
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn count(&self, center: &[i64], r: u64) -> BallCount {
        let (lo, hi, truncated) = self.window.clip_ball(center, r);
        self.box_count(&lo, &hi, truncated)
    }

    /// Count over an inclusive box given in absolute coordinates, already clipped.
    pub fn box_count(&self, lo: &[i64], hi: &[i64], truncated: bool) -> BallCount {
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            return BallCount { count: 0, sites: 0, truncated: true };
        }
        let o = &self.window.origin().0;
        let l: Vec<usize> = lo.iter().zip(o).map(|(a, o)| (a - o) as usize).collect();
        let h: Vec<usize> = hi.iter().zip(o).map(|(a, o)| (a - o) as usize).collect();
        let sites = lo.iter().zip(hi).map(|(a, b)| (b - a + 1) as u64).product();
        BallCount { count: self.sums.box_sum(&l, &h) as u64, sites, truncated }
    }
}

/// Site mask of the vertices of `g`.
pub fn graph_mask(g: &ClusterGraph) -> BitSet {
    let mut m = BitSet::new(g.window().len());
    for v in 0..g.len() as u32 {
        m.insert(g.site(v));
    }
    m
}

/// Site mask of a vertex subset of `g`.
pub fn set_mask(g: &ClusterGraph, s: &VertexSet) -> BitSet {
    let mut m = BitSet::new(g.window().len());
    for v in s.iter() {
        m.insert(g.site(v));
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Sigma,
    SigmaTilde,
}

impl Variant {
    pub fn radius(self, ell: u32) -> u64 {
        match self {
            Variant::Sigma => 1u64 << ell,
            Variant::SigmaTilde => 4u64 << ell,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sigma => "sigma",
            Variant::SigmaTilde => "sigma_tilde",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Density {
    pub value: f64,
    pub truncated: bool,
}

#[inline]
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_dim(g: &ClusterGraph, x: &[i64]) -> Result<()> {
    if x.len() != g.dim() {
        return domain(format!("point has {} coordinates, graph is {}-dimensional", x.len(), g.dim()));
    }
    Ok(())
}

/// Direct evaluation of σ_ℓ(x) or σ̃_ℓ(x) by scanning the ball.
pub fn sigma(g: &ClusterGraph, u1: &VertexSet, x: &[i64], ell: u32, variant: Variant) -> Result<Density> {
    check_dim(g, x)?;
    let (lo, hi, truncated) = g.window().clip_ball(x, variant.radius(ell));
    let (mut num, mut den) = (0u64, 0u64);
    if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
        g.window().for_each_in_box(&lo, &hi, |i| {
            if let Some(v) = g.vertex_at(i) {
                den += 1;
                num += u1.contains(v) as u64;
            }
        });
    }
    Ok(Density { value: ratio(num, den), truncated })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallAverage {
    pub value: f64,
    pub empty: bool,
    pub truncated: bool,
}

/// Mean of `f` over B(x, 2^ℓ) ∩ g by direct scan; an empty intersection averages to 0.
pub fn ball_average(g: &ClusterGraph, f: &[f64], x: &[i64], ell: u32) -> Result<BallAverage> {
    check_dim(g, x)?;
    if f.len() != g.len() {
        return domain(format!("function has {} values for {} vertices", f.len(), g.len()));
    }
    let (lo, hi, truncated) = g.window().clip_ball(x, 1u64 << ell);
    let (mut sum, mut n) = (0.0, 0u64);
    if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
        g.window().for_each_in_box(&lo, &hi, |i| {
            if let Some(v) = g.vertex_at(i) {
                sum += f[v as usize];
                n += 1;
            }
        });
    }
    let value = if n == 0 { 0.0 } else { sum / n as f64 };
    Ok(BallAverage { value, empty: n == 0, truncated })
}

/// A density function evaluated on every vertex of the cluster.
#[derive(Clone, Debug)]
pub struct DensityField {
    pub scale: u32,
    pub variant: Variant,
    pub u1_id: String,
    pub values: Vec<f64>,
    pub truncated: Vec<bool>,
}

impl DensityField {
    /// Whitespace-separated rows `coords.. value truncated` after a `#` header line.
    pub fn write_csv(&self, g: &ClusterGraph, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# variant={} ell={} u1={}", self.variant.name(), self.scale, self.u1_id)?;
        let names = ["x", "y", "z"];
        let mut cols: Vec<String> = (0..g.dim())
            .map(|k| if g.dim() <= 3 { names[k].to_string() } else { format!("x{k}") })
            .collect();
        cols.push("value".into());
        cols.push("truncated".into());
        writeln!(out, "{}", cols.join(" "))?;
        let mut c = vec![0i64; g.dim()];
        for v in 0..g.len() {
            g.coords_into(v as u32, &mut c);
            for x in &c {
                write!(out, "{x} ")?;
            }
            writeln!(out, "{} {}", self.values[v], self.truncated[v] as u8)?;
        }
        Ok(())
    }
}

/// Precomputed cluster counts for one graph; densities of any subset then cost O(2^d)
/// per point after one O(window) pass.
pub struct DensityContext<'a> {
    g: &'a ClusterGraph,
    cluster: VolumeIndex,
}

impl<'a> DensityContext<'a> {
    pub fn new(g: &'a ClusterGraph) -> Self {
        DensityContext { g, cluster: VolumeIndex::from_graph(g) }
    }

    pub fn graph(&self) -> &ClusterGraph {
        self.g
    }

    pub fn cluster(&self) -> &VolumeIndex {
        &self.cluster
    }

    pub fn subset_index(&self, u1: &VertexSet) -> VolumeIndex {
        VolumeIndex::from_mask(self.g.window(), &set_mask(self.g, u1))
    }

    pub fn density_at(&self, u1: &VolumeIndex, x: &[i64], radius: u64) -> Density {
        let (lo, hi, truncated) = self.g.window().clip_ball(x, radius);
        let den = self.cluster.box_count(&lo, &hi, truncated);
        let num = u1.box_count(&lo, &hi, truncated);
        Density { value: ratio(num.count, den.count), truncated: den.truncated }
    }

    pub fn field(&self, u1: &VertexSet, u1_id: &str, ell: u32, variant: Variant) -> DensityField {
        let idx = self.subset_index(u1);
        self.field_with(&idx, u1_id, ell, variant)
    }

    pub fn field_with(&self, u1: &VolumeIndex, u1_id: &str, ell: u32, variant: Variant) -> DensityField {
        let r = variant.radius(ell);
        let d = self.g.dim();
        let vals: Vec<Density> = (0..self.g.len() as u32)
            .into_par_iter()
            .map_init(
                || vec![0i64; d],
                |c, v| {
                    self.g.coords_into(v, c);
                    self.density_at(u1, c, r)
                },
            )
            .collect();
        DensityField {
            scale: ell,
            variant,
            u1_id: u1_id.to_string(),
            values: vals.iter().map(|s| s.value).collect(),
            truncated: vals.iter().map(|s| s.truncated).collect(),
        }
    }

    /// Prefix sums of a vertex function, for repeated ball averages.
    pub fn function_index(&self, f: &[f64]) -> PrefixSum<f64> {
        PrefixSum::build(self.g.window(), |i| self.g.vertex_at(i).map_or(0.0, |v| f[v as usize]))
    }

    pub fn average_at(&self, fsum: &PrefixSum<f64>, x: &[i64], ell: u32) -> BallAverage {
        let (lo, hi, truncated) = self.g.window().clip_ball(x, 1u64 << ell);
        let n = self.cluster.box_count(&lo, &hi, truncated);
        if n.count == 0 {
            return BallAverage { value: 0.0, empty: true, truncated: n.truncated };
        }
        let o = &self.g.window().origin().0;
        let l: Vec<usize> = lo.iter().zip(o).map(|(a, o)| (a - o) as usize).collect();
        let h: Vec<usize> = hi.iter().zip(o).map(|(a, o)| (a - o) as usize).collect();
        BallAverage { value: fsum.box_sum(&l, &h) / n.count as f64, empty: false, truncated }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaEstimate {
    pub eta: f64,
    /// Half-width of a normal 95% interval over configurations; 0 for a single one.
    pub ci_half_width: f64,
    pub per_config: Vec<f64>,
    pub warning: Option<String>,
}

/// Largest-cluster density averaged over configurations.
pub fn estimate_eta(cfgs: &[PercConfig]) -> Result<EtaEstimate> {
    if cfgs.is_empty() {
        return domain("no configurations supplied");
    }
    let per: Vec<f64> = cfgs
        .iter()
        .map(|c| {
            let lab = label_clusters(c);
            let big = lab.largest().map_or(0, |id| lab.sizes()[id as usize]);
            big as f64 / c.window().len() as f64
        })
        .collect();
    Ok(eta_from_samples(per))
}

pub fn eta_from_samples(per: Vec<f64>) -> EtaEstimate {
    let n = per.len() as f64;
    let eta = per.iter().sum::<f64>() / n;
    let ci = if per.len() > 1 {
        let var = per.iter().map(|x| (x - eta).powi(2)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    } else {
        0.0
    };
    let warning = per
        .iter()
        .any(|&x| x < 0.01)
        .then(|| "largest cluster below 1% of the window; configuration looks subcritical".to_string());
    EtaEstimate { eta, ci_half_width: ci, per_config: per, warning }
}

/// Relative cluster volume in the ball, or `None` when the ball leaves the window.
pub fn relative_volume(cluster: &VolumeIndex, x: &[i64], r: u64) -> Option<f64> {
    let b = cluster.count(x, r);
    (!b.truncated).then(|| b.count as f64 / b.sites as f64)
}

#[inline]
fn in_band(v: f64, eta: f64, alpha: f64) -> bool {
    v >= (1.0 - alpha) * eta && v <= (1.0 + alpha) * eta
}

/// Cluster sites whose ball at radius `r` is truncated or outside the band, indexed for
/// box queries.
pub struct RegularityMap {
    pub radius: u64,
    pub checked: u64,
    pub irregular: u64,
    index: VolumeIndex,
}

impl RegularityMap {
    pub fn build(cluster: &VolumeIndex, mask: &BitSet, r: u64, eta: f64, alpha: f64) -> Self {
        let w = cluster.window();
        let d = w.dim();
        let ones: Vec<usize> = mask.iter_ones().collect();
        let bad: Vec<usize> = ones
            .par_iter()
            .map_init(
                || vec![0i64; d],
                |c, &i| {
                    w.coords_into(i, c);
                    relative_volume(cluster, c, r).is_none_or(|v| !in_band(v, eta, alpha))
                },
            )
            .zip(ones.par_iter())
            .filter_map(|(b, &i)| b.then_some(i))
            .collect();
        let mut bits = BitSet::new(w.len());
        for &i in &bad {
            bits.insert(i);
        }
        RegularityMap {
            radius: r,
            checked: ones.len() as u64,
            irregular: bad.len() as u64,
            index: VolumeIndex::from_mask(w, &bits),
        }
    }

    pub fn is_regular(&self, x: &[i64]) -> bool {
        self.index.count(x, 0).count == 0
    }

    /// True when every cluster site within sup-distance `r` of `x` is regular. The
    /// enclosing ball must sit inside the window.
    pub fn regular_within(&self, x: &[i64], r: u64) -> bool {
        let b = self.index.count(x, r);
        !b.truncated && b.count == 0
    }

    /// True when every cluster site of the inclusive box is regular.
    pub fn regular_in_box(&self, lo: &[i64], hi: &[i64]) -> bool {
        let w = self.index.window();
        if !w.contains(lo) || !w.contains(hi) {
            return false;
        }
        self.index.box_count(lo, hi, false).count == 0
    }
}

/// Smallest dyadic R such that every cluster site of the probe box has relative cluster
/// volume in the band at radii R, 2R and 4R. Stops once a 4R ball no longer fits.
pub fn estimate_r_den(
    cluster: &VolumeIndex,
    mask: &BitSet,
    eta: f64,
    alpha: f64,
    probe_lo: &[i64],
    probe_hi: &[i64],
) -> Result<Option<u64>> {
    let w = cluster.window();
    if !w.contains(probe_lo) || !w.contains(probe_hi) {
        return domain("probe box must lie inside the window");
    }
    let mut probes = Vec::new();
    w.for_each_in_box(probe_lo, probe_hi, |i| {
        if mask.get(i) {
            probes.push(i)
        }
    });
    let d = w.dim();
    let fits = |r: u64| {
        let (_, _, t1) = w.clip_ball(probe_lo, r);
        let (_, _, t2) = w.clip_ball(probe_hi, r);
        !t1 && !t2
    };
    let mut r = 1u64;
    while fits(4 * r) {
        let ok = probes.par_iter().all(|&i| {
            let mut c = vec![0i64; d];
            w.coords_into(i, &mut c);
            [r, 2 * r, 4 * r]
                .iter()
                .all(|&rr| relative_volume(cluster, &c, rr).is_some_and(|v| in_band(v, eta, alpha)))
        });
        if ok {
            return Ok(Some(r));
        }
        r *= 2;
    }
    Ok(None)
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeStats {
    pub radius: u64,
    pub centers: u64,
    pub violating: u64,
    pub fraction: f64,
}

/// Fraction of cluster centers (whose ball fits in the window) with relative volume
/// outside the band. `sample` caps the number of centers, drawn deterministically.
pub fn volume_concentration_stats(
    cluster: &VolumeIndex,
    mask: &BitSet,
    eta: f64,
    alpha: f64,
    r: u64,
    sample: Option<(usize, u64)>,
) -> VolumeStats {
    let w = cluster.window();
    let d = w.dim();
    let lo: Vec<i64> = w.origin().0.iter().map(|o| o + r as i64).collect();
    let hi: Vec<i64> = w.upper().iter().map(|u| u - r as i64).collect();
    let mut centers = Vec::new();
    if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
        w.for_each_in_box(&lo, &hi, |i| {
            if mask.get(i) {
                centers.push(i)
            }
        });
    }
    if let Some((n, seed)) = sample {
        centers = subsample(centers, n, seed);
    }
    let violating = centers
        .par_iter()
        .filter(|&&i| {
            let mut c = vec![0i64; d];
            w.coords_into(i, &mut c);
            relative_volume(cluster, &c, r).is_none_or(|v| !in_band(v, eta, alpha))
        })
        .count() as u64;
    let n = centers.len() as u64;
    VolumeStats { radius: r, centers: n, violating, fraction: ratio(violating, n) }
}

/// Deterministic sample without replacement, kept in increasing order.
pub fn subsample<T: Copy + Ord>(mut items: Vec<T>, n: usize, seed: u64) -> Vec<T> {
    if items.len() <= n {
        return items;
    }
    for i in 0..n {
        let j = i + (hash3(seed, stream::SAMPLE, i as u64) % (items.len() - i) as u64) as usize;
        items.swap(i, j);
    }
    items.truncate(n);
    items.sort_unstable();
    items
}

/// Cluster vertices with coordinates in the inclusive box.
pub fn vertices_in_box(g: &ClusterGraph, lo: &[i64], hi: &[i64]) -> Vec<u32> {
    let w = g.window();
    let lo: Vec<i64> = lo.iter().zip(&w.origin().0).map(|(a, o)| *a.max(o)).collect();
    let hi: Vec<i64> = hi.iter().zip(w.upper()).map(|(a, u)| *a.min(&u)).collect();
    let mut out = Vec::new();
    if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
        w.for_each_in_box(&lo, &hi, |i| {
            if let Some(v) = g.vertex_at(i) {
                out.push(v)
            }
        });
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub ell: u32,
    pub c_lip: f64,
    pub pairs_checked: u64,
    /// Pairs dropped because an endpoint failed regularity or its ball left the window.
    pub pairs_skipped: u64,
    pub violations: u64,
    pub max_increment: f64,
    pub worst_ratio: f64,
}

/// Checks |σ_ℓ(x) − σ_ℓ(y)| ≤ 6·2^{−ℓ}/η over cluster edges with at least one endpoint
/// among the probes, counting each edge once, whose two endpoints are volume-regular at radius 2^ℓ.
pub fn lipschitz_check(
    ctx: &DensityContext,
    u1: &VertexSet,
    ell: u32,
    probe: &[u32],
    eta: f64,
    alpha: f64,
) -> LipschitzReport {
    let g = ctx.graph();
    let r = 1u64 << ell;
    let reg = RegularityMap::build(ctx.cluster(), &graph_mask(g), r, eta, alpha);
    let u1i = ctx.subset_index(u1);
    let c_lip = crate::schedule::c_lip(ell, eta);
    let in_probe = VertexSet::from_ids(g.len(), probe.iter().copied());
    let d = g.dim();
    let point_ok = |v: u32, c: &mut Vec<i64>| {
        g.coords_into(v, c);
        reg.is_regular(c)
    };
    let per: Vec<(u64, u64, u64, f64)> = probe
        .par_iter()
        .map_init(
            || (vec![0i64; d], vec![0i64; d]),
            |(cx, cy), &x| {
                let (mut n, mut skip, mut bad, mut worst) = (0, 0, 0, 0.0f64);
                for &y in g.neighbors(x) {
                    if y < x && in_probe.contains(y) {
                        continue;
                    }
                    if !point_ok(x, cx) || !point_ok(y, cy) {
                        skip += 1;
                        continue;
                    }
                    let sx = ctx.density_at(&u1i, cx, r).value;
                    let sy = ctx.density_at(&u1i, cy, r).value;
                    let inc = (sx - sy).abs();
                    n += 1;
                    if inc > c_lip {
                        bad += 1;
                    }
                    worst = worst.max(inc);
                }
                (n, skip, bad, worst)
            },
        )
        .collect();
    let mut rep = LipschitzReport {
        ell,
        c_lip,
        pairs_checked: 0,
        pairs_skipped: 0,
        violations: 0,
        max_increment: 0.0,
        worst_ratio: 0.0,
    };
    for (n, s, b, w) in per {
        rep.pairs_checked += n;
        rep.pairs_skipped += s;
        rep.violations += b;
        rep.max_increment = rep.max_increment.max(w);
    }
    rep.worst_ratio = rep.max_increment / c_lip;
    rep
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub ell: u32,
    pub ell_prime: u32,
    pub c0: f64,
    pub probes_checked: u64,
    pub skipped_truncated: u64,
    pub skipped_irregular: u64,
    pub violations: u64,
    /// Largest amount by which the average leaves the bracket (≤ 0 when inside).
    pub worst_excess: f64,
}

/// Checks that the ball average of σ_{ℓ′} over B(x, 2^ℓ) lies in
/// [ρσ_ℓ(x) − c₀2^{ℓ′−ℓ}, σ_ℓ(x)/ρ + c₀2^{ℓ′−ℓ}] with ρ = (1−α)/(1+α).
///
/// A probe counts only if x is regular at 2^ℓ and every cluster site within
/// 2^ℓ + 2^{ℓ′} of x is regular at 2^{ℓ′}.
#[allow(clippy::too_many_arguments)]
pub fn average_sandwich_check(
    ctx: &DensityContext,
    u1: &VertexSet,
    ell: u32,
    ell_prime: u32,
    probes: &[u32],
    alpha: f64,
    eta: f64,
) -> Result<SandwichReport> {
    if ell <= ell_prime {
        return domain(format!("need ell > ell' (got {ell} and {ell_prime})"));
    }
    let g = ctx.graph();
    let d = g.dim();
    let mask = graph_mask(g);
    let r = 1u64 << ell;
    let rp = 1u64 << ell_prime;
    let reg_big = RegularityMap::build(ctx.cluster(), &mask, r, eta, alpha);
    let reg_small = RegularityMap::build(ctx.cluster(), &mask, rp, eta, alpha);
    let u1i = ctx.subset_index(u1);
    let small = ctx.field_with(&u1i, "", ell_prime, Variant::Sigma);
    let fsum = ctx.function_index(&small.values);
    let c0 = crate::schedule::c0(d, eta);
    let slack = c0 * 2f64.powi(ell_prime as i32 - ell as i32);
    let rho = (1.0 - alpha) / (1.0 + alpha);
    // 0 = checked, 1 = truncated, 2 = irregular
    let per: Vec<(u8, bool, f64)> = probes
        .par_iter()
        .map_init(
            || vec![0i64; d],
            |c, &x| {
                g.coords_into(x, c);
                let (_, _, t) = g.window().clip_ball(c, r + 2 * rp);
                if t {
                    return (1, false, f64::NEG_INFINITY);
                }
                if !reg_big.is_regular(c) || !reg_small.regular_within(c, r + rp) {
                    return (2, false, f64::NEG_INFINITY);
                }
                let s = ctx.density_at(&u1i, c, r).value;
                let avg = ctx.average_at(&fsum, c, ell).value;
                let lo = rho * s - slack;
                let hi = s / rho + slack;
                let excess = (lo - avg).max(avg - hi);
                (0, excess > 0.0, excess)
            },
        )
        .collect();
    let mut rep = SandwichReport {
        ell,
        ell_prime,
        c0,
        probes_checked: 0,
        skipped_truncated: 0,
        skipped_irregular: 0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    for (k, bad, e) in per {
        match k {
            0 => {
                rep.probes_checked += 1;
                rep.violations += bad as u64;
                rep.worst_excess = rep.worst_excess.max(e);
            }
            1 => rep.skipped_truncated += 1,
            _ => rep.skipped_irregular += 1,
        }
    }
    Ok(rep)
}

/// Cluster vertices with `coord[axis] >= threshold`.
pub fn half_space(g: &ClusterGraph, axis: usize, threshold: i64) -> VertexSet {
    VertexSet::from_predicate(g, |v| g.point(v).0[axis] >= threshold)
}

/// Cluster vertices with ⟨normal, x⟩ ≥ offset. A generic normal makes σ vary finely
/// across the plane instead of in whole-slab steps.
pub fn oblique_half_space(g: &ClusterGraph, normal: &[f64], offset: f64) -> VertexSet {
    VertexSet::from_predicate(g, |v| {
        let p = g.point(v);
        p.0.iter().zip(normal).map(|(&c, &n)| c as f64 * n).sum::<f64>() >= offset
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::{largest_cluster, Model};
    use crate::rng::uniform;

    fn random_cluster(side: u64, p: f64, seed: u64) -> ClusterGraph {
        let cfg = PercConfig::generate(Model::Site, 3, side, p, seed).unwrap();
        let lab = label_clusters(&cfg);
        largest_cluster(&cfg, &lab).unwrap()
    }

    #[test]
    fn prefix_box_sums_match_scan() {
        let w = Window::centered(3, 7).unwrap();
        let f = |i: usize| (i * 7 % 5) as u32;
        let ps = PrefixSum::build(&w, f);
        for (lo, hi) in [([0, 0, 0], [6, 6, 6]), ([1, 2, 3], [4, 2, 6]), ([3, 3, 3], [3, 3, 3])] {
            let mut want = 0;
            let o = &w.origin().0;
            let alo: Vec<i64> = lo.iter().zip(o).map(|(a, o)| *a as i64 + o).collect();
            let ahi: Vec<i64> = hi.iter().zip(o).map(|(a, o)| *a as i64 + o).collect();
            w.for_each_in_box(&alo, &ahi, |i| want += f(i));
            assert_eq!(ps.box_sum(&lo, &hi), want);
        }
    }

    #[test]
    fn trivial_subsets() {
        let g = random_cluster(9, 0.7, 3);
        let x = g.point(0).0;
        assert_eq!(sigma(&g, &VertexSet::empty(g.len()), &x, 1, Variant::Sigma).unwrap().value, 0.0);
        assert_eq!(sigma(&g, &VertexSet::all(g.len()), &x, 1, Variant::Sigma).unwrap().value, 1.0);
    }

    #[test]
    fn half_space_on_full_lattice() {
        // Window side 2·2^ℓ+1 + margin so the ball at the origin is whole.
        for ell in 0..3u32 {
            let side = (1u64 << (ell + 1)) + 3;
            let g = ClusterGraph::full_window(3, side).unwrap();
            let u1 = half_space(&g, 0, 1);
            let s = sigma(&g, &u1, &[0, 0, 0], ell, Variant::Sigma).unwrap();
            assert!(!s.truncated);
            let r = (1u64 << ell) as f64;
            assert!((s.value - r / (2.0 * r + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn context_matches_direct_scan() {
        let g = random_cluster(13, 0.75, 8);
        let u1 = half_space(&g, 1, 0);
        let ctx = DensityContext::new(&g);
        for variant in [Variant::Sigma, Variant::SigmaTilde] {
            for ell in 0..2 {
                let f = ctx.field(&u1, "half", ell, variant);
                for v in 0..g.len() as u32 {
                    let s = sigma(&g, &u1, &g.point(v).0, ell, variant).unwrap();
                    assert_eq!(f.values[v as usize], s.value);
                    assert_eq!(f.truncated[v as usize], s.truncated);
                }
            }
        }
    }

    #[test]
    fn tilde_is_two_scales_up() {
        let g = random_cluster(21, 0.75, 2);
        let u1 = half_space(&g, 2, 1);
        let ctx = DensityContext::new(&g);
        let a = ctx.field(&u1, "h", 0, Variant::SigmaTilde);
        let b = ctx.field(&u1, "h", 2, Variant::Sigma);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn random_average_matches_brute_force() {
        let g = random_cluster(9, 0.8, 5);
        let f: Vec<f64> = (0..g.len()).map(|i| uniform(1, 2, i as u64)).collect();
        let ctx = DensityContext::new(&g);
        let fs = ctx.function_index(&f);
        for v in 0..g.len() as u32 {
            let x = g.point(v).0;
            for ell in 0..3 {
                let brute = ball_average(&g, &f, &x, ell).unwrap();
                let fast = ctx.average_at(&fs, &x, ell);
                assert!((brute.value - fast.value).abs() < 1e-12);
                assert_eq!(brute.truncated, fast.truncated);
            }
        }
    }

    #[test]
    fn average_of_indicator_is_sigma() {
        let g = random_cluster(11, 0.75, 9);
        let u1 = half_space(&g, 0, 0);
        let f: Vec<f64> = (0..g.len() as u32).map(|v| u1.contains(v) as u8 as f64).collect();
        for v in (0..g.len() as u32).step_by(7) {
            let x = g.point(v).0;
            let a = ball_average(&g, &f, &x, 1).unwrap().value;
            let s = sigma(&g, &u1, &x, 1, Variant::Sigma).unwrap().value;
            assert!((a - s).abs() < 1e-15);
        }
    }

    #[test]
    fn all_open_eta_and_r_den() {
        let cfg = PercConfig::all_open(Model::Site, 3, 16).unwrap();
        let est = estimate_eta(std::slice::from_ref(&cfg)).unwrap();
        assert_eq!(est.eta, 1.0);
        let g = ClusterGraph::full_window(3, 16).unwrap();
        let vi = VolumeIndex::from_graph(&g);
        let m = graph_mask(&g);
        let r = estimate_r_den(&vi, &m, 1.0, 0.1, &[-1, -1, -1], &[1, 1, 1]).unwrap();
        assert_eq!(r, Some(1));
        assert_eq!(volume_concentration_stats(&vi, &m, 1.0, 0.1, 2, None).fraction, 0.0);
    }

    #[test]
    fn subcritical_warns() {
        let cfg = PercConfig::generate(Model::Site, 3, 24, 0.1, 1).unwrap();
        let est = estimate_eta(&[cfg]).unwrap();
        assert!(est.eta < 0.01);
        assert!(est.warning.is_some());
    }

    #[test]
    fn tiny_alpha_has_no_scale() {
        let cfg = PercConfig::generate(Model::Site, 3, 32, 0.75, 4).unwrap();
        let lab = label_clusters(&cfg);
        let g = largest_cluster(&cfg, &lab).unwrap();
        let vi = VolumeIndex::from_graph(&g);
        let m = graph_mask(&g);
        let eta = g.len() as f64 / cfg.window().len() as f64;
        let r = estimate_r_den(&vi, &m, eta, 1e-6, &[-2, -2, -2], &[2, 2, 2]).unwrap();
        assert_eq!(r, None);
        let s = volume_concentration_stats(&vi, &m, eta, 0.0, 2, None);
        assert!(s.fraction > 0.99);
    }

    #[test]
    fn full_lattice_half_space_increment() {
        let ell = 1;
        let side = 15u64;
        let g = ClusterGraph::full_window(3, side).unwrap();
        let u1 = half_space(&g, 0, 1);
        let ctx = DensityContext::new(&g);
        let probe = vertices_in_box(&g, &[-2, -2, -2], &[2, 2, 2]);
        let rep = lipschitz_check(&ctx, &u1, ell, &probe, 1.0, 0.1);
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.pairs_skipped, 0);
        let m = (2u64 << ell) as f64 + 1.0;
        assert!((rep.max_increment - 1.0 / m).abs() < 1e-15);
        assert!(rep.max_increment <= rep.c_lip);
    }

    #[test]
    fn sandwich_trivial_subsets() {
        let g = random_cluster(40, 0.8, 6);
        let ctx = DensityContext::new(&g);
        let eta = g.len() as f64 / 40f64.powi(3);
        let probe = vertices_in_box(&g, &[-3, -3, -3], &[3, 3, 3]);
        for u1 in [VertexSet::empty(g.len()), VertexSet::all(g.len())] {
            let rep = average_sandwich_check(&ctx, &u1, 3, 2, &probe, 0.3, eta).unwrap();
            assert_eq!(rep.violations, 0);
        }
        assert!(average_sandwich_check(&ctx, &VertexSet::empty(g.len()), 2, 2, &probe, 0.3, eta).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let g = ClusterGraph::full_window(3, 3).unwrap();
        let ctx = DensityContext::new(&g);
        let f = ctx.field(&half_space(&g, 0, 1), "hs", 0, Variant::Sigma);
        let mut buf = Vec::new();
        f.write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# variant=sigma ell=0 u1=hs"));
        assert_eq!(lines.next(), Some("x y z value truncated"));
        assert_eq!(lines.count(), 27);
    }
}
