//! Bernoulli site and bond configurations on a window, cluster labeling, 𝒮_r sets,
//! local uniqueness statistics, and the seed events used in the renormalization argument.

mod io;
mod seed;

pub use io::{read_config, write_config};
pub use seed::{
    product_condition_check, seed_event_d, seed_event_i, seed_event_frequencies, seed_etas, GeometricTail,
    ProductReport, SeedFrequencies,
};

use crate::bitset::BitSet;
use crate::cluster_graph::ClusterGraph;
use crate::error::{domain, usage, Error, Result};
use crate::lattice::{Point, Window};
use crate::rng::{self, stream};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Site,
    Bond,
}

impl Model {
    pub fn parse(s: &str) -> Result<Model> {
        match s {
            "site" => Ok(Model::Site),
            "bond" => Ok(Model::Bond),
            _ => usage(format!("unknown model '{s}' (expected site or bond)")),
        }
    }
}

/// One sample of the environment. Windows are always `Window::centered(dim, side)`.
///
/// Site model: one bit per site. Bond model: `dim` planes of `side^dim` bits; bit `i`
/// of plane `k` is the edge from site `i` to `i + e_k` (always closed on the upper face).
#[derive(Clone, Debug, PartialEq)]
pub struct PercConfig {
    window: Window,
    model: Model,
    p: f64,
    seed: u64,
    bits: BitSet,
}

impl PercConfig {
    pub fn generate(model: Model, dim: usize, side: u64, p: f64, seed: u64) -> Result<PercConfig> {
        if dim < 2 {
            return usage(format!("dim must be at least 2, got {dim}"));
        }
        if side < 2 {
            return usage(format!("side must be at least 2, got {side}"));
        }
        if !(p > 0.0 && p < 1.0) {
            return usage(format!("p must lie in (0,1), got {p}"));
        }
        let window = Window::centered(dim, side)?;
        let n = window.len();
        let planes = match model {
            Model::Site => 1,
            Model::Bond => dim,
        };
        let total = n * planes;
        let mut words = vec![0u64; total.div_ceil(64)];
        words.par_iter_mut().enumerate().for_each(|(wi, w)| {
            let mut acc = 0u64;
            for b in 0..64 {
                let j = wi * 64 + b;
                if j >= total {
                    break;
                }
                let open = match model {
                    Model::Site => rng::uniform(seed, stream::SITE, j as u64) < p,
                    Model::Bond => {
                        let (k, i) = (j / n, j % n);
                        window.local_coord(i, k) + 1 < side as usize
                            && rng::uniform(seed, stream::BOND, j as u64) < p
                    }
                };
                if open {
                    acc |= 1 << b;
                }
            }
            *w = acc;
        });
        Ok(PercConfig { window, model, p, seed, bits: BitSet::from_words(words, total) })
    }

    /// Configuration from explicit occupancy bits. `p` is recorded but not checked
    /// against the bits, so hand-built fixtures may use 0 or 1.
    pub fn from_bits(model: Model, dim: usize, side: u64, p: f64, seed: u64, bits: BitSet) -> Result<PercConfig> {
        let window = Window::centered(dim, side)?;
        let want = match model {
            Model::Site => window.len(),
            Model::Bond => window.len() * dim,
        };
        if bits.len() != want {
            return domain(format!("occupancy has {} bits, expected {want}", bits.len()));
        }
        if !(0.0..=1.0).contains(&p) {
            return usage(format!("p must lie in [0,1], got {p}"));
        }
        let cfg = PercConfig { window, model, p, seed, bits };
        if model == Model::Bond {
            for k in 0..dim {
                for i in 0..cfg.window.len() {
                    if cfg.bits.get(k * cfg.window.len() + i) && cfg.window.local_coord(i, k) + 1 == side as usize {
                        return domain("bond bit set on an edge leaving the window");
                    }
                }
            }
        }
        Ok(cfg)
    }

    /// Every site (site model) or every in-window edge (bond model) open.
    pub fn all_open(model: Model, dim: usize, side: u64) -> Result<PercConfig> {
        let window = Window::centered(dim, side)?;
        let bits = match model {
            Model::Site => BitSet::full(window.len()),
            Model::Bond => {
                let n = window.len();
                let mut b = BitSet::new(n * dim);
                for k in 0..dim {
                    for i in 0..n {
                        if window.local_coord(i, k) + 1 < side as usize {
                            b.insert(k * n + i);
                        }
                    }
                }
                b
            }
        };
        PercConfig::from_bits(model, dim, side, 1.0, 0, bits)
    }

    /// Site configuration with exactly the listed points open.
    pub fn from_open_sites(dim: usize, side: u64, open: &[Point]) -> Result<PercConfig> {
        let window = Window::centered(dim, side)?;
        let mut bits = BitSet::new(window.len());
        for p in open {
            bits.insert(window.point_index(p)?);
        }
        PercConfig::from_bits(Model::Site, dim, side, 0.0, 0, bits)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bits(&self) -> &BitSet {
        &self.bits
    }

    #[inline]
    pub fn edge_open(&self, axis: usize, i: usize) -> bool {
        match self.model {
            Model::Site => {
                let j = i + self.window.stride(axis);
                self.window.local_coord(i, axis) + 1 < self.window.side() as usize && self.bits.get(i) && self.bits.get(j)
            }
            Model::Bond => self.bits.get(axis * self.window.len() + i),
        }
    }

    /// Site model: the site is open. Bond model: at least one incident edge is open.
    #[inline]
    pub fn is_vertex(&self, i: usize) -> bool {
        match self.model {
            Model::Site => self.bits.get(i),
            Model::Bond => {
                let mut any = false;
                self.for_each_neighbor(i, |_| any = true);
                any
            }
        }
    }

    /// Neighbors joined to `i` by an open edge, in the order −e₀, +e₀, −e₁, +e₁, …
    #[inline]
    pub fn for_each_neighbor(&self, i: usize, mut f: impl FnMut(usize)) {
        let side = self.window.side() as usize;
        for k in 0..self.window.dim() {
            let s = self.window.stride(k);
            let c = self.window.local_coord(i, k);
            if c > 0 && self.edge_open(k, i - s) {
                f(i - s);
            }
            if c + 1 < side && self.edge_open(k, i) {
                f(i + s);
            }
        }
    }

    /// Fraction of open sites (site model) or open in-window edges (bond model).
    pub fn open_fraction(&self) -> f64 {
        match self.model {
            Model::Site => self.bits.count_ones() as f64 / self.window.len() as f64,
            Model::Bond => {
                let d = self.window.dim() as u32;
                let s = self.window.side();
                let edges = d as u64 * (s - 1) * s.pow(d - 1);
                self.bits.count_ones() as f64 / edges as f64
            }
        }
    }

    pub fn vertex_count(&self) -> usize {
        (0..self.window.len()).filter(|&i| self.is_vertex(i)).count()
    }
}

pub const NO_CLUSTER: u32 = u32::MAX;

/// Connected components of the open graph.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    labels: Vec<u32>,
    sizes: Vec<u64>,
    diameters: Vec<u64>,
    min_index: Vec<usize>,
}

impl ClusterLabeling {
    #[inline]
    pub fn label(&self, i: usize) -> Option<u32> {
        let l = self.labels[i];
        (l != NO_CLUSTER).then_some(l)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// ℓ¹-diameter of each component.
    pub fn diameters(&self) -> &[u64] {
        &self.diameters
    }

    /// Smallest site index of each component; increasing in the id.
    pub fn min_index(&self) -> &[usize] {
        &self.min_index
    }

    /// Id of the largest component; ties go to the smallest id.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(u64, u32)> = None;
        for (id, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, id as u32));
            }
        }
        best.map(|(_, id)| id)
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let g = parent[parent[x as usize] as usize];
        parent[x as usize] = g;
        x = g;
    }
    x
}

pub fn label_clusters(cfg: &PercConfig) -> ClusterLabeling {
    let w = cfg.window();
    let n = w.len();
    let d = w.dim();
    let side = w.side() as usize;
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let vertex: Vec<bool> = (0..n).into_par_iter().map(|i| cfg.is_vertex(i)).collect();
    for i in 0..n {
        if !vertex[i] {
            continue;
        }
        for k in 0..d {
            if w.local_coord(i, k) + 1 < side && cfg.edge_open(k, i) {
                let j = i + w.stride(k);
                let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                if a != b {
                    // Attach the larger index under the smaller so roots are minima.
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent[hi as usize] = lo;
                }
            }
        }
    }
    // Roots are the minimum index of their component, so scanning in index order
    // assigns ids by smallest site.
    let mut labels = vec![NO_CLUSTER; n];
    let mut sizes = Vec::new();
    let mut min_index = Vec::new();
    for i in 0..n {
        if !vertex[i] {
            continue;
        }
        let r = find(&mut parent, i as u32) as usize;
        let id = if r == i {
            sizes.push(0u64);
            min_index.push(i);
            (sizes.len() - 1) as u32
        } else {
            labels[r]
        };
        labels[i] = id;
        sizes[id as usize] += 1;
    }
    drop(parent);
    let diameters = l1_diameters(w, &labels, sizes.len());
    ClusterLabeling { labels, sizes, diameters, min_index }
}

/// Exact ℓ¹ diameters: |x−y|₁ = max over sign vectors s of s·(x−y).
fn l1_diameters(w: &Window, labels: &[u32], count: usize) -> Vec<u64> {
    let d = w.dim();
    let patterns = 1usize << (d - 1);
    let mut hi = vec![i64::MIN; count * patterns];
    let mut lo = vec![i64::MAX; count * patterns];
    let mut c = vec![0i64; d];
    for (i, &l) in labels.iter().enumerate() {
        if l == NO_CLUSTER {
            continue;
        }
        w.coords_into(i, &mut c);
        for s in 0..patterns {
            let mut v = c[0];
            for k in 1..d {
                if (s >> (k - 1)) & 1 == 1 {
                    v -= c[k];
                } else {
                    v += c[k];
                }
            }
            let slot = l as usize * patterns + s;
            hi[slot] = hi[slot].max(v);
            lo[slot] = lo[slot].min(v);
        }
    }
    (0..count)
        .map(|id| (0..patterns).map(|s| (hi[id * patterns + s] - lo[id * patterns + s]) as u64).max().unwrap_or(0))
        .collect()
}

/// Mask of 𝒮_r: open sites whose component has ℓ¹-diameter at least `r`.
pub fn s_r_mask(cfg: &PercConfig, lab: &ClusterLabeling, r: u64) -> BitSet {
    let n = cfg.window().len();
    let mut m = BitSet::new(n);
    for i in 0..n {
        if let Some(l) = lab.label(i) {
            if lab.diameters[l as usize] >= r {
                m.insert(i);
            }
        }
    }
    m
}

pub fn s_r_vertices(cfg: &PercConfig, lab: &ClusterLabeling, r: u64) -> Vec<Point> {
    s_r_mask(cfg, lab, r)
        .iter_ones()
        .map(|i| cfg.window().index_point(i).expect("in window"))
        .collect()
}

/// Finite-volume stand-in for the infinite cluster: the largest component.
pub fn largest_cluster(cfg: &PercConfig, lab: &ClusterLabeling) -> Result<ClusterGraph> {
    let id = lab.largest().ok_or_else(|| Error::Domain("configuration has no open site".into()))?;
    ClusterGraph::from_component(cfg, lab, id)
}

/// Largest component touching both faces orthogonal to axis 0, if any.
pub fn spanning_cluster(cfg: &PercConfig, lab: &ClusterLabeling) -> Result<Option<ClusterGraph>> {
    let w = cfg.window();
    let side = w.side() as usize;
    let mut low = vec![false; lab.count()];
    let mut high = vec![false; lab.count()];
    for i in 0..w.len() {
        if let Some(l) = lab.label(i) {
            let c = w.local_coord(i, 0);
            if c == 0 {
                low[l as usize] = true;
            }
            if c + 1 == side {
                high[l as usize] = true;
            }
        }
    }
    let mut best: Option<(u64, u32)> = None;
    for id in 0..lab.count() {
        if low[id] && high[id] && best.is_none_or(|(s, _)| lab.sizes[id] > s) {
            best = Some((lab.sizes[id], id as u32));
        }
    }
    best.map(|(_, id)| ClusterGraph::from_component(cfg, lab, id)).transpose()
}

/// Frequencies of the two local uniqueness events over sampled boxes B(z,R):
/// `connected` = all of 𝒮_{R/10} ∩ B(z,R) is connected inside 𝒮 ∩ B(z,2R);
/// `present` = 𝒮_R ∩ B(z,R) ≠ ∅.
#[derive(Clone, Debug, Serialize)]
pub struct UniquenessStat {
    pub radius: u64,
    pub samples: usize,
    pub connected: f64,
    pub present: f64,
    pub min: f64,
}

pub fn local_uniqueness_stat(
    cfg: &PercConfig,
    lab: &ClusterLabeling,
    r: u64,
    sample_count: usize,
    seed: u64,
) -> Result<UniquenessStat> {
    let w = cfg.window();
    if 2 * r + 1 > w.side() {
        return domain(format!("window side {} too small for R = {r}", w.side()));
    }
    if sample_count == 0 {
        return usage("sample_count must be positive");
    }
    let d = w.dim();
    let span = w.side() - 2 * r;
    let outcomes: Vec<(bool, bool)> = (0..sample_count)
        .into_par_iter()
        .map(|s| {
            let z: Vec<i64> = (0..d)
                .map(|k| {
                    let u = rng::hash3(seed, stream::SAMPLE, (s * d + k) as u64);
                    w.origin().0[k] + r as i64 + (u % span) as i64
                })
                .collect();
            uniqueness_events(cfg, lab, &z, r)
        })
        .collect();
    let n = outcomes.len() as f64;
    let connected = outcomes.iter().filter(|o| o.0).count() as f64 / n;
    let present = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    Ok(UniquenessStat { radius: r, samples: outcomes.len(), connected, present, min: connected.min(present) })
}

fn uniqueness_events(cfg: &PercConfig, lab: &ClusterLabeling, z: &[i64], r: u64) -> (bool, bool) {
    let w = cfg.window();
    let (lo, hi, _) = w.clip_ball(z, r);
    let mut present = false;
    let mut small = Vec::new();
    w.for_each_in_box(&lo, &hi, |i| {
        if let Some(l) = lab.label(i) {
            let diam = lab.diameters[l as usize];
            present |= diam >= r;
            if diam * 10 >= r {
                small.push(i);
            }
        }
    });
    if small.len() <= 1 {
        return (true, present);
    }
    // Flood fill inside B(z,2R) ∩ window from the first point.
    let (lo2, hi2, _) = w.clip_ball(z, 2 * r);
    let inside = |i: usize| {
        (0..w.dim()).all(|k| {
            let c = w.origin().0[k] + w.local_coord(i, k) as i64;
            c >= lo2[k] && c <= hi2[k]
        })
    };
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(small[0]);
    queue.push_back(small[0]);
    while let Some(v) = queue.pop_front() {
        cfg.for_each_neighbor(v, |u| {
            if inside(u) && seen.insert(u) {
                queue.push_back(u);
            }
        });
    }
    (small.iter().all(|i| seen.contains(i)), present)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_components(cfg: &PercConfig) -> Vec<Vec<usize>> {
        let n = cfg.window().len();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if seen[s] || !cfg.is_vertex(s) {
                continue;
            }
            let mut stack = vec![s];
            seen[s] = true;
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                cfg.for_each_neighbor(v, |u| {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                });
            }
            comp.sort();
            comps.push(comp);
        }
        comps
    }

    #[test]
    fn near_one_is_almost_full() {
        let cfg = PercConfig::generate(Model::Site, 3, 16, 0.999999, 5).unwrap();
        let f = cfg.open_fraction();
        assert!((0.9999..=1.0).contains(&f));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = PercConfig::generate(Model::Site, 3, 64, 0.75, 42).unwrap();
        let b = PercConfig::generate(Model::Site, 3, 64, 0.75, 42).unwrap();
        assert_eq!(a.bits(), b.bits());
        let c = PercConfig::generate(Model::Site, 3, 64, 0.75, 43).unwrap();
        assert_ne!(a.bits(), c.bits());
    }

    #[test]
    fn open_fraction_half() {
        let cfg = PercConfig::generate(Model::Site, 3, 128, 0.5, 1).unwrap();
        // 3.3 binomial standard deviations at N = 128^3.
        assert!((cfg.open_fraction() - 0.5).abs() < 0.001);
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(PercConfig::generate(Model::Site, 1, 8, 0.5, 0), Err(Error::Usage(_))));
        assert!(matches!(PercConfig::generate(Model::Site, 3, 1, 0.5, 0), Err(Error::Usage(_))));
        assert!(matches!(PercConfig::generate(Model::Site, 3, 8, 1.0, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn all_open_and_all_closed() {
        let cfg = PercConfig::all_open(Model::Site, 3, 6).unwrap();
        let lab = label_clusters(&cfg);
        assert_eq!(lab.sizes(), &[216]);
        let closed = PercConfig::from_bits(Model::Site, 3, 6, 0.0, 0, BitSet::new(216)).unwrap();
        assert_eq!(label_clusters(&closed).count(), 0);
        assert!(largest_cluster(&closed, &label_clusters(&closed)).is_err());
    }

    #[test]
    fn hand_built_two_paths() {
        // Two straight open paths in a 5^3 box: length 5 along axis 0 and length 3 along axis 2.
        let mut pts = Vec::new();
        for x in -2..=2 {
            pts.push(Point(vec![x, -2, -2]));
        }
        for z in -1..=1 {
            pts.push(Point(vec![1, 2, z]));
        }
        let cfg = PercConfig::from_open_sites(3, 5, &pts).unwrap();
        let lab = label_clusters(&cfg);
        assert_eq!(lab.count(), 2);
        assert_eq!(lab.sizes(), &[5, 3]);
        assert_eq!(lab.diameters(), &[4, 2]);
        let brute = brute_components(&cfg);
        assert_eq!(brute.len(), 2);
        assert_eq!(largest_cluster(&cfg, &lab).unwrap().len(), 5);
    }

    #[test]
    fn labels_match_flood_fill_random() {
        for seed in 0..5 {
            for model in [Model::Site, Model::Bond] {
                let cfg = PercConfig::generate(model, 3, 9, 0.35, seed).unwrap();
                let lab = label_clusters(&cfg);
                let brute = brute_components(&cfg);
                assert_eq!(lab.count(), brute.len());
                for (id, comp) in brute.iter().enumerate() {
                    // Flood fill visits components in order of smallest site, as ids do.
                    assert_eq!(lab.min_index()[id], comp[0]);
                    assert!(comp.iter().all(|&i| lab.label(i) == Some(id as u32)));
                    assert_eq!(lab.sizes()[id], comp.len() as u64);
                    let w = cfg.window();
                    let pts: Vec<Point> = comp.iter().map(|&i| w.index_point(i).unwrap()).collect();
                    let mut diam = 0;
                    for a in &pts {
                        for b in &pts {
                            diam = diam.max(crate::lattice::l1_dist(&a.0, &b.0));
                        }
                    }
                    assert_eq!(lab.diameters()[id], diam);
                }
                let total: u64 = lab.sizes().iter().sum();
                assert_eq!(total as usize, cfg.vertex_count());
            }
        }
    }

    #[test]
    fn s_r_edges() {
        let pts = vec![Point(vec![0, 0]), Point(vec![2, 2]), Point(vec![2, 1])];
        let cfg = PercConfig::from_open_sites(2, 7, &pts).unwrap();
        let lab = label_clusters(&cfg);
        assert_eq!(s_r_vertices(&cfg, &lab, 0).len(), 3);
        assert_eq!(s_r_vertices(&cfg, &lab, 1), vec![Point(vec![2, 1]), Point(vec![2, 2])]);
        assert!(s_r_vertices(&cfg, &lab, 2 * 6 + 1).is_empty());
    }

    #[test]
    fn bond_vertices_need_an_open_edge() {
        let cfg = PercConfig::generate(Model::Bond, 2, 10, 0.3, 9).unwrap();
        let lab = label_clusters(&cfg);
        for i in 0..cfg.window().len() {
            let mut deg = 0;
            cfg.for_each_neighbor(i, |_| deg += 1);
            assert_eq!(lab.label(i).is_some(), deg > 0);
        }
    }

    #[test]
    fn largest_cluster_density_at_three_quarters() {
        for seed in 0..3 {
            let cfg = PercConfig::generate(Model::Site, 3, 64, 0.75, seed).unwrap();
            let lab = label_clusters(&cfg);
            let g = largest_cluster(&cfg, &lab).unwrap();
            let eta = g.len() as f64 / cfg.window().len() as f64;
            assert!((0.5..0.9).contains(&eta), "{eta}");
        }
    }

    #[test]
    fn uniqueness_all_open_and_sparse() {
        let cfg = PercConfig::all_open(Model::Site, 3, 20).unwrap();
        let lab = label_clusters(&cfg);
        assert_eq!(local_uniqueness_stat(&cfg, &lab, 4, 20, 1).unwrap().min, 1.0);
        let sparse = PercConfig::generate(Model::Site, 3, 20, 0.01, 3).unwrap();
        let lab = label_clusters(&sparse);
        assert!(local_uniqueness_stat(&sparse, &lab, 4, 50, 1).unwrap().present < 0.05);
        assert!(local_uniqueness_stat(&sparse, &lab, 10, 5, 1).is_err());
    }

    #[test]
    fn spanning_cluster_found() {
        let cfg = PercConfig::generate(Model::Site, 3, 24, 0.75, 2).unwrap();
        let lab = label_clusters(&cfg);
        let span = spanning_cluster(&cfg, &lab).unwrap().unwrap();
        assert_eq!(span.len(), largest_cluster(&cfg, &lab).unwrap().len());
    }
}
