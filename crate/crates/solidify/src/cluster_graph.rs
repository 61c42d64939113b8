//! A single cluster as an indexed graph.

use crate::bitset::BitSet;
use crate::error::{domain, Error, Result};
use crate::lattice::{Point, Window};
use crate::percolation::{label_clusters, ClusterLabeling, Model, PercConfig};
use std::collections::VecDeque;
use std::io::Write;

const NONE: u32 = u32::MAX;

/// Vertices carry dense local ids in BFS discovery order from the smallest site.
/// Adjacency is stored in CSR form; `mu[v]` is the number of open incident edges.
#[derive(Clone, Debug)]
pub struct ClusterGraph {
    window: Window,
    global: Vec<u32>,
    local: Vec<u32>,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    mu: Vec<u8>,
}

impl ClusterGraph {
    pub fn from_component(cfg: &PercConfig, lab: &ClusterLabeling, id: u32) -> Result<ClusterGraph> {
        if id as usize >= lab.count() {
            return domain(format!("no cluster with id {id}"));
        }
        let w = cfg.window().clone();
        let start = lab.min_index()[id as usize];
        let mut local = vec![NONE; w.len()];
        let mut global = Vec::with_capacity(lab.sizes()[id as usize] as usize);
        let mut queue = VecDeque::new();
        local[start] = 0;
        global.push(start as u32);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            cfg.for_each_neighbor(v, |u| {
                if local[u] == NONE {
                    local[u] = global.len() as u32;
                    global.push(u as u32);
                    queue.push_back(u);
                }
            });
        }
        let mut offsets = Vec::with_capacity(global.len() + 1);
        let mut targets = Vec::new();
        let mut mu = Vec::with_capacity(global.len());
        offsets.push(0u32);
        for &gi in &global {
            let before = targets.len();
            cfg.for_each_neighbor(gi as usize, |u| targets.push(local[u]));
            mu.push((targets.len() - before) as u8);
            offsets.push(targets.len() as u32);
        }
        Ok(ClusterGraph { window: w, global, local, offsets, targets, mu })
    }

    /// The whole window as one cluster (every site open).
    pub fn full_window(dim: usize, side: u64) -> Result<ClusterGraph> {
        let cfg = PercConfig::all_open(Model::Site, dim, side)?;
        let lab = label_clusters(&cfg);
        ClusterGraph::from_component(&cfg, &lab, 0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.targets[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    #[inline]
    pub fn mu(&self, v: u32) -> u32 {
        self.mu[v as usize] as u32
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// Window index of a vertex.
    #[inline]
    pub fn site(&self, v: u32) -> usize {
        self.global[v as usize] as usize
    }

    /// Local id of a window index, if that site is in the cluster.
    #[inline]
    pub fn vertex_at(&self, site: usize) -> Option<u32> {
        let l = self.local[site];
        (l != NONE).then_some(l)
    }

    pub fn vertex_of(&self, p: &[i64]) -> Option<u32> {
        self.window.index_of(p).and_then(|i| self.vertex_at(i))
    }

    pub fn vertex_of_point(&self, p: &Point) -> Result<u32> {
        self.vertex_of(&p.0).ok_or_else(|| Error::Domain(format!("point {p} is not a vertex of the cluster")))
    }

    #[inline]
    pub fn coords_into(&self, v: u32, out: &mut [i64]) {
        self.window.coords_into(self.site(v), out)
    }

    pub fn point(&self, v: u32) -> Point {
        let mut c = vec![0; self.dim()];
        self.coords_into(v, &mut c);
        Point(c)
    }

    /// Sup distance between two vertices.
    pub fn sup_dist(&self, a: u32, b: u32) -> u64 {
        let w = &self.window;
        (0..self.dim())
            .map(|k| (w.local_coord(self.site(a), k) as i64 - w.local_coord(self.site(b), k) as i64).unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn on_window_face(&self, v: u32) -> bool {
        self.window.on_face(self.site(v))
    }

    pub fn face_set(&self) -> VertexSet {
        let mut s = VertexSet::empty(self.len());
        for v in 0..self.len() as u32 {
            if self.on_window_face(v) {
                s.insert(v);
            }
        }
        s
    }

    /// Vertices inside the sup ball B(center, r), clipped to the window.
    pub fn ball_set(&self, center: &[i64], r: u64) -> VertexSet {
        let mut s = VertexSet::empty(self.len());
        let (lo, hi, _) = self.window.clip_ball(center, r);
        self.window.for_each_in_box(&lo, &hi, |i| {
            if let Some(v) = self.vertex_at(i) {
                s.insert(v);
            }
        });
        s
    }

    /// Vertices outside U0 with a graph neighbor in U0.
    pub fn boundary_relative(&self, u0: &VertexSet) -> Result<VertexSet> {
        self.check(u0)?;
        let mut out = VertexSet::empty(self.len());
        for v in u0.iter() {
            for &u in self.neighbors(v) {
                if !u0.contains(u) {
                    out.insert(u);
                }
            }
        }
        Ok(out)
    }

    /// Vertices inside U0 with a graph neighbor outside U0.
    pub fn inner_boundary(&self, u0: &VertexSet) -> Result<VertexSet> {
        self.check(u0)?;
        let mut out = VertexSet::empty(self.len());
        for v in u0.iter() {
            if self.neighbors(v).iter().any(|&u| !u0.contains(u)) {
                out.insert(v);
            }
        }
        Ok(out)
    }

    /// Shortest path length using only vertices of `region`. `None` when disconnected there.
    pub fn graph_distance_within(&self, region: &VertexSet, x: u32, y: u32) -> Result<Option<u64>> {
        self.check(region)?;
        if !region.contains(x) || !region.contains(y) {
            return domain("endpoints must lie in the region");
        }
        Ok(self.bfs_distance(x, y, |v| region.contains(v)))
    }

    /// Unrestricted graph distance.
    pub fn graph_distance(&self, x: u32, y: u32) -> Option<u64> {
        self.bfs_distance(x, y, |_| true)
    }

    fn bfs_distance(&self, x: u32, y: u32, allowed: impl Fn(u32) -> bool) -> Option<u64> {
        if x == y {
            return Some(0);
        }
        let mut dist = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::new();
        dist[x as usize] = 0;
        queue.push_back(x);
        while let Some(v) = queue.pop_front() {
            for &u in self.neighbors(v) {
                if dist[u as usize] == u32::MAX && allowed(u) {
                    dist[u as usize] = dist[v as usize] + 1;
                    if u == y {
                        return Some(dist[u as usize] as u64);
                    }
                    queue.push_back(u);
                }
            }
        }
        None
    }

    /// Components of the subgraph induced on `region`, ordered by smallest id, each sorted.
    pub fn component_within(&self, region: &VertexSet) -> Result<Vec<Vec<u32>>> {
        self.check(region)?;
        let mut seen = BitSet::new(self.len());
        let mut out = Vec::new();
        for s in region.iter() {
            if seen.get(s as usize) {
                continue;
            }
            seen.insert(s as usize);
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &u in self.neighbors(v) {
                    if region.contains(u) && !seen.get(u as usize) {
                        seen.insert(u as usize);
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        Ok(out)
    }

    /// Edge list with a `# vertices: N` header, one `u v` line per edge with u < v.
    pub fn export_edges(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# vertices: {}", self.len())?;
        for v in 0..self.len() as u32 {
            for &u in self.neighbors(v) {
                if v < u {
                    writeln!(out, "{v} {u}")?;
                }
            }
        }
        Ok(())
    }

    fn check(&self, s: &VertexSet) -> Result<()> {
        if s.capacity() != self.len() {
            return domain(format!("vertex set built for {} vertices, graph has {}", s.capacity(), self.len()));
        }
        Ok(())
    }
}

/// Subset of a cluster's vertices, by local id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    bits: BitSet,
}

impl VertexSet {
    pub fn empty(n: usize) -> VertexSet {
        VertexSet { bits: BitSet::new(n) }
    }

    pub fn all(n: usize) -> VertexSet {
        VertexSet { bits: BitSet::full(n) }
    }

    pub fn from_ids(n: usize, ids: impl IntoIterator<Item = u32>) -> VertexSet {
        let mut s = VertexSet::empty(n);
        for v in ids {
            s.insert(v);
        }
        s
    }

    /// Every point must be a vertex of `g`.
    pub fn from_points(g: &ClusterGraph, pts: &[Point]) -> Result<VertexSet> {
        let mut s = VertexSet::empty(g.len());
        for p in pts {
            s.insert(g.vertex_of_point(p)?);
        }
        Ok(s)
    }

    /// Points that are not vertices of `g` are dropped.
    pub fn from_points_clipped(g: &ClusterGraph, pts: &[Point]) -> VertexSet {
        VertexSet::from_ids(g.len(), pts.iter().filter_map(|p| g.vertex_of(&p.0)))
    }

    pub fn from_predicate(g: &ClusterGraph, f: impl Fn(u32) -> bool) -> VertexSet {
        VertexSet::from_ids(g.len(), (0..g.len() as u32).filter(|&v| f(v)))
    }

    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.bits.get(v as usize)
    }

    #[inline]
    pub fn insert(&mut self, v: u32) {
        self.bits.insert(v as usize)
    }

    pub fn remove(&mut self, v: u32) {
        self.bits.set(v as usize, false)
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.words().iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.bits.iter_ones().map(|i| i as u32)
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }

    pub fn complement(&self) -> VertexSet {
        VertexSet { bits: self.bits.complement() }
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut b = self.bits.clone();
        b.union_with(&other.bits);
        VertexSet { bits: b }
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        let mut b = self.bits.clone();
        b.intersect_with(&other.bits);
        VertexSet { bits: b }
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        let mut b = self.bits.clone();
        b.difference_with(&other.bits);
        VertexSet { bits: b }
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    pub fn points(&self, g: &ClusterGraph) -> Vec<Point> {
        self.iter().map(|v| g.point(v)).collect()
    }
}
