//! Seed events of the renormalization scheme and the product condition on scale sequences.

use super::{ClusterLabeling, PercConfig};
use crate::bitset::BitSet;
use crate::error::{domain, Result};
use serde::Serialize;
use std::collections::VecDeque;

/// `(η₁, η₂) = (√(1−α/2)·η, (1+α/4)·η)`.
pub fn seed_etas(alpha: f64, eta: f64) -> (f64, f64) {
    ((1.0 - alpha / 2.0).sqrt() * eta, (1.0 + alpha / 4.0) * eta)
}

fn in_s(lab: &ClusterLabeling, i: usize, l0: u64) -> bool {
    lab.label(i).is_some_and(|l| lab.diameters()[l as usize] >= l0)
}

fn cube_bounds(cfg: &PercConfig, corner: &[i64], l0: u64) -> Result<(Vec<i64>, Vec<i64>)> {
    let hi: Vec<i64> = corner.iter().map(|c| c + l0 as i64 - 1).collect();
    if !cfg.window().contains(corner) || !cfg.window().contains(&hi) {
        return domain(format!("cube at {corner:?} with side {l0} leaves the window"));
    }
    Ok((corner.to_vec(), hi))
}

/// Largest connected component of 𝒮_{L₀} ∩ (corner + [0,L₀)^d), ties to the component
/// found first in row-major order.
fn cube_largest(cfg: &PercConfig, lab: &ClusterLabeling, corner: &[i64], l0: u64) -> Result<Vec<usize>> {
    let w = cfg.window();
    let (lo, hi) = cube_bounds(cfg, corner, l0)?;
    let inside = |i: usize| {
        (0..w.dim()).all(|k| {
            let c = w.origin().0[k] + w.local_coord(i, k) as i64;
            c >= lo[k] && c <= hi[k]
        })
    };
    let mut sites = Vec::new();
    w.for_each_in_box(&lo, &hi, |i| sites.push(i));
    let mut seen = std::collections::HashSet::new();
    let mut best: Vec<usize> = Vec::new();
    for &s in &sites {
        if !in_s(lab, s, l0) || seen.contains(&s) {
            continue;
        }
        let mut comp = vec![s];
        seen.insert(s);
        let mut head = 0;
        while head < comp.len() {
            let v = comp[head];
            head += 1;
            cfg.for_each_neighbor(v, |u| {
                if inside(u) && in_s(lab, u, l0) && seen.insert(u) {
                    comp.push(u);
                }
            });
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    Ok(best)
}

/// Whether `from` reaches a site of `target` through open sites in the union of two cubes.
fn connected_in_union(
    cfg: &PercConfig,
    from: usize,
    target: &dyn Fn(usize) -> bool,
    boxes: [(&[i64], &[i64]); 2],
) -> bool {
    let w = cfg.window();
    let inside = |i: usize| {
        boxes.iter().any(|(lo, hi)| {
            (0..w.dim()).all(|k| {
                let c = w.origin().0[k] + w.local_coord(i, k) as i64;
                c >= lo[k] && c <= hi[k]
            })
        })
    };
    let mut seen = std::collections::HashSet::new();
    let mut q = VecDeque::new();
    seen.insert(from);
    q.push_back(from);
    while let Some(v) = q.pop_front() {
        if target(v) {
            return true;
        }
        cfg.for_each_neighbor(v, |u| {
            if inside(u) && seen.insert(u) {
                q.push_back(u);
            }
        });
    }
    false
}

fn neighbor_corners(corner: &[i64], l0: u64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for k in 0..corner.len() {
        for s in [-1i64, 1] {
            let mut y = corner.to_vec();
            y[k] += s * l0 as i64;
            out.push(y);
        }
    }
    out
}

/// True iff the bad event D̄ occurs at the cube with lower corner `x`: some cube y with
/// |y−x|₁ ≤ L₀ lacks a component of 𝒮_{L₀} of size ≥ η₁L₀^d, or that component is not
/// joined to the one of x inside the union of the two cubes.
pub fn seed_event_d(cfg: &PercConfig, lab: &ClusterLabeling, x: &[i64], l0: u64, eta1: f64) -> Result<bool> {
    let vol = (l0 as f64).powi(x.len() as i32);
    let cx = cube_largest(cfg, lab, x, l0)?;
    let mut nbrs = Vec::new();
    for y in neighbor_corners(x, l0) {
        let cy = cube_largest(cfg, lab, &y, l0)?;
        nbrs.push((y, cy));
    }
    if (cx.len() as f64) < eta1 * vol {
        return Ok(true);
    }
    let xhi: Vec<i64> = x.iter().map(|c| c + l0 as i64 - 1).collect();
    for (y, cy) in &nbrs {
        if (cy.len() as f64) < eta1 * vol {
            return Ok(true);
        }
        let members: std::collections::HashSet<usize> = cy.iter().copied().collect();
        let yhi: Vec<i64> = y.iter().map(|c| c + l0 as i64 - 1).collect();
        if !connected_in_union(cfg, cx[0], &|v| members.contains(&v), [(x, &xhi), (y, &yhi)]) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// True iff |𝒮_{L₀} ∩ (x+[0,L₀)^d)| > η₂L₀^d.
pub fn seed_event_i(cfg: &PercConfig, lab: &ClusterLabeling, x: &[i64], l0: u64, eta2: f64) -> Result<bool> {
    let (lo, hi) = cube_bounds(cfg, x, l0)?;
    let mut count = 0usize;
    cfg.window().for_each_in_box(&lo, &hi, |i| {
        if in_s(lab, i, l0) {
            count += 1;
        }
    });
    Ok(count as f64 > eta2 * (l0 as f64).powi(x.len() as i32))
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedFrequencies {
    pub l0: u64,
    pub cubes: usize,
    pub d_bad: usize,
    pub i_bad: usize,
    pub d_freq: f64,
    pub i_freq: f64,
}

/// Evaluates both seed events at every grid corner `origin + L₀·m` whose cube and
/// nearest neighbour cubes fit in the window. Tile components are computed once.
pub fn seed_event_frequencies(cfg: &PercConfig, lab: &ClusterLabeling, l0: u64, eta1: f64, eta2: f64) -> Result<SeedFrequencies> {
    let w = cfg.window();
    let d = w.dim();
    let tiles_per_axis = (w.side() / l0) as usize;
    if tiles_per_axis < 3 {
        return domain(format!("window side {} holds fewer than 3 cubes of side {l0}", w.side()));
    }
    let ntiles = tiles_per_axis.pow(d as u32);
    let corner_of = |t: usize| -> Vec<i64> {
        let mut c = vec![0i64; d];
        let mut r = t;
        for k in (0..d).rev() {
            c[k] = w.origin().0[k] + (r % tiles_per_axis) as i64 * l0 as i64;
            r /= tiles_per_axis;
        }
        c
    };
    use rayon::prelude::*;
    let comps: Vec<Vec<usize>> = (0..ntiles)
        .into_par_iter()
        .map(|t| cube_largest(cfg, lab, &corner_of(t), l0).expect("tile inside window"))
        .collect();
    let mut marker = BitSet::new(w.len());
    for comp in &comps {
        for &i in comp {
            marker.insert(i);
        }
    }
    let vol = (l0 as f64).powi(d as i32);
    let tile_index = |m: &[usize]| m.iter().fold(0usize, |acc, &v| acc * tiles_per_axis + v);
    let digits = |t: usize| -> Vec<usize> {
        let mut m = vec![0usize; d];
        let mut r = t;
        for k in (0..d).rev() {
            m[k] = r % tiles_per_axis;
            r /= tiles_per_axis;
        }
        m
    };
    let interior: Vec<Vec<usize>> = (0..ntiles)
        .map(digits)
        .filter(|m| m.iter().all(|&v| v >= 1 && v + 1 < tiles_per_axis))
        .collect();
    let results: Vec<(bool, bool)> = interior
        .par_iter()
        .map(|m| {
            let t = tile_index(m);
            let x = corner_of(t);
            let xhi: Vec<i64> = x.iter().map(|c| c + l0 as i64 - 1).collect();
            let i_bad = seed_event_i(cfg, lab, &x, l0, eta2).expect("fits");
            let mut d_bad = (comps[t].len() as f64) < eta1 * vol;
            if !d_bad {
                for k in 0..d {
                    for s in [-1i64, 1] {
                        if d_bad {
                            break;
                        }
                        let mut my = m.clone();
                        my[k] = (my[k] as i64 + s) as usize;
                        let ty = tile_index(&my);
                        if (comps[ty].len() as f64) < eta1 * vol {
                            d_bad = true;
                            break;
                        }
                        let y = corner_of(ty);
                        let yhi: Vec<i64> = y.iter().map(|c| c + l0 as i64 - 1).collect();
                        let in_cy = |v: usize| {
                            marker.get(v)
                                && (0..d).all(|k| {
                                    let c = w.origin().0[k] + w.local_coord(v, k) as i64;
                                    c >= y[k] && c <= yhi[k]
                                })
                        };
                        if !connected_in_union(cfg, comps[t][0], &in_cy, [(&x, &xhi), (&y, &yhi)]) {
                            d_bad = true;
                        }
                    }
                }
            }
            (d_bad, i_bad)
        })
        .collect();
    let cubes = results.len();
    let d_bad = results.iter().filter(|r| r.0).count();
    let i_bad = results.iter().filter(|r| r.1).count();
    Ok(SeedFrequencies {
        l0,
        cubes,
        d_bad,
        i_bad,
        d_freq: d_bad as f64 / cubes as f64,
        i_freq: i_bad as f64 / cubes as f64,
    })
}

/// Declared bound on the terms beyond the supplied prefix: the i-th later term
/// (4rᵢ/ℓᵢ)^d is at most `first · ratio^i`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GeometricTail {
    pub first: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductReport {
    pub prefix_product: f64,
    pub tail_factor: f64,
    pub lower_bound: f64,
    pub threshold: f64,
    pub passes: bool,
}

/// Right-hand side of the product condition.
pub fn product_threshold(alpha: f64, eta: f64) -> f64 {
    let (eta1, eta2) = seed_etas(alpha, eta);
    ((1.0 + eta2) / (1.0 + 2.0 * eta1)).max((1.0 - alpha / 2.0).sqrt()).max(1.0 - alpha / 4.0 * eta)
}

/// Certified lower bound on ∏[1 − (4rᵢ/ℓᵢ)^d] compared with the threshold. Without a
/// tail the sequences are taken to be exactly the prefixes. The tail factor uses
/// ∏(1−xᵢ) ≥ 1 − Σxᵢ.
pub fn product_condition_check(
    r_seq: &[f64],
    ell_seq: &[f64],
    tail: Option<GeometricTail>,
    alpha: f64,
    eta: f64,
    dim: usize,
) -> Result<ProductReport> {
    if r_seq.len() != ell_seq.len() {
        return domain("r and ℓ prefixes differ in length");
    }
    let mut prod = 1.0;
    for (i, (r, l)) in r_seq.iter().zip(ell_seq).enumerate() {
        if 4.0 * r >= *l {
            return domain(format!("term {i}: 4r = {} ≥ ℓ = {l}, product term non-positive", 4.0 * r));
        }
        prod *= 1.0 - (4.0 * r / l).powi(dim as i32);
    }
    let tail_factor = match tail {
        None => 1.0,
        Some(t) => {
            if !(0.0..1.0).contains(&t.ratio) || t.first < 0.0 {
                return domain("geometric tail needs first ≥ 0 and ratio in [0,1)");
            }
            let s = t.first / (1.0 - t.ratio);
            if s >= 1.0 {
                return domain("declared tail sum reaches 1; no positive lower bound");
            }
            1.0 - s
        }
    };
    let lower = prod * tail_factor;
    let threshold = product_threshold(alpha, eta);
    Ok(ProductReport { prefix_product: prod, tail_factor, lower_bound: lower, threshold, passes: lower > threshold })
}
