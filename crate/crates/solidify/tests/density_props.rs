use proptest::prelude::*;
use solidify::cluster_graph::{ClusterGraph, VertexSet};
use solidify::density::{
    oblique_half_space, sigma, subsample, DensityContext, PrefixSum, Variant, VolumeIndex,
};
use solidify::percolation::{label_clusters, largest_cluster, Model, PercConfig};
use solidify::resonance::resonance_set;

fn cluster(dim: usize, side: u64, p: f64, seed: u64) -> Option<ClusterGraph> {
    let cfg = PercConfig::generate(Model::Site, dim, side, p, seed).ok()?;
    largest_cluster(&cfg, &label_clusters(&cfg)).ok()
}

/// Counts by scanning every vertex of the graph: no boxes, no prefix sums.
fn scan_density(g: &ClusterGraph, u1: &VertexSet, x: &[i64], r: u64) -> f64 {
    let (mut num, mut den) = (0u64, 0u64);
    for v in 0..g.len() as u32 {
        let p = g.point(v);
        if p.0.iter().zip(x).all(|(a, b)| (a - b).unsigned_abs() <= r) {
            den += 1;
            num += u1.contains(v) as u64;
        }
    }
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn random_set(g: &ClusterGraph, frac_permille: u64, seed: u64) -> VertexSet {
    let all: Vec<u32> = (0..g.len() as u32).collect();
    let n = all.len() * frac_permille as usize / 1000;
    VertexSet::from_ids(g.len(), subsample(all, n, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prefix_box_sum_matches_scan(dim in 2usize..5, side in 1u64..8, seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        let w = solidify::lattice::Window::centered(dim, side).unwrap();
        let val = |i: usize| (solidify::rng::hash3(seed, 1, i as u64) % 5) as u32;
        let ps = PrefixSum::build(&w, val);
        let s = side as usize;
        let lo: Vec<usize> = (0..dim).map(|k| ((a >> (8 * k)) as usize) % s).collect();
        let hi: Vec<usize> = (0..dim).map(|k| lo[k] + ((b >> (8 * k)) as usize) % (s - lo[k])).collect();
        let mut want = 0u32;
        for i in 0..w.len() {
            if (0..dim).all(|k| { let c = w.local_coord(i, k); c >= lo[k] && c <= hi[k] }) {
                want += val(i);
            }
        }
        prop_assert_eq!(ps.box_sum(&lo, &hi), want);
    }

    #[test]
    fn density_field_matches_scan(seed in 0u64..1000, ell in 0u32..3, frac in 0u64..1000, tilde in any::<bool>()) {
        let g = cluster(3, 11, 0.7, seed).unwrap();
        let u1 = random_set(&g, frac, seed);
        let variant = if tilde { Variant::SigmaTilde } else { Variant::Sigma };
        let f = DensityContext::new(&g).field(&u1, "", ell, variant);
        for v in subsample((0..g.len() as u32).collect(), 25, seed) {
            let x = g.point(v).0;
            let want = scan_density(&g, &u1, &x, variant.radius(ell));
            prop_assert!((f.values[v as usize] - want).abs() < 1e-12);
            prop_assert!((sigma(&g, &u1, &x, ell, variant).unwrap().value - want).abs() < 1e-12);
        }
    }

    #[test]
    fn densities_of_complements_sum_to_one(seed in 0u64..1000, ell in 0u32..4, frac in 0u64..1000) {
        let g = cluster(2, 24, 0.7, seed).unwrap();
        let u1 = random_set(&g, frac, seed);
        let ctx = DensityContext::new(&g);
        let a = ctx.field(&u1, "", ell, Variant::Sigma);
        let b = ctx.field(&u1.complement(), "", ell, Variant::Sigma);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x + y - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_tilde_is_sigma_two_scales_up(seed in 0u64..1000, ell in 0u32..2) {
        let g = cluster(3, 13, 0.75, seed).unwrap();
        let u1 = oblique_half_space(&g, &[1.0, 0.37, 0.21], 0.5);
        let ctx = DensityContext::new(&g);
        let t = ctx.field(&u1, "", ell, Variant::SigmaTilde);
        let s = ctx.field(&u1, "", ell + 2, Variant::Sigma);
        prop_assert_eq!(t.values, s.values);
    }

    #[test]
    fn nested_counts_are_monotone(seed in 0u64..1000, r in 0u64..6) {
        let g = cluster(3, 13, 0.75, seed).unwrap();
        let vi = VolumeIndex::from_graph(&g);
        for v in subsample((0..g.len() as u32).collect(), 20, seed) {
            let x = g.point(v).0;
            prop_assert!(vi.count(&x, r).count <= vi.count(&x, r + 1).count);
            prop_assert!(vi.count(&x, r).count >= 1);
        }
    }

    #[test]
    fn resonance_set_matches_scan(seed in 0u64..1000, j in 1usize..3) {
        let g = cluster(3, 15, 0.75, seed).unwrap();
        let u1 = oblique_half_space(&g, &[1.0, 0.37, 0.21], 0.5);
        let ctx = DensityContext::new(&g);
        let at = solidify::schedule::alpha_tilde(3);
        let scales = [1u32, 0];
        let res = resonance_set(&ctx, &u1, &scales, j, at).unwrap();
        for v in subsample((0..g.len() as u32).collect(), 40, seed) {
            let x = g.point(v).0;
            let hits = scales
                .iter()
                .filter(|&&l| {
                    let s = scan_density(&g, &u1, &x, 4 << l);
                    s >= at && s <= 1.0 - at
                })
                .count();
            prop_assert_eq!(res.contains(v), hits >= j);
        }
    }
}
