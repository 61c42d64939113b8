use proptest::prelude::*;
use solidify::cluster_graph::{ClusterGraph, VertexSet};
use solidify::density::subsample;
use solidify::percolation::{label_clusters, largest_cluster, Model, PercConfig};
use solidify::potential::{heat_kernel, kernel_mass, killed_heat_kernel, DirichletSystem};
use solidify::walk::{estimate_hit_before, wilson, Guard, HitQuery};

fn cluster(side: u64, seed: u64) -> ClusterGraph {
    let cfg = PercConfig::generate(Model::Site, 3, side, 0.75, seed).unwrap();
    largest_cluster(&cfg, &label_clusters(&cfg)).unwrap()
}

fn pick(sys: &DirichletSystem, n: usize, seed: u64) -> VertexSet {
    let inner = sys.interior().to_vec();
    VertexSet::from_ids(sys.graph().len(), subsample(inner, n, seed))
}

/// Hitting probabilities by plain Gauss-Seidel sweeps of h = mean of neighbours.
fn sweep_hit(g: &ClusterGraph, target: &VertexSet, killed: &VertexSet) -> Vec<f64> {
    let mut h: Vec<f64> = (0..g.len() as u32).map(|v| target.contains(v) as u8 as f64).collect();
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for v in 0..g.len() as u32 {
            if target.contains(v) || killed.contains(v) {
                continue;
            }
            let nb = g.neighbors(v);
            let new = nb.iter().map(|&u| h[u as usize]).sum::<f64>() / nb.len() as f64;
            change = change.max((new - h[v as usize]).abs());
            h[v as usize] = new;
        }
        if change < 1e-14 {
            break;
        }
    }
    h
}

#[test]
fn hit_prob_matches_relaxation() {
    for seed in 0..5 {
        let g = cluster(9, seed);
        let sys = DirichletSystem::window(&g).unwrap();
        let a = pick(&sys, 3, seed);
        let exact = sys.hit_prob(&a).unwrap().h;
        let slow = sweep_hit(&g, &a, sys.killed());
        let err = exact.iter().zip(&slow).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "seed {seed}: {err}");
    }
}

#[test]
fn mc_hit_agrees_with_exact() {
    let g = cluster(9, 3);
    let sys = DirichletSystem::window(&g).unwrap();
    let inner = sys.interior().to_vec();
    let c = g.point(inner[inner.len() / 2]).0;
    let a = g.ball_set(&c, 1).intersection(sys.interior());
    let h = sys.hit_prob(&a).unwrap().h;
    let x = inner.iter().copied().find(|&v| !a.contains(v) && g.sup_dist(v, inner[inner.len() / 2]) == 2).unwrap();
    let e = estimate_hit_before(&g, x, &HitQuery::new(a, Guard::Exit(sys.interior().clone())), 20_000, 9).unwrap();
    let (lo, hi) = wilson(e.hits, e.replicas, 4.0);
    assert!(h[x as usize] >= lo && h[x as usize] <= hi, "{} not in [{lo}, {hi}]", h[x as usize]);
}

#[test]
fn killed_kernel_loses_mass_full_kernel_keeps_it() {
    let g = cluster(9, 1);
    let x = (g.len() / 2) as u32;
    let q = heat_kernel(&g, 4.0, x, 1e-14).unwrap();
    assert!((kernel_mass(&g, &q) - 1.0).abs() < 1e-12);
    let u = g.ball_set(&g.point(x).0, 2);
    let qk = killed_heat_kernel(&g, &u, 4.0, x, 1e-14).unwrap();
    let m = kernel_mass(&g, &qk);
    assert!(m < 1.0 && m > 0.0);
    assert!(qk.iter().zip(&q).all(|(k, f)| *k <= f + 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hit_prob_monotone_in_target(seed in 0u64..500, n in 1usize..5) {
        let g = cluster(8, seed);
        let sys = DirichletSystem::window(&g).unwrap();
        let a = pick(&sys, n, seed);
        let b = a.union(&pick(&sys, 2, seed ^ 0xAB));
        let ha = sys.hit_prob(&a).unwrap().h;
        let hb = sys.hit_prob(&b).unwrap().h;
        for (x, y) in ha.iter().zip(&hb) {
            prop_assert!(*x <= y + 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(x));
        }
        for v in a.iter() {
            prop_assert!((ha[v as usize] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn capacity_monotone_and_subadditive(seed in 0u64..500) {
        let g = cluster(8, seed);
        let sys = DirichletSystem::window(&g).unwrap();
        let a = pick(&sys, 3, seed);
        let c = pick(&sys, 3, seed ^ 7);
        let ca = sys.capacity(&a).unwrap();
        let cc = sys.capacity(&c).unwrap();
        let cu = sys.capacity(&a.union(&c)).unwrap();
        prop_assert!(ca <= cu + 1e-12 && cc <= cu + 1e-12);
        prop_assert!(cu <= ca + cc + 1e-12);
    }

    #[test]
    fn equilibrium_is_supported_on_the_set(seed in 0u64..500) {
        let g = cluster(8, seed);
        let sys = DirichletSystem::window(&g).unwrap();
        let a = pick(&sys, 4, seed);
        let eq = sys.equilibrium(&a).unwrap();
        for v in 0..g.len() as u32 {
            if a.contains(v) {
                prop_assert!(eq.e[v as usize] >= -1e-12 && eq.e[v as usize] <= g.mu(v) as f64 + 1e-12);
            } else {
                prop_assert_eq!(eq.e[v as usize], 0.0);
            }
        }
    }
}
