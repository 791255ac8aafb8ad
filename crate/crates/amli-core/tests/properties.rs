use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use amli_core::dense::{eigvals_sym, rayleigh_sup};
use amli_core::graph::{dot, Graph};
use amli_core::hierarchy::{
    build_hierarchy, theta_schedule, HierarchyOptions, SigmaMode, Strategy as Coarsen, Variant,
};
use amli_core::io::{read_graph, write_graph};
use amli_core::krylov::{pcg_solve, PcgOptions};
use amli_core::matching::{coarse_graph_with_multiplicity, random_maximal_matching, Partition};
use amli_core::mesh::delaunay_edges;
use amli_core::precond::AmliPreconditioner;
use amli_core::stability::{build_pi_general, build_pi_matching, check_commutation, project_q, q_dense, q_energy_norm};

fn random_connected(n: usize, extra: usize, seed: u64) -> Graph {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push((a, b));
        }
    }
    Graph::from_edges_dedup(n, edges).unwrap()
}

/// Connected aggregates grown greedily from a seeded vertex order.
fn random_aggregates(g: &Graph, max_size: usize, seed: u64) -> Partition {
    let n = g.num_vertices();
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut owner = vec![usize::MAX; n];
    let mut aggs: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for &s in &order {
        if owner[s] != usize::MAX {
            continue;
        }
        let id = aggs.len();
        let mut agg = vec![s];
        owner[s] = id;
        let target = rng.random_range(1..=max_size);
        let mut k = 0;
        while k < agg.len() && agg.len() < target {
            for &w in g.neighbors(agg[k]) {
                if owner[w] == usize::MAX && agg.len() < target {
                    owner[w] = id;
                    agg.push(w);
                }
            }
            k += 1;
        }
        aggs.push(agg);
    }
    Partition::from_aggregates(n, aggs).unwrap()
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n, 0usize..60, any::<u64>()).prop_map(|(n, extra, seed)| random_connected(n, extra.min(2 * n), seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_incidence_gram(g in graph_strategy(40), seed in any::<u64>()) {
        let n = g.num_vertices();
        let mut rng = SplitMix64::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let au = g.laplacian_apply(&u).unwrap();
        let btbu = g.incidence_transpose_apply(&g.incidence_apply(&u).unwrap()).unwrap();
        for (a, b) in au.iter().zip(&btbu) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let av = g.laplacian_apply(&v).unwrap();
        prop_assert!((dot(&au, &v) - dot(&u, &av)).abs() < 1e-10);
        let a1 = g.laplacian_apply(&vec![1.0; n]).unwrap();
        prop_assert!(a1.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn random_matching_is_maximal(g in graph_strategy(40), seed in any::<u64>()) {
        let p = random_maximal_matching(&g, seed);
        p.validate(&g).unwrap();
        prop_assert!(p.is_pairwise());
        for &(a, b) in &p.matched_pairs() {
            prop_assert!(g.edge_index(a, b).is_some());
        }
        let single = |v: usize| p.aggregates()[p.aggregate_of(v)].len() == 1;
        for &(a, b) in g.edges() {
            prop_assert!(!(single(a) && single(b)), "edge {a}-{b} joins two singletons");
        }
    }

    #[test]
    fn commutation_holds_for_matchings(g in graph_strategy(40), seed in any::<u64>()) {
        let p = random_maximal_matching(&g, seed);
        let pm = build_pi_matching(&g, &p).unwrap();
        let pg = build_pi_general(&g, &p).unwrap();
        prop_assert!(check_commutation(&g, &p, &pm, 4, seed).unwrap() <= 1e-12);
        prop_assert!(check_commutation(&g, &p, &pg, 4, seed).unwrap() <= 1e-12);
        prop_assert_eq!(pm, pg);
    }

    #[test]
    fn commutation_holds_for_larger_aggregates(g in graph_strategy(30), size in 1usize..=6, seed in any::<u64>()) {
        let p = random_aggregates(&g, size, seed);
        p.validate(&g).unwrap();
        let pi = build_pi_general(&g, &p).unwrap();
        prop_assert!(check_commutation(&g, &p, &pi, 4, seed).unwrap() <= 1e-10);
        let q2 = q_energy_norm(&g, &p).unwrap();
        prop_assert!(q2 <= pi.spectral_norm_sq().unwrap() + 1e-9);
    }

    #[test]
    fn q_is_an_orthogonal_projector(g in graph_strategy(30), size in 1usize..=5, seed in any::<u64>()) {
        let p = random_aggregates(&g, size, seed);
        let q = q_dense(&p);
        prop_assert!(q.matmul(&q).sub(&q).max_abs() < 1e-14);
        prop_assert!(q.transpose().sub(&q).max_abs() == 0.0);
        let n = g.num_vertices();
        let ones = project_q(&p, &vec![1.0; n]);
        prop_assert!(ones.iter().all(|x| (x - 1.0).abs() < 1e-15));
        let a = g.laplacian_dense();
        let qaq = q.matmul(&a).matmul(&q);
        let sup = rayleigh_sup(&qaq, &a, &[vec![1.0; n]]).unwrap();
        prop_assert!((sup - q_energy_norm(&g, &p).unwrap()).abs() < 1e-10);
        prop_assert!(sup >= -1e-12);
    }

    #[test]
    fn quotient_accounts_for_every_edge(g in graph_strategy(40), seed in any::<u64>()) {
        let p = random_maximal_matching(&g, seed);
        let (c, mult) = coarse_graph_with_multiplicity(&g, &p).unwrap();
        prop_assert_eq!(c.num_vertices(), p.num_aggregates());
        prop_assert!(c.is_connected());
        prop_assert_eq!(mult.len(), c.num_edges());
        let total: usize = mult.iter().sum();
        prop_assert_eq!(total + p.matched_pairs().len(), g.num_edges());
        prop_assert!(mult.iter().all(|&m| (1..=4).contains(&m)));
    }

    #[test]
    fn matrix_market_round_trip(g in graph_strategy(40)) {
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let h = read_graph(&buf[..]).unwrap();
        prop_assert_eq!(g.edges(), h.edges());
        prop_assert_eq!(g.num_vertices(), h.num_vertices());
    }

    #[test]
    fn delaunay_is_a_connected_planar_graph(n in 3usize..60, seed in any::<u64>()) {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let edges = delaunay_edges(&pts).unwrap();
        prop_assert!(edges.len() <= 3 * n - 3);
        prop_assert!(edges.len() >= n - 1);
        let g = Graph::new(n, edges).unwrap();
        prop_assert!(g.is_connected());
    }

    #[test]
    fn theta_schedule_is_monotone(c in 1.0f64..=4.0, levels in 1usize..80) {
        let s = theta_schedule(c, levels).unwrap();
        prop_assert_eq!(s[0], 1.0);
        for w in s.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15 && w[1] > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn preconditioner_is_symmetric_psd(
        g in graph_strategy(24),
        seed in any::<u64>(),
        modified in any::<bool>(),
    ) {
        let variant = if modified { Variant::Modified } else { Variant::Ordinary };
        let mut opts = HierarchyOptions::new(Coarsen::Random { seed }, variant);
        opts.sigma_mode = Some(SigmaMode::Ratio);
        let h = build_hierarchy(&g, None, &opts).unwrap();
        let pre = AmliPreconditioner::with_default_smoother(h).unwrap();
        let b = pre.to_dense(64).unwrap();
        let scale = b.max_abs().max(1e-300);
        prop_assert!(b.transpose().sub(&b).max_abs() <= 1e-8 * scale);
        let ev = eigvals_sym(&b.symmetrized()).unwrap();
        prop_assert!(ev[0] >= -1e-9 * scale);
        let n = g.num_vertices();
        let z = pre.apply(&vec![1.0; n]).unwrap();
        prop_assert!(z.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn pcg_recovers_the_solution(g in graph_strategy(60), seed in any::<u64>()) {
        let n = g.num_vertices();
        let h = build_hierarchy(&g, None, &HierarchyOptions::new(Coarsen::Random { seed }, Variant::Modified)).unwrap();
        let pre = AmliPreconditioner::with_default_smoother(h).unwrap();
        let mut rng = SplitMix64::seed_from_u64(seed ^ 1);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        xs.iter_mut().for_each(|v| *v -= mean);
        let f = g.laplacian_apply(&xs).unwrap();
        let apply_a = |v: &[f64]| g.laplacian_apply(v).unwrap();
        let apply_b = |v: &[f64]| pre.apply(v);
        let opts = PcgOptions { tol: 1e-10, ..PcgOptions::default() };
        let rep = pcg_solve(&apply_a, &apply_b, &f, Some(&xs), &opts).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(rep.solution.iter().sum::<f64>().abs() < 1e-9);
        let err = rep.solution.iter().zip(&xs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-6, "error {}", err);
    }
}
