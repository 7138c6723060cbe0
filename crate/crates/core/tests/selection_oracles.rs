//! Search results checked against independent brute-force oracles.

use filtersel::rng::XorShift64Star;
use filtersel::selection::{
    build_conflict_graph, fbs_select, full_search, full_search_with, max_independent_set,
    min_pairwise_distance, solve_mis, trim_selection, ConflictGraph, FbsConfig, FeasibilityMode,
    FullSearchOptions, SelectionVector,
};
use filtersel::synth::{random_adjacency, random_graph};
use filtersel::AdjacencyMatrix;
use itertools::Itertools;
use proptest::prelude::*;

/// Largest independent set size by trying all 2^n subsets.
fn brute_force_mis(g: &ConflictGraph) -> usize {
    let n = g.node_count();
    let edges = g.edges();
    (0u32..1 << n)
        .filter(|mask| {
            edges
                .iter()
                .all(|&(i, j)| mask & (1 << i) == 0 || mask & (1 << j) == 0)
        })
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

/// Best minimum pairwise distance over all k-subsets, no pruning. Ties keep
/// the lexicographically first subset.
fn brute_force_dispersion(a: &AdjacencyMatrix, k: usize) -> (f64, Vec<usize>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for subset in (0..a.len()).combinations(k) {
        let m = subset
            .iter()
            .tuple_combinations()
            .map(|(&i, &j)| a.get(i, j))
            .fold(f64::INFINITY, f64::min);
        if m > best.0 {
            best = (m, subset);
        }
    }
    best
}

#[test]
fn mis_matches_exhaustive_enumeration() {
    let mut rng = XorShift64Star::new(0x5eed);
    for case in 0..60 {
        let n = rng.range_inclusive(1, 14);
        let p = rng.uniform(0.05, 0.9);
        let g = random_graph(&mut rng, n, p);
        let expected = brute_force_mis(&g);
        for mode in [FeasibilityMode::ExactMax, FeasibilityMode::EarlyExit] {
            let s = max_independent_set(&g, None, mode);
            assert!(
                g.is_independent(s.indices()),
                "case {case}: not independent"
            );
            assert_eq!(
                s.len(),
                expected,
                "case {case}: n={n} p={p:.2} mode={mode:?}"
            );
        }
    }
}

#[test]
fn early_exit_and_exact_agree_on_feasibility() {
    let mut rng = XorShift64Star::new(11);
    for _ in 0..40 {
        let n = rng.range_inclusive(6, 24);
        let a = random_adjacency(&mut rng, n, 5);
        let k = rng.range_inclusive(2, 6.min(n));
        let mut thetas: Vec<f64> = a.pairs().map(|(_, _, d)| d).collect();
        thetas.push(a.max_entry() + 1.0);
        for theta in thetas.into_iter().step_by(3) {
            let g = build_conflict_graph(&a, theta);
            let fast = max_independent_set(&g, Some(k), FeasibilityMode::EarlyExit);
            let exact = max_independent_set(&g, Some(k), FeasibilityMode::ExactMax);
            assert!(g.is_independent(fast.indices()));
            assert_eq!(fast.len() >= k, exact.len() >= k, "theta {theta}");
            assert!(fast.len() <= exact.len());
        }
    }
}

#[test]
fn mis_size_is_monotone_in_threshold() {
    let mut rng = XorShift64Star::new(99);
    for _ in 0..25 {
        let n = rng.range_inclusive(5, 16);
        let a = random_adjacency(&mut rng, n, 4);
        let mut thetas: Vec<f64> = a.pairs().map(|(_, _, d)| d).collect();
        thetas.sort_by(f64::total_cmp);
        let sizes: Vec<usize> = thetas
            .iter()
            .map(|&t| {
                max_independent_set(
                    &build_conflict_graph(&a, t),
                    None,
                    FeasibilityMode::ExactMax,
                )
                .len()
            })
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
    }
}

#[test]
fn pruned_full_search_equals_unpruned_and_brute_force() {
    let mut rng = XorShift64Star::new(2024);
    for _ in 0..20 {
        let n = rng.range_inclusive(5, 14);
        let k = rng.range_inclusive(2, 6.min(n));
        let a = random_adjacency(&mut rng, n, 6);
        let pruned = full_search(&a, k).unwrap();
        let unpruned = full_search_with(
            &a,
            k,
            FullSearchOptions {
                prune: false,
                ..Default::default()
            },
        )
        .unwrap();
        let (best, subset) = brute_force_dispersion(&a, k);
        assert_eq!(pruned.achieved_min_distance, best);
        assert_eq!(pruned.selection.indices(), subset.as_slice());
        assert_eq!(unpruned.selection, pruned.selection);
        assert!(pruned.search_nodes <= unpruned.search_nodes);
    }
}

#[test]
fn full_search_n12_k5() {
    let a = random_adjacency(&mut XorShift64Star::new(12), 12, 5);
    let r = full_search(&a, 5).unwrap();
    let (best, subset) = brute_force_dispersion(&a, 5);
    assert_eq!(r.achieved_min_distance, best);
    assert_eq!(r.selection.indices(), subset.as_slice());
}

#[test]
fn fbs_matches_full_search_optimum() {
    let mut rng = XorShift64Star::new(7);
    for case in 0..80 {
        let n = rng.range_inclusive(4, 15);
        let m = rng.range_inclusive(2, 8);
        let k = rng.range_inclusive(2, 6.min(n));
        let a = random_adjacency(&mut rng, n, m);
        let fbs = fbs_select(&a, &FbsConfig::new(k)).unwrap();
        let fs = full_search(&a, k).unwrap();
        let range = fbs.initial_bracket.width();
        let tol = range * 2f64.powi(-20) + 1e-9;
        assert!(
            (fbs.achieved_min_distance - fs.achieved_min_distance).abs() <= tol,
            "case {case}: fbs {} vs fs {}",
            fbs.achieved_min_distance,
            fs.achieved_min_distance
        );
        assert_eq!(fbs.selection.len(), k);
        assert!(fbs.achieved_min_distance <= fs.achieved_min_distance);
    }
}

#[test]
fn fbs_selection_respects_final_lower_bound() {
    let mut rng = XorShift64Star::new(31);
    for _ in 0..30 {
        let n = rng.range_inclusive(6, 20);
        let k = rng.range_inclusive(2, 6.min(n));
        let a = random_adjacency(&mut rng, n, 5);
        let r = fbs_select(&a, &FbsConfig::new(k)).unwrap();
        let idx = r.selection.indices();
        for (x, &i) in idx.iter().enumerate() {
            for &j in &idx[x + 1..] {
                assert!(a.get(i, j) >= r.theta_bounds_final.lo);
            }
        }
        assert_eq!(
            r.achieved_min_distance,
            min_pairwise_distance(&r.selection, &a).unwrap()
        );
    }
}

#[test]
fn bracket_halves_every_iteration() {
    let mut rng = XorShift64Star::new(4);
    for _ in 0..30 {
        let a = random_adjacency(&mut rng, 12, 4);
        let r = fbs_select(&a, &FbsConfig::new(4)).unwrap();
        let expected = r.initial_bracket.width() * 2f64.powi(-20);
        let got = r.theta_bounds_final.width();
        let ulp = f64::EPSILON * r.initial_bracket.hi;
        assert!((got - expected).abs() <= 4.0 * ulp, "{got} vs {expected}");
    }
}

#[test]
fn selection_scales_with_adjacency() {
    let mut rng = XorShift64Star::new(17);
    for _ in 0..20 {
        let n = rng.range_inclusive(6, 16);
        let k = rng.range_inclusive(2, 5);
        let a = random_adjacency(&mut rng, n, 5);
        let base = fbs_select(&a, &FbsConfig::new(k)).unwrap();
        for alpha in [0.25, 3.0, 0.731] {
            let scaled = fbs_select(&a.scaled(alpha), &FbsConfig::new(k)).unwrap();
            assert_eq!(scaled.selection, base.selection, "alpha {alpha}");
            let expected = alpha * base.achieved_min_distance;
            assert!((scaled.achieved_min_distance - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }
}

#[test]
fn k_equals_n_selects_everything() {
    let a = random_adjacency(&mut XorShift64Star::new(1), 7, 3);
    let r = fbs_select(&a, &FbsConfig::new(7)).unwrap();
    assert_eq!(r.selection.indices(), [0, 1, 2, 3, 4, 5, 6]);
    assert_eq!(r.achieved_min_distance, a.min_off_diagonal().unwrap());
    let fs = full_search(&a, 7).unwrap();
    assert_eq!(fs.achieved_min_distance, r.achieved_min_distance);
}

#[test]
fn mis_effort_is_reported() {
    let g = random_graph(&mut XorShift64Star::new(8), 30, 0.3);
    let out = solve_mis(&g, None, FeasibilityMode::ExactMax);
    assert!(out.nodes > 0);
    assert!(g.is_independent(out.set.indices()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trimming_never_lowers_min_distance(seed in any::<u64>(), n in 4usize..14, extra in 1usize..5) {
        let a = random_adjacency(&mut XorShift64Star::new(seed), n, 4);
        let size = (2 + extra).min(n);
        let start = SelectionVector::new((0..size).collect());
        for k in 2..=size {
            let t = trim_selection(&start, &a, k).unwrap();
            prop_assert_eq!(t.len(), k);
            prop_assert!(t.indices().iter().all(|i| start.contains(*i)));
            prop_assert!(min_pairwise_distance(&t, &a).unwrap() >= min_pairwise_distance(&start, &a).unwrap());
        }
    }
}
