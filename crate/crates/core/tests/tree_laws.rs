use std::collections::{BTreeMap, BTreeSet};

use adaptive_im::diffusion::marginal_delta;
use adaptive_im::process::estimate_influence;
use adaptive_im::realization::{for_each_completion, is_compatible, is_final};
use adaptive_im::rng;
use adaptive_im::tree::*;
use adaptive_im::verify::{random_process_status, random_tiny_graph};
use adaptive_im::{Exec, FeedbackSchedule, Graph, Horizon, PolicyKind, Realization, Status};
use proptest::prelude::*;

/// Greedy gain of the best node, one full realization at a time.
fn brute_best(g: &Graph, u: &Status) -> f64 {
    let n = g.node_count();
    let mut gains = vec![0.0; n];
    for_each_completion(g, &u.observed, 20, |live, p| {
        let psi = Realization::from_live_mask(live);
        for v in (0..n).filter(|v| !u.active.contains(v)) {
            gains[v] += p * marginal_delta(g, &u.active, &BTreeSet::from([v]), &psi, Horizon::Unbounded).unwrap() as f64;
        }
    })
    .unwrap();
    gains.into_iter().fold(0.0, f64::max)
}

/// `α_{∞,d}(U)`: runs `d` rounds on every full realization and groups the
/// resulting statuses.
fn brute_alpha(g: &Graph, u: &Status, d: Option<u32>) -> f64 {
    let mut groups: BTreeMap<Status, f64> = BTreeMap::new();
    for_each_completion(g, &u.observed, 20, |live, p| {
        let mut s = u.clone();
        let mut rounds = 0;
        while d.is_none_or(|d| rounds < d) {
            let mut next = s.clone();
            for a in s.pending_frontier(g) {
                for &e in g.out_edges(a) {
                    if !s.active.contains(&g.target(e)) && !s.observed.is_observed(e) {
                        next.observed.observe(e, live[e]).unwrap();
                        if live[e] {
                            next.active.insert(g.target(e));
                        }
                    }
                }
            }
            if next == s {
                break;
            }
            s = next;
            rounds += 1;
        }
        *groups.entry(s).or_insert(0.0) += p;
    })
    .unwrap();
    groups.iter().map(|(s, p)| p * brute_best(g, s)).sum::<f64>() / brute_best(g, u)
}

fn sched_of(i: usize) -> FeedbackSchedule {
    [FeedbackSchedule::Finite(1), FeedbackSchedule::Finite(2), FeedbackSchedule::FullAdoption][i]
}

#[test]
fn conditioning_prunes_contradicted_branch() {
    // Seed 0, observe 0->1: branches "live" and "dead". Conditioning on a
    // status where 0->1 is dead keeps only the second.
    let g = Graph::uniform(3, &[(0, 1), (1, 2)], 0.5).unwrap();
    let t = build_policy_tree(&g, &mut DegreeRule, 2, FeedbackSchedule::Finite(1), false).unwrap();
    let u = Status::new([2], Realization::new([], [0]).unwrap());
    let c = condition_tree(&g, &t, &u).unwrap();
    assert!(c.edge_count() < t.edge_count());
    for e in c.edges() {
        assert!(e.status.observed.dead().contains(&0));
        assert!(e.status.active.contains(&2));
        assert!(is_compatible(&e.status.observed, &u.observed));
    }
    assert_eq!(c.nodes()[0].label, t.nodes()[0].label);
}

#[test]
fn concatenation_shape() {
    // t1: seed 0 on 0->1 with two observed outcomes. t2: two seeds.
    let g = Graph::uniform(3, &[(0, 1), (2, 1)], 0.5).unwrap();
    let t1 = build_policy_tree(&g, &mut DegreeRule, 1, FeedbackSchedule::FullAdoption, false).unwrap();
    assert_eq!(t1.leaf_edges().count(), 2);
    let t2 = build_policy_tree(&g, &mut HashRule { seed: 3 }, 2, FeedbackSchedule::FullAdoption, false).unwrap();
    let c = concat_trees(&g, &t1, &t2).unwrap();
    let top = c.root_edge().unwrap();
    assert_eq!(c.nodes()[top.to].label, Label::Seeds(BTreeSet::from([0])));
    for &branch in &c.nodes()[top.to].children {
        let below = &c.nodes()[c.edges()[branch].to];
        assert_eq!(below.level, 2);
        assert_eq!(below.label, t2.nodes()[0].label);
    }
    assert!(probability_sum_deviation(&c) < 1e-12);
    validate_tree(&c).unwrap();
    assert!(tree_profit(&g, &c).unwrap() >= tree_profit(&g, &t2).unwrap() - TOLERANCE);
}

#[test]
fn tree_profit_matches_simulation() {
    for s in 0..8 {
        let mut r = rng::stream(s, 11);
        let g = random_tiny_graph(&mut r, 4);
        let k = g.node_count().min(2);
        let sched = sched_of(s as usize % 3);
        let exact = tree_profit(&g, &build_policy_tree(&g, &mut DegreeRule, k, sched, false).unwrap()).unwrap();
        let mc = estimate_influence(&g, PolicyKind::HighDegree, k, sched, 20_000, s, Exec::default()).unwrap();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.stderr + 1e-12, "exact {exact} vs {} ± {}", mc.mean, mc.stderr);
    }
}

#[test]
fn regret_chain_by_hand() {
    // 0 -> 1 -> 2 -> 3 with p = 1/2, node 0 freshly seeded.
    let g = Graph::uniform(4, &[(0, 1), (1, 2), (2, 3)], 0.5).unwrap();
    let u = Status::new([0], Realization::empty());
    let a = regret_ratio(&g, &u, Horizon::Unbounded, Horizon::Finite(1)).unwrap();
    assert!(a >= 1.0);
    assert!((a - brute_alpha(&g, &u, Some(1))).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concatenation_keeps_profit_and_probabilities(seed in any::<u64>(), s1 in 0usize..3, s2 in 0usize..3) {
        let mut r = rng::stream(seed, 0);
        let g = random_tiny_graph(&mut r, 4);
        let k = g.node_count().min(2);
        let t1 = build_policy_tree(&g, &mut HashRule { seed }, k, sched_of(s1), false).unwrap();
        let t2 = build_policy_tree(&g, &mut ExactGreedy::default(), k, sched_of(s2), s2 > 0).unwrap();
        for (a, b) in [(&t1, &t2), (&t2, &t1)] {
            let c = concat_trees(&g, a, b).unwrap();
            prop_assert!(probability_sum_deviation(&c) <= 1e-12);
            prop_assert!(validate_tree(&c).is_ok());
            prop_assert!(tree_profit(&g, &c).unwrap() >= tree_profit(&g, b).unwrap() - TOLERANCE);
        }
    }

    #[test]
    fn regret_ratio_laws(seed in any::<u64>()) {
        let mut r = rng::stream(seed, 0);
        let g = random_tiny_graph(&mut r, 4);
        let u = random_process_status(&g, &mut r);
        prop_assume!(u.active.len() < g.node_count() && brute_best(&g, &u) > 0.0);
        let mut prev = 0.0;
        for d in [1, 2, 3] {
            let a = regret_ratio(&g, &u, Horizon::Unbounded, Horizon::Finite(d)).unwrap();
            prop_assert!((a - brute_alpha(&g, &u, Some(d))).abs() < 1e-9);
            prop_assert!(a >= 1.0 - TOLERANCE && a >= prev - TOLERANCE);
            prop_assert!(regret_upper_bound(&g, &u, Horizon::Unbounded, Horizon::Finite(d)).unwrap() >= a - TOLERANCE);
            prev = a;
        }
        let full = regret_ratio(&g, &u, Horizon::Unbounded, Horizon::Unbounded).unwrap();
        prop_assert!(full >= prev - TOLERANCE);
        if is_final(&g, &u) {
            prop_assert_eq!(full, 1.0);
            let b = regret_upper_bound(&g, &u, Horizon::Unbounded, Horizon::Unbounded).unwrap();
            prop_assert!((b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_of_tree(seed in any::<u64>(), s in 0usize..3) {
        let mut r = rng::stream(seed, 0);
        let g = random_tiny_graph(&mut r, 4);
        let k = g.node_count().min(2);
        let t = build_policy_tree(&g, &mut ExactGreedy::default(), k, sched_of(s), false).unwrap();
        let alpha = regret_ratio_tree(&g, &t).unwrap();
        let again = t
            .edges()
            .iter()
            .map(|e| &e.status)
            .filter(|u| u.active.len() < g.node_count() && brute_best(&g, u) > 0.0)
            .map(|u| brute_alpha(&g, u, None))
            .fold(1.0, f64::max);
        prop_assert!((alpha - again).abs() < 1e-9);
        if sched_of(s) == FeedbackSchedule::FullAdoption {
            prop_assert_eq!(alpha, 1.0);
        }
    }

    #[test]
    fn lazy_tree_equals_plain(seed in any::<u64>(), s in 0usize..3) {
        let mut r = rng::stream(seed, 0);
        let g = random_tiny_graph(&mut r, 4);
        let k = g.node_count().min(2);
        let mut greedy = ExactGreedy::default();
        let plain = tree_profit(&g, &build_policy_tree(&g, &mut greedy, k, sched_of(s), false).unwrap()).unwrap();
        let lazy_t = build_policy_tree(&g, &mut greedy, k, sched_of(s), true).unwrap();
        prop_assert!(lazy_t.leaf_edges().all(|e| is_final(&g, &e.status)));
        prop_assert!((plain - tree_profit(&g, &lazy_t).unwrap()).abs() <= TOLERANCE);
    }

    #[test]
    fn conditioned_statuses_extend_condition(seed in any::<u64>()) {
        let mut r = rng::stream(seed, 0);
        let g = random_tiny_graph(&mut r, 4);
        let t = build_policy_tree(&g, &mut HashRule { seed }, g.node_count().min(2), FeedbackSchedule::Finite(1), false).unwrap();
        let u = random_process_status(&g, &mut r);
        let c = condition_tree(&g, &t, &u).unwrap();
        prop_assert!(!c.is_empty());
        for e in c.edges() {
            prop_assert!(u.active.is_subset(&e.status.active));
            prop_assert!(u.observed.live().is_subset(e.status.observed.live()));
            prop_assert!(u.observed.dead().is_subset(e.status.observed.dead()));
        }
        prop_assert_eq!(condition_tree(&g, &t, &Status::empty()).unwrap(), t);
    }
}
