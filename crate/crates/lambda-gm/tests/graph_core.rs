mod common;

use lambda_gm::{Dag, Error, UndirectedGraph, VertexSet};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Chordal graph grown along a perfect elimination ordering: each new
/// vertex attaches to a random subset of an existing clique.
fn random_chordal(rng: &mut impl Rng, n: usize) -> UndirectedGraph {
    let mut g = UndirectedGraph::empty(n).unwrap();
    let mut cliques: Vec<Vec<usize>> = vec![vec![0]];
    for v in 1..n {
        let base = cliques.choose(rng).unwrap().clone();
        let attach: Vec<usize> = base.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
        for &u in &attach {
            g.add_edge(u, v).unwrap();
        }
        let mut c = attach;
        c.push(v);
        cliques.push(c);
    }
    g
}

/// Chordality by repeated removal of simplicial vertices.
fn is_chordal(g: &UndirectedGraph) -> bool {
    let mut left = g.vertices();
    while !left.is_empty() {
        let simplicial = left.iter().find(|&v| {
            let nb = g.neighbors(v).intersection(left);
            nb.iter().all(|u| nb.without(u).is_subset(g.neighbors(u)))
        });
        match simplicial {
            Some(v) => left = left.without(v),
            None => return false,
        }
    }
    true
}

fn maximal_cliques(g: &UndirectedGraph) -> Vec<VertexSet> {
    let n = g.n();
    let is_clique = |s: VertexSet| s.iter().all(|u| s.without(u).is_subset(g.neighbors(u)));
    let all: Vec<VertexSet> = (1u32..1 << n).map(VertexSet).filter(|&s| is_clique(s)).collect();
    let mut max: Vec<VertexSet> = all.iter().copied().filter(|&s| !all.iter().any(|&o| o != s && s.is_subset(o))).collect();
    max.sort();
    max
}

/// Separation by explicit path search with a visited list.
fn separated_by_dfs(g: &UndirectedGraph, a: VertexSet, b: VertexSet, c: VertexSet) -> bool {
    let mut stack: Vec<usize> = a.iter().collect();
    let mut seen = vec![false; g.n()];
    for v in a.iter() {
        seen[v] = true;
    }
    while let Some(v) = stack.pop() {
        if b.contains(v) {
            return false;
        }
        for u in 0..g.n() {
            if g.has_edge(u, v) && !seen[u] && !c.contains(u) {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    true
}

fn triples(n: usize) -> impl Iterator<Item = (VertexSet, VertexSet, VertexSet)> {
    (0..4usize.pow(n as u32)).filter_map(move |code| {
        let mut sets = [VertexSet::EMPTY; 3];
        let mut x = code;
        for v in 0..n {
            if x % 4 < 3 {
                sets[x % 4] = sets[x % 4].with(v);
            }
            x /= 4;
        }
        (!sets[0].is_empty() && !sets[1].is_empty()).then_some((sets[0], sets[1], sets[2]))
    })
}

#[test]
fn connected_counts_match_brute_force() {
    let mut rng = common::rng(7);
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let p = rng.gen_range(0.1..0.7);
        let g = common::random_graph(&mut rng, n, p);
        assert_eq!(g.count_connected_subgraphs().unwrap(), common::brute_force_connected_count(&g));
    }
    for d in 2..=10u64 {
        assert_eq!(UndirectedGraph::star(d as usize).count_connected_subgraphs().unwrap(), (1 << (d - 1)) + d - 1);
        if d >= 3 {
            assert_eq!(UndirectedGraph::ring(d as usize).count_connected_subgraphs().unwrap(), d * (d - 1) + 1);
        }
        assert_eq!(UndirectedGraph::path(d as usize).count_connected_subgraphs().unwrap(), d * (d + 1) / 2);
    }
}

#[test]
fn count_guard() {
    let g = UndirectedGraph::path(25);
    assert!(matches!(g.count_connected_subgraphs(), Err(Error::TooLarge { .. })));
    assert!(matches!(UndirectedGraph::path(13).separation_triples(), Err(Error::TooLarge { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn separator_multiset_independent_of_tie_breaking(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = common::rng(seed);
        let g = random_chordal(&mut rng, n);
        let base = g.clique_ordering().unwrap();
        prop_assert!(base.has_running_intersection());
        let mut cl = base.cliques.clone();
        cl.sort();
        prop_assert_eq!(cl, maximal_cliques(&g));
        for _ in 0..5 {
            let mut pr: Vec<usize> = (0..n).collect();
            pr.shuffle(&mut rng);
            let other = g.clique_ordering_with_priority(&pr).unwrap();
            prop_assert!(other.has_running_intersection());
            prop_assert_eq!(other.separator_multiset(), base.separator_multiset());
        }
    }

    #[test]
    fn decomposability_matches_simplicial_elimination(seed in any::<u64>(), n in 1usize..8, p in 0.2f64..0.8) {
        let g = common::random_graph(&mut common::rng(seed), n, p);
        prop_assert_eq!(g.clique_ordering().is_ok(), is_chordal(&g));
    }

    #[test]
    fn separation_symmetric_monotone(seed in any::<u64>(), n in 2usize..7, p in 0.2f64..0.7) {
        let mut rng = common::rng(seed);
        let g = common::random_graph(&mut rng, n, p);
        for (a, b, c) in triples(n) {
            let s = g.separates(a, b, c).unwrap();
            prop_assert_eq!(s, separated_by_dfs(&g, a, b, c));
            prop_assert_eq!(s, g.separates(b, a, c).unwrap());
            if s {
                let rest = g.vertices().difference(a.union(b).union(c));
                for v in rest.iter() {
                    prop_assert!(g.separates(a, b, c.with(v)).unwrap());
                }
            }
        }
    }

    #[test]
    fn collider_free_dag_matches_skeleton(seed in any::<u64>(), d in 2usize..7) {
        let mut rng = common::rng(seed);
        // orient a random forest away from a root: no vertex has two parents
        let mut arcs = Vec::new();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut rng);
        for k in 1..d {
            if rng.gen_bool(0.8) {
                arcs.push((order[rng.gen_range(0..k)], order[k]));
            }
        }
        let dag = Dag::from_arcs(d, &arcs).unwrap();
        prop_assert!(!dag.has_collider());
        let sk = dag.skeleton();
        for (a, b, c) in triples(d) {
            prop_assert_eq!(dag.dg_separated(a, b, c).unwrap(), sk.separates(a, b, c).unwrap());
        }
    }

    #[test]
    fn separation_triples_are_separating_partitions(seed in any::<u64>(), n in 2usize..7) {
        let g = common::random_graph(&mut common::rng(seed), n, 0.4);
        let ts = g.separation_triples().unwrap();
        let full = g.vertices();
        for &(a, b, c) in &ts {
            prop_assert_eq!(a.union(b).union(c), full);
            prop_assert!(g.separates(a, b, c).unwrap());
        }
        let expected = triples(n)
            .filter(|&(a, b, c)| a.union(b).union(c) == full && g.separates(a, b, c).unwrap())
            .count();
        prop_assert_eq!(ts.len(), expected);
    }
}

#[test]
fn overlapping_and_unknown_inputs() {
    let g = UndirectedGraph::path(3);
    let s = |v: &[usize]| VertexSet::from_slice(v);
    assert!(matches!(g.separates(s(&[0]), s(&[0, 2]), VertexSet::EMPTY), Err(Error::OverlappingSets(..))));
    assert!(matches!(g.separates(s(&[0]), s(&[5]), VertexSet::EMPTY), Err(Error::UnknownVertex(_))));
    assert!(matches!(Dag::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]), Err(Error::CyclicGraph)));
    assert!(matches!(Dag::from_arcs(2, &[(1, 1)]), Err(Error::SelfLoop(_))));
}
