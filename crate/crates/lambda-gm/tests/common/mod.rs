#![allow(dead_code)]

use lambda_gm::atomic::AtomicMeasure;
use lambda_gm::rays::{Innovation, MaxLinearSpec};
use lambda_gm::{Dag, UndirectedGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// DAG with arcs drawn between a random vertex order.
pub fn random_dag(rng: &mut impl Rng, d: usize, p: f64) -> Dag {
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut arcs = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            if rng.gen_bool(p) {
                arcs.push((order[i], order[j]));
            }
        }
    }
    Dag::from_arcs(d, &arcs).unwrap()
}

pub fn random_maxlinear(rng: &mut impl Rng, d: usize) -> MaxLinearSpec {
    let dag = random_dag(rng, d, 0.5);
    let arcs: Vec<_> = dag.arcs().into_iter().map(|a| (a, rng.gen_range(0.3..2.0))).collect();
    let diag = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
    let alpha = *[0.5, 1.0, 2.0].choose(rng).unwrap();
    let inns = (0..d).map(|_| Innovation::Frechet { alpha, scale: rng.gen_range(0.5..2.0) }).collect();
    MaxLinearSpec::new(dag, &arcs, diag, inns).unwrap()
}

/// Atoms on a small value lattice so that nontrivial CI structure occurs.
pub fn random_atomic(rng: &mut impl Rng, d: usize, max_atoms: usize) -> AtomicMeasure {
    let k = rng.gen_range(0..=max_atoms);
    let mut atoms = Vec::new();
    while atoms.len() < k {
        let p: Vec<f64> = (0..d).map(|_| *[0.0, 0.0, 1.0, 2.0].choose(rng).unwrap()).collect();
        if p.iter().any(|&x| x != 0.0) {
            atoms.push((p, rng.gen_range(1..4) as f64));
        }
    }
    AtomicMeasure::new(d, atoms).unwrap()
}

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> UndirectedGraph {
    let mut g = UndirectedGraph::empty(n).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                g.add_edge(i, j).unwrap();
            }
        }
    }
    g
}

/// Connected-subset count by union–find over edges, independent of the
/// library's bitset search.
pub fn brute_force_connected_count(g: &UndirectedGraph) -> u64 {
    let n = g.n();
    let edges = g.edges();
    let mut count = 0;
    for mask in 1u32..1 << n {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for &(u, v) in &edges {
            if mask >> u & 1 == 1 && mask >> v & 1 == 1 {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                parent[ru] = rv;
            }
        }
        let roots: std::collections::HashSet<usize> =
            (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| find(&mut parent, v)).collect();
        if roots.len() == 1 {
            count += 1;
        }
    }
    count
}
