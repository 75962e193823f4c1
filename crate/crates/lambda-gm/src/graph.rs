//! Undirected graphs and DAGs on dense vertex ids `0..n`.

use serde::{Deserialize, Serialize};

use crate::error::{check_disjoint, check_within, Error, Result};
use crate::{par, VertexSet, MAX_VERTICES};

/// Enumeration guard for [`UndirectedGraph::count_connected_subgraphs`].
pub const SUBGRAPH_COUNT_LIMIT: usize = 24;
/// Enumeration guard for [`UndirectedGraph::separation_triples`].
pub const SEPARATION_TRIPLES_LIMIT: usize = 12;

/// Simple undirected graph. `vertices` may be a proper subset of `0..n`,
/// e.g. for the moral graph of an ancestral set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndirectedGraph {
    n: usize,
    vertices: VertexSet,
    adj: Vec<VertexSet>,
}

impl UndirectedGraph {
    pub fn empty(n: usize) -> Result<Self> {
        if n > MAX_VERTICES {
            return Err(Error::TooLarge { what: "vertex count", size: n, limit: MAX_VERTICES });
        }
        Ok(UndirectedGraph { n, vertices: VertexSet::full(n), adj: vec![VertexSet::EMPTY; n] })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n)?;
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("valid path")
    }

    pub fn ring(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges).expect("valid ring")
    }

    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &edges).expect("valid star")
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Self::from_edges(n, &edges).expect("valid complete graph")
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        for w in [u, v] {
            if !self.vertices.contains(w) || w >= self.n {
                return Err(Error::UnknownVertex(format!("{}", w + 1)));
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        self.adj[u] = self.adj[u].with(v);
        self.adj[v] = self.adj[v].with(u);
        Ok(())
    }

    /// Size of the index space.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> VertexSet {
        self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn neighbors(&self, v: usize) -> VertexSet {
        self.adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].contains(v)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in self.vertices.iter() {
            for v in self.adj[u].iter().filter(|&v| v > u) {
                out.push((u, v));
            }
        }
        out
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Subgraph induced on `keep`, same index space.
    pub fn induced(&self, keep: VertexSet) -> Self {
        let keep = keep.intersection(self.vertices);
        let adj = (0..self.n)
            .map(|v| if keep.contains(v) { self.adj[v].intersection(keep) } else { VertexSet::EMPTY })
            .collect();
        UndirectedGraph { n: self.n, vertices: keep, adj }
    }

    /// Vertices reachable from `start` through vertices of `allowed`.
    fn reach(&self, start: VertexSet, allowed: VertexSet) -> VertexSet {
        let mut seen = start.intersection(allowed);
        let mut frontier = seen;
        while !frontier.is_empty() {
            let mut next = VertexSet::EMPTY;
            for v in frontier.iter() {
                next = next.union(self.adj[v]);
            }
            frontier = next.intersection(allowed).difference(seen);
            seen = seen.union(frontier);
        }
        seen
    }

    /// Whether `set` induces a connected subgraph. The empty set is not connected.
    pub fn is_connected_set(&self, set: VertexSet) -> bool {
        match set.first() {
            None => false,
            Some(v) => self.reach(VertexSet::singleton(v), set) == set,
        }
    }

    pub fn components(&self) -> Vec<VertexSet> {
        let mut rest = self.vertices;
        let mut out = Vec::new();
        while let Some(v) = rest.first() {
            let comp = self.reach(VertexSet::singleton(v), self.vertices);
            out.push(comp);
            rest = rest.difference(comp);
        }
        out
    }

    pub fn is_forest(&self) -> bool {
        let e = self.edges().len();
        e + self.components().len() == self.vertex_count()
    }

    fn check_sets(&self, sets: &[VertexSet]) -> Result<()> {
        check_within(sets, self.n)?;
        for s in sets {
            if !s.is_subset(self.vertices) {
                let bad = s.difference(self.vertices).first().unwrap_or(0);
                return Err(Error::UnknownVertex(format!("{}", bad + 1)));
            }
        }
        check_disjoint(sets)
    }

    /// True iff every path from `a` to `b` meets `c`.
    pub fn separates(&self, a: VertexSet, b: VertexSet, c: VertexSet) -> Result<bool> {
        self.check_sets(&[a, b, c])?;
        if a.is_empty() || b.is_empty() {
            return Ok(true);
        }
        let reached = self.reach(a, self.vertices.difference(c));
        Ok(reached.is_disjoint(b))
    }

    /// Clique ordering by maximum-cardinality search, ties to the smallest id.
    pub fn clique_ordering(&self) -> Result<CliqueOrdering> {
        let priority: Vec<usize> = (0..self.n).collect();
        self.clique_ordering_with_priority(&priority)
    }

    /// Maximum-cardinality search where ties go to the vertex with the
    /// smallest `priority[v]`.
    pub fn clique_ordering_with_priority(&self, priority: &[usize]) -> Result<CliqueOrdering> {
        if priority.len() < self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: priority.len() });
        }
        let mut numbered = VertexSet::EMPTY;
        let mut order = Vec::with_capacity(self.vertex_count());
        let mut candidates = Vec::with_capacity(self.vertex_count());
        while numbered != self.vertices {
            let v = self
                .vertices
                .difference(numbered)
                .iter()
                .max_by(|&x, &y| {
                    let cx = self.adj[x].intersection(numbered).len();
                    let cy = self.adj[y].intersection(numbered).len();
                    cx.cmp(&cy).then(priority[y].cmp(&priority[x]))
                })
                .expect("unnumbered vertex exists");
            let earlier = self.adj[v].intersection(numbered);
            // zero fill-in: earlier neighbours must already be pairwise adjacent
            for u in earlier.iter() {
                if !earlier.without(u).is_subset(self.adj[u]) {
                    return Err(Error::NotDecomposable);
                }
            }
            candidates.push(earlier.with(v));
            order.push(v);
            numbered = numbered.with(v);
        }
        // each candidate has its own vertex as latest-visited member, so they are distinct
        let cliques: Vec<VertexSet> = candidates
            .iter()
            .copied()
            .filter(|&cand| !candidates.iter().any(|&o| o != cand && cand.is_subset(o)))
            .collect();
        let mut separators = Vec::with_capacity(cliques.len().saturating_sub(1));
        let mut seen = VertexSet::EMPTY;
        for (j, &c) in cliques.iter().enumerate() {
            if j > 0 {
                separators.push(c.intersection(seen));
            }
            seen = seen.union(c);
        }
        let ordering = CliqueOrdering { order, cliques, separators };
        debug_assert!(ordering.has_running_intersection());
        Ok(ordering)
    }

    /// Number of nonempty vertex subsets inducing a connected subgraph.
    pub fn count_connected_subgraphs(&self) -> Result<u64> {
        let k = self.vertex_count();
        if k > SUBGRAPH_COUNT_LIMIT {
            return Err(Error::TooLarge { what: "subgraph enumeration", size: k, limit: SUBGRAPH_COUNT_LIMIT });
        }
        let verts = self.vertices.to_vec();
        let dense = self.vertices == VertexSet::full(self.n);
        let total = 1u64 << k;
        let count = par::count_range(total, |mask| {
            if mask == 0 {
                return false;
            }
            let set = if dense {
                VertexSet(mask as u32)
            } else {
                VertexSet(mask as u32).iter().map(|i| verts[i]).collect()
            };
            self.is_connected_set(set)
        });
        Ok(count)
    }

    /// All ordered partitions `(a, b, c)` of the vertex set with `a`, `b`
    /// nonempty and `c` separating `a` from `b`.
    pub fn separation_triples(&self) -> Result<Vec<(VertexSet, VertexSet, VertexSet)>> {
        let k = self.vertex_count();
        if k > SEPARATION_TRIPLES_LIMIT {
            return Err(Error::TooLarge { what: "separation triples", size: k, limit: SEPARATION_TRIPLES_LIMIT });
        }
        let verts = self.vertices.to_vec();
        let mut out = Vec::new();
        for code in 0..3usize.pow(k as u32) {
            let (mut a, mut b, mut c) = (VertexSet::EMPTY, VertexSet::EMPTY, VertexSet::EMPTY);
            let mut x = code;
            for &v in &verts {
                match x % 3 {
                    0 => a = a.with(v),
                    1 => b = b.with(v),
                    _ => c = c.with(v),
                }
                x /= 3;
            }
            if a.is_empty() || b.is_empty() {
                continue;
            }
            if self.reach(a, self.vertices.difference(c)).is_disjoint(b) {
                out.push((a, b, c));
            }
        }
        Ok(out)
    }
}

/// Cliques in a running-intersection order and their separators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueOrdering {
    /// Visit order of the maximum-cardinality search.
    pub order: Vec<usize>,
    pub cliques: Vec<VertexSet>,
    /// `separators[j]` belongs to `cliques[j + 1]`; may contain the empty set.
    pub separators: Vec<VertexSet>,
}

impl CliqueOrdering {
    pub fn has_running_intersection(&self) -> bool {
        let mut seen = VertexSet::EMPTY;
        for (j, &c) in self.cliques.iter().enumerate() {
            if j > 0 {
                let s = c.intersection(seen);
                if s != self.separators[j - 1] || !self.cliques[..j].iter().any(|&p| s.is_subset(p)) {
                    return false;
                }
            }
            seen = seen.union(c);
        }
        true
    }

    /// Separators sorted, for multiset comparison.
    pub fn separator_multiset(&self) -> Vec<VertexSet> {
        let mut s = self.separators.clone();
        s.sort();
        s
    }
}

/// Directed acyclic graph stored by parent sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    n: usize,
    parents: Vec<VertexSet>,
    topo: Vec<usize>,
}

impl Dag {
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        if n > MAX_VERTICES {
            return Err(Error::TooLarge { what: "vertex count", size: n, limit: MAX_VERTICES });
        }
        let mut parents = vec![VertexSet::EMPTY; n];
        for &(p, c) in arcs {
            for w in [p, c] {
                if w >= n {
                    return Err(Error::UnknownVertex(format!("{}", w + 1)));
                }
            }
            if p == c {
                return Err(Error::SelfLoop(p));
            }
            parents[c] = parents[c].with(p);
        }
        // Kahn's algorithm, smallest ready vertex first
        let mut placed = VertexSet::EMPTY;
        let mut topo = Vec::with_capacity(n);
        while topo.len() < n {
            let next = (0..n).find(|&v| !placed.contains(v) && parents[v].is_subset(placed));
            match next {
                Some(v) => {
                    topo.push(v);
                    placed = placed.with(v);
                }
                None => return Err(Error::CyclicGraph),
            }
        }
        Ok(Dag { n, parents, topo })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    pub fn parents(&self, v: usize) -> VertexSet {
        self.parents[v]
    }

    pub fn children(&self, v: usize) -> VertexSet {
        (0..self.n).filter(|&c| self.parents[c].contains(v)).collect()
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for c in 0..self.n {
            for p in self.parents[c].iter() {
                out.push((p, c));
            }
        }
        out.sort();
        out
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// `w` together with all of its ancestors.
    pub fn ancestral_set(&self, w: VertexSet) -> VertexSet {
        let mut an = w;
        for &v in self.topo.iter().rev() {
            if an.contains(v) {
                an = an.union(self.parents[v]);
            }
        }
        an
    }

    /// Strict descendants of `v`.
    pub fn descendants(&self, v: usize) -> VertexSet {
        let mut de = VertexSet::EMPTY;
        for &u in &self.topo {
            if self.parents[u].contains(v) || !self.parents[u].is_disjoint(de) {
                de = de.with(u);
            }
        }
        de
    }

    pub fn skeleton(&self) -> UndirectedGraph {
        UndirectedGraph::from_edges(self.n, &self.arcs()).expect("arcs are valid")
    }

    pub fn has_collider(&self) -> bool {
        self.parents.iter().any(|p| p.len() >= 2)
    }

    /// Moral graph of the ancestral set of `w`.
    pub fn moral_ancestral(&self, w: VertexSet) -> Result<UndirectedGraph> {
        check_within(&[w], self.n)?;
        let an = self.ancestral_set(w);
        let mut g = UndirectedGraph::empty(self.n)?.induced(an);
        for v in an.iter() {
            let pa: Vec<usize> = self.parents[v].iter().collect();
            for (i, &p) in pa.iter().enumerate() {
                g.add_edge(p, v)?;
                for &q in &pa[i + 1..] {
                    g.add_edge(p, q)?;
                }
            }
        }
        Ok(g)
    }

    /// Directed global separation: `s` separates `a` from `b` in the moral
    /// graph of the ancestral set of `a ∪ b ∪ s`.
    pub fn dg_separated(&self, a: VertexSet, b: VertexSet, s: VertexSet) -> Result<bool> {
        check_within(&[a, b, s], self.n)?;
        check_disjoint(&[a, b, s])?;
        let m = self.moral_ancestral(a.union(b).union(s))?;
        m.separates(a, b, s)
    }
}
