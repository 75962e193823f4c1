//! Verdict types shared by the CI oracles and Markov-property sweeps.

use serde::{Deserialize, Serialize};

use crate::VertexSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CiQuery {
    pub a: VertexSet,
    pub b: VertexSet,
    pub c: VertexSet,
}

impl CiQuery {
    pub fn new(a: VertexSet, b: VertexSet, c: VertexSet) -> Self {
        CiQuery { a, b, c }
    }
}

/// Evidence against a CI statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Product test set given by per-axis value subsets (full index space,
    /// `None` for axes outside the query), with the offending conditioning
    /// value of `Y_C`.
    TestSet { axes: Vec<Option<Vec<f64>>>, conditioning: Vec<f64>, defect: f64 },
    /// A ray charging both `A` and `B` with no mass on `C`.
    Ray { index: usize, direction: Vec<f64> },
    /// Rays with proportional `C` parts whose `(A, B)` table is not rank one.
    RayClass { rays: Vec<usize>, defect: f64 },
    /// Grid point where the density factorization fails.
    GridPoint { point: Vec<f64>, lhs: f64, rhs: f64, defect: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub query: CiQuery,
    pub verdict: bool,
    pub witness: Option<Witness>,
}

impl CiReport {
    pub fn holds(query: CiQuery) -> Self {
        CiReport { query, verdict: true, witness: None }
    }

    pub fn fails(query: CiQuery, witness: Witness) -> Self {
        CiReport { query, verdict: false, witness: Some(witness) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    /// Symmetry.
    L1,
    /// Decomposition.
    L2,
    /// Weak union.
    L3,
    /// Contraction.
    L4,
    DirectedLocal,
    DirectedGlobal,
    /// λ̄ ∏ λ̄_S = ∏ λ̄_C off Z(G).
    CliqueFactorization,
    /// Density vanishes on Z(G).
    ZeroOnZ,
    /// Ordinary density factorization on the positive orthant.
    PlainFactorization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub property: Property,
    /// Instantiating sets; semantics depend on `property`.
    pub sets: Vec<VertexSet>,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkovAudit {
    /// Number of instances evaluated, including ones not listed.
    pub checked: usize,
    pub entries: Vec<AuditEntry>,
}

impl MarkovAudit {
    pub fn push(&mut self, property: Property, sets: Vec<VertexSet>, holds: bool, witness: Option<Witness>) {
        self.checked += 1;
        self.entries.push(AuditEntry { property, sets, holds, witness });
    }

    /// Counts a passing instance without listing it.
    pub fn tally(&mut self) {
        self.checked += 1;
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.holds)
    }

    pub fn count(&self, p: Property) -> usize {
        self.entries.iter().filter(|e| e.property == p).count()
    }
}
