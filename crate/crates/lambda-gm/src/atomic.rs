//! Finitely-atomic measures on punctured space and their exact CI oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{check_disjoint, check_within, Error, Result};
use crate::report::{CiQuery, CiReport, MarkovAudit, Property, Witness};
use crate::{par, UndirectedGraph, VertexSet, MAX_VERTICES};

/// Guard on the number of per-axis subset combinations, as a power of two.
pub const ORACLE_LOG2_LIMIT: u32 = 24;
/// Largest dimension accepted by [`semigraphoid_audit`].
pub const AUDIT_MAX_DIM: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    d: usize,
    atoms: Vec<Atom>,
}

fn cmp_points(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

impl AtomicMeasure {
    pub fn empty(d: usize) -> Self {
        AtomicMeasure { d, atoms: Vec::new() }
    }

    /// Validates and canonicalizes: sorted points, duplicates merged.
    pub fn new(d: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if d == 0 || d > MAX_VERTICES {
            return Err(Error::InvalidMeasure(format!("dimension {d} not supported")));
        }
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (mut p, w) in atoms {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.len() });
            }
            if !(w > 0.0 && w.is_finite()) || p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure("weights must be positive and coordinates finite".into()));
            }
            // -0.0 and 0.0 are the same point
            p.iter_mut().for_each(|x| *x += 0.0);
            if p.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidMeasure("atom at the origin".into()));
            }
            out.push(Atom { point: p, weight: w });
        }
        Ok(Self::canonical(d, out))
    }

    fn canonical(d: usize, mut atoms: Vec<Atom>) -> Self {
        atoms.sort_by(|a, b| cmp_points(&a.point, &b.point));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.point == a.point => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        AtomicMeasure { d, atoms: merged }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    fn check_index_set(&self, dset: VertexSet) -> Result<()> {
        if dset.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        check_within(&[dset], self.d)
    }

    /// Λ_D: projection onto `dset`, dropping atoms that land at the origin.
    pub fn marginal(&self, dset: VertexSet) -> Result<AtomicMeasure> {
        self.check_index_set(dset)?;
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { point: dset.iter().map(|v| a.point[v]).collect(), weight: a.weight })
            .filter(|a| a.point.iter().any(|&x| x != 0.0))
            .collect();
        Ok(Self::canonical(dset.len(), atoms))
    }

    /// Λ⁰_D: atoms vanishing off `dset`, projected onto `dset`.
    pub fn restrict_zero(&self, dset: VertexSet) -> Result<AtomicMeasure> {
        self.check_index_set(dset)?;
        let rest = VertexSet::full(self.d).difference(dset);
        let atoms = self
            .atoms
            .iter()
            .filter(|a| rest.iter().all(|v| a.point[v] == 0.0))
            .map(|a| Atom { point: dset.iter().map(|v| a.point[v]).collect(), weight: a.weight })
            .collect();
        Ok(Self::canonical(dset.len(), atoms))
    }

    /// Support patterns of the atoms.
    pub fn charged_faces(&self) -> BTreeSet<VertexSet> {
        self.atoms.iter().map(|a| support(&a.point)).collect()
    }

    pub fn face_bound_check(&self, g: &UndirectedGraph) -> Result<FaceBoundReport> {
        if g.n() != self.d || g.vertices() != VertexSet::full(self.d) {
            return Err(Error::DimensionMismatch { expected: self.d, found: g.vertex_count() });
        }
        let disconnected: Vec<VertexSet> =
            self.charged_faces().into_iter().filter(|&f| !g.is_connected_set(f)).collect();
        Ok(FaceBoundReport { holds: disconnected.is_empty(), disconnected })
    }

    /// Exact CI oracle over the product-form test class.
    ///
    /// A Borel product set `R = ×_v R_v` only matters through its trace
    /// `S_v = R_v ∩ values_v` on the observed coordinate values. The origin
    /// lies outside the closure of `R` iff some `R_v` avoids 0 in its
    /// closure; since each `S_v` is finite and hence closed, `R_v = S_v` is
    /// always a valid choice, so some admissible `R` has trace `(S_v)` iff
    /// some `S_v` excludes 0. Enumerating nonempty per-axis value subsets
    /// with at least one zero-free axis therefore covers the test class
    /// exactly.
    pub fn ci_oracle(&self, a: VertexSet, b: VertexSet, c: VertexSet) -> Result<CiReport> {
        check_within(&[a, b, c], self.d)?;
        check_disjoint(&[a, b, c])?;
        let query = CiQuery::new(a, b, c);
        if a.is_empty() || b.is_empty() {
            return Ok(CiReport::holds(query));
        }
        let abc = a.union(b).union(c);
        let m = self.marginal(abc)?;
        if m.is_zero() {
            return Ok(CiReport::holds(query));
        }
        let local = |s: VertexSet| -> Vec<usize> { s.iter().map(|v| abc.rank(v)).collect() };
        let table = ValueTable::build(&m)?;
        let (la, lb, lc) = (local(a), local(b), local(c));
        let traces = table.admissible_traces();
        let failures = par::map_slice(&traces, |(trace, order)| {
            table.factorization_defect(&m, trace, &la, &lb, &lc).map(|(cond, defect)| (*order, trace.clone(), cond, defect))
        });
        let first = failures.into_iter().flatten().min_by_key(|(order, ..)| *order);
        Ok(match first {
            None => CiReport::holds(query),
            Some((order, _, conditioning, defect)) => {
                let subsets = table.decode(order);
                let mut axes = vec![None; self.d];
                for (k, v) in abc.iter().enumerate() {
                    axes[v] = Some(subsets[k].clone());
                }
                CiReport::fails(query, Witness::TestSet { axes, conditioning, defect })
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceBoundReport {
    pub holds: bool,
    pub disconnected: Vec<VertexSet>,
}

fn support(p: &[f64]) -> VertexSet {
    p.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, _)| i).collect()
}

type Bits = Vec<u64>;

fn bits_and(a: &[u64], b: &[u64]) -> Bits {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn bits_empty(a: &[u64]) -> bool {
    a.iter().all(|&x| x == 0)
}

/// Per-axis observed values of a measure and, for each axis subset, the
/// atoms whose coordinate lies in it.
struct ValueTable {
    values: Vec<Vec<f64>>,
    /// `value_idx[atom][axis]`
    value_idx: Vec<Vec<usize>>,
    /// `subset_atoms[axis][mask]`
    subset_atoms: Vec<Vec<Bits>>,
    zero_idx: Vec<Option<usize>>,
}

impl ValueTable {
    fn build(m: &AtomicMeasure) -> Result<Self> {
        let d = m.d;
        let n = m.atoms.len();
        let words = n.div_ceil(64);
        let mut values = Vec::with_capacity(d);
        for k in 0..d {
            let mut vs: Vec<f64> = m.atoms.iter().map(|a| a.point[k]).collect();
            vs.sort_by(f64::total_cmp);
            vs.dedup();
            values.push(vs);
        }
        let total: u32 = values.iter().map(|v| v.len() as u32).sum();
        if total > ORACLE_LOG2_LIMIT {
            return Err(Error::TooManyCells { cells: 1u128 << total.min(127), limit: 1u128 << ORACLE_LOG2_LIMIT });
        }
        let value_idx: Vec<Vec<usize>> = m
            .atoms
            .iter()
            .map(|a| (0..d).map(|k| values[k].partition_point(|&x| x < a.point[k])).collect())
            .collect();
        let mut subset_atoms = Vec::with_capacity(d);
        for k in 0..d {
            let nv = values[k].len();
            let mut per_value = vec![vec![0u64; words]; nv];
            for (i, idx) in value_idx.iter().enumerate() {
                per_value[idx[k]][i / 64] |= 1 << (i % 64);
            }
            let mut subs = vec![vec![0u64; words]; 1 << nv];
            for mask in 1usize..1 << nv {
                let low = mask.trailing_zeros() as usize;
                let rest = mask & (mask - 1);
                let merged: Bits = subs[rest].iter().zip(&per_value[low]).map(|(x, y)| x | y).collect();
                subs[mask] = merged;
            }
            subset_atoms.push(subs);
        }
        let zero_idx = values.iter().map(|vs| vs.iter().position(|&x| x == 0.0)).collect();
        Ok(ValueTable { values, value_idx, subset_atoms, zero_idx })
    }

    /// Distinct nonempty traces of admissible test sets, each tagged with
    /// the enumeration index of the first test set producing it.
    fn admissible_traces(&self) -> Vec<(Bits, u64)> {
        let d = self.values.len();
        let words = self.subset_atoms[0][0].len();
        let mut seen: HashMap<Bits, u64> = HashMap::new();
        let full: Bits = vec![u64::MAX; words];
        // depth-first over axes; `code` packs the chosen masks in mixed radix
        fn rec(
            t: &ValueTable,
            k: usize,
            d: usize,
            cur: &Bits,
            zero_free: bool,
            code: u64,
            seen: &mut HashMap<Bits, u64>,
        ) {
            if bits_empty(cur) {
                return;
            }
            if k == d {
                if zero_free {
                    seen.entry(cur.clone()).or_insert(code);
                }
                return;
            }
            let nv = t.values[k].len();
            for mask in 1u64..1 << nv {
                let next = bits_and(cur, &t.subset_atoms[k][mask as usize]);
                let excl = match t.zero_idx[k] {
                    None => true,
                    Some(z) => mask >> z & 1 == 0,
                };
                rec(t, k + 1, d, &next, zero_free || excl, (code << nv) | mask, seen);
            }
        }
        rec(self, 0, d, &full, false, 0, &mut seen);
        let mut out: Vec<(Bits, u64)> = seen.into_iter().collect();
        out.sort_by_key(|(_, c)| *c);
        out
    }

    fn decode(&self, code: u64) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.values.len()];
        let mut code = code;
        for k in (0..self.values.len()).rev() {
            let nv = self.values[k].len();
            let mask = code & ((1 << nv) - 1);
            code >>= nv;
            out[k] = (0..nv).filter(|i| mask >> i & 1 == 1).map(|i| self.values[k][i]).collect();
        }
        out
    }

    /// Checks P(ab,c)P(c) = P(a,c)P(b,c) for the atoms in `trace`. Returns
    /// the failing conditioning value and normalized defect, if any.
    fn factorization_defect(
        &self,
        m: &AtomicMeasure,
        trace: &Bits,
        la: &[usize],
        lb: &[usize],
        lc: &[usize],
    ) -> Option<(Vec<f64>, f64)> {
        type Key = Vec<usize>;
        let mut groups: BTreeMap<Key, Vec<(Key, Key, f64)>> = BTreeMap::new();
        let mut mass = 0.0;
        for (i, atom) in m.atoms.iter().enumerate() {
            if trace[i / 64] >> (i % 64) & 1 == 0 {
                continue;
            }
            let idx = &self.value_idx[i];
            let key = |s: &[usize]| -> Key { s.iter().map(|&k| idx[k]).collect() };
            groups.entry(key(lc)).or_default().push((key(la), key(lb), atom.weight));
            mass += atom.weight;
        }
        for (ckey, rows) in &groups {
            let pc: f64 = rows.iter().map(|r| r.2).sum();
            let mut pa: BTreeMap<&Key, f64> = BTreeMap::new();
            let mut pb: BTreeMap<&Key, f64> = BTreeMap::new();
            let mut pab: HashMap<(&Key, &Key), f64> = HashMap::new();
            for (ka, kb, w) in rows {
                *pa.entry(ka).or_default() += w;
                *pb.entry(kb).or_default() += w;
                *pab.entry((ka, kb)).or_default() += w;
            }
            for (ka, wa) in &pa {
                for (kb, wb) in &pb {
                    let joint = pab.get(&(*ka, *kb)).copied().unwrap_or(0.0);
                    let lhs = joint * pc;
                    let rhs = wa * wb;
                    if lhs != rhs && (lhs - rhs).abs() > 1e-12 * lhs.max(rhs) {
                        let cond = lc.iter().zip(ckey).map(|(&k, &i)| self.values[k][i]).collect();
                        return Some((cond, (lhs - rhs).abs() / (mass * mass)));
                    }
                }
            }
        }
        None
    }
}

/// Evaluates the semi-graphoid axioms on every disjoint set tuple.
///
/// Instances: (L1) `A⊥B|C ⇒ B⊥A|C`; (L2) `A⊥B∪D|C ⇒ A⊥B|C`;
/// (L3) `A⊥B∪D|C ⇒ A⊥B|C∪D`; (L4) `A⊥B|C ∧ A⊥D|B∪C ⇒ A⊥B∪D|C`.
/// Only violations are listed; `checked` counts all instances.
pub fn semigraphoid_audit(m: &AtomicMeasure) -> Result<MarkovAudit> {
    let d = m.d;
    if d > AUDIT_MAX_DIM {
        return Err(Error::TooLarge { what: "semi-graphoid audit dimension", size: d, limit: AUDIT_MAX_DIM });
    }
    let mut tuples = Vec::new();
    for code in 0..5usize.pow(d as u32) {
        let mut sets = [VertexSet::EMPTY; 5];
        let mut x = code;
        for v in 0..d {
            sets[x % 5] = sets[x % 5].with(v);
            x /= 5;
        }
        let [_, a, b, c, dd] = sets;
        if !a.is_empty() && !b.is_empty() {
            tuples.push((a, b, c, dd));
        }
    }
    let mut queries: BTreeSet<(VertexSet, VertexSet, VertexSet)> = BTreeSet::new();
    for &(a, b, c, dd) in &tuples {
        if dd.is_empty() {
            queries.insert((a, b, c));
            queries.insert((b, a, c));
        } else {
            let bd = b.union(dd);
            queries.insert((a, bd, c));
            queries.insert((a, b, c));
            queries.insert((a, b, c.union(dd)));
            queries.insert((a, dd, b.union(c)));
        }
    }
    let queries: Vec<_> = queries.into_iter().collect();
    let verdicts = par::map_slice(&queries, |&(a, b, c)| m.ci_oracle(a, b, c).map(|r| r.verdict));
    let mut ci = HashMap::with_capacity(queries.len());
    for (q, v) in queries.into_iter().zip(verdicts) {
        ci.insert(q, v?);
    }
    let mut audit = MarkovAudit::default();
    for &(a, b, c, dd) in &tuples {
        let sets = vec![a, b, c, dd];
        if dd.is_empty() {
            let holds = !ci[&(a, b, c)] || ci[&(b, a, c)];
            record(&mut audit, Property::L1, sets, holds);
            continue;
        }
        let bd = b.union(dd);
        let premise = ci[&(a, bd, c)];
        record(&mut audit, Property::L2, sets.clone(), !premise || ci[&(a, b, c)]);
        record(&mut audit, Property::L3, sets.clone(), !premise || ci[&(a, b, c.union(dd))]);
        let l4 = !(ci[&(a, b, c)] && ci[&(a, dd, b.union(c))]) || premise;
        record(&mut audit, Property::L4, sets, l4);
    }
    Ok(audit)
}

fn record(audit: &mut MarkovAudit, p: Property, sets: Vec<VertexSet>, holds: bool) {
    if holds {
        audit.tally();
    } else {
        audit.push(p, sets, false, None);
    }
}
