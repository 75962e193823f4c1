//! Densities with respect to μ = ⊗(dx + δ₀) on product grids over [0, ∞)^d.
//!
//! A grid point is a vector of per-axis indices: index 0 is the zero atom
//! (μ-weight 1), index k ≥ 1 is the k-th positive node with its trapezoid
//! weight. Densities are stored per face pattern, so sub-face mass is
//! explicit and absent faces carry no mass.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_disjoint, check_within};
use crate::quad::{composite, gl10};
use crate::report::{CiQuery, CiReport, MarkovAudit, Property, Witness};
use crate::{par, Error, Result, UndirectedGraph, VertexSet};

pub const GRID_MAX_DIM: usize = 12;
pub const GRID_POINT_LIMIT: usize = 1 << 26;
/// A factorization side at most this large counts as zero.
pub const ZERO_ABS_TOL: f64 = 1e-12;
/// Allowed disagreement between declared margins of adjacent blocks.
pub const MARGIN_AGREEMENT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AxisGridRepr", into = "AxisGridRepr")]
pub struct AxisGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AxisGridRepr {
    nodes: Vec<f64>,
}

impl TryFrom<AxisGridRepr> for AxisGrid {
    type Error = Error;
    fn try_from(r: AxisGridRepr) -> Result<Self> {
        AxisGrid::new(r.nodes)
    }
}

impl From<AxisGrid> for AxisGridRepr {
    fn from(g: AxisGrid) -> Self {
        AxisGridRepr { nodes: g.nodes }
    }
}

impl AxisGrid {
    /// Trapezoid weights on the given positive, strictly increasing nodes.
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("an axis needs at least two positive nodes".into()));
        }
        if !nodes.iter().all(|x| x.is_finite() && *x > 0.0) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be positive, finite and strictly increasing".into()));
        }
        let m = nodes.len();
        let mut weights = vec![0.0; m];
        for k in 0..m - 1 {
            let h = nodes[k + 1] - nodes[k];
            weights[k] += 0.5 * h;
            weights[k + 1] += 0.5 * h;
        }
        Ok(AxisGrid { nodes, weights })
    }

    /// `n` nodes in geometric progression from `lo` to `hi`.
    pub fn geometric(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(Error::InvalidGrid(format!("geometric grid needs 0 < lo < hi and n ≥ 2, got {lo}, {hi}, {n}")));
        }
        let r = (hi / lo).ln() / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|k| lo * (r * k as f64).exp()).collect();
        nodes[n - 1] = hi;
        AxisGrid::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of positive nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Coordinate value at grid index `k` (0 is the zero atom).
    pub fn value(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.nodes[k - 1]
        }
    }

    /// μ-weight at grid index `k`.
    pub fn mu_weight(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.weights[k - 1]
        }
    }

    /// Weights of the piecewise-linear interpolant restricted to [eps, ∞).
    pub fn weights_above(&self, eps: f64) -> Vec<f64> {
        let g = &self.nodes;
        let mut w = vec![0.0; g.len()];
        for k in 0..g.len() - 1 {
            let (a, b) = (g[k], g[k + 1]);
            let h = b - a;
            if eps <= a {
                w[k] += 0.5 * h;
                w[k + 1] += 0.5 * h;
            } else if eps < b {
                let t = (eps - a) / h;
                w[k] += h * ((1.0 - t) - 0.5 * (1.0 - t * t));
                w[k + 1] += h * 0.5 * (1.0 - t * t);
            }
        }
        w
    }
}

/// Face-indexed tables over the positive nodes of each face's axes.
#[derive(Clone, Debug, PartialEq)]
struct Faces {
    dims: Vec<usize>,
    tables: Vec<Option<Vec<f64>>>,
}

impl Faces {
    fn empty(dims: Vec<usize>) -> Self {
        let n = 1usize << dims.len();
        Faces { dims, tables: vec![None; n] }
    }

    fn table_len(&self, f: VertexSet) -> usize {
        f.iter().map(|v| self.dims[v]).product()
    }

    /// Offset of the point `idx` (all indices ≥ 1 on `f`) in the table of `f`.
    fn offset(&self, f: VertexSet, idx: &[usize]) -> usize {
        f.iter().fold(0, |acc, v| acc * self.dims[v] + idx[v] - 1)
    }

    fn get(&self, f: VertexSet, idx: &[usize]) -> f64 {
        match &self.tables[f.0 as usize] {
            Some(t) => t[self.offset(f, idx)],
            None => 0.0,
        }
    }

    fn present(&self) -> impl Iterator<Item = (VertexSet, &Vec<f64>)> {
        self.tables.iter().enumerate().filter_map(|(m, t)| t.as_ref().map(|t| (VertexSet(m as u32), t)))
    }

    /// Sum the faces onto `keep`, weighting dropped coordinates by their
    /// node weights; mass that lands on the origin of `keep` is discarded.
    fn marginal(&self, axes: &[AxisGrid], keep: VertexSet) -> Faces {
        let mut out = Faces::empty(self.dims.clone());
        let mut idx = vec![0usize; self.dims.len()];
        for (f, table) in self.present() {
            let g = f.intersection(keep);
            if g.is_empty() {
                continue;
            }
            let drop = f.difference(keep);
            let len = out.table_len(g);
            let mut acc = out.tables[g.0 as usize].take().unwrap_or_else(|| vec![0.0; len]);
            let verts = f.to_vec();
            for (lin, &val) in table.iter().enumerate() {
                if val == 0.0 {
                    continue;
                }
                let mut rem = lin;
                for &v in verts.iter().rev() {
                    idx[v] = rem % self.dims[v] + 1;
                    rem /= self.dims[v];
                }
                let w: f64 = drop.iter().map(|v| axes[v].weights[idx[v] - 1]).product();
                acc[out.offset(g, &idx)] += val * w;
            }
            out.tables[g.0 as usize] = Some(acc);
        }
        out
    }
}

fn support(idx: &[usize], within: VertexSet) -> VertexSet {
    within.iter().filter(|&v| idx[v] > 0).collect()
}

/// Iterates grid points over the axes in `dset` (other coordinates at the zero atom).
struct PointSpace {
    verts: Vec<usize>,
    radix: Vec<usize>,
    d: usize,
    count: usize,
}

impl PointSpace {
    fn new(axes: &[AxisGrid], dset: VertexSet) -> Result<Self> {
        let verts = dset.to_vec();
        let radix: Vec<usize> = verts.iter().map(|&v| axes[v].len() + 1).collect();
        let mut count: usize = 1;
        for &r in &radix {
            count = count.checked_mul(r).filter(|&c| c <= GRID_POINT_LIMIT).ok_or(Error::TooLarge {
                what: "grid points",
                size: usize::MAX,
                limit: GRID_POINT_LIMIT,
            })?;
        }
        Ok(PointSpace { verts, radix, d: axes.len(), count })
    }

    fn decode(&self, mut lin: usize, idx: &mut [usize]) {
        for (k, &v) in self.verts.iter().enumerate().rev() {
            idx[v] = lin % self.radix[k];
            lin /= self.radix[k];
        }
    }

    /// Worst defect over all points, ties to the smallest linear index.
    fn worst<F>(&self, f: F) -> Option<(usize, f64, f64, f64)>
    where
        F: Fn(&[usize]) -> Option<(f64, f64, f64)> + Sync + Send,
    {
        const BLOCK: usize = 4096;
        let blocks = self.count.div_ceil(BLOCK);
        par::map_range(blocks, |b| {
            let mut idx = vec![0usize; self.d];
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for lin in b * BLOCK..((b + 1) * BLOCK).min(self.count) {
                self.decode(lin, &mut idx);
                if let Some((defect, l, r)) = f(&idx) {
                    if best.is_none_or(|x| defect > x.1) {
                        best = Some((lin, defect, l, r));
                    }
                }
            }
            best
        })
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(usize, f64, f64, f64)>, x| match acc {
            Some(a) if a.1 >= x.1 => Some(a),
            _ => Some(x),
        })
    }

    fn count_where<F>(&self, f: F) -> usize
    where
        F: Fn(&[usize]) -> bool + Sync + Send,
    {
        par::count_range(self.count as u64, |lin| {
            let mut idx = vec![0usize; self.d];
            self.decode(lin as usize, &mut idx);
            f(&idx)
        }) as usize
    }
}

/// Relative defect of `l` against `r`. When one side is zero the other
/// must not exceed [`ZERO_ABS_TOL`].
fn defect(l: f64, r: f64) -> f64 {
    let (lo, hi) = (l.abs().min(r.abs()), l.abs().max(r.abs()));
    if lo == 0.0 {
        if hi <= ZERO_ABS_TOL {
            0.0
        } else {
            1.0
        }
    } else {
        (l - r).abs() / hi
    }
}

/// Density of a measure on the punctured grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    axes: Vec<AxisGrid>,
    faces: Faces,
}

impl GridMeasure {
    /// `faces` maps a support pattern to its density table, row-major over the
    /// pattern's axes in increasing order.
    pub fn new(axes: Vec<AxisGrid>, faces: BTreeMap<VertexSet, Vec<f64>>) -> Result<Self> {
        let d = axes.len();
        if d == 0 || d > GRID_MAX_DIM {
            return Err(Error::TooLarge { what: "grid dimension", size: d, limit: GRID_MAX_DIM });
        }
        let mut out = Faces::empty(axes.iter().map(AxisGrid::len).collect());
        for (f, table) in faces {
            if f.is_empty() {
                return Err(Error::InvalidGrid("the origin carries no density".into()));
            }
            check_within(&[f], d)?;
            let len = out.table_len(f);
            if table.len() != len {
                return Err(Error::DimensionMismatch { expected: len, found: table.len() });
            }
            if !table.iter().all(|x| x.is_finite() && *x >= 0.0) {
                return Err(Error::InvalidGrid(format!("density on face {f} must be finite and nonnegative")));
            }
            out.tables[f.0 as usize] = Some(table);
        }
        Ok(GridMeasure { axes, faces: out })
    }

    /// Tabulates `f` at every grid point except the origin. Faces on which
    /// `f` vanishes identically are left uncharged.
    pub fn from_fn<F>(axes: Vec<AxisGrid>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let d = axes.len();
        if d == 0 || d > GRID_MAX_DIM {
            return Err(Error::TooLarge { what: "grid dimension", size: d, limit: GRID_MAX_DIM });
        }
        PointSpace::new(&axes, VertexSet::full(d))?;
        let dims: Vec<usize> = axes.iter().map(AxisGrid::len).collect();
        let shape = Faces::empty(dims);
        let masks: Vec<u32> = (1u32..1 << d).collect();
        let tables = par::map_slice(&masks, |&m| {
            let face = VertexSet(m);
            let verts = face.to_vec();
            let len = shape.table_len(face);
            let mut y = vec![0.0; d];
            let mut vals = Vec::with_capacity(len);
            for lin in 0..len {
                let mut rem = lin;
                for &v in verts.iter().rev() {
                    y[v] = axes[v].nodes[rem % shape.dims[v]];
                    rem /= shape.dims[v];
                }
                vals.push(f(&y));
            }
            (face, vals)
        });
        let faces = tables.into_iter().filter(|(_, t)| t.iter().any(|&x| x != 0.0)).collect();
        GridMeasure::new(axes, faces)
    }

    pub fn d(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn face(&self, f: VertexSet) -> Option<&[f64]> {
        self.faces.tables.get(f.0 as usize).and_then(|t| t.as_deref())
    }

    pub fn faces(&self) -> impl Iterator<Item = (VertexSet, &[f64])> {
        self.faces.present().map(|(f, t)| (f, t.as_slice()))
    }

    /// Faces with positive mass.
    pub fn charged_faces(&self) -> Vec<VertexSet> {
        self.faces().filter(|(_, t)| t.iter().any(|&x| x > 0.0)).map(|(f, _)| f).collect()
    }

    /// Density at grid index `idx`; 0 at the origin.
    pub fn density_at(&self, idx: &[usize]) -> f64 {
        let f = support(idx, VertexSet::full(self.d()));
        if f.is_empty() {
            0.0
        } else {
            self.faces.get(f, idx)
        }
    }

    /// Coordinates of grid index `idx`.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.axes).map(|(&k, a)| a.value(k)).collect()
    }

    /// λ̄ itself: the density with value 1 grafted at the origin.
    pub fn modified(&self) -> ModifiedDensity {
        ModifiedDensity { dset: VertexSet::full(self.d()), axes: self.axes.clone(), faces: self.faces.clone() }
    }

    /// λ̄_D: quadrature over the complement axes, value 1 at 0_D.
    pub fn marginal_density(&self, dset: VertexSet) -> Result<ModifiedDensity> {
        self.modified().marginal(dset)
    }

    /// Λ(E ∖ [0, ε]^d) for the piecewise-linear interpolant of the density.
    pub fn total_mass_tail(&self, eps: f64) -> Result<f64> {
        let lo = self.axes.iter().map(|a| a.nodes[0]).fold(f64::INFINITY, f64::min);
        if !(eps >= lo) {
            return Err(Error::EpsBelowGrid);
        }
        let above: Vec<Vec<f64>> = self.axes.iter().map(|a| a.weights_above(eps)).collect();
        let mut total = 0.0;
        let mut idx = vec![0usize; self.d()];
        for (f, table) in self.faces.present() {
            let verts = f.to_vec();
            for (lin, &val) in table.iter().enumerate() {
                let mut rem = lin;
                for &v in verts.iter().rev() {
                    idx[v] = rem % self.faces.dims[v] + 1;
                    rem /= self.faces.dims[v];
                }
                let full: f64 = verts.iter().map(|&v| self.axes[v].weights[idx[v] - 1]).product();
                let below: f64 =
                    verts.iter().map(|&v| self.axes[v].weights[idx[v] - 1] - above[v][idx[v] - 1]).product();
                total += val * (full - below);
            }
        }
        Ok(total)
    }
}

/// Modified marginal density λ̄_D on the D-subgrid, in full coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ModifiedDensity {
    dset: VertexSet,
    axes: Vec<AxisGrid>,
    faces: Faces,
}

impl ModifiedDensity {
    pub fn dset(&self) -> VertexSet {
        self.dset
    }

    /// λ̄_D at the projection of the full-coordinate index `idx`.
    pub fn value(&self, idx: &[usize]) -> f64 {
        let f = support(idx, self.dset);
        if f.is_empty() {
            1.0
        } else {
            self.faces.get(f, idx)
        }
    }

    /// Value at a point given by indices over `dset` only, in increasing vertex order.
    pub fn value_on(&self, local: &[usize]) -> f64 {
        let mut idx = vec![0usize; self.axes.len()];
        for (v, &k) in self.dset.iter().zip(local) {
            idx[v] = k;
        }
        self.value(&idx)
    }

    pub fn marginal(&self, dset: VertexSet) -> Result<ModifiedDensity> {
        if dset.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        check_within(&[dset], self.axes.len())?;
        if !dset.is_subset(self.dset) {
            return Err(Error::InvalidInput(format!("{dset} is not contained in {}", self.dset)));
        }
        if dset == self.dset {
            return Ok(self.clone());
        }
        Ok(ModifiedDensity { dset, axes: self.axes.clone(), faces: self.faces.marginal(&self.axes, dset) })
    }
}

fn grid_witness(m: &[AxisGrid], idx: &[usize], l: f64, r: f64, defect: f64) -> Witness {
    let point = idx.iter().zip(m).map(|(&k, a)| a.value(k)).collect();
    Witness::GridPoint { point, lhs: l, rhs: r, defect }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::ToleranceNotPositive)
    }
}

/// Checks λ̄ λ̄_C = λ̄_{A∪C} λ̄_{B∪C} off {y_A ≠ 0, y_B ≠ 0, y_C = 0}.
///
/// Works on the marginal over A ∪ B ∪ C. The witness carries the worst grid
/// point even when the check passes.
pub fn ci_check(m: &GridMeasure, a: VertexSet, b: VertexSet, c: VertexSet, tol: f64) -> Result<CiReport> {
    check_tol(tol)?;
    check_within(&[a, b, c], m.d())?;
    check_disjoint(&[a, b, c])?;
    let query = CiQuery::new(a, b, c);
    if a.is_empty() || b.is_empty() {
        return Ok(CiReport::holds(query));
    }
    let abc = a.union(b).union(c);
    let full = m.marginal_density(abc)?;
    let ac = full.marginal(a.union(c))?;
    let bc = full.marginal(b.union(c))?;
    let lc = if c.is_empty() { None } else { Some(full.marginal(c)?) };
    let space = PointSpace::new(m.axes(), abc)?;
    let worst = space.worst(|idx| {
        let s = support(idx, abc);
        if s.intersects(a) && s.intersects(b) && !s.intersects(c) {
            return None;
        }
        let l = full.value(idx) * lc.as_ref().map_or(1.0, |x| x.value(idx));
        let r = ac.value(idx) * bc.value(idx);
        Some((defect(l, r), l, r))
    });
    let (lin, dmax, l, r) = worst.unwrap_or((0, 0.0, 1.0, 1.0));
    let mut idx = vec![0usize; m.d()];
    space.decode(lin, &mut idx);
    Ok(CiReport { query, verdict: dmax <= tol, witness: Some(grid_witness(m.axes(), &idx, l, r, dmax)) })
}

/// Support patterns lying in Z(G): some separator S is zero and separates
/// two nonzero coordinates.
fn z_patterns(g: &UndirectedGraph, separators: &[VertexSet]) -> Result<Vec<bool>> {
    let d = g.n();
    let mut seps = separators.to_vec();
    seps.sort();
    seps.dedup();
    let mut out = vec![false; 1 << d];
    for (mask, slot) in out.iter_mut().enumerate() {
        let n = VertexSet(mask as u32);
        'outer: for &s in &seps {
            if s.intersects(n) {
                continue;
            }
            for x in n.iter() {
                for y in n.iter().filter(|&y| y > x) {
                    if g.separates(VertexSet::singleton(x), VertexSet::singleton(y), s)? {
                        *slot = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn graph_matches(m: &GridMeasure, g: &UndirectedGraph) -> Result<()> {
    if g.n() != m.d() || g.vertices() != VertexSet::full(m.d()) {
        return Err(Error::DimensionMismatch { expected: m.d(), found: g.vertex_count() });
    }
    Ok(())
}

/// Clique/separator factorization of λ̄ off Z(G), and vanishing density on Z(G).
pub fn hc_check(m: &GridMeasure, g: &UndirectedGraph, tol: f64) -> Result<MarkovAudit> {
    check_tol(tol)?;
    graph_matches(m, g)?;
    let order = g.clique_ordering()?;
    let lam = m.modified();
    let cliques: Vec<ModifiedDensity> = order.cliques.iter().map(|&c| lam.marginal(c)).collect::<Result<_>>()?;
    let seps: Vec<ModifiedDensity> =
        order.separators.iter().filter(|s| !s.is_empty()).map(|&s| lam.marginal(s)).collect::<Result<_>>()?;
    let in_z = z_patterns(g, &order.separators)?;
    let full = VertexSet::full(m.d());
    let space = PointSpace::new(m.axes(), full)?;

    let fact = space.worst(|idx| {
        let s = support(idx, full);
        if s.is_empty() || in_z[s.0 as usize] {
            return None;
        }
        let l = lam.value(idx) * seps.iter().map(|x| x.value(idx)).product::<f64>();
        let r = cliques.iter().map(|x| x.value(idx)).product::<f64>();
        Some((defect(l, r), l, r))
    });
    let on_z = space.worst(|idx| {
        let s = support(idx, full);
        if !in_z[s.0 as usize] {
            return None;
        }
        let v = m.density_at(idx);
        Some((if v <= ZERO_ABS_TOL { 0.0 } else { v }, v, 0.0))
    });

    let mut audit = MarkovAudit::default();
    let mut idx = vec![0usize; m.d()];
    let (lin, dmax, l, r) = fact.unwrap_or((0, 0.0, 1.0, 1.0));
    space.decode(lin, &mut idx);
    audit.push(Property::CliqueFactorization, order.cliques.clone(), dmax <= tol, Some(grid_witness(m.axes(), &idx, l, r, dmax)));
    let (lin, v, l, r) = on_z.unwrap_or((0, 0.0, 0.0, 0.0));
    space.decode(lin, &mut idx);
    let z_witness = (v > 0.0).then(|| grid_witness(m.axes(), &idx, l, r, v));
    audit.push(Property::ZeroOnZ, order.separators.clone(), v == 0.0, z_witness);
    audit.checked = space.count - 1;
    Ok(audit)
}

/// Ordinary factorization λ ∏ λ_S = ∏ λ_C at grid points with every coordinate positive.
pub fn plain_hc_check(m: &GridMeasure, g: &UndirectedGraph, tol: f64) -> Result<MarkovAudit> {
    check_tol(tol)?;
    graph_matches(m, g)?;
    let order = g.clique_ordering()?;
    let lam = m.modified();
    let cliques: Vec<ModifiedDensity> = order.cliques.iter().map(|&c| lam.marginal(c)).collect::<Result<_>>()?;
    let seps: Vec<ModifiedDensity> =
        order.separators.iter().filter(|s| !s.is_empty()).map(|&s| lam.marginal(s)).collect::<Result<_>>()?;
    let full = VertexSet::full(m.d());
    let space = PointSpace::new(m.axes(), full)?;
    let worst = space.worst(|idx| {
        if idx.contains(&0) {
            return None;
        }
        let l = m.density_at(idx) * seps.iter().map(|x| x.value(idx)).product::<f64>();
        let r = cliques.iter().map(|x| x.value(idx)).product::<f64>();
        Some((defect(l, r), l, r))
    });
    let mut audit = MarkovAudit::default();
    let (lin, dmax, l, r) = worst.unwrap_or((0, 0.0, 1.0, 1.0));
    let mut idx = vec![0usize; m.d()];
    space.decode(lin, &mut idx);
    audit.push(Property::PlainFactorization, order.cliques.clone(), dmax <= tol, Some(grid_witness(m.axes(), &idx, l, r, dmax)));
    audit.checked = m.axes().iter().map(AxisGrid::len).product();
    Ok(audit)
}

/// Number of grid points (origin excluded) whose support lies in `pred`.
pub fn count_points(m: &GridMeasure, pred: impl Fn(VertexSet) -> bool + Sync + Send) -> Result<usize> {
    let full = VertexSet::full(m.d());
    let space = PointSpace::new(m.axes(), full)?;
    Ok(space.count_where(|idx| {
        let s = support(idx, full);
        !s.is_empty() && pred(s)
    }))
}

/// Modified bivariate density λ̄_ij on the (i, j) subgrid with its declared
/// univariate margins on the positive nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateBlock {
    pub edge: (usize, usize),
    /// `(n_i + 1) × (n_j + 1)` values, row-major in `i`, index 0 the zero atom.
    /// The entry at (0, 0) is ignored.
    pub table: Vec<f64>,
    pub margin_i: Vec<f64>,
    pub margin_j: Vec<f64>,
}

impl BivariateBlock {
    /// p·κ on the positive face, q·m on each axis.
    pub fn mixture<K, M>(edge: (usize, usize), p: f64, kappa: K, m: M, ai: &AxisGrid, aj: &AxisGrid) -> Result<Self>
    where
        K: Fn(f64, f64) -> f64,
        M: Fn(f64) -> f64,
    {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("mixture probability {p} not in [0, 1]")));
        }
        let q = 1.0 - p;
        let (ni, nj) = (ai.len(), aj.len());
        let mut table = vec![0.0; (ni + 1) * (nj + 1)];
        for ki in 0..=ni {
            for kj in 0..=nj {
                let (x, y) = (ai.value(ki), aj.value(kj));
                table[ki * (nj + 1) + kj] = match (ki, kj) {
                    (0, 0) => 1.0,
                    (_, 0) => q * m(x),
                    (0, _) => q * m(y),
                    _ => p * kappa(x, y),
                };
            }
        }
        let margin_i = ai.nodes.iter().map(|&x| m(x)).collect();
        let margin_j = aj.nodes.iter().map(|&y| m(y)).collect();
        Ok(BivariateBlock { edge, table, margin_i, margin_j })
    }

    fn oriented(&self, i: usize) -> bool {
        self.edge.0 == i
    }

    fn at(&self, ki: usize, kj: usize, nj: usize) -> f64 {
        if ki == 0 && kj == 0 {
            1.0
        } else {
            self.table[ki * (nj + 1) + kj]
        }
    }
}

fn margins_agree(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= MARGIN_AGREEMENT_TOL * x.abs().max(y.abs()))
}

/// Forest density ∏ λ̄_ij / ∏ λ̄_s^{deg(s) − 1} off Z(G), zero on Z(G).
///
/// Separator densities are the declared block margins. Isolated vertices
/// take their density from `singletons`.
pub fn synthesize_forest(
    g: &UndirectedGraph,
    axes: Vec<AxisGrid>,
    blocks: &[BivariateBlock],
    singletons: &BTreeMap<usize, Vec<f64>>,
) -> Result<GridMeasure> {
    if !g.is_forest() {
        return Err(Error::NotForest);
    }
    let d = axes.len();
    if g.n() != d {
        return Err(Error::DimensionMismatch { expected: d, found: g.n() });
    }
    let mut per_edge: BTreeMap<(usize, usize), &BivariateBlock> = BTreeMap::new();
    for b in blocks {
        let (i, j) = b.edge;
        if i >= d || j >= d || !g.has_edge(i, j) {
            return Err(Error::InvalidInput(format!("block on {}–{} is not an edge of the forest", i + 1, j + 1)));
        }
        let expect = (axes[i].len() + 1) * (axes[j].len() + 1);
        if b.table.len() != expect {
            return Err(Error::DimensionMismatch { expected: expect, found: b.table.len() });
        }
        if per_edge.insert((i.min(j), i.max(j)), b).is_some() {
            return Err(Error::InvalidInput(format!("duplicate block on {}–{}", i + 1, j + 1)));
        }
    }
    let mut margins: Vec<Option<&[f64]>> = vec![None; d];
    for v in 0..d {
        let mut declared: Vec<&[f64]> = Vec::new();
        for b in per_edge.values() {
            if b.edge.0 == v {
                declared.push(&b.margin_i);
            } else if b.edge.1 == v {
                declared.push(&b.margin_j);
            }
        }
        if let Some(s) = singletons.get(&v) {
            declared.push(s);
        }
        let first = *declared.first().ok_or_else(|| Error::InvalidInput(format!("vertex {} has no density", v + 1)))?;
        if first.len() != axes[v].len() || declared.iter().any(|x| !margins_agree(first, x)) {
            return Err(Error::InconsistentMargins(v));
        }
        margins[v] = Some(first);
    }
    for &(i, j) in &g.edges() {
        if !per_edge.contains_key(&(i, j)) {
            return Err(Error::InvalidInput(format!("edge {}–{} has no block", i + 1, j + 1)));
        }
    }
    let margins: Vec<&[f64]> = margins.into_iter().map(|m| m.expect("set")).collect();
    let edges = g.edges();
    let exps: Vec<i32> = (0..d).map(|v| g.degree(v) as i32 - 1).collect();
    let node_index = |v: usize, y: f64| -> usize {
        if y == 0.0 {
            0
        } else {
            axes[v].nodes.partition_point(|&x| x < y) + 1
        }
    };
    let density = |y: &[f64]| -> f64 {
        let s: VertexSet = (0..d).filter(|&v| y[v] != 0.0).collect();
        if !g.is_connected_set(s) {
            return 0.0;
        }
        let idx: Vec<usize> = (0..d).map(|v| node_index(v, y[v])).collect();
        let mut val = 1.0;
        for &(i, j) in &edges {
            let b = per_edge[&(i, j)];
            let (bi, bj) = if b.oriented(i) { (i, j) } else { (j, i) };
            val *= b.at(idx[bi], idx[bj], axes[bj].len());
        }
        for v in 0..d {
            if idx[v] > 0 && exps[v] != 0 {
                val /= margins[v][idx[v] - 1].powi(exps[v]);
            }
        }
        val
    };
    GridMeasure::from_fn(axes.clone(), density)
}

/// ∫₀^∞ f(t) dt in log coordinates around `centre`.
fn log_integral<F: Fn(f64) -> f64>(f: F, centre: f64) -> f64 {
    let c = centre.ln();
    composite(|s| {
        let t = s.exp();
        f(t) * t
    }, c - 40.0, c + 40.0, 0.5, gl10())
}

/// Worst relative error of the κ margins against `m` over the nodes.
fn margin_error<K, M>(kappa: &K, m: &M, ai: &AxisGrid, aj: &AxisGrid) -> f64
where
    K: Fn(f64, f64) -> f64,
    M: Fn(f64) -> f64,
{
    let first = ai.nodes.iter().map(|&x| (log_integral(|t| kappa(x, t), x) / m(x) - 1.0).abs());
    let second = aj.nodes.iter().map(|&y| (log_integral(|t| kappa(t, y), y) / m(y) - 1.0).abs());
    first.chain(second).fold(0.0, f64::max)
}

/// The three-variable construction from two bivariate blocks sharing
/// vertex 2: one closed-form formula per face.
#[allow(clippy::too_many_arguments)]
pub fn generic_trivariate<K1, K2, M>(
    p12: f64,
    p23: f64,
    k12: K1,
    k23: K2,
    m: M,
    axes: [AxisGrid; 3],
    margin_tol: f64,
) -> Result<GridMeasure>
where
    K1: Fn(f64, f64) -> f64 + Sync + Send,
    K2: Fn(f64, f64) -> f64 + Sync + Send,
    M: Fn(f64) -> f64 + Sync + Send,
{
    for p in [p12, p23] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("mixture probability {p} not in [0, 1]")));
        }
    }
    check_tol(margin_tol)?;
    let err = margin_error(&k12, &m, &axes[0], &axes[1]).max(margin_error(&k23, &m, &axes[1], &axes[2]));
    if !(err <= margin_tol) {
        return Err(Error::MarginMismatch(err));
    }
    let (q12, q23) = (1.0 - p12, 1.0 - p23);
    let f = move |y: &[f64]| -> f64 {
        let (y1, y2, y3) = (y[0], y[1], y[2]);
        match (y1 != 0.0, y2 != 0.0, y3 != 0.0) {
            (false, false, true) => q23 * m(y3),
            (true, false, false) => q12 * m(y1),
            (false, true, false) => q12 * q23 * m(y2),
            (true, true, false) => p12 * q23 * k12(y1, y2),
            (false, true, true) => q12 * p23 * k23(y2, y3),
            (true, false, true) => 0.0,
            (true, true, true) => p12 * p23 * k12(y1, y2) * k23(y2, y3) / m(y2),
            (false, false, false) => 0.0,
        }
    };
    GridMeasure::from_fn(axes.to_vec(), f)
}

/// Five-chain density that factorizes on the positive orthant but is not
/// globally Markov for 1–2–3–4–5.
///
/// `eta` is a trivariate density on (0, ∞)³ that does not satisfy 1 ⊥ 3 | 2;
/// it charges the face {1,2,3}. The full face carries κ12 κ23 κ34 κ45 /
/// (m2 m3 m4), where κ12, κ23 are the grid marginals of `eta`, and κ34,
/// κ45 are built from `kappa` normalized on the grid so that all marginals
/// are consistent at the nodes.
pub fn caveat_five_chain<E, K>(eta: E, kappa: K, axes: [AxisGrid; 5]) -> Result<GridMeasure>
where
    E: Fn(f64, f64, f64) -> f64,
    K: Fn(f64, f64) -> f64,
{
    let n: Vec<usize> = axes.iter().map(AxisGrid::len).collect();
    let node = |v: usize, k: usize| axes[v].nodes[k];
    let w = |v: usize, k: usize| axes[v].weights[k];
    let (n1, n2, n3, n4, n5) = (n[0], n[1], n[2], n[3], n[4]);
    let mut eta_t = vec![0.0; n1 * n2 * n3];
    for a in 0..n1 {
        for b in 0..n2 {
            for c in 0..n3 {
                eta_t[(a * n2 + b) * n3 + c] = eta(node(0, a), node(1, b), node(2, c));
            }
        }
    }
    let mut k12 = vec![0.0; n1 * n2];
    let mut k23 = vec![0.0; n2 * n3];
    for a in 0..n1 {
        for b in 0..n2 {
            for c in 0..n3 {
                let e = eta_t[(a * n2 + b) * n3 + c];
                k12[a * n2 + b] += e * w(2, c);
                k23[b * n3 + c] += e * w(0, a);
            }
        }
    }
    let m2: Vec<f64> = (0..n2).map(|b| (0..n1).map(|a| k12[a * n2 + b] * w(0, a)).sum()).collect();
    let m3: Vec<f64> = (0..n3).map(|c| (0..n2).map(|b| k23[b * n3 + c] * w(1, b)).sum()).collect();
    // conditional tables normalized on the grid
    let conditional = |from: usize, to: usize| -> Vec<f64> {
        let (nf, nt) = (n[from], n[to]);
        let mut t = vec![0.0; nf * nt];
        for i in 0..nf {
            let row: Vec<f64> = (0..nt).map(|j| kappa(node(from, i), node(to, j))).collect();
            let z: f64 = row.iter().enumerate().map(|(j, x)| x * w(to, j)).sum();
            for j in 0..nt {
                t[i * nt + j] = row[j] / z;
            }
        }
        t
    };
    let t34 = conditional(2, 3);
    let t45 = conditional(3, 4);
    let m4: Vec<f64> = (0..n4).map(|d4| (0..n3).map(|c| m3[c] * t34[c * n4 + d4] * w(2, c)).sum()).collect();
    if m2.iter().chain(&m3).chain(&m4).any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidMeasure("grid marginals of the building blocks must be positive".into()));
    }
    let mut full = vec![0.0; n1 * n2 * n3 * n4 * n5];
    let mut lin = 0;
    for a in 0..n1 {
        for b in 0..n2 {
            for c in 0..n3 {
                let base = k12[a * n2 + b] * k23[b * n3 + c] / m2[b];
                for d4 in 0..n4 {
                    let x = base * t34[c * n4 + d4];
                    for e in 0..n5 {
                        full[lin] = x * t45[d4 * n5 + e];
                        lin += 1;
                    }
                }
            }
        }
    }
    let mut faces = BTreeMap::new();
    faces.insert(VertexSet::from_slice(&[0, 1, 2]), eta_t);
    faces.insert(VertexSet::full(5), full);
    GridMeasure::new(axes.to_vec(), faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes(d: usize) -> Vec<AxisGrid> {
        (0..d).map(|_| AxisGrid::geometric(0.5, 8.0, 5).unwrap()).collect()
    }

    #[test]
    fn trapezoid_weights() {
        let a = AxisGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(a.weights(), &[0.5, 1.5, 1.0]);
        let sum: f64 = a.weights_above(1.5).iter().sum();
        assert!((sum - 2.5).abs() < 1e-15);
        assert_eq!(a.weights_above(1.0), a.weights());
        assert!(AxisGrid::new(vec![1.0, 1.0]).is_err());
        assert!(AxisGrid::new(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn origin_of_marginal_is_one() {
        let m = GridMeasure::from_fn(axes(2), |y| y[0] + y[1]).unwrap();
        let md = m.marginal_density(VertexSet::singleton(0)).unwrap();
        assert_eq!(md.value(&[0, 3]), 1.0);
        let direct: f64 = (0..=5).map(|k| m.density_at(&[2, k]) * m.axes()[1].mu_weight(k)).sum();
        assert!((md.value(&[2, 0]) - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn axes_only_measure_is_independent() {
        let m = GridMeasure::from_fn(axes(2), |y| if y[0] == 0.0 || y[1] == 0.0 { (y[0] + y[1]).powi(-2) } else { 0.0 })
            .unwrap();
        let r = ci_check(&m, VertexSet::singleton(0), VertexSet::singleton(1), VertexSet::EMPTY, 1e-8).unwrap();
        assert!(r.verdict);
        let p = GridMeasure::from_fn(axes(2), |y| if y[0] > 0.0 && y[1] > 0.0 { (y[0] * y[1]).powi(-2) } else { 0.0 }).unwrap();
        let r = ci_check(&p, VertexSet::singleton(0), VertexSet::singleton(1), VertexSet::EMPTY, 1e-8).unwrap();
        assert!(!r.verdict);
    }
}
