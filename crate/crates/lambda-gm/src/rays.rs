//! Homogeneous measures supported on finitely many rays, max-linear models
//! on DAGs, and their exact CI oracle.

use serde::{Deserialize, Serialize};

use crate::error::{check_disjoint, check_within, Error, Result};
use crate::report::{CiQuery, CiReport, MarkovAudit, Property, Witness};
use crate::{par, Dag, VertexSet};

/// Relative tolerance for proportionality classes and rank-one tables.
pub const RAY_TOL: f64 = 1e-9;

/// Ray `{t·dir : t > 0}` carrying the radial measure `η((t,∞)) = c·t^{-α}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub dir: Vec<f64>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayMeasure {
    d: usize,
    alpha: f64,
    rays: Vec<Ray>,
}

impl RayMeasure {
    /// Validates; rays with identical directions are merged.
    pub fn new(d: usize, alpha: f64, rays: Vec<Ray>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidMeasure("alpha must be positive".into()));
        }
        if d == 0 || d > crate::MAX_VERTICES {
            return Err(Error::InvalidMeasure(format!("dimension {d} not supported")));
        }
        let mut merged: Vec<Ray> = Vec::with_capacity(rays.len());
        for mut r in rays {
            if r.dir.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: r.dir.len() });
            }
            if r.dir.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || r.dir.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidMeasure("ray directions must be nonnegative and nonzero".into()));
            }
            if !(r.c > 0.0 && r.c.is_finite()) {
                return Err(Error::InvalidMeasure("ray scales must be positive".into()));
            }
            r.dir.iter_mut().for_each(|x| *x += 0.0);
            match merged.iter_mut().find(|m| m.dir == r.dir) {
                Some(m) => m.c += r.c,
                None => merged.push(r),
            }
        }
        Ok(RayMeasure { d, alpha, rays: merged })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    /// Λ(y_i > u).
    pub fn margin(&self, i: usize, u: f64) -> f64 {
        self.rays.iter().filter(|r| r.dir[i] > 0.0).map(|r| r.c * (u / r.dir[i]).powf(-self.alpha)).sum()
    }

    /// Λ(y_i > x_i for all i ∈ set), closed form over rays.
    pub fn exceedance_all(&self, set: VertexSet, x: &[f64]) -> f64 {
        self.rays
            .iter()
            .filter(|r| set.iter().all(|i| r.dir[i] > 0.0))
            .map(|r| {
                let t = set.iter().map(|i| x[i] / r.dir[i]).fold(0.0, f64::max);
                r.c * t.powf(-self.alpha)
            })
            .sum()
    }

    /// Λ(y_i > x_i for some i ∈ set), closed form over rays.
    pub fn exceedance_any(&self, set: VertexSet, x: &[f64]) -> f64 {
        self.rays
            .iter()
            .filter(|r| set.iter().any(|i| r.dir[i] > 0.0))
            .map(|r| {
                let t = set.iter().filter(|&i| r.dir[i] > 0.0).map(|i| x[i] / r.dir[i]).fold(f64::INFINITY, f64::min);
                r.c * t.powf(-self.alpha)
            })
            .sum()
    }

    /// Rescales coordinates so that every margin is `u^{-α}`.
    pub fn standardize_margins(&self) -> Result<RayMeasure> {
        let scales = self.margin_scales()?;
        let rays = self
            .rays
            .iter()
            .map(|r| Ray { dir: r.dir.iter().zip(&scales).map(|(w, s)| w / s).collect(), c: r.c })
            .collect();
        RayMeasure::new(self.d, self.alpha, rays)
    }

    /// s_i = (Σ_j c_j w_ij^α)^{1/α}.
    pub fn margin_scales(&self) -> Result<Vec<f64>> {
        (0..self.d)
            .map(|i| {
                let m: f64 = self.rays.iter().map(|r| r.c * r.dir[i].powf(self.alpha)).sum();
                if m > 0.0 {
                    Ok(m.powf(1.0 / self.alpha))
                } else {
                    Err(Error::UnchargedCoordinate(i))
                }
            })
            .collect()
    }

    /// Extremal correlation χ_ij on a standardized measure.
    pub fn chi(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.d || j >= self.d {
            return Err(Error::UnknownVertex(format!("{}", i.max(j) + 1)));
        }
        let a = self.alpha;
        let mi: f64 = self.rays.iter().map(|r| r.c * r.dir[i].powf(a)).sum();
        let mj: f64 = self.rays.iter().map(|r| r.c * r.dir[j].powf(a)).sum();
        if mi == 0.0 || (mi - mj).abs() > RAY_TOL * mi.max(mj) {
            return Err(Error::NotStandardized);
        }
        let joint: f64 = self.rays.iter().map(|r| r.c * r.dir[i].min(r.dir[j]).powf(a)).sum();
        Ok((joint / mi).clamp(0.0, 1.0))
    }

    /// Exact CI oracle for homogeneous ray measures.
    ///
    /// Conditioning on `Y_C = s·κ` selects the rays whose `C` part is
    /// proportional to κ; along ray j the point is `s·w_j/λ_j` with λ_j the
    /// first nonzero `C` coordinate, and the conditional ray weight is
    /// `c_j λ_j^α`, free of `s`. The statement therefore holds iff every such
    /// class has a product-form `(A, B)` table and no ray without `C` part
    /// charges both `A` and `B`.
    pub fn ci_oracle(&self, a: VertexSet, b: VertexSet, c: VertexSet) -> Result<CiReport> {
        check_within(&[a, b, c], self.d)?;
        check_disjoint(&[a, b, c])?;
        let query = CiQuery::new(a, b, c);
        if a.is_empty() || b.is_empty() {
            return Ok(CiReport::holds(query));
        }
        let abc = a.union(b).union(c);
        let nonzero = |r: &Ray, s: VertexSet| s.iter().any(|i| r.dir[i] != 0.0);
        let mut classes: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        for (j, r) in self.rays.iter().enumerate() {
            if !nonzero(r, abc) {
                continue;
            }
            if !nonzero(r, c) {
                if nonzero(r, a) && nonzero(r, b) {
                    return Ok(CiReport::fails(query, Witness::Ray { index: j, direction: r.dir.clone() }));
                }
                continue;
            }
            let lam = c.iter().map(|i| r.dir[i]).find(|&x| x != 0.0).expect("nonzero C part");
            let key: Vec<f64> = c.iter().map(|i| r.dir[i] / lam).collect();
            match classes.iter_mut().find(|(k, _)| close_vec(k, &key)) {
                Some((_, members)) => members.push(j),
                None => classes.push((key, vec![j])),
            }
        }
        for (_, members) in &classes {
            let defect = self.class_defect(members, a, b, c);
            if defect > RAY_TOL {
                return Ok(CiReport::fails(query, Witness::RayClass { rays: members.clone(), defect }));
            }
        }
        Ok(CiReport::holds(query))
    }

    /// Largest deviation of the normalized class table from the outer
    /// product of its margins.
    fn class_defect(&self, members: &[usize], a: VertexSet, b: VertexSet, c: VertexSet) -> f64 {
        let mut avals: Vec<Vec<f64>> = Vec::new();
        let mut bvals: Vec<Vec<f64>> = Vec::new();
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        let mut total = 0.0;
        for &j in members {
            let r = &self.rays[j];
            let lam = c.iter().map(|i| r.dir[i]).find(|&x| x != 0.0).expect("nonzero C part");
            let va: Vec<f64> = a.iter().map(|i| r.dir[i] / lam).collect();
            let vb: Vec<f64> = b.iter().map(|i| r.dir[i] / lam).collect();
            let ia = index_of(&mut avals, va);
            let ib = index_of(&mut bvals, vb);
            let w = r.c * lam.powf(self.alpha);
            cells.push((ia, ib, w));
            total += w;
        }
        let mut table = vec![vec![0.0; bvals.len()]; avals.len()];
        for (ia, ib, w) in cells {
            table[ia][ib] += w / total;
        }
        let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..bvals.len()).map(|k| table.iter().map(|r| r[k]).sum()).collect();
        let mut worst: f64 = 0.0;
        for (i, row) in table.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                worst = worst.max((p - rows[i] * cols[k]).abs());
            }
        }
        worst
    }
}

fn close(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= RAY_TOL * x.abs().max(y.abs())
}

fn close_vec(x: &[f64], y: &[f64]) -> bool {
    x.iter().zip(y).all(|(&p, &q)| close(p, q))
}

fn index_of(vals: &mut Vec<Vec<f64>>, v: Vec<f64>) -> usize {
    match vals.iter().position(|u| close_vec(u, &v)) {
        Some(i) => i,
        None => {
            vals.push(v);
            vals.len() - 1
        }
    }
}

/// Radial law of an innovation; all have lower endpoint 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Innovation {
    /// F(x) = exp(-(x/scale)^{-alpha}).
    Frechet { alpha: f64, scale: f64 },
    /// Uniform on (0, upper).
    Uniform { upper: f64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Innovation::Frechet { alpha, scale } => alpha > 0.0 && scale > 0.0 && alpha.is_finite() && scale.is_finite(),
            Innovation::Uniform { upper } => upper > 0.0 && upper.is_finite(),
            Innovation::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid innovation parameters {self:?}")))
        }
    }

    /// Quantile function, used for inverse-cdf sampling.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Innovation::Frechet { alpha, scale } => scale * (-u.ln()).powf(-1.0 / alpha),
            Innovation::Uniform { upper } => upper * u,
            Innovation::Exponential { rate } => -(-u).ln_1p() / rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    Max,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkovLevel {
    Local,
    Global,
}

/// Recursive max-linear model `X_i = max_{j∈pa(i)} β_ij X_j ∨ β_ii ε_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxLinearSpec {
    pub dag: Dag,
    /// `beta[i][j]` is the weight of arc j → i.
    beta: Vec<Vec<f64>>,
    diag: Vec<f64>,
    innovations: Vec<Innovation>,
}

impl MaxLinearSpec {
    pub fn new(dag: Dag, arcs: &[((usize, usize), f64)], diag: Vec<f64>, innovations: Vec<Innovation>) -> Result<Self> {
        let d = dag.n();
        if diag.len() != d || innovations.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: diag.len().min(innovations.len()) });
        }
        if diag.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("diagonal weights must be positive".into()));
        }
        let mut beta = vec![vec![0.0; d]; d];
        for &((p, c), v) in arcs {
            if p >= d || c >= d || !dag.parents(c).contains(p) {
                return Err(Error::InvalidInput(format!("weight given for missing arc {} -> {}", p + 1, c + 1)));
            }
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput("arc weights must be positive".into()));
            }
            beta[c][p] = v;
        }
        for (c, p) in dag.arcs().into_iter().map(|(p, c)| (c, p)) {
            if beta[c][p] == 0.0 {
                return Err(Error::InvalidInput(format!("missing weight for arc {} -> {}", p + 1, c + 1)));
            }
        }
        for inn in &innovations {
            inn.validate()?;
        }
        Ok(MaxLinearSpec { dag, beta, diag, innovations })
    }

    /// Unit Fréchet-α innovations at every vertex.
    pub fn frechet(dag: Dag, arcs: &[((usize, usize), f64)], diag: Vec<f64>, alpha: f64) -> Result<Self> {
        let d = dag.n();
        Self::new(dag, arcs, diag, vec![Innovation::Frechet { alpha, scale: 1.0 }; d])
    }

    pub fn d(&self) -> usize {
        self.dag.n()
    }

    /// Weight of arc j → i, 0 when absent.
    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.beta[i][j]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn innovations(&self) -> &[Innovation] {
        &self.innovations
    }

    /// γ_ij: max or sum over paths j → i of β_jj times the arc weights.
    pub fn gamma_matrix(&self, mode: PathMode) -> Vec<Vec<f64>> {
        let d = self.d();
        let mut g = vec![vec![0.0; d]; d];
        for &i in self.dag.topological_order() {
            g[i][i] = self.diag[i];
            for p in self.dag.parents(i).iter() {
                for j in 0..d {
                    let via = self.beta[i][p] * g[p][j];
                    if via == 0.0 {
                        continue;
                    }
                    g[i][j] = match mode {
                        PathMode::Max => g[i][j].max(via),
                        PathMode::Sum => g[i][j] + via,
                    };
                }
            }
        }
        g
    }

    /// Exponent measure as rays `γ_{·j}`; needs Fréchet innovations with a
    /// common α.
    pub fn to_rays(&self, mode: PathMode) -> Result<RayMeasure> {
        let mut alpha = None;
        let mut cs = Vec::with_capacity(self.d());
        for (j, inn) in self.innovations.iter().enumerate() {
            match *inn {
                Innovation::Frechet { alpha: a, scale } if alpha.is_none_or(|x| x == a) => {
                    alpha = Some(a);
                    cs.push(scale.powf(a));
                }
                _ => return Err(Error::UnsupportedInnovation(j)),
            }
        }
        let g = self.gamma_matrix(mode);
        let rays = (0..self.d()).map(|j| Ray { dir: (0..self.d()).map(|i| g[i][j]).collect(), c: cs[j] }).collect();
        RayMeasure::new(self.d(), alpha.unwrap_or(1.0), rays)
    }

    pub fn from_maxlinear(&self) -> Result<RayMeasure> {
        self.to_rays(PathMode::Max)
    }

    pub fn verify_directed_markov(&self, level: MarkovLevel) -> Result<MarkovAudit> {
        self.verify_directed_markov_mode(level, PathMode::Max)
    }

    /// Checks (DL) or (DG) with the exact ray oracle; `Sum` uses the
    /// sum-linear ray support.
    pub fn verify_directed_markov_mode(&self, level: MarkovLevel, mode: PathMode) -> Result<MarkovAudit> {
        let m = self.to_rays(mode)?;
        let d = self.d();
        let queries: Vec<(VertexSet, VertexSet, VertexSet)> = match level {
            MarkovLevel::Local => (0..d)
                .map(|v| {
                    let pa = self.dag.parents(v);
                    let nd = VertexSet::full(d).difference(self.dag.descendants(v)).without(v);
                    (VertexSet::singleton(v), nd.difference(pa), pa)
                })
                .collect(),
            MarkovLevel::Global => {
                let mut out = Vec::new();
                for code in 0..4usize.pow(d as u32) {
                    let mut sets = [VertexSet::EMPTY; 4];
                    let mut x = code;
                    for v in 0..d {
                        sets[x % 4] = sets[x % 4].with(v);
                        x /= 4;
                    }
                    let [_, a, b, s] = sets;
                    if a.is_empty() || b.is_empty() || a.first() > b.first() {
                        continue;
                    }
                    if self.dag.dg_separated(a, b, s)? {
                        out.push((a, b, s));
                    }
                }
                out
            }
        };
        let property = match level {
            MarkovLevel::Local => Property::DirectedLocal,
            MarkovLevel::Global => Property::DirectedGlobal,
        };
        let reports = par::map_slice(&queries, |&(a, b, c)| m.ci_oracle(a, b, c));
        let mut audit = MarkovAudit::default();
        for ((a, b, c), r) in queries.into_iter().zip(reports) {
            let r = r?;
            audit.push(property, vec![a, b, c], r.verdict, r.witness);
        }
        Ok(audit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vset;

    fn chain2() -> MaxLinearSpec {
        let dag = Dag::from_arcs(2, &[(0, 1)]).unwrap();
        MaxLinearSpec::frechet(dag, &[((0, 1), 2.0)], vec![1.0, 1.0], 1.0).unwrap()
    }

    fn diamond() -> MaxLinearSpec {
        let arcs = [(0, 1), (0, 2), (1, 3), (2, 3)];
        let dag = Dag::from_arcs(4, &arcs).unwrap();
        let w: Vec<_> = arcs.iter().map(|&a| (a, 1.0)).collect();
        MaxLinearSpec::frechet(dag, &w, vec![1.0; 4], 1.0).unwrap()
    }

    #[test]
    fn gamma() {
        assert_eq!(chain2().gamma_matrix(PathMode::Max), vec![vec![1.0, 0.0], vec![2.0, 1.0]]);
        assert_eq!(diamond().gamma_matrix(PathMode::Max)[3][0], 1.0);
        assert_eq!(diamond().gamma_matrix(PathMode::Sum)[3][0], 2.0);
    }

    #[test]
    fn rays_from_model() {
        let m = chain2().from_maxlinear().unwrap();
        assert_eq!(m.rays(), &[Ray { dir: vec![1.0, 2.0], c: 1.0 }, Ray { dir: vec![0.0, 1.0], c: 1.0 }]);
        assert_eq!(diamond().from_maxlinear().unwrap().rays().len(), 4);
        let iso = MaxLinearSpec::frechet(Dag::from_arcs(2, &[]).unwrap(), &[], vec![1.0, 1.0], 1.0).unwrap();
        let r = iso.from_maxlinear().unwrap();
        assert_eq!(r.rays()[0].dir, vec![1.0, 0.0]);
        assert_eq!(r.rays()[1].dir, vec![0.0, 1.0]);
        let dag = Dag::from_arcs(1, &[]).unwrap();
        let u = MaxLinearSpec::new(dag, &[], vec![1.0], vec![Innovation::Uniform { upper: 1.0 }]).unwrap();
        assert_eq!(u.from_maxlinear(), Err(Error::UnsupportedInnovation(0)));
    }

    #[test]
    fn oracle_examples() {
        let dag = Dag::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        let chain = MaxLinearSpec::frechet(dag, &[((0, 1), 0.7), ((1, 2), 1.3)], vec![1.0, 0.5, 2.0], 1.0).unwrap();
        let m = chain.from_maxlinear().unwrap();
        assert!(m.ci_oracle(vset![1], vset![3], vset![2]).unwrap().verdict);
        assert!(!m.ci_oracle(vset![1], vset![3], vset![]).unwrap().verdict);
        let e = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.0], c: 1.0 }, Ray { dir: vec![0.0, 1.0], c: 1.0 }])
            .unwrap();
        assert!(e.ci_oracle(vset![1], vset![2], vset![]).unwrap().verdict);
    }

    #[test]
    fn collider_dependence() {
        let dag = Dag::from_arcs(3, &[(0, 2), (1, 2)]).unwrap();
        let s = MaxLinearSpec::frechet(dag, &[((0, 2), 0.8), ((1, 2), 1.7)], vec![1.0; 3], 1.0).unwrap();
        let m = s.from_maxlinear().unwrap();
        assert!(!m.ci_oracle(vset![1], vset![2], vset![3]).unwrap().verdict);
        assert!(m.ci_oracle(vset![1], vset![2], vset![]).unwrap().verdict);
    }

    #[test]
    fn standardize_and_chi() {
        let m = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.0], c: 2.0 }, Ray { dir: vec![0.0, 1.0], c: 2.0 }])
            .unwrap();
        let s = m.standardize_margins().unwrap();
        assert!((s.margin(0, 3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.chi(0, 1).unwrap(), 0.0);
        let one = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 1.0], c: 1.0 }]).unwrap();
        assert_eq!(one.standardize_margins().unwrap(), one);
        assert_eq!(one.chi(0, 1).unwrap(), 1.0);
        let half = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.5], c: 1.0 }, Ray { dir: vec![0.0, 0.5], c: 1.0 }])
            .unwrap();
        assert!((half.chi(0, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.chi(0, 1).unwrap(), 0.0);
        let lop = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.5], c: 1.0 }]).unwrap();
        assert_eq!(lop.chi(0, 1), Err(Error::NotStandardized));
        let unch = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.0], c: 1.0 }]).unwrap();
        assert_eq!(unch.standardize_margins(), Err(Error::UnchargedCoordinate(1)));
    }

    #[test]
    fn markov_levels() {
        let dag = Dag::from_arcs(3, &[]).unwrap();
        let s = MaxLinearSpec::frechet(dag, &[], vec![1.0; 3], 2.0).unwrap();
        assert!(s.verify_directed_markov(MarkovLevel::Global).unwrap().passed());
        assert!(diamond().verify_directed_markov(MarkovLevel::Local).unwrap().passed());
        assert!(diamond().verify_directed_markov(MarkovLevel::Global).unwrap().passed());
    }
}
