//! Hüsler–Reiss building blocks and forest models with sub-face mass.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::{synthesize_forest, AxisGrid, BivariateBlock, GridMeasure};
use crate::quad::{composite_nodes, gl10};
use crate::special::{norm_cdf, norm_pdf};
use crate::{Error, Result, UndirectedGraph};

/// Largest node count × path length accepted by [`HrForest::chi_quadrature`].
pub const CHI_QUADRATURE_BUDGET: usize = 1 << 26;

fn positive(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::DomainError(format!("{x} is not a positive finite number")))
    }
}

/// Bivariate HR exponent-measure density, −3-homogeneous with margins y⁻².
pub fn hr_density(gamma: f64, y1: f64, y2: f64) -> Result<f64> {
    let (g, y1, y2) = (positive(gamma)?, positive(y1)?, positive(y2)?);
    let z = (y2 / y1).ln() + 0.5 * g;
    Ok((2.0 * PI * g).sqrt().recip() / (y1 * y1 * y2) * (-z * z / (2.0 * g)).exp())
}

/// V(x) = Φ(√Γ/2 + log(x2/x1)/√Γ)/x1 + Φ(√Γ/2 + log(x1/x2)/√Γ)/x2.
///
/// The positive-sign form; a measure of an increasing set cannot be negative.
pub fn hr_exponent_biv(gamma: f64, x1: f64, x2: f64) -> Result<f64> {
    let (g, x1, x2) = (positive(gamma)?, positive(x1)?, positive(x2)?);
    let r = g.sqrt();
    let l = (x2 / x1).ln();
    Ok(norm_cdf(0.5 * r + l / r) / x1 + norm_cdf(0.5 * r - l / r) / x2)
}

/// HR density in any dimension from a variogram matrix, with margins y⁻².
///
/// Anchored at the first coordinate:
/// y₁⁻² ∏_{i>1} y_i⁻¹ φ(z; Σ), z_i = log(y_i/y₁) + Γ_{1i}/2,
/// Σ_ij = (Γ_{1i} + Γ_{1j} − Γ_ij)/2.
pub fn hr_density_multi(gamma: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let d = y.len();
    if gamma.len() != d || gamma.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: gamma.len() });
    }
    for &v in y {
        positive(v)?;
    }
    if d == 1 {
        return Ok(y[0].powi(-2));
    }
    let k = d - 1;
    let mut sigma = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            sigma[i][j] = 0.5 * (gamma[0][i + 1] + gamma[0][j + 1] - gamma[i + 1][j + 1]);
        }
    }
    let chol = cholesky(&sigma).ok_or_else(|| Error::InvalidInput("variogram is not conditionally negative definite".into()))?;
    let z: Vec<f64> = (0..k).map(|i| (y[i + 1] / y[0]).ln() + 0.5 * gamma[0][i + 1]).collect();
    // forward substitution L w = z
    let mut w = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|j| chol[i][j] * w[j]).sum();
        w[i] = (z[i] - s) / chol[i][i];
    }
    let quad: f64 = w.iter().map(|x| x * x).sum();
    let logdet: f64 = (0..k).map(|i| chol[i][i].ln()).sum();
    let log_phi = -0.5 * quad - logdet - 0.5 * k as f64 * (2.0 * PI).ln();
    let jac: f64 = y[1..].iter().map(|v| v.ln()).sum::<f64>() + 2.0 * y[0].ln();
    Ok((log_phi - jac).exp())
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Univariate margin y⁻² of every HR block.
pub fn pareto_margin(y: f64) -> f64 {
    y.powi(-2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HrEdge {
    pub i: usize,
    pub j: usize,
    pub gamma: f64,
    pub p: f64,
}

/// HR forest: one (Γ, p) pair per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct HrForest {
    forest: UndirectedGraph,
    edges: BTreeMap<(usize, usize), HrEdge>,
}

impl HrForest {
    pub fn new(d: usize, edges: Vec<HrEdge>) -> Result<Self> {
        let mut g = UndirectedGraph::empty(d)?;
        let mut map = BTreeMap::new();
        for e in edges {
            if !(e.gamma > 0.0 && e.gamma.is_finite()) {
                return Err(Error::OutOfRange(format!("Γ = {} must be positive", e.gamma)));
            }
            if !(0.0..=1.0).contains(&e.p) {
                return Err(Error::OutOfRange(format!("p = {} not in [0, 1]", e.p)));
            }
            g.add_edge(e.i, e.j)?;
            let key = (e.i.min(e.j), e.i.max(e.j));
            if map.insert(key, HrEdge { i: key.0, j: key.1, ..e }).is_some() {
                return Err(Error::InvalidInput(format!("duplicate edge {}–{}", key.0 + 1, key.1 + 1)));
            }
        }
        if !g.is_forest() {
            return Err(Error::NotForest);
        }
        Ok(HrForest { forest: g, edges: map })
    }

    pub fn d(&self) -> usize {
        self.forest.n()
    }

    pub fn forest(&self) -> &UndirectedGraph {
        &self.forest
    }

    pub fn edges(&self) -> impl Iterator<Item = &HrEdge> {
        self.edges.values()
    }

    fn edge(&self, a: usize, b: usize) -> &HrEdge {
        &self.edges[&(a.min(b), a.max(b))]
    }

    /// Vertex path from `i` to `j`, if they share a tree.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        let d = self.d();
        let mut prev = vec![usize::MAX; d];
        let mut queue = std::collections::VecDeque::from([i]);
        prev[i] = i;
        while let Some(v) = queue.pop_front() {
            if v == j {
                break;
            }
            for u in self.forest.neighbors(v).iter() {
                if prev[u] == usize::MAX {
                    prev[u] = v;
                    queue.push_back(u);
                }
            }
        }
        if prev[j] == usize::MAX {
            return None;
        }
        let mut path = vec![j];
        while *path.last().expect("nonempty") != i {
            path.push(prev[*path.last().expect("nonempty")]);
        }
        path.reverse();
        Some(path)
    }

    /// Path sums of Γ within trees; `None` across trees, 0 on the diagonal.
    pub fn tree_complete_gamma(&self) -> Vec<Vec<Option<f64>>> {
        let d = self.d();
        let mut out = vec![vec![None; d]; d];
        for i in 0..d {
            for j in 0..d {
                out[i][j] =
                    self.path(i, j).map(|p| p.windows(2).map(|w| self.edge(w[0], w[1]).gamma).sum::<f64>());
            }
        }
        out
    }

    fn path_p(&self, path: &[usize]) -> f64 {
        path.windows(2).map(|w| self.edge(w[0], w[1]).p).product()
    }

    /// χ_ij = (2 − 2Φ(√Γ_ij/2)) ∏_path p; 0 across trees, 1 on the diagonal.
    pub fn chi_forest(&self) -> Vec<Vec<f64>> {
        let d = self.d();
        let gamma = self.tree_complete_gamma();
        let mut out = vec![vec![0.0; d]; d];
        for i in 0..d {
            out[i][i] = 1.0;
            for j in i + 1..d {
                if let (Some(g), Some(p)) = (gamma[i][j], self.path(i, j)) {
                    out[i][j] = (2.0 - 2.0 * norm_cdf(0.5 * g.sqrt())) * self.path_p(&p);
                    out[j][i] = out[i][j];
                }
            }
        }
        out
    }

    /// Λ(y_i > 1, y_j > 1) by integrating the forest density along the path.
    ///
    /// Off-path vertices integrate out exactly; interior path vertices must be
    /// positive (otherwise the point lies in Z). In log coordinates each edge
    /// acts as the kernel κ(y_s, y_t)/m(y_s), applied by Gauss–Legendre
    /// quadrature on a truncated line.
    pub fn chi_quadrature(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.d() || j >= self.d() {
            return Err(Error::UnknownVertex(format!("{}", i.max(j) + 1)));
        }
        if i == j {
            return Ok(1.0);
        }
        let Some(path) = self.path(i, j) else {
            return Ok(0.0);
        };
        let p = self.path_p(&path);
        if p == 0.0 {
            return Ok(0.0);
        }
        let gammas: Vec<f64> = path.windows(2).map(|w| self.edge(w[0], w[1]).gamma).collect();
        let spread: f64 = gammas.iter().map(|g| 0.5 * g + 12.0 * g.sqrt()).sum();
        let (lo, hi) = (-spread - 40.0, 40.0 + spread);
        let h = gammas.iter().map(|g| g.sqrt()).fold(f64::INFINITY, f64::min).min(1.0) * 0.5;
        let (z, w) = composite_nodes(lo, 0.0, h, gl10());
        let (z2, w2) = composite_nodes(0.0, hi, h, gl10());
        let split = z.len();
        let nodes: Vec<f64> = z.into_iter().chain(z2).collect();
        let weights: Vec<f64> = w.into_iter().chain(w2).collect();
        let n = nodes.len();
        if n.saturating_mul(n).saturating_mul(gammas.len()) > CHI_QUADRATURE_BUDGET * 16 {
            return Err(Error::QuadratureBudgetExceeded(format!("{n} nodes over {} edges", gammas.len())));
        }
        // density of log y_i on {y_i > 1}: m(e^z) e^z = e^{−z}
        let mut g: Vec<f64> = (0..n).map(|k| if k >= split { (-nodes[k]).exp() } else { 0.0 }).collect();
        for &gamma in &gammas {
            let sd = gamma.sqrt();
            g = crate::par::map_range(n, |k| {
                let zt = nodes[k];
                (0..n)
                    .filter(|&l| g[l] != 0.0)
                    .map(|l| g[l] * weights[l] * norm_pdf((zt - nodes[l] + 0.5 * gamma) / sd) / sd)
                    .sum()
            });
        }
        let mass: f64 = (split..n).map(|k| g[k] * weights[k]).sum();
        Ok(mass * p)
    }

    /// Grid density from mixture blocks p·κ_Γ + q·m on each edge.
    pub fn build_grid(&self, axes: Vec<AxisGrid>) -> Result<GridMeasure> {
        if axes.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), found: axes.len() });
        }
        let blocks: Vec<BivariateBlock> = self
            .edges()
            .map(|e| {
                let g = e.gamma;
                BivariateBlock::mixture(
                    (e.i, e.j),
                    e.p,
                    move |a, b| hr_density(g, a, b).expect("grid nodes are positive"),
                    pareto_margin,
                    &axes[e.i],
                    &axes[e.j],
                )
            })
            .collect::<Result<_>>()?;
        let singletons: BTreeMap<usize, Vec<f64>> = (0..self.d())
            .filter(|&v| self.forest.degree(v) == 0)
            .map(|v| (v, axes[v].nodes().iter().map(|&y| pareto_margin(y)).collect()))
            .collect();
        synthesize_forest(&self.forest, axes, &blocks, &singletons)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_unit_point() {
        for g in [0.5, 1.0, 3.0] {
            let v = hr_density(g, 1.0, 1.0).unwrap();
            assert!((v - (2.0 * PI * g).powf(-0.5) * (-g / 8.0).exp()).abs() < 1e-15);
        }
        assert!(hr_density(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn multi_reduces_to_bivariate() {
        let g = vec![vec![0.0, 1.7], vec![1.7, 0.0]];
        for (a, b) in [(0.3, 2.0), (1.0, 1.0), (5.0, 0.7)] {
            let x = hr_density_multi(&g, &[a, b]).unwrap();
            let y = hr_density(1.7, a, b).unwrap();
            assert!((x - y).abs() < 1e-14 * y);
        }
    }

    #[test]
    fn paths_and_gamma() {
        let f = HrForest::new(
            4,
            vec![HrEdge { i: 0, j: 1, gamma: 1.0, p: 1.0 }, HrEdge { i: 1, j: 2, gamma: 2.0, p: 1.0 }],
        )
        .unwrap();
        assert_eq!(f.path(0, 2), Some(vec![0, 1, 2]));
        let g = f.tree_complete_gamma();
        assert_eq!(g[0][2], Some(3.0));
        assert_eq!(g[0][3], None);
        assert!(HrForest::new(3, vec![
            HrEdge { i: 0, j: 1, gamma: 1.0, p: 1.0 },
            HrEdge { i: 1, j: 2, gamma: 1.0, p: 1.0 },
            HrEdge { i: 0, j: 2, gamma: 1.0, p: 1.0 },
        ])
        .is_err());
    }
}
