//! Samplers for max-linear vectors and ray measures, and empirical
//! estimators used to corroborate the exact oracles.
//!
//! Every sampled row uses its own ChaCha stream keyed by `(seed, row)`, so
//! output does not depend on the number of threads.

use std::collections::HashMap;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_disjoint, check_within, Error, Result};
use crate::rays::{MaxLinearSpec, RayMeasure};
use crate::{par, VertexSet};

pub const MIN_SAMPLES: usize = 10_000;
const ROW_BLOCK: usize = 2048;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Row-major sample matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    d: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 || data.len() % d != 0 {
            return Err(Error::DimensionMismatch { expected: d, found: data.len() });
        }
        Ok(Samples { d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: 0 });
        }
        Self::new(d, rows.concat())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

fn sample_rows<F>(n: usize, d: usize, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + Send,
{
    let blocks = par::map_range(n.div_ceil(ROW_BLOCK), |b| {
        let lo = b * ROW_BLOCK;
        let hi = (lo + ROW_BLOCK).min(n);
        let mut out = vec![0.0; (hi - lo) * d];
        for (k, row) in out.chunks_exact_mut(d).enumerate() {
            let mut rng = stream_rng(seed, (lo + k) as u64);
            f(&mut rng, row);
        }
        out
    });
    blocks.concat()
}

/// Max-linear sample together with the innovations that produced it.
pub fn sample_maxlinear_with_innovations(spec: &MaxLinearSpec, n: usize, seed: u64) -> Result<(Samples, Samples)> {
    let d = spec.d();
    let dag = &spec.dag;
    let joint = sample_rows(n, 2 * d, seed, |rng, row| {
        let (x, eps) = row.split_at_mut(d);
        for (e, inn) in eps.iter_mut().zip(spec.innovations()) {
            *e = inn.quantile(rng.sample(Open01));
        }
        for &i in dag.topological_order() {
            let mut v = spec.diag()[i] * eps[i];
            for p in dag.parents(i).iter() {
                v = v.max(spec.beta(i, p) * x[p]);
            }
            x[i] = v;
        }
    });
    let mut xs = Vec::with_capacity(n * d);
    let mut es = Vec::with_capacity(n * d);
    for row in joint.chunks_exact(2 * d) {
        xs.extend_from_slice(&row[..d]);
        es.extend_from_slice(&row[d..]);
    }
    Ok((Samples::new(d, xs)?, Samples::new(d, es)?))
}

/// `n` draws of the recursive max-linear vector.
pub fn sample_maxlinear(spec: &MaxLinearSpec, n: usize, seed: u64) -> Result<Samples> {
    Ok(sample_maxlinear_with_innovations(spec, n, seed)?.0)
}

/// `n` draws of `Y ~ Λ(· ∩ {y_v ≥ 1}) / Λ(y_v ≥ 1)`.
pub fn sample_pareto_conditional(m: &RayMeasure, v: usize, n: usize, seed: u64) -> Result<Samples> {
    if v >= m.d() {
        return Err(Error::UnknownVertex(format!("{}", v + 1)));
    }
    let alpha = m.alpha();
    let charged: Vec<(usize, f64)> = m
        .rays()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.dir[v] > 0.0)
        .map(|(j, r)| (j, r.c * r.dir[v].powf(alpha)))
        .collect();
    if charged.is_empty() {
        return Err(Error::UnchargedDirection(v));
    }
    let total: f64 = charged.iter().map(|x| x.1).sum();
    let mut cum = Vec::with_capacity(charged.len());
    let mut acc = 0.0;
    for &(_, w) in &charged {
        acc += w / total;
        cum.push(acc);
    }
    let data = sample_rows(n, m.d(), seed, |rng, row| {
        let u: f64 = rng.sample(Open01);
        let k = cum.partition_point(|&c| c < u).min(charged.len() - 1);
        let ray = &m.rays()[charged[k].0];
        let r: f64 = rng.sample(Open01);
        let t = r.powf(-1.0 / alpha) / ray.dir[v];
        for (y, w) in row.iter_mut().zip(&ray.dir) {
            *y = t * w;
        }
    });
    Samples::new(m.d(), data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub chi: f64,
    pub se: f64,
    /// Exceedances of column `j`, the conditioning column.
    pub exceedances: usize,
}

/// Empirical quantile of order `q` (smallest `x` with F_n(x) ≥ q).
fn quantile(col: &mut [f64], q: f64) -> f64 {
    col.sort_by(f64::total_cmp);
    let k = ((q * col.len() as f64).ceil() as usize).clamp(1, col.len()) - 1;
    col[k]
}

/// P(X_i > u_i | X_j > u_j) at the empirical `q` quantiles, with binomial
/// standard error.
pub fn empirical_chi(s: &Samples, i: usize, j: usize, q: f64) -> Result<ChiEstimate> {
    if s.n() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { have: s.n(), need: MIN_SAMPLES });
    }
    if !(q > 0.9 && q < 1.0) {
        return Err(Error::OutOfRange(format!("tail quantile {q} not in (0.9, 1)")));
    }
    if i >= s.d() || j >= s.d() {
        return Err(Error::UnknownVertex(format!("{}", i.max(j) + 1)));
    }
    let ui = quantile(&mut s.column(i), q);
    let uj = quantile(&mut s.column(j), q);
    let (mut both, mut marg) = (0usize, 0usize);
    for r in s.rows() {
        if r[j] > uj {
            marg += 1;
            if r[i] > ui {
                both += 1;
            }
        }
    }
    if marg == 0 {
        return Err(Error::TooFewSamples { have: 0, need: 1 });
    }
    let chi = both as f64 / marg as f64;
    Ok(ChiEstimate { chi, se: (chi * (1.0 - chi) / marg as f64).sqrt(), exceedances: marg })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiTestOptions {
    /// Quantile bins for nonzero values; zero is always a separate bin.
    pub bins: usize,
    pub permutations: usize,
    pub seed: u64,
    /// Divide every coordinate by ‖Y_C‖₁ on rows where it is positive and
    /// stratify on the exact (rounded) direction of `Y_C` instead of its
    /// bins. For homogeneous measures this removes the common radius, which
    /// otherwise shows up as spurious dependence within coarse bins. Scaled
    /// values are rounded to 9 significant digits before binning.
    pub scale_by_conditioning: bool,
}

impl Default for CiTestOptions {
    fn default() -> Self {
        CiTestOptions { bins: 4, permutations: 500, seed: 0, scale_by_conditioning: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult {
    /// Conditional mutual information of the binned data, in nats.
    pub statistic: f64,
    pub p_value: f64,
}

/// Heuristic permutation test of `Y_A ⊥ Y_B | Y_C` on samples.
///
/// A corroborating tool, not an oracle: it sees only binned data.
pub fn empirical_ci_test(s: &Samples, a: VertexSet, b: VertexSet, c: VertexSet, opts: &CiTestOptions) -> Result<CiTestResult> {
    if s.n() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { have: s.n(), need: MIN_SAMPLES });
    }
    check_within(&[a, b, c], s.d())?;
    check_disjoint(&[a, b, c])?;
    if a.is_empty() || b.is_empty() {
        return Ok(CiTestResult { statistic: 0.0, p_value: 1.0 });
    }
    let bins = opts.bins.max(1);
    let n = s.n();
    let scale: Vec<f64> = s
        .rows()
        .map(|r| {
            let norm: f64 = c.iter().map(|k| r[k].abs()).sum();
            if opts.scale_by_conditioning && norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let binned: HashMap<usize, Vec<u32>> = a
        .union(b)
        .union(c)
        .iter()
        .map(|k| {
            let col: Vec<f64> = s
                .rows()
                .zip(&scale)
                .map(|(r, sc)| if opts.scale_by_conditioning { round_sig(r[k] / sc) } else { r[k] / sc })
                .collect();
            (k, quantile_bins(&col, bins))
        })
        .collect();
    let code = |set: VertexSet| -> Vec<u32> {
        let raw: Vec<u64> = (0..n)
            .map(|row| set.iter().fold(0u64, |acc, k| acc * (bins as u64 + 1) + binned[&k][row] as u64))
            .collect();
        densify(&raw)
    };
    let (ca, cb) = (code(a), code(b));
    let cc = if opts.scale_by_conditioning {
        let keys: Vec<Vec<u64>> = s
            .rows()
            .zip(&scale)
            .map(|(r, sc)| c.iter().map(|k| round_sig(r[k] / sc).to_bits()).collect())
            .collect();
        let mut uniq = keys.clone();
        uniq.sort_unstable();
        uniq.dedup();
        keys.iter().map(|k| uniq.binary_search(k).expect("present") as u32).collect()
    } else {
        code(c)
    };
    let na = ca.iter().max().map_or(0, |&x| x as usize + 1);
    let nb = cb.iter().max().map_or(0, |&x| x as usize + 1);
    let nc = cc.iter().max().map_or(0, |&x| x as usize + 1);
    if na * nb * nc > 1 << 24 {
        return Err(Error::TooLarge { what: "binned contingency table", size: na * nb * nc, limit: 1 << 24 });
    }
    let observed = cmi(&ca, &cb, &cc, na, nb, nc);
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for (row, &k) in cc.iter().enumerate() {
        strata[k as usize].push(row);
    }
    let exceed = par::map_range(opts.permutations, |p| {
        let mut rng = stream_rng(opts.seed, p as u64);
        let mut perm = cb.clone();
        for rows in &strata {
            for k in (1..rows.len()).rev() {
                let m = rng.gen_range(0..=k);
                perm.swap(rows[k], rows[m]);
            }
        }
        cmi(&ca, &perm, &cc, na, nb, nc) >= observed - 1e-12
    });
    let hits = exceed.into_iter().filter(|&x| x).count();
    Ok(CiTestResult { statistic: observed, p_value: (1 + hits) as f64 / (1 + opts.permutations) as f64 })
}

/// Bin 0 for zeros; nonzero values by quantiles of the nonzero values.
/// Equal values always share a bin.
fn quantile_bins(col: &[f64], bins: usize) -> Vec<u32> {
    let mut nz: Vec<f64> = col.iter().copied().filter(|&x| x != 0.0).collect();
    nz.sort_by(f64::total_cmp);
    if nz.is_empty() {
        return vec![0; col.len()];
    }
    let edges: Vec<f64> = (1..bins).map(|k| nz[(k * nz.len() / bins).min(nz.len() - 1)]).collect();
    col.iter().map(|&x| if x == 0.0 { 0 } else { 1 + edges.partition_point(|&e| e < x) as u32 }).collect()
}

fn round_sig(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let e = 10f64.powi(8 - x.abs().log10().floor() as i32);
    (x * e).round() / e
}

fn densify(raw: &[u64]) -> Vec<u32> {
    let mut uniq: Vec<u64> = raw.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    raw.iter().map(|x| uniq.binary_search(x).expect("present") as u32).collect()
}

fn cmi(ca: &[u32], cb: &[u32], cc: &[u32], na: usize, nb: usize, nc: usize) -> f64 {
    let mut nabc = vec![0u32; na * nb * nc];
    let mut nac = vec![0u32; na * nc];
    let mut nbc = vec![0u32; nb * nc];
    let mut ncc = vec![0u32; nc];
    for ((&x, &y), &z) in ca.iter().zip(cb).zip(cc) {
        let (x, y, z) = (x as usize, y as usize, z as usize);
        nabc[(z * na + x) * nb + y] += 1;
        nac[z * na + x] += 1;
        nbc[z * nb + y] += 1;
        ncc[z] += 1;
    }
    let n = ca.len() as f64;
    let mut total = 0.0;
    for z in 0..nc {
        for x in 0..na {
            for y in 0..nb {
                let k = nabc[(z * na + x) * nb + y];
                if k == 0 {
                    continue;
                }
                let k = k as f64;
                total += k / n * (k * ncc[z] as f64 / (nac[z * na + x] as f64 * nbc[z * nb + y] as f64)).ln();
            }
        }
    }
    total
}
