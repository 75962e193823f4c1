//! Gaussian-type exponent measures without homogeneity, on the Gaussian
//! scale (−∞ is the absorbing state).
//!
//! The univariate exponent measure is Λ(u) = −log Φ(u) with density
//! λ₁ = φ/Φ; the bivariate one has cdf Φρ and density ∂₁∂₂ log Φρ.

use crate::quad::{composite, composite_nodes, gl10};
use crate::special::{checked, log_norm_cdf, norm_cdf, norm_pdf, norm_sf, BivNormal};
use crate::{par, Error, Result};

/// Relative change below which the truncation search in [`survival13`] stops.
pub const SURVIVAL_TRUNCATION_TOL: f64 = 1e-4;
const LOWER: f64 = crate::special::LOWER_CUTOFF;
const MAX_DOUBLINGS: usize = 8;

/// Map from the Gaussian scale to (0, ∞).
pub fn to_positive(x: f64) -> f64 {
    x.exp()
}

/// Map from (0, ∞) to the Gaussian scale.
pub fn from_positive(y: f64) -> f64 {
    y.ln()
}

fn unit_open(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(Error::OutOfRange(format!("{what} = {x} not in (0, 1)")))
    }
}

fn biv(rho: f64) -> Result<BivNormal> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::RhoOutOfRange(rho));
    }
    BivNormal::new(rho)
}

/// λ₁(u) = φ(u)/Φ(u).
pub fn lambda1(u: f64) -> Result<f64> {
    checked(u)?;
    checked((norm_pdf(u).ln() - log_norm_cdf(u)).exp())
}

/// Λ(u) = −log Φ(u).
pub fn tail1(u: f64) -> Result<f64> {
    checked(u)?;
    Ok(-log_norm_cdf(u))
}

/// 1 − φ(x1)φ(x2)Φ((x1−ρx2)/s)Φ((x2−ρx1)/s) / (φρ(x1,x2) Φρ(x1,x2)).
pub fn kappa_rho(rho: f64, x1: f64, x2: f64) -> Result<f64> {
    let b = biv(rho)?;
    checked(x1)?;
    checked(x2)?;
    let s = b.s();
    // φ(x1)φ(x2)/φρ(x1,x2) = s·exp(Q/2 − (x1² + x2²)/2)
    let q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (s * s);
    let log_ratio = s.ln() + 0.5 * q - 0.5 * (x1 * x1 + x2 * x2);
    let num = norm_cdf((x1 - rho * x2) / s) * norm_cdf((x2 - rho * x1) / s);
    let den = b.cdf(x1, x2);
    checked(1.0 - (log_ratio + num.ln() - den.ln()).exp())
}

/// λ^(ρ)(x1, x2) = φρ/Φρ · κ^(ρ).
pub fn lambda_rho(rho: f64, x1: f64, x2: f64) -> Result<f64> {
    let b = biv(rho)?;
    let k = kappa_rho(rho, x1, x2)?;
    checked(b.pdf(x1, x2) / b.cdf(x1, x2) * k)
}

/// Λ^(ρ)((u,∞)²) = −2 log Φ(u) + log Φρ(u,u), without cancellation.
pub fn joint_survival_rho(rho: f64, u: f64) -> Result<f64> {
    let b = biv(rho)?;
    checked(u)?;
    let tail = norm_sf(u);
    let both = b.sf(u, u);
    Ok(-2.0 * (-tail).ln_1p() + (-2.0 * tail + both).ln_1p())
}

/// P(X1 > u, X2 > u) for the bivariate normal.
pub fn gaussian_joint_sf(rho: f64, u: f64) -> Result<f64> {
    Ok(biv(rho)?.sf(u, u))
}

/// ∫_{−∞}^{x} (ρ/s) φ((u − ρt)/s) Φ(t) dt, equal to
/// Φρ(u, x) − Φ(x)Φ((u − ρx)/s) by parts but free of cancellation.
fn h_integral(b: &BivNormal, u: f64, x: f64) -> f64 {
    let (rho, s) = (b.rho(), b.s());
    let lo = LOWER.min(x - 12.0).min(u / rho - 12.0 * s / rho);
    composite(|t| rho / s * norm_pdf((u - rho * t) / s) * norm_cdf(t), lo, x, 0.5, gl10())
}

/// ∫_u^∞ λ^(ρ)(x1, x) dx1 = φ(x) H(x) / (Φ(x) Φρ(u, x)).
fn inner(b: &BivNormal, u: f64, x: f64) -> f64 {
    norm_pdf(x) * h_integral(b, u, x) / (norm_cdf(x) * b.cdf(u, x))
}

fn survival13_upto(a: &BivNormal, b: &BivNormal, u: f64, upper: f64) -> f64 {
    let (xs, ws) = composite_nodes(LOWER, upper, 0.5, gl10());
    let vals = par::map_range(xs.len(), |k| {
        let x = xs[k];
        let lam1 = norm_pdf(x) / norm_cdf(x);
        inner(a, u, x) * inner(b, u, x) / lam1 * ws[k]
    });
    vals.into_iter().sum()
}

/// Λ₁₃((u,∞)²) for the chain density λ^(a)(x1,x2) λ^(b)(x2,x3) / λ₁(x2).
///
/// The x1 and x3 integrals are done in closed form up to a one-dimensional
/// integral; x2 runs over [−9, U] with U doubled away from u until the value
/// changes by less than [`SURVIVAL_TRUNCATION_TOL`].
pub fn survival13(a: f64, b: f64, u: f64) -> Result<f64> {
    let (ba, bb) = (biv(a)?, biv(b)?);
    checked(u)?;
    if u < 0.0 {
        return Err(Error::OutOfRange(format!("threshold {u} must be nonnegative")));
    }
    let mut width = 4.0;
    let mut prev = survival13_upto(&ba, &bb, u, u + width);
    for _ in 0..MAX_DOUBLINGS {
        width *= 2.0;
        let next = survival13_upto(&ba, &bb, u, u + width);
        if (next - prev).abs() <= SURVIVAL_TRUNCATION_TOL * next.abs() {
            return checked(next);
        }
        prev = next;
    }
    Err(Error::QuadratureBudgetExceeded(format!("survival13 truncation did not settle by U = {}", u + width)))
}

pub fn eta_biv(rho: f64) -> Result<f64> {
    Ok(0.5 * (1.0 + unit_open(rho, "ρ")?))
}

pub fn eta13(a: f64, b: f64) -> Result<f64> {
    Ok(0.5 * (1.0 + unit_open(a, "a")? * unit_open(b, "b")?))
}

/// 1/slope of the least-squares line of log S(u) on log Φ̄(u).
pub fn eta_fit<F: Fn(f64) -> f64>(survival: F, u_grid: &[f64]) -> Result<f64> {
    if u_grid.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 grid points, got {}", u_grid.len())));
    }
    if u_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("u grid must be increasing".into()));
    }
    let mut xs = Vec::with_capacity(u_grid.len());
    let mut ys = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let s = survival(u);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveSurvival);
        }
        xs.push(norm_sf(u).ln());
        ys.push(s.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxx / sxy)
}

/// `n` equally spaced points on [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda1_at_zero() {
        assert!((lambda1(0.0).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn h_matches_difference_form() {
        let b = BivNormal::new(0.5).unwrap();
        for (u, x) in [(0.5, 0.0), (2.0, 1.0), (1.0, 3.0)] {
            let direct = b.cdf(u, x) - norm_cdf(x) * norm_cdf((u - 0.5 * x) / b.s());
            assert!((h_integral(&b, u, x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_closed_forms() {
        assert_eq!(eta_biv(0.5).unwrap(), 0.75);
        assert_eq!(eta13(0.5, 0.5).unwrap(), eta_biv(0.25).unwrap());
        assert!(eta_biv(1.0).is_err());
    }
}
