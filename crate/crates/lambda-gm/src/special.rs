//! Univariate and bivariate standard normal functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::quad;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

// Chebyshev coefficients of erfcx(x) = exp(x²) erfc(x) in u = (x - 4)/(x + 4),
// fitted at 60 Chebyshev nodes with 40-digit arithmetic.
const ERFCX_CHEB: [f64; 34] = [
    5.9620358738731520734e-1,
    -4.290864412558053669e-1,
    1.8027256568771056463e-1,
    -6.5237524497348991471e-2,
    2.0367256576744864599e-2,
    -5.4490870664590075772e-3,
    1.2278515372606755334e-3,
    -2.2469794218773049373e-4,
    3.0685431130989515258e-5,
    -2.317823499946853368e-6,
    -1.4628356484727577984e-7,
    6.927830518748949253e-8,
    -6.8831107633628463774e-9,
    -6.8584891494454503084e-10,
    2.4593734989496684e-10,
    -7.8149091740280959687e-12,
    -5.8893947338172626945e-12,
    6.8692304385679933789e-13,
    1.2550492580108261014e-13,
    -2.8232509502798150949e-14,
    -2.6031646343175432449e-15,
    1.0249960195009235169e-15,
    5.7284146812568497572e-17,
    -3.6928751293272149872e-17,
    -1.5725507296420274835e-18,
    1.368806273864585125e-18,
    6.3016934454418055555e-20,
    -5.243638687266245889e-20,
    -3.3992081218244805425e-21,
    2.0472834033738774758e-21,
    2.0388958119554908561e-22,
    -7.9136950917461203956e-23,
    -1.2248953600456393238e-23,
    2.8786443785039330898e-24,
];

/// exp(-x²) without the cancellation error of squaring `x` in floating point.
fn exp_neg_sq(x: f64) -> f64 {
    let hi = (x as f32) as f64;
    let lo = x - hi;
    (-hi * hi).exp() * (-lo * (x + hi)).exp()
}

/// Scaled complementary error function exp(x²) erfc(x) for x ≥ 0.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x > 1e8 {
        return 1.0 / (x * PI.sqrt());
    }
    let u = (x - 4.0) / (x + 4.0);
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in ERFCX_CHEB[1..].iter().rev() {
        let b0 = 2.0 * u * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + 0.5 * ERFCX_CHEB[0]
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..40 {
        term *= -x2 / n as f64;
        let t = term / (2 * n + 1) as f64;
        sum += t;
        if t.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 0.5 {
        return 1.0 - erf_series(x);
    }
    if x > 27.3 {
        return 0.0;
    }
    exp_neg_sq(x) * erfcx(x)
}

pub fn erf(x: f64) -> f64 {
    if x.abs() < 0.5 {
        erf_series(x)
    } else if x > 0.0 {
        1.0 - erfc(x)
    } else {
        erfc(-x) - 1.0
    }
}

/// Standard normal density φ.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * exp_neg_sq(x * FRAC_1_SQRT_2)
}

/// Standard normal cdf Φ.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival Φ̄(x) = Φ(-x).
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// log Φ(x), accurate in both tails.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x < -5.0 {
        let z = -x * FRAC_1_SQRT_2;
        (0.5 * erfcx(z)).ln() - z * z
    } else {
        (-norm_sf(x)).ln_1p()
    }
}

/// Mills ratio Φ̄(x)/φ(x).
pub fn mills_ratio(x: f64) -> f64 {
    if x >= 0.0 {
        (PI / 2.0).sqrt() * erfcx(x * FRAC_1_SQRT_2)
    } else {
        norm_sf(x) / norm_pdf(x)
    }
}

/// Lower and upper rational bounds on the Mills ratio for x > 0.
pub fn mills_bounds(x: f64) -> (f64, f64) {
    (2.0 / (x + (x * x + 4.0).sqrt()), 2.0 / (x + (x * x + 8.0 / PI).sqrt()))
}

pub fn checked(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite)
    }
}

/// Bivariate standard normal with correlation ρ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BivNormal {
    rho: f64,
    s: f64,
    /// Panel width of the composite Gauss–Legendre rule.
    panel: f64,
}

/// Lower truncation of the cdf integral; Φ(-9) < 1.2e-19.
pub const LOWER_CUTOFF: f64 = -9.0;

impl BivNormal {
    pub fn new(rho: f64) -> Result<Self> {
        Self::with_panel(rho, 0.5)
    }

    pub fn with_panel(rho: f64, panel: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::RhoOutOfRange(rho));
        }
        if !(panel > 0.0) {
            return Err(Error::OutOfRange("panel width must be positive".into()));
        }
        Ok(BivNormal { rho, s: (1.0 - rho * rho).sqrt(), panel })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// √(1-ρ²).
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn pdf(&self, x1: f64, x2: f64) -> f64 {
        let q = (x1 * x1 - 2.0 * self.rho * x1 * x2 + x2 * x2) / (self.s * self.s);
        (-0.5 * q).exp() / (2.0 * PI * self.s)
    }

    /// Φρ(x1, x2) from ∂Φρ/∂t = φ(t)Φ((x - ρt)/s), integrated in the
    /// coordinate with the smaller argument so small values keep relative
    /// accuracy.
    pub fn cdf(&self, x1: f64, x2: f64) -> f64 {
        if x1.is_nan() || x2.is_nan() {
            return f64::NAN;
        }
        if self.rho == 0.0 {
            return norm_cdf(x1) * norm_cdf(x2);
        }
        let (t_hi, other) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        if t_hi < -38.0 {
            return 0.0;
        }
        let lo = LOWER_CUTOFF.min(t_hi - 12.0);
        let hi = t_hi.min(38.0);
        let (rho, s) = (self.rho, self.s);
        quad::composite(|t| norm_pdf(t) * norm_cdf((other - rho * t) / s), lo, hi, self.panel, quad::gl10())
    }

    /// P(X1 > x1, X2 > x2), integrated over the larger threshold.
    pub fn sf(&self, x1: f64, x2: f64) -> f64 {
        let (t_lo, other) = if x1 >= x2 { (x1, x2) } else { (x2, x1) };
        if t_lo < 0.0 {
            // both thresholds negative: inclusion–exclusion loses nothing here
            return 1.0 - norm_cdf(x1) - norm_cdf(x2) + self.cdf(x1, x2);
        }
        let (rho, s) = (self.rho, self.s);
        quad::composite(|t| norm_pdf(t) * norm_sf((other - rho * t) / s), t_lo, t_lo + 12.0, self.panel, quad::gl10())
    }

    /// Lower and upper bounds on Φρ(x1, x2) for ρ ∈ (0, 1).
    pub fn sandwich(&self, x1: f64, x2: f64) -> (f64, f64) {
        let (rho, s) = (self.rho, self.s);
        let a = norm_cdf(x1) * norm_cdf((x2 - rho * x1) / s);
        let b = norm_cdf(x2) * norm_cdf((x1 - rho * x2) / s);
        (a.max(b), (a + norm_cdf(x2)).min(b + norm_cdf(x1)))
    }
}
