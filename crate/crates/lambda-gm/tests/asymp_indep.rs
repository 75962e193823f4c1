use lambda_gm::asymp::*;
use lambda_gm::Error;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Φρ(x, y) = ∫_{−∞}^x φ(t) Φ((y − ρt)/s) dt by composite Simpson.
fn biv_cdf_oracle(rho: f64, x: f64, y: f64) -> f64 {
    let n = std_normal();
    let s = (1.0 - rho * rho).sqrt();
    let lo = -12.0;
    let k = 20_000;
    let h = (x - lo) / k as f64;
    let f = |t: f64| n.pdf(t) * n.cdf((y - rho * t) / s);
    let mut acc = f(lo) + f(x);
    for i in 1..k {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn lambda1_is_derivative_of_tail() {
    assert!((lambda1(0.0).unwrap() - 0.797_884_560_802_865_4).abs() < 1e-12);
    let h = 1e-5;
    for k in 0..=40 {
        let u = -4.0 + 0.25 * k as f64;
        let fd = -(tail1(u + h).unwrap() - tail1(u - h).unwrap()) / (2.0 * h);
        let l = lambda1(u).unwrap();
        assert!((fd - l).abs() <= 1e-6 * l.max(1e-3), "u={u}: {fd} vs {l}");
    }
    assert!(lambda1(10.0).unwrap() < 1e-20);
    assert_eq!(lambda1(f64::NAN), Err(Error::NonFinite));
}

#[test]
fn kappa_bounds_on_grid() {
    for rho in [0.1f64, 0.3, 0.5, 0.7, 0.9] {
        let floor = 1.0 - (1.0 - rho * rho).sqrt();
        for i in 0..=32 {
            for j in 0..=32 {
                let (x1, x2) = (-4.0 + 0.25 * i as f64, -4.0 + 0.25 * j as f64);
                let k = kappa_rho(rho, x1, x2).unwrap();
                assert!((-1e-12..=1.0).contains(&k), "ρ={rho} ({x1},{x2}): {k}");
                if x1.max(x2) >= 0.0 {
                    assert!(k >= floor - 1e-12, "ρ={rho} ({x1},{x2}): {k} < {floor}");
                }
            }
        }
    }
    assert!(matches!(kappa_rho(1.0, 0.0, 0.0), Err(Error::RhoOutOfRange(_))));
    assert!(matches!(kappa_rho(0.0, 0.0, 0.0), Err(Error::RhoOutOfRange(_))));
}

#[test]
fn kappa_approaches_one_like_inverse_u() {
    for rho in [0.3, 0.5, 0.7] {
        let inf_above = |u: f64| {
            let mut m = f64::INFINITY;
            for i in 0..=20 {
                for j in 0..=20 {
                    let (x1, x2) = (u + 0.5 * i as f64, u + 0.5 * j as f64);
                    m = m.min(kappa_rho(rho, x1, x2).unwrap());
                }
            }
            m
        };
        let infs: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|&u| inf_above(u)).collect();
        assert!(infs[0] < infs[1] && infs[1] < infs[2], "ρ={rho}: {infs:?}");
        let c = 2.0 * (1.0 - infs[0]);
        assert!(1.0 - infs[1] <= c / 4.0 && 1.0 - infs[2] <= c / 8.0, "ρ={rho}: {infs:?}");
    }
}

#[test]
fn lambda_rho_is_mixed_derivative_of_log_cdf() {
    let h = 1e-2;
    for rho in [0.3, 0.5, 0.7] {
        let l = |a: f64, b: f64| biv_cdf_oracle(rho, a, b).ln();
        let mixed = |x1: f64, x2: f64, h: f64| {
            (l(x1 + h, x2 + h) - l(x1 + h, x2 - h) - l(x1 - h, x2 + h) + l(x1 - h, x2 - h)) / (4.0 * h * h)
        };
        for x1 in [-1.0, 0.0, 1.0, 2.0] {
            for x2 in [-1.0, 0.0, 1.0, 2.0] {
                // Richardson step removes the h² term
                let fd = (4.0 * mixed(x1, x2, h / 2.0) - mixed(x1, x2, h)) / 3.0;
                let v = lambda_rho(rho, x1, x2).unwrap();
                assert!(v >= 0.0);
                assert!((fd - v).abs() <= 1e-5 * v, "ρ={rho} ({x1},{x2}): {fd} vs {v}");
            }
        }
    }
}

#[test]
fn lambda_rho_box_mass_matches_inclusion_exclusion() {
    let (rho, lo, hi) = (0.5, -1.0, 2.0);
    let l = |a: f64, b: f64| biv_cdf_oracle(rho, a, b).ln();
    let exact = l(hi, hi) - l(lo, hi) - l(hi, lo) + l(lo, lo);
    let k = 200;
    let h = (hi - lo) / k as f64;
    let mut acc = 0.0;
    for i in 0..=k {
        for j in 0..=k {
            let wi = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let wj = if j == 0 || j == k { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            acc += wi * wj * lambda_rho(rho, lo + i as f64 * h, lo + j as f64 * h).unwrap();
        }
    }
    acc *= h * h / 9.0;
    assert!((acc - exact).abs() < 1e-7 * exact, "{acc} vs {exact}");
}

#[test]
fn joint_survival_relations() {
    let n = std_normal();
    for rho in [0.3, 0.5, 0.7] {
        for u in [0.0, 1.0, 3.0] {
            let direct = -2.0 * n.cdf(u).ln() + biv_cdf_oracle(rho, u, u).ln();
            let v = joint_survival_rho(rho, u).unwrap();
            assert!((v - direct).abs() <= 1e-12 + 1e-9 * v, "ρ={rho} u={u}: {v} vs {direct}");
        }
        let r = joint_survival_rho(rho, 5.0).unwrap() / gaussian_joint_sf(rho, 5.0).unwrap();
        assert!((0.9..=1.1).contains(&r), "ρ={rho}: ratio {r}");
    }
}

// independent nested quadrature at high resolution
const SURVIVAL13_ORACLE: [f64; 8] = [
    1.28394e-3, 4.22845e-4, 1.22972e-4, 3.14831e-5, 7.08509e-6, 1.40104e-6, 2.43509e-7, 3.72203e-8,
];

#[test]
fn survival13_matches_reference() {
    let v = survival13(0.5, 0.5, 2.5).unwrap();
    assert!((v / 1.694_535_443_932_192_7e-4 - 1.0).abs() < 1e-4, "{v}");
    let us = linspace(2.0, 4.0, 8);
    for (u, want) in us.iter().zip(SURVIVAL13_ORACLE) {
        let got = survival13(0.5, 0.5, *u).unwrap();
        assert!((got / want - 1.0).abs() < 1e-4, "u={u}: {got} vs {want}");
    }
}

#[test]
fn survival13_shape() {
    let us = linspace(0.0, 4.0, 9);
    let s: Vec<f64> = us.iter().map(|&u| survival13(0.3, 0.7, u).unwrap()).collect();
    for w in s.windows(2) {
        assert!(w[1] < w[0]);
    }
    for (u, v) in us.iter().zip(&s) {
        let swapped = survival13(0.7, 0.3, *u).unwrap();
        assert!((swapped - v).abs() <= 1e-9 * v, "u={u}");
        assert!(*v > 0.0 && *v <= tail1(*u).unwrap());
    }
    assert!(survival13(0.5, 0.5, -1.0).is_err());
    assert!(matches!(survival13(1.2, 0.5, 1.0), Err(Error::RhoOutOfRange(_))));
}

#[test]
fn eta_fits() {
    let n = std_normal();
    let grid = linspace(2.0, 4.5, 8);
    let indep = eta_fit(|u| n.sf(u).powi(2), &grid).unwrap();
    assert!((indep - 0.5).abs() < 1e-9, "{indep}");
    for rho in [0.3, 0.5, 0.7] {
        let e = eta_fit(|u| joint_survival_rho(rho, u).unwrap(), &grid).unwrap();
        assert!((e - eta_biv(rho).unwrap()).abs() < 0.05, "ρ={rho}: {e}");
        assert!(e >= 0.48);
    }
    let e13 = eta_fit(|u| survival13(0.5, 0.5, u).unwrap(), &linspace(2.0, 4.0, 8)).unwrap();
    assert!((e13 - eta13(0.5, 0.5).unwrap()).abs() < 0.06, "{e13}");
    assert!(e13 >= 0.48);
}

#[test]
fn eta_closed_forms_and_errors() {
    assert_eq!(eta_biv(0.5).unwrap(), 0.75);
    for (a, b) in [(0.2, 0.9), (0.5, 0.5), (0.7, 0.4)] {
        assert!((eta13(a, b).unwrap() - eta_biv(a * b).unwrap()).abs() < 1e-15);
    }
    assert!(matches!(eta13(0.0, 0.5), Err(Error::OutOfRange(_))));
    assert!(matches!(eta_fit(|_| 0.0, &linspace(2.0, 4.0, 8)), Err(Error::NonPositiveSurvival)));
    assert!(eta_fit(|u| u, &[1.0, 2.0, 3.0]).is_err());
    assert!(eta_fit(|u| u, &[1.0, 3.0, 2.0, 4.0]).is_err());
}

#[test]
fn coordinate_maps_are_inverse() {
    for x in [-5.0, 0.0, 2.5] {
        assert!((from_positive(to_positive(x)) - x).abs() < 1e-15);
    }
}
