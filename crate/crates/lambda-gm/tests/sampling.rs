mod common;

use lambda_gm::rays::{MaxLinearSpec, PathMode, Ray, RayMeasure};
use lambda_gm::sampling::*;
use lambda_gm::{Dag, Error, VertexSet};
use rand::Rng;

fn within_3se(count: usize, n: usize, p: f64) -> bool {
    let phat = count as f64 / n as f64;
    (phat - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

fn chain3(alpha: f64) -> MaxLinearSpec {
    let dag = Dag::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
    MaxLinearSpec::frechet(dag, &[((0, 1), 0.8), ((1, 2), 1.5)], vec![1.0, 0.7, 1.2], alpha).unwrap()
}

#[test]
fn frechet_cdf() {
    let spec = MaxLinearSpec::frechet(Dag::from_arcs(1, &[]).unwrap(), &[], vec![1.0], 1.0).unwrap();
    let s = sample_maxlinear(&spec, 100_000, 11).unwrap();
    for x in [1.0, 2.0] {
        let k = s.column(0).iter().filter(|&&v| v <= x).count();
        assert!(within_3se(k, s.n(), (-1.0 / x).exp()), "x = {x}");
    }
}

#[test]
fn structural_equation_exact() {
    let mut rng = common::rng(5);
    for _ in 0..10 {
        let d = rng.gen_range(2..7);
        let spec = common::random_maxlinear(&mut rng, d);
        let (x, eps) = sample_maxlinear_with_innovations(&spec, 2000, rng.gen()).unwrap();
        for (row, e) in x.rows().zip(eps.rows()) {
            for i in 0..d {
                let mut rhs = spec.diag()[i] * e[i];
                for p in spec.dag.parents(i).iter() {
                    rhs = rhs.max(spec.beta(i, p) * row[p]);
                }
                assert_eq!(row[i], rhs);
            }
        }
    }
}

#[test]
fn chain_defining_equation() {
    let dag = Dag::from_arcs(2, &[(0, 1)]).unwrap();
    let spec = MaxLinearSpec::frechet(dag, &[((0, 1), 2.0)], vec![1.0, 1.0], 1.0).unwrap();
    let (x, eps) = sample_maxlinear_with_innovations(&spec, 5000, 3).unwrap();
    for (r, e) in x.rows().zip(eps.rows()) {
        assert_eq!(r[1], (2.0 * r[0]).max(e[1]));
        assert!(r[1] >= 2.0 * r[0]);
    }
}

#[test]
fn seed_determinism_across_thread_counts() {
    let spec = common::random_maxlinear(&mut common::rng(9), 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let x = sample_maxlinear(&spec, 10_000, 42).unwrap();
            let m = spec.from_maxlinear().unwrap();
            let y = sample_pareto_conditional(&m, 2, 10_000, 42).unwrap();
            let p = empirical_ci_test(&y, VertexSet::singleton(0), VertexSet::singleton(4), VertexSet::singleton(2), &CiTestOptions::default())
                .unwrap();
            (x, y, p)
        })
    };
    assert_eq!(run(1), run(4));
    assert_ne!(sample_maxlinear(&spec, 100, 1).unwrap(), sample_maxlinear(&spec, 100, 2).unwrap());
}

#[test]
fn max_id_cdf_matches_exponent_measure() {
    let spec = chain3(1.0);
    let m = spec.from_maxlinear().unwrap();
    let s = sample_maxlinear(&spec, 100_000, 77).unwrap();
    for x in [[1.0, 1.0, 1.0], [2.0, 1.0, 3.0], [0.5, 2.0, 2.0], [4.0, 4.0, 6.0], [1.5, 0.8, 5.0]] {
        let p = (-m.exceedance_any(VertexSet::full(3), &x)).exp();
        let k = s.rows().filter(|r| r.iter().zip(&x).all(|(a, b)| a <= b)).count();
        assert!(within_3se(k, s.n(), p), "{x:?}: {} vs {p}", k as f64 / s.n() as f64);
    }
}

#[test]
fn pareto_conditional_single_ray() {
    let m = RayMeasure::new(2, 2.0, vec![Ray { dir: vec![0.5, 1.0], c: 3.0 }]).unwrap();
    let s = sample_pareto_conditional(&m, 0, 50_000, 1).unwrap();
    let col = s.column(0);
    assert!(col.iter().all(|&y| y >= 1.0));
    for y in [1.5f64, 3.0] {
        let k = col.iter().filter(|&&v| v > y).count();
        assert!(within_3se(k, s.n(), y.powf(-2.0)));
    }
    assert!(s.rows().all(|r| (r[1] - 2.0 * r[0]).abs() <= 1e-12 * r[1]));
}

#[test]
fn pareto_conditional_orthogonal_rays() {
    let m = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.0], c: 1.0 }, Ray { dir: vec![0.0, 1.0], c: 1.0 }]).unwrap();
    let s = sample_pareto_conditional(&m, 0, 10_000, 2).unwrap();
    assert!(s.rows().all(|r| r[0] >= 1.0 && r[1] == 0.0));
    let m1 = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.0], c: 1.0 }]).unwrap();
    assert!(matches!(sample_pareto_conditional(&m1, 1, 10, 0), Err(Error::UnchargedDirection(1))));
}

#[test]
fn pareto_conditional_ray_frequencies() {
    let m = RayMeasure::new(2, 1.0, vec![Ray { dir: vec![1.0, 0.0], c: 1.0 }, Ray { dir: vec![2.0, 1.0], c: 1.0 }]).unwrap();
    let s = sample_pareto_conditional(&m, 0, 30_000, 3).unwrap();
    let k = s.rows().filter(|r| r[1] > 0.0).count();
    assert!(within_3se(k, s.n(), 2.0 / 3.0));
}

#[test]
fn chi_comonotone_and_independent() {
    let rows: Vec<Vec<f64>> = (0..10_000).map(|i| vec![i as f64, i as f64]).collect();
    let s = Samples::from_rows(&rows).unwrap();
    assert_eq!(empirical_chi(&s, 0, 1, 0.95).unwrap().chi, 1.0);

    let spec = MaxLinearSpec::frechet(Dag::from_arcs(2, &[]).unwrap(), &[], vec![1.0, 1.0], 1.0).unwrap();
    let s = sample_maxlinear(&spec, 1_000_000, 4).unwrap();
    assert!(empirical_chi(&s, 0, 1, 0.995).unwrap().chi < 0.02);
}

#[test]
fn chi_guards() {
    let s = Samples::from_rows(&vec![vec![1.0, 2.0]; 100]).unwrap();
    assert!(matches!(empirical_chi(&s, 0, 1, 0.95), Err(Error::TooFewSamples { .. })));
    let s = Samples::from_rows(&vec![vec![1.0, 2.0]; 10_000]).unwrap();
    assert!(empirical_chi(&s, 0, 1, 0.5).is_err());
}

#[test]
fn chi_matches_rays_on_chain() {
    let spec = chain3(1.0);
    let m = spec.from_maxlinear().unwrap().standardize_margins().unwrap();
    let s = sample_maxlinear(&spec, 1_000_000, 8).unwrap();
    for (i, j) in [(0, 1), (2, 1), (0, 2)] {
        let e = empirical_chi(&s, i, j, 0.995).unwrap();
        let exact = m.chi(i, j).unwrap();
        assert!((e.chi - exact).abs() <= 3.0 * e.se, "{i}{j}: {} ± {} vs {exact}", e.chi, e.se);
    }
}

#[test]
fn ci_test_detects_identity() {
    let mut rng = common::rng(1);
    let rows: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let y: f64 = rng.gen();
            vec![y, y, rng.gen()]
        })
        .collect();
    let s = Samples::from_rows(&rows).unwrap();
    let r = empirical_ci_test(&s, VertexSet::singleton(0), VertexSet::singleton(1), VertexSet::EMPTY, &CiTestOptions::default()).unwrap();
    assert!(r.p_value < 0.01);
}

#[test]
fn ci_test_calibration() {
    let opts = |seed| CiTestOptions { permutations: 199, seed, ..CiTestOptions::default() };
    let mut rejections = 0;
    for seed in 0..100 {
        let mut rng = common::rng(1000 + seed);
        let rows: Vec<Vec<f64>> = (0..10_000).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
        let s = Samples::from_rows(&rows).unwrap();
        let r = empirical_ci_test(&s, VertexSet::singleton(0), VertexSet::singleton(1), VertexSet::singleton(2), &opts(seed)).unwrap();
        rejections += (r.p_value < 0.05) as usize;
    }
    assert!((1..=12).contains(&rejections), "{rejections} rejections");
}

#[test]
fn ci_test_chain_consistent_with_oracle() {
    let m = chain3(1.0).from_maxlinear().unwrap();
    let (a, b, c) = (VertexSet::singleton(0), VertexSet::singleton(2), VertexSet::singleton(1));
    assert!(m.ci_oracle(a, b, c).unwrap().verdict);
    let mut accepted = 0;
    for seed in 0..100 {
        let s = sample_pareto_conditional(&m, 1, 10_000, seed).unwrap();
        let opts = CiTestOptions { permutations: 199, seed, scale_by_conditioning: true, ..CiTestOptions::default() };
        accepted += (empirical_ci_test(&s, a, b, c, &opts).unwrap().p_value > 0.01) as usize;
    }
    assert!(accepted >= 95, "{accepted}/100");
}

#[test]
fn sum_mode_rays_share_supports() {
    let spec = common::random_maxlinear(&mut common::rng(3), 5);
    let (mx, sm) = (spec.to_rays(PathMode::Max).unwrap(), spec.to_rays(PathMode::Sum).unwrap());
    let support = |m: &RayMeasure| -> Vec<Vec<bool>> { m.rays().iter().map(|r| r.dir.iter().map(|&w| w > 0.0).collect()).collect() };
    assert_eq!(support(&mx), support(&sm));
}
