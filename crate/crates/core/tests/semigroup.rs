use proptest::prelude::*;
use std::f64::consts::PI;
use ultrapos_core::estimates::{common_constant, fit_compat_beta, sup_gauge_norm};
use ultrapos_core::lattice::{op_norm, rank_one_positive};
use ultrapos_core::numkernel::{gamma_fn, matrix_exp, spectral_norm};
use ultrapos_core::operators::{build_delta_perturbation, build_kernel_perturbation, build_robin_laplacian, sample_kernel, weighted_symmetry_defect};
use ultrapos_core::positivity::perron_vector;
use ultrapos_core::semigroup::{dyson_phillips, perturbed_evaluator, variation_residual};
use ultrapos_core::{DiscreteOperator, GridSpace, OpNorm, PerturbationFamily, RMat, SemigroupEvaluator, WeightVector};

fn neumann_generator(n: usize) -> DiscreteOperator {
    build_robin_laplacian(&GridSpace::new(-PI, PI, n).unwrap(), |_| 1.0, 0.0, 0.0).unwrap().negated()
}

fn delta_family(n: usize) -> PerturbationFamily {
    let a = neumann_generator(n);
    let b = build_delta_perturbation(&a.space, 0.0, 1.0).unwrap();
    PerturbationFamily::new(a, b).unwrap()
}

fn diagonal(values: &[f64]) -> DiscreteOperator {
    let g = GridSpace::interior(0.0, 1.0, values.len()).unwrap();
    let m = RMat::from_diagonal(&nalgebra::DVector::from_column_slice(values));
    DiscreteOperator::new(m, g, "diag").unwrap()
}

#[test]
fn zero_time_is_identity() {
    let t = SemigroupEvaluator::new(neumann_generator(50)).unwrap();
    let e = t.evaluate(0.0).unwrap();
    assert!((e - RMat::identity(52, 52)).amax() <= 1e-12);
    assert!(t.evaluate(-1.0).is_err());
}

#[test]
fn neumann_heat_relaxes_to_the_mean() {
    let a = neumann_generator(100);
    let g = a.space.clone();
    let t = SemigroupEvaluator::new(a).unwrap();
    let limit = rank_one_positive(&WeightVector::ones(g.size()), &g).unwrap() / (2.0 * PI);
    // the spectral gap is 1/4, so T(t) - limit ~ e^{-t/4}
    let d50 = (t.evaluate(50.0).unwrap() - &limit).amax();
    assert!(d50 <= 2.0 * (-12.5f64).exp() && d50 >= 1e-8, "{d50}");
    let d100 = (t.evaluate(100.0).unwrap() - &limit).amax();
    assert!(d100 <= 1e-8, "{d100}");
}

#[test]
fn diagonal_generator_is_entrywise() {
    let vals = [-0.5, -1.0, 2.0];
    let t = SemigroupEvaluator::new(diagonal(&vals)).unwrap();
    let e = t.evaluate(0.7).unwrap();
    for (i, v) in vals.iter().enumerate() {
        assert!((e[(i, i)] - (0.7 * v).exp()).abs() <= 1e-15 * e[(i, i)].max(1.0));
    }
}

#[test]
fn unperturbed_dyson_series_is_the_semigroup() {
    let a = neumann_generator(40);
    let b = DiscreteOperator::zero(&a.space);
    let r = dyson_phillips(&a, &b, 0.5, 6, 16, None).unwrap();
    for s in &r.partial_terms[1..] {
        assert_eq!(s.amax(), 0.0);
    }
    let t = SemigroupEvaluator::new(a).unwrap().evaluate(0.5).unwrap();
    assert!((&r.sum - t).amax() <= 1e-14);
}

#[test]
fn dyson_series_on_commuting_diagonals() {
    let av = [-1.0, -2.0, -3.0];
    let bv = [0.5, 0.2, -0.4];
    let (a, b) = (diagonal(&av), diagonal(&bv));
    let t = 0.5;
    let k = 4;
    let r = dyson_phillips(&a, &b, t, k, 256, None).unwrap();
    let sum: RMat = r.partial_terms.iter().fold(RMat::zeros(3, 3), |acc, s| acc + s);
    assert_eq!(sum, r.sum);
    for i in 0..3 {
        // S_j(t) = e^{ta} (tb)^j / j!
        let closed: f64 = (0..=k).map(|j| (t * bv[i]).powi(j as i32) / gamma_fn(j as f64 + 1.0).unwrap()).sum::<f64>()
            * (t * av[i]).exp();
        assert!((r.sum[(i, i)] - closed).abs() <= 1e-7, "{i}: {} vs {closed}", r.sum[(i, i)]);
        let full = (t * (av[i] + bv[i])).exp();
        let tail = full - closed;
        assert!(((full - r.sum[(i, i)]) - tail).abs() <= 1e-7);
    }
}

#[test]
fn dyson_series_converges_to_the_oracle() {
    let fam = delta_family(100);
    let b = fam.perturbation(0.25);
    let r = dyson_phillips(&fam.base, &b, 0.5, 10, 64, None).unwrap();
    assert!(r.oracle_error <= 1e-6, "{}", r.oracle_error);
    let k0 = r.ratio_index.expect("term norms should decay geometrically");
    assert!(r.partial_errors[k0 + 1] < r.partial_errors[k0]);
    // decreasing until the series error meets the quadrature error
    for w in r.partial_errors.windows(2).skip(k0) {
        assert!(w[1] <= w[0] || w[1] <= 1e-6, "{:?}", r.partial_errors);
    }
}

#[test]
fn dyson_terms_obey_the_gamma_bound() {
    let fam = delta_family(80);
    let kappa = 0.25;
    let a = &fam.base;
    let b = fam.perturbation(kappa);
    let u = perron_vector(a).unwrap();
    let t = SemigroupEvaluator::new(a.clone()).unwrap();
    let compat = fit_compat_beta(&b, &t, [1e-3, 1.0], 20, &u).unwrap();
    let samples = ultrapos_core::estimates::geometric_grid(1e-3, 1.0, 20);
    let c = common_constant(&[compat.c_hat, sup_gauge_norm(&t, &samples, &u).unwrap()]);
    let beta = compat.beta_hat;
    let g = gamma_fn(1.0 - beta).unwrap();
    for tt in [0.25, 0.5, 1.0] {
        let r = dyson_phillips(a, &b, tt, 6, 32, Some(&u)).unwrap();
        for (k, s) in r.term_norms_gauge.iter().enumerate() {
            let e = k as f64 * (1.0 - beta);
            let bound = c.powi(k as i32 + 1) * g.powi(k as i32) * tt.powf(e) / gamma_fn(e + 1.0).unwrap();
            assert!(*s <= bound * (1.0 + 1e-6), "t={tt} k={k}: {s} > {bound}");
        }
    }
}

#[test]
fn variation_residual_examples() {
    let a = neumann_generator(60);
    let zero = DiscreteOperator::zero(&a.space);
    assert!(variation_residual(&a, &zero, 0.5, 32).unwrap() <= 1e-12);

    let fam = delta_family(200);
    let b = fam.perturbation(0.25);
    let res: Vec<f64> = [32, 64, 128, 256].iter().map(|&p| variation_residual(&fam.base, &b, 0.5, p).unwrap()).collect();
    for w in res.windows(2) {
        assert!(w[1] < w[0], "{res:?}");
    }
    assert!(res[3] <= 1e-7, "{res:?}");
}

#[test]
fn perturbed_evaluator_basics() {
    let fam = delta_family(60);
    let t0 = perturbed_evaluator(&fam, 0.0, 1.0).unwrap().evaluate(1.0).unwrap();
    let base = SemigroupEvaluator::new(fam.base.clone()).unwrap().evaluate(1.0).unwrap();
    assert_eq!(t0, base);
    assert!(perturbed_evaluator(&fam, 0.5, 0.1).is_err());

    let w = fam.base.space.weights.clone();
    let mut quotients = Vec::new();
    for k in [0.1, 0.05, 0.01, 1e-3, -1e-3, -0.1] {
        let tk = perturbed_evaluator(&fam, k, 0.1).unwrap().evaluate(1.0).unwrap();
        quotients.push(op_norm(&(tk - &base), OpNorm::L2ToL2, &w, None).unwrap() / k.abs());
    }
    let c = quotients.iter().copied().fold(0.0, f64::max);
    assert!(c.is_finite() && c < 100.0, "{quotients:?}");
}

#[test]
fn symmetric_families_stay_symmetric() {
    let a = neumann_generator(50);
    let k = sample_kernel(&a.space, |x, y| (-(x - y) * (x - y)).exp() - 0.5);
    let b = build_kernel_perturbation(&a.space, &k, true).unwrap();
    let fam = PerturbationFamily::new(a, b).unwrap();
    for kappa in [-0.5, 0.3, 1.0] {
        let t = perturbed_evaluator(&fam, kappa, 1.0).unwrap().evaluate(0.4).unwrap();
        let w = &fam.base.space.weights;
        assert!(weighted_symmetry_defect(&t, w) <= 1e-10);
    }
}

#[test]
fn direct_exponential_agrees_with_evaluator() {
    let fam = delta_family(60);
    let g = fam.assemble(0.3);
    let t = SemigroupEvaluator::new(g.clone()).unwrap().evaluate(0.6).unwrap();
    let d = matrix_exp(&g.matrix, 0.6).unwrap();
    assert!(spectral_norm(&(&t - &d)) <= 1e-10 * spectral_norm(&d));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evaluator_semigroup_law(s in 0.0f64..1.0, t in 0.0f64..1.0, kappa in -1.0f64..1.0) {
        let fam = delta_family(30);
        let ev = SemigroupEvaluator::new(fam.assemble(kappa)).unwrap();
        let full = ev.evaluate(s + t).unwrap();
        let prod = ev.evaluate(s).unwrap() * ev.evaluate(t).unwrap();
        prop_assert!(spectral_norm(&(&full - prod)) <= 1e-9 * spectral_norm(&full).max(1.0));
    }
}
