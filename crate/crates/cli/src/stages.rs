//! The certificate pipelines behind each subcommand.

use crate::config::ExperimentConfig;
use crate::report::{StageRecord, Table};
use crate::setup::{build, l2_norm, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::time::Instant;
use ultrapos_core::estimates::{
    check_admissibility, check_interpolation_chain, check_lemma_mittag_leffler, check_theorem_preserved_ultra,
    common_constant, fit_compat_beta, fit_operator_decay, fit_ultracontractivity, geometric_grid, sup_gauge_norm,
};
use ultrapos_core::positivity::{
    detect_nonpositivity, individual_positivity_time, perron_vector, perturbed_positivity_sweep, spectral_bound,
    spectral_gap, uniform_positivity_certificate,
};
use ultrapos_core::semigroup::{dyson_phillips_refined, variation_residual};
use ultrapos_core::spectral::{
    analyticity_test, beta_kappa, graph_gap, neumann_resolvent_check, spearman, spectral_projection,
    track_eigenpair,
};
use ultrapos_core::{
    DiscreteOperator, Error, OpNorm, RMat, Result, SampleGrid, SemigroupEvaluator, Verdict, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Ultra,
    Dyson,
    Spectrum,
    Positivity,
    Gap,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ultra, Stage::Dyson, Stage::Spectrum, Stage::Positivity, Stage::Gap];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ultra => "ultra",
            Stage::Dyson => "dyson",
            Stage::Spectrum => "spectrum",
            Stage::Positivity => "positivity",
            Stage::Gap => "gap",
        }
    }
}

/// Checks, JSON summary and tables accumulated by one stage.
#[derive(Default)]
pub struct Outcome {
    pub checks: Vec<(String, Verdict)>,
    pub data: serde_json::Map<String, serde_json::Value>,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn check(&mut self, name: &str, v: Verdict) {
        self.checks.push((name.into(), v));
    }

    fn put(&mut self, key: &str, v: serde_json::Value) {
        self.data.insert(key.into(), v);
    }

    fn verdict(&self) -> Verdict {
        self.checks.iter().fold(Verdict::Pass, |a, (_, v)| a.and(*v))
    }
}

pub fn run_stage(stage: Stage, cfg: &ExperimentConfig) -> StageRecord {
    let start = Instant::now();
    let result = match stage {
        Stage::Ultra => ultra(cfg),
        Stage::Dyson => dyson(cfg),
        Stage::Spectrum => spectrum(cfg),
        Stage::Positivity => positivity(cfg),
        Stage::Gap => gap(cfg),
    };
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(out) => StageRecord {
            stage: stage.name().into(),
            verdict: Some(out.verdict()),
            error: None,
            numerical_abort: false,
            seconds,
            checks: out.checks.clone(),
            data: serde_json::Value::Object(out.data),
            tables: out.tables,
        },
        Err(e) => {
            log::error!("stage {} aborted: {e}", stage.name());
            StageRecord {
                stage: stage.name().into(),
                verdict: None,
                error: Some(e.to_string()),
                numerical_abort: e.is_numerical(),
                seconds,
                checks: Vec::new(),
                data: serde_json::Value::Null,
                tables: Vec::new(),
            }
        }
    }
}

fn tolerance_alpha(order: u32) -> f64 {
    // the higher-order exponent is smaller and its fit wider
    if order >= 4 { 0.08 } else { 0.05 }
}

fn ultra(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let p = build(cfg, cfg.ultra_n.unwrap_or(cfg.n))?;
    let heat = SemigroupEvaluator::new(p.generator.clone())?;
    let window = [cfg.ultra_t_lo, cfg.ultra_t_hi];
    let base = fit_ultracontractivity(&heat, window, cfg.ultra_samples)?;
    out.check("ultra_fit", base.verdict);
    out.put("ultra_fit", serde_json::to_value(&base).unwrap());

    let interp = check_interpolation_chain(&heat, cfg.interpolation_theta, &base)?;
    out.check("interpolation", interp.verdict);
    out.put("interpolation", serde_json::to_value(&interp).unwrap());

    let mut table = Table::new("ultra", &["t", "norm_l2_sup", "norm_perturbed_l2_sup", "interp_norm", "interp_bound"]);
    let mut perturbed_norms = vec![f64::NAN; base.t_samples.len()];

    if let Some(b) = &p.direction {
        let family = p.family()?;
        if cfg.kappa.abs() <= 1.0 {
            let pres = check_theorem_preserved_ultra(&family, cfg.kappa, &base)?;
            let tol = tolerance_alpha(p.generator.order);
            let ok = pres.alpha_shift.abs() <= tol && pres.ratio <= 10.0;
            out.check("preserved_exponent", Verdict::from_bool(ok).and(pres.perturbed.verdict));
            perturbed_norms = pres.perturbed.norms.clone();
            out.put("preserved_exponent", serde_json::to_value(&pres).unwrap());
            out.put("preserved_tolerance", json!(tol));
        } else {
            log::warn!("|kappa| > 1; skipping the preserved-exponent refit");
        }

        let u = perron_vector(&p.generator)?;
        let compat = fit_compat_beta(b, &heat, [cfg.compat_t_lo, cfg.compat_t_hi], cfg.ultra_samples, &u)?;
        out.put("compat", serde_json::to_value(&compat).unwrap());
        let mut ctab = Table::new("compat", &["t", "norm_gauge", "scaled"]);
        for i in 0..compat.t_samples.len() {
            ctab.push([compat.t_samples[i].into(), compat.norms[i].into(), compat.scaled[i].into()]);
        }
        out.tables.push(ctab);

        let adm = check_admissibility(&b.scaled(cfg.kappa), &heat, cfg.admissibility_t0, cfg.admissibility_panels)?;
        out.check("admissibility", Verdict::from_bool(adm.passes));
        out.put("admissibility", serde_json::to_value(&adm).unwrap());

        let ts = geometric_grid(cfg.growth_t_lo, 1.0, cfg.growth_samples);
        let sup = sup_gauge_norm(&heat, &ts, &u)?;
        let c = common_constant(&[base.c_hat, compat.c_hat, sup]);
        let growth = check_lemma_mittag_leffler(&family, cfg.kappa, c, compat.beta_hat, &ts, &u)?;
        out.check("mittag_leffler", growth.verdict);
        let mut wtab = Table::new("growth", &["t", "norm_gauge", "bound", "margin"]);
        for i in 0..ts.len() {
            wtab.push([ts[i].into(), growth.norms[i].into(), growth.bounds[i].into(), growth.margins[i].into()]);
        }
        out.tables.push(wtab);
        out.put("mittag_leffler", serde_json::to_value(&growth).unwrap());
        out.put("sup_gauge_norm", json!(sup));

        if cfg.perturbation == crate::config::PerturbationKind::Fractional {
            let frac = fit_operator_decay(&heat, Some(b), OpNorm::L2ToL2, None, window, cfg.ultra_samples)?;
            let slope = -frac.alpha_hat;
            let ok = (slope + cfg.fractional_power).abs() <= 0.05;
            out.check("fractional_decay", Verdict::from_bool(ok).and(frac.verdict));
            out.put("fractional_decay", serde_json::to_value(&frac).unwrap());
        }
    }

    for i in 0..base.t_samples.len() {
        table.push([
            base.t_samples[i].into(),
            base.norms[i].into(),
            perturbed_norms[i].into(),
            interp.norms[i].into(),
            interp.bounds[i].into(),
        ]);
    }
    out.tables.insert(0, table);
    Ok(out)
}

fn non_increasing(v: &[f64], floor: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor)
}

fn dyson(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let p = build(cfg, cfg.n)?;
    let b = match &p.direction {
        Some(b) => b.scaled(cfg.kappa),
        None => DiscreteOperator::zero(p.space()),
    };
    let u = perron_vector(&p.generator)?;
    let runs = dyson_phillips_refined(
        &p.generator,
        &b,
        cfg.dyson_t,
        cfg.dyson_terms,
        cfg.dyson_panels,
        cfg.dyson_max_panels,
        cfg.dyson_tol,
        Some(&u),
    )?;
    let last = runs.last().expect("at least one run");
    // errors below this are at the rounding level of e^{tA}
    let floor = (10.0 * f64::EPSILON * cfg.dyson_t * l2_norm(&p.generator)).max(1e-11);
    let errors: Vec<f64> = runs.iter().map(|r| r.oracle_error).collect();
    let mut rtab = Table::new("dyson", &["panels", "oracle_error"]);
    for r in &runs {
        rtab.push([r.panels.into(), r.oracle_error.into()]);
    }
    let mut ttab = Table::new("dyson-terms", &["k", "norm_l2", "norm_gauge", "partial_error"]);
    for k in 0..last.term_norms_l2.len() {
        ttab.push([k.into(), last.term_norms_l2[k].into(), last.term_norms_gauge[k].into(), last.partial_errors[k].into()]);
    }
    out.check("oracle_error", Verdict::from_bool(last.oracle_error <= 1e-6));
    out.check("oracle_refinement", Verdict::from_bool(non_increasing(&errors, floor)));
    out.put(
        "series",
        json!({
            "t": last.t,
            "k": last.k,
            "panels": last.panels,
            "oracle_error": last.oracle_error,
            "ratio_index": last.ratio_index,
            "term_norms_l2": last.term_norms_l2,
            "term_norms_gauge": last.term_norms_gauge,
            "partial_errors": last.partial_errors,
            "refinement_errors": errors,
            "rounding_floor": floor,
        }),
    );

    let mut vtab = Table::new("variation", &["panels", "residual"]);
    let mut residuals = Vec::new();
    for &panels in &cfg.variation_panels {
        let r = variation_residual(&p.generator, &b, cfg.dyson_t, panels)?;
        vtab.push([panels.into(), r.into()]);
        residuals.push(r);
    }
    if let Some(&final_r) = residuals.last() {
        out.check("variation_residual", Verdict::from_bool(final_r <= 1e-7));
        out.check("variation_refinement", Verdict::from_bool(non_increasing(&residuals, floor)));
    }
    out.put("variation", json!({ "panels": cfg.variation_panels, "residuals": residuals }));
    out.tables.extend([rtab, ttab, vtab]);
    Ok(out)
}

/// Distance from z to the nearest dense eigenvalue of the assembled operator.
fn dense_distance(op: &DiscreteOperator, z: C64) -> Result<f64> {
    Ok(op.eigen()?.values.iter().map(|l| (l - z).norm()).fold(f64::INFINITY, f64::min))
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let p = build(cfg, cfg.spectral_n.unwrap_or(cfg.n))?;
    let family = p.family()?;
    let lambda0 = match cfg.contour_center {
        Some(c) => c,
        None => spectral_bound(&p.generator)?,
    };
    let u = perron_vector(&p.generator)?;
    let grid = cfg.kappa_grid();
    let track = track_eigenpair(&family, lambda0, cfg.contour_radius, cfg.contour_nodes, &grid, u.values(), &u)?;

    let mut ttab = Table::new("track", &["kappa", "re_lambda", "im_lambda", "rank", "min_ratio", "beta_kappa"]);
    let mut dense = Vec::with_capacity(grid.len());
    for (i, row) in track.rows().iter().enumerate() {
        ttab.push([
            row.kappa.into(),
            row.re_lambda.into(),
            row.im_lambda.into(),
            row.rank.into(),
            row.min_ratio.into(),
            row.beta_kappa.into(),
        ]);
        dense.push(dense_distance(&family.assemble(grid[i]), track.lambda[i])?);
    }
    let max_im = track.lambda.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
    let max_dense = dense.iter().copied().fold(0.0, f64::max);
    let symmetric = family.base.is_symmetric_l2 && family.direction.is_symmetric_l2;
    out.check("simplicity", Verdict::from_bool(track.simplicity.iter().all(|r| *r == 1)));
    if symmetric {
        out.check("real_eigenvalue", Verdict::from_bool(max_im <= 1e-10));
    }
    out.check("dense_agreement", Verdict::from_bool(max_dense <= 1e-8));
    out.check("eigenvector_bound", Verdict::from_bool(track.delta_empirical.is_some()));

    // β_κ at the smallest grid |κ| against the largest
    let (mut lo, mut hi) = (None::<(f64, f64)>, None::<(f64, f64)>);
    for (k, b) in grid.iter().zip(&track.beta_kappa) {
        if lo.map_or(true, |(a, _)| k.abs() < a) {
            lo = Some((k.abs(), *b));
        }
        if hi.map_or(true, |(a, _)| k.abs() > a) {
            hi = Some((k.abs(), *b));
        }
    }
    let beta_ratio = match (lo, hi) {
        (Some((_, l)), Some((_, h))) if h > 0.0 => Some(l / h),
        _ => None,
    };
    out.put(
        "track",
        json!({
            "lambda0": lambda0,
            "radius": cfg.contour_radius,
            "rows": track.rows(),
            "projection_shift": track.projection_shift,
            "eigvec_imag": track.eigvec_imag,
            "dense_distance": dense,
            "c0": track.c0,
            "delta_empirical": track.delta_empirical,
            "beta_ratio_small_to_large": beta_ratio,
            "max_imag_lambda": max_im,
        }),
    );

    let an = analyticity_test(
        &family,
        lambda0,
        cfg.contour_radius,
        cfg.analyticity_rho,
        cfg.analyticity_samples,
        cfg.analyticity_terms,
        &u,
    )?;
    out.check("analyticity", an.verdict);
    let mut atab = Table::new("taylor", &["k", "coefficient_norm"]);
    for (k, v) in an.taylor_norms.iter().enumerate() {
        atab.push([k.into(), (*v).into()]);
    }
    out.put("analyticity", serde_json::to_value(&an).unwrap());
    out.tables.extend([ttab, atab]);
    Ok(out)
}

fn sample_grid(cfg: &ExperimentConfig, gen: &DiscreteOperator) -> Result<SampleGrid> {
    let t_max = match cfg.positivity_t_max {
        Some(t) => t,
        None => 10.0 / spectral_gap(gen)?,
    };
    Ok(SampleGrid {
        t_min: cfg.positivity_t_min,
        t_max,
        geometric: cfg.positivity_geometric,
        uniform: cfg.positivity_uniform,
    })
}

fn positivity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let p = build(cfg, cfg.n)?;
    let heat = SemigroupEvaluator::new(p.generator.clone())?;
    let u = perron_vector(&p.generator)?;
    let grid = sample_grid(cfg, &p.generator)?;
    let cert = uniform_positivity_certificate(&heat, &u, &grid)?;
    out.check("uniform_certificate", cert.verdict);

    let neg = detect_nonpositivity(&heat, &cfg.nonpositivity_probes)?;
    if cfg.expect_nonpositive {
        out.check("negative_entry_found", Verdict::from_bool(neg.is_some()));
    }
    if let (Some(n), Some(tau)) = (neg, cert.tau) {
        out.check("pass_range_disjoint", Verdict::from_bool(n.t < tau));
    }

    let n = p.generator.dim();
    let mid = n / 2;
    let spike: Vec<f64> = (0..n).map(|i| if i == mid { 1.0 / p.space().weights[i] } else { 0.0 }).collect();
    let tests = vec![vec![1.0; n], spike, u.values().to_vec()];
    let taus = individual_positivity_time(&heat, &u, &tests, &grid)?;

    let mut ptab = Table::new("positivity", &["kappa", "t", "ratio", "margin"]);
    let mut sweep_json = serde_json::Value::Null;
    match &p.direction {
        Some(b) if b.is_symmetric_l2 => {
            let sweep = perturbed_positivity_sweep(&p.family()?, &u, &cfg.kappa_grid(), &grid)?;
            let ok = sweep.delta_empirical.is_some();
            out.check("perturbed_sweep", Verdict::from_bool(ok));
            for (k, c) in sweep.kappas.iter().zip(&sweep.certificates) {
                for i in 0..c.t_samples.len() {
                    ptab.push([(*k).into(), c.t_samples[i].into(), c.ratios[i].into(), c.margins[i].into()]);
                }
            }
            sweep_json = json!({
                "kappas": sweep.kappas,
                "delta_empirical": sweep.delta_empirical,
                "perturbation_l2_norm": l2_norm(b),
                "tau": sweep.certificates.iter().map(|c| c.tau).collect::<Vec<_>>(),
                "epsilon": sweep.certificates.iter().map(|c| c.epsilon).collect::<Vec<_>>(),
                "verdicts": sweep.certificates.iter().map(|c| c.verdict).collect::<Vec<_>>(),
            });
        }
        Some(_) => {
            log::warn!("perturbation is not symmetric in L2; sweep skipped");
            out.check("perturbed_sweep", Verdict::Inconclusive);
        }
        None => {}
    }
    if ptab.rows.is_empty() {
        for i in 0..cert.t_samples.len() {
            ptab.push([0.0.into(), cert.t_samples[i].into(), cert.ratios[i].into(), cert.margins[i].into()]);
        }
    }
    out.put("certificate", serde_json::to_value(&cert).unwrap());
    out.put("negative_entry", serde_json::to_value(neg).unwrap());
    out.put("individual_tau", json!({ "vectors": ["constant", "spike", "reference"], "tau": taus }));
    out.put("sweep", sweep_json);
    out.put("grid", serde_json::to_value(grid).unwrap());
    out.tables.push(ptab);
    Ok(out)
}

fn random_operator(rng: &mut ChaCha8Rng, like: &DiscreteOperator, symmetric: bool) -> Result<DiscreteOperator> {
    let n = like.dim();
    let w = &like.space.weights;
    let mut m = RMat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    if symmetric {
        // symmetric in the weighted inner product: W M symmetric
        let s = RMat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        m = RMat::from_fn(n, n, |i, j| s[(i, j)] / w[i]);
    }
    DiscreteOperator::new(m, like.space.clone(), "random")
}

fn gap(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let p: Problem = build(cfg, cfg.gap_dim)?;
    let a = &p.generator;
    let w = a.space.weights.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lambda0 = match cfg.contour_center {
        Some(c) => c,
        None => spectral_bound(a)?,
    };
    let center = C64::new(lambda0, 0.0);
    let r = cfg.contour_radius;

    let mut gtab = Table::new("gap", &["instance", "b_norm", "graph_gap", "neumann_beta", "neumann_slack"]);
    let mut graph_violations = 0;
    let mut neumann_violations = 0;
    for i in 0..cfg.gap_instances {
        let raw = random_operator(&mut rng, a, false)?;
        let target = rng.random_range(0.01..2.0);
        let b = raw.scaled(target / l2_norm(&raw));
        let g = graph_gap(a, &b)?;
        let bn = l2_norm(&b);
        if g.gap > bn * (1.0 + 1e-10) {
            graph_violations += 1;
        }

        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let lambda = center + C64::from_polar(r, theta);
        let raw = random_operator(&mut rng, a, false)?;
        let unit = neumann_unit(&raw, a, lambda, &w)?;
        let want = rng.random_range(0.1..0.9);
        let nb = raw.scaled(want / unit);
        let chk = neumann_resolvent_check(&a.matrix, &nb.matrix, lambda, &w, 20)?;
        if chk.verdict != Verdict::Pass {
            neumann_violations += 1;
        }
        gtab.push([i.into(), bn.into(), g.gap.into(), chk.beta.into(), chk.slack.into()]);
    }
    out.check("graph_gap_bound", Verdict::from_bool(graph_violations == 0));
    out.check("neumann_series", Verdict::from_bool(neumann_violations == 0));

    // ‖P_B − P_0‖ along B_j = 2^{-j} B_0 with β_{B_0} = 1/2. The configured
    // direction may commute with A (fractional powers do), which pins P_B,
    // so B_0 is a random symmetric operator.
    let dir = random_operator(&mut rng, a, true)?;
    let unit_beta = beta_kappa(&dir, a, center, r, cfg.contour_nodes, 1.0)?;
    let p0 = spectral_projection(a, center, r, cfg.contour_nodes)?;
    let mut betas = Vec::new();
    let mut shifts = Vec::new();
    let mut trend = Table::new("gap-trend", &["step", "scale", "beta_b", "projection_shift"]);
    for j in 0..cfg.gap_sequence {
        let s = 0.5 / unit_beta * 0.5f64.powi(j as i32);
        let sum = a.sum(&dir.scaled(s))?;
        let pb = spectral_projection(&sum, center, r, cfg.contour_nodes)?;
        let shift = ultrapos_core::lattice::op_norm(&(&pb.matrix - &p0.matrix), OpNorm::L2ToL2, &w, None)?;
        let beta = s * unit_beta;
        trend.push([j.into(), s.into(), beta.into(), shift.into()]);
        betas.push(beta);
        shifts.push(shift);
    }
    let rho = if betas.len() >= 2 { spearman(&betas, &shifts)? } else { f64::NAN };
    out.check("projection_trend", Verdict::from_bool(rho >= 0.9));
    out.put(
        "summary",
        json!({
            "instances": cfg.gap_instances,
            "graph_violations": graph_violations,
            "neumann_violations": neumann_violations,
            "trend_spearman": rho,
            "trend_beta": betas,
            "trend_shift": shifts,
        }),
    );
    out.tables.extend([gtab, trend]);
    Ok(out)
}

/// ‖B R(λ,A)‖ for the unscaled B.
fn neumann_unit(b: &DiscreteOperator, a: &DiscreteOperator, lambda: C64, w: &[f64]) -> Result<f64> {
    let r = ultrapos_core::numkernel::resolvent_inverse(&a.complex_matrix(), lambda)?;
    let v = ultrapos_core::lattice::op_norm(&(b.complex_matrix() * r), OpNorm::L2ToL2, w, None)?;
    if v == 0.0 {
        return Err(Error::InvalidArgument("random perturbation vanished".into()));
    }
    Ok(v)
}
