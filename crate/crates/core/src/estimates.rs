//! Fitted constants and certificates for the smoothing, compatibility and
//! integrability conditions, and for the growth bounds they imply.

use crate::lattice::{op_norm, OpNorm, WeightVector};
use crate::numkernel::{gamma_fn, mittag_leffler, RMat, SingularRule};
use crate::operators::{DiscreteOperator, PerturbationFamily};
use crate::semigroup::SemigroupEvaluator;
use crate::{Error, Result, Verdict};
use serde::{Deserialize, Serialize};

/// Fits with r² below this are reported INCONCLUSIVE.
pub const R2_GATE: f64 = 0.98;

/// Least-squares line through (x, y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// standard error of the slope
    pub slope_se: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::arg("line fit needs at least three paired samples"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::arg("line fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(LineFit { slope, intercept, r2, slope_se })
}

/// Log-log fit of y ~ C t^slope.
pub fn loglog_fit(t: &[f64], y: &[f64]) -> Result<LineFit> {
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::arg("log-log fit needs positive samples"));
    }
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}

/// `count` points geometrically spaced on [lo, hi].
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|k| if k == count - 1 { hi } else { lo * (r * k as f64).exp() })
        .collect()
}

/// Smallest admissible t for a grid with spacing h and operator order.
pub fn saturation_floor(h: f64, order: u32) -> f64 {
    3.0 * h.powi(order.max(2) as i32)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UltraFit {
    pub t_samples: Vec<f64>,
    pub norms: Vec<f64>,
    pub alpha_hat: f64,
    /// envelope constant: max over samples of t^alpha ‖T(t)‖
    pub c_hat: f64,
    /// exp(intercept) of the regression
    pub c_regression: f64,
    pub r2: f64,
    /// two standard errors of the fitted exponent
    pub confidence: f64,
    pub window: [f64; 2],
    pub requested_window: [f64; 2],
    pub verdict: Verdict,
}

/// Fit ‖T(t)‖_{L²→Sup} ~ C t^{-α} on a geometric grid inside the window.
pub fn fit_ultracontractivity(t: &SemigroupEvaluator, window: [f64; 2], samples: usize) -> Result<UltraFit> {
    let g = &t.generator;
    let floor = saturation_floor(g.space.h, g.order);
    fit_norm_decay(t, window, samples, floor, |m| op_norm(m, OpNorm::L2ToSup, t.weights(), None))
}

fn fit_norm_decay<F: Fn(&RMat) -> Result<f64>>(
    t: &SemigroupEvaluator,
    window: [f64; 2],
    samples: usize,
    floor: f64,
    norm: F,
) -> Result<UltraFit> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::arg(format!("bad fit window [{lo}, {hi}]")));
    }
    let lo_used = lo.max(floor);
    if lo_used >= hi {
        return Err(Error::arg(format!(
            "window [{lo}, {hi}] collapsed by the resolution floor {floor:e}"
        )));
    }
    if lo_used > lo {
        log::warn!("fit window raised from {lo:e} to the resolution floor {lo_used:e}");
    }
    let ts = geometric_grid(lo_used, hi, samples.max(3));
    let norms = ts
        .iter()
        .map(|&s| norm(&t.evaluate(s)?))
        .collect::<Result<Vec<f64>>>()?;
    let fit = loglog_fit(&ts, &norms)?;
    let alpha = -fit.slope;
    let c_hat = ts.iter().zip(&norms).map(|(s, v)| v * s.powf(alpha)).fold(0.0, f64::max);
    let verdict = if fit.r2 >= R2_GATE { Verdict::Pass } else { Verdict::Inconclusive };
    Ok(UltraFit {
        t_samples: ts,
        norms,
        alpha_hat: alpha,
        c_hat,
        c_regression: fit.intercept.exp(),
        r2: fit.r2,
        confidence: 2.0 * fit.slope_se,
        window: [lo_used, hi],
        requested_window: window,
        verdict,
    })
}

/// Fit of ‖L^s T(t)‖-type decay in an arbitrary operator norm; used for
/// the fractional estimate and the mixed-norm chain.
pub fn fit_operator_decay(
    t: &SemigroupEvaluator,
    b: Option<&DiscreteOperator>,
    which: OpNorm,
    u: Option<&WeightVector>,
    window: [f64; 2],
    samples: usize,
) -> Result<UltraFit> {
    let floor = saturation_floor(t.generator.space.h, t.generator.order);
    let w = t.weights().to_vec();
    fit_norm_decay(t, window, samples, floor, |m| match b {
        Some(b) => op_norm(&(&b.matrix * m), which, &w, u),
        None => op_norm(m, which, &w, u),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatFit {
    pub t_samples: Vec<f64>,
    /// ‖B T(t)‖_{Gauge→Gauge}
    pub norms: Vec<f64>,
    /// t^beta_hat ‖B T(t)‖ per sample
    pub scaled: Vec<f64>,
    pub beta_raw: f64,
    pub beta_hat: f64,
    /// true when the raw slope was clamped into [0, 1)
    pub clamped: bool,
    pub c_hat: f64,
    pub r2: f64,
}

/// Fit ‖B T(t)‖_{Gauge→Gauge} ~ C t^{-β}; β is clamped into [0, 1).
pub fn fit_compat_beta(
    b: &DiscreteOperator,
    t: &SemigroupEvaluator,
    window: [f64; 2],
    samples: usize,
    u: &WeightVector,
) -> Result<CompatFit> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::arg(format!("bad fit window [{lo}, {hi}]")));
    }
    let ts = geometric_grid(lo, hi, samples.max(3));
    let w = t.weights();
    let norms = ts
        .iter()
        .map(|&s| op_norm(&(&b.matrix * t.evaluate(s)?), OpNorm::GaugeToGauge, w, Some(u)))
        .collect::<Result<Vec<f64>>>()?;
    if norms.iter().all(|v| *v == 0.0) {
        return Ok(CompatFit {
            scaled: vec![0.0; ts.len()],
            t_samples: ts,
            norms,
            beta_raw: 0.0,
            beta_hat: 0.0,
            clamped: false,
            c_hat: 0.0,
            r2: 1.0,
        });
    }
    let fit = loglog_fit(&ts, &norms)?;
    let raw = -fit.slope;
    let beta = raw.clamp(0.0, 1.0 - 1e-9);
    let clamped = beta != raw;
    if raw >= 1.0 {
        log::warn!("compatibility slope {raw} is not integrable; clamped");
    }
    let scaled: Vec<f64> = ts.iter().zip(&norms).map(|(s, v)| v * s.powf(beta)).collect();
    let c_hat = scaled.iter().copied().fold(0.0, f64::max);
    Ok(CompatFit {
        t_samples: ts,
        norms,
        scaled,
        beta_raw: raw,
        beta_hat: beta,
        clamped,
        c_hat,
        r2: fit.r2,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub t0: f64,
    pub q_hat: f64,
    pub passes: bool,
    /// singular exponent used by the quadrature
    pub beta_used: f64,
    pub t_samples: Vec<f64>,
    pub norms: Vec<f64>,
}

/// q = ∫₀^{t0} ‖B T(s)‖_{2→2} ds, integrable iff the fitted slope exceeds -1.
pub fn check_admissibility(
    b: &DiscreteOperator,
    t: &SemigroupEvaluator,
    t0: f64,
    panels: usize,
) -> Result<AdmissibilityReport> {
    if !(t0 > 0.0) {
        return Err(Error::arg(format!("horizon must be positive, got {t0}")));
    }
    let w = t.weights().to_vec();
    let norm_at = |s: f64| -> Result<f64> { op_norm(&(&b.matrix * t.evaluate(s)?), OpNorm::L2ToL2, &w, None) };
    let floor = saturation_floor(t.generator.space.h, t.generator.order).min(0.01 * t0);
    let ts = geometric_grid(floor.max(1e-3 * t0), t0, 8);
    let norms = ts.iter().map(|&s| norm_at(s)).collect::<Result<Vec<f64>>>()?;
    if norms.iter().all(|v| *v == 0.0) {
        return Ok(AdmissibilityReport { t0, q_hat: 0.0, passes: true, beta_used: 0.0, t_samples: ts, norms });
    }
    let fit = loglog_fit(&ts, &norms)?;
    if fit.slope <= -1.0 {
        return Err(Error::NoConvergence(format!(
            "integrand decays like s^{:.3}; not integrable at 0",
            fit.slope
        )));
    }
    let beta = (-fit.slope).clamp(0.0, 0.99);
    let (nodes, wts) = SingularRule::new(panels, 8).nodes(t0, beta)?;
    let mut q = 0.0;
    for (s, wq) in nodes.iter().zip(&wts) {
        q += wq * norm_at(*s)?;
    }
    Ok(AdmissibilityReport { t0, q_hat: q, passes: q < 1.0, beta_used: beta, t_samples: ts, norms })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub constant: f64,
    pub beta: f64,
    pub t_samples: Vec<f64>,
    pub norms: Vec<f64>,
    pub bounds: Vec<f64>,
    /// bound minus measured norm per sample
    pub margins: Vec<f64>,
    pub worst_margin: f64,
    pub violations: usize,
    pub verdict: Verdict,
}

/// ‖T_κ(t)‖_{Gauge→Gauge} <= C E_{1-β}(C Γ(1-β) t^{1-β}) at each sample.
pub fn check_lemma_mittag_leffler(
    family: &PerturbationFamily,
    kappa: f64,
    c: f64,
    beta: f64,
    t_samples: &[f64],
    u: &WeightVector,
) -> Result<GrowthCheck> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::arg(format!("beta must lie in [0,1), got {beta}")));
    }
    let tk = SemigroupEvaluator::new(family.assemble(kappa))?;
    let g1 = gamma_fn(1.0 - beta)?;
    let mut norms = Vec::new();
    let mut bounds = Vec::new();
    for &s in t_samples {
        let m = tk.evaluate(s)?;
        norms.push(op_norm(&m, OpNorm::GaugeToGauge, tk.weights(), Some(u))?);
        bounds.push(c * mittag_leffler(1.0 - beta, c * g1 * s.powf(1.0 - beta))?);
    }
    let margins: Vec<f64> = bounds.iter().zip(&norms).map(|(b, n)| b - n).collect();
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = margins.iter().filter(|m| **m < 0.0).count();
    Ok(GrowthCheck {
        constant: c,
        beta,
        t_samples: t_samples.to_vec(),
        norms,
        bounds,
        margins,
        worst_margin: worst,
        violations,
        verdict: Verdict::from_bool(violations == 0),
    })
}

/// sup over samples of ‖T(t)‖_{Gauge→Gauge}.
pub fn sup_gauge_norm(t: &SemigroupEvaluator, t_samples: &[f64], u: &WeightVector) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &s in t_samples {
        m = m.max(op_norm(&t.evaluate(s)?, OpNorm::GaugeToGauge, t.weights(), Some(u))?);
    }
    Ok(m)
}

/// Common constant C >= 1 dominating every measured constant.
pub fn common_constant(constants: &[f64]) -> f64 {
    constants.iter().copied().fold(1.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreservedUltra {
    pub kappa: f64,
    pub perturbed: UltraFit,
    pub alpha_shift: f64,
    /// sup_t t^α ‖T_κ(t)‖ / sup_t t^α ‖T(t)‖ with α from the base fit
    pub ratio: f64,
}

/// Refit the smoothing exponent of e^{t(A+κB)} on the base window.
pub fn check_theorem_preserved_ultra(
    family: &PerturbationFamily,
    kappa: f64,
    base: &UltraFit,
) -> Result<PreservedUltra> {
    if kappa.abs() > 1.0 {
        return Err(Error::arg(format!("|kappa| must be at most 1, got {kappa}")));
    }
    let tk = SemigroupEvaluator::new(family.assemble(kappa))?;
    let ts = &base.t_samples;
    let norms = ts
        .iter()
        .map(|&s| op_norm(&tk.evaluate(s)?, OpNorm::L2ToSup, tk.weights(), None))
        .collect::<Result<Vec<f64>>>()?;
    let fit = loglog_fit(ts, &norms)?;
    let alpha = -fit.slope;
    let env = |v: &[f64]| ts.iter().zip(v).map(|(s, n)| n * s.powf(base.alpha_hat)).fold(0.0, f64::max);
    let ratio = env(&norms) / env(&base.norms);
    let c_hat = ts.iter().zip(&norms).map(|(s, v)| v * s.powf(alpha)).fold(0.0, f64::max);
    let perturbed = UltraFit {
        t_samples: ts.clone(),
        norms,
        alpha_hat: alpha,
        c_hat,
        c_regression: fit.intercept.exp(),
        r2: fit.r2,
        confidence: 2.0 * fit.slope_se,
        window: base.window,
        requested_window: base.requested_window,
        verdict: if fit.r2 >= R2_GATE { Verdict::Pass } else { Verdict::Inconclusive },
    };
    Ok(PreservedUltra { kappa, alpha_shift: alpha - base.alpha_hat, perturbed, ratio })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub theta: f64,
    pub constant: f64,
    pub t_samples: Vec<f64>,
    pub norms: Vec<f64>,
    pub bounds: Vec<f64>,
    /// fitted decay exponent of the mixed norm
    pub exponent: f64,
    pub verdict: Verdict,
}

/// ‖T(t)‖_{L^{2/θ}→Sup} <= C t^{-αθ} (1 + 0.15) with C >= 1 the common
/// constant of the base fit and the sup-norm bound.
pub fn check_interpolation_chain(t: &SemigroupEvaluator, theta: f64, base: &UltraFit) -> Result<InterpolationCheck> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::arg(format!("theta must lie in [0,1], got {theta}")));
    }
    let w = t.weights();
    let ones = WeightVector::ones(t.dim());
    let ts = &base.t_samples;
    let which = if theta == 0.0 { OpNorm::GaugeToGauge } else { OpNorm::LpToSup(2.0 / theta) };
    let mut norms = Vec::with_capacity(ts.len());
    let mut sup_v: f64 = 0.0;
    for &s in ts {
        let m = t.evaluate(s)?;
        norms.push(op_norm(&m, which, w, Some(&ones))?);
        sup_v = sup_v.max(op_norm(&m, OpNorm::GaugeToGauge, w, Some(&ones))?);
    }
    let c = common_constant(&[base.c_hat, sup_v]);
    let bounds: Vec<f64> = ts.iter().map(|s| c * s.powf(-base.alpha_hat * theta) * 1.15).collect();
    let ok = norms.iter().zip(&bounds).all(|(n, b)| n <= b);
    let exponent = if theta == 0.0 { 0.0 } else { -loglog_fit(ts, &norms)?.slope };
    Ok(InterpolationCheck {
        theta,
        constant: c,
        t_samples: ts.clone(),
        norms,
        bounds,
        exponent,
        verdict: Verdict::from_bool(ok),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1e-3, 1e-1, 5);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[4], 1e-1);
        assert!((g[2] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn floor_scales_with_order() {
        assert!((saturation_floor(0.1, 2) - 0.03).abs() < 1e-15);
        assert!((saturation_floor(0.1, 4) - 3e-4).abs() < 1e-15);
        assert_eq!(saturation_floor(0.1, 0), saturation_floor(0.1, 2));
    }
}
