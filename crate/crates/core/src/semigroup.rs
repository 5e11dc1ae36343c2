//! Semigroup evaluation, the Dyson–Phillips recursion and the
//! variation-of-parameters identity.

use crate::lattice::{op_norm, OpNorm, WeightVector};
use crate::numkernel::{
    matrix_exp, nonnegative_exp, pade_expm, CMat, EigenDecomposition, RMat, SingularRule, C64,
};
use crate::operators::{DiscreteOperator, PerturbationFamily};
use crate::{Error, Result};

/// T(t) = e^{tG} for a fixed generator G, with a cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct SemigroupEvaluator {
    pub generator: DiscreteOperator,
    eig: Option<EigenDecomposition>,
}

impl SemigroupEvaluator {
    /// Evaluator for e^{tG} with G the operator's matrix as given.
    pub fn new(generator: DiscreteOperator) -> Result<Self> {
        let eig = match generator.eigen() {
            Ok(e) if e.is_accurate() => Some(e),
            Ok(e) => {
                log::warn!(
                    "{}: eigenbasis rejected (residual {:e}, condition {:e}); using Pade",
                    generator.label,
                    e.reconstruction_residual,
                    e.condition()
                );
                None
            }
            Err(err) if err.is_numerical() => {
                log::warn!("{}: eigendecomposition failed ({err}); using Pade", generator.label);
                None
            }
            Err(err) => return Err(err),
        };
        Ok(SemigroupEvaluator { generator, eig })
    }

    /// Evaluator for e^{-tL} given the positive form operator L.
    pub fn from_form(form: &DiscreteOperator) -> Result<Self> {
        Self::new(form.negated())
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.generator.space.weights
    }

    pub fn eigen(&self) -> Option<&EigenDecomposition> {
        self.eig.as_ref()
    }

    /// Eigendecomposition, computed on demand when the cached one was rejected.
    pub fn spectrum(&self) -> Result<Vec<C64>> {
        match &self.eig {
            Some(e) => Ok(e.values.clone()),
            None => Ok(self.generator.eigen()?.values),
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<RMat> {
        check_time(t)?;
        let n = self.dim();
        if t == 0.0 {
            return Ok(RMat::identity(n, n));
        }
        match &self.eig {
            Some(e) => Ok(e.exp_real(t)),
            None => pade_expm(&(&self.generator.matrix * t)),
        }
    }

    /// T(t) with entrywise relative accuracy when the generator has
    /// nonnegative off-diagonal entries; otherwise the same as `evaluate`.
    pub fn evaluate_entrywise(&self, t: f64) -> Result<RMat> {
        check_time(t)?;
        match nonnegative_exp(&self.generator.matrix, t) {
            Some(m) => Ok(m),
            None => self.evaluate(t),
        }
    }

    pub fn is_metzler(&self) -> bool {
        let m = &self.generator.matrix;
        let n = m.nrows();
        (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] >= 0.0))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::arg(format!("semigroups are one-sided; got t = {t}")));
    }
    Ok(())
}

/// Evaluator for e^{t(A + κB)}.
pub fn perturbed_evaluator(family: &PerturbationFamily, kappa: f64, kappa_max: f64) -> Result<SemigroupEvaluator> {
    if kappa.abs() > kappa_max {
        return Err(Error::arg(format!("|kappa| = {} exceeds the configured {kappa_max}", kappa.abs())));
    }
    SemigroupEvaluator::new(family.assemble(kappa))
}

#[derive(Debug, Clone)]
pub struct DysonPhillipsResult {
    pub t: f64,
    pub k: usize,
    pub panels: usize,
    /// S_0(t), ..., S_K(t)
    pub partial_terms: Vec<RMat>,
    pub sum: RMat,
    pub term_norms_l2: Vec<f64>,
    pub term_norms_gauge: Vec<f64>,
    /// relative L²→L² distance of the partial sums to the direct exponential
    pub partial_errors: Vec<f64>,
    pub oracle_error: f64,
    /// first k with ‖S_k‖/‖S_{k-1}‖ < 0.1 and the ratio stays below 1 afterwards
    pub ratio_index: Option<usize>,
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// ∫₀¹ θ e^{θz} dθ
fn phi_lin(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0
    } else {
        (z * z.exp() - z.exp_m1()) / (z * z)
    }
}

/// Dyson–Phillips terms S_{k+1}(t) = ∫₀ᵗ S_k(t−s) B T(s) ds for k < K.
///
/// The recursion runs in the eigenbasis of A on the uniform grid τ_m = m t/panels.
/// Each level is piecewise linear in the convolved factor and integrated exactly
/// against e^{sλ}; the first level is closed form. A must have a real
/// eigenbasis (every shipped base generator is self-adjoint).
pub fn dyson_phillips(
    a: &DiscreteOperator,
    b: &DiscreteOperator,
    t: f64,
    k_terms: usize,
    panels: usize,
    u: Option<&WeightVector>,
) -> Result<DysonPhillipsResult> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::arg(format!("dyson-phillips horizon must lie in (0,1], got {t}")));
    }
    if k_terms < 1 || panels < 1 {
        return Err(Error::arg("need at least one term and one panel"));
    }
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::Dimension { expected: n, got: b.dim() });
    }
    let eig = a.eigen()?.accepted()?;
    let (v, vinv) = eig
        .real_basis()
        .ok_or_else(|| Error::arg("dyson-phillips needs a generator with a real eigenbasis"))?;
    let lam = eig.real_values().expect("real basis").to_vec();
    let w = &a.space.weights;
    let ones = WeightVector::ones(n);
    let u = u.unwrap_or(&ones);

    let bt = vinv * &b.matrix * v;
    let dt = t / panels as f64;
    // column weights of the convolution F_{k+1}(τ_m) = Σ_q G_k(τ_q) diag(c_{m-q})
    let lo: Vec<f64> = lam.iter().map(|l| dt * (phi1(dt * l) - phi_lin(dt * l))).collect();
    let hi: Vec<f64> = lam.iter().map(|l| dt * phi_lin(dt * l)).collect();
    let conv: Vec<Vec<f64>> = (0..=panels)
        .map(|d| {
            (0..n)
                .map(|j| {
                    let e = (d as f64 * dt * lam[j]).exp();
                    let mut c = e * lo[j];
                    if d >= 1 {
                        c += ((d - 1) as f64 * dt * lam[j]).exp() * hi[j];
                    }
                    c
                })
                .collect()
        })
        .collect();

    // level one in closed form at every grid time
    let mut f: Vec<RMat> = (0..=panels)
        .map(|m| {
            let tau = m as f64 * dt;
            RMat::from_fn(n, n, |i, j| {
                let (hi_l, lo_l) = if lam[i] >= lam[j] { (lam[i], lam[j]) } else { (lam[j], lam[i]) };
                bt[(i, j)] * tau * (tau * hi_l).exp() * phi1(-tau * (hi_l - lo_l))
            })
        })
        .collect();

    let back = |fm: &RMat| -> RMat { v * fm * vinv };
    let s0 = eig.exp_real(t);
    let mut terms = vec![s0, back(&f[panels])];
    for _level in 2..=k_terms {
        let g: Vec<RMat> = f.iter().map(|fm| fm * &bt).collect();
        let mut next = vec![RMat::zeros(n, n); panels + 1];
        for (m, out) in next.iter_mut().enumerate().skip(1) {
            for q in 1..=m {
                let c = &conv[m - q];
                let gq = &g[q];
                for j in 0..n {
                    let cj = c[j];
                    if cj == 0.0 {
                        continue;
                    }
                    let src = gq.column(j);
                    let mut dst = out.column_mut(j);
                    dst.axpy(cj, &src, 1.0);
                }
            }
        }
        f = next;
        terms.push(back(&f[panels]));
    }

    let oracle = matrix_exp(&(&a.matrix + &b.matrix), t)?;
    let oracle_norm = op_norm(&oracle, OpNorm::L2ToL2, w, None)?;
    let mut sum = RMat::zeros(n, n);
    let mut term_norms_l2 = Vec::with_capacity(terms.len());
    let mut term_norms_gauge = Vec::with_capacity(terms.len());
    let mut partial_errors = Vec::with_capacity(terms.len());
    for s in &terms {
        sum += s;
        term_norms_l2.push(op_norm(s, OpNorm::L2ToL2, w, None)?);
        term_norms_gauge.push(op_norm(s, OpNorm::GaugeToGauge, w, Some(u))?);
        partial_errors.push(op_norm(&(&sum - &oracle), OpNorm::L2ToL2, w, None)? / oracle_norm);
    }
    let ratio_index = ratio_test(&term_norms_l2);
    Ok(DysonPhillipsResult {
        t,
        k: k_terms,
        panels,
        partial_terms: terms,
        sum,
        term_norms_l2,
        term_norms_gauge,
        oracle_error: *partial_errors.last().expect("at least one term"),
        partial_errors,
        ratio_index,
    })
}

/// First k >= 1 with ‖S_k‖ < 0.1 ‖S_{k-1}‖ after which the norms keep decreasing.
pub fn ratio_test(norms: &[f64]) -> Option<usize> {
    (1..norms.len()).find(|&k| {
        norms[k] < 0.1 * norms[k - 1] && (k + 1..norms.len()).all(|j| norms[j] <= norms[j - 1])
    })
}

/// Rerun with doubled panel counts until the L²→L² change of the sum drops
/// below `tol` relative to its norm. Returns every run in order.
pub fn dyson_phillips_refined(
    a: &DiscreteOperator,
    b: &DiscreteOperator,
    t: f64,
    k_terms: usize,
    panels: usize,
    max_panels: usize,
    tol: f64,
    u: Option<&WeightVector>,
) -> Result<Vec<DysonPhillipsResult>> {
    let w = &a.space.weights;
    let mut runs = vec![dyson_phillips(a, b, t, k_terms, panels, u)?];
    let mut p = panels;
    while 2 * p <= max_panels {
        p *= 2;
        let next = dyson_phillips(a, b, t, k_terms, p, u)?;
        let prev = runs.last().expect("nonempty");
        let change = op_norm(&(&next.sum - &prev.sum), OpNorm::L2ToL2, w, None)?
            / op_norm(&next.sum, OpNorm::L2ToL2, w, None)?;
        runs.push(next);
        if change < tol {
            return Ok(runs);
        }
    }
    Err(Error::NoConvergence(format!(
        "dyson-phillips sum still changing at {p} panels (tolerance {tol:e})"
    )))
}

/// ‖S(t) − T(t) − ∫₀ᵗ S(t−s) B T(s) ds‖₂ / ‖S(t)‖₂ with S = e^{t(A+B)}.
///
/// The integral is factored through the eigenbases of A+B and A, so only the
/// scalar factors e^{(t−s)μ_i} e^{sλ_j} meet the quadrature (composite
/// Gauss–Legendre of order 8 on `panels` panels).
pub fn variation_residual(a: &DiscreteOperator, b: &DiscreteOperator, t: f64, panels: usize) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::arg(format!("horizon must lie in (0,1], got {t}")));
    }
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::Dimension { expected: n, got: b.dim() });
    }
    let w = &a.space.weights;
    let ea = a.eigen()?.accepted()?;
    let sum_op = a.sum(b)?;
    let es = sum_op.eigen()?.accepted()?;
    let s_t = es.exp_real(t);
    let t_t = ea.exp_real(t);
    let bc = crate::numkernel::to_complex(&b.matrix);
    let c = es.inverse() * bc * &ea.vectors;
    let (nodes, wts) = SingularRule::new(panels, 8).nodes(t, 0.0)?;
    let q = nodes.len();
    let left = CMat::from_fn(n, q, |i, k| (es.values[i] * (t - nodes[k])).exp() * wts[k]);
    let right = CMat::from_fn(q, n, |k, j| (ea.values[j] * nodes[k]).exp());
    let acc = left * right;
    let inner = c.component_mul(&acc);
    let integral = (&es.vectors * inner * ea.inverse()).map(|z| z.re);
    let resid = &s_t - &t_t - integral;
    Ok(op_norm(&resid, OpNorm::L2ToL2, w, None)? / op_norm(&s_t, OpNorm::L2ToL2, w, None)?)
}
