//! Contour spectral projections, eigenpair continuation in κ, and gaps
//! between subspaces and between operators.

use crate::lattice::{min_ratio_real, op_norm, OpNorm, WeightVector};
use crate::numkernel::{contour_projection, resolvent_inverse, to_complex, CMat, RMat, C64};
use crate::operators::{DiscreteOperator, PerturbationFamily};
use crate::{Error, Result, Verdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Stop doubling the contour rule once the projector moves less than this
/// (Frobenius, relative to the dimension).
const CONTOUR_TOL: f64 = 1e-11;

/// Taylor coefficients below this multiple of ‖P_0‖ are treated as rounding.
const COEFF_FLOOR: f64 = 1e-13;

/// Spectral projection of a circle together with its numerical rank.
#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: CMat,
    pub rank: usize,
    pub trace: C64,
    /// contour nodes used after doubling
    pub nodes: usize,
}

fn contour_tol(n: usize) -> f64 {
    CONTOUR_TOL * (n.max(1) as f64).sqrt()
}

fn project(a: &CMat, center: C64, r: f64, m: usize) -> Result<Projection> {
    let (p, used) = contour_projection(a, center, r, m, contour_tol(a.nrows()))?;
    let trace = p.trace();
    let rank = trace.re.round().max(0.0) as usize;
    Ok(Projection { matrix: p, rank, trace, nodes: used })
}

/// Eigenvalues of `a` lying too close to the circle |λ - center| = r.
fn check_circle(a: &DiscreteOperator, center: C64, r: f64) -> Result<usize> {
    let eig = a.eigen()?;
    let mut inside = 0;
    for &l in &eig.values {
        let d = (l - center).norm();
        if (d - r).abs() <= 1e-6 * r.max(1e-300) {
            return Err(Error::SpectralCollision(l));
        }
        if d < r {
            inside += 1;
        }
    }
    Ok(inside)
}

/// P = (1/2πi)∮ R(λ,A) dλ over the circle, after checking the circle
/// avoids the spectrum.
pub fn spectral_projection(a: &DiscreteOperator, center: C64, r: f64, m: usize) -> Result<Projection> {
    if !(r > 0.0) {
        return Err(Error::arg(format!("contour radius must be positive, got {r}")));
    }
    let inside = check_circle(a, center, r)?;
    let p = project(&a.complex_matrix(), center, r, m)?;
    if p.rank != inside {
        log::warn!("contour rank {} disagrees with {inside} enclosed eigenvalues", p.rank);
    }
    Ok(p)
}

/// max over contour nodes of ‖B R(λ,A)‖ in the weighted L² norm, for unit κ.
fn beta_unit(b: &DiscreteOperator, a: &DiscreteOperator, center: C64, r: f64, m: usize) -> Result<f64> {
    let ac = a.complex_matrix();
    let bc = b.complex_matrix();
    let w = &a.space.weights;
    let nodes: Vec<C64> = (0..m)
        .map(|j| center + C64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / m as f64))
        .collect();
    let vals = nodes
        .par_iter()
        .map(|z| op_norm(&(&bc * resolvent_inverse(&ac, *z)?), OpNorm::L2ToL2, w, None))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// sup over the circle of ‖κB R(λ,A)‖₂, sampled at m nodes.
pub fn beta_kappa(b: &DiscreteOperator, a: &DiscreteOperator, center: C64, r: f64, m: usize, kappa: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::arg("need at least two contour nodes"));
    }
    Ok(kappa.abs() * beta_unit(b, a, center, r, m)?)
}

/// One κ sample of a continued eigenpair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackRow {
    pub kappa: f64,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub rank: usize,
    pub min_ratio: f64,
    pub beta_kappa: f64,
}

#[derive(Debug, Clone)]
pub struct SpectralTrack {
    pub kappa_grid: Vec<f64>,
    pub lambda: Vec<C64>,
    pub projections: Vec<CMat>,
    /// v(κ) = P(κ) v0, real part
    pub eigvec: Vec<Vec<f64>>,
    /// largest imaginary part of v(κ)
    pub eigvec_imag: Vec<f64>,
    pub min_ratio_to_u: Vec<f64>,
    pub simplicity: Vec<usize>,
    pub beta_kappa: Vec<f64>,
    /// ‖P(κ) − P(0)‖ in the weighted L² norm
    pub projection_shift: Vec<f64>,
    /// min_ratio(v0, u)
    pub c0: f64,
    /// largest |κ| such that every grid point with smaller |κ| keeps
    /// min_ratio >= c0/2; None when even the smallest fails
    pub delta_empirical: Option<f64>,
}

impl SpectralTrack {
    pub fn rows(&self) -> Vec<TrackRow> {
        (0..self.kappa_grid.len())
            .map(|i| TrackRow {
                kappa: self.kappa_grid[i],
                re_lambda: self.lambda[i].re,
                im_lambda: self.lambda[i].im,
                rank: self.simplicity[i],
                min_ratio: self.min_ratio_to_u[i],
                beta_kappa: self.beta_kappa[i],
            })
            .collect()
    }
}

/// Largest d among |κ| values such that all grid points with |κ| <= d pass.
pub fn symmetric_prefix(kappas: &[f64], pass: &[bool]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..kappas.len()).collect();
    idx.sort_by(|&a, &b| kappas[a].abs().total_cmp(&kappas[b].abs()));
    let mut best = None;
    let mut k = 0;
    while k < idx.len() {
        let d = kappas[idx[k]].abs();
        let mut ok = true;
        let mut j = k;
        while j < idx.len() && kappas[idx[j]].abs() == d {
            ok &= pass[idx[j]];
            j += 1;
        }
        if !ok {
            break;
        }
        best = Some(d);
        k = j;
    }
    best
}

/// Continue the isolated eigenvalue λ0 of the base along the κ grid.
pub fn track_eigenpair(
    family: &PerturbationFamily,
    lambda0: f64,
    r: f64,
    m: usize,
    kappa_grid: &[f64],
    v0: &[f64],
    u: &WeightVector,
) -> Result<SpectralTrack> {
    let n = family.base.dim();
    if v0.len() != n {
        return Err(Error::Dimension { expected: n, got: v0.len() });
    }
    let center = C64::new(lambda0, 0.0);
    let inside = check_circle(&family.base, center, r)?;
    if inside != 1 {
        return Err(Error::SimplicityLost { kappa: 0.0, rank: inside });
    }
    let c0 = min_ratio_real(v0, u)?;
    if !(c0 > 0.0) {
        return Err(Error::arg("v0 must dominate a positive multiple of u"));
    }
    let w = family.base.space.weights.clone();
    let beta1 = beta_unit(&family.direction, &family.base, center, r, m)?;
    let p0 = project(&family.base.complex_matrix(), center, r, m)?.matrix;
    let v0c = nalgebra::DVector::from_iterator(n, v0.iter().map(|x| C64::new(*x, 0.0)));

    let mut out = SpectralTrack {
        kappa_grid: kappa_grid.to_vec(),
        lambda: Vec::new(),
        projections: Vec::new(),
        eigvec: Vec::new(),
        eigvec_imag: Vec::new(),
        min_ratio_to_u: Vec::new(),
        simplicity: Vec::new(),
        beta_kappa: Vec::new(),
        projection_shift: Vec::new(),
        c0,
        delta_empirical: None,
    };
    for &k in kappa_grid {
        let ak = family.assemble_complex(C64::new(k, 0.0));
        let p = project(&ak, center, r, m)?;
        if p.rank != 1 {
            return Err(Error::SimplicityLost { kappa: k, rank: p.rank });
        }
        let lam = (&ak * &p.matrix).trace() / p.trace;
        let v = &p.matrix * &v0c;
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let im = v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        out.min_ratio_to_u.push(min_ratio_real(&re, u)?);
        out.eigvec.push(re);
        out.eigvec_imag.push(im);
        out.lambda.push(lam);
        out.simplicity.push(p.rank);
        out.beta_kappa.push(k.abs() * beta1);
        out.projection_shift.push(op_norm(&(&p.matrix - &p0), OpNorm::L2ToL2, &w, None)?);
        out.projections.push(p.matrix);
    }
    let pass: Vec<bool> = out.min_ratio_to_u.iter().map(|m| *m >= 0.5 * c0).collect();
    out.delta_empirical = symmetric_prefix(kappa_grid, &pass);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticityReport {
    pub rho: f64,
    /// ‖P_k‖_{Gauge→Gauge} ρ^k for k = 0..=k_max
    pub taylor_norms: Vec<f64>,
    /// geometric ratio fitted over k >= 1 above the rounding floor; None
    /// when every higher coefficient is at rounding level
    pub decay_ratio: Option<f64>,
    pub fitted_terms: usize,
    pub verdict: Verdict,
}

/// Taylor coefficients of κ ↦ P(κ) on the circle |κ| = ρ, by the discrete
/// Fourier transform of m samples, measured in the gauge operator norm.
pub fn analyticity_test(
    family: &PerturbationFamily,
    lambda0: f64,
    r: f64,
    rho: f64,
    m: usize,
    k_max: usize,
    u: &WeightVector,
) -> Result<AnalyticityReport> {
    if !(rho > 0.0) {
        return Err(Error::arg(format!("rho must be positive, got {rho}")));
    }
    if m < 2 * k_max + 2 {
        return Err(Error::arg(format!("{m} samples cannot resolve {k_max} coefficients")));
    }
    let center = C64::new(lambda0, 0.0);
    let w = &family.base.space.weights;
    let angles: Vec<f64> = (0..m).map(|j| 2.0 * std::f64::consts::PI * j as f64 / m as f64).collect();
    let samples = angles
        .iter()
        .map(|th| {
            let k = C64::from_polar(rho, *th);
            let p = project(&family.assemble_complex(k), center, r, 32)?;
            if p.rank != 1 {
                return Err(Error::SimplicityLost { kappa: rho, rank: p.rank });
            }
            Ok(p.matrix)
        })
        .collect::<Result<Vec<CMat>>>()?;
    let n = family.base.dim();
    let mut norms = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut c = CMat::zeros(n, n);
        for (p, th) in samples.iter().zip(&angles) {
            c += p * C64::from_polar(1.0 / m as f64, -(k as f64) * th);
        }
        norms.push(op_norm(&c, OpNorm::GaugeToGauge, w, Some(u))?);
    }
    let floor = COEFF_FLOOR * norms[0].max(1.0);
    let pts: Vec<(f64, f64)> = (1..=k_max)
        .filter(|&k| norms[k] > floor)
        .map(|k| (k as f64, norms[k].ln()))
        .collect();
    let (ratio, verdict) = if pts.len() < 2 {
        let trivial = norms[1..].iter().all(|v| *v <= 1e-12 * norms[0].max(1.0));
        (None, Verdict::from_bool(trivial))
    } else {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let nf = x.len() as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let q = (sxy / sxx).exp();
        (Some(q), Verdict::from_bool(q < 0.9))
    };
    Ok(AnalyticityReport { rho, taylor_norms: norms, decay_ratio: ratio, fitted_terms: pts.len(), verdict })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeumannCheck {
    /// ‖B R(λ,A)‖₂
    pub beta: f64,
    pub resolvent_norm: f64,
    /// ‖R(λ,A+B) − partial sum through k‖ for k = 0..=k_max
    pub residuals: Vec<f64>,
    /// β^{k+1} ‖R(λ,A)‖ / (1 − β)
    pub tail_bounds: Vec<f64>,
    /// β/(1−β)‖R(λ,A)‖ − ‖R(λ,A+B) − R(λ,A)‖
    pub slack: f64,
    pub verdict: Verdict,
}

/// Partial sums R(λ,A) Σ_k (B R(λ,A))^k against the direct resolvent of A+B.
pub fn neumann_resolvent_check(a: &RMat, b: &RMat, lambda: C64, weights: &[f64], k_max: usize) -> Result<NeumannCheck> {
    let ac = to_complex(a);
    let bc = to_complex(b);
    let ra = resolvent_inverse(&ac, lambda)?;
    let br = &bc * &ra;
    let nrm = |m: &CMat| op_norm(m, OpNorm::L2ToL2, weights, None);
    let beta = nrm(&br)?;
    if !(beta < 1.0) {
        return Err(Error::arg(format!("‖B R(λ,A)‖ = {beta} is not below one")));
    }
    let rab = resolvent_inverse(&(&ac + &bc), lambda)?;
    let ra_norm = nrm(&ra)?;
    let mut term = ra.clone();
    let mut sum = ra.clone();
    let mut residuals = Vec::with_capacity(k_max + 1);
    let mut bounds = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            term = &term * &br;
            sum += &term;
        }
        residuals.push(nrm(&(&rab - &sum))?);
        bounds.push(beta.powi(k as i32 + 1) * ra_norm / (1.0 - beta));
    }
    let slack = beta / (1.0 - beta) * ra_norm - nrm(&(&rab - &ra))?;
    // rounding allowance on the tail comparison
    let tol = 1e-10 * ra_norm.max(1.0);
    let ok = slack >= -tol && residuals.iter().zip(&bounds).all(|(r, b)| *r <= b + tol);
    Ok(NeumannCheck { beta, resolvent_norm: ra_norm, residuals, tail_bounds: bounds, slack, verdict: Verdict::from_bool(ok) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub delta_mn: f64,
    pub delta_nm: f64,
    pub gap: f64,
}

/// Orthonormal basis of span(M) for the inner product with the given weights,
/// returned in sqrt-weighted coordinates.
fn orthonormalize(m: &RMat, weights: &[f64]) -> Result<RMat> {
    let s = nalgebra::DVector::from_iterator(weights.len(), weights.iter().map(|w| w.sqrt()));
    let mut scaled = m.clone();
    for mut c in scaled.column_iter_mut() {
        c.component_mul_assign(&s);
    }
    let scale = scaled.norm().max(f64::MIN_POSITIVE);
    let qr = scaled.qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(Error::RankDeficient);
    }
    Ok(qr.q())
}

/// δ(M,N) = sup over unit u in M of dist(u, N), and its reverse.
pub fn subspace_gap(m: &RMat, n: &RMat, weights: &[f64]) -> Result<GapResult> {
    if m.nrows() != weights.len() || n.nrows() != weights.len() {
        return Err(Error::Dimension { expected: weights.len(), got: m.nrows().max(n.nrows()) });
    }
    let one_way = |qa: Option<&RMat>, qb: Option<&RMat>| -> f64 {
        match (qa, qb) {
            (None, _) => 0.0,
            (Some(_), None) => 1.0,
            (Some(a), Some(b)) => {
                let resid = a - b * (b.transpose() * a);
                if resid.is_empty() {
                    0.0
                } else {
                    resid.singular_values().max().min(1.0)
                }
            }
        }
    };
    let qm = if m.ncols() == 0 { None } else { Some(orthonormalize(m, weights)?) };
    let qn = if n.ncols() == 0 { None } else { Some(orthonormalize(n, weights)?) };
    let delta_mn = one_way(qm.as_ref(), qn.as_ref());
    let delta_nm = one_way(qn.as_ref(), qm.as_ref());
    Ok(GapResult { delta_mn, delta_nm, gap: delta_mn.max(delta_nm) })
}

/// Gap between the graphs of A and A + B in the product space.
pub fn graph_gap(a: &DiscreteOperator, b_pert: &DiscreteOperator) -> Result<GapResult> {
    let n = a.dim();
    if b_pert.dim() != n {
        return Err(Error::Dimension { expected: n, got: b_pert.dim() });
    }
    let graph = |op: &RMat| {
        let mut g = RMat::zeros(2 * n, n);
        g.view_mut((0, 0), (n, n)).copy_from(&RMat::identity(n, n));
        g.view_mut((n, 0), (n, n)).copy_from(op);
        g
    };
    let w: Vec<f64> = a.space.weights.iter().chain(&a.space.weights).copied().collect();
    subspace_gap(&graph(&a.matrix), &graph(&(&a.matrix + &b_pert.matrix)), &w)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::arg("rank correlation needs two equal samples of size >= 2"));
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GridSpace;

    fn diag_op(d: &[f64]) -> DiscreteOperator {
        let n = d.len();
        let space = GridSpace::interior(0.0, (n + 1) as f64, n).unwrap();
        DiscreteOperator::new(RMat::from_diagonal(&nalgebra::DVector::from_column_slice(d)), space, "diag").unwrap()
    }

    #[test]
    fn circle_ranks() {
        let a = diag_op(&[1.0, 2.0, 5.0]);
        assert_eq!(spectral_projection(&a, C64::new(1.0, 0.0), 0.5, 16).unwrap().rank, 1);
        assert_eq!(spectral_projection(&a, C64::new(1.5, 0.0), 1.0, 16).unwrap().rank, 2);
        let empty = spectral_projection(&a, C64::new(3.5, 0.0), 0.5, 16).unwrap();
        assert_eq!(empty.rank, 0);
        assert!(empty.matrix.norm() < 1e-10);
        assert!(matches!(
            spectral_projection(&a, C64::new(1.5, 0.0), 0.5, 16),
            Err(Error::SpectralCollision(_))
        ));
    }

    #[test]
    fn orthogonal_lines() {
        let m = RMat::from_column_slice(2, 1, &[1.0, 0.0]);
        let n = RMat::from_column_slice(2, 1, &[0.0, 1.0]);
        let g = subspace_gap(&m, &n, &[1.0, 1.0]).unwrap();
        assert!((g.gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn prefix_rule() {
        let k = [-0.2, -0.1, 0.0, 0.1, 0.2];
        assert_eq!(symmetric_prefix(&k, &[false, true, true, true, true]), Some(0.1));
        assert_eq!(symmetric_prefix(&k, &[true; 5]), Some(0.2));
        assert_eq!(symmetric_prefix(&k, &[true, true, false, true, true]), None);
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }
}
