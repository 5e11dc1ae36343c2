//! Eventual positivity: spectral bound, detection of negative entries and
//! uniform lower-bound certificates against a positive reference vector.

use crate::lattice::{min_ratio_real, op_norm, OpNorm, WeightVector};
use crate::numkernel::RMat;
use crate::operators::{DiscreteOperator, PerturbationFamily};
use crate::semigroup::SemigroupEvaluator;
use crate::spectral::symmetric_prefix;
use crate::{Error, Result, Verdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest real part of the spectrum.
pub fn spectral_bound(a: &DiscreteOperator) -> Result<f64> {
    Ok(a.eigen()?.max_real_part())
}

/// Distance from the spectral bound to the next distinct real part.
pub fn spectral_gap(a: &DiscreteOperator) -> Result<f64> {
    let eig = a.eigen()?;
    let spb = eig.max_real_part();
    let scale = spb.abs().max(1.0);
    let next = eig
        .values
        .iter()
        .map(|z| spb - z.re)
        .filter(|d| *d > 1e-9 * scale)
        .fold(f64::INFINITY, f64::min);
    if !next.is_finite() {
        return Err(Error::arg("spectrum has a single real part; no gap"));
    }
    Ok(next)
}

/// Eigenvector of the eigenvalue with the largest real part, normalized in
/// the weighted L² norm and oriented positively; fails unless strictly positive.
pub fn perron_vector(a: &DiscreteOperator) -> Result<WeightVector> {
    let eig = a.eigen()?;
    let k = (0..eig.dim())
        .max_by(|&i, &j| eig.values[i].re.total_cmp(&eig.values[j].re))
        .ok_or_else(|| Error::arg("empty operator"))?;
    let col = eig.vectors.column(k);
    let mut v: Vec<f64> = col.iter().map(|z| z.re).collect();
    let im = col.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let re = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if im > 1e-8 * re {
        return Err(Error::arg("leading eigenvector is not real"));
    }
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let nrm = v.iter().zip(&a.space.weights).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    WeightVector::new(v)
}

/// Geometric times on [t_min, min(1, t_max)], then uniform on (1, t_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub geometric: usize,
    pub uniform: usize,
}

impl SampleGrid {
    pub const DEFAULT_T_MIN: f64 = 0.05;

    /// t_max = 10 / gap.
    pub fn for_gap(gap: f64) -> Self {
        SampleGrid { t_min: Self::DEFAULT_T_MIN, t_max: 10.0 / gap, geometric: 16, uniform: 24 }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(Error::arg(format!("bad sampling range [{}, {}]", self.t_min, self.t_max)));
        }
        let hi = self.t_max.min(1.0);
        let mut t = if hi > self.t_min {
            crate::estimates::geometric_grid(self.t_min, hi, self.geometric.max(2))
        } else {
            vec![self.t_min]
        };
        if self.t_max > 1.0 {
            let step = (self.t_max - 1.0) / self.uniform.max(1) as f64;
            t.extend((1..=self.uniform.max(1)).map(|k| 1.0 + step * k as f64));
        }
        Ok(t)
    }
}

/// e^{-t spb} T(t) with entrywise accuracy when the generator is Metzler.
struct Normalized {
    eval: SemigroupEvaluator,
    spb: f64,
}

impl Normalized {
    fn new(t: &SemigroupEvaluator) -> Result<Self> {
        let spb = spectral_bound(&t.generator)?;
        Ok(Normalized { eval: SemigroupEvaluator::new(t.generator.shifted(-spb))?, spb })
    }

    fn at(&self, t: f64) -> Result<RMat> {
        self.eval.evaluate_entrywise(t)
    }
}

/// min_ij M_ij / (u_i u_j w_j).
pub fn lower_bound_ratio(m: &RMat, u: &WeightVector, weights: &[f64]) -> f64 {
    let u = u.values();
    let n = u.len();
    let mut best = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            best = best.min(m[(i, j)] / (u[i] * u[j] * weights[j]));
        }
    }
    best
}

fn lower_bound_slack(m: &RMat, eps: f64, u: &WeightVector, weights: &[f64]) -> f64 {
    let u = u.values();
    let n = u.len();
    let mut best = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            best = best.min(m[(i, j)] - eps * u[i] * u[j] * weights[j]);
        }
    }
    best
}

fn persistent_from(ok: &[bool]) -> Option<usize> {
    let last_bad = ok.iter().rposition(|b| !b);
    match last_bad {
        None => Some(0),
        Some(k) if k + 1 < ok.len() => Some(k + 1),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub u: Vec<f64>,
    pub spb: f64,
    /// first sample after which the lower bound persists; None on FAIL
    pub tau: Option<f64>,
    pub epsilon: f64,
    pub t_samples: Vec<f64>,
    /// ε*(t) per sample
    pub ratios: Vec<f64>,
    /// min entry of e^{-t spb}T(t) − ε⟨u,·⟩u per sample (NaN before τ)
    pub margins: Vec<f64>,
    pub verdict: Verdict,
}

/// Certify e^{-t spb}T(t) >= ε⟨u,·⟩u for every sampled t >= τ.
pub fn uniform_positivity_certificate(
    t: &SemigroupEvaluator,
    u: &WeightVector,
    grid: &SampleGrid,
) -> Result<PositivityCertificate> {
    if u.len() != t.dim() {
        return Err(Error::Dimension { expected: t.dim(), got: u.len() });
    }
    let norm = Normalized::new(t)?;
    if !norm.spb.is_finite() {
        return Err(Error::NonFinite);
    }
    let times = grid.times()?;
    let w = t.weights();
    let mats = times.par_iter().map(|&s| norm.at(s)).collect::<Result<Vec<RMat>>>()?;
    let ratios: Vec<f64> = mats.iter().map(|m| lower_bound_ratio(m, u, w)).collect();
    let ok: Vec<bool> = ratios.iter().map(|r| *r > 0.0).collect();
    let start = persistent_from(&ok);
    let (tau, eps) = match start {
        Some(k) => (Some(times[k]), ratios[k..].iter().copied().fold(f64::INFINITY, f64::min)),
        None => (None, 0.0),
    };
    let margins: Vec<f64> = mats
        .iter()
        .enumerate()
        .map(|(k, m)| match start {
            Some(s) if k >= s => lower_bound_slack(m, eps, u, w),
            _ => f64::NAN,
        })
        .collect();
    let pass = tau.is_some() && eps > 0.0;
    Ok(PositivityCertificate {
        u: u.values().to_vec(),
        spb: norm.spb,
        tau,
        epsilon: eps,
        t_samples: times,
        ratios,
        margins,
        verdict: Verdict::from_bool(pass),
    })
}

/// Re-evaluate a certificate at fresh times; returns the worst entrywise slack.
pub fn recheck_certificate(cert: &PositivityCertificate, t: &SemigroupEvaluator, times: &[f64]) -> Result<f64> {
    let norm = Normalized::new(t)?;
    let u = WeightVector::new(cert.u.clone())?;
    let mut worst = f64::INFINITY;
    for &s in times {
        worst = worst.min(lower_bound_slack(&norm.at(s)?, cert.epsilon, &u, t.weights()));
    }
    Ok(worst)
}

/// Per test vector, the first sample after which e^{-t spb}T(t)x dominates a
/// positive multiple of u at every later sample.
pub fn individual_positivity_time(
    t: &SemigroupEvaluator,
    u: &WeightVector,
    test_vectors: &[Vec<f64>],
    grid: &SampleGrid,
) -> Result<Vec<Option<f64>>> {
    for x in test_vectors {
        if x.len() != t.dim() {
            return Err(Error::Dimension { expected: t.dim(), got: x.len() });
        }
        if x.iter().any(|v| *v < 0.0) || x.iter().all(|v| *v == 0.0) {
            return Err(Error::arg("test vectors must be nonnegative and nonzero"));
        }
    }
    let norm = Normalized::new(t)?;
    let times = grid.times()?;
    let mats = times.par_iter().map(|&s| norm.at(s)).collect::<Result<Vec<RMat>>>()?;
    test_vectors
        .iter()
        .map(|x| {
            let xv = nalgebra::DVector::from_column_slice(x);
            let ok = mats
                .iter()
                .map(|m| Ok(min_ratio_real((m * &xv).as_slice(), u)? > 0.0))
                .collect::<Result<Vec<bool>>>()?;
            Ok(persistent_from(&ok).map(|k| times[k]))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeEntry {
    pub t: f64,
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// ‖T(t)‖ in the weighted L² norm
    pub scale: f64,
}

/// First probe time at which T(t) has an entry below −1e−12‖T(t)‖; the most
/// negative entry at that time is returned.
pub fn detect_nonpositivity(t: &SemigroupEvaluator, probes: &[f64]) -> Result<Option<NegativeEntry>> {
    for &s in probes {
        let m = t.evaluate_entrywise(s)?;
        let (idx, v) = m.iter().enumerate().fold((0, f64::INFINITY), |b, (i, x)| if *x < b.1 { (i, *x) } else { b });
        if v >= 0.0 {
            continue;
        }
        let scale = op_norm(&m, OpNorm::L2ToL2, t.weights(), None)?;
        if v < -1e-12 * scale {
            let n = m.nrows();
            return Ok(Some(NegativeEntry { t: s, row: idx % n, col: idx / n, value: v, scale }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivitySweep {
    pub kappas: Vec<f64>,
    pub certificates: Vec<PositivityCertificate>,
    /// largest |κ| with PASS at every grid point of smaller or equal modulus
    pub delta_empirical: Option<f64>,
}

/// Uniform certificate for each T_κ on a shared sampling grid.
pub fn perturbed_positivity_sweep(
    family: &PerturbationFamily,
    u: &WeightVector,
    kappa_grid: &[f64],
    grid: &SampleGrid,
) -> Result<PositivitySweep> {
    if !family.direction.is_symmetric_l2 {
        return Err(Error::arg("positivity sweep needs a perturbation symmetric in L²"));
    }
    let certificates = kappa_grid
        .iter()
        .map(|&k| uniform_positivity_certificate(&SemigroupEvaluator::new(family.assemble(k))?, u, grid))
        .collect::<Result<Vec<_>>>()?;
    let pass: Vec<bool> = certificates.iter().map(|c| c.verdict == Verdict::Pass).collect();
    Ok(PositivitySweep {
        kappas: kappa_grid.to_vec(),
        delta_empirical: symmetric_prefix(kappa_grid, &pass),
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persistence_rule() {
        assert_eq!(persistent_from(&[true, true]), Some(0));
        assert_eq!(persistent_from(&[false, true, true]), Some(1));
        assert_eq!(persistent_from(&[true, false, true]), Some(2));
        assert_eq!(persistent_from(&[true, false]), None);
    }

    #[test]
    fn grid_shape() {
        let g = SampleGrid { t_min: 0.05, t_max: 5.0, geometric: 4, uniform: 4 };
        let t = g.times().unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t[0], 0.05);
        assert_eq!(t[3], 1.0);
        assert_eq!(*t.last().unwrap(), 5.0);
        assert!(t.windows(2).all(|p| p[0] < p[1]));
    }
}
