use super::{ensure_square, to_complex, CMat, RMat, C64};
use crate::{Error, Result};
use nalgebra::{linalg::Schur, DVector};

/// Accepted decompositions must reconstruct A to this relative accuracy.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Eigenbases worse conditioned than this are not trusted for functions of A.
pub const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone)]
struct RealBasis {
    values: Vec<f64>,
    vectors: RMat,
    inverse: RMat,
}

/// Right eigenpairs A V = V diag(values), with V^{-1} cached.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMat,
    pub reconstruction_residual: f64,
    inverse: CMat,
    condition: f64,
    real: Option<RealBasis>,
}

impl EigenDecomposition {
    /// Symmetric route when A is exactly symmetric, general route otherwise.
    pub fn auto(a: &RMat) -> Result<Self> {
        ensure_square(a)?;
        if a == &a.transpose() {
            Self::symmetric(a)
        } else {
            Self::general(a)
        }
    }

    pub fn symmetric(a: &RMat) -> Result<Self> {
        let w = vec![1.0; a.nrows()];
        Self::weighted_symmetric(a, &w)
    }

    /// A self-adjoint in the inner product <x,y> = sum w_j x_j y_j, i.e.
    /// diag(w) A symmetric. Eigenvalues are sorted ascending.
    pub fn weighted_symmetric(a: &RMat, w: &[f64]) -> Result<Self> {
        let n = ensure_square(a)?;
        if w.len() != n {
            return Err(Error::Dimension { expected: n, got: w.len() });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let mut m = RMat::from_fn(n, n, |i, j| s[i] * a[(i, j)] / s[j]);
        let mt = m.transpose();
        m = (m + mt) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let u = RMat::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
        // fix the sign of each eigenvector so that its largest entry is positive
        let mut u = u;
        for mut col in u.column_iter_mut() {
            let imax = col.iamax();
            if col[imax] < 0.0 {
                col.neg_mut();
            }
        }
        let vectors = RMat::from_fn(n, n, |i, k| u[(i, k)] / s[i]);
        let inverse = RMat::from_fn(n, n, |k, j| u[(j, k)] * s[j]);
        let residual = real_residual(a, &vectors, &values);
        let (smin, smax) = s.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
        let condition = smax / smin;
        Ok(EigenDecomposition {
            values: values.iter().map(|x| C64::new(*x, 0.0)).collect(),
            vectors: to_complex(&vectors),
            reconstruction_residual: residual,
            inverse: to_complex(&inverse),
            condition,
            real: Some(RealBasis { values, vectors, inverse }),
        })
    }

    /// General real matrix through the complex Schur form.
    pub fn general(a: &RMat) -> Result<Self> {
        let mut e = Self::general_complex(&to_complex(a))?;
        // keep a real basis when the spectrum comes out real
        let scale = e.values.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        if e.values.iter().all(|z| z.im.abs() <= 1e-10 * scale) {
            let n = e.values.len();
            let mut v = e.vectors.clone();
            for mut col in v.column_iter_mut() {
                // rotate so the largest entry is real positive, then drop the imaginary residue
                let imax = col.icamax();
                let ph = col[imax].conj() / col[imax].norm();
                col *= ph;
            }
            let vr = v.map(|z| z.re);
            if let Some(inv) = vr.clone().lu().try_inverse() {
                let values: Vec<f64> = e.values.iter().map(|z| z.re).collect();
                let residual = real_residual(a, &vr, &values);
                if residual <= e.reconstruction_residual.max(RECONSTRUCTION_TOL) && n > 0 {
                    e.vectors = to_complex(&vr);
                    e.inverse = to_complex(&inv);
                    e.values = values.iter().map(|x| C64::new(*x, 0.0)).collect();
                    e.reconstruction_residual = residual;
                    e.condition = frob_condition(&e.vectors, &e.inverse);
                    e.real = Some(RealBasis { values, vectors: vr, inverse: inv });
                }
            }
        }
        Ok(e)
    }

    pub fn general_complex(a: &CMat) -> Result<Self> {
        let n = ensure_square(a)?;
        if a.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        if n == 0 {
            return Ok(EigenDecomposition {
                values: vec![],
                vectors: CMat::zeros(0, 0),
                reconstruction_residual: 0.0,
                inverse: CMat::zeros(0, 0),
                condition: 1.0,
                real: None,
            });
        }
        let schur = Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))
            .ok_or_else(|| Error::NoConvergence("Schur iteration".into()))?;
        let (q, t) = schur.unpack();
        let tnorm = t.norm();
        let small = f64::EPSILON * tnorm.max(f64::MIN_POSITIVE);
        let mut y = CMat::zeros(n, n);
        for k in 0..n {
            let lk = t[(k, k)];
            y[(k, k)] = C64::new(1.0, 0.0);
            for j in (0..k).rev() {
                let mut s = C64::new(0.0, 0.0);
                for l in j + 1..=k {
                    s += t[(j, l)] * y[(l, k)];
                }
                let mut d = t[(j, j)] - lk;
                if d.norm() < small {
                    d = C64::new(small, 0.0);
                }
                y[(j, k)] = -s / d;
            }
        }
        let mut v = q * y;
        for mut col in v.column_iter_mut() {
            let nrm = col.norm();
            if nrm > 0.0 {
                col /= C64::new(nrm, 0.0);
            }
        }
        let mut values: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            values[i]
                .re
                .total_cmp(&values[j].re)
                .then(values[i].im.total_cmp(&values[j].im))
        });
        values = order.iter().map(|&k| values[k]).collect();
        let v = CMat::from_fn(n, n, |i, k| v[(i, order[k])]);
        let inverse = v
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::EigenRejected { residual: f64::INFINITY, condition: f64::INFINITY })?;
        let residual = complex_residual(a, &v, &values);
        let condition = frob_condition(&v, &inverse);
        Ok(EigenDecomposition {
            values,
            vectors: v,
            reconstruction_residual: residual,
            inverse,
            condition,
            real: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn inverse(&self) -> &CMat {
        &self.inverse
    }

    /// ‖V‖_F ‖V⁻¹‖_F / n, equal to 1 for unitary bases.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_accurate(&self) -> bool {
        self.reconstruction_residual <= RECONSTRUCTION_TOL && self.condition <= CONDITION_LIMIT
    }

    /// Fails with `EigenRejected` unless the decomposition is accurate.
    pub fn accepted(self) -> Result<Self> {
        if self.is_accurate() {
            Ok(self)
        } else {
            Err(Error::EigenRejected {
                residual: self.reconstruction_residual,
                condition: self.condition,
            })
        }
    }

    pub fn is_real(&self) -> bool {
        self.real.is_some()
    }

    pub fn real_values(&self) -> Option<&[f64]> {
        self.real.as_ref().map(|r| r.values.as_slice())
    }

    /// Real (V, V⁻¹) when available.
    pub fn real_basis(&self) -> Option<(&RMat, &RMat)> {
        self.real.as_ref().map(|r| (&r.vectors, &r.inverse))
    }

    /// V diag(f(λ)) V⁻¹.
    pub fn function<F: Fn(C64) -> C64>(&self, f: F) -> CMat {
        let mut vs = self.vectors.clone();
        for (k, mut col) in vs.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        vs * &self.inverse
    }

    pub fn real_function<F: Fn(f64) -> f64>(&self, f: F) -> Option<RMat> {
        let r = self.real.as_ref()?;
        let mut vs = r.vectors.clone();
        for (k, mut col) in vs.column_iter_mut().enumerate() {
            col *= f(r.values[k]);
        }
        Some(vs * &r.inverse)
    }

    /// Re(V e^{tΛ} V⁻¹); exact real arithmetic when the basis is real.
    pub fn exp_real(&self, t: f64) -> RMat {
        match self.real_function(|x| (t * x).exp()) {
            Some(m) => m,
            None => self.function(|z| (z * t).exp()).map(|z| z.re),
        }
    }

    /// Largest real part of the spectrum.
    pub fn max_real_part(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn real_residual(a: &RMat, v: &RMat, values: &[f64]) -> f64 {
    let n = a.nrows();
    let mut r = a * v;
    for k in 0..n {
        let lk = values[k];
        for i in 0..n {
            r[(i, k)] -= v[(i, k)] * lk;
        }
    }
    let scale = (a.norm() / (n as f64).sqrt()).max(values.iter().fold(0.0, |m, x| m.max(x.abs())));
    if scale == 0.0 {
        return r.norm();
    }
    r.norm() / scale
}

fn complex_residual(a: &CMat, v: &CMat, values: &[C64]) -> f64 {
    let n = a.nrows();
    let mut r = a * v;
    for k in 0..n {
        for i in 0..n {
            r[(i, k)] -= v[(i, k)] * values[k];
        }
    }
    let scale = (a.norm() / (n as f64).sqrt()).max(values.iter().fold(0.0, |m, x| m.max(x.norm())));
    if scale == 0.0 {
        return r.norm();
    }
    r.norm() / scale
}

fn frob_condition(v: &CMat, inv: &CMat) -> f64 {
    v.norm() * inv.norm() / v.nrows().max(1) as f64
}

#[allow(dead_code)]
pub(crate) fn diag(values: &[f64]) -> RMat {
    RMat::from_diagonal(&DVector::from_column_slice(values))
}
