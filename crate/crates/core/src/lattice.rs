//! Weighted grid function spaces: L², L^p, sup and the gauge norm of the
//! principal ideal generated by a positive vector.

use crate::numkernel::{RMat, C64};
use crate::{Error, Result};
use nalgebra::{ComplexField, DMatrix};

/// Uniform vertex grid on [left, right] with trapezoidal weights.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpace {
    pub left: f64,
    pub right: f64,
    /// interior point count
    pub n: usize,
    pub h: f64,
    pub x: Vec<f64>,
    pub weights: Vec<f64>,
    pub boundary_indices: Vec<usize>,
    /// boundary nodes eliminated (homogeneous Dirichlet data)
    pub interior_only: bool,
}

impl GridSpace {
    /// n interior points plus both endpoints.
    pub fn new(left: f64, right: f64, n: usize) -> Result<Self> {
        Self::check(left, right, n)?;
        let h = (right - left) / (n + 1) as f64;
        let size = n + 2;
        let x: Vec<f64> = (0..size)
            .map(|j| if j == size - 1 { right } else { left + h * j as f64 })
            .collect();
        let mut weights = vec![h; size];
        weights[0] = 0.5 * h;
        weights[size - 1] = 0.5 * h;
        Ok(GridSpace {
            left,
            right,
            n,
            h,
            x,
            weights,
            boundary_indices: vec![0, size - 1],
            interior_only: false,
        })
    }

    /// Interior points only; the eliminated endpoints carry zero values, so
    /// the weights sum to (right - left) - h.
    pub fn interior(left: f64, right: f64, n: usize) -> Result<Self> {
        Self::check(left, right, n)?;
        let h = (right - left) / (n + 1) as f64;
        Ok(GridSpace {
            left,
            right,
            n,
            h,
            x: (1..=n).map(|j| left + h * j as f64).collect(),
            weights: vec![h; n],
            boundary_indices: vec![],
            interior_only: true,
        })
    }

    fn check(left: f64, right: f64, n: usize) -> Result<()> {
        if !(left.is_finite() && right.is_finite() && left < right) {
            return Err(Error::arg(format!("bad interval [{left}, {right}]")));
        }
        if n < 1 {
            return Err(Error::arg("grid needs at least one interior point"));
        }
        Ok(())
    }

    /// Number of grid nodes carrying unknowns.
    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the node nearest to x0 and its distance.
    pub fn nearest_node(&self, x0: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, xj) in self.x.iter().enumerate() {
            let d = (xj - x0).abs();
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }

    pub fn vector(&self, values: Vec<f64>) -> Result<LatticeVector<'_>> {
        LatticeVector::real(self, values)
    }

    pub fn constant(&self, c: f64) -> LatticeVector<'_> {
        LatticeVector {
            values: vec![C64::new(c, 0.0); self.size()],
            space: self,
        }
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> LatticeVector<'_> {
        LatticeVector {
            values: self.x.iter().map(|x| C64::new(f(*x), 0.0)).collect(),
            space: self,
        }
    }
}

/// Grid function, real or complex.
#[derive(Debug, Clone)]
pub struct LatticeVector<'a> {
    pub values: Vec<C64>,
    pub space: &'a GridSpace,
}

impl<'a> LatticeVector<'a> {
    pub fn real(space: &'a GridSpace, values: Vec<f64>) -> Result<Self> {
        Self::complex(space, values.into_iter().map(|x| C64::new(x, 0.0)).collect())
    }

    pub fn complex(space: &'a GridSpace, values: Vec<C64>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::Dimension { expected: space.size(), got: values.len() });
        }
        Ok(LatticeVector { values, space })
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn norm(&self, which: NormKind) -> Result<f64> {
        norm_abs(self.values.iter().map(|z| z.norm()), &self.space.weights, which)
    }
}

/// Strictly positive reference vector u.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeightVector {
    u: Vec<f64>,
}

impl WeightVector {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() || u.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::arg("reference vector must be strictly positive and finite"));
        }
        Ok(WeightVector { u })
    }

    pub fn ones(n: usize) -> Self {
        WeightVector { u: vec![1.0; n] }
    }

    /// Rescaled to unit weighted L² norm.
    pub fn normalized(&self, weights: &[f64]) -> Result<Self> {
        let nrm = norm_abs(self.u.iter().copied(), weights, NormKind::L2)?;
        Ok(WeightVector { u: self.u.iter().map(|x| x / nrm).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum NormKind {
    L2,
    Lp(f64),
    Sup,
    Gauge,
}

fn norm_abs<I: Iterator<Item = f64>>(abs: I, w: &[f64], which: NormKind) -> Result<f64> {
    match which {
        NormKind::L2 => Ok(abs.zip(w).map(|(a, w)| w * a * a).sum::<f64>().sqrt()),
        NormKind::Lp(p) => {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::arg(format!("L^p needs finite p >= 1, got {p}")));
            }
            // scale by the max entry to avoid overflow of a^p
            let a: Vec<f64> = abs.collect();
            let m = a.iter().fold(0.0, |m: f64, x| m.max(*x));
            if m == 0.0 {
                return Ok(0.0);
            }
            let s: f64 = a.iter().zip(w).map(|(a, w)| w * (a / m).powf(p)).sum();
            Ok(m * s.powf(1.0 / p))
        }
        NormKind::Sup => Ok(abs.fold(0.0, f64::max)),
        NormKind::Gauge => Err(Error::arg("gauge norm needs a reference vector")),
    }
}

/// L², L^p or sup norm of a grid function given as plain values.
pub fn norm(values: &[f64], weights: &[f64], which: NormKind) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Dimension { expected: weights.len(), got: values.len() });
    }
    norm_abs(values.iter().map(|x| x.abs()), weights, which)
}

/// inf{c > 0 : |x| <= c u} = max_j |x_j| / u_j.
pub fn gauge_norm(x: &[f64], u: &WeightVector) -> Result<f64> {
    if x.len() != u.len() {
        return Err(Error::Dimension { expected: u.len(), got: x.len() });
    }
    Ok(x.iter().zip(u.values()).map(|(x, u)| x.abs() / u).fold(0.0, f64::max))
}

/// Supported operator norm pairs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum OpNorm {
    L2ToSup,
    L2ToL2,
    LpToSup(f64),
    GaugeToGauge,
}

impl OpNorm {
    /// Map a (from, to) pair onto a supported operator norm.
    pub fn from_pair(from: NormKind, to: NormKind) -> Result<Self> {
        match (from, to) {
            (NormKind::L2, NormKind::Sup) => Ok(OpNorm::L2ToSup),
            (NormKind::L2, NormKind::L2) => Ok(OpNorm::L2ToL2),
            (NormKind::Lp(p), NormKind::Sup) => Ok(OpNorm::LpToSup(p)),
            (NormKind::Gauge, NormKind::Gauge) => Ok(OpNorm::GaugeToGauge),
            (f, t) => Err(Error::arg(format!("unsupported operator norm {f:?} -> {t:?}"))),
        }
    }
}

/// Operator norm of a matrix acting on grid functions with the given weights.
pub fn op_norm<T: ComplexField<RealField = f64>>(
    t: &DMatrix<T>,
    which: OpNorm,
    weights: &[f64],
    u: Option<&WeightVector>,
) -> Result<f64> {
    let n = weights.len();
    if t.ncols() != n || t.nrows() != n {
        return Err(Error::Dimension { expected: n, got: t.ncols() });
    }
    let abs = |i: usize, j: usize| t[(i, j)].clone().abs();
    match which {
        OpNorm::L2ToSup => Ok((0..n)
            .map(|i| (0..n).map(|j| abs(i, j).powi(2) / weights[j]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)),
        OpNorm::LpToSup(p) => {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::arg(format!("L^p needs finite p >= 1, got {p}")));
            }
            if p == 1.0 {
                return Ok((0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| abs(i, j) / weights[j])
                    .fold(0.0, f64::max));
            }
            let q = p / (p - 1.0);
            Ok((0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| abs(i, j).powf(q) * weights[j].powf(1.0 - q))
                        .sum::<f64>()
                        .powf(1.0 / q)
                })
                .fold(0.0, f64::max))
        }
        OpNorm::L2ToL2 => {
            let s: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
            let m = DMatrix::<T>::from_fn(n, n, |i, j| t[(i, j)].clone() * T::from_real(s[i] / s[j]));
            Ok(if n == 0 { 0.0 } else { m.singular_values().max() })
        }
        OpNorm::GaugeToGauge => {
            let u = u.ok_or_else(|| Error::arg("gauge operator norm needs a reference vector"))?;
            if u.len() != n {
                return Err(Error::Dimension { expected: n, got: u.len() });
            }
            let u = u.values();
            Ok((0..n)
                .map(|i| (0..n).map(|j| abs(i, j) * u[j]).sum::<f64>() / u[i])
                .fold(0.0, f64::max))
        }
    }
}

/// M_ij = u_i u_j w_j, i.e. M x = <u, x> u.
pub fn rank_one_positive(u: &WeightVector, space: &GridSpace) -> Result<RMat> {
    let n = space.size();
    if u.len() != n {
        return Err(Error::Dimension { expected: n, got: u.len() });
    }
    let u = u.values();
    Ok(RMat::from_fn(n, n, |i, j| u[i] * u[j] * space.weights[j]))
}

/// min_j x_j / u_j; positive exactly when x dominates a multiple of u.
pub fn min_ratio(x: &LatticeVector<'_>, u: &WeightVector) -> Result<f64> {
    if !x.is_real() {
        return Err(Error::arg("order comparison needs a real vector"));
    }
    min_ratio_real(&x.re(), u)
}

pub fn min_ratio_real(x: &[f64], u: &WeightVector) -> Result<f64> {
    if x.len() != u.len() {
        return Err(Error::Dimension { expected: u.len(), got: x.len() });
    }
    Ok(x.iter().zip(u.values()).map(|(x, u)| x / u).fold(f64::INFINITY, f64::min))
}

/// Constant of the embedding E_u -> L², ‖x‖₂ <= ‖u‖₂ ‖x‖_u.
pub fn embedding_constant(space: &GridSpace, u: &WeightVector) -> Result<f64> {
    norm(u.values(), &space.weights, NormKind::L2)
}
