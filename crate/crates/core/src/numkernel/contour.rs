use super::{ensure_square, CMat, C64};
use crate::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Equispaced nodes on a positively oriented circle with trapezoidal weights
/// for (1/2πi)∮ f(λ) dλ.
#[derive(Debug, Clone)]
pub struct ContourNodes {
    pub center: C64,
    pub radius: f64,
    pub m: usize,
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
}

impl ContourNodes {
    pub fn circle(center: C64, radius: f64, m: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::arg(format!("contour radius must be positive, got {radius}")));
        }
        if m < 2 {
            return Err(Error::arg("contour needs at least two nodes"));
        }
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for j in 0..m {
            let e = C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            nodes.push(center + e * radius);
            // dλ = i r e^{iθ} dθ, so dλ/(2πi) = r e^{iθ} dθ / 2π
            weights.push(e * (radius / m as f64));
        }
        Ok(ContourNodes { center, radius, m, nodes, weights })
    }

    /// Trapezoidal sum of w_j f(λ_j).
    pub fn integrate<F: Fn(C64) -> C64>(&self, f: F) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }
}

/// Solve (λI − A) X = RHS.
pub fn resolvent_apply(a: &CMat, lambda: C64, rhs: &CMat) -> Result<CMat> {
    let n = ensure_square(a)?;
    if rhs.nrows() != n {
        return Err(Error::Dimension { expected: n, got: rhs.nrows() });
    }
    let mut shifted = -a.clone();
    for i in 0..n {
        shifted[(i, i)] += lambda;
    }
    let scale = shifted.norm().max(f64::MIN_POSITIVE);
    let x = shifted.clone().lu().solve(rhs).ok_or(Error::SpectralCollision(lambda))?;
    // LU pivots of stiff matrices are small without any collision, so the
    // test is on the growth ‖X‖/‖RHS‖, a lower bound for ‖R(λ,A)‖
    let rhs_norm = rhs.norm();
    let x_norm = x.norm();
    if !x_norm.is_finite() || x_norm * 1e3 * f64::EPSILON * scale > rhs_norm {
        return Err(Error::SpectralCollision(lambda));
    }
    // normwise backward error of the solve
    let res = (&shifted * &x - rhs).norm();
    if res > 1e3 * f64::EPSILON * (scale * x_norm + rhs_norm) {
        return Err(Error::SpectralCollision(lambda));
    }
    Ok(x)
}

/// R(λ, A) as a dense matrix.
pub fn resolvent_inverse(a: &CMat, lambda: C64) -> Result<CMat> {
    let n = ensure_square(a)?;
    resolvent_apply(a, lambda, &CMat::identity(n, n))
}

/// P ≈ (1/2πi)∮ R(λ,A) dλ by the trapezoidal rule on the given circle.
pub fn contour_projection_quadrature(a: &CMat, c: &ContourNodes) -> Result<CMat> {
    let n = ensure_square(a)?;
    let terms: Vec<Result<CMat>> = c
        .nodes
        .par_iter()
        .zip(c.weights.par_iter())
        .map(|(z, w)| resolvent_inverse(a, *z).map(|r| r * *w))
        .collect();
    let mut p = CMat::zeros(n, n);
    for t in terms {
        p += t?;
    }
    Ok(p)
}

/// Contour projection starting at m nodes and doubling until successive
/// projectors differ by less than `tol` in Frobenius norm. Returns (P, m used).
pub fn contour_projection(a: &CMat, center: C64, radius: f64, m: usize, tol: f64) -> Result<(CMat, usize)> {
    const MAX_NODES: usize = 4096;
    let mut m = m.max(4);
    let mut p = contour_projection_quadrature(a, &ContourNodes::circle(center, radius, m)?)?;
    loop {
        // the 2m rule reuses the m nodes: P_2m = (P_m + P_odd) / 2
        let odd = ContourNodes::circle(center, radius, 2 * m)?;
        let shifted = ContourNodes {
            center,
            radius,
            m,
            nodes: odd.nodes.iter().skip(1).step_by(2).copied().collect(),
            weights: odd.weights.iter().skip(1).step_by(2).map(|w| w * 2.0).collect(),
        };
        let p_odd = contour_projection_quadrature(a, &shifted)?;
        let next = (&p + p_odd) * C64::new(0.5, 0.0);
        let change = (&next - &p).norm();
        p = next;
        m *= 2;
        if change < tol {
            return Ok((p, m));
        }
        if m >= MAX_NODES {
            return Err(Error::NoConvergence(format!(
                "contour projector still changing by {change:e} at {m} nodes"
            )));
        }
    }
}
