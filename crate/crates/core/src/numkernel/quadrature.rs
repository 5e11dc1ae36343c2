use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre after the substitution s = len * sigma^p that
/// absorbs an endpoint singularity s^(-beta).
#[derive(Debug, Clone)]
pub struct SingularRule {
    pub panels: usize,
    pub order: usize,
}

impl Default for SingularRule {
    fn default() -> Self {
        SingularRule { panels: 16, order: 16 }
    }
}

impl SingularRule {
    pub fn new(panels: usize, order: usize) -> Self {
        SingularRule { panels, order }
    }

    /// Nodes d in (0, len) and weights for integrands behaving like d^(-beta).
    ///
    /// beta = 0 is the plain composite rule. For beta < 0 (a vanishing power
    /// rather than a singularity) s = len * sigma^2 is used, which smooths
    /// half-integer powers.
    pub fn nodes(&self, len: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(beta < 1.0) {
            return Err(Error::arg(format!("endpoint exponent {beta} is not integrable")));
        }
        if self.panels == 0 || self.order == 0 {
            return Err(Error::arg("rule needs at least one panel and one node"));
        }
        let p = if beta >= 0.0 { 1.0 / (1.0 - beta) } else { 2.0 };
        let (gx, gw) = gauss_legendre(self.order);
        let h = 1.0 / self.panels as f64;
        let mut d = Vec::with_capacity(self.panels * self.order);
        let mut wd = Vec::with_capacity(self.panels * self.order);
        for k in 0..self.panels {
            let a = k as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                let sigma = a + 0.5 * h * (x + 1.0);
                let ws = 0.5 * h * w;
                d.push(len * sigma.powf(p));
                wd.push(ws * len * p * sigma.powf(p - 1.0));
            }
        }
        Ok((d, wd))
    }

    /// Integral over (0, t) of f with f(s) ~ s^(-beta) near 0.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, t: f64, beta: f64) -> Result<f64> {
        check_horizon(t)?;
        let (d, w) = self.nodes(t, beta)?;
        Ok(d.iter().zip(&w).map(|(s, w)| w * f(*s)).sum())
    }

    /// Integral over (0, t) of f(s, t - s) with singular exponents at both ends.
    ///
    /// The interval is split at t/2 and each half substituted toward its own
    /// endpoint; the second argument is the exact distance to t so integrands
    /// singular at t do not suffer cancellation.
    pub fn integrate_two_sided<F: Fn(f64, f64) -> f64>(
        &self,
        f: F,
        t: f64,
        beta_left: f64,
        beta_right: f64,
    ) -> Result<f64> {
        check_horizon(t)?;
        let half = 0.5 * t;
        let (dl, wl) = self.nodes(half, beta_left)?;
        let (dr, wr) = self.nodes(half, beta_right)?;
        let left: f64 = dl.iter().zip(&wl).map(|(s, w)| w * f(*s, t - s)).sum();
        let right: f64 = dr.iter().zip(&wr).map(|(r, w)| w * f(t - r, *r)).sum();
        Ok(left + right)
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::arg(format!("integration horizon must be positive, got {t}")));
    }
    Ok(())
}

/// ∫₀ᵗ f(s) ds for f(s) ~ s^(-beta) near 0, default rule.
pub fn singular_quadrature<F: Fn(f64) -> f64>(f: F, t: f64, beta: f64) -> Result<f64> {
    SingularRule::default().integrate(f, t, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::gamma_fn;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn constant_integrand() {
        let v = singular_quadrature(|_| 1.0, 1.0, 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beta_half_both_ends_gives_pi() {
        let rule = SingularRule::default();
        let v = rule
            .integrate_two_sided(|s, r| r.powf(-0.5) * s.powf(-0.5), 1.0, 0.5, 0.5)
            .unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn polynomial_convolution() {
        let v = singular_quadrature(|s| 2.0 - s, 2.0, 0.0).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn left_singularity_converges() {
        // ∫₀¹ s^-0.7 e^s ds, reference by series sum_k 1/(k!(k+0.3))
        let mut exact = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            exact += 1.0 / (fact * (k as f64 + 0.3));
        }
        let v = singular_quadrature(|s| s.powf(-0.7) * s.exp(), 1.0, 0.7).unwrap();
        assert!((v - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn rejects_nonintegrable() {
        assert!(singular_quadrature(|s| 1.0 / s, 1.0, 1.0).is_err());
        assert!(singular_quadrature(|_| 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn convolution_identity_grid() {
        let grid = [0.3, 0.5, 0.9, 1.5];
        let rule = SingularRule::default();
        for &a in &grid {
            for &b in &grid {
                let t = 1.7;
                let q = rule
                    .integrate_two_sided(
                        |s, r| r.powf(a - 1.0) * s.powf(b - 1.0),
                        t,
                        1.0 - b,
                        1.0 - a,
                    )
                    .unwrap();
                let exact = t.powf(a + b - 1.0) * gamma_fn(a).unwrap() * gamma_fn(b).unwrap()
                    / gamma_fn(a + b).unwrap();
                assert!(((q - exact) / exact).abs() < 1e-8, "a={a} b={b}");
            }
        }
    }
}
