//! Dense realizations of the elliptic operators and perturbations.
//!
//! Builders for elliptic operators return the positive form operator L;
//! the semigroup generator is its negation (see [`DiscreteOperator::negated`]).

use crate::lattice::GridSpace;
use crate::numkernel::{CMat, EigenDecomposition, RMat, C64};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: RMat,
    pub space: GridSpace,
    pub is_real: bool,
    /// self-adjoint for the weighted inner product of `space`
    pub is_symmetric_l2: bool,
    pub label: String,
    /// differential order (0 for bounded perturbations)
    pub order: u32,
}

impl DiscreteOperator {
    pub fn new(matrix: RMat, space: GridSpace, label: impl Into<String>) -> Result<Self> {
        let n = space.size();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension { expected: n, got: matrix.nrows() });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let sym = weighted_symmetry_defect(&matrix, &space.weights) <= 1e-10;
        Ok(DiscreteOperator {
            matrix,
            space,
            is_real: true,
            is_symmetric_l2: sym,
            label: label.into(),
            order: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_order(mut self, order: u32) -> Self {
        self.order = order;
        self
    }

    pub fn zero(space: &GridSpace) -> Self {
        let n = space.size();
        Self::new(RMat::zeros(n, n), space.clone(), "zero").expect("zero operator")
    }

    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.matrix = -&self.matrix;
        out.label = format!("-({})", self.label);
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.matrix = &self.matrix * k;
        out.label = format!("{k}*({})", self.label);
        out
    }

    /// self + gamma I
    pub fn shifted(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim() {
            out.matrix[(i, i)] += gamma;
        }
        out.label = format!("({}) + {gamma}", self.label);
        out
    }

    pub fn sum(&self, other: &DiscreteOperator) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: other.dim() });
        }
        Ok(Self::new(
            &self.matrix + &other.matrix,
            self.space.clone(),
            format!("{} + {}", self.label, other.label),
        )?
        .with_order(self.order.max(other.order)))
    }

    /// Eigendecomposition, using the weighted symmetric solver when possible.
    pub fn eigen(&self) -> Result<EigenDecomposition> {
        if self.is_symmetric_l2 {
            EigenDecomposition::weighted_symmetric(&self.matrix, &self.space.weights)
        } else {
            EigenDecomposition::general(&self.matrix)
        }
    }

    pub fn complex_matrix(&self) -> CMat {
        crate::numkernel::to_complex(&self.matrix)
    }
}

/// ‖DT − TᵀD‖_F / ‖DT‖_F with D = diag(w).
pub fn weighted_symmetry_defect(t: &RMat, w: &[f64]) -> f64 {
    let n = t.nrows();
    let dt = RMat::from_fn(n, n, |i, j| w[i] * t[(i, j)]);
    let scale = dt.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (&dt - dt.transpose()).norm() / scale
}

/// A(κ) = A + κB.
#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    pub base: DiscreteOperator,
    pub direction: DiscreteOperator,
}

impl PerturbationFamily {
    pub fn new(base: DiscreteOperator, direction: DiscreteOperator) -> Result<Self> {
        if base.dim() != direction.dim() {
            return Err(Error::Dimension { expected: base.dim(), got: direction.dim() });
        }
        Ok(PerturbationFamily { base, direction })
    }

    pub fn assemble(&self, kappa: f64) -> DiscreteOperator {
        if kappa == 0.0 {
            return self.base.clone();
        }
        let m = &self.base.matrix + &self.direction.matrix * kappa;
        let label = format!("{} + {kappa}*({})", self.base.label, self.direction.label);
        DiscreteOperator::new(m, self.base.space.clone(), label)
            .expect("affine assembly keeps shape")
            .with_order(self.base.order)
    }

    /// A + κB for complex κ.
    pub fn assemble_complex(&self, kappa: C64) -> CMat {
        let a = &self.base.matrix;
        let b = &self.direction.matrix;
        CMat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0) + kappa * b[(i, j)])
    }

    /// The scaled direction κB as an operator.
    pub fn perturbation(&self, kappa: f64) -> DiscreteOperator {
        self.direction.scaled(kappa)
    }
}

fn require_full(space: &GridSpace, what: &str) -> Result<()> {
    if space.interior_only {
        return Err(Error::arg(format!("{what} needs a grid that includes the boundary nodes")));
    }
    Ok(())
}

/// Stiffness matrix of Σ a(x_{i+1/2}) (Δu)(Δv)/h on the vertex grid.
fn stiffness<F: Fn(f64) -> f64>(space: &GridSpace, a: F) -> Result<RMat> {
    let n = space.size();
    let h = space.h;
    let mut k = RMat::zeros(n, n);
    for i in 0..n - 1 {
        let mid = 0.5 * (space.x[i] + space.x[i + 1]);
        let ai = a(mid);
        if !(ai > 0.0) || !ai.is_finite() {
            return Err(Error::arg(format!("coefficient must be positive, got a({mid}) = {ai}")));
        }
        let c = ai / h;
        k[(i, i)] += c;
        k[(i + 1, i + 1)] += c;
        k[(i, i + 1)] -= c;
        k[(i + 1, i)] -= c;
    }
    Ok(k)
}

fn form_to_operator(k: RMat, space: &GridSpace, label: String) -> Result<DiscreteOperator> {
    let w = &space.weights;
    let n = space.size();
    let l = RMat::from_fn(n, n, |i, j| k[(i, j)] / w[i]);
    DiscreteOperator::new(l, space.clone(), label)
}

/// L for the form ∫ a u'v' + β_l u(l)v(l) + β_r u(r)v(r) on the vertex grid.
pub fn build_robin_laplacian<F: Fn(f64) -> f64>(
    space: &GridSpace,
    a: F,
    beta_left: f64,
    beta_right: f64,
) -> Result<DiscreteOperator> {
    require_full(space, "robin laplacian")?;
    if !beta_left.is_finite() || !beta_right.is_finite() {
        return Err(Error::arg("robin coefficients must be finite"));
    }
    let mut k = stiffness(space, a)?;
    let last = space.size() - 1;
    k[(0, 0)] += beta_left;
    k[(last, last)] += beta_right;
    Ok(form_to_operator(k, space, format!("robin(bl={beta_left}, br={beta_right})"))?.with_order(2))
}

/// Neumann form with the boundary block N = v vᵀ on (left, right).
pub fn build_nonlocal_robin(space: &GridSpace, v_left: f64, v_right: f64) -> Result<DiscreteOperator> {
    require_full(space, "nonlocal robin")?;
    if (v_left + v_right).abs() > 1e-14 * (v_left.abs() + v_right.abs()).max(1.0) {
        return Err(Error::arg(format!(
            "boundary profile must have zero mean, got v = ({v_left}, {v_right})"
        )));
    }
    let mut k = stiffness(space, |_| 1.0)?;
    let idx = [0, space.size() - 1];
    let v = [v_left, v_right];
    for p in 0..2 {
        for q in 0..2 {
            k[(idx[p], idx[q])] += v[p] * v[q];
        }
    }
    Ok(form_to_operator(k, space, format!("nonlocal-robin(v=({v_left}, {v_right}))"))?.with_order(2))
}

/// Fourth-difference operator with clamped ends, on an interior-only grid.
///
/// The ghost value beyond each end mirrors the first interior value
/// (centered u' = 0 with u = 0 at the boundary node), which turns the
/// corner diagonal entry from 6 into 7.
pub fn build_clamped_bilaplacian(space: &GridSpace) -> Result<DiscreteOperator> {
    if !space.interior_only {
        return Err(Error::arg("clamped operator needs an interior-only grid"));
    }
    let n = space.size();
    if n < 8 {
        return Err(Error::arg(format!("clamped operator needs n >= 8, got {n}")));
    }
    let h4 = space.h.powi(4);
    let mut a = RMat::zeros(n, n);
    let stencil = [(-2isize, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)];
    for i in 0..n {
        for (d, c) in stencil {
            let j = i as isize + d;
            if j >= 0 && (j as usize) < n {
                a[(i, j as usize)] += c / h4;
            }
        }
    }
    a[(0, 0)] += 1.0 / h4;
    a[(n - 1, n - 1)] += 1.0 / h4;
    Ok(DiscreteOperator::new(a, space.clone(), "clamped-bilaplacian")?.with_order(4))
}

/// (L + γ)^s through the weighted eigendecomposition.
pub fn build_spectral_power(base: &DiscreteOperator, s: f64, shift: Option<f64>) -> Result<DiscreteOperator> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::arg(format!("power must lie in (0,1], got {s}")));
    }
    if !base.is_symmetric_l2 {
        return Err(Error::arg("spectral power needs an operator symmetric in L2"));
    }
    let op = match shift {
        Some(g) => base.shifted(g),
        None => base.clone(),
    };
    let eig = op.eigen()?.accepted()?;
    let vals = eig.real_values().expect("symmetric route is real");
    let top = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let low = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(low > 1e-12 * top.max(1.0)) {
        return Err(Error::arg(format!(
            "smallest eigenvalue {low:e} is not positive; supply a shift"
        )));
    }
    let m = eig.real_function(|x| x.powf(s)).expect("real basis");
    let mut out = DiscreteOperator::new(m, base.space.clone(), format!("({})^{s}", op.label))?;
    out.order = base.order;
    // the eigen-route result is symmetric up to rounding of V V⁻¹
    out.is_symmetric_l2 = weighted_symmetry_defect(&out.matrix, &out.space.weights) <= 1e-9;
    Ok(out)
}

/// (Bx)_i = sign * x(x0) for every i; x0 snaps to the nearest node.
pub fn build_delta_perturbation(space: &GridSpace, x0: f64, sign: f64) -> Result<DiscreteOperator> {
    if !(x0 >= space.left && x0 <= space.right) {
        return Err(Error::arg(format!("point {x0} lies outside [{}, {}]", space.left, space.right)));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::arg("sign must be +1 or -1"));
    }
    let (j, d) = space.nearest_node(x0);
    if d > 1e-12 * space.h {
        log::warn!("point evaluation at {x0} snapped to grid node {} (distance {d:e})", space.x[j]);
    }
    let n = space.size();
    let mut b = RMat::zeros(n, n);
    for i in 0..n {
        b[(i, j)] = sign;
    }
    DiscreteOperator::new(b, space.clone(), format!("delta(x0={}, sign={sign})", space.x[j]))
}

/// B_ij = k_ij w_j.
pub fn build_kernel_perturbation(space: &GridSpace, k: &RMat, symmetric: bool) -> Result<DiscreteOperator> {
    let n = space.size();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::Dimension { expected: n, got: k.nrows() });
    }
    if symmetric && (k - k.transpose()).amax() > 1e-14 * k.amax().max(1.0) {
        return Err(Error::arg("kernel flagged symmetric but k_ij != k_ji"));
    }
    let b = RMat::from_fn(n, n, |i, j| k[(i, j)] * space.weights[j]);
    DiscreteOperator::new(b, space.clone(), "kernel")
}

/// Kernel matrix sampled from a function of (x, y).
pub fn sample_kernel<F: Fn(f64, f64) -> f64>(space: &GridSpace, f: F) -> RMat {
    let n = space.size();
    RMat::from_fn(n, n, |i, j| f(space.x[i], space.x[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn neumann(n: usize) -> DiscreteOperator {
        let g = GridSpace::new(-PI, PI, n).unwrap();
        build_robin_laplacian(&g, |_| 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn neumann_kills_constants() {
        let l = neumann(100);
        assert!(l.is_symmetric_l2);
        let one = nalgebra::DVector::from_element(l.dim(), 1.0);
        assert!((&l.matrix * one).norm() <= 1e-10);
    }

    #[test]
    fn rejects_degenerate_coefficient() {
        let g = GridSpace::new(-PI, PI, 20).unwrap();
        assert!(build_robin_laplacian(&g, |x| x, 0.0, 0.0).is_err());
    }

    #[test]
    fn nonlocal_block() {
        let g = GridSpace::new(-PI, PI, 30).unwrap();
        let zero = build_nonlocal_robin(&g, 0.0, 0.0).unwrap();
        assert_eq!(zero.matrix, neumann(30).matrix);
        assert!(build_nonlocal_robin(&g, 1.0, 0.5).is_err());
        let nl = build_nonlocal_robin(&g, 1.0, -1.0).unwrap();
        assert!(nl.is_symmetric_l2);
        let one = nalgebra::DVector::from_element(nl.dim(), 1.0);
        assert!((&nl.matrix * one).norm() < 1e-10);
    }

    #[test]
    fn clamped_basics() {
        let g = GridSpace::interior(-PI, PI, 40).unwrap();
        let b = build_clamped_bilaplacian(&g).unwrap();
        assert!(b.is_symmetric_l2);
        assert_eq!(b.matrix[(0, 0)] * g.h.powi(4), 7.0);
        let small = GridSpace::interior(0.0, 1.0, 5).unwrap();
        assert!(build_clamped_bilaplacian(&small).is_err());
        assert!(build_clamped_bilaplacian(&GridSpace::new(0.0, 1.0, 20).unwrap()).is_err());
    }

    #[test]
    fn delta_column() {
        let g = GridSpace::new(-PI, PI, 20).unwrap();
        let b = build_delta_perturbation(&g, 0.0, -1.0).unwrap();
        let one = nalgebra::DVector::from_element(b.dim(), 1.0);
        assert!((&b.matrix * one).iter().all(|v| *v == -1.0));
        assert!(build_delta_perturbation(&g, 4.0, 1.0).is_err());
    }

    #[test]
    fn family_is_affine() {
        let g = GridSpace::new(-PI, PI, 20).unwrap();
        let fam = PerturbationFamily::new(
            neumann(20).negated(),
            build_delta_perturbation(&g, 0.0, -1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(fam.assemble(0.0).matrix, fam.base.matrix);
        let (k1, k2) = (0.3, -0.7);
        let d = fam.assemble(k1).matrix + fam.assemble(k2).matrix - fam.assemble(0.5 * (k1 + k2)).matrix * 2.0;
        assert!(d.amax() < 1e-12 * fam.base.matrix.amax());
    }
}
