//! Dense linear algebra, special functions and quadrature shared by every
//! other module.

mod contour;
mod eigen;
mod expm;
mod quadrature;
mod special;

pub use contour::{
    contour_projection, contour_projection_quadrature, resolvent_apply, resolvent_inverse,
    ContourNodes,
};
pub use eigen::EigenDecomposition;
pub use expm::{matrix_exp, nonnegative_exp, pade_expm};
pub use quadrature::{gauss_legendre, singular_quadrature, SingularRule};
pub use special::{gamma_fn, ln_gamma, mittag_leffler};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type RMat = nalgebra::DMatrix<f64>;
pub type CMat = nalgebra::DMatrix<C64>;

use crate::{Error, Result};

pub(crate) fn ensure_square<T>(m: &nalgebra::DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Promote a real matrix to complex entries.
pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Largest singular value.
pub fn spectral_norm(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn spectral_norm_c(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Maximum absolute column sum.
pub(crate) fn one_norm<T: nalgebra::ComplexField<RealField = f64>>(m: &nalgebra::DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
