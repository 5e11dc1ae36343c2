use super::{ensure_square, one_norm, EigenDecomposition, RMat};
use crate::{Error, Result};
use nalgebra::{ComplexField, DMatrix};

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn sc<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, b: f64) -> DMatrix<T> {
    m * T::from_real(b)
}

/// Scaling-and-squaring with diagonal Padé approximants (degrees 3..13).
pub fn pade_expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = ensure_square(a)?;
    if a.iter().any(|x| !x.clone().is_finite()) {
        return Err(Error::NonFinite);
    }
    let id = DMatrix::<T>::identity(n, n);
    if n == 0 {
        return Ok(id);
    }
    let norm = one_norm(a);
    for (m, theta) in THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let a2 = a * a;
            let mut pow = id.clone();
            let mut u = sc(&id, b[1]);
            let mut v = sc(&id, b[0]);
            for k in 1..=m / 2 {
                pow = &pow * &a2;
                u += sc(&pow, b[2 * k + 1]);
                v += sc(&pow, b[2 * k]);
            }
            let u = a * u;
            return solve_pade(&u, &v);
        }
    }
    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let a = sc(a, 2f64.powi(-s));
    let b = &B13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (sc(&a6, b[13]) + sc(&a4, b[11]) + sc(&a2, b[9]));
    let u = &a * (inner_u + sc(&a6, b[7]) + sc(&a4, b[5]) + sc(&a2, b[3]) + sc(&id, b[1]));
    let inner_v = &a6 * (sc(&a6, b[12]) + sc(&a4, b[10]) + sc(&a2, b[8]));
    let v = inner_v + sc(&a6, b[6]) + sc(&a4, b[4]) + sc(&a2, b[2]) + sc(&id, b[0]);
    let mut r = solve_pade(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn solve_pade<T: ComplexField<RealField = f64>>(u: &DMatrix<T>, v: &DMatrix<T>) -> Result<DMatrix<T>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::NoConvergence("singular Pade denominator".into()))
}

/// e^{tA}. The eigendecomposition is the primary route; an ill-conditioned or
/// inaccurate eigenbasis falls back to Padé scaling-and-squaring.
pub fn matrix_exp(a: &RMat, t: f64) -> Result<RMat> {
    let n = ensure_square(a)?;
    if !t.is_finite() {
        return Err(Error::arg("time must be finite"));
    }
    if t == 0.0 {
        return Ok(RMat::identity(n, n));
    }
    match EigenDecomposition::auto(a) {
        Ok(eig) if eig.is_accurate() => Ok(eig.exp_real(t)),
        Ok(eig) => {
            log::debug!(
                "eigen route rejected (residual {:e}, cond {:e}); using Pade",
                eig.reconstruction_residual,
                eig.condition()
            );
            pade_expm(&(a * t))
        }
        Err(_) => pade_expm(&(a * t)),
    }
}

/// e^{tA} for a Metzler matrix (nonnegative off-diagonal) through a
/// uniformized Taylor series with only nonnegative terms, so every entry is
/// accurate to a few ulps relative to itself. Returns `None` if A is not
/// Metzler or t < 0.
pub fn nonnegative_exp(a: &RMat, t: f64) -> Option<RMat> {
    let n = a.nrows();
    if n != a.ncols() || !(t >= 0.0) {
        return None;
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && a[(i, j)] < 0.0 {
                return None;
            }
        }
    }
    let c = (0..n).map(|i| -a[(i, i)]).fold(0.0, f64::max);
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] += c;
    }
    let nu = t * one_norm(&m);
    let s = if nu > 0.5 { (nu / 0.5).log2().ceil() as i32 } else { 0 };
    let tau = t / 2f64.powi(s);
    let mt = &m * tau;
    let mut term = RMat::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &mt / k as f64;
        sum += &term;
        if term.amax() <= 1e-22 * sum.amax() {
            break;
        }
    }
    sum *= (-c * tau).exp();
    for _ in 0..s {
        sum = &sum * &sum;
    }
    Some(sum)
}
