//! Small dense complex linear algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GiaError, Result};

pub type CMat = DMatrix<Complex64>;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// Matrix with i.i.d. circularly symmetric CN(0, 1) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Haar-like random matrix with orthonormal columns.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    if cols == 0 {
        return zeros(rows, 0);
    }
    orthonormalize(&complex_gaussian(rows, cols, rng))
}

/// Orthonormal basis of the column span (modified Gram-Schmidt, two passes).
/// Columns numerically dependent on earlier ones are dropped.
pub fn orthonormalize(m: &CMat) -> CMat {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(m.ncols());
    for c in 0..m.ncols() {
        let mut v = m.column(c).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let n = v.norm();
        if n > 1e-12 * scale {
            basis.push(v / Complex64::new(n, 0.0));
        }
    }
    let rows = m.nrows();
    CMat::from_fn(rows, basis.len(), |r, c| basis[c][r])
}

/// Right singular vectors of `x` for its `count` smallest singular values,
/// together with those singular values (ascending). Wide matrices are padded
/// with zero rows so that the full right basis is available.
pub fn min_right_singular(x: &CMat, count: usize) -> (CMat, Vec<f64>) {
    let cols = x.ncols();
    assert!(count <= cols, "requested {count} vectors from a {cols}-dimensional space");
    if count == 0 {
        return (zeros(cols, 0), Vec::new());
    }
    if x.nrows() == 0 {
        return (CMat::identity(cols, count), vec![0.0; count]);
    }
    if x.nrows() + count <= cols {
        return (complement_basis(x, count), vec![0.0; count]);
    }
    let padded = if x.nrows() < cols {
        let mut p = zeros(cols, cols);
        p.view_mut((0, 0), (x.nrows(), cols)).copy_from(x);
        p
    } else {
        x.clone()
    };
    let svd = nalgebra::SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let n = svd.singular_values.len();
    let mut out = zeros(cols, count);
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let row = n - 1 - i;
        values.push(svd.singular_values[row]);
        for c in 0..cols {
            out[(c, i)] = v_t[(row, c)].conj();
        }
    }
    (out, values)
}

/// `count` orthonormal vectors orthogonal to every row of `x` (requires
/// `rows + count <= cols`), from a Householder QR of `[x^H | I]`.
fn complement_basis(x: &CMat, count: usize) -> CMat {
    let (rows, cols) = x.shape();
    let mut aug = zeros(cols, rows + cols);
    aug.view_mut((0, 0), (cols, rows)).copy_from(&x.adjoint());
    for i in 0..cols {
        aug[(i, rows + i)] = Complex64::new(1.0, 0.0);
    }
    let q = nalgebra::QR::new(aug).q();
    q.columns(cols - count, count).into_owned()
}

/// Orthonormal basis of the null space of `a`, using a relative rank tolerance.
pub fn null_space(a: &CMat, rel_tol: f64) -> CMat {
    let cols = a.ncols();
    if a.nrows() == 0 {
        return CMat::identity(cols, cols);
    }
    let (all, values) = min_right_singular(a, cols);
    let largest = values.iter().cloned().fold(0.0, f64::max);
    let nullity = values.iter().take_while(|&&s| s <= rel_tol * largest.max(f64::MIN_POSITIVE)).count();
    let nullity = if largest == 0.0 { cols } else { nullity };
    all.columns(0, nullity).into_owned()
}

/// Eigenvector of a general square matrix for the eigenvalue with the largest
/// modulus, by shifted inverse iteration seeded from the Schur eigenvalues.
pub fn dominant_eigenvector(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return Err(GiaError::DimensionMismatch("eigenvector of a non-square matrix".into()));
    }
    let eig = a
        .clone()
        .eigenvalues()
        .ok_or(GiaError::NonFinite("eigenvalue iteration"))?;
    let lambda = eig
        .iter()
        .cloned()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .expect("non-empty spectrum");
    eigenvector_for(a, lambda)
}

/// Unit eigenvector of `a` associated with the eigenvalue `lambda`.
pub fn eigenvector_for(a: &CMat, lambda: Complex64) -> Result<CMat> {
    let n = a.nrows();
    let shifted = a - CMat::identity(n, n) * lambda;
    let v = null_space(&shifted, 1e-9);
    if v.ncols() > 0 {
        return Ok(v.columns(0, 1).into_owned());
    }
    // Nearly defective or ill-conditioned: fall back to the smallest singular vector.
    let (v, _) = min_right_singular(&shifted, 1);
    Ok(v)
}

/// log2 det of a Hermitian positive definite matrix via Cholesky.
pub fn log2_det_hpd(m: &CMat) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let herm = hermitian_part(m);
    let chol = nalgebra::Cholesky::new(herm).ok_or(GiaError::InvalidParameter(
        "matrix is not positive definite".into(),
    ))?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        acc += l[(i, i)].re.log2();
    }
    Ok(2.0 * acc)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}
