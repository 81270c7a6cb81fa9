//! Dense linear-algebra helpers: matrix exponential, SVD null spaces,
//! Kronecker products and small utilities shared by the checkers.

use nalgebra::{DMatrix, DVector};

/// Matrix exponential by scaling and squaring with a diagonal Padé(6,6)
/// approximant. The scaling brings the infinity norm below 1/2, where the
/// truncation error is below 1e-15 relative.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    const P: usize = 6;
    let n = a.nrows();
    let norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let x = a / 2f64.powi(s);
    let mut c = 1.0;
    let mut num = DMatrix::<f64>::identity(n, n);
    let mut den = DMatrix::<f64>::identity(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    for j in 1..=P {
        c *= (P + 1 - j) as f64 / (j * (2 * P + 1 - j)) as f64;
        power = &power * &x;
        num += &power * c;
        if j % 2 == 0 {
            den += &power * c;
        } else {
            den -= &power * c;
        }
    }
    let mut r = den.lu().solve(&num).expect("Pade denominator is well conditioned");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

pub(crate) fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Singular values (descending) and full right singular basis of `a`.
/// Wide inputs are padded with zero rows so that V is square.
pub fn svd_right(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, m).copy_from(a);
        p
    } else {
        a.clone()
    };
    let f = to_faer(&padded);
    let svd = f.thin_svd().expect("svd converges");
    let s = svd.S().column_vector();
    let sv: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    (sv, from_faer(svd.V()))
}

/// Orthonormal basis (as columns) of the numerical null space of `a`, using a
/// threshold relative to the largest singular value. Also returns the
/// numerical rank.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (DMatrix::identity(n, n), 0);
    }
    let (s, v) = svd_right(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    let rank = s.iter().filter(|&&x| x > cut).count();
    (v.columns(rank, n - rank).into_owned(), rank)
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = a.clone().singular_values();
    let smax = s.max();
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

pub fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Symmetric positive-definite square root through the eigendecomposition.
pub fn spd_sqrt(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = a.clone().singular_values();
    s.max() / s.min()
}

/// Householder reflection composed with a sign fix so that the result is a
/// rotation (determinant +1 when the dimension is at least two) mapping the
/// unit vector `v` to `e0`.
pub fn rotation_to_e0(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let u = v / v.norm();
    let mut e0 = DVector::zeros(n);
    e0[0] = 1.0;
    let w = &u - &e0;
    if w.norm() < 1e-15 {
        return DMatrix::identity(n, n);
    }
    let w = &w / w.norm();
    let mut h = DMatrix::identity(n, n) - (&w * w.transpose()) * 2.0;
    if n >= 2 {
        // Flip the last axis (orthogonal to e0) to restore det = +1.
        for j in 0..n {
            h[(n - 1, j)] = -h[(n - 1, j)];
        }
    }
    h
}

/// Rotation in the plane of unit vectors `a` and `b` taking `a` to `b`. For
/// antipodal inputs the rotation by pi in a plane containing `a` is used.
pub fn rotation_between(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = a.len();
    let c = a.dot(b);
    let id = DMatrix::<f64>::identity(n, n);
    if c > -1.0 + 1e-12 {
        let k = b * a.transpose() - a * b.transpose();
        &id + &k + (&k * &k) / (1.0 + c)
    } else {
        let mut v = DVector::zeros(n);
        let idx = (0..n).min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
        v[idx] = 1.0;
        let v = &v - a * a.dot(&v);
        let v = &v / v.norm();
        id - (a * a.transpose()) * 2.0 - (&v * v.transpose()) * 2.0
    }
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<nalgebra::Complex<f64>> {
    to_faer(a)
        .eigenvalues()
        .expect("eigenvalue iteration converges")
        .into_iter()
        .map(|z| nalgebra::Complex::new(z.re, z.im))
        .collect()
}

/// Orthonormalizes the columns of `a` (Gram-Schmidt with reorthogonalization),
/// dropping columns whose residual norm falls below `tol`.
pub fn orthonormal_columns(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        let scale = v.norm();
        for _ in 0..2 {
            for q in &cols {
                let p = q.dot(&v);
                v -= q * p;
            }
        }
        let nv = v.norm();
        if nv > tol * scale.max(1.0) {
            cols.push(v / nv);
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 2.7_f64;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a);
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(max_abs(&(e - want)) < 1e-13);
    }

    #[test]
    fn expm_of_nilpotent_and_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 0.0, 0.0]);
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 0.0, 1.0]);
        assert!(max_abs(&(expm(&a) - want)) < 1e-13);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0]));
        let e = expm(&d);
        assert!((e[(0, 0)] - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let (n, r) = null_space(&a, 1e-12);
        assert_eq!(r, 1);
        assert_eq!(n.ncols(), 2);
        assert!(max_abs(&(&a * &n)) < 1e-14);
    }

    #[test]
    fn rotation_helpers_are_rotations() {
        let v = DVector::from_vec(vec![0.3, -0.4, 0.5, 0.1]);
        let h = rotation_to_e0(&v);
        let hv = &h * (&v / v.norm());
        assert!((hv[0] - 1.0).abs() < 1e-14);
        assert!((h.determinant() - 1.0).abs() < 1e-12);
        let a = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![0.0, 0.0, -1.0]);
        let r = rotation_between(&a, &b);
        assert!(((&r * &a) - &b).norm() < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }
}
