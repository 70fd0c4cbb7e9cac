//! Dense linear-algebra helpers shared by the estimators and the analysis
//! engine.
//!
//! Every matrix in this crate is a [`nalgebra::DMatrix<f64>`]; the functions
//! here add the handful of operations nalgebra does not expose in the form we
//! need (relative-tolerance pseudo-inverse, column-stacking `vec`, spectral
//! radius over the complex spectrum, block assembly).
//!
//! Dimensions never exceed a few thousand, so nothing here is tuned for
//! large or sparse problems.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff used by [`pinv`] when callers have no
/// better choice. Graph Laplacians have an exact zero eigenvalue that must
/// land below it.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is singular or numerically rank deficient: {0}")]
    Singular(String),
    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    NoConvergence(usize),
}

pub type Result<T> = std::result::Result<T, NumError>;

/// Builds a matrix from row-major entries.
pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
    if rows * cols != entries.len() {
        return Err(NumError::InvalidInput(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let m = Matrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m, "matrix entries")?;
    Ok(m)
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumError::InvalidInput(format!("{what} contain non-finite values")))
    }
}

fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(NumError::InvalidInput(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Moore-Penrose pseudo-inverse through the SVD. Singular values below
/// `tol * sigma_max` are treated as zero.
pub fn pinv(m: &Matrix, tol: f64) -> Result<Matrix> {
    if !(tol > 0.0) {
        return Err(NumError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    ensure_finite(m, "pinv input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Matrix::zeros(cols, rows));
    }
    let (sigma, left, right) = jacobi_svd(m);
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let mut out = Matrix::zeros(cols, rows);
    if sigma_max == 0.0 {
        return Ok(out);
    }
    let cutoff = tol * sigma_max;
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff {
            // out += v_k u_k^T / s
            out.ger(1.0 / s, &right.column(k), &left.column(k), 1.0);
        }
    }
    Ok(out)
}

/// Thin SVD by one-sided Jacobi rotations: returns `(σ, U, V)` with
/// `m = U diag(σ) Vᵀ`. Used instead of the Golub-Kahan routine in nalgebra,
/// which loses accuracy on rank-deficient inputs.
fn jacobi_svd(m: &Matrix) -> (Vec<f64>, Matrix, Matrix) {
    if m.nrows() < m.ncols() {
        let (s, u, v) = jacobi_svd(&m.transpose());
        return (s, v, u);
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = Vec::with_capacity(n);
    for k in 0..n {
        let s = a.column(k).norm();
        if s > 0.0 {
            a.column_mut(k).scale_mut(1.0 / s);
        }
        sigma.push(s);
    }
    (sigma, a, v)
}

/// Orthonormal basis (as columns) of the null space of `m`: right singular
/// vectors whose singular value is at most `tol · max(σ_max, 1)`.
pub fn null_space(m: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_finite(m, "null_space input")?;
    let (rows, cols) = m.shape();
    let padded;
    let a = if rows < cols {
        padded = m.clone().resize_vertically(cols, 0.0);
        &padded
    } else {
        m
    };
    let (sigma, _, v) = jacobi_svd(a);
    let cutoff = tol * sigma.iter().cloned().fold(1.0, f64::max);
    let keep: Vec<usize> = (0..cols).filter(|&k| sigma[k] <= cutoff).collect();
    Ok(Matrix::from_fn(cols, keep.len(), |r, c| v[(r, keep[c])]))
}

/// Full (complex) spectrum of a real square matrix.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    ensure_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // nalgebra's Schur iteration stalls on the highly structured spectra of
    // the averaged-system matrices.
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let vals = f.eigenvalues().map_err(|_| NumError::NoConvergence(n))?;
    Ok(vals.iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    ensure_square(m, "symmetric eigenvalue input")?;
    ensure_finite(m, "symmetric eigenvalue input")?;
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().cloned().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Largest eigenvalue modulus over the full spectrum.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Column-stacking vectorisation, so that `vec(R S T) = (Tᵀ ⊗ R) vec(S)`.
pub fn vec(m: &Matrix) -> Vector {
    // nalgebra storage is already column-major.
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(NumError::InvalidInput(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_square(a, "system matrix")?;
    if a.nrows() != b.nrows() {
        return Err(NumError::InvalidInput(format!(
            "system is {}x{} but right-hand side has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    ensure_finite(a, "system matrix")?;
    ensure_finite(b, "right-hand side")?;
    let lu = a.clone().lu();
    lu.solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| NumError::Singular(format!("{0}x{0} LU solve", a.nrows())))
}

/// Inverse of a symmetric positive definite matrix through Cholesky.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    ensure_square(m, "SPD input")?;
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| NumError::Singular("matrix is not positive definite".into()))
}

/// Symmetric square root factor `F` with `F Fᵀ = m` for a PSD matrix.
/// Tiny negative eigenvalues from round-off are clipped to zero.
pub fn psd_factor(m: &Matrix) -> Result<Matrix> {
    ensure_square(m, "PSD input")?;
    ensure_finite(m, "PSD input")?;
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&x| x < -1e-10 * scale.max(1.0)) {
        return Err(NumError::InvalidInput("matrix is not positive semidefinite".into()));
    }
    let sqrt = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&sqrt))
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Assembles a 2x2 block matrix `[[a, b], [c, d]]`.
pub fn block2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(c.nrows(), d.nrows());
    assert_eq!(a.ncols(), c.ncols());
    assert_eq!(b.ncols(), d.ncols());
    let (r0, c0) = a.shape();
    let mut out = Matrix::zeros(r0 + c.nrows(), c0 + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, c0), b.shape()).copy_from(b);
    out.view_mut((r0, 0), c.shape()).copy_from(c);
    out.view_mut((r0, c0), d.shape()).copy_from(d);
    out
}

/// Stacks `top` over `bottom`.
pub fn vstack(top: &Matrix, bottom: &Matrix) -> Matrix {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖`, falling back to the absolute
/// distance when `b` is zero.
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn path3_laplacian() -> Matrix {
        from_row_major(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]).unwrap()
    }

    #[test]
    fn kron_identity_and_scalar() {
        assert_eq!(kron(&Matrix::identity(2, 2), &Matrix::identity(3, 3)), Matrix::identity(6, 6));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random(3, 2, &mut rng);
        let two = Matrix::from_element(1, 1, 2.0);
        assert_eq!(kron(&two, &m), &m * 2.0);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (a, b, c, d) = (
                random(2, 2, &mut rng),
                random(2, 2, &mut rng),
                random(2, 2, &mut rng),
                random(2, 2, &mut rng),
            );
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            assert!(rel_frobenius(&lhs, &rhs) < 1e-10);
        }
    }

    #[test]
    fn pinv_basic_cases() {
        assert_eq!(pinv(&Matrix::identity(3, 3), DEFAULT_PINV_TOL).unwrap(), Matrix::identity(3, 3));
        assert_eq!(pinv(&Matrix::zeros(2, 2), DEFAULT_PINV_TOL).unwrap(), Matrix::zeros(2, 2));
        let l = path3_laplacian();
        let lp = pinv(&l, DEFAULT_PINV_TOL).unwrap();
        assert!((&l * &lp * &l - &l).norm() < 1e-10);
    }

    #[test]
    fn pinv_rejects_bad_input() {
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(pinv(&m, 1e-10), Err(NumError::InvalidInput(_))));
        assert!(pinv(&Matrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn spectral_radius_cases() {
        assert!((spectral_radius(&Matrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-14);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![0.3, -0.9]));
        assert!((spectral_radius(&d).unwrap() - 0.9).abs() < 1e-14);
        let k3 = from_row_major(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]).unwrap();
        assert!((spectral_radius(&k3).unwrap() - 3.0).abs() < 1e-12);
        assert!(spectral_radius(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn spectral_radius_of_rotation_is_complex_modulus() {
        // eigenvalues 0.6 ± 0.6i
        let m = from_row_major(2, 2, &[0.6, -0.6, 0.6, 0.6]).unwrap();
        assert!((spectral_radius(&m).unwrap() - 0.72f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn similarity_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(4, 4, &mut rng);
        let t = random(4, 4, &mut rng) + Matrix::identity(4, 4) * 3.0;
        let t_inv = t.clone().try_inverse().unwrap();
        let b = &t * &a * &t_inv;
        let (ra, rb) = (spectral_radius(&a).unwrap(), spectral_radius(&b).unwrap());
        assert!((ra - rb).abs() < 1e-9 * ra.max(1.0));
    }

    #[test]
    fn vec_is_column_stacking() {
        let m = from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(vec(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert!(unvec(&vec(&m), 3, 2).is_err());
    }

    #[test]
    fn vec_of_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (r, s, t) = (random(2, 2, &mut rng), random(2, 2, &mut rng), random(2, 2, &mut rng));
        let lhs = vec(&(&r * &s * &t));
        let rhs = kron(&t.transpose(), &r) * vec(&s);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn solve_and_inverse() {
        let a = from_row_major(2, 2, &[4.0, 1.0, 1.0, 3.0]).unwrap();
        let b = Matrix::identity(2, 2);
        let x = solve(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() < 1e-14);
        assert!((spd_inverse(&a).unwrap() - x).norm() < 1e-14);
        assert!(matches!(solve(&Matrix::zeros(2, 2), &b), Err(NumError::Singular(_))));
    }

    #[test]
    fn psd_factor_handles_singular() {
        let m = from_row_major(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let f = psd_factor(&m).unwrap();
        assert!((&f * f.transpose() - &m).norm() < 1e-12);
        assert_eq!(psd_factor(&Matrix::zeros(3, 3)).unwrap().norm(), 0.0);
    }

    #[test]
    fn pinv_repeated_column() {
        let a = from_row_major(
            4,
            3,
            &[
                -0.8202082255471989, -0.8202082255471989, -8.387725279958163,
                9.561383179664285, 9.561383179664285, 0.0,
                -0.1925012225859492, -0.1925012225859492, 9.249009588253314,
                -2.7391522868175096, -2.7391522868175096, 0.0,
            ],
        )
        .unwrap();
        let x = pinv(&a, DEFAULT_PINV_TOL).unwrap();
        assert!((&a * &x * &a - &a).norm() < 1e-12);
        assert!((&x * &a * &x - &x).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_laplacian() {
        let l = from_row_major(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]).unwrap();
        let n = null_space(&l, 1e-10).unwrap();
        assert_eq!(n.ncols(), 1);
        assert!((&l * &n).norm() < 1e-12);
        assert!((n.column(0).abs() - Vector::from_element(3, 1.0 / 3f64.sqrt())).norm() < 1e-12);
        let wide = from_row_major(1, 3, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(null_space(&wide, 1e-10).unwrap().ncols(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
            proptest::collection::vec(-10.0f64..10.0, rows * cols)
                .prop_map(move |v| Matrix::from_row_slice(rows, cols, &v))
        }

        proptest! {
            #[test]
            fn vec_roundtrip_exact(m in matrix(3, 5)) {
                prop_assert_eq!(unvec(&vec(&m), 3, 5).unwrap(), m);
            }

            #[test]
            fn penrose_conditions(m in matrix(4, 3), rank_cut in 0usize..3) {
                // knock out some rank to exercise the truncation path
                let mut a = m.clone();
                for c in 0..rank_cut {
                    let col = a.column(0).clone_owned() * (c as f64 + 1.0);
                    a.set_column(c + 1, &col);
                }
                let x = pinv(&a, DEFAULT_PINV_TOL).unwrap();
                let scale = a.norm().max(1.0);
                prop_assert!((&a * &x * &a - &a).norm() < 1e-8 * scale);
                prop_assert!((&x * &a * &x - &x).norm() < 1e-8 * x.norm().max(1.0));
                let ax = &a * &x;
                let xa = &x * &a;
                prop_assert!((&ax - ax.transpose()).norm() < 1e-8);
                prop_assert!((&xa - xa.transpose()).norm() < 1e-8);
            }

            #[test]
            fn kron_mixed_product_prop(a in matrix(2, 3), b in matrix(2, 2), c in matrix(3, 2), d in matrix(2, 3)) {
                let lhs = kron(&a, &b) * kron(&c, &d);
                let rhs = kron(&(&a * &c), &(&b * &d));
                prop_assert!(rel_frobenius(&lhs, &rhs) < 1e-10 || (&lhs - &rhs).norm() < 1e-10);
            }
        }
    }
}
