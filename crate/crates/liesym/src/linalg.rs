//! Dense linear-algebra helpers shared across the crate: matrix exponential,
//! nullspace extraction, nuclear norm, singular-value soft-thresholding, and
//! subspace comparisons.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Matrix exponential by scaling and squaring of the degree-13 truncated
/// Taylor series. The number of squarings is chosen so that the scaled
/// Frobenius norm is at most 0.5.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("expm argument".into()));
    }
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for k in 1..=13u32 {
        term = (&term * &scaled) / f64::from(k);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Singular values (descending) and an orthonormal nullspace basis of `a`.
///
/// The cutoff is `tol_abs` when given, otherwise `tol_rel * sigma_max`;
/// singular values at or below the cutoff count toward the nullity. Matrices
/// with fewer rows than columns are padded with zero rows so the full right
/// singular basis is available.
pub fn svd_nullspace(
    a: &DMatrix<f64>,
    tol_rel: f64,
    tol_abs: Option<f64>,
) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    if rows == 0 {
        return (vec![0.0; cols], DMatrix::identity(cols, cols));
    }
    let work = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let mut svd = work.svd(false, true);
    svd.sort_by_singular_values();
    let v_t = svd.v_t.expect("svd with v_t");
    let sing: Vec<f64> = svd.singular_values.iter().copied().collect();
    let sigma_max = sing.first().copied().unwrap_or(0.0);
    let cutoff = tol_abs.unwrap_or(tol_rel * sigma_max);
    let null_indices: Vec<usize> = (0..cols).filter(|&j| sing[j] <= cutoff).collect();
    let mut basis = DMatrix::zeros(cols, null_indices.len());
    for (k, &j) in null_indices.iter().enumerate() {
        basis.set_column(k, &v_t.row(j).transpose());
    }
    (sing, basis)
}

/// Sum of singular values.
pub fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().svd(false, false).singular_values.iter().sum()
}

/// Proximal operator of `tau * ||.||_*`: shrink each singular value toward
/// zero by `tau`. Returns the thresholded matrix together with its nuclear
/// norm.
pub fn singular_value_shrink(a: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let k = svd.singular_values.len();
    let mut shrunk = DVector::zeros(k);
    let mut nuc = 0.0;
    for i in 0..k {
        let s = (svd.singular_values[i] - tau).max(0.0);
        shrunk[i] = s;
        nuc += s;
    }
    let out = &u * DMatrix::from_diagonal(&shrunk) * &v_t;
    (out, nuc)
}

/// `U V^T` from a thin SVD; a subgradient direction of the nuclear norm.
pub fn nuclear_subgradient_direction(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    &u * &v_t
}

/// Minimum-norm least-squares solve via SVD with a relative rank cutoff.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, tol_rel * svd.singular_values.max())
        .expect("svd solve")
}

/// Largest principal angle (radians) between the column spans of two
/// matrices with orthonormal columns of equal count.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows(), "ambient dimensions differ");
    assert_eq!(a.ncols(), b.ncols(), "subspace dimensions differ");
    if a.ncols() == 0 {
        return 0.0;
    }
    let m = a.transpose() * b;
    let sv = m.svd(false, false).singular_values;
    let smin = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    smin.clamp(-1.0, 1.0).acos()
}

/// Residual of `small`'s columns outside the column span of `big`
/// (`big` must have orthonormal columns). Zero when span(small) is contained
/// in span(big).
pub fn subspace_containment_residual(big: &DMatrix<f64>, small: &DMatrix<f64>) -> f64 {
    let proj = big * (big.transpose() * small);
    (small - proj).norm()
}

/// Orthonormalize the columns of `a` with modified Gram-Schmidt, dropping
/// directions whose residual falls below `drop_tol` times the original norm.
pub fn orthonormalize_columns(a: &DMatrix<f64>, drop_tol: f64) -> DMatrix<f64> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).clone_owned();
        let orig = v.norm();
        if orig == 0.0 {
            continue;
        }
        for u in &kept {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
        if v.norm() >= drop_tol * orig {
            let n = v.norm();
            kept.push(v / n);
        }
    }
    let mut out = DMatrix::zeros(a.nrows(), kept.len());
    for (k, u) in kept.iter().enumerate() {
        out.set_column(k, u);
    }
    out
}
