//! Exact resolvent identities, checked by dense inversion.

use super::{spectrum, HermitianMatrix};
use crate::error::{Error, Result};
use crate::freeconv::SpectralPoint;
use crate::C64;
use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat};

/// Largest dimension accepted by the double-inversion checks.
pub const MAX_CHECK_DIM: usize = 200;

fn check_dim(h: &HermitianMatrix) -> Result<()> {
    if h.dim() > MAX_CHECK_DIM {
        return Err(Error::InvalidArgument(format!(
            "dimension {} exceeds {MAX_CHECK_DIM} for dense resolvent checks",
            h.dim()
        )));
    }
    Ok(())
}

/// `G(z) = (H − z)⁻¹` by LU inversion.
pub fn green_matrix(h: &HermitianMatrix, point: SpectralPoint) -> Result<Mat<c64>> {
    if !(point.eta > 0.0) {
        return Err(Error::SingularResolvent);
    }
    let mut a = h.to_complex();
    let z = point.z();
    for i in 0..a.nrows() {
        a[(i, i)] -= z;
    }
    let g = a.partial_piv_lu().inverse();
    if (0..g.nrows()).any(|i| !g[(i, i)].is_finite()) {
        return Err(Error::SingularResolvent);
    }
    Ok(g)
}

/// `max_i |Σ_n |G_in|² − Im G_ii/η|`.
pub fn ward_check(h: &HermitianMatrix, point: SpectralPoint) -> Result<f64> {
    check_dim(h)?;
    let g = green_matrix(h, point)?;
    let n = g.nrows();
    Ok((0..n)
        .map(|i| {
            let s: f64 = (0..n).map(|k| g[(i, k)].norm_sqr()).sum();
            (s - g[(i, i)].im / point.eta).abs()
        })
        .fold(0.0, f64::max))
}

/// `|1/G_ii − (h_ii − z − Σ_{k,l≠i} h_ik G^{(i)}_kl h_li)|`.
pub fn schur_check(h: &HermitianMatrix, point: SpectralPoint, i: usize) -> Result<f64> {
    check_dim(h)?;
    let n = h.dim();
    if i >= n || n < 2 {
        return Err(Error::InvalidArgument(format!("index {i} invalid for dimension {n}")));
    }
    let g = green_matrix(h, point)?;
    let gi = green_matrix(&h.minor(i), point)?;
    let idx = |k: usize| if k < i { k } else { k + 1 };
    let mut sum = C64::new(0.0, 0.0);
    for l in 0..n - 1 {
        let hl = h.get(idx(l), i);
        for k in 0..n - 1 {
            sum += h.get(i, idx(k)) * gi[(k, l)] * hl;
        }
    }
    let rhs = h.get(i, i) - point.z() - sum;
    Ok((g[(i, i)].inv() - rhs).norm())
}

/// `max_{i,j≠k} |G_ij − G^{(k)}_ij − G_ik G_kj / G_kk|`.
pub fn resolvent_identity_check(h: &HermitianMatrix, point: SpectralPoint, k: usize) -> Result<f64> {
    check_dim(h)?;
    let n = h.dim();
    if k >= n || n < 2 {
        return Err(Error::InvalidArgument(format!("index {k} invalid for dimension {n}")));
    }
    let g = green_matrix(h, point)?;
    let gk = green_matrix(&h.minor(k), point)?;
    let idx = |a: usize| if a < k { a } else { a + 1 };
    let gkk = g[(k, k)];
    let mut worst = 0.0f64;
    for b in 0..n - 1 {
        for a in 0..n - 1 {
            let (i, j) = (idx(a), idx(b));
            let d = g[(i, j)] - gk[(a, b)] - g[(i, k)] * g[(k, j)] / gkk;
            worst = worst.max(d.norm());
        }
    }
    Ok(worst)
}

/// Cauchy interlacing between `H` and its `k`-minor.
///
/// Comparisons allow `64·ε·‖H‖` of rounding.
pub fn interlacing_check(h: &HermitianMatrix, k: usize) -> Result<bool> {
    check_dim(h)?;
    let n = h.dim();
    if k >= n || n < 2 {
        return Err(Error::InvalidArgument(format!("index {k} invalid for dimension {n}")));
    }
    let full = spectrum(h, false)?.eigenvalues;
    let minor = spectrum(&h.minor(k), false)?.eigenvalues;
    let slack = 64.0 * f64::EPSILON * super::operator_norm(&super::SpectralData::from_eigenvalues(full.clone())).max(1.0);
    Ok(minor
        .iter()
        .enumerate()
        .all(|(j, &m)| full[j] <= m + slack && m <= full[j + 1] + slack))
}
