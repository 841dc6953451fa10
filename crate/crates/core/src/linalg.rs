//! Small dense linear-algebra helpers shared by the filters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter added on the first retry, scaled by `trace / n`.
pub const JITTER_BASE: f64 = 1e-12;
/// Retries after the unjittered attempt, each ×10.
pub const JITTER_RETRIES: u32 = 3;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(())
}

/// Cholesky of the symmetrized matrix, adding `1e-12·tr/n·I` and escalating
/// ×10 up to three times before giving up.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    check_square(m)?;
    let sym = symmetrize(m);
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateCovariance);
    }
    if let Some(c) = Cholesky::new(sym.clone()) {
        return Ok(c);
    }
    let n = sym.nrows();
    let scale = (sym.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = JITTER_BASE * scale;
    for _ in 0..JITTER_RETRIES {
        let shifted = &sym + DMatrix::identity(n, n) * jitter;
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::DegenerateCovariance)
}

/// Cholesky of a matrix that must already be symmetric positive definite.
pub fn cholesky_strict(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    check_square(m)?;
    let scale = m.amax().max(1.0);
    if max_asymmetry(m) > 1e-9 * scale {
        return Err(Error::NotPositiveDefinite(what));
    }
    Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite(what))
}

/// `vᵀ M⁻¹ v` from a Cholesky factor of `M`.
pub fn mahalanobis(chol: &Cholesky<f64, Dyn>, v: &DVector<f64>) -> f64 {
    let z = chol.l().solve_lower_triangular(v).expect("Cholesky factor is invertible");
    z.norm_squared()
}

/// `log det M` from a Cholesky factor of `M`.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_rank_deficient() {
        let v = DVector::from_vec(vec![1.0, 2.0]);
        let m = &v * v.transpose();
        assert!(Cholesky::new(m.clone()).is_none());
        assert!(cholesky_jittered(&m).is_ok());
        assert!(cholesky_jittered(&DMatrix::from_element(2, 2, f64::NAN)).is_err());
        assert!(cholesky_jittered(&(DMatrix::identity(2, 2) * -1.0)).is_err());
    }

    #[test]
    fn mahalanobis_and_log_det() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let c = cholesky_strict(&m, "test").unwrap();
        assert!((mahalanobis(&c, &DVector::from_vec(vec![2.0, 1.0])) - 2.0).abs() < 1e-15);
        assert!((log_det(&c) - 4f64.ln()).abs() < 1e-15);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(cholesky_strict(&asym, "test").is_err());
    }
}
