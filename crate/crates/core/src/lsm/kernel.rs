use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus, spd_inverse, spd_log_det};

/// Per-iteration constants of `E_q[exp(alpha - |z_i - z_j|^2)]` for a fixed
/// `(Sigma, xi, psi2)`:
///
/// `m_ij = exp(xi + psi2 / 2) det(I + 4 Sigma)^{-1/2} exp(-d' (I + 4 Sigma)^{-1} d)`
/// with `d = z_i - z_j`.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    /// `(I + 4 Sigma)^{-1}`
    pub b: DMatrix<f64>,
    /// `log` of the distance-free factor.
    pub log_scale: f64,
}

impl Kernel {
    pub fn new(cov: &DMatrix<f64>, xi: f64, psi2: f64) -> Result<Self> {
        let d = cov.nrows();
        let a = DMatrix::identity(d, d) + cov * 4.0;
        let b = spd_inverse(&a).map_err(|_| Error::SingularMatrix)?;
        let log_det = spd_log_det(&a).map_err(|_| Error::SingularMatrix)?;
        if !log_det.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        Ok(Kernel {
            b,
            log_scale: xi + 0.5 * psi2 - 0.5 * log_det,
        })
    }

    #[inline]
    pub fn quad(&self, d: &DVector<f64>) -> f64 {
        d.dot(&(&self.b * d))
    }

    #[inline]
    pub fn log_mgf(&self, d: &DVector<f64>) -> f64 {
        self.log_scale - self.quad(d)
    }

    /// `log(1 + m_ij)`
    #[inline]
    pub fn log1p_mgf(&self, d: &DVector<f64>) -> f64 {
        softplus(self.log_mgf(d))
    }

    /// `m_ij / (1 + m_ij)`; the factor shared by every closed-form derivative.
    #[inline]
    pub fn weight(&self, d: &DVector<f64>) -> f64 {
        sigmoid(self.log_mgf(d))
    }
}

pub(crate) fn rows(z: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..z.nrows()).map(|i| z.row(i).transpose()).collect()
}
