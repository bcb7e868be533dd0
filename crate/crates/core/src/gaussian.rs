//! Gaussian noise sources with log-space density evaluation.

use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Relative tolerance for the symmetry check on covariance inputs.
const SYMMETRY_TOL: f64 = 1e-12;

pub(crate) fn check_symmetric(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!("{name} must be square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} has non-finite entries")));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!("{name} is not symmetric")));
            }
        }
    }
    Ok(())
}

/// Zero-mean Gaussian N(0, C) with a fixed covariance.
///
/// `factor` is a row-major square root F with F Fᵀ = C. For positive-definite
/// covariances it is the lower Cholesky factor and densities are available;
/// semidefinite covariances are accepted for sampling only.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    dim: usize,
    factor: Vec<f64>,
    log_norm: Option<f64>,
}

impl GaussianNoise {
    pub fn new(name: &str, cov: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(name, cov)?;
        let dim = cov.nrows();
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid(format!("{name} is not positive definite")))?;
        let l = chol.l();
        let mut log_det = 0.0;
        for i in 0..dim {
            let d = l[(i, i)];
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid(format!("{name} is not positive definite")));
            }
            log_det += 2.0 * d.ln();
        }
        let factor = (0..dim * dim).map(|k| l[(k / dim, k % dim)]).collect();
        Ok(Self {
            dim,
            factor,
            log_norm: Some(-0.5 * (dim as f64 * LN_2PI + log_det)),
        })
    }

    /// Positive-semidefinite covariance, sampling only.
    pub fn semidefinite(name: &str, cov: &DMatrix<f64>) -> Result<Self> {
        if let Ok(g) = Self::new(name, cov) {
            return Ok(g);
        }
        check_symmetric(name, cov)?;
        let dim = cov.nrows();
        let eig = cov.clone().symmetric_eigen();
        let tol = 1e-12 * cov.amax().max(1.0);
        if eig.eigenvalues.iter().any(|&l| l < -tol) {
            return Err(Error::invalid(format!("{name} has a negative eigenvalue")));
        }
        let mut factor = vec![0.0; dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                factor[i * dim + k] = eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt();
            }
        }
        Ok(Self { dim, factor, log_norm: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_density(&self) -> bool {
        self.log_norm.is_some()
    }

    /// log N(d; 0, C). Returns `-inf` when the covariance is singular.
    pub fn log_density(&self, d: &[f64]) -> f64 {
        let Some(log_norm) = self.log_norm else {
            return f64::NEG_INFINITY;
        };
        let n = self.dim;
        let mut z: SmallVec<[f64; 8]> = SmallVec::with_capacity(n);
        let mut quad = 0.0;
        for (i, di) in d.iter().enumerate().take(n) {
            let row = &self.factor[i * n..i * n + i];
            let acc: f64 = row.iter().zip(&z).map(|(l, zj)| l * zj).sum();
            let zi = (di - acc) / self.factor[i * n + i];
            quad += zi * zi;
            z.push(zi);
        }
        log_norm - 0.5 * quad
    }

    /// Density at the mode, (2π)^{-n/2} det(C)^{-1/2}.
    pub fn mode_density(&self) -> Option<f64> {
        self.log_norm.map(f64::exp)
    }

    /// Writes F z into `out` for a fresh standard normal vector z.
    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let n = self.dim;
        let z: SmallVec<[f64; 8]> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = self.factor[i * n..(i + 1) * n].iter().zip(&z).map(|(f, zk)| f * zk).sum();
        }
    }
}
