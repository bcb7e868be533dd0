use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{ModelSpec, StateSpaceModel};
use crate::error::{Error, Result};
use crate::gaussian::{check_symmetric, GaussianNoise};

/// X_{t+1} = A X_t + U_{t+1}, Y_t = B X_t + V_t with U ~ N(0, Σ_U), V ~ N(0, Σ_V)
/// and X_0 ~ N(initial_mean, initial_cov).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgssmParams {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub sigma_u: DMatrix<f64>,
    pub sigma_v: DMatrix<f64>,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
}

impl LgssmParams {
    /// Scalar model X_{t+1} = a X_t + σ_U U_{t+1}, Y_t = b X_t + σ_V V_t, with
    /// X_0 ~ N(0, σ_V²/(1 − a²)), the benchmark convention.
    ///
    /// For |a| ≥ 1 the initial variance is not positive; use
    /// [`with_initial`](Self::with_initial) to set one.
    pub fn scalar(a: f64, b: f64, sigma_u: f64, sigma_v: f64) -> Self {
        let initial_var = sigma_v * sigma_v / (1.0 - a * a);
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, b),
            sigma_u: DMatrix::from_element(1, 1, sigma_u * sigma_u),
            sigma_v: DMatrix::from_element(1, 1, sigma_v * sigma_v),
            initial_mean: DVector::from_element(1, 0.0),
            initial_cov: DMatrix::from_element(1, 1, initial_var),
        }
    }

    /// The (a, b, σ_U, σ_V) = (.95, .5, .5, 2) benchmark model.
    pub fn benchmark() -> Self {
        Self::scalar(0.95, 0.5, 0.5, 2.0)
    }

    pub fn with_initial(mut self, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        self.initial_mean = mean;
        self.initial_cov = cov;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.b.nrows()
    }

    /// Dimension and finiteness checks shared by both constructors.
    pub(crate) fn check_shapes(&self) -> Result<()> {
        let nx = self.a.nrows();
        let ny = self.b.nrows();
        if nx == 0 || !self.a.is_square() {
            return Err(Error::invalid("A must be square with n_x > 0"));
        }
        if ny == 0 || self.b.ncols() != nx {
            return Err(Error::invalid("B must be n_y x n_x with n_y > 0"));
        }
        if self.sigma_u.shape() != (nx, nx) || self.initial_cov.shape() != (nx, nx) {
            return Err(Error::invalid("Sigma_U and initial_cov must be n_x x n_x"));
        }
        if self.sigma_v.shape() != (ny, ny) {
            return Err(Error::invalid("Sigma_V must be n_y x n_y"));
        }
        if self.initial_mean.len() != nx {
            return Err(Error::invalid("initial_mean must have length n_x"));
        }
        let finite = self.a.iter().chain(self.b.iter()).chain(self.initial_mean.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("A, B and initial_mean must be finite"));
        }
        check_symmetric("Sigma_U", &self.sigma_u)?;
        check_symmetric("Sigma_V", &self.sigma_v)?;
        check_symmetric("initial_cov", &self.initial_cov)?;
        Ok(())
    }
}

/// Linear Gaussian dynamics with pre-factorised noise covariances.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    params: LgssmParams,
    transition: GaussianNoise,
    observation: GaussianNoise,
    initial: GaussianNoise,
}

impl LinearGaussian {
    pub fn new(params: LgssmParams) -> Result<Self> {
        params.check_shapes()?;
        Ok(Self {
            transition: GaussianNoise::new("Sigma_U", &params.sigma_u)?,
            observation: GaussianNoise::new("Sigma_V", &params.sigma_v)?,
            initial: GaussianNoise::new("initial_cov", &params.initial_cov)?,
            params,
        })
    }

    /// Accepts semidefinite covariances (e.g. Σ_U = 0). Densities involving a
    /// singular covariance evaluate to zero.
    pub fn for_simulation(params: LgssmParams) -> Result<Self> {
        params.check_shapes()?;
        Ok(Self {
            transition: GaussianNoise::semidefinite("Sigma_U", &params.sigma_u)?,
            observation: GaussianNoise::semidefinite("Sigma_V", &params.sigma_v)?,
            initial: GaussianNoise::semidefinite("initial_cov", &params.initial_cov)?,
            params,
        })
    }

    pub fn params(&self) -> &LgssmParams {
        &self.params
    }

    fn apply(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum();
        }
    }
}

impl StateSpaceModel for LinearGaussian {
    fn state_dim(&self) -> usize {
        self.params.state_dim()
    }

    fn obs_dim(&self) -> usize {
        self.params.obs_dim()
    }

    fn sample_initial(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        self.initial.sample(rng, out);
        for (o, m) in out.iter_mut().zip(self.params.initial_mean.iter()) {
            *o += m;
        }
    }

    fn initial_log_density(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(self.params.initial_mean.iter()).map(|(a, b)| a - b).collect();
        self.initial.log_density(&d)
    }

    fn sample_transition(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.transition.sample(rng, out);
        let nx = self.state_dim();
        for (i, o) in out.iter_mut().enumerate() {
            *o += (0..nx).map(|j| self.params.a[(i, j)] * x[j]).sum::<f64>();
        }
    }

    fn transition_log_density(&self, x: &[f64], x_next: &[f64]) -> f64 {
        let nx = self.state_dim();
        if nx == 1 {
            return self.transition.log_density(&[x_next[0] - self.params.a[(0, 0)] * x[0]]);
        }
        let mut mean: SmallVec<[f64; 8]> = smallvec::smallvec![0.0; nx];
        Self::apply(&self.params.a, x, &mut mean);
        for (m, xn) in mean.iter_mut().zip(x_next) {
            *m = xn - *m;
        }
        self.transition.log_density(&mean)
    }

    fn sample_observation(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.observation.sample(rng, out);
        let nx = self.state_dim();
        for (i, o) in out.iter_mut().enumerate() {
            *o += (0..nx).map(|j| self.params.b[(i, j)] * x[j]).sum::<f64>();
        }
    }

    fn observation_log_density(&self, y: &[f64], x: &[f64]) -> f64 {
        let mut d: SmallVec<[f64; 8]> = smallvec::smallvec![0.0; self.obs_dim()];
        Self::apply(&self.params.b, x, &mut d);
        for (di, yi) in d.iter_mut().zip(y) {
            *di = yi - *di;
        }
        self.observation.log_density(&d)
    }

    fn transition_density_bound(&self) -> Option<f64> {
        self.transition.mode_density()
    }
}

/// Linear Gaussian model usable by the particle algorithms. All covariances
/// must be positive definite; the density bound is the mode of N(0, Σ_U).
pub fn make_lgssm(params: LgssmParams) -> Result<ModelSpec> {
    Ok(ModelSpec::new(Arc::new(LinearGaussian::new(params)?)))
}

/// Linear Gaussian model for simulation only; degenerate noise is allowed.
pub fn make_lgssm_for_simulation(params: LgssmParams) -> Result<ModelSpec> {
    Ok(ModelSpec::new(Arc::new(LinearGaussian::for_simulation(params)?)))
}
