//! Exact computations for linear Gaussian models.
//!
//! The Kalman filter supplies the filter moments (μ_t, Σ_t); the disturbance
//! smoother supplies exact marginal smoothing moments and serves as ground
//! truth. The backward kernel of a linear Gaussian model is Gaussian with an
//! affine mean, so affine objectives stay affine under the backward recursion
//! and the adaptive-lag algorithm can be run exactly on (α, β) pairs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::SmoothedMarginal;
use crate::model::LgssmParams;

/// Filter moments of X_t given y_{0:t}.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub t: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Exact marginal smoothing moments of X_s given the whole record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Parameters of the backward kernel, the law of X_t given X_{t+1} = x and
/// y_{0:t}: N(gain_state · x + gain_filter, cov).
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardGaussian {
    /// Σ_{t|t+1} Aᵀ Σ_U⁻¹
    pub gain_state: DMatrix<f64>,
    /// Σ_{t|t+1} Σ_t⁻¹ μ_t
    pub gain_filter: DVector<f64>,
    /// Σ_{t|t+1} = (Aᵀ Σ_U⁻¹ A + Σ_t⁻¹)⁻¹
    pub cov: DMatrix<f64>,
}

/// T_{s|t}(x) = αᵀx + β.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanAffineStat {
    pub s: usize,
    pub alpha: DVector<f64>,
    pub beta: f64,
}

impl KalmanAffineStat {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.alpha.dot(x) + self.beta
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}

fn spd_inverse(name: &str, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical(format!("{name} is not positive definite")))
}

pub(crate) fn observation_at(params: &LgssmParams, observations: &[f64], t: usize) -> Result<DVector<f64>> {
    let ny = params.obs_dim();
    observations
        .get(t * ny..(t + 1) * ny)
        .map(DVector::from_column_slice)
        .ok_or(Error::MissingObservation { t })
}

fn check_observations(params: &LgssmParams, observations: &[f64]) -> Result<usize> {
    params.check_shapes()?;
    let ny = params.obs_dim();
    if observations.is_empty() || !observations.len().is_multiple_of(ny) {
        return Err(Error::invalid(format!(
            "need a non-empty observation buffer whose length is a multiple of {ny}"
        )));
    }
    Ok(observations.len() / ny)
}

/// Conditions N(mean, cov) on y = B x + V. Joseph-form covariance update.
fn measurement_update(
    t: usize,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &LgssmParams,
) -> Result<KalmanState> {
    let b = &params.b;
    let innovation = y - b * mean;
    let s = b * cov * b.transpose() + &params.sigma_v;
    let chol = s.cholesky().ok_or_else(|| {
        Error::Numerical(format!("innovation covariance at time {t} is not positive definite"))
    })?;
    // K = P Bᵀ S⁻¹, solved as S Kᵀ = B P.
    let gain = chol.solve(&(b * cov)).transpose();
    let mean = mean + &gain * innovation;
    let i_kb = DMatrix::identity(cov.nrows(), cov.ncols()) - &gain * b;
    let cov = &i_kb * cov * i_kb.transpose() + &gain * &params.sigma_v * gain.transpose();
    Ok(KalmanState { t, mean, cov: symmetrize(cov) })
}

/// Filter at time 0: the initial law conditioned on y_0.
pub fn kalman_initial(params: &LgssmParams, y0: &DVector<f64>) -> Result<KalmanState> {
    measurement_update(0, &params.initial_mean, &params.initial_cov, y0, params)
}

/// Exact filter moments of X_{t+1} given y_{0:t+1}.
pub fn kalman_step(state: &KalmanState, y: &DVector<f64>, params: &LgssmParams) -> Result<KalmanState> {
    let a = &params.a;
    let pred_mean = a * &state.mean;
    let pred_cov = symmetrize(a * &state.cov * a.transpose() + &params.sigma_u);
    measurement_update(state.t + 1, &pred_mean, &pred_cov, y, params)
}

/// Filter moments for every time step of the record.
pub fn kalman_filter(params: &LgssmParams, observations: &[f64]) -> Result<Vec<KalmanState>> {
    let len = check_observations(params, observations)?;
    let mut states = Vec::with_capacity(len);
    states.push(kalman_initial(params, &observation_at(params, observations, 0)?)?);
    for t in 1..len {
        let next = kalman_step(&states[t - 1], &observation_at(params, observations, t)?, params)?;
        states.push(next);
    }
    Ok(states)
}

/// Exact smoothing moments E[X_s | y_{0:T}], Cov[X_s | y_{0:T}] for all s ≤ T.
///
/// Forward pass over predicted moments (a_t, P_t), then one backward sweep of
/// the smoothing cumulants r_{t−1} = BᵀF_t⁻¹v_t + L_tᵀr_t and
/// N_{t−1} = BᵀF_t⁻¹B + L_tᵀN_tL_t with L_t = A − K_tB, from which
/// x̂_t = a_t + P_t r_{t−1} and V_t = P_t − P_t N_{t−1} P_t.
pub fn disturbance_smoother(params: &LgssmParams, observations: &[f64]) -> Result<Vec<SmoothedMoments>> {
    let len = check_observations(params, observations)?;
    let (a, b) = (&params.a, &params.b);
    let nx = params.state_dim();

    struct Forward {
        pred_mean: DVector<f64>,
        pred_cov: DMatrix<f64>,
        /// Bᵀ F⁻¹ v
        bt_finv_v: DVector<f64>,
        /// Bᵀ F⁻¹ B
        bt_finv_b: DMatrix<f64>,
        l: DMatrix<f64>,
    }

    let mut forward = Vec::with_capacity(len);
    let mut pred_mean = params.initial_mean.clone();
    let mut pred_cov = params.initial_cov.clone();
    for t in 0..len {
        let y = observation_at(params, observations, t)?;
        let v = &y - b * &pred_mean;
        let f = b * &pred_cov * b.transpose() + &params.sigma_v;
        let f_inv = spd_inverse(&format!("innovation covariance at time {t}"), &f)?;
        let bt_finv = b.transpose() * &f_inv;
        let gain = a * &pred_cov * &bt_finv;
        let l = a - &gain * b;
        let next_mean = a * &pred_mean + &gain * &v;
        let next_cov = symmetrize(a * &pred_cov * l.transpose() + &params.sigma_u);
        forward.push(Forward {
            bt_finv_v: &bt_finv * v,
            bt_finv_b: &bt_finv * b,
            l,
            pred_mean,
            pred_cov,
        });
        pred_mean = next_mean;
        pred_cov = next_cov;
    }

    let mut r = DVector::zeros(nx);
    let mut n = DMatrix::zeros(nx, nx);
    let mut out = vec![None; len];
    for (t, fw) in forward.iter().enumerate().rev() {
        r = &fw.bt_finv_v + fw.l.transpose() * &r;
        n = symmetrize(&fw.bt_finv_b + fw.l.transpose() * &n * &fw.l);
        let mean = &fw.pred_mean + &fw.pred_cov * &r;
        let cov = symmetrize(&fw.pred_cov - &fw.pred_cov * &n * &fw.pred_cov);
        out[t] = Some(SmoothedMoments { mean, cov });
    }
    Ok(out.into_iter().map(|m| m.expect("every time step is visited")).collect())
}

/// Backward kernel at time t from the filter moments (μ_t, Σ_t).
pub fn backward_params(state: &KalmanState, params: &LgssmParams) -> Result<BackwardGaussian> {
    let su_inv = spd_inverse("Sigma_U", &params.sigma_u)?;
    let st_inv = spd_inverse(&format!("filter covariance at time {}", state.t), &state.cov)?;
    let at_su_inv = params.a.transpose() * &su_inv;
    let precision = symmetrize(&at_su_inv * &params.a + &st_inv);
    let cov = spd_inverse(&format!("backward precision at time {}", state.t), &precision)?;
    Ok(BackwardGaussian {
        gain_state: &cov * at_su_inv,
        gain_filter: &cov * (st_inv * &state.mean),
        cov,
    })
}

/// (α_{s|t}, β_{s|t}) ↦ (α_{s|t+1}, β_{s|t+1}):
/// α′ᵀ = αᵀ Σ_{t|t+1} Aᵀ Σ_U⁻¹ and β′ = αᵀ Σ_{t|t+1} Σ_t⁻¹ μ_t + β.
pub fn ideal_affine_update(stat: &KalmanAffineStat, bg: &BackwardGaussian) -> KalmanAffineStat {
    KalmanAffineStat {
        s: stat.s,
        alpha: bg.gain_state.tr_mul(&stat.alpha),
        beta: stat.alpha.dot(&bg.gain_filter) + stat.beta,
    }
}

/// Variance of T_{s|t}(X_t) under the filter, αᵀ Σ_t α.
pub fn ideal_variance(stat: &KalmanAffineStat, state: &KalmanState) -> f64 {
    (stat.alpha.transpose() * &state.cov * &stat.alpha)[(0, 0)].max(0.0)
}

/// Runs the exact adaptive-lag algorithm over a complete record.
///
/// At each t the active statistics are pushed through the backward kernel,
/// the estimator for s = t is activated with (α_t, β_t) = `objective(t)`,
/// and every active s whose variance is below `epsilon` is emitted with
/// estimate αᵀμ_t + β. Estimators still active at the last time step are
/// emitted with the truncation flag set. Output is in emission order.
pub fn ideal_adaptive_lag_run<F>(
    params: &LgssmParams,
    observations: &[f64],
    objective: F,
    epsilon: f64,
) -> Result<Vec<SmoothedMarginal>>
where
    F: Fn(usize) -> (DVector<f64>, f64),
{
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let len = check_observations(params, observations)?;
    let horizon = len - 1;
    let mut state = kalman_initial(params, &observation_at(params, observations, 0)?)?;
    let mut active: Vec<KalmanAffineStat> = Vec::new();
    let mut emitted = Vec::with_capacity(len);

    for t in 0..len {
        if t > 0 {
            if !active.is_empty() {
                let bg = backward_params(&state, params)?;
                for stat in active.iter_mut() {
                    *stat = ideal_affine_update(stat, &bg);
                }
            }
            state = kalman_step(&state, &observation_at(params, observations, t)?, params)?;
        }
        let (alpha, beta) = objective(t);
        if alpha.len() != params.state_dim() {
            return Err(Error::invalid(format!("objective {t} has the wrong dimension")));
        }
        active.push(KalmanAffineStat { s: t, alpha, beta });

        let is_final = t == horizon;
        active.retain(|stat| {
            let variance = ideal_variance(stat, &state);
            let stop = variance < epsilon;
            if stop || is_final {
                let estimate = stat.eval(&state.mean);
                emitted.push(SmoothedMarginal::new(stat.s, estimate, t, variance, !stop));
            }
            !stop && !is_final
        });
    }
    Ok(emitted)
}
