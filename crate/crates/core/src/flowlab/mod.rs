//! Small-scale rectified flow: straight-line interpolation between data
//! (`t = 0`) and Gaussian noise (`t = 1`), the flow-matching loss, Euler ODE
//! sampling, a marginal-preserving SDE sampler and closed-form fields for
//! checking them.

mod fit;

pub use fit::{fit_field, fit_field_with, gaussian_data, gaussian_optimal_slope, AffineField, FitConfig, FitReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest time at which fields and scores are evaluated.
pub const T_FLOOR: f64 = 1e-6;
/// Default number of sampling steps.
pub const DEFAULT_STEPS: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty data set")]
    EmptyData,
    #[error("time {0} outside the valid range")]
    TimeOutOfRange(f64),
    #[error("need at least one {0}")]
    ZeroCount(&'static str),
    #[error("loss is not finite at iteration {iter}")]
    NonFiniteLoss { iter: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub z: Vec<f64>,
    pub t: f64,
}

/// `(1 − t)·x0 + t·eps`.
pub fn interpolate_state(x0: &[f64], eps: &[f64], t: f64) -> Result<FlowState, FlowError> {
    if x0.len() != eps.len() {
        return Err(FlowError::DimMismatch(x0.len(), eps.len()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::TimeOutOfRange(t));
    }
    Ok(FlowState {
        z: x0.iter().zip(eps).map(|(x, e)| (1.0 - t) * x + t * e).collect(),
        t,
    })
}

/// Velocity of the flow at `(z, t)`, optionally conditioned.
pub trait VelocityField: Send + Sync {
    fn velocity(&self, z: &[f64], t: f64, cond: Option<&[f64]>) -> Vec<f64>;
}

/// The field that never moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl VelocityField for ZeroField {
    fn velocity(&self, z: &[f64], _t: f64, _cond: Option<&[f64]>) -> Vec<f64> {
        vec![0.0; z.len()]
    }
}

/// Exact velocity when all data sits at one point `c`:
/// `v = (z − (1 − t)·c) / t − c`.
///
/// When a condition is passed it replaces `c`, so the same field serves
/// as the optimum of the conditional loss with the target as condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracVelocity {
    pub c: Vec<f64>,
    pub t_floor: f64,
}

pub fn dirac_velocity(c: Vec<f64>) -> DiracVelocity {
    DiracVelocity { c, t_floor: T_FLOOR }
}

impl VelocityField for DiracVelocity {
    fn velocity(&self, z: &[f64], t: f64, cond: Option<&[f64]>) -> Vec<f64> {
        let c = cond.unwrap_or(&self.c);
        let t = t.max(self.t_floor);
        z.iter().zip(c).map(|(z, c)| (z - (1.0 - t) * c) / t - c).collect()
    }
}

/// One flow-matching example. `cond`, when present, is handed to the field.
#[derive(Debug, Clone, PartialEq)]
pub struct FmSample {
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    pub t: f64,
    pub cond: Option<Vec<f64>>,
}

/// Mean squared distance between the field and `eps − x0` at the
/// interpolated states.
pub fn fm_loss(field: &dyn VelocityField, batch: &[FmSample]) -> Result<f64, FlowError> {
    if batch.is_empty() {
        return Err(FlowError::EmptyBatch);
    }
    let mut total = 0.0;
    for s in batch {
        let st = interpolate_state(&s.x0, &s.eps, s.t)?;
        let v = field.velocity(&st.z, st.t, s.cond.as_deref());
        if v.len() != s.x0.len() {
            return Err(FlowError::DimMismatch(v.len(), s.x0.len()));
        }
        total += v
            .iter()
            .zip(s.eps.iter().zip(&s.x0))
            .map(|(v, (e, x))| (v - (e - x)).powi(2))
            .sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Marginal score implied by a velocity: `−(z + (1 − t)·v) / t`.
pub fn score_from_velocity(state: &FlowState, v: &[f64]) -> Result<Vec<f64>, FlowError> {
    if state.t <= T_FLOOR || state.t > 1.0 {
        return Err(FlowError::TimeOutOfRange(state.t));
    }
    if v.len() != state.z.len() {
        return Err(FlowError::DimMismatch(v.len(), state.z.len()));
    }
    let t = state.t;
    Ok(state.z.iter().zip(v).map(|(z, v)| -(z + (1.0 - t) * v) / t).collect())
}

/// Euler integration from `t = 1` down to `t = 0`.
pub fn sample_ode(field: &dyn VelocityField, z1: &[f64], steps: usize, cond: Option<&[f64]>) -> Result<Vec<f64>, FlowError> {
    if steps == 0 {
        return Err(FlowError::ZeroCount("step"));
    }
    let dt = 1.0 / steps as f64;
    let mut z = z1.to_vec();
    for k in 0..steps {
        let t = 1.0 - k as f64 * dt;
        let v = field.velocity(&z, t, cond);
        for (z, v) in z.iter_mut().zip(&v) {
            *z -= dt * v;
        }
    }
    Ok(z)
}

/// Noise scale of the stochastic sampler as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "a", rename_all = "snake_case")]
pub enum NoiseSchedule {
    Zero,
    Constant(f64),
    /// `a·√t`.
    Sqrt(f64),
    /// `a·√(t / (1 − t))` with `t` clipped to `[1e-3, 1 − 1e-3]`.
    FlowGrpo(f64),
}

pub const SIGMA_T_CLIP: f64 = 1e-3;

impl NoiseSchedule {
    pub fn sigma(&self, t: f64) -> f64 {
        let t = t.clamp(SIGMA_T_CLIP, 1.0 - SIGMA_T_CLIP);
        match *self {
            NoiseSchedule::Zero => 0.0,
            NoiseSchedule::Constant(a) => a,
            NoiseSchedule::Sqrt(a) => a * t.sqrt(),
            NoiseSchedule::FlowGrpo(a) => a * (t / (1.0 - t)).sqrt(),
        }
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule::FlowGrpo(0.7)
    }
}

/// Euler–Maruyama integration from `t = 1` to `t = 0` of the SDE whose drift
/// adds `−σ²/2` times the score to the velocity. Steps with `σ = 0` are
/// plain Euler steps, so a zero schedule reproduces [`sample_ode`] exactly.
pub fn sample_sde(
    field: &dyn VelocityField,
    z1: &[f64],
    steps: usize,
    schedule: &NoiseSchedule,
    seed: u64,
    cond: Option<&[f64]>,
) -> Result<Vec<f64>, FlowError> {
    if steps == 0 {
        return Err(FlowError::ZeroCount("step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / steps as f64;
    let sq = dt.sqrt();
    let mut z = z1.to_vec();
    for k in 0..steps {
        let t = 1.0 - k as f64 * dt;
        let v = field.velocity(&z, t, cond);
        let sigma = schedule.sigma(t);
        if sigma == 0.0 {
            for (z, v) in z.iter_mut().zip(&v) {
                *z -= dt * v;
            }
            continue;
        }
        let tt = t.max(T_FLOOR * 2.0);
        let half = 0.5 * sigma * sigma;
        for (z, v) in z.iter_mut().zip(&v) {
            let score = -(*z + (1.0 - tt) * v) / tt;
            let xi: f64 = StandardNormal.sample(&mut rng);
            *z = *z - dt * (v - half * score) + sigma * sq * xi;
        }
    }
    Ok(z)
}

/// Terminal mean and (population) variance per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Moments {
    pub fn of(samples: &[Vec<f64>]) -> Result<Self, FlowError> {
        let d = samples.first().ok_or(FlowError::EmptyData)?.len();
        let n = samples.len() as f64;
        let (mut s1, mut s2) = (vec![0.0; d], vec![0.0; d]);
        for z in samples {
            if z.len() != d {
                return Err(FlowError::DimMismatch(z.len(), d));
            }
            for j in 0..d {
                s1[j] += z[j];
                s2[j] += z[j] * z[j];
            }
        }
        let mean: Vec<f64> = s1.iter().map(|s| s / n).collect();
        let var = s2.iter().zip(&mean).map(|(s, m)| (s / n - m * m).max(0.0)).collect();
        Ok(Self {
            count: samples.len(),
            mean,
            var,
        })
    }

    /// Monte-Carlo standard error of each mean.
    pub fn std_error(&self) -> Vec<f64> {
        self.var.iter().map(|v| (v / self.count as f64).sqrt()).collect()
    }
}

fn trajectory_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 of the pair
    let mut z = seed ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` independent trajectories of [`sample_sde`] from standard-normal
/// starting points, run in parallel. Trajectory `i` depends only on
/// `(seed, i)`, so results do not change with the thread count.
pub fn sample_sde_batch(
    field: &dyn VelocityField,
    dim: usize,
    n: usize,
    steps: usize,
    schedule: &NoiseSchedule,
    seed: u64,
    cond: Option<&[f64]>,
) -> Result<Vec<Vec<f64>>, FlowError> {
    use rayon::prelude::*;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = trajectory_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let z1: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            sample_sde(field, &z1, steps, schedule, s.wrapping_add(1), cond)
        })
        .collect()
}

#[cfg(test)]
mod tests;
