use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FlowError, VelocityField};

/// `v(z, t) = a_t ⊙ z + b_t` with piecewise-constant coefficients over
/// equal-width time bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineField {
    pub bins: usize,
    pub dim: usize,
    /// `bins × dim`, row per bin.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl AffineField {
    pub fn zeros(bins: usize, dim: usize) -> Self {
        Self {
            bins,
            dim,
            a: vec![0.0; bins * dim],
            b: vec![0.0; bins * dim],
        }
    }

    pub fn bin_of(&self, t: f64) -> usize {
        ((t * self.bins as f64).floor() as usize).min(self.bins - 1)
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) / self.bins as f64
    }

    pub fn slope(&self, bin: usize) -> &[f64] {
        &self.a[bin * self.dim..(bin + 1) * self.dim]
    }

    pub fn intercept(&self, bin: usize) -> &[f64] {
        &self.b[bin * self.dim..(bin + 1) * self.dim]
    }
}

impl VelocityField for AffineField {
    fn velocity(&self, z: &[f64], t: f64, _cond: Option<&[f64]>) -> Vec<f64> {
        let k = self.bin_of(t);
        let (a, b) = (self.slope(k), self.intercept(k));
        z.iter().enumerate().map(|(j, z)| a[j] * z + b[j]).collect()
    }
}

/// Optimal slope for standard-normal data, `(2t − 1) / ((1 − t)² + t²)`.
pub fn gaussian_optimal_slope(t: f64) -> f64 {
    (2.0 * t - 1.0) / ((1.0 - t).powi(2) + t * t)
}

/// `n` seeded draws from the standard normal in `dim` dimensions.
pub fn gaussian_data(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub t_bins: usize,
    pub iters: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            t_bins: 10,
            iters: 50_000,
            lr: 1e-2,
            seed: 0,
            batch: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub field: AffineField,
    /// Minibatch loss before each update.
    pub losses: Vec<f64>,
}

/// Stochastic gradient descent on the flow-matching loss for an
/// [`AffineField`], minibatch size 64.
pub fn fit_field(data: &[Vec<f64>], t_bins: usize, iters: usize, lr: f64, seed: u64) -> Result<FitReport, FlowError> {
    fit_field_with(
        data,
        &FitConfig {
            t_bins,
            iters,
            lr,
            seed,
            ..FitConfig::default()
        },
    )
}

pub fn fit_field_with(data: &[Vec<f64>], cfg: &FitConfig) -> Result<FitReport, FlowError> {
    let dim = data.first().ok_or(FlowError::EmptyData)?.len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(FlowError::DimMismatch(bad.len(), dim));
    }
    if cfg.t_bins == 0 {
        return Err(FlowError::ZeroCount("time bin"));
    }
    if cfg.batch == 0 {
        return Err(FlowError::ZeroCount("batch element"));
    }
    let mut field = AffineField::zeros(cfg.t_bins, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut losses = Vec::with_capacity(cfg.iters);
    let mut ga = vec![0.0; field.a.len()];
    let mut gb = vec![0.0; field.b.len()];
    let scale = 2.0 / cfg.batch as f64;
    for iter in 0..cfg.iters {
        ga.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..cfg.batch {
            let x0 = &data[rng.random_range(0..data.len())];
            let t: f64 = rng.random();
            let k = field.bin_of(t);
            for j in 0..dim {
                let e: f64 = StandardNormal.sample(&mut rng);
                let z = (1.0 - t) * x0[j] + t * e;
                let idx = k * dim + j;
                // d/da (a z + b − u)² = 2 r z, d/db = 2 r
                let r = field.a[idx] * z + field.b[idx] - (e - x0[j]);
                loss += r * r;
                ga[idx] += scale * r * z;
                gb[idx] += scale * r;
            }
        }
        let loss = loss / cfg.batch as f64;
        if !loss.is_finite() {
            return Err(FlowError::NonFiniteLoss { iter });
        }
        losses.push(loss);
        for (p, g) in field.a.iter_mut().zip(&ga) {
            *p -= cfg.lr * g;
        }
        for (p, g) in field.b.iter_mut().zip(&gb) {
            *p -= cfg.lr * g;
        }
    }
    Ok(FitReport { field, losses })
}
