//! Linear regression with DP-SGD, its non-private twin, and the Rényi-DP
//! accountant used to pick a noise multiplier for a target `(ε, δ)`.
//!
//! Each step Poisson-samples a batch at rate `q = batch_size / n`, clips
//! every per-sample gradient to L2 norm `C`, sums them, adds Gaussian noise
//! with standard deviation `σ·C` per coordinate and divides by the expected
//! batch size. Batch selection and noise draw from separate streams, so a
//! private run and a non-private run with the same seed see the same
//! batches.
//!
//! Features are rescaled to `[-1, 1]` with metadata bounds (never data
//! statistics); the target is used as is.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::PrivacyParams;
use crate::rng::{seeded, NoiseSource, SeedMixer};

/// Noise-multiplier search bracket.
pub const SIGMA_MIN: f64 = 0.3;
pub const SIGMA_MAX: f64 = 100.0;
/// Calibrated ε must land in `[ε·(1 − tol), ε]`.
pub const CALIBRATION_TOL: f64 = 1e-2;
/// δ used for private training unless a plan overrides it.
pub const DEFAULT_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl SgdConfig {
    fn check(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Empty("training set"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::invalid(format!(
                "batch size {} outside 1..={n}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// Poisson sampling rate and total step count for `n` training rows.
    pub fn schedule(&self, n: usize) -> Result<(f64, usize)> {
        self.check(n)?;
        let q = self.batch_size as f64 / n as f64;
        let per_epoch = ((n as f64 / self.batch_size as f64).round() as usize).max(1);
        Ok((q, per_epoch * self.epochs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpSgdParams {
    clip_norm: f64,
    noise_multiplier: f64,
    target: Option<PrivacyParams>,
}

impl DpSgdParams {
    /// `clip_norm` may be `+∞` only when `noise_multiplier` is zero, which
    /// switches off the private machinery entirely.
    pub fn new(clip_norm: f64, noise_multiplier: f64, target: Option<PrivacyParams>) -> Result<Self> {
        if !(clip_norm > 0.0) {
            return Err(Error::invalid(format!("clip norm must be positive, got {clip_norm}")));
        }
        if !(noise_multiplier >= 0.0 && noise_multiplier.is_finite()) {
            return Err(Error::invalid(format!(
                "noise multiplier must be finite and >= 0, got {noise_multiplier}"
            )));
        }
        if clip_norm.is_infinite() && noise_multiplier > 0.0 {
            return Err(Error::invalid("an unbounded clip norm admits no noise"));
        }
        Ok(DpSgdParams {
            clip_norm,
            noise_multiplier,
            target,
        })
    }

    pub fn clip_norm(&self) -> f64 {
        self.clip_norm
    }

    pub fn noise_multiplier(&self) -> f64 {
        self.noise_multiplier
    }

    pub fn target(&self) -> Option<PrivacyParams> {
        self.target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// Feature matrix and targets extracted from a dataset: every continuous
/// column other than the target, rescaled to `[-1, 1]` by its bounds and
/// clamped there.
#[derive(Debug, Clone)]
pub struct Design {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Design {
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        let target = d.target().ok_or(Error::NoTarget)?;
        let target_idx = d.column_index(target)?;
        let cols: Vec<(usize, f64, f64, String)> = d
            .columns()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .filter_map(|(i, c)| c.bounds().map(|(lo, hi)| (i, lo, hi, c.name().to_string())))
            .collect();
        if cols.is_empty() {
            return Err(Error::invalid("no continuous feature columns"));
        }
        let features = d
            .rows()
            .iter()
            .map(|row| {
                cols.iter()
                    .map(|(i, lo, hi, _)| {
                        let v = row[*i].as_real().expect("continuous cell");
                        (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                    })
                    .collect()
            })
            .collect();
        let targets = d
            .rows()
            .iter()
            .map(|row| row[target_idx].as_real().expect("continuous target"))
            .collect();
        Ok(Design {
            feature_names: cols.into_iter().map(|c| c.3).collect(),
            features,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }
}

/// Gradient of `½(w·x + b − y)²` with respect to `(w, b)`, bias last.
pub fn per_sample_gradient(model: &LinearModel, x: &[f64], y: f64) -> Result<Vec<f64>> {
    if x.len() != model.weights.len() {
        return Err(Error::invalid(format!(
            "feature vector has {} entries, model has {}",
            x.len(),
            model.weights.len()
        )));
    }
    let residual = model.predict(x) - y;
    let mut g: Vec<f64> = x.iter().map(|v| residual * v).collect();
    g.push(residual);
    Ok(g)
}

/// Scales `g` by `min(1, C/‖g‖₂)`.
pub fn clip_l2(g: &[f64], clip_norm: f64) -> Vec<f64> {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return g.to_vec();
    }
    let factor = (clip_norm / norm).min(1.0);
    g.iter().map(|v| v * factor).collect()
}

// Indices of a Poisson sample at rate q, via geometric gaps.
fn poisson_batch<R: NoiseSource>(rng: &mut R, n: usize, q: f64, out: &mut Vec<usize>) {
    out.clear();
    if q >= 1.0 {
        out.extend(0..n);
        return;
    }
    let log_miss = (-q).ln_1p();
    let mut pos = 0.0f64;
    loop {
        pos += (rng.uniform_open().ln() / log_miss).floor();
        if pos >= n as f64 {
            break;
        }
        out.push(pos as usize);
        pos += 1.0;
    }
}

fn sgd_loop<F>(data: &Design, cfg: &SgdConfig, mut batch_gradient: F) -> Result<LinearModel>
where
    F: FnMut(&LinearModel, &[usize]) -> Result<Vec<f64>>,
{
    let (q, steps) = cfg.schedule(data.len())?;
    let mut batch_rng = seeded(SeedMixer::new(cfg.seed).mix_str("batches").finish());
    let mut model = LinearModel::zeros(data.dim());
    let scale = cfg.learning_rate / cfg.batch_size as f64;
    let mut batch = Vec::with_capacity(2 * cfg.batch_size);
    for step in 0..steps {
        poisson_batch(&mut batch_rng, data.len(), q, &mut batch);
        let g = batch_gradient(&model, &batch)?;
        let (gw, gb) = g.split_at(data.dim());
        for (w, d) in model.weights.iter_mut().zip(gw) {
            *w -= scale * d;
        }
        model.bias -= scale * gb[0];
        if !model.is_finite() {
            return Err(Error::Divergence { step });
        }
    }
    Ok(model)
}

/// Plain minibatch SGD on squared error over Poisson-sampled batches.
pub fn np_sgd_train(train: &Dataset, cfg: &SgdConfig) -> Result<LinearModel> {
    let data = Design::from_dataset(train)?;
    np_sgd_train_design(&data, cfg)
}

pub fn np_sgd_train_design(data: &Design, cfg: &SgdConfig) -> Result<LinearModel> {
    sgd_loop(data, cfg, |model, batch| {
        let mut sum = vec![0.0; data.dim() + 1];
        for &i in batch {
            let g = per_sample_gradient(model, &data.features[i], data.targets[i])?;
            for (s, v) in sum.iter_mut().zip(&g) {
                *s += v;
            }
        }
        Ok(sum)
    })
}

/// DP-SGD: per-sample clipping to `C` and Gaussian noise `σ·C` on the sum.
pub fn dp_sgd_train(train: &Dataset, cfg: &SgdConfig, dp: &DpSgdParams) -> Result<LinearModel> {
    let data = Design::from_dataset(train)?;
    dp_sgd_train_design(&data, cfg, dp)
}

pub fn dp_sgd_train_design(data: &Design, cfg: &SgdConfig, dp: &DpSgdParams) -> Result<LinearModel> {
    let mut noise_rng = seeded(SeedMixer::new(cfg.seed).mix_str("gradient-noise").finish());
    let noise_std = dp.noise_multiplier * dp.clip_norm;
    sgd_loop(data, cfg, |model, batch| {
        let mut sum = vec![0.0; data.dim() + 1];
        for &i in batch {
            let g = per_sample_gradient(model, &data.features[i], data.targets[i])?;
            for (s, v) in sum.iter_mut().zip(clip_l2(&g, dp.clip_norm)) {
                *s += v;
            }
        }
        if dp.noise_multiplier > 0.0 {
            for s in sum.iter_mut() {
                *s += noise_std * noise_rng.standard_normal();
            }
        }
        Ok(sum)
    })
}

/// Root mean squared prediction error on `test`.
pub fn test_rmse(model: &LinearModel, test: &Dataset) -> Result<f64> {
    let data = Design::from_dataset(test)?;
    design_rmse(model, &data)
}

pub fn design_rmse(model: &LinearModel, data: &Design) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if data.dim() != model.weights.len() {
        return Err(Error::invalid("model and test set differ in feature count"));
    }
    let sse: f64 = data
        .features
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| (model.predict(x) - y).powi(2))
        .sum();
    Ok((sse / data.len() as f64).sqrt())
}

/// Rényi-DP of a mechanism at a list of orders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdpCurve {
    orders: Vec<f64>,
    values: Vec<f64>,
}

impl RdpCurve {
    pub fn new(orders: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if orders.len() != values.len() {
            return Err(Error::invalid("RDP orders and values differ in length"));
        }
        if orders.iter().any(|a| !(*a > 1.0)) {
            return Err(Error::invalid("RDP orders must exceed 1"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("RDP values must be finite and nonnegative"));
        }
        Ok(RdpCurve { orders, values })
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// Integer orders 2..=64 plus a sparse tail up to 256.
pub fn default_orders() -> Vec<u32> {
    (2..=64).chain([72, 80, 96, 128, 160, 192, 256]).collect()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

// log E[(p/q)^α] for the Poisson-subsampled Gaussian at integer α:
// Σ_k C(α,k) (1−q)^(α−k) q^k exp((k² − k) / (2σ²)).
fn log_moment(sigma: f64, q: f64, alpha: u32) -> f64 {
    let two_var = 2.0 * sigma * sigma;
    let a = f64::from(alpha);
    if q == 1.0 {
        return (a * a - a) / two_var;
    }
    let (log_q, log_miss) = (q.ln(), (-q).ln_1p());
    let mut log_binom = 0.0;
    let terms: Vec<f64> = (0..=alpha)
        .map(|k| {
            let k = f64::from(k);
            if k > 0.0 {
                log_binom += (a - k + 1.0).ln() - k.ln();
            }
            log_binom + k * log_q + (a - k) * log_miss + (k * k - k) / two_var
        })
        .collect();
    log_sum_exp(&terms)
}

/// RDP of `steps` compositions of the Poisson-subsampled Gaussian
/// mechanism with noise multiplier `sigma` and rate `q`, at integer orders.
pub fn rdp_subsampled_gaussian(sigma: f64, q: f64, steps: usize, orders: &[u32]) -> Result<RdpCurve> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("σ must be positive, got {sigma}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("sampling rate {q} outside (0, 1]")));
    }
    if let Some(a) = orders.iter().find(|a| **a < 2) {
        return Err(Error::invalid(format!("RDP order {a} below 2")));
    }
    let values = orders
        .iter()
        .map(|&a| {
            let per_step = (log_moment(sigma, q, a) / f64::from(a - 1)).max(0.0);
            per_step * steps as f64
        })
        .collect();
    RdpCurve::new(orders.iter().map(|&a| f64::from(a)).collect(), values)
}

/// `min_α RDP(α) + ln(1/δ)/(α − 1)`.
pub fn rdp_to_epsilon(curve: &RdpCurve, delta: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Empty("RDP curve"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("δ={delta} outside (0, 1)")));
    }
    let log_inv_delta = -delta.ln();
    Ok(curve
        .orders
        .iter()
        .zip(&curve.values)
        .map(|(a, r)| r + log_inv_delta / (a - 1.0))
        .fold(f64::INFINITY, f64::min))
}

/// ε reached by DP-SGD with these parameters.
pub fn epsilon_for(sigma: f64, q: f64, steps: usize, delta: f64, orders: &[u32]) -> Result<f64> {
    rdp_to_epsilon(&rdp_subsampled_gaussian(sigma, q, steps, orders)?, delta)
}

/// Smallest σ in [`SIGMA_MIN`], [`SIGMA_MAX`] whose accounted ε lies in
/// `[ε·(1 − tol), ε]`, found by bisection.
pub fn calibrate_sigma(target: PrivacyParams, q: f64, steps: usize, orders: &[u32]) -> Result<f64> {
    let eps = target.epsilon();
    let delta = target.delta();
    let at = |s: f64| epsilon_for(s, q, steps, delta, orders);

    let (eps_lo, eps_hi) = (at(SIGMA_MIN)?, at(SIGMA_MAX)?);
    let unreachable = || Error::Unreachable {
        target: eps,
        sigma_low: SIGMA_MIN,
        sigma_high: SIGMA_MAX,
        epsilon_at_low: eps_lo,
        epsilon_at_high: eps_hi,
    };
    if eps_hi > eps {
        return Err(unreachable());
    }
    if eps_lo <= eps {
        return if eps_lo >= eps * (1.0 - CALIBRATION_TOL) {
            Ok(SIGMA_MIN)
        } else {
            Err(unreachable())
        };
    }
    // Invariant: ε(lo) > target >= ε(hi).
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if at(mid)? > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if at(hi)? >= eps * (1.0 - CALIBRATION_TOL) {
        Ok(hi)
    } else {
        Err(unreachable())
    }
}
