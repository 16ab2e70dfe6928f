//! Density-weighted average-derivative estimation of the index direction.
//!
//! The direction is estimated by
//!
//!   delta_hat = -(2/n) sum_i Y_i grad f_hat_{-i}(X_i),
//!
//! where f_hat_{-i} is the leave-one-out product-Gaussian kernel density
//! estimate. The estimated direction is delta_hat normalized to unit length,
//! optionally snapped to the 1/sqrt(n) component grid first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{l2_norm, Dataset, Direction};
use crate::error::{Error, Result};

/// Tuning for the average-derivative estimator. The kernel is a fixed
/// product Gaussian; only the bandwidths and the grid-rounding step vary.
#[derive(Clone, Debug)]
pub struct AdeConfig {
    bandwidths: Vec<f64>,
    round_to_grid: bool,
}

impl AdeConfig {
    pub fn new(bandwidths: Vec<f64>, round_to_grid: bool) -> Result<Self> {
        for (j, &h) in bandwidths.iter().enumerate() {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::NonPositiveBandwidth { index: j, value: h });
            }
        }
        Ok(AdeConfig {
            bandwidths,
            round_to_grid,
        })
    }

    /// Default bandwidth rule scaled by `bandwidth_scale`.
    pub fn from_dataset(ds: &Dataset, settings: &AdeSettings) -> Result<Self> {
        let mut hs = default_bandwidths(ds)?;
        for h in &mut hs {
            *h *= settings.bandwidth_scale;
        }
        AdeConfig::new(hs, settings.round_to_grid)
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn round_to_grid(&self) -> bool {
        self.round_to_grid
    }
}

/// User-facing knobs behind the `ade.*` config keys: a multiplier on the
/// default bandwidth rule and the grid-rounding switch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdeSettings {
    pub bandwidth_scale: f64,
    pub round_to_grid: bool,
}

impl Default for AdeSettings {
    fn default() -> Self {
        AdeSettings {
            bandwidth_scale: 1.0,
            round_to_grid: true,
        }
    }
}

/// Per-covariate rule h_j = sigma_hat_j * n^(-1/(d+6)).
///
/// The exponent undersmooths relative to the density-optimal n^(-1/(d+4));
/// average-derivative estimation needs the kernel bias to vanish faster
/// than n^(-1/2).
pub fn default_bandwidths(ds: &Dataset) -> Result<Vec<f64>> {
    let n = ds.n();
    let d = ds.d();
    let rate = (n as f64).powf(-1.0 / (d as f64 + 6.0));
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let mean = (0..n).map(|i| ds.row(i)[j]).sum::<f64>() / n as f64;
        let ss = (0..n)
            .map(|i| {
                let c = ds.row(i)[j] - mean;
                c * c
            })
            .sum::<f64>();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd == 0.0 {
            return Err(Error::ZeroVariance(j + 1));
        }
        out.push(sd * rate);
    }
    Ok(out)
}

/// The raw average-derivative vector delta_hat.
///
/// The O(n^2 d) pair sum is evaluated row by row: the inner sum over
/// partners runs in index order, rows are reduced in index order, so the
/// result is identical for any worker count.
pub fn ade_estimate(ds: &Dataset, cfg: &AdeConfig) -> Result<Vec<f64>> {
    let n = ds.n();
    let d = ds.d();
    if cfg.bandwidths.len() != d {
        return Err(Error::DimensionMismatch {
            found: cfg.bandwidths.len(),
            expected: d,
        });
    }
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }

    // scale coordinates once: a_ij = x_ij / h_j
    let h = &cfg.bandwidths;
    let mut scaled = Vec::with_capacity(n * d);
    for i in 0..n {
        let row = ds.row(i);
        for j in 0..d {
            scaled.push(row[j] / h[j]);
        }
    }
    let ys = ds.ys();

    // Per-row partial sums g_i[j] = sum_{l != i} w_il * (a_ij - a_lj) with
    // w_il = exp(-|a_i - a_l|^2 / 2). Rows with Y_i = 0 contribute nothing.
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if ys[i] == 0 {
                return vec![0.0; d];
            }
            let ai = &scaled[i * d..(i + 1) * d];
            let mut acc = vec![0.0; d];
            let mut diff = vec![0.0; d];
            for l in 0..n {
                if l == i {
                    continue;
                }
                let al = &scaled[l * d..(l + 1) * d];
                let mut s = 0.0;
                for j in 0..d {
                    let t = ai[j] - al[j];
                    diff[j] = t;
                    s += t * t;
                }
                let w = (-0.5 * s).exp();
                for j in 0..d {
                    acc[j] += w * diff[j];
                }
            }
            acc
        })
        .collect();

    // product-Gaussian normalizing constant
    let norm_const = {
        let two_pi = std::f64::consts::TAU;
        let mut c = two_pi.powf(-(d as f64) / 2.0);
        for &hj in h {
            c /= hj;
        }
        c
    };
    let scale = 2.0 * norm_const / (n as f64 * (n as f64 - 1.0));

    let mut delta = vec![0.0; d];
    for g in &partials {
        for (acc, gj) in delta.iter_mut().zip(g) {
            *acc += gj;
        }
    }
    for (dj, hj) in delta.iter_mut().zip(h) {
        *dj *= scale / hj;
    }
    Ok(delta)
}

/// Snap a direction estimate to the 1/sqrt(n) component grid and normalize:
/// beta_check = floor(sqrt(n) * beta) / sqrt(n), returned as
/// beta_check / |beta_check|.
///
/// If flooring wipes out every component, the largest-magnitude input
/// component is kept at +-1/sqrt(n) so a direction survives.
pub fn round_to_grid(beta_hat: &[f64], n: usize) -> Result<Direction> {
    if beta_hat.iter().all(|&b| b == 0.0) {
        return Err(Error::ZeroVector);
    }
    let root_n = (n as f64).sqrt();
    let mut snapped: Vec<f64> = beta_hat
        .iter()
        .map(|&b| (b * root_n).floor() / root_n)
        .collect();
    if snapped.iter().all(|&b| b == 0.0) {
        let jmax = beta_hat
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        snapped[jmax] = beta_hat[jmax].signum() / root_n;
    }
    Direction::from_unnormalized(&snapped)
}

/// Full direction estimate: delta_hat, unit normalization, optional grid
/// rounding, with the sign fixed so the first nonzero component is positive.
///
/// The sign convention is cosmetic (every downstream statistic is invariant
/// under beta -> -beta) but makes reports deterministic.
pub fn estimate_direction(ds: &Dataset, cfg: &AdeConfig) -> Result<Direction> {
    let delta = ade_estimate(ds, cfg)?;
    let norm = l2_norm(&delta);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::UnidentifiedDirection);
    }
    let mut beta: Vec<f64> = delta.iter().map(|x| x / norm).collect();
    if let Some(first) = beta.iter().find(|&&b| b != 0.0) {
        if *first < 0.0 {
            for b in &mut beta {
                *b = -*b;
            }
        }
    }
    if cfg.round_to_grid {
        round_to_grid(&beta, ds.n())
    } else {
        Direction::from_unnormalized(&beta)
    }
}
