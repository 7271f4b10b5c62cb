//! Non-parametric estimation of exposure-effect curves from logged
//! (exposure, next-score) pairs: a Nadaraya-Watson regressor with a Gaussian
//! kernel. Fits are immutable after construction; replaying an environment
//! on top of fitted curves lives in [`crate::market`].

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {need} samples, got {got}")]
    InsufficientData { got: usize, need: usize },
    #[error("bandwidth must be positive and finite")]
    InvalidBandwidth,
    #[error("no fitted exposure curve for target product {0}")]
    MissingFit(u32),
    #[error("sample log i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed sample log at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

const MIN_SAMPLES: usize = 5;

/// One logged observation: impressions in window t and the average
/// recommended score in window t+1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureSample {
    pub p: f64,
    pub z_next: f64,
}

/// Kernel-weighted mean over the training samples. Predictions are clamped
/// to [0, 1]; queries outside the sampled exposure range evaluate at the
/// nearest boundary (no extrapolated trend).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedExposureFn {
    pub bandwidth: f64,
    samples: Vec<ExposureSample>,
    p_min: f64,
    p_max: f64,
}

/// Silverman's rule-of-thumb bandwidth over the exposure values.
fn silverman_bandwidth(ps: &[f64]) -> f64 {
    let n = ps.len() as f64;
    let mean = ps.iter().sum::<f64>() / n;
    let sd = (ps.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n).sqrt();
    let mut sorted = ps.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| -> f64 {
        let idx = f * (sorted.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let frac = idx - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        // Degenerate sample spread; any positive bandwidth gives the same
        // (constant) prediction.
        1.0
    }
}

/// Fits a Nadaraya-Watson estimator. `bandwidth = None` applies Silverman's
/// rule to the exposure values.
pub fn fit_exposure(
    samples: &[ExposureSample],
    bandwidth: Option<f64>,
) -> Result<FittedExposureFn, FitError> {
    if samples.len() < MIN_SAMPLES {
        return Err(FitError::InsufficientData { got: samples.len(), need: MIN_SAMPLES });
    }
    let ps: Vec<f64> = samples.iter().map(|s| s.p).collect();
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(&ps));
    if !(h > 0.0) || !h.is_finite() {
        return Err(FitError::InvalidBandwidth);
    }
    let p_min = ps.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_max = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FittedExposureFn { bandwidth: h, samples: samples.to_vec(), p_min, p_max })
}

impl FittedExposureFn {
    /// Kernel-weighted prediction at exposure `p`.
    pub fn eval(&self, p: f64) -> f64 {
        let q = p.clamp(self.p_min, self.p_max);
        // Subtract the smallest squared distance before exponentiating so the
        // weights stay representable even for wide sample ranges.
        let d2: Vec<f64> = self
            .samples
            .iter()
            .map(|s| {
                let u = (q - s.p) / self.bandwidth;
                0.5 * u * u
            })
            .collect();
        let d2_min = d2.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut num = 0.0;
        let mut den = 0.0;
        for (s, d) in self.samples.iter().zip(&d2) {
            let w = (-(d - d2_min)).exp();
            num += w * s.z_next;
            den += w;
        }
        (num / den).clamp(0.0, 1.0)
    }

    pub fn samples(&self) -> &[ExposureSample] {
        &self.samples
    }

    pub fn exposure_range(&self) -> (f64, f64) {
        (self.p_min, self.p_max)
    }
}

/// Root-mean-square error of a fit against a reference curve on a grid.
pub fn rmse_against<F: Fn(f64) -> f64>(fit: &FittedExposureFn, truth: F, grid: &[f64]) -> f64 {
    let sq: f64 = grid
        .iter()
        .map(|&p| {
            let d = fit.eval(p) - truth(p);
            d * d
        })
        .sum();
    (sq / grid.len() as f64).sqrt()
}

/// Reads sample logs in the CSV layout `product_id,window,p,z_next`
/// (header row optional). Returns samples grouped by product id.
pub fn read_sample_log(path: &Path) -> Result<Vec<(u32, Vec<ExposureSample>)>, FitError> {
    let file = std::fs::File::open(path)?;
    let mut by_product: Vec<(u32, Vec<ExposureSample>)> = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("product_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(FitError::Parse { line: i + 1, msg: "expected 4 fields".into() });
        }
        let parse_err = |msg: &str| FitError::Parse { line: i + 1, msg: msg.into() };
        let id: u32 = fields[0].parse().map_err(|_| parse_err("bad product_id"))?;
        let p: f64 = fields[2].parse().map_err(|_| parse_err("bad p"))?;
        let z: f64 = fields[3].parse().map_err(|_| parse_err("bad z_next"))?;
        match by_product.iter_mut().find(|(pid, _)| *pid == id) {
            Some((_, v)) => v.push(ExposureSample { p, z_next: z }),
            None => by_product.push((id, vec![ExposureSample { p, z_next: z }])),
        }
    }
    Ok(by_product)
}

/// Writes a sample log in the layout read by [`read_sample_log`].
pub fn write_sample_log(
    path: &Path,
    rows: &[(u32, u32, ExposureSample)],
) -> Result<(), FitError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "product_id,window,p,z_next")?;
    for (id, window, s) in rows {
        writeln!(f, "{},{},{},{}", id, window, s.p, s.z_next)?;
    }
    Ok(())
}

/// Serializes fits (bandwidth + sample arrays) as JSON.
pub fn save_fits(path: &Path, fits: &[(u32, FittedExposureFn)]) -> Result<(), FitError> {
    let json = serde_json::to_string_pretty(fits)
        .map_err(|e| FitError::Parse { line: 0, msg: e.to_string() })?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_fits(path: &Path) -> Result<Vec<(u32, FittedExposureFn)>, FitError> {
    let json = std::fs::read_to_string(path)?;
    serde_json::from_str(&json).map_err(|e| FitError::Parse { line: 0, msg: e.to_string() })
}
