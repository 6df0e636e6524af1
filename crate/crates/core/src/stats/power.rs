//! Bootstrap estimation of test power and type-I error.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bonferroni::{check_alpha, check_compatible, TestOutcome};
use super::ks::ks_two_sample;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};
use crate::rng::{substream, Domain};

/// Default bootstrap repetitions.
pub const DEFAULT_REPETITIONS: usize = 1500;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Clean versus shifted samples.
    Power,
    /// Two independent draws from the clean samples.
    Type1,
}

impl fmt::Display for PowerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerMode::Power => "power",
            PowerMode::Type1 => "type1",
        })
    }
}

impl FromStr for PowerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(PowerMode::Power),
            "type1" => Ok(PowerMode::Type1),
            other => Err(Error::input(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub sample_size: usize,
    pub repetitions: usize,
    pub alpha: f64,
    pub seed: u64,
    pub mode: PowerMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub feature: FeatureKind,
    pub mode: PowerMode,
    pub sample_size: usize,
    pub repetitions: usize,
    pub alpha: f64,
    pub seed: u64,
    pub rejections: usize,
    pub estimate: f64,
    pub half_width: f64,
}

/// Half-width of the normal-approximation 95% interval for a proportion.
pub fn clt_half_width(estimate: f64, repetitions: usize) -> f64 {
    Z_95 * (estimate * (1.0 - estimate) / repetitions as f64).sqrt()
}

fn draw_rows<R: Rng>(rng: &mut R, available: usize, count: usize) -> Vec<usize> {
    (0..count).map(|_| rng.random_range(0..available)).collect()
}

fn test_rows(
    a: &FeatureMatrix,
    rows_a: &[usize],
    b: &FeatureMatrix,
    rows_b: &[usize],
    alpha: f64,
) -> Result<TestOutcome> {
    let gather = |f: &FeatureMatrix, rows: &[usize], c: usize| -> Vec<f64> {
        rows.iter().map(|&r| f.values[r * f.cols + c]).collect()
    };
    let results = (0..a.cols)
        .map(|c| ks_two_sample(&gather(a, rows_a, c), &gather(b, rows_b, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestOutcome::from_results(results, alpha))
}

/// Runs one bootstrap repetition and reports whether the test rejected.
pub fn bootstrap_repetition(
    clean: &FeatureMatrix,
    shifted: &FeatureMatrix,
    config: &PowerConfig,
    repetition: u64,
) -> Result<TestOutcome> {
    let mut rng = substream(config.seed, Domain::Bootstrap, repetition);
    let m = config.sample_size;
    let rows_clean = draw_rows(&mut rng, clean.rows, m);
    match config.mode {
        PowerMode::Power => {
            let rows_shifted = draw_rows(&mut rng, shifted.rows, m);
            test_rows(clean, &rows_clean, shifted, &rows_shifted, config.alpha)
        }
        PowerMode::Type1 => {
            let rows_other = draw_rows(&mut rng, clean.rows, m);
            test_rows(clean, &rows_clean, clean, &rows_other, config.alpha)
        }
    }
}

/// Estimates the rejection rate of the Bonferroni KS test over
/// `config.repetitions` bootstrap draws of `config.sample_size` rows (with
/// replacement) from each matrix. In type-I mode `shifted` is ignored apart
/// from the compatibility check.
///
/// Repetition `r` uses its own random substream, so the result does not
/// depend on the thread count.
pub fn estimate_power(
    clean: &FeatureMatrix,
    shifted: &FeatureMatrix,
    config: &PowerConfig,
) -> Result<PowerReport> {
    check_alpha(config.alpha)?;
    check_compatible(clean, shifted)?;
    if config.sample_size < 1 {
        return Err(Error::config("sample size must be at least 1"));
    }
    if config.repetitions < 1 {
        return Err(Error::config("repetitions must be at least 1"));
    }
    let rejections = (0..config.repetitions as u64)
        .into_par_iter()
        .map(|r| bootstrap_repetition(clean, shifted, config, r).map(|o| usize::from(o.reject)))
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    let estimate = rejections as f64 / config.repetitions as f64;
    Ok(PowerReport {
        feature: clean.kind,
        mode: config.mode,
        sample_size: config.sample_size,
        repetitions: config.repetitions,
        alpha: config.alpha,
        seed: config.seed,
        rejections,
        estimate,
        half_width: clt_half_width(estimate, config.repetitions),
    })
}
