//! Two-sample Kolmogorov-Smirnov test.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n * m` for which the p-value is computed exactly.
pub const EXACT_MAX_PRODUCT: u64 = 10_000;

const SERIES_TERM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Exact null distribution of the statistic (continuous data, no ties).
    Exact,
    /// Limiting Kolmogorov distribution with the effective-size correction.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
    pub method: PValueMethod,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// `max |i*m - j*n|` over the ECDF sweep, i.e. `T * n * m` as an integer.
///
/// Both inputs must be sorted. ECDFs are right-continuous: all copies of a
/// tied value are counted before the difference is evaluated.
fn scaled_statistic(a: &[f64], b: &[f64]) -> u64 {
    let (n, m) = (a.len() as u64, b.len() as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0u64;
    while i < a.len() && j < b.len() {
        let v = match a[i].total_cmp(&b[j]) {
            Ordering::Greater => b[j],
            _ => a[i],
        };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        best = best.max((i as u64 * m).abs_diff(j as u64 * n));
    }
    // once one sample is exhausted the gap only shrinks
    best
}

fn validate(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("KS test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::input("KS test samples must be finite"));
    }
    Ok(())
}

/// The KS statistic `sup_z |F_a(z) - F_b(z)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    validate(a, b)?;
    let d = scaled_statistic(&sorted(a), &sorted(b));
    Ok(d as f64 / (a.len() as f64 * b.len() as f64))
}

/// Two-sided two-sample KS test.
///
/// The p-value is exact when `n * m <= EXACT_MAX_PRODUCT` and asymptotic
/// otherwise.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    validate(a, b)?;
    let (n, m) = (a.len(), b.len());
    let d = scaled_statistic(&sorted(a), &sorted(b));
    let statistic = d as f64 / (n as f64 * m as f64);
    let (p_value, method) = if (n as u64) * (m as u64) <= EXACT_MAX_PRODUCT {
        (exact_p_value(d, n, m), PValueMethod::Exact)
    } else {
        (asymptotic_p_value(statistic, n, m), PValueMethod::Asymptotic)
    };
    Ok(KsResult {
        statistic,
        p_value,
        n,
        m,
        method,
    })
}

/// Like [`ks_two_sample`] but always uses the asymptotic p-value.
pub fn ks_two_sample_asymptotic(a: &[f64], b: &[f64]) -> Result<KsResult> {
    validate(a, b)?;
    let (n, m) = (a.len(), b.len());
    let statistic = ks_statistic(a, b)?;
    Ok(KsResult {
        statistic,
        p_value: asymptotic_p_value(statistic, n, m),
        n,
        m,
        method: PValueMethod::Asymptotic,
    })
}

/// `P(T >= t)` from the limiting distribution, evaluated at
/// `lambda = (sqrt(e) + 0.12 + 0.11 / sqrt(e)) * t` with `e = n m / (n + m)`.
pub fn asymptotic_p_value(statistic: f64, n: usize, m: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    let en = ((n as f64 * m as f64) / (n + m) as f64).sqrt();
    kolmogorov_q((en + 0.12 + 0.11 / en) * statistic)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`.
///
/// Below `lambda = 1.18` the alternating series converges slowly, so the
/// equivalent theta-function form of the CDF is summed instead.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let c = -PI * PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=100u32 {
            let odd = f64::from(2 * k - 1);
            let term = (c * odd * odd).exp();
            cdf += term;
            if term < SERIES_TERM_TOL {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / lambda * cdf
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100u32 {
            let kf = f64::from(k);
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < SERIES_TERM_TOL {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Exact `P(T * n * m >= d)` under the null, by counting monotone lattice
/// paths from `(0, 0)` to `(n, m)` that touch `|i m - j n| >= d`. Each path
/// is one equally likely interleaving of the two samples.
pub fn exact_p_value(d: u64, n: usize, m: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let (nu, mu) = (n as u64, m as u64);
    let total = (n + m) as f64;
    let escapes = |i: usize, j: usize| (i as u64 * mu).abs_diff(j as u64 * nu) >= d;

    // prob[j] holds the probability of reaching (i, j) without having escaped
    let mut prob = vec![0.0f64; m + 1];
    let mut p = 0.0;
    for i in 0..=n {
        for j in 0..=m {
            let mut here = if i == 0 && j == 0 { 1.0 } else { 0.0 };
            if i > 0 {
                // step from (i-1, j) taking the next value from sample a
                let remaining = total - (i - 1 + j) as f64;
                here += prob[j] * (n - (i - 1)) as f64 / remaining;
            }
            if j > 0 {
                let remaining = total - (i + j - 1) as f64;
                here += prob[j - 1] * (m - (j - 1)) as f64 / remaining;
            }
            if escapes(i, j) {
                p += here;
                here = 0.0;
            }
            prob[j] = here;
        }
    }
    p.clamp(0.0, 1.0)
}
