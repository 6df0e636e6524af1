use serde::{Deserialize, Serialize};

use super::ks::{ks_two_sample, KsResult};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Coordinate-wise KS tests combined with a Bonferroni correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub coordinates: Vec<KsResult>,
    pub alpha: f64,
    pub reject: bool,
}

impl TestOutcome {
    /// Per-coordinate significance level `alpha / D`.
    pub fn threshold(&self) -> f64 {
        self.alpha / self.coordinates.len() as f64
    }

    pub fn min_p_value(&self) -> f64 {
        self.coordinates
            .iter()
            .map(|r| r.p_value)
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn from_results(coordinates: Vec<KsResult>, alpha: f64) -> Self {
        let threshold = alpha / coordinates.len() as f64;
        let reject = coordinates.iter().any(|r| r.p_value < threshold);
        TestOutcome {
            coordinates,
            alpha,
            reject,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn check_compatible(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<()> {
    if a.kind != b.kind {
        return Err(Error::input(format!(
            "feature kinds differ: {} vs {}",
            a.kind, b.kind
        )));
    }
    if a.cols != b.cols {
        return Err(Error::shape(format!(
            "feature dimensions differ: {} vs {}",
            a.cols, b.cols
        )));
    }
    if a.cols == 0 {
        return Err(Error::shape("feature matrices have no columns"));
    }
    if a.rows == 0 || b.rows == 0 {
        return Err(Error::input("feature matrices must have at least one row"));
    }
    Ok(())
}

/// Rejects the joint null iff `min_i p_i < alpha / D`.
pub fn bonferroni_test(a: &FeatureMatrix, b: &FeatureMatrix, alpha: f64) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    check_compatible(a, b)?;
    let results = (0..a.cols)
        .map(|c| ks_two_sample(&a.column(c), &b.column(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestOutcome::from_results(results, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn matrix(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> FeatureMatrix {
        let values = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        FeatureMatrix::new(FeatureKind::ConfidenceVector, rows, cols, values, "t").unwrap()
    }

    #[test]
    fn copies_never_reject() {
        let a = matrix(50, 4, |r, c| ((r * 7 + c * 3) % 11) as f64);
        let out = bonferroni_test(&a, &a.clone(), 0.05).unwrap();
        assert!(!out.reject);
        assert!(out.coordinates.iter().all(|r| r.statistic == 0.0));
    }

    #[test]
    fn one_shifted_column_rejects() {
        let a = matrix(200, 3, |r, c| ((r * 37 + c * 11) % 101) as f64 / 101.0);
        let b = matrix(200, 3, |r, c| {
            let v = ((r * 53 + c * 17) % 101) as f64 / 101.0;
            if c == 1 { v + 1000.0 } else { v }
        });
        let out = bonferroni_test(&a, &b, 0.05).unwrap();
        assert!(out.reject);
        assert!(out.coordinates[1].p_value < out.threshold());
    }

    #[test]
    fn threshold_is_alpha_over_d() {
        let a = matrix(5, 10, |r, c| (r + c) as f64);
        let out = bonferroni_test(&a, &a, 0.05).unwrap();
        assert!((out.threshold() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn mismatched_inputs() {
        let a = matrix(5, 3, |r, c| (r + c) as f64);
        let b = matrix(5, 2, |r, c| (r + c) as f64);
        assert!(bonferroni_test(&a, &b, 0.05).is_err());
        let mut c = a.clone();
        c.kind = FeatureKind::Magdiff {
            layer: 0,
            norm: crate::actgraph::NormKind::Frobenius,
        };
        assert!(bonferroni_test(&a, &c, 0.05).is_err());
        assert!(bonferroni_test(&a, &a, 0.0).is_err());
        assert!(bonferroni_test(&a, &a, 1.0).is_err());
    }
}
