//! Per-sample feature vectors: MAGDiff distances and softmax confidence vectors.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actgraph::{LayerGeometry, MeanGraphSummary, NormKind};
use crate::error::{Error, Result};
use crate::nn::{Network, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// Distance of the sample's activation graph at `layer` to each class mean graph.
    Magdiff { layer: usize, norm: NormKind },
    /// The network's softmax output.
    ConfidenceVector,
}

impl FeatureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::Magdiff { .. } => "magdiff",
            FeatureKind::ConfidenceVector => "cv",
        }
    }

    pub fn layer(&self) -> Option<usize> {
        match self {
            FeatureKind::Magdiff { layer, .. } => Some(*layer),
            FeatureKind::ConfidenceVector => None,
        }
    }

    pub fn norm(&self) -> Option<NormKind> {
        match self {
            FeatureKind::Magdiff { norm, .. } => Some(*norm),
            FeatureKind::ConfidenceVector => None,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Magdiff { layer, norm } => write!(f, "magdiff[layer={layer},norm={norm}]"),
            FeatureKind::ConfidenceVector => f.write_str("cv"),
        }
    }
}

/// `rows x cols` feature values, one row per sample, one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    /// Where the samples came from: a dataset name, a shift description, or "clean".
    pub source: String,
}

impl FeatureMatrix {
    pub fn new(
        kind: FeatureKind,
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::shape(format!(
                "{rows}x{cols} feature matrix given {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("feature matrix contains non-finite values"));
        }
        Ok(FeatureMatrix {
            kind,
            rows,
            cols,
            values,
            source: source.into(),
        })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.values[r * self.cols + c]).collect()
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            kind: self.kind,
            rows: rows.len(),
            cols: self.cols,
            values,
            source: self.source.clone(),
        }
    }
}

fn ordered_summaries<'a>(
    net: &Network,
    summaries: &'a [MeanGraphSummary],
    layer: usize,
) -> Result<Vec<&'a MeanGraphSummary>> {
    let classes = net.class_count();
    let mut by_class: Vec<Option<&MeanGraphSummary>> = vec![None; classes];
    for s in summaries {
        if s.layer != layer {
            return Err(Error::input(format!(
                "summary for class {} is for layer {}, features requested for layer {layer}",
                s.class, s.layer
            )));
        }
        let slot = by_class
            .get_mut(s.class)
            .ok_or_else(|| Error::input(format!("summary class {} outside [0, {classes})", s.class)))?;
        if slot.replace(s).is_some() {
            return Err(Error::input(format!("duplicate summary for class {}", s.class)));
        }
    }
    by_class
        .into_iter()
        .enumerate()
        .map(|(c, s)| s.ok_or_else(|| Error::input(format!("missing summary for class {c}"))))
        .collect()
}

/// Computes the feature matrix of `samples`. Rows follow sample order and
/// columns follow class index.
pub fn extract_features(
    net: &Network,
    summaries: &[MeanGraphSummary],
    samples: &[Tensor],
    kind: FeatureKind,
    source: impl Into<String>,
) -> Result<FeatureMatrix> {
    let classes = net.class_count();
    let rows: Vec<Vec<f64>> = match kind {
        FeatureKind::ConfidenceVector => samples
            .par_iter()
            .map(|x| net.forward(x).map(|t| t.output))
            .collect::<Result<_>>()?,
        FeatureKind::Magdiff { layer, norm } => {
            let geometry = LayerGeometry::new(net, layer)?;
            let ordered = ordered_summaries(net, summaries, layer)?;
            samples
                .par_iter()
                .map(|x| {
                    let trace = net.forward(x)?;
                    let input = &trace.pre_activations[layer];
                    ordered
                        .iter()
                        .map(|s| geometry.diff_norm(input, &s.mean_pre_activation, norm))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?
        }
    };
    let values = rows.into_iter().flatten().collect();
    FeatureMatrix::new(kind, samples.len(), classes, values, source)
}
