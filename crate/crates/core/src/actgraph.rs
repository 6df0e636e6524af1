//! Activation graphs of dense layers and their distance to class mean graphs.
//!
//! For layer `l` with weight `W` (shape `n_out x n_in`) and layer input `x`,
//! the activation graph is the `n_in x n_out` matrix `G(i, j) = W(j, i) * x(i)`.
//! It is linear in `x`, so the mean graph of a class is the graph of the
//! class mean input, and `G(x) - G(mu)` is (the transpose of) `W diag(x - mu)`.
//! Only mean input vectors are ever stored.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ForwardTrace, LabeledSet, Network};
use crate::rng::{substream, Domain};

/// Default number of training samples averaged per class.
pub const DEFAULT_SUBSET_SIZE: usize = 1000;

const POWER_MAX_ITER: usize = 10_000;
const POWER_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationGraph {
    pub layer: usize,
    /// Number of source vertices (layer input width).
    pub n_in: usize,
    /// Number of target vertices (layer output width).
    pub n_out: usize,
    /// Row-major `n_in x n_out` edge weights.
    pub entries: Vec<f64>,
}

impl ActivationGraph {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_out + j]
    }
}

/// Class-conditional mean activation graph, stored as the mean layer input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanGraphSummary {
    pub class: usize,
    pub layer: usize,
    pub mean_pre_activation: Vec<f64>,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Frobenius,
    Spectral,
    SupOperator,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::Frobenius, NormKind::Spectral, NormKind::SupOperator];
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Frobenius => "frobenius",
            NormKind::Spectral => "spectral",
            NormKind::SupOperator => "sup_operator",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" | "fro" => Ok(NormKind::Frobenius),
            "spectral" => Ok(NormKind::Spectral),
            "sup_operator" | "sup" | "inf" => Ok(NormKind::SupOperator),
            other => Err(Error::input(format!("unknown norm '{other}'"))),
        }
    }
}

fn layer_input<'a>(net: &Network, trace: &'a ForwardTrace, layer: usize) -> Result<&'a [f64]> {
    let dense = net.layer(layer).ok_or_else(|| {
        Error::input(format!(
            "layer {layer} out of range for a {}-layer network",
            net.layers().len()
        ))
    })?;
    let x = trace
        .layer_input(layer)
        .ok_or_else(|| Error::shape(format!("trace has no input for layer {layer}")))?;
    if x.len() != dense.n_in() {
        return Err(Error::shape(format!(
            "trace input for layer {layer} has {} values, layer expects {}",
            x.len(),
            dense.n_in()
        )));
    }
    Ok(x)
}

/// Materialises `G_l(x)` from a forward trace. Bias does not enter.
pub fn activation_graph(net: &Network, trace: &ForwardTrace, layer: usize) -> Result<ActivationGraph> {
    let x = layer_input(net, trace, layer)?;
    Ok(graph_of_input(net, layer, x))
}

pub(crate) fn graph_of_input(net: &Network, layer: usize, x: &[f64]) -> ActivationGraph {
    let w = net.layers()[layer].weight();
    let (n_out, n_in) = (w.rows(), w.cols());
    let mut entries = vec![0.0; n_in * n_out];
    for i in 0..n_in {
        for j in 0..n_out {
            entries[i * n_out + j] = w.at(j, i) * x[i];
        }
    }
    ActivationGraph {
        layer,
        n_in,
        n_out,
        entries,
    }
}

impl MeanGraphSummary {
    /// The full mean graph implied by this summary.
    pub fn mean_graph(&self, net: &Network) -> Result<ActivationGraph> {
        let dense = net
            .layer(self.layer)
            .ok_or_else(|| Error::input(format!("layer {} out of range", self.layer)))?;
        if dense.n_in() != self.mean_pre_activation.len() {
            return Err(Error::shape("summary width does not match layer input"));
        }
        Ok(graph_of_input(net, self.layer, &self.mean_pre_activation))
    }
}

/// Builds one summary per class from at most `subset_size` training samples
/// of that class, drawn without replacement.
pub fn mean_graph_summaries(
    net: &Network,
    data: &LabeledSet,
    layer: usize,
    subset_size: usize,
    seed: u64,
) -> Result<Vec<MeanGraphSummary>> {
    let width = net
        .layer(layer)
        .ok_or_else(|| {
            Error::input(format!(
                "layer {layer} out of range for a {}-layer network",
                net.layers().len()
            ))
        })?
        .n_in();
    if subset_size == 0 {
        return Err(Error::config("subset size must be positive"));
    }
    let classes = net.class_count();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (idx, &y) in data.labels.iter().enumerate() {
        let bucket = members.get_mut(y).ok_or_else(|| {
            Error::input(format!("label {y} at sample {idx} outside [0, {classes})"))
        })?;
        bucket.push(idx);
    }
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(Error::config(format!(
            "class {empty} has no training samples"
        )));
    }

    members
        .par_iter()
        .enumerate()
        .map(|(class, idx)| {
            let take = subset_size.min(idx.len());
            let mut rng = substream(seed, Domain::MeanGraphSubset, class as u64);
            let mut chosen: Vec<usize> = index::sample(&mut rng, idx.len(), take)
                .into_iter()
                .map(|k| idx[k])
                .collect();
            chosen.sort_unstable();
            let mut sum = vec![0.0; width];
            for &s in &chosen {
                let trace = net.forward(&data.samples[s])?;
                for (acc, v) in sum.iter_mut().zip(&trace.pre_activations[layer]) {
                    *acc += v;
                }
            }
            let n = chosen.len() as f64;
            sum.iter_mut().for_each(|v| *v /= n);
            Ok(MeanGraphSummary {
                class,
                layer,
                mean_pre_activation: sum,
                sample_count: chosen.len(),
            })
        })
        .collect()
}

/// Per-layer quantities reused across every sample and class.
#[derive(Debug, Clone)]
pub struct LayerGeometry {
    pub layer: usize,
    n_out: usize,
    n_in: usize,
    weight: Vec<f64>,
    /// Euclidean norm of each weight column.
    column_norms: Vec<f64>,
}

impl LayerGeometry {
    pub fn new(net: &Network, layer: usize) -> Result<Self> {
        let dense = net.layer(layer).ok_or_else(|| {
            Error::input(format!(
                "layer {layer} out of range for a {}-layer network",
                net.layers().len()
            ))
        })?;
        let w = dense.weight();
        let (n_out, n_in) = (w.rows(), w.cols());
        let column_norms = (0..n_in)
            .map(|i| (0..n_out).map(|j| w.at(j, i).powi(2)).sum::<f64>().sqrt())
            .collect();
        Ok(LayerGeometry {
            layer,
            n_out,
            n_in,
            weight: w.data().to_vec(),
            column_norms,
        })
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// `W diag(d)` as a row-major `n_out x n_in` matrix.
    pub fn scaled_weight(&self, d: &[f64]) -> Vec<f64> {
        let mut m = self.weight.clone();
        for row in m.chunks_exact_mut(self.n_in) {
            for (v, &di) in row.iter_mut().zip(d) {
                *v *= di;
            }
        }
        m
    }

    /// Norm of `G(x) - G(mu)` for layer input `x` and class mean `mu`.
    pub fn diff_norm(&self, x: &[f64], mu: &[f64], norm: NormKind) -> Result<f64> {
        if x.len() != self.n_in || mu.len() != self.n_in {
            return Err(Error::shape(format!(
                "layer {} expects width {}, got input {} and mean {}",
                self.layer,
                self.n_in,
                x.len(),
                mu.len()
            )));
        }
        let d: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
        Ok(match norm {
            NormKind::Frobenius => d
                .iter()
                .zip(&self.column_norms)
                .map(|(di, ci)| (di * ci).powi(2))
                .sum::<f64>()
                .sqrt(),
            NormKind::SupOperator => self
                .weight
                .chunks_exact(self.n_in)
                .map(|row| row.iter().zip(&d).map(|(w, di)| (w * di).abs()).sum::<f64>())
                .fold(0.0, f64::max),
            NormKind::Spectral => {
                spectral_norm_raw(self.n_out, self.n_in, &self.scaled_weight(&d))
            }
        })
    }
}

/// `|| G_l(x) - mean graph ||` under `norm`, where `x` is taken from `trace`.
pub fn graph_diff_norm(
    net: &Network,
    trace: &ForwardTrace,
    summary: &MeanGraphSummary,
    norm: NormKind,
) -> Result<f64> {
    let x = layer_input(net, trace, summary.layer)?;
    LayerGeometry::new(net, summary.layer)?.diff_norm(x, &summary.mean_pre_activation, norm)
}

/// Largest singular value of a row-major `rows x cols` matrix.
///
/// Power iteration on the smaller Gram matrix, started from the normalised
/// all-ones vector. If the iterate collapses onto the null space the
/// iteration restarts from successive standard basis vectors.
pub fn spectral_norm_raw(rows: usize, cols: usize, m: &[f64]) -> f64 {
    assert_eq!(m.len(), rows * cols, "matrix data does not match its shape");
    if m.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let gram = small_gram(rows, cols, m);
    let k = rows.min(cols);
    let trace: f64 = (0..k).map(|i| gram[i * k + i]).sum();

    let ones = vec![1.0 / (k as f64).sqrt(); k];
    let mut lambda = power_iterate(&gram, k, ones);
    let mut basis = 0;
    while lambda <= 1e-12 * trace && basis < k {
        let mut e = vec![0.0; k];
        e[basis] = 1.0;
        lambda = power_iterate(&gram, k, e);
        basis += 1;
    }
    lambda.max(0.0).sqrt()
}

pub fn spectral_norm(matrix: &crate::nn::Tensor) -> Result<f64> {
    if matrix.shape().len() != 2 {
        return Err(Error::shape("spectral norm needs a 2-D tensor"));
    }
    Ok(spectral_norm_raw(matrix.rows(), matrix.cols(), matrix.data()))
}

fn small_gram(rows: usize, cols: usize, m: &[f64]) -> Vec<f64> {
    if rows <= cols {
        // M M^T
        let mut g = vec![0.0; rows * rows];
        for a in 0..rows {
            let ra = &m[a * cols..(a + 1) * cols];
            for b in a..rows {
                let rb = &m[b * cols..(b + 1) * cols];
                let v: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                g[a * rows + b] = v;
                g[b * rows + a] = v;
            }
        }
        g
    } else {
        // M^T M
        let mut g = vec![0.0; cols * cols];
        for row in m.chunks_exact(cols) {
            for a in 0..cols {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..cols {
                    g[a * cols + b] += ra * row[b];
                }
            }
        }
        for a in 0..cols {
            for b in 0..a {
                g[a * cols + b] = g[b * cols + a];
            }
        }
        g
    }
}

fn power_iterate(g: &[f64], k: usize, mut v: Vec<f64>) -> f64 {
    let mut lambda = 0.0;
    let mut w = vec![0.0; k];
    for it in 0..POWER_MAX_ITER {
        for (a, wa) in w.iter_mut().enumerate() {
            *wa = g[a * k..(a + 1) * k].iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let next: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / norm);
        if it > 0 && (next - lambda).abs() <= POWER_REL_TOL * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}
