//! Plain mini-batch SGD on the softmax cross-entropy loss.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layer::Activation;
use super::network::{LabeledSet, Network};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 1,
        }
    }
}

/// Per-layer parameter gradients, laid out like the parameters themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers()
                .iter()
                .map(|l| vec![0.0; l.weight().len()])
                .collect(),
            biases: net.layers().iter().map(|l| vec![0.0; l.n_out()]).collect(),
        }
    }
}

fn check_trainable(net: &Network) -> Result<()> {
    let last = net.layers().last().expect("network is non-empty");
    if last.activation() != Activation::Softmax {
        return Err(Error::config(
            "cross-entropy training requires a softmax output layer",
        ));
    }
    Ok(())
}

/// Cross-entropy loss of one sample, accumulating its gradient into `grads`.
fn accumulate(net: &Network, x: &[f64], label: usize, grads: &mut Gradients) -> Result<f64> {
    let trace = net.forward_slice(x)?;
    let loss = -trace.output[label].max(f64::MIN_POSITIVE).ln();

    // softmax + cross-entropy: dL/dz = p - onehot
    let mut delta = trace.output.clone();
    delta[label] -= 1.0;

    for k in (0..net.layers().len()).rev() {
        let layer = &net.layers()[k];
        let input = &trace.pre_activations[k];
        let n_in = layer.n_in();
        let gw = &mut grads.weights[k];
        for (j, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &mut gw[j * n_in..(j + 1) * n_in];
            for (g, &a) in row.iter_mut().zip(input) {
                *g += d * a;
            }
        }
        for (g, &d) in grads.biases[k].iter_mut().zip(&delta) {
            *g += d;
        }
        if k == 0 {
            break;
        }
        // back through W_k, then through the activation of layer k-1,
        // whose output is exactly `input`
        let w = layer.weight().data();
        let mut upstream = vec![0.0; n_in];
        for (j, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (u, &wji) in upstream.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                *u += wji * d;
            }
        }
        let prev_act = net.layers()[k - 1].activation();
        for (u, &a) in upstream.iter_mut().zip(input) {
            *u *= match prev_act {
                Activation::Relu => {
                    if a > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Sigmoid => a * (1.0 - a),
                Activation::Identity => 1.0,
                Activation::Softmax => unreachable!("softmax only on the final layer"),
            };
        }
        delta = upstream;
    }
    Ok(loss)
}

/// Loss and analytic parameter gradient for a single labelled sample.
pub fn loss_and_gradients(net: &Network, x: &[f64], label: usize) -> Result<(f64, Gradients)> {
    check_trainable(net)?;
    if label >= net.class_count() {
        return Err(Error::input(format!(
            "label {label} outside [0, {})",
            net.class_count()
        )));
    }
    let mut grads = Gradients::zeros_like(net);
    let loss = accumulate(net, x, label, &mut grads)?;
    Ok((loss, grads))
}

/// Mean cross-entropy loss over a dataset.
pub fn mean_loss(net: &Network, data: &LabeledSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::input("loss of an empty dataset"));
    }
    let mut total = 0.0;
    for (x, &y) in data.samples.iter().zip(&data.labels) {
        let out = net.forward(x)?.output;
        total -= out[y].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / data.len() as f64)
}

/// Trains a copy of `net` and returns it. Deterministic given `config.seed`.
pub fn train_sgd(net: &Network, data: &LabeledSet, config: &TrainConfig) -> Result<Network> {
    if data.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    if config.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    if !config.learning_rate.is_finite() || config.learning_rate < 0.0 {
        return Err(Error::config("learning rate must be finite and non-negative"));
    }
    check_trainable(net)?;
    if let Some(&bad) = data.labels.iter().find(|&&y| y >= net.class_count()) {
        return Err(Error::input(format!(
            "label {bad} outside [0, {})",
            net.class_count()
        )));
    }

    let mut net = net.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = substream(config.seed, Domain::TrainShuffle, epoch as u64);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&net);
            for &i in batch {
                accumulate(&net, data.samples[i].data(), data.labels[i], &mut grads)?;
            }
            let step = config.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in net
                .layers_mut()
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.biases))
            {
                let (w, b) = layer.params_mut();
                for (p, g) in w.iter_mut().zip(gw) {
                    *p -= step * g;
                }
                for (p, g) in b.iter_mut().zip(gb) {
                    *p -= step * g;
                }
            }
        }
    }
    Ok(net)
}
