use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

/// Sequential stack of dense layers ending in a `class_count`-way output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<DenseLayer>,
    class_count: usize,
}

/// Every layer input captured during a forward pass, plus the final output.
///
/// `pre_activations[k]` is the vector fed into layer `k` (the raw input for
/// `k = 0`, otherwise the post-activation output of layer `k - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ForwardTrace {
    pub fn layer_input(&self, layer: usize) -> Option<&[f64]> {
        self.pre_activations.get(layer).map(Vec::as_slice)
    }
}

/// Inputs with integer class labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSet {
    pub samples: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(samples: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::input(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        Ok(LabeledSet { samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First `n` samples (or all of them if fewer).
    pub fn head(&self, n: usize) -> LabeledSet {
        let n = n.min(self.len());
        LabeledSet {
            samples: self.samples[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, class_count: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        if class_count == 0 {
            return Err(Error::shape("class count must be positive"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::shape(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].n_out(),
                    k + 1,
                    pair[1].n_in()
                )));
            }
        }
        let last = layers.len() - 1;
        if let Some(k) = layers[..last]
            .iter()
            .position(|l| l.activation() == Activation::Softmax)
        {
            return Err(Error::shape(format!(
                "softmax is only allowed on the final layer, found on layer {k}"
            )));
        }
        if layers[last].n_out() != class_count {
            return Err(Error::shape(format!(
                "final layer has {} outputs for {class_count} classes",
                layers[last].n_out()
            )));
        }
        Ok(Network {
            layers,
            class_count,
        })
    }

    /// He-uniform initialised MLP with `sizes = [n_in, h1, ..., D]`, hidden
    /// activation `hidden` and a softmax output.
    pub fn mlp(sizes: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::shape(format!("invalid architecture {sizes:?}")));
        }
        let mut rng = substream(seed, Domain::TrainInit, 0);
        let n_layers = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / n_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let data: Vec<f64> = (0..n_in * n_out).map(|_| dist.sample(&mut rng)).collect();
                let act = if k + 1 == n_layers {
                    Activation::Softmax
                } else {
                    hidden
                };
                DenseLayer::new(Tensor::matrix(n_out, n_in, data)?, vec![0.0; n_out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers, sizes[sizes.len() - 1])
    }

    /// Random network with arbitrary activations, used by property tests.
    pub fn random_with<R: Rng>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if activations.len() + 1 != sizes.len() {
            return Err(Error::shape("one activation per layer required"));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let data = (0..w[0] * w[1]).map(|_| rng.random_range(-1.0..1.0)).collect();
                let bias = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
                DenseLayer::new(Tensor::matrix(w[1], w[0], data)?, bias, act)
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers, sizes[sizes.len() - 1])
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn layer(&self, k: usize) -> Option<&DenseLayer> {
        self.layers.get(k)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    /// Layer sizes `[n_in, n_1, ..., D]`.
    pub fn architecture(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseLayer::n_out))
            .collect()
    }

    /// Resolves a signed layer reference: non-negative values index from the
    /// input, negative values count dense layers back from the output
    /// (`-1` is the final layer).
    pub fn resolve_layer(&self, index: i64) -> Result<usize> {
        let n = self.layers.len() as i64;
        let resolved = if index < 0 { n + index } else { index };
        if (0..n).contains(&resolved) {
            Ok(resolved as usize)
        } else {
            Err(Error::input(format!(
                "layer index {index} out of range for a {n}-layer network"
            )))
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<ForwardTrace> {
        self.forward_slice(x.data())
    }

    /// Forward pass over a flattened input.
    pub fn forward_slice(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let next = layer.apply(&current);
            pre_activations.push(current);
            current = next;
        }
        Ok(ForwardTrace {
            pre_activations,
            output: current,
        })
    }

    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_slice(x).map(|t| t.output)
    }

    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.output))
    }

    pub fn accuracy(&self, data: &LabeledSet) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::input("accuracy of an empty dataset"));
        }
        let mut correct = 0usize;
        for (x, &y) in data.samples.iter().zip(&data.labels) {
            if self.predict(x)? == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(w: Vec<f64>, rows: usize, cols: usize, act: Activation) -> Network {
        let layer = DenseLayer::new(
            Tensor::matrix(rows, cols, w).unwrap(),
            vec![0.0; rows],
            act,
        )
        .unwrap();
        Network::new(vec![layer], rows).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Identity);
        let trace = net.forward(&Tensor::vector(vec![3.0, -1.0]).unwrap()).unwrap();
        assert_eq!(trace.output, vec![3.0, -1.0]);
    }

    #[test]
    fn relu_layer_hand_evaluation() {
        let net = single(vec![1.0, 1.0, 1.0, -1.0], 2, 2, Activation::Relu);
        let x = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let trace = net.forward(&x).unwrap();
        assert_eq!(trace.pre_activations[0], vec![1.0, 2.0]);
        assert_eq!(trace.output, vec![3.0, 0.0]);
        assert_eq!(net.predict(&x).unwrap(), 0);
    }

    #[test]
    fn softmax_on_zero_logits() {
        let net = single(vec![0.0, 0.0], 2, 1, Activation::Softmax);
        let out = net.forward(&Tensor::vector(vec![5.0]).unwrap()).unwrap().output;
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn argmax_ties_and_plain_case() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn wrong_input_size_is_shape_error() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Identity);
        let err = net.forward(&Tensor::vector(vec![1.0]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn incompatible_layers_rejected() {
        let a = DenseLayer::new(Tensor::zeros(vec![3, 2]), vec![0.0; 3], Activation::Relu).unwrap();
        let b = DenseLayer::new(Tensor::zeros(vec![2, 4]), vec![0.0; 2], Activation::Softmax).unwrap();
        assert!(Network::new(vec![a, b], 2).is_err());
    }

    #[test]
    fn hidden_softmax_rejected() {
        let a = DenseLayer::new(Tensor::zeros(vec![2, 2]), vec![0.0; 2], Activation::Softmax).unwrap();
        let b = DenseLayer::new(Tensor::zeros(vec![2, 2]), vec![0.0; 2], Activation::Softmax).unwrap();
        assert!(Network::new(vec![a, b], 2).is_err());
    }

    #[test]
    fn accuracy_counts() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Identity);
        let xs = vec![
            Tensor::vector(vec![1.0, 0.0]).unwrap(),
            Tensor::vector(vec![0.0, 1.0]).unwrap(),
            Tensor::vector(vec![2.0, 1.0]).unwrap(),
            Tensor::vector(vec![1.0, 3.0]).unwrap(),
        ];
        let all = LabeledSet::new(xs.clone(), vec![0, 1, 0, 1]).unwrap();
        assert_eq!(net.accuracy(&all).unwrap(), 1.0);
        let none = LabeledSet::new(xs.clone(), vec![1, 0, 1, 0]).unwrap();
        assert_eq!(net.accuracy(&none).unwrap(), 0.0);
        let three = LabeledSet::new(xs, vec![0, 1, 0, 0]).unwrap();
        assert_eq!(net.accuracy(&three).unwrap(), 0.75);
        assert!(net.accuracy(&LabeledSet::default()).is_err());
    }

    #[test]
    fn forward_matches_layer_by_layer_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let acts = [Activation::Relu, Activation::Sigmoid, Activation::Softmax];
        let net = Network::random_with(&[5, 7, 4, 3], &acts, &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|i| i as f64 * 0.3 - 0.5).collect();
        let trace = net.forward_slice(&x).unwrap();
        let mut cur = x.clone();
        for (k, layer) in net.layers().iter().enumerate() {
            assert_eq!(trace.pre_activations[k], cur);
            cur = layer.apply(&cur);
        }
        assert_eq!(trace.output, cur);
        assert_eq!(net.forward_slice(&x).unwrap(), trace);
        let total: f64 = trace.output.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(trace.output.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn negative_layer_indices() {
        let net = Network::mlp(&[4, 3, 3, 2], Activation::Relu, 0).unwrap();
        assert_eq!(net.resolve_layer(-1).unwrap(), 2);
        assert_eq!(net.resolve_layer(-3).unwrap(), 0);
        assert_eq!(net.resolve_layer(1).unwrap(), 1);
        assert!(net.resolve_layer(-4).is_err());
        assert!(net.resolve_layer(3).is_err());
    }
}
