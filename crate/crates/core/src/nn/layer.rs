use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    /// Applies the activation to `z` in place.
    pub fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Identity => {}
            Activation::Softmax => softmax_in_place(z),
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        };
        f.write_str(s)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::input(format!("unknown activation '{other}'"))),
        }
    }
}

/// Fully connected layer `x -> act(W x + b)` with `W` of shape `(n_out, n_in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    weight: Tensor,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::shape(format!(
                "weight must be 2-D, got shape {:?}",
                weight.shape()
            )));
        }
        if weight.rows() != bias.len() {
            return Err(Error::shape(format!(
                "weight has {} rows but bias has length {}",
                weight.rows(),
                bias.len()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::input("non-finite bias"));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn n_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn n_out(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (self.weight.data_mut(), &mut self.bias)
    }

    /// Pre-activation `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        let n_in = self.n_in();
        self.bias
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let row = &self.weight.data()[j * n_in..(j + 1) * n_in];
                row.iter().zip(x).fold(b, |acc, (w, v)| acc + w * v)
            })
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.affine(x);
        self.activation.apply(&mut z);
        z
    }
}
