use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ControllerBody, ControllerSpec};
use crate::error::{Error, GuardError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

/// Affine map followed by an activation; `weights` is row-major with one row
/// per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    #[serde(with = "crate::decimal::matrix")]
    pub weights: Vec<Vec<f64>>,
    #[serde(with = "crate::decimal::vec")]
    pub bias: Vec<f64>,
    pub activation: Activation,
}

pub(super) fn validate_layers(layers: &[DenseLayer], input_dim: usize) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::DimMismatch("network has no layers".into()));
    }
    let mut width = input_dim;
    for (k, layer) in layers.iter().enumerate() {
        if layer.weights.is_empty() {
            return Err(Error::DimMismatch(format!("layer {k} has no outputs")));
        }
        if let Some(row) = layer.weights.iter().find(|r| r.len() != width) {
            return Err(Error::DimMismatch(format!("layer {k}: row of length {} but input width {width}", row.len())));
        }
        if layer.bias.len() != layer.weights.len() {
            return Err(Error::DimMismatch(format!(
                "layer {k}: {} biases for {} outputs",
                layer.bias.len(),
                layer.weights.len()
            )));
        }
        if layer.weights.iter().flatten().chain(&layer.bias).any(|w| !w.is_finite()) {
            return Err(Error::Parse(format!("layer {k}: non-finite parameter")));
        }
        width = layer.weights.len();
    }
    if width != 1 {
        return Err(Error::DimMismatch(format!("network output width {width}, expected 1")));
    }
    Ok(())
}

pub(super) fn eval_layers<S: Scalar>(layers: &[DenseLayer], mut x: Vec<S>) -> Result<S, GuardError> {
    for layer in layers {
        let mut next = Vec::with_capacity(layer.weights.len());
        for (row, &b) in layer.weights.iter().zip(&layer.bias) {
            let z = row.iter().zip(&x).fold(S::from_f64(b), |acc, (&w, xi)| acc + S::from_f64(w) * xi.clone());
            next.push(match layer.activation {
                Activation::Tanh => z.tanh(),
                Activation::Relu => z.relu()?,
                Activation::Identity => z,
            });
        }
        x = next;
    }
    Ok(x.pop().expect("validated networks have one output"))
}

/// Load a dense network controller from a JSON weights file.
pub fn load_nn(path: impl AsRef<Path>) -> Result<ControllerSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec = ControllerSpec::from_json(&text)?;
    match spec.body {
        ControllerBody::DenseNn { .. } => Ok(spec),
        ControllerBody::ExpressionTree { .. } => Err(Error::Parse("expected a dense_nn controller".into())),
    }
}
