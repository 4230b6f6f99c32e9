//! Controllers: symbolic expression trees and dense neural networks, both
//! evaluable over any [`Scalar`] kind.
//!
//! A controller reads an observation vector built from the state according to
//! its `obs_map`, and returns a raw (unclipped) action. Clipping and force
//! scaling are the simulator's job.

mod catalog;
mod formula;
mod nn;

use serde::{Deserialize, Serialize};

pub use catalog::{builtin, builtin_names};
pub use nn::{load_nn, Activation, DenseLayer};

use crate::dynamics::System;
use crate::error::{Error, GuardError, Result};
use crate::scalar::Scalar;

/// Observation features, named by the physical quantity they read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsFeature {
    CosTheta,
    SinTheta,
    ThetaDot,
    X,
    XDot,
}

impl ObsFeature {
    /// Default observation layout of each environment.
    pub fn default_map(system: System) -> Vec<ObsFeature> {
        use ObsFeature::*;
        match system {
            System::Pendulum => vec![CosTheta, SinTheta, ThetaDot],
            System::CartpoleSwingup => vec![X, XDot, CosTheta, SinTheta, ThetaDot],
        }
    }

    fn available(self, system: System) -> bool {
        !matches!((system, self), (System::Pendulum, ObsFeature::X | ObsFeature::XDot))
    }
}

/// Build the observation vector for `state`.
pub fn observe<S: Scalar>(system: System, state: &[S], features: &[ObsFeature]) -> Vec<S> {
    let theta = &state[system.angle_index()];
    let theta_dot = &state[system.angle_index() + 1];
    features
        .iter()
        .map(|f| match f {
            ObsFeature::CosTheta => theta.clone().cos(),
            ObsFeature::SinTheta => theta.clone().sin(),
            ObsFeature::ThetaDot => theta_dot.clone(),
            ObsFeature::X => state[0].clone(),
            ObsFeature::XDot => state[1].clone(),
        })
        .collect()
}

/// One node of an expression tree. Children always precede their parent in
/// the node list; the last node is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ExprNode {
    Const {
        #[serde(with = "crate::decimal")]
        value: f64,
    },
    Feature {
        index: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Sub {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    Div {
        a: usize,
        b: usize,
    },
    Neg {
        a: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ControllerBody {
    ExpressionTree { nodes: Vec<ExprNode> },
    DenseNn { layers: Vec<DenseLayer> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub name: String,
    pub system: System,
    pub obs_map: Vec<ObsFeature>,
    #[serde(with = "crate::decimal")]
    pub action_scale: f64,
    #[serde(flatten)]
    pub body: ControllerBody,
}

impl ControllerSpec {
    /// Expression-tree controller from infix text over `x0, x1, ...`.
    pub fn from_formula(name: &str, system: System, text: &str) -> Result<Self> {
        let nodes = formula::parse(text)?;
        let spec = Self {
            name: name.to_string(),
            system,
            obs_map: ObsFeature::default_map(system),
            action_scale: 1.0,
            body: ControllerBody::ExpressionTree { nodes },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The uncontrolled system.
    pub fn zero(system: System) -> Self {
        Self::from_formula("zero", system, "0").expect("constant formula parses")
    }

    /// Infix rendering of an expression tree (fully parenthesized).
    pub fn formula(&self) -> Option<String> {
        match &self.body {
            ControllerBody::ExpressionTree { nodes } => Some(formula::render(nodes)),
            ControllerBody::DenseNn { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.obs_map.iter().find(|f| !f.available(self.system)) {
            return Err(Error::DimMismatch(format!("feature {f:?} not available for {:?}", self.system)));
        }
        if !self.action_scale.is_finite() {
            return Err(Error::InvalidConfig("non-finite action scale".into()));
        }
        match &self.body {
            ControllerBody::ExpressionTree { nodes } => {
                if nodes.is_empty() {
                    return Err(Error::Parse("empty expression tree".into()));
                }
                for (i, node) in nodes.iter().enumerate() {
                    let children: &[usize] = match node {
                        ExprNode::Add { a, b }
                        | ExprNode::Sub { a, b }
                        | ExprNode::Mul { a, b }
                        | ExprNode::Div { a, b } => &[*a, *b],
                        ExprNode::Neg { a } => std::slice::from_ref(a),
                        ExprNode::Feature { index } => {
                            if *index >= self.obs_map.len() {
                                return Err(Error::DimMismatch(format!(
                                    "feature x{index} but observation has {} entries",
                                    self.obs_map.len()
                                )));
                            }
                            &[]
                        }
                        ExprNode::Const { value } => {
                            if !value.is_finite() {
                                return Err(Error::Parse("non-finite constant".into()));
                            }
                            &[]
                        }
                    };
                    if children.iter().any(|&c| c >= i) {
                        return Err(Error::Parse(format!("node {i} refers forward; tree must be acyclic")));
                    }
                }
                Ok(())
            }
            ControllerBody::DenseNn { layers } => nn::validate_layers(layers, self.obs_map.len()),
        }
    }

    /// Raw action at `state`, before any clipping.
    pub fn eval<S: Scalar>(&self, state: &[S]) -> Result<S, GuardError> {
        let obs = observe(self.system, state, &self.obs_map);
        let raw = match &self.body {
            ControllerBody::ExpressionTree { nodes } => eval_tree(nodes, &obs)?,
            ControllerBody::DenseNn { layers } => nn::eval_layers(layers, obs)?,
        };
        Ok(if self.action_scale == 1.0 { raw } else { raw * S::from_f64(self.action_scale) })
    }

    /// Tunable constants: tree literals in node order, or all NN weights and
    /// biases layer by layer.
    pub fn constants(&self) -> Vec<f64> {
        match &self.body {
            ControllerBody::ExpressionTree { nodes } => nodes
                .iter()
                .filter_map(|n| match n {
                    ExprNode::Const { value } => Some(*value),
                    _ => None,
                })
                .collect(),
            ControllerBody::DenseNn { layers } => layers
                .iter()
                .flat_map(|l| l.weights.iter().flatten().chain(&l.bias).copied().collect::<Vec<_>>())
                .collect(),
        }
    }

    /// Copy with the constants replaced, in [`ControllerSpec::constants`] order.
    pub fn with_constants(&self, values: &[f64]) -> Result<Self> {
        let expected = self.constants().len();
        if values.len() != expected {
            return Err(Error::DimMismatch(format!("expected {expected} constants, got {}", values.len())));
        }
        let mut out = self.clone();
        let mut it = values.iter().copied();
        match &mut out.body {
            ControllerBody::ExpressionTree { nodes } => {
                for node in nodes.iter_mut() {
                    if let ExprNode::Const { value } = node {
                        *value = it.next().expect("length checked");
                    }
                }
            }
            ControllerBody::DenseNn { layers } => {
                for layer in layers.iter_mut() {
                    for w in layer.weights.iter_mut().flatten().chain(layer.bias.iter_mut()) {
                        *w = it.next().expect("length checked");
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn eval_tree<S: Scalar>(nodes: &[ExprNode], obs: &[S]) -> Result<S, GuardError> {
    let mut vals: Vec<S> = Vec::with_capacity(nodes.len());
    for node in nodes {
        let v = match *node {
            ExprNode::Const { value } => S::from_f64(value),
            ExprNode::Feature { index } => obs[index].clone(),
            ExprNode::Add { a, b } => vals[a].clone() + vals[b].clone(),
            ExprNode::Sub { a, b } => vals[a].clone() - vals[b].clone(),
            ExprNode::Mul { a, b } => vals[a].clone() * vals[b].clone(),
            ExprNode::Div { a, b } => vals[a].clone().try_div(vals[b].clone())?,
            ExprNode::Neg { a } => -vals[a].clone(),
        };
        vals.push(v);
    }
    Ok(vals.pop().expect("validated trees are nonempty"))
}
