use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to `log` and `inverse` within this distance of their pole are
/// rejected instead of producing an infinity.
pub const SINGULARITY_EPSILON: f64 = 1e-12;

/// The ten basic computation units a graph is composed of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Add,
    Multiply,
    Squared,
    Linear,
    Tanh,
    Gaussian1,
    Gaussian2,
    Exp,
    Log,
    Inverse,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 10] = [
        InteractionKind::Add,
        InteractionKind::Multiply,
        InteractionKind::Squared,
        InteractionKind::Linear,
        InteractionKind::Tanh,
        InteractionKind::Gaussian1,
        InteractionKind::Gaussian2,
        InteractionKind::Exp,
        InteractionKind::Log,
        InteractionKind::Inverse,
    ];

    pub fn arity(self) -> usize {
        match self {
            InteractionKind::Add | InteractionKind::Multiply | InteractionKind::Gaussian2 => 2,
            _ => 1,
        }
    }

    /// Number of trainable reals the interaction itself carries.
    pub fn param_count(self) -> usize {
        match self {
            InteractionKind::Linear => 2,
            _ => 0,
        }
    }

    /// Whether swapping the two arguments leaves the function unchanged.
    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            InteractionKind::Add | InteractionKind::Multiply | InteractionKind::Gaussian2
        )
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            InteractionKind::Add => "add",
            InteractionKind::Multiply => "multiply",
            InteractionKind::Squared => "squared",
            InteractionKind::Linear => "linear",
            InteractionKind::Tanh => "tanh",
            InteractionKind::Gaussian1 => "gaussian1",
            InteractionKind::Gaussian2 => "gaussian2",
            InteractionKind::Exp => "exp",
            InteractionKind::Log => "log",
            InteractionKind::Inverse => "inverse",
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InteractionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown interaction kind `{s}`")))
    }
}

/// Applies the function of `kind` to `inputs`.
///
/// `params` is `[w, b]` for `linear` and empty for every other kind.
pub fn eval_interaction(kind: InteractionKind, inputs: &[f64], params: &[f64]) -> Result<f64> {
    if inputs.len() != kind.arity() {
        return Err(Error::InvalidInput(format!(
            "{kind} takes {} inputs, got {}",
            kind.arity(),
            inputs.len()
        )));
    }
    if params.len() != kind.param_count() {
        return Err(Error::InvalidInput(format!(
            "{kind} takes {} parameters, got {}",
            kind.param_count(),
            params.len()
        )));
    }
    apply(kind, inputs, params).ok_or(Error::Singular { node: 0, kind })
}

/// Table function without arity checks. `None` signals a guarded singularity.
pub(crate) fn apply(kind: InteractionKind, x: &[f64], p: &[f64]) -> Option<f64> {
    let a = x[0];
    let v = match kind {
        InteractionKind::Add => a + x[1],
        InteractionKind::Multiply => a * x[1],
        InteractionKind::Squared => a * a,
        InteractionKind::Linear => a * p[0] + p[1],
        InteractionKind::Tanh => a.tanh(),
        InteractionKind::Gaussian1 => (-(a * a)).exp(),
        InteractionKind::Gaussian2 => (-(a * a + x[1] * x[1])).exp(),
        InteractionKind::Exp => a.exp(),
        InteractionKind::Log => {
            if a <= SINGULARITY_EPSILON {
                return None;
            }
            a.ln()
        }
        InteractionKind::Inverse => {
            if a.abs() <= SINGULARITY_EPSILON {
                return None;
            }
            1.0 / a
        }
    };
    Some(v)
}

/// Local partial derivatives of an interaction at a point, given its value.
///
/// Returns `(d/d inputs, d/d params)`; unused slots are zero.
pub(crate) fn partials(kind: InteractionKind, x: &[f64], p: &[f64], value: f64) -> ([f64; 2], [f64; 2]) {
    let a = x[0];
    match kind {
        InteractionKind::Add => ([1.0, 1.0], [0.0; 2]),
        InteractionKind::Multiply => ([x[1], a], [0.0; 2]),
        InteractionKind::Squared => ([2.0 * a, 0.0], [0.0; 2]),
        InteractionKind::Linear => ([p[0], 0.0], [a, 1.0]),
        InteractionKind::Tanh => ([1.0 - value * value, 0.0], [0.0; 2]),
        InteractionKind::Gaussian1 => ([-2.0 * a * value, 0.0], [0.0; 2]),
        InteractionKind::Gaussian2 => ([-2.0 * a * value, -2.0 * x[1] * value], [0.0; 2]),
        InteractionKind::Exp => ([value, 0.0], [0.0; 2]),
        InteractionKind::Log => ([1.0 / a, 0.0], [0.0; 2]),
        InteractionKind::Inverse => ([-1.0 / (a * a), 0.0], [0.0; 2]),
    }
}
