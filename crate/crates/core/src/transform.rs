//! Element-wise transform: a one-input, one-output MLP with a single hidden
//! layer, applied independently to every embedding coordinate.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::project_unit_ball;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
    Tanh,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Sigmoid, Activation::Tanh];

    /// Value and derivative at `z`. ReLU takes derivative 0 at 0.
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(z);
                (s, s * (1.0 - s))
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Weights of `g(x) = b2 + sum_h w2[h] * act(w1[h] * x + b1[h])`.
///
/// Stored flat as `[w1; b1; w2; b2]` so the whole vector can be projected onto
/// the unit ball in one step. Biases count towards the norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "NamedWeights", try_from = "NamedWeights")]
pub struct TransformWeights {
    hidden: usize,
    activation: Activation,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NamedWeights {
    activation: Activation,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl From<TransformWeights> for NamedWeights {
    fn from(t: TransformWeights) -> Self {
        NamedWeights {
            activation: t.activation,
            w1: t.w1().to_vec(),
            b1: t.b1().to_vec(),
            w2: t.w2().to_vec(),
            b2: t.b2(),
        }
    }
}

impl TryFrom<NamedWeights> for TransformWeights {
    type Error = Error;

    fn try_from(n: NamedWeights) -> Result<Self> {
        TransformWeights::from_parts(n.activation, &n.w1, &n.b1, &n.w2, n.b2)
    }
}

impl TransformWeights {
    pub fn zeros(hidden: usize, activation: Activation) -> Self {
        TransformWeights {
            hidden,
            activation,
            params: vec![0.0; 3 * hidden + 1],
        }
    }

    pub fn from_parts(activation: Activation, w1: &[f64], b1: &[f64], w2: &[f64], b2: f64) -> Result<Self> {
        let hidden = w1.len();
        if b1.len() != hidden || w2.len() != hidden {
            return Err(Error::LengthMismatch {
                expected: hidden,
                got: if b1.len() != hidden { b1.len() } else { w2.len() },
            });
        }
        let mut params = Vec::with_capacity(3 * hidden + 1);
        params.extend_from_slice(w1);
        params.extend_from_slice(b1);
        params.extend_from_slice(w2);
        params.push(b2);
        Ok(TransformWeights {
            hidden,
            activation,
            params,
        })
    }

    pub fn from_flat(hidden: usize, activation: Activation, params: Vec<f64>) -> Result<Self> {
        if params.len() != 3 * hidden + 1 {
            return Err(Error::LengthMismatch {
                expected: 3 * hidden + 1,
                got: params.len(),
            });
        }
        Ok(TransformWeights {
            hidden,
            activation,
            params,
        })
    }

    /// Uniform in [-0.5, 0.5], then projected onto the unit ball.
    pub fn random<R: Rng + ?Sized>(hidden: usize, activation: Activation, rng: &mut R) -> Self {
        let params = (0..3 * hidden + 1).map(|_| rng.random_range(-0.5..=0.5)).collect();
        TransformWeights {
            hidden,
            activation,
            params: project_unit_ball(params),
        }
    }

    /// Uniform in `[-bound, bound]`, unprojected.
    pub fn uniform<R: Rng + ?Sized>(hidden: usize, activation: Activation, bound: f64, rng: &mut R) -> Self {
        let params = (0..3 * hidden + 1).map(|_| rng.random_range(-bound..=bound)).collect();
        TransformWeights {
            hidden,
            activation,
            params,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.hidden]
    }

    pub fn b1(&self) -> &[f64] {
        &self.params[self.hidden..2 * self.hidden]
    }

    pub fn w2(&self) -> &[f64] {
        &self.params[2 * self.hidden..3 * self.hidden]
    }

    pub fn b2(&self) -> f64 {
        self.params[3 * self.hidden]
    }

    pub fn norm(&self) -> f64 {
        self.params.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn project(&mut self) {
        let p = std::mem::take(&mut self.params);
        self.params = project_unit_ball(p);
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let h = self.hidden;
        let p = &self.params;
        let mut y = p[3 * h];
        for i in 0..h {
            y += p[2 * h + i] * self.activation.eval(p[i] * x + p[h + i]).0;
        }
        y
    }

    /// `(g(x), dg/dx)`.
    #[inline]
    pub fn apply_with_slope(&self, x: f64) -> (f64, f64) {
        let h = self.hidden;
        let p = &self.params;
        let mut y = p[3 * h];
        let mut dy = 0.0;
        for i in 0..h {
            let (a, da) = self.activation.eval(p[i] * x + p[h + i]);
            y += p[2 * h + i] * a;
            dy += p[2 * h + i] * da * p[i];
        }
        (y, dy)
    }

    /// Adds `upstream * dg/dparams` at input `x` into `grad` (flat layout).
    #[inline]
    pub fn accumulate_param_grad(&self, x: f64, upstream: f64, grad: &mut [f64]) {
        let h = self.hidden;
        let p = &self.params;
        for i in 0..h {
            let (a, da) = self.activation.eval(p[i] * x + p[h + i]);
            let back = upstream * p[2 * h + i] * da;
            grad[i] += back * x;
            grad[h + i] += back;
            grad[2 * h + i] += upstream * a;
        }
        grad[3 * h] += upstream;
    }
}

pub fn transform(x: f64, w: &TransformWeights) -> f64 {
    w.apply(x)
}

/// `(dg/dx, dg/dw)` with `dg/dw` in the same shape as `w`.
pub fn transform_grad(x: f64, w: &TransformWeights) -> (f64, TransformWeights) {
    let (_, slope) = w.apply_with_slope(x);
    let mut grad = TransformWeights::zeros(w.hidden, w.activation);
    w.accumulate_param_grad(x, 1.0, &mut grad.params);
    (slope, grad)
}

pub fn transform_vector(v: &[f64], w: &TransformWeights) -> Vec<f64> {
    v.iter().map(|&x| w.apply(x)).collect()
}
