//! Vector-wise interaction operations and their vector-Jacobian products.
//!
//! Every operation combines two length-`k` embeddings. The hot-path methods
//! on [`OpKind`] write into caller-provided buffers and do no length checks;
//! the free functions [`apply`] and [`apply_adjoint`] validate and allocate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Multiply,
    Plus,
    Minus,
    Min,
    Max,
    Concat,
    Inner,
    Conv,
    Outer,
}

impl OpKind {
    pub const ALL: [OpKind; 9] = [
        OpKind::Multiply,
        OpKind::Plus,
        OpKind::Minus,
        OpKind::Min,
        OpKind::Max,
        OpKind::Concat,
        OpKind::Inner,
        OpKind::Conv,
        OpKind::Outer,
    ];

    /// Candidates searched over unless configured otherwise.
    pub const DEFAULT_SEARCH: [OpKind; 6] = [
        OpKind::Multiply,
        OpKind::Plus,
        OpKind::Min,
        OpKind::Max,
        OpKind::Concat,
        OpKind::Inner,
    ];

    /// Base operations allowed inside third-order composites.
    pub const COMPOSABLE: [OpKind; 4] = [OpKind::Multiply, OpKind::Plus, OpKind::Min, OpKind::Max];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Multiply => "multiply",
            OpKind::Plus => "plus",
            OpKind::Minus => "minus",
            OpKind::Min => "min",
            OpKind::Max => "max",
            OpKind::Concat => "concat",
            OpKind::Inner => "inner",
            OpKind::Conv => "conv",
            OpKind::Outer => "outer",
        }
    }

    pub fn output_dim(self, k: usize) -> usize {
        match self {
            OpKind::Multiply
            | OpKind::Plus
            | OpKind::Minus
            | OpKind::Min
            | OpKind::Max
            | OpKind::Conv => k,
            OpKind::Concat => 2 * k,
            OpKind::Inner => 1,
            OpKind::Outer => k * k,
        }
    }

    pub fn is_composable(self) -> bool {
        Self::COMPOSABLE.contains(&self)
    }

    /// Forward map. `out.len()` must equal `output_dim(a.len())`.
    pub fn forward(self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let k = a.len();
        debug_assert_eq!(b.len(), k);
        debug_assert_eq!(out.len(), self.output_dim(k));
        match self {
            OpKind::Multiply => zip_into(a, b, out, |x, y| x * y),
            OpKind::Plus => zip_into(a, b, out, |x, y| x + y),
            OpKind::Minus => zip_into(a, b, out, |x, y| x - y),
            OpKind::Min => zip_into(a, b, out, f64::min),
            OpKind::Max => zip_into(a, b, out, f64::max),
            OpKind::Concat => {
                out[..k].copy_from_slice(a);
                out[k..].copy_from_slice(b);
            }
            OpKind::Inner => out[0] = a.iter().zip(b).map(|(x, y)| x * y).sum(),
            OpKind::Conv => {
                for (t, o) in out.iter_mut().enumerate() {
                    *o = (0..k).map(|s| a[s] * b[(t + k - s) % k]).sum();
                }
            }
            OpKind::Outer => {
                for (r, x) in a.iter().enumerate() {
                    for (c, y) in b.iter().enumerate() {
                        out[r * k + c] = x * y;
                    }
                }
            }
        }
    }

    /// Adds the vector-Jacobian product of `upstream` into `grad_a` and `grad_b`.
    ///
    /// Min/max route the gradient to the winning argument; ties go to `a`.
    pub fn backward(self, a: &[f64], b: &[f64], upstream: &[f64], grad_a: &mut [f64], grad_b: &mut [f64]) {
        let k = a.len();
        debug_assert_eq!(upstream.len(), self.output_dim(k));
        match self {
            OpKind::Multiply => {
                for l in 0..k {
                    grad_a[l] += upstream[l] * b[l];
                    grad_b[l] += upstream[l] * a[l];
                }
            }
            OpKind::Plus => {
                for l in 0..k {
                    grad_a[l] += upstream[l];
                    grad_b[l] += upstream[l];
                }
            }
            OpKind::Minus => {
                for l in 0..k {
                    grad_a[l] += upstream[l];
                    grad_b[l] -= upstream[l];
                }
            }
            OpKind::Min => {
                for l in 0..k {
                    if a[l] <= b[l] {
                        grad_a[l] += upstream[l];
                    } else {
                        grad_b[l] += upstream[l];
                    }
                }
            }
            OpKind::Max => {
                for l in 0..k {
                    if a[l] >= b[l] {
                        grad_a[l] += upstream[l];
                    } else {
                        grad_b[l] += upstream[l];
                    }
                }
            }
            OpKind::Concat => {
                for l in 0..k {
                    grad_a[l] += upstream[l];
                    grad_b[l] += upstream[k + l];
                }
            }
            OpKind::Inner => {
                let g = upstream[0];
                for l in 0..k {
                    grad_a[l] += g * b[l];
                    grad_b[l] += g * a[l];
                }
            }
            OpKind::Conv => {
                // out_t = sum_s a_s b_{t-s}
                for t in 0..k {
                    let g = upstream[t];
                    for s in 0..k {
                        let r = (t + k - s) % k;
                        grad_a[s] += g * b[r];
                        grad_b[r] += g * a[s];
                    }
                }
            }
            OpKind::Outer => {
                for r in 0..k {
                    for c in 0..k {
                        let g = upstream[r * k + c];
                        grad_a[r] += g * b[c];
                        grad_b[c] += g * a[r];
                    }
                }
            }
        }
    }
}

#[inline]
fn zip_into(a: &[f64], b: &[f64], out: &mut [f64], f: impl Fn(f64, f64) -> f64) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = f(*x, *y);
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::UnknownOp(s.to_owned()))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

pub fn apply(op: OpKind, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.len(), b.len())?;
    let mut out = vec![0.0; op.output_dim(a.len())];
    op.forward(a, b, &mut out);
    Ok(out)
}

pub fn apply_adjoint(op: OpKind, a: &[f64], b: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(a.len(), b.len())?;
    check_len(op.output_dim(a.len()), upstream.len())?;
    let mut ga = vec![0.0; a.len()];
    let mut gb = vec![0.0; b.len()];
    op.backward(a, b, upstream, &mut ga, &mut gb);
    Ok((ga, gb))
}

/// Third-order composite `outer(inner(u, v), s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorOp {
    pub inner: OpKind,
    pub outer: OpKind,
}

impl TensorOp {
    pub fn new(inner: OpKind, outer: OpKind) -> Result<Self> {
        for op in [inner, outer] {
            if !op.is_composable() {
                return Err(Error::NotComposable(op.name().to_owned()));
            }
        }
        Ok(TensorOp { inner, outer })
    }

    pub fn forward(&self, u: &[f64], v: &[f64], s: &[f64], out: &mut [f64]) {
        let mut mid = vec![0.0; u.len()];
        self.inner.forward(u, v, &mut mid);
        self.outer.forward(&mid, s, out);
    }

    pub fn backward(
        &self,
        u: &[f64],
        v: &[f64],
        s: &[f64],
        upstream: &[f64],
        grads: [&mut [f64]; 3],
    ) {
        let k = u.len();
        let mut mid = vec![0.0; k];
        self.inner.forward(u, v, &mut mid);
        let mut grad_mid = vec![0.0; k];
        let [gu, gv, gs] = grads;
        self.outer.backward(&mid, s, upstream, &mut grad_mid, gs);
        self.inner.backward(u, v, &grad_mid, gu, gv);
    }
}

impl fmt::Display for TensorOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.inner, self.outer)
    }
}

impl FromStr for TensorOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (inner, outer) = s.split_once('_').ok_or_else(|| Error::UnknownOp(s.to_owned()))?;
        TensorOp::new(inner.parse()?, outer.parse()?)
    }
}

/// All K² ordered `(inner, outer)` pairs over `base`, inner-major.
pub fn enumerate_tensor_ops(base: &[OpKind]) -> Result<Vec<TensorOp>> {
    let mut out = Vec::with_capacity(base.len() * base.len());
    for &inner in base {
        for &outer in base {
            out.push(TensorOp::new(inner, outer)?);
        }
    }
    Ok(out)
}

pub fn apply_tensor(op: TensorOp, u: &[f64], v: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    check_len(u.len(), v.len())?;
    check_len(u.len(), s.len())?;
    let mut out = vec![0.0; u.len()];
    op.forward(u, v, s, &mut out);
    Ok(out)
}

pub fn apply_tensor_adjoint(
    op: TensorOp,
    u: &[f64],
    v: &[f64],
    s: &[f64],
    upstream: &[f64],
) -> Result<[Vec<f64>; 3]> {
    check_len(u.len(), v.len())?;
    check_len(u.len(), s.len())?;
    check_len(u.len(), upstream.len())?;
    let k = u.len();
    let (mut gu, mut gv, mut gs) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    op.backward(u, v, s, upstream, [&mut gu, &mut gv, &mut gs]);
    Ok([gu, gv, gs])
}

/// A candidate interaction function: a pairwise op for matrices or a
/// composite for third-order tensors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Interaction {
    Pair(OpKind),
    Triple(TensorOp),
}

impl Interaction {
    /// Number of embeddings consumed.
    pub fn arity(&self) -> usize {
        match self {
            Interaction::Pair(_) => 2,
            Interaction::Triple(_) => 3,
        }
    }

    pub fn output_dim(&self, k: usize) -> usize {
        match self {
            Interaction::Pair(op) => op.output_dim(k),
            Interaction::Triple(_) => k,
        }
    }

    pub fn forward(&self, inputs: &[&[f64]], out: &mut [f64]) {
        match self {
            Interaction::Pair(op) => op.forward(inputs[0], inputs[1], out),
            Interaction::Triple(t) => t.forward(inputs[0], inputs[1], inputs[2], out),
        }
    }

    /// Accumulates input gradients into `grads[m]` for each input `m`.
    pub fn backward(&self, inputs: &[&[f64]], upstream: &[f64], grads: &mut [Vec<f64>]) {
        match self {
            Interaction::Pair(op) => {
                let (ga, rest) = grads.split_at_mut(1);
                op.backward(inputs[0], inputs[1], upstream, &mut ga[0], &mut rest[0]);
            }
            Interaction::Triple(t) => {
                let (ga, rest) = grads.split_at_mut(1);
                let (gb, gc) = rest.split_at_mut(1);
                t.backward(
                    inputs[0],
                    inputs[1],
                    inputs[2],
                    upstream,
                    [&mut ga[0], &mut gb[0], &mut gc[0]],
                );
            }
        }
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interaction::Pair(op) => op.fmt(f),
            Interaction::Triple(t) => t.fmt(f),
        }
    }
}

impl FromStr for Interaction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.contains('_') {
            s.parse().map(Interaction::Triple)
        } else {
            s.parse().map(Interaction::Pair)
        }
    }
}

impl TryFrom<String> for Interaction {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Interaction> for String {
    fn from(i: Interaction) -> Self {
        i.to_string()
    }
}

impl From<OpKind> for Interaction {
    fn from(op: OpKind) -> Self {
        Interaction::Pair(op)
    }
}

impl From<TensorOp> for Interaction {
    fn from(op: TensorOp) -> Self {
        Interaction::Triple(op)
    }
}
