//! Reverse-mode scalar expression tape.
//!
//! Losses are built as small scalar graphs whose leaves are either
//! raw policy parameters or per-token log-probabilities of a recorded
//! forward pass. Values are computed eagerly at node creation; one
//! reverse sweep then yields adjoints for every node. Parameter-leaf
//! adjoints accumulate straight into a gradient buffer, while
//! log-probability adjoints seed backpropagation through time on the
//! registered forward traces (see [`crate::policy`]).
//!
//! `min`/`max` pick the branch by value (first argument on ties), so
//! clipped surrogate objectives differentiate like their active branch.

use crate::policy::{ForwardTrace, GradBuffer, GruPolicy, ParamBlock, PolicyError};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Handle to a registered forward trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassId(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Param(ParamBlock, usize),
    LogProb { pass: usize, t: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Exp(usize),
    Ln(usize),
    Min(usize, usize),
    Max(usize, usize),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    op: Op,
}

/// Expression tape owning the forward traces it differentiates through.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    traces: Vec<ForwardTrace>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: f64, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Leaf reading one parameter; its adjoint lands in the gradient
    /// buffer at the same block and index.
    pub fn param(&mut self, value: f64, block: ParamBlock, index: usize) -> NodeId {
        self.push(value, Op::Param(block, index))
    }

    /// Registers a recorded forward pass for differentiation.
    pub fn register_trace(&mut self, trace: ForwardTrace) -> PassId {
        self.traces.push(trace);
        PassId(self.traces.len() - 1)
    }

    pub fn trace(&self, pass: PassId) -> &ForwardTrace {
        &self.traces[pass.0]
    }

    /// Leaf for the log-probability of output token `t` of a
    /// registered pass.
    pub fn seq_logprob(&mut self, pass: PassId, t: usize) -> NodeId {
        let value = self.traces[pass.0].logprobs[t];
        self.push(value, Op::LogProb { pass: pass.0, t })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value + self.nodes[b.0].value, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value - self.nodes[b.0].value, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value * self.nodes[b.0].value, Op::Mul(a.0, b.0))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value / self.nodes[b.0].value, Op::Div(a.0, b.0))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(-self.nodes[a.0].value, Op::Neg(a.0))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value.exp(), Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value.ln(), Op::Ln(a.0))
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value.min(self.nodes[b.0].value), Op::Min(a.0, b.0))
    }

    pub fn max(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(self.nodes[a.0].value.max(self.nodes[b.0].value), Op::Max(a.0, b.0))
    }

    /// x clamped to `[lo, hi]`.
    pub fn clip(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let lo = self.constant(lo);
        let hi = self.constant(hi);
        let floored = self.max(x, lo);
        self.min(floored, hi)
    }

    pub fn sum(&mut self, terms: &[NodeId]) -> NodeId {
        match terms {
            [] => self.constant(0.0),
            [first, rest @ ..] => {
                let mut acc = *first;
                for t in rest {
                    acc = self.add(acc, *t);
                }
                acc
            }
        }
    }

    pub fn mean(&mut self, terms: &[NodeId]) -> NodeId {
        let n = terms.len().max(1) as f64;
        let total = self.sum(terms);
        let denom = self.constant(n);
        self.div(total, denom)
    }

    /// Accumulates d(root)/d(leaf) for every leaf into `grads`:
    /// parameter leaves directly, log-probability leaves through the
    /// recurrent backward pass of `policy` (which must be the policy
    /// the traces were recorded with).
    pub fn backward(
        &self,
        root: NodeId,
        policy: &GruPolicy,
        grads: &mut GradBuffer,
    ) -> Result<(), PolicyError> {
        let mut adjoint = vec![0.0; self.nodes.len()];
        adjoint[root.0] = 1.0;
        let mut seeds: Vec<Vec<f64>> = self
            .traces
            .iter()
            .map(|tr| vec![0.0; tr.logprobs.len()])
            .collect();

        for idx in (0..=root.0).rev() {
            let g = adjoint[idx];
            if g == 0.0 {
                continue;
            }
            let node = self.nodes[idx];
            match node.op {
                Op::Leaf => {}
                Op::Param(block, index) => {
                    grads.block_mut(block)[index] += g;
                }
                Op::LogProb { pass, t } => {
                    seeds[pass][t] += g;
                }
                Op::Add(a, b) => {
                    adjoint[a] += g;
                    adjoint[b] += g;
                }
                Op::Sub(a, b) => {
                    adjoint[a] += g;
                    adjoint[b] -= g;
                }
                Op::Mul(a, b) => {
                    adjoint[a] += g * self.nodes[b].value;
                    adjoint[b] += g * self.nodes[a].value;
                }
                Op::Div(a, b) => {
                    let bv = self.nodes[b].value;
                    adjoint[a] += g / bv;
                    adjoint[b] -= g * self.nodes[a].value / (bv * bv);
                }
                Op::Neg(a) => adjoint[a] -= g,
                Op::Exp(a) => adjoint[a] += g * node.value,
                Op::Ln(a) => adjoint[a] += g / self.nodes[a].value,
                Op::Min(a, b) => {
                    if self.nodes[a].value <= self.nodes[b].value {
                        adjoint[a] += g;
                    } else {
                        adjoint[b] += g;
                    }
                }
                Op::Max(a, b) => {
                    if self.nodes[a].value >= self.nodes[b].value {
                        adjoint[a] += g;
                    } else {
                        adjoint[b] += g;
                    }
                }
            }
        }

        for (pass, seed) in seeds.iter().enumerate() {
            if seed.iter().any(|&s| s != 0.0) {
                policy.backprop_trace(&self.traces[pass], seed, grads);
            }
        }
        grads.check_finite()?;
        Ok(())
    }
}
