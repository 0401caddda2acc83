//! Memory of a discrete Caputo operator applied to a vector of lanes
//! (one lane per grid node, or a single lane for scalar signals).
//!
//! A step is evaluated in two phases. [`CaputoHistory::prepare`] returns the
//! coefficient of the newest increment for a trial step length together with
//! the history contribution of all completed cells, without touching the
//! state. [`CaputoHistory::commit`] appends an accepted increment.

use crate::error::{Error, Result};
use crate::kernels::{row_from_nodes, SchemeKind};
use crate::scalar::Scalar;

pub trait CaputoHistory<S: Scalar> {
    /// Index of the last committed node.
    fn committed(&self) -> usize;

    /// Number of lanes.
    fn lanes(&self) -> usize;

    fn scheme(&self) -> SchemeKind;

    /// Time of the last committed node.
    fn last_node(&self) -> S;

    /// Leading coefficient for a step of length `tau` past the last node;
    /// the history contribution is written to `out`.
    fn prepare(&self, tau: S, out: &mut [S]) -> Result<S>;

    /// Appends the increment `diff = g^{n+1} - g^n` of an accepted step of length `tau`.
    fn commit(&mut self, tau: S, diff: &[S]) -> Result<()>;

    /// Lane-mode updates performed by the last commit.
    fn last_commit_ops(&self) -> u64;
}

pub(crate) fn check_lanes(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_tau<S: Scalar>(tau: S) -> Result<()> {
    if !(tau > S::zero()) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step length {tau} must be positive"
        )));
    }
    Ok(())
}

/// Full-memory history: every increment is stored and the kernel row is
/// rebuilt from the nodes at each step.
#[derive(Debug, Clone)]
pub struct DirectHistory<S> {
    scheme: SchemeKind,
    beta: S,
    lanes: usize,
    nodes: Vec<S>,
    diffs: Vec<S>,
    ops: u64,
}

impl<S: Scalar> DirectHistory<S> {
    pub fn new(scheme: SchemeKind, beta: S, lanes: usize) -> Self {
        Self {
            scheme,
            beta,
            lanes,
            nodes: vec![S::zero()],
            diffs: Vec::new(),
            ops: 0,
        }
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    /// Increment of cell `k` (1-based).
    pub fn increment(&self, k: usize) -> &[S] {
        &self.diffs[(k - 1) * self.lanes..k * self.lanes]
    }
}

impl<S: Scalar> CaputoHistory<S> for DirectHistory<S> {
    fn committed(&self) -> usize {
        self.nodes.len() - 1
    }

    fn lanes(&self) -> usize {
        self.lanes
    }

    fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    fn last_node(&self) -> S {
        *self.nodes.last().unwrap()
    }

    fn prepare(&self, tau: S, out: &mut [S]) -> Result<S> {
        check_tau(tau)?;
        check_lanes(self.lanes, out.len())?;
        let mut nodes = self.nodes.clone();
        nodes.push(self.last_node() + tau);
        let row = row_from_nodes(self.scheme, &nodes, self.beta);
        out.iter_mut().for_each(|o| *o = S::zero());
        let n = row.n;
        for k in 1..n {
            let c = row.cell(k);
            for (o, d) in out.iter_mut().zip(self.increment(k)) {
                *o += c * *d;
            }
        }
        Ok(row.leading())
    }

    fn commit(&mut self, tau: S, diff: &[S]) -> Result<()> {
        check_tau(tau)?;
        check_lanes(self.lanes, diff.len())?;
        let t = self.last_node() + tau;
        self.nodes.push(t);
        self.diffs.extend_from_slice(diff);
        self.ops = (self.committed() * self.lanes) as u64;
        Ok(())
    }

    fn last_commit_ops(&self) -> u64 {
        self.ops
    }
}
