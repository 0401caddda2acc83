//! Sum-of-exponentials approximation of `omega_{1-beta}(t) = t^(-beta) / Gamma(1-beta)`
//! and the fast history built on it.
//!
//! The approximation discretises
//! `omega_{1-beta}(t) = sin(pi beta)/pi * int_0^inf exp(-t s) s^(beta-1) ds`
//! with a Gauss–Jacobi rule on `[0, 1/T]` and Gauss–Legendre rules on dyadic
//! panels above it, drops the modes that never matter on `[dt, T]`, and
//! checks the result on a logarithmic sweep.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::history::{check_lanes, check_tau, CaputoHistory};
use crate::kernels::{cell_mean, first_moment, SchemeKind};
use crate::quadrature::{gauss_jacobi, gauss_legendre};
use crate::scalar::Scalar;

/// Number of log-spaced points in the certification sweep.
pub const SWEEP_POINTS: usize = 1200;

const PANEL_RULES: [usize; 8] = [6, 8, 10, 12, 16, 20, 24, 32];

/// `omega_{1-beta}(t) ~ sum_i weights[i] * exp(-exponents[i] * t)` on `[cutoff, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoeApproximation<S> {
    pub beta: S,
    pub cutoff: S,
    pub horizon: S,
    pub tol: S,
    pub exponents: Vec<S>,
    pub weights: Vec<S>,
    /// Largest relative error seen by the certification sweep.
    pub certified_error: f64,
}

impl<S: Scalar> SoeApproximation<S> {
    pub fn modes(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval(&self, t: S) -> S {
        self.exponents
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * (-s * t).exp())
            .sum()
    }

    /// Relative error against `omega_{1-beta}` at `n` log-spaced points of `[cutoff, horizon]`.
    pub fn sweep(&self, n: usize) -> f64 {
        let beta = self.beta.as_f64();
        let s: Vec<f64> = self.exponents.iter().map(|x| x.as_f64()).collect();
        let w: Vec<f64> = self.weights.iter().map(|x| x.as_f64()).collect();
        sweep_f64(beta, self.cutoff.as_f64(), self.horizon.as_f64(), &s, &w, n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,exponent,weight\n");
        for (i, (s, w)) in self.exponents.iter().zip(&self.weights).enumerate() {
            out.push_str(&format!("{i},{s:.17e},{w:.17e}\n"));
        }
        out
    }
}

fn log_points(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            (a + (b - a) * i as f64 / (n - 1) as f64).exp()
        }
    })
}

fn sweep_f64(beta: f64, dt: f64, horizon: f64, s: &[f64], w: &[f64], n: usize) -> f64 {
    let g = libm::tgamma(1.0 - beta);
    log_points(dt, horizon, n)
        .map(|t| {
            let exact = t.powf(-beta) / g;
            let approx: f64 = s.iter().zip(w).map(|(s, w)| w * (-s * t).exp()).sum();
            ((approx - exact) / exact).abs()
        })
        .fold(0.0, f64::max)
}

/// Raw quadrature of the integral representation, before pruning.
fn raw_modes(beta: f64, dt: f64, horizon: f64, eps: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let scale = (std::f64::consts::PI * beta).sin() / std::f64::consts::PI;
    let mut s = Vec::new();
    let mut w = Vec::new();

    let s_lo = 1.0 / horizon;
    let jac = gauss_jacobi(nodes, 0.0, beta - 1.0);
    let half = 0.5 * s_lo;
    for (x, wj) in jac.nodes.iter().zip(&jac.weights) {
        s.push(half * (1.0 + x));
        w.push(scale * half.powf(beta) * wj);
    }

    // Truncate where the upper incomplete Gamma tail drops below eps/10 at t = dt.
    let gb = libm::tgamma(beta);
    let mut x: f64 = 1.0;
    while (-x).exp() * f64::powf(x, beta - 1.0) / gb > 0.1 * eps {
        x += 0.5;
    }
    let s_hi = x / dt;

    let leg = gauss_legendre(nodes);
    let mut a = s_lo;
    while a < s_hi {
        let half = 0.5 * a;
        for (x, wl) in leg.nodes.iter().zip(&leg.weights) {
            let node = a + half * (1.0 + x);
            s.push(node);
            w.push(scale * half * wl * node.powf(beta - 1.0));
        }
        a *= 2.0;
    }
    (s, w)
}

/// Drops the modes whose summed peak relative contribution on `[dt, T]` stays below `eps/10`.
fn prune(
    beta: f64,
    dt: f64,
    horizon: f64,
    eps: f64,
    s: Vec<f64>,
    w: Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let g = libm::tgamma(1.0 - beta);
    // w e^{-st} / omega(t) = w g t^beta e^{-st}, maximal at t = beta/s.
    let peak = |s: f64, w: f64| {
        let t = (beta / s).clamp(dt, horizon);
        w * g * t.powf(beta) * (-s * t).exp()
    };
    let mut order: Vec<(f64, usize)> = s
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(i, (&s, &w))| (peak(s, w), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut dropped = vec![false; s.len()];
    let mut budget = 0.0;
    for (p, i) in order {
        if budget + p > 0.1 * eps {
            break;
        }
        budget += p;
        dropped[i] = true;
    }
    let mut keep: Vec<(f64, f64)> = s
        .into_iter()
        .zip(w)
        .zip(dropped)
        .filter(|(_, d)| !d)
        .map(|(sw, _)| sw)
        .collect();
    keep.sort_by(|a, b| a.0.total_cmp(&b.0));
    keep.into_iter().unzip()
}

/// Builds and certifies a sum-of-exponentials approximation of `omega_{1-beta}` on `[dt, horizon]`
/// with relative tolerance `eps`.
pub fn build_soe<S: Scalar>(beta: S, dt: S, horizon: S, eps: S) -> Result<SoeApproximation<S>> {
    let (b, d, h, e) = (beta.as_f64(), dt.as_f64(), horizon.as_f64(), eps.as_f64());
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta = {b} must lie in (0, 1)"
        )));
    }
    if !(d > 0.0) || !(h > d) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need 0 < dt < T, got dt = {d}, T = {h}"
        )));
    }
    if !(e > 0.0 && e <= 1e-2) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {e} must lie in (0, 1e-2]"
        )));
    }
    let mut best = f64::INFINITY;
    for &nodes in &PANEL_RULES {
        let (s, w) = raw_modes(b, d, h, e, nodes);
        let (s, w) = prune(b, d, h, e, s, w);
        let approx = SoeApproximation {
            beta,
            cutoff: dt,
            horizon,
            tol: eps,
            exponents: s.iter().map(|&x| S::of(x)).collect(),
            weights: w.iter().map(|&x| S::of(x)).collect(),
            certified_error: 0.0,
        };
        let err = approx.sweep(SWEEP_POINTS);
        if err <= e {
            return Ok(SoeApproximation {
                certified_error: err,
                ..approx
            });
        }
        best = best.min(err);
    }
    Err(Error::SoeCertification {
        max_error: best,
        tol: e,
    })
}

/// `(1 - e^{-z}) / z`.
fn phi0(z: f64) -> f64 {
    if z < 1e-8 {
        1.0 - 0.5 * z
    } else {
        -(-z).exp_m1() / z
    }
}

/// `int_0^1 e^{-z u} (1/2 - u) du`.
fn phi1(z: f64) -> f64 {
    if z < 1.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..40 {
            term *= -z / k as f64;
            let kk = k as f64;
            let c = -kk / (2.0 * (kk + 1.0) * (kk + 2.0));
            sum += term * c;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        let e = (-z).exp();
        0.5 * (1.0 - e) / z - (1.0 - e * (1.0 + z)) / (z * z)
    }
}

/// Compressed memory of a discrete Caputo operator.
///
/// For L1 every completed cell is compressed. For Alikhanov the cell just
/// before the newest one is kept exactly and its quadratic-interpolant
/// contribution is folded into the accumulators one step later, so only
/// kernel arguments of at least one step length are ever approximated.
#[derive(Debug, Clone)]
pub struct FastHistory<S> {
    scheme: SchemeKind,
    beta: S,
    theta: S,
    lanes: usize,
    soe: SoeApproximation<S>,
    committed: usize,
    last_node: S,
    last_tau: S,
    last_diff: Vec<S>,
    acc: Vec<S>,
    ops: Cell<u64>,
    commit_ops: u64,
}

impl<S: Scalar> FastHistory<S> {
    pub fn new(
        scheme: SchemeKind,
        beta: S,
        lanes: usize,
        soe: SoeApproximation<S>,
    ) -> Result<Self> {
        if (soe.beta - beta).abs() > S::epsilon() * S::of(16.0) {
            return Err(Error::InvalidArgument(format!(
                "approximation built for beta = {}, history uses {beta}",
                soe.beta
            )));
        }
        let modes = soe.modes();
        Ok(Self {
            scheme,
            beta,
            theta: scheme.theta(beta),
            lanes,
            soe,
            committed: 0,
            last_node: S::zero(),
            last_tau: S::zero(),
            last_diff: vec![S::zero(); lanes],
            acc: vec![S::zero(); modes * lanes],
            ops: Cell::new(0),
            commit_ops: 0,
        })
    }

    pub fn soe(&self) -> &SoeApproximation<S> {
        &self.soe
    }

    /// Lane-mode operations performed by all `prepare` calls so far.
    pub fn prepare_ops(&self) -> u64 {
        self.ops.get()
    }

    fn check_argument(&self, shortest: S) -> Result<()> {
        // Allow rounding slack on the certified interval.
        if shortest < self.soe.cutoff * (S::one() - S::of(1e-9)) {
            return Err(Error::InvalidArgument(format!(
                "history argument {shortest} below the approximation cutoff {}",
                self.soe.cutoff
            )));
        }
        Ok(())
    }

    fn compressed(&self, shift: S, out: &mut [S]) {
        let lanes = self.lanes;
        for (i, (&s, &w)) in self.soe.exponents.iter().zip(&self.soe.weights).enumerate() {
            let c = w * (-s * shift).exp();
            let acc = &self.acc[i * lanes..(i + 1) * lanes];
            for (o, a) in out.iter_mut().zip(acc) {
                *o += c * *a;
            }
        }
        self.ops
            .set(self.ops.get() + (self.soe.modes() * lanes) as u64);
    }
}

impl<S: Scalar> CaputoHistory<S> for FastHistory<S> {
    fn committed(&self) -> usize {
        self.committed
    }

    fn lanes(&self) -> usize {
        self.lanes
    }

    fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    fn last_node(&self) -> S {
        self.last_node
    }

    fn prepare(&self, tau: S, out: &mut [S]) -> Result<S> {
        check_tau(tau)?;
        check_lanes(self.lanes, out.len())?;
        out.iter_mut().for_each(|o| *o = S::zero());
        let one = S::one();
        let two = S::of(2.0);
        let g2 = (two - self.beta).tgamma();
        match self.scheme {
            SchemeKind::L1 => {
                if self.committed > 0 {
                    self.check_argument(tau)?;
                    self.compressed(tau, out);
                }
                Ok(tau.powf(-self.beta) / g2)
            }
            SchemeKind::Alikhanov => {
                let off = (one - self.theta) * tau;
                let a0 = off.powf(one - self.beta) / (tau * g2);
                if self.committed == 0 {
                    return Ok(a0);
                }
                let prev = self.last_tau;
                let half = prev / two;
                let a1 = cell_mean(off, prev, self.beta);
                let b1 = two / (prev * (prev + tau)) * first_moment(off + half, half, self.beta)
                    / (one - self.beta).tgamma();
                let near = a1 - b1;
                for (o, d) in out.iter_mut().zip(&self.last_diff) {
                    *o = near * *d;
                }
                if self.committed > 1 {
                    self.check_argument(off + prev)?;
                    self.compressed(off, out);
                }
                Ok(a0 + prev / tau * b1)
            }
        }
    }

    fn commit(&mut self, tau: S, diff: &[S]) -> Result<()> {
        check_tau(tau)?;
        check_lanes(self.lanes, diff.len())?;
        let lanes = self.lanes;
        let modes = self.soe.modes();
        match self.scheme {
            SchemeKind::L1 => {
                for i in 0..modes {
                    let s = self.soe.exponents[i].as_f64();
                    let z = s * tau.as_f64();
                    let decay = S::of((-z).exp());
                    let gain = S::of(phi0(z));
                    for (a, d) in self.acc[i * lanes..(i + 1) * lanes].iter_mut().zip(diff) {
                        *a = decay * *a + gain * *d;
                    }
                }
                self.commit_ops = (modes * lanes) as u64;
            }
            SchemeKind::Alikhanov => {
                if self.committed > 0 {
                    // Fold the previous cell, whose quadratic interpolant needs this increment.
                    let prev = self.last_tau;
                    let slope = S::of(2.0) / (prev + tau);
                    for i in 0..modes {
                        let s = self.soe.exponents[i].as_f64();
                        let z = s * prev.as_f64();
                        let decay = S::of((-(s * tau.as_f64())).exp());
                        let e0 = S::of(phi0(z));
                        let e1 = S::of(phi1(z)) * prev;
                        let slab = &mut self.acc[i * lanes..(i + 1) * lanes];
                        for ((a, dn), dp) in slab.iter_mut().zip(diff).zip(&self.last_diff) {
                            let curv = slope * (*dn / tau - *dp / prev);
                            *a = decay * (*a + e0 * *dp + e1 * curv * prev);
                        }
                    }
                    self.commit_ops = (modes * lanes) as u64;
                } else {
                    self.commit_ops = 0;
                }
                self.last_diff.copy_from_slice(diff);
            }
        }
        self.committed += 1;
        self.last_node += tau;
        self.last_tau = tau;
        Ok(())
    }

    fn last_commit_ops(&self) -> u64 {
        self.commit_ops
    }
}

/// Scalar fast Caputo derivative at step `n`: the value `D g(t_{n-theta})` from the
/// increments committed so far plus `g_n - g_prev`, then commits that increment.
pub fn fast_discrete_caputo<S: Scalar>(
    history: &mut FastHistory<S>,
    n: usize,
    tau: S,
    g_n: S,
    g_prev: S,
) -> Result<S> {
    if history.committed() + 1 != n || history.lanes() != 1 {
        return Err(Error::HistoryOrder {
            state: history.committed(),
            requested: n,
        });
    }
    let mut hist = [S::zero()];
    let lead = history.prepare(tau, &mut hist)?;
    let diff = g_n - g_prev;
    history.commit(tau, &[diff])?;
    Ok(lead * diff + hist[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi1_series_and_closed_form_agree_at_switch() {
        let z = 1.0f64;
        let e = (-z).exp();
        let closed = 0.5 * (1.0 - e) / z - (1.0 - e * (1.0 + z)) / (z * z);
        let z2 = 1.0 - 1e-12;
        assert!((phi1(z2) - closed).abs() < 1e-12);
        assert!((phi1(1e-3) - (1e-3 / 12.0 - 1e-6 / 24.0)).abs() < 1e-10);
    }

    #[test]
    fn soe_is_certified_and_positive() {
        let soe = build_soe(0.5f64, 1e-3, 1.0, 1e-12).unwrap();
        assert!(soe.certified_error <= 1e-12);
        assert!(soe.exponents.iter().all(|&s| s > 0.0));
        assert!(soe.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_soe(1.2f64, 1e-3, 1.0, 1e-8).is_err());
        assert!(build_soe(0.5f64, 1.0, 1.0, 1e-8).is_err());
        assert!(build_soe(0.5f64, 1e-3, 1.0, 0.1).is_err());
    }
}
