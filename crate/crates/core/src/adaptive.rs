//! Adaptive step-size control from the disagreement of a paired L1 and
//! Alikhanov step.
//!
//! Both schemes take the same trial step; the relative L2 distance between the
//! two candidate solutions is the error estimate. A step is accepted when the
//! estimate is below the tolerance, or when the trial was already shrunk to
//! two thirds of the previous trial (or to the minimum step). The next step is
//! `S sqrt(tol / e) tau`, clamped to `[tau_min, tau_max]`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::SchemeKind;
use crate::mesh::graded_mesh;
use crate::problems::ProblemSpec;
use crate::scalar::Scalar;
use crate::spatial::GridField;
use crate::stepper::{KernelMode, SforSolver, SolverConfig, Trial};

/// Which candidate is stored after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepPolicy {
    /// Both solvers continue from the Alikhanov solution.
    Alikhanov,
    /// Both solvers continue from the L1 solution.
    L1,
    /// Each solver keeps its own solution.
    Independent,
}

impl std::str::FromStr for KeepPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u2" | "alikhanov" => Ok(KeepPolicy::Alikhanov),
            "u1" | "l1" => Ok(KeepPolicy::L1),
            "independent" => Ok(KeepPolicy::Independent),
            other => Err(Error::InvalidArgument(format!(
                "unknown keep policy '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig<S> {
    pub tol: S,
    pub safety: S,
    pub tau_min: S,
    pub tau_max: S,
    pub max_retries: usize,
    pub keep: KeepPolicy,
}

impl<S: Scalar> Default for AdaptiveConfig<S> {
    fn default() -> Self {
        Self {
            tol: S::of(1e-3),
            safety: S::of(0.9),
            tau_min: S::of(1e-3),
            tau_max: S::of(1e-1),
            max_retries: 25,
            keep: KeepPolicy::Alikhanov,
        }
    }
}

impl<S: Scalar> AdaptiveConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must be positive",
                self.tol
            )));
        }
        if !(self.safety > S::zero() && self.safety <= S::one()) {
            return Err(Error::InvalidArgument(format!(
                "safety factor {} must lie in (0, 1]",
                self.safety
            )));
        }
        if !(self.tau_min > S::zero() && self.tau_min <= self.tau_max) {
            return Err(Error::InvalidArgument(format!(
                "step bounds must satisfy 0 < tau_min <= tau_max, got {} and {}",
                self.tau_min, self.tau_max
            )));
        }
        Ok(())
    }

    fn clamp(&self, tau: S) -> S {
        tau.max(self.tau_min).min(self.tau_max)
    }
}

/// `S sqrt(tol / e) tau`, or `tau_max` when `e = 0`.
pub fn tau_ada<S: Scalar>(e: S, tau: S, cfg: &AdaptiveConfig<S>) -> S {
    if e <= S::zero() {
        return cfg.tau_max;
    }
    cfg.safety * (cfg.tol / e).sqrt() * tau
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStep<S> {
    pub t: S,
    pub tau: S,
    pub estimate: S,
    pub retries: usize,
    pub max_norm: S,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptiveRecord<S> {
    pub steps: Vec<AdaptiveStep<S>>,
    pub rejections: usize,
}

impl<S: Scalar> AdaptiveRecord<S> {
    pub fn accepted(&self) -> usize {
        self.steps.len()
    }

    /// Step-size history: `t, tau, estimate, retries`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,tau,estimate,retries\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{:.15e},{:.15e},{:.6e},{}",
                s.t, s.tau, s.estimate, s.retries
            );
        }
        out
    }
}

/// A pair of schemes that can be tried on a common step and then advanced.
pub trait DualStepper<S> {
    type Trial;

    fn time(&self) -> S;

    /// Candidate step ending at `end` and its relative disagreement.
    fn try_step(&mut self, end: S) -> Result<(S, Self::Trial)>;

    /// Stores an accepted candidate; returns the max norm of the kept solution.
    fn accept(&mut self, trial: Self::Trial) -> Result<S>;
}

/// Step-size state of the controller.
#[derive(Debug, Clone)]
pub struct AdaptiveController<S> {
    pub cfg: AdaptiveConfig<S>,
    next_tau: S,
    targets: Vec<S>,
    pub record: AdaptiveRecord<S>,
}

impl<S: Scalar> AdaptiveController<S> {
    /// `targets` are times that must be hit exactly; the last one is the final time.
    pub fn new(cfg: AdaptiveConfig<S>, initial_tau: S, mut targets: Vec<S>) -> Result<Self> {
        cfg.validate()?;
        if !(initial_tau > S::zero()) || targets.is_empty() {
            return Err(Error::InvalidArgument(
                "need a positive initial step and a final time".into(),
            ));
        }
        targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Targets closer than round-off would demand a vanishing step.
        targets.dedup_by(|b, a| (*b - *a).abs() <= S::of(1e-12) * S::one().max(a.abs()));
        Ok(Self {
            cfg,
            next_tau: initial_tau,
            targets,
            record: AdaptiveRecord::default(),
        })
    }

    pub fn next_tau(&self) -> S {
        self.next_tau
    }

    pub fn final_time(&self) -> S {
        *self.targets.last().unwrap()
    }

    pub fn finished(&self, t: S) -> bool {
        t >= self.final_time()
    }

    /// End point of a step of length `tau` from `t`: lands exactly on the next
    /// target when it would reach it, and splits the remainder in half when it
    /// would leave less than `tau_min` before it.
    pub fn fit(&self, t: S, tau: S) -> S {
        let Some(&target) = self.targets.iter().find(|&&x| x > t) else {
            return t + tau;
        };
        if t + tau >= target {
            target
        } else if target - (t + tau) < self.cfg.tau_min {
            t + (target - t) / S::of(2.0)
        } else {
            t + tau
        }
    }

    /// Runs one accepted step of `dual`.
    pub fn advance<D: DualStepper<S>>(&mut self, dual: &mut D) -> Result<AdaptiveStep<S>> {
        let t = dual.time();
        if self.finished(t) {
            return Err(Error::InvalidArgument(format!(
                "already at the final time {t}"
            )));
        }
        let cfg = self.cfg;
        let two_thirds = S::of(2.0) / S::of(3.0);
        let mut tau = self.next_tau;
        let mut at_floor = false;
        let mut retries = 0;
        loop {
            let end = self.fit(t, tau);
            let used = end - t;
            let (e, trial) = dual.try_step(end)?;
            let at_min = used <= cfg.tau_min * (S::one() + S::of(1e-12));
            let proposal = cfg.clamp(tau_ada(e, used, &cfg));
            if e < cfg.tol || at_floor || at_min {
                let max_norm = dual.accept(trial)?;
                self.next_tau = proposal;
                let step = AdaptiveStep {
                    t: end,
                    tau: used,
                    estimate: e,
                    retries,
                    max_norm,
                };
                self.record.steps.push(step);
                return Ok(step);
            }
            retries += 1;
            self.record.rejections += 1;
            if retries > cfg.max_retries {
                return Err(Error::RetryLimit {
                    retries: cfg.max_retries,
                    time: t.as_f64(),
                    estimate: e.as_f64(),
                });
            }
            let floor = two_thirds * used;
            at_floor = proposal <= floor;
            tau = proposal.max(floor);
        }
    }
}

/// Relative discrete L2 distance of two fields, absolute when the reference vanishes.
pub fn relative_difference<S: Scalar>(reference: &GridField<S>, other: &GridField<S>) -> S {
    let mut d2 = S::zero();
    let mut r2 = S::zero();
    for (a, b) in reference.data.iter().zip(&other.data) {
        d2 += (*a - *b) * (*a - *b);
        r2 += *a * *a;
    }
    if r2 > S::zero() {
        (d2 / r2).sqrt()
    } else {
        d2.sqrt()
    }
}

/// Paired L1 and Alikhanov solvers on the same grid.
#[derive(Debug)]
pub struct DualSfor<S: Scalar> {
    pub l1: SforSolver<S>,
    pub alikhanov: SforSolver<S>,
    pub keep: KeepPolicy,
}

impl<S: Scalar> DualSfor<S> {
    pub fn new(
        problem: &ProblemSpec<S>,
        m: usize,
        kernels: KernelMode,
        min_step: S,
        keep: KeepPolicy,
    ) -> Result<Self> {
        let l1 = SforSolver::new(
            problem.clone(),
            m,
            SolverConfig::new(SchemeKind::L1, kernels, min_step),
        )?;
        let alikhanov = SforSolver::new(
            problem.clone(),
            m,
            SolverConfig::new(SchemeKind::Alikhanov, kernels, min_step),
        )?;
        Ok(Self {
            l1,
            alikhanov,
            keep,
        })
    }

    /// Advances both solvers to `end` with the Alikhanov solution.
    pub fn seed_step(&mut self, end: S) -> Result<()> {
        let trial = self.alikhanov.trial_until(end)?;
        self.l1.commit(&trial)?;
        self.alikhanov.commit(&trial)
    }

    /// Solution of record.
    pub fn solution(&self) -> &GridField<S> {
        match self.keep {
            KeepPolicy::L1 => self.l1.solution(),
            _ => self.alikhanov.solution(),
        }
    }
}

impl<S: Scalar> DualStepper<S> for DualSfor<S> {
    type Trial = (Trial<S>, Trial<S>);

    fn time(&self) -> S {
        self.alikhanov.time()
    }

    fn try_step(&mut self, end: S) -> Result<(S, Self::Trial)> {
        let t1 = self.l1.trial_until(end)?;
        let t2 = self.alikhanov.trial_until(end)?;
        Ok((relative_difference(&t2.u, &t1.u), (t1, t2)))
    }

    fn accept(&mut self, (t1, t2): Self::Trial) -> Result<S> {
        match self.keep {
            KeepPolicy::Alikhanov => {
                self.l1.commit(&t2)?;
                self.alikhanov.commit(&t2)?;
            }
            KeepPolicy::L1 => {
                self.l1.commit(&t1)?;
                self.alikhanov.commit(&t1)?;
            }
            KeepPolicy::Independent => {
                self.l1.commit(&t1)?;
                self.alikhanov.commit(&t2)?;
            }
        }
        Ok(self.solution().max_abs())
    }
}

/// Graded start-up phase `[0, t0]` with `steps` nodes and grading `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warmup<S> {
    pub t0: S,
    pub steps: usize,
    pub gamma: S,
}

impl<S: Scalar> Warmup<S> {
    /// `t0 = 0.02`, 30 steps, grading `4 / alpha`.
    pub fn standard(alpha: S) -> Self {
        Self {
            t0: S::of(0.02),
            steps: 30,
            gamma: S::of(4.0) / alpha,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun<S> {
    pub record: AdaptiveRecord<S>,
    pub warmup_nodes: Vec<S>,
    /// `(t, max |u|)` at every node, start-up phase included.
    pub max_norm_history: Vec<(S, S)>,
    pub snapshots: Vec<(S, GridField<S>)>,
}

impl<S: Scalar> AdaptiveRun<S> {
    pub fn max_norm_csv(&self) -> String {
        let mut out = String::from("t,max_norm\n");
        for (t, v) in &self.max_norm_history {
            let _ = writeln!(out, "{t:.15e},{v:.10e}");
        }
        out
    }

    /// Max norm recorded at the node closest to `t`.
    pub fn max_norm_at(&self, t: S) -> Option<S> {
        self.max_norm_history
            .iter()
            .min_by(|a, b| (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap())
            .map(|p| p.1)
    }
}

/// Start-up on a graded mesh with the Alikhanov scheme, then adaptive steps to
/// `problem.horizon`, landing on every time in `outputs`.
pub fn run_adaptive<S: Scalar>(
    problem: &ProblemSpec<S>,
    m: usize,
    cfg: AdaptiveConfig<S>,
    warmup: Warmup<S>,
    kernels: KernelMode,
    outputs: &[S],
) -> Result<AdaptiveRun<S>> {
    cfg.validate()?;
    let horizon = problem.horizon;
    if !(warmup.t0 > S::zero() && warmup.t0 < horizon) {
        return Err(Error::InvalidArgument(format!(
            "start-up end {} must lie in (0, {horizon})",
            warmup.t0
        )));
    }
    let mesh = graded_mesh(warmup.t0, warmup.steps, warmup.gamma)?;
    let min_step = mesh.step(1).min(cfg.tau_min / S::of(2.0));
    let mut dual = DualSfor::new(problem, m, kernels, min_step, cfg.keep)?;

    let mut wanted: Vec<S> = outputs
        .iter()
        .copied()
        .filter(|&t| t >= S::zero() && t <= horizon)
        .collect();
    let mut snapshots = Vec::new();
    let mut take = |t: S, field: &GridField<S>, wanted: &mut Vec<S>| {
        if let Some(pos) = wanted
            .iter()
            .position(|&w| (w - t).abs() <= S::of(1e-12) * S::one().max(t.abs()))
        {
            wanted.remove(pos);
            snapshots.push((t, field.clone()));
        }
    };
    take(S::zero(), dual.solution(), &mut wanted);

    let mut history = vec![(S::zero(), dual.solution().max_abs())];
    for n in 1..=mesh.len() {
        dual.seed_step(mesh.node(n))?;
        history.push((mesh.node(n), dual.solution().max_abs()));
        take(mesh.node(n), dual.solution(), &mut wanted);
    }

    let mut targets: Vec<S> = wanted.iter().copied().filter(|&t| t > warmup.t0).collect();
    targets.push(horizon);
    let mut controller = AdaptiveController::new(cfg, mesh.step(mesh.len()), targets)?;
    while !controller.finished(dual.time()) {
        let step = controller.advance(&mut dual)?;
        history.push((step.t, step.max_norm));
        take(step.t, dual.solution(), &mut wanted);
    }
    Ok(AdaptiveRun {
        record: controller.record,
        warmup_nodes: mesh.nodes().to_vec(),
        max_norm_history: history,
        snapshots,
    })
}
