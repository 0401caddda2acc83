//! Linearised implicit time stepping of the reduced system
//!
//! ```text
//! D^beta v = nu^2 Laplace_h w + f(u) + nu^2 t Laplace(phi_rate),   v = D^beta w,
//! ```
//!
//! where `w = u - t phi_rate` is the shifted unknown and `beta = alpha/2`.
//! Each step eliminates the new `v` and solves one modified Helmholtz problem
//! for the increment of `w`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::history::{CaputoHistory, DirectHistory};
use crate::kernels::SchemeKind;
use crate::mesh::TemporalMesh;
use crate::problems::ProblemSpec;
use crate::scalar::Scalar;
use crate::soe::{build_soe, FastHistory};
use crate::spatial::{laplacian_into, norms, Grid2D, GridField, HelmholtzSolver, Norms};

/// Default relative tolerance of the linear solves (raised to `100 eps` for `f32`).
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;

/// Default relative accuracy of the sum-of-exponentials kernel.
pub const DEFAULT_SOE_TOL: f64 = 1e-12;

/// How the history sums of the discrete Caputo operators are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelMode {
    /// Full convolution over all stored increments.
    Direct,
    /// Sum-of-exponentials compression with relative accuracy `tol`.
    Fast { tol: f64 },
}

impl KernelMode {
    pub fn fast() -> Self {
        KernelMode::Fast {
            tol: DEFAULT_SOE_TOL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelMode::Direct => "direct",
            KernelMode::Fast { .. } => "fast",
        }
    }
}

impl std::str::FromStr for KernelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(KernelMode::Direct),
            "fast" => Ok(KernelMode::fast()),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<S> {
    pub scheme: SchemeKind,
    pub kernels: KernelMode,
    pub solver_tol: S,
    /// Shortest step the fast history must support.
    pub min_step: S,
}

impl<S: Scalar> SolverConfig<S> {
    pub fn new(scheme: SchemeKind, kernels: KernelMode, min_step: S) -> Self {
        Self {
            scheme,
            kernels,
            solver_tol: S::of(DEFAULT_SOLVER_TOL).max(S::epsilon() * S::of(100.0)),
            min_step,
        }
    }

    /// Configuration for a fixed mesh: the fast kernel is certified down to its shortest step.
    pub fn for_mesh(scheme: SchemeKind, kernels: KernelMode, mesh: &TemporalMesh<S>) -> Self {
        Self::new(scheme, kernels, mesh.min_step())
    }
}

/// Source term linearised about the previous solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSource<S> {
    pub value: GridField<S>,
    pub derivative: GridField<S>,
}

/// `f(u_prev, x, t)` and `f_u(u_prev, x, t)` at interior nodes.
pub fn linearized_source<S: Scalar>(
    problem: &ProblemSpec<S>,
    grid: &Grid2D<S>,
    u_prev: &GridField<S>,
    t: S,
) -> Result<LinearizedSource<S>> {
    grid.check(u_prev)?;
    let mut value = grid.zeros();
    let mut derivative = grid.zeros();
    for j in 1..grid.my {
        let y = grid.y(j);
        for i in 1..grid.mx {
            let x = grid.x(i);
            let k = grid.index(i, j);
            let u = u_prev.data[k];
            value.data[k] = (problem.source)(u, x, y, t);
            derivative.data[k] = (problem.source_du)(u, x, y, t);
        }
    }
    Ok(LinearizedSource { value, derivative })
}

/// Candidate solution of one step; nothing is stored until it is committed.
#[derive(Debug, Clone)]
pub struct Trial<S> {
    pub tau: S,
    pub time: S,
    pub u: GridField<S>,
    pub shifted: Vec<S>,
    pub aux: Vec<S>,
    pub iterations: usize,
    /// Relative residual of the momentum equation.
    pub residual: S,
}

type BoxedHistory<S> = Box<dyn CaputoHistory<S> + Send>;

/// Solver state: the accepted fields at the last node and the two histories.
pub struct SforSolver<S: Scalar> {
    problem: ProblemSpec<S>,
    grid: Grid2D<S>,
    helmholtz: HelmholtzSolver<S>,
    config: SolverConfig<S>,
    beta: S,
    theta: S,
    nu2: S,
    hist_shifted: BoxedHistory<S>,
    hist_aux: BoxedHistory<S>,
    step: usize,
    time: S,
    u: GridField<S>,
    shifted: Vec<S>,
    aux: Vec<S>,
    rate: Vec<S>,
    rate_lap: Vec<S>,
}

impl<S: Scalar> std::fmt::Debug for SforSolver<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SforSolver")
            .field("problem", &self.problem.name)
            .field("scheme", &self.config.scheme)
            .field("kernels", &self.config.kernels)
            .field("step", &self.step)
            .field("time", &self.time)
            .finish()
    }
}

fn make_history<S: Scalar>(
    config: &SolverConfig<S>,
    beta: S,
    lanes: usize,
    horizon: S,
) -> Result<BoxedHistory<S>> {
    Ok(match config.kernels {
        KernelMode::Direct => Box::new(DirectHistory::new(config.scheme, beta, lanes)),
        KernelMode::Fast { tol } => {
            let cutoff = config.min_step;
            let horizon = if horizon > cutoff {
                horizon
            } else {
                cutoff * S::of(2.0)
            };
            let soe = build_soe(beta, cutoff, horizon, S::of(tol))?;
            Box::new(FastHistory::new(config.scheme, beta, lanes, soe)?)
        }
    })
}

impl<S: Scalar> SforSolver<S> {
    /// Solver at `t = 0` on an `m x m` grid.
    pub fn new(problem: ProblemSpec<S>, m: usize, config: SolverConfig<S>) -> Result<Self> {
        problem.validate()?;
        let grid = problem.grid(m)?;
        Self::on_grid(problem, grid, config)
    }

    pub fn on_grid(
        problem: ProblemSpec<S>,
        grid: Grid2D<S>,
        config: SolverConfig<S>,
    ) -> Result<Self> {
        if !(config.min_step > S::zero()) {
            return Err(Error::InvalidArgument(
                "minimum step must be positive".into(),
            ));
        }
        let beta = problem.beta();
        let theta = config.scheme.theta(beta);
        let lanes = grid.size();
        let hist_shifted = make_history(&config, beta, lanes, problem.horizon)?;
        let hist_aux = make_history(&config, beta, lanes, problem.horizon)?;
        let u = grid.sample(|x, y| (problem.initial)(x, y));
        let rate = grid.sample(|x, y| (problem.initial_rate)(x, y)).data;
        let rate_lap = match &problem.initial_rate_laplacian {
            Some(f) => grid.sample(|x, y| f(x, y)).data,
            None => {
                let mut out = vec![S::zero(); lanes];
                laplacian_into(&grid, &rate, &mut out);
                out
            }
        };
        let nu2 = problem.nu * problem.nu;
        Ok(Self {
            helmholtz: HelmholtzSolver::new(grid),
            grid,
            config,
            beta,
            theta,
            nu2,
            hist_shifted,
            hist_aux,
            step: 0,
            time: S::zero(),
            shifted: u.data.clone(),
            u,
            aux: vec![S::zero(); lanes],
            rate,
            rate_lap,
            problem,
        })
    }

    pub fn problem(&self) -> &ProblemSpec<S> {
        &self.problem
    }

    pub fn grid(&self) -> &Grid2D<S> {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig<S> {
        &self.config
    }

    pub fn scheme(&self) -> SchemeKind {
        self.config.scheme
    }

    /// Order of each half-derivative.
    pub fn beta(&self) -> S {
        self.beta
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> S {
        self.time
    }

    /// Solution `u` at the last accepted node.
    pub fn solution(&self) -> &GridField<S> {
        &self.u
    }

    /// Shifted unknown `u - t phi_rate` at the last accepted node.
    pub fn shifted(&self) -> &[S] {
        &self.shifted
    }

    /// Half-order derivative of the shifted unknown at the last accepted node.
    pub fn auxiliary(&self) -> &[S] {
        &self.aux
    }

    /// Computes the step of length `tau` past the last accepted node without committing it.
    pub fn trial(&self, tau: S) -> Result<Trial<S>> {
        self.trial_until(self.time + tau)
    }

    /// Trial step that ends exactly at `time`.
    pub fn trial_until(&self, time: S) -> Result<Trial<S>> {
        self.trial_inner(time - self.time, time)
            .map_err(|e| Error::Step {
                step: self.step + 1,
                time: time.as_f64(),
                source: Box::new(e),
            })
    }

    fn trial_inner(&self, tau: S, time: S) -> Result<Trial<S>> {
        let one = S::one();
        let lanes = self.grid.size();
        let theta = self.theta;
        let keep = one - theta;
        let mut h_shift = vec![S::zero(); lanes];
        let mut h_aux = vec![S::zero(); lanes];
        let lead = self.hist_shifted.prepare(tau, &mut h_shift)?;
        let lead_aux = self.hist_aux.prepare(tau, &mut h_aux)?;
        if !(lead > S::zero()) || lead != lead_aux {
            return Err(Error::NonPositiveKernel {
                step: self.step + 1,
            });
        }
        let t_off = time - theta * tau;
        let src = linearized_source(&self.problem, &self.grid, &self.u, t_off)?;

        let mut lap_prev = vec![S::zero(); lanes];
        laplacian_into(&self.grid, &self.shifted, &mut lap_prev);
        let mut rhs = self.grid.zeros();
        let mut diag = self.grid.zeros();
        for k in 0..lanes {
            let fu = src.derivative.data[k];
            diag.data[k] = keep * fu;
            rhs.data[k] = self.nu2 * lap_prev[k]
                + src.value.data[k]
                + keep * fu * tau * self.rate[k]
                + self.nu2 * t_off * self.rate_lap[k]
                - lead * (h_shift[k] - theta * self.aux[k]) / keep
                + lead * self.aux[k]
                - h_aux[k];
        }
        let shift = lead * lead / keep;
        let d = keep * self.nu2;
        let (delta, stats) =
            self.helmholtz
                .solve(shift, d, Some(&diag), &rhs, self.config.solver_tol)?;

        let mut shifted = self.shifted.clone();
        let mut aux = vec![S::zero(); lanes];
        let mut u = self.grid.zeros();
        for k in 0..lanes {
            shifted[k] += delta.data[k];
            aux[k] = (lead * delta.data[k] + h_shift[k] - theta * self.aux[k]) / keep;
            u.data[k] = shifted[k] + time * self.rate[k];
        }
        self.zero_ring(&mut shifted);
        self.zero_ring(&mut aux);
        self.zero_ring(&mut u.data);

        // Residual of the momentum equation with the recovered auxiliary field,
        // relative to the size of its individual terms.
        let mut lap_new = vec![S::zero(); lanes];
        laplacian_into(&self.grid, &shifted, &mut lap_new);
        let mut r2 = S::zero();
        let mut scale2 = S::zero();
        for j in 1..self.grid.my {
            for i in 1..self.grid.mx {
                let k = self.grid.index(i, j);
                let jump = lead * (aux[k] - self.aux[k]);
                let forcing = src.value.data[k]
                    + keep * src.derivative.data[k] * (delta.data[k] + tau * self.rate[k]);
                let diffusion = self.nu2 * (keep * lap_new[k] + theta * lap_prev[k]);
                let offset = self.nu2 * t_off * self.rate_lap[k];
                let r = jump + h_aux[k] - diffusion - forcing - offset;
                // The recovered auxiliary field inherits the round-off of the terms it cancels.
                let recovery = lead
                    * ((lead * delta.data[k]).abs() + h_shift[k].abs() + theta * self.aux[k].abs())
                    / keep
                    + lead * self.aux[k].abs();
                let size =
                    recovery + h_aux[k].abs() + diffusion.abs() + forcing.abs() + offset.abs();
                r2 += r * r;
                scale2 += size * size;
            }
        }
        let residual = if scale2 > S::zero() {
            (r2 / scale2).sqrt()
        } else {
            r2.sqrt()
        };
        if residual > S::of(10.0) * self.config.solver_tol && r2 > S::zero() {
            return Err(Error::SolverDivergence {
                iterations: stats.iterations,
                residual: residual.as_f64(),
                shift: shift.as_f64(),
                max_diag: diag
                    .data
                    .iter()
                    .fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64())),
            });
        }
        Ok(Trial {
            tau,
            time,
            u,
            shifted,
            aux,
            iterations: stats.iterations,
            residual,
        })
    }

    fn zero_ring(&self, v: &mut [S]) {
        let (mx, my) = (self.grid.mx, self.grid.my);
        let w = mx + 1;
        for i in 0..=mx {
            v[i] = S::zero();
            v[my * w + i] = S::zero();
        }
        for j in 0..=my {
            v[j * w] = S::zero();
            v[j * w + mx] = S::zero();
        }
    }

    /// Accepts a trial (possibly computed by another solver with the same accepted history).
    pub fn commit(&mut self, trial: &Trial<S>) -> Result<()> {
        let start = trial.time - trial.tau;
        if (start - self.time).abs() > S::of(1e-12) * S::one().max(self.time.abs()) {
            return Err(Error::InvalidArgument(format!(
                "trial starts at t = {start} but the solver is at t = {}",
                self.time
            )));
        }
        let lanes = self.grid.size();
        if trial.shifted.len() != lanes || trial.aux.len() != lanes {
            return Err(Error::LengthMismatch {
                expected: lanes,
                got: trial.shifted.len(),
            });
        }
        let d_shift: Vec<S> = trial
            .shifted
            .iter()
            .zip(&self.shifted)
            .map(|(a, b)| *a - *b)
            .collect();
        let d_aux: Vec<S> = trial
            .aux
            .iter()
            .zip(&self.aux)
            .map(|(a, b)| *a - *b)
            .collect();
        self.hist_shifted.commit(trial.tau, &d_shift)?;
        self.hist_aux.commit(trial.tau, &d_aux)?;
        self.step += 1;
        self.time = trial.time;
        self.shifted.copy_from_slice(&trial.shifted);
        self.aux.copy_from_slice(&trial.aux);
        self.u.data.copy_from_slice(&trial.u.data);
        Ok(())
    }

    /// Advances by `tau` and returns the trial that was committed.
    pub fn advance(&mut self, tau: S) -> Result<Trial<S>> {
        let trial = self.trial(tau)?;
        self.commit(&trial)?;
        Ok(trial)
    }

    /// Exact solution sampled at the current node, if the problem has one.
    pub fn exact_at(&self, t: S) -> Option<GridField<S>> {
        let exact = self.problem.exact.as_ref()?;
        Some(self.grid.sample(|x, y| exact(x, y, t)))
    }

    /// Error norms of the current solution against the exact one.
    pub fn error_norms(&self) -> Option<Norms<S>> {
        let mut e = self.exact_at(self.time)?;
        for (a, b) in e.data.iter_mut().zip(&self.u.data) {
            *a -= *b;
        }
        Some(norms(&self.grid, &e))
    }

    /// Lane-mode work of the last commit of the shifted-unknown history.
    pub fn last_commit_ops(&self) -> u64 {
        self.hist_shifted.last_commit_ops()
    }
}

/// Per-node record of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<S> {
    pub n: usize,
    pub t: S,
    pub tau: S,
    pub error: Option<Norms<S>>,
    pub max_norm: S,
    pub residual: S,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub scheme: SchemeKind,
    pub kernels: KernelMode,
    pub records: Vec<StepRecord<S>>,
    pub final_field: GridField<S>,
}

impl<S: Scalar> Trajectory<S> {
    /// Largest H2 error over all nodes.
    pub fn max_h2_error(&self) -> Option<S> {
        self.records
            .iter()
            .map(|r| r.error.map(|e| e.h2))
            .try_fold(S::zero(), |m, e| e.map(|e| m.max(e)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,t,tau,e_l2,e_max,e_h2,max_norm,residual,iterations\n");
        for r in &self.records {
            let (l2, mx, h2) = match r.error {
                Some(e) => (
                    format!("{:.10e}", e.l2),
                    format!("{:.10e}", e.max),
                    format!("{:.10e}", e.h2),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{:.15e},{:.15e},{l2},{mx},{h2},{:.10e},{:.3e},{}",
                r.n, r.t, r.tau, r.max_norm, r.residual, r.iterations
            );
        }
        out
    }
}

/// Integrates `problem` over `mesh` on an `m x m` grid.
pub fn run<S: Scalar>(
    problem: &ProblemSpec<S>,
    mesh: &TemporalMesh<S>,
    m: usize,
    scheme: SchemeKind,
    kernels: KernelMode,
) -> Result<Trajectory<S>> {
    let config = SolverConfig::for_mesh(scheme, kernels, mesh);
    run_with(problem.clone(), mesh, m, config)
}

pub fn run_with<S: Scalar>(
    problem: ProblemSpec<S>,
    mesh: &TemporalMesh<S>,
    m: usize,
    config: SolverConfig<S>,
) -> Result<Trajectory<S>> {
    let mut solver = SforSolver::new(problem, m, config)?;
    let mut records = Vec::with_capacity(mesh.len());
    records.push(StepRecord {
        n: 0,
        t: S::zero(),
        tau: S::zero(),
        error: solver.error_norms(),
        max_norm: solver.solution().max_abs(),
        residual: S::zero(),
        iterations: 0,
    });
    for n in 1..=mesh.len() {
        let trial = solver.trial_until(mesh.node(n))?;
        solver.commit(&trial)?;
        records.push(StepRecord {
            n,
            t: mesh.node(n),
            tau: trial.tau,
            error: solver.error_norms(),
            max_norm: solver.solution().max_abs(),
            residual: trial.residual,
            iterations: trial.iterations,
        });
    }
    Ok(Trajectory {
        scheme: config.scheme,
        kernels: config.kernels,
        records,
        final_field: solver.solution().clone(),
    })
}
