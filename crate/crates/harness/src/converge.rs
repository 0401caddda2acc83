//! Temporal convergence studies on manufactured solutions.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use fracwave::mesh::{check_mesh_assumption, graded_mesh, split_rule, two_part_mesh};
use fracwave::{run, Mesh, SchemeKind, Tail};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{MeshFamily, StudyConfig};
use crate::output::{self, Curve};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Max over time levels of the discrete H2 error; `None` when the run failed.
    pub error: Option<f64>,
    /// `log2(e(N/2) / e(N))`, absent in the first row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshConstants {
    pub n: usize,
    pub t0: f64,
    pub n0: usize,
    pub n1: usize,
    pub c_step: f64,
    pub c_node: f64,
    pub c_relative: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub alpha: f64,
    pub gamma: f64,
    pub n: usize,
    pub message: String,
}

/// One `(alpha, gamma)` column of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceColumn {
    pub alpha: f64,
    pub gamma_label: String,
    pub gamma: f64,
    pub theoretical: f64,
    pub rows: Vec<ConvergenceRow>,
    pub meshes: Vec<MeshConstants>,
    pub runtime_s: f64,
}

impl ConvergenceColumn {
    pub fn error_at(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).and_then(|r| r.error)
    }

    pub fn order_at(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).and_then(|r| r.order)
    }

    /// Least-squares slope of `-log e` against `log N` over every successful row.
    pub fn fitted_order(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| r.error.map(|e| ((r.n as f64).ln(), e.ln())))
            .collect();
        least_squares_slope(&pts).map(|s| -s)
    }
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub columns: Vec<ConvergenceColumn>,
    pub failures: Vec<RunFailure>,
    pub runtime_s: f64,
}

/// Expected temporal order: `min(2 - beta, gamma sigma)` for L1 and
/// `min(2, gamma sigma)` for Alikhanov, `sigma` the regularity of the half-order derivative.
pub fn theoretical_order(scheme: SchemeKind, beta: f64, sigma: f64, gamma: f64) -> f64 {
    let cap = match scheme {
        SchemeKind::L1 => 2.0 - beta,
        SchemeKind::Alikhanov => 2.0,
    };
    cap.min(gamma * sigma)
}

/// Builds the time mesh of one run.
pub fn study_mesh(
    family: MeshFamily,
    horizon: f64,
    n: usize,
    gamma: f64,
    seed: u64,
) -> Result<(Mesh, f64, usize, usize)> {
    Ok(match family {
        MeshFamily::TwoPart => {
            let (t0, n0, n1) = split_rule(horizon, n, gamma);
            let mesh = two_part_mesh(t0, horizon, n0, n1, gamma, Tail::Random { seed })?;
            (mesh, t0, n0, n1)
        }
        MeshFamily::Graded => (graded_mesh(horizon, n, gamma)?, horizon, n, 0),
    })
}

struct Task {
    column: usize,
    n: usize,
}

type TaskResult = std::result::Result<(f64, MeshConstants), RunFailure>;

/// Runs every `(alpha, gamma, N)` combination of `cfg`; failing runs are
/// recorded and leave gaps in their column.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut columns = Vec::new();
    let mut problems = Vec::new();
    for &alpha in &cfg.alphas {
        let problem = cfg.problem_for(alpha)?;
        if problem.exact.is_none() {
            return Err(HarnessError::Config(format!(
                "problem '{}' has no exact solution",
                cfg.problem
            )));
        }
        for g in &cfg.gammas {
            let gamma = g.resolve(&problem, cfg.scheme);
            if !(gamma >= 1.0) {
                return Err(HarnessError::Config(format!(
                    "grading {g} resolves to {gamma} < 1 for alpha = {alpha}"
                )));
            }
            columns.push(ConvergenceColumn {
                alpha,
                gamma_label: g.to_string(),
                gamma,
                theoretical: theoretical_order(
                    cfg.scheme,
                    problem.beta(),
                    problem.regularity.1,
                    gamma,
                ),
                rows: Vec::new(),
                meshes: Vec::new(),
                runtime_s: 0.0,
            });
            problems.push(problem.clone());
        }
    }

    let tasks: Vec<Task> = (0..columns.len())
        .flat_map(|column| cfg.ns.iter().map(move |&n| Task { column, n }))
        .collect();
    let results: Vec<(TaskResult, f64)> = tasks
        .par_iter()
        .map(|task| {
            let col = &columns[task.column];
            let problem = &problems[task.column];
            let clock = Instant::now();
            let out = (|| -> Result<(f64, MeshConstants)> {
                let (mesh, t0, n0, n1) =
                    study_mesh(cfg.mesh, problem.horizon, task.n, col.gamma, cfg.seed)?;
                let ma = check_mesh_assumption(&mesh, col.gamma);
                let traj = run(problem, &mesh, cfg.m, cfg.scheme, cfg.kernels)?;
                let error = traj
                    .max_h2_error()
                    .ok_or_else(|| HarnessError::Config("problem has no exact solution".into()))?;
                Ok((
                    error,
                    MeshConstants {
                        n: task.n,
                        t0,
                        n0,
                        n1,
                        c_step: ma.c_step,
                        c_node: ma.c_node,
                        c_relative: ma.c_relative,
                        max_ratio: ma.max_ratio,
                    },
                ))
            })();
            let out = out.map_err(|e| RunFailure {
                alpha: col.alpha,
                gamma: col.gamma,
                n: task.n,
                message: e.to_string(),
            });
            (out, clock.elapsed().as_secs_f64())
        })
        .collect();

    let mut failures = Vec::new();
    for (task, (result, secs)) in tasks.iter().zip(results) {
        let col = &mut columns[task.column];
        col.runtime_s += secs;
        let error = match result {
            Ok((e, consts)) => {
                col.meshes.push(consts);
                Some(e)
            }
            Err(f) => {
                failures.push(f);
                None
            }
        };
        let order = match (col.rows.last(), error) {
            (Some(prev), Some(e)) => prev.error.map(|p| (p / e).log2()),
            _ => None,
        };
        col.rows.push(ConvergenceRow {
            n: task.n,
            error,
            order,
        });
    }
    Ok(ConvergenceReport {
        config: cfg.clone(),
        columns,
        failures,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    alpha: f64,
    scheme: &'a str,
    gamma_label: &'a str,
    gamma: f64,
    n: usize,
    error_h2: Option<f64>,
    order: Option<f64>,
    theoretical: f64,
}

impl ConvergenceReport {
    pub fn column(&self, alpha: f64, gamma_label: &str) -> Option<&ConvergenceColumn> {
        self.columns
            .iter()
            .find(|c| c.alpha == alpha && c.gamma_label == gamma_label)
    }

    pub fn to_csv(&self) -> Result<String> {
        let scheme = self.config.scheme.name();
        let rows: Vec<CsvRow> = self
            .columns
            .iter()
            .flat_map(|c| {
                c.rows.iter().map(move |r| CsvRow {
                    alpha: c.alpha,
                    scheme,
                    gamma_label: &c.gamma_label,
                    gamma: c.gamma,
                    n: r.n,
                    error_h2: r.error,
                    order: r.order,
                    theoretical: c.theoretical,
                })
            })
            .collect();
        output::records_to_csv(&rows)
    }

    /// Plain-text table with one block per alpha, one row per N.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let mut alphas: Vec<f64> = self.columns.iter().map(|c| c.alpha).collect();
        alphas.dedup();
        for alpha in alphas {
            let cols: Vec<&ConvergenceColumn> =
                self.columns.iter().filter(|c| c.alpha == alpha).collect();
            let _ = writeln!(
                s,
                "{} scheme, alpha = {alpha}, M = {}",
                self.config.scheme.name(),
                self.config.m
            );
            let _ = write!(s, "{:>6}", "N");
            for c in &cols {
                let _ = write!(
                    s,
                    " | {:>22}",
                    format!("gamma={} ({:.3})", c.gamma_label, c.gamma)
                );
            }
            let _ = writeln!(s);
            for (i, &n) in self.config.ns.iter().enumerate() {
                let _ = write!(s, "{n:>6}");
                for c in &cols {
                    let r = &c.rows[i];
                    let e = r.error.map_or("failed".to_string(), |e| format!("{e:.4e}"));
                    let o = r.order.map_or("*".to_string(), |o| format!("{o:.2}"));
                    let _ = write!(s, " | {e:>14} {o:>7}");
                }
                let _ = writeln!(s);
            }
            let _ = write!(s, "{:>6}", "theory");
            for c in &cols {
                let _ = write!(s, " | {:>14} {:>7.2}", "", c.theoretical);
            }
            let _ = writeln!(s);
            let _ = writeln!(s);
        }
        for f in &self.failures {
            let _ = writeln!(
                s,
                "failed: alpha = {}, gamma = {}, N = {}: {}",
                f.alpha, f.gamma, f.n, f.message
            );
        }
        s
    }

    /// Writes `<stem>.csv`, its manifest and `<stem>.gp` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv = self.to_csv()?;
        let meshes: Vec<_> = self
            .columns
            .iter()
            .map(|c| {
                json!({
                    "alpha": c.alpha,
                    "gamma": c.gamma,
                    "gamma_label": c.gamma_label,
                    "theoretical_order": c.theoretical,
                    "runtime_s": c.runtime_s,
                    "mesh_constants": c.meshes,
                })
            })
            .collect();
        output::write_csv_with_manifest(
            dir,
            stem,
            &csv,
            "convergence",
            serde_json::to_value(&self.config)?,
            json!({
                "columns": meshes,
                "failures": self.failures,
                "runtime_s": self.runtime_s,
            }),
        )?;
        let curves: Vec<Curve> = self
            .columns
            .iter()
            .map(|c| Curve {
                file: format!("{stem}.csv"),
                using: format!("(($1=={} && $4=={}) ? $5 : 1/0):6", c.alpha, c.gamma),
                title: format!("alpha={} gamma={}", c.alpha, c.gamma_label),
                style: "linespoints",
            })
            .collect();
        let script =
            output::gnuplot_script(&format!("{stem}.png"), "N", "max H2 error", "xy", &curves);
        std::fs::write(dir.join(format!("{stem}.gp")), script)?;
        Ok(())
    }
}
