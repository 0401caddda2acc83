//! The adaptive Example 2 experiment and its uniform-mesh comparison.

use std::path::Path;
use std::time::Instant;

use fracwave::adaptive::{run_adaptive, AdaptiveRun, Warmup};
use fracwave::mesh::two_part_mesh;
use fracwave::problems::example2;
use fracwave::stepper::KernelMode;
use fracwave::{AdaptiveConfig, KeepPolicy, SchemeKind, Tail};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{keep_serde, kernels_serde};
use crate::output::{self, Curve};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub horizon: f64,
    pub m: usize,
    pub tol: f64,
    pub safety: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub max_retries: usize,
    #[serde(with = "keep_serde")]
    pub keep: KeepPolicy,
    #[serde(with = "kernels_serde")]
    pub kernels: KernelMode,
    pub warmup_end: f64,
    pub warmup_steps: usize,
    /// Grading of the start-up mesh; `4 / alpha` when absent.
    pub warmup_gamma: Option<f64>,
    pub snapshots: Vec<f64>,
    /// Number of equispaced comparison times in `(T0, T]`.
    pub comparison_points: usize,
    pub compare_uniform: bool,
    /// Upper limit of the uniform search, as a multiple of the adaptive step count.
    pub max_uniform_factor: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let a = AdaptiveConfig::<f64>::default();
        Self {
            alpha: 1.5,
            horizon: 10.0,
            m: 100,
            tol: a.tol,
            safety: a.safety,
            tau_min: a.tau_min,
            tau_max: a.tau_max,
            max_retries: a.max_retries,
            keep: a.keep,
            kernels: KernelMode::fast(),
            warmup_end: 0.02,
            warmup_steps: 30,
            warmup_gamma: None,
            snapshots: vec![0.0, 0.5, 2.0, 10.0],
            comparison_points: 8,
            compare_uniform: false,
            max_uniform_factor: 16,
        }
    }
}

impl ExperimentConfig {
    pub fn controller(&self) -> AdaptiveConfig<f64> {
        AdaptiveConfig {
            tol: self.tol,
            safety: self.safety,
            tau_min: self.tau_min,
            tau_max: self.tau_max,
            max_retries: self.max_retries,
            keep: self.keep,
        }
    }

    pub fn warmup(&self) -> Warmup<f64> {
        Warmup {
            t0: self.warmup_end,
            steps: self.warmup_steps,
            gamma: self.warmup_gamma.unwrap_or(4.0 / self.alpha),
        }
    }

    /// `T0 + j (T - T0) / K`, `j = 1..K`.
    pub fn comparison_times(&self) -> Vec<f64> {
        let k = self.comparison_points;
        let (t0, t) = (self.warmup_end, self.horizon);
        (1..=k)
            .map(|j| t0 + (t - t0) * j as f64 / k as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformAttempt {
    /// Uniform steps on `(T0, T]`.
    pub steps: usize,
    pub deviation: f64,
    pub agrees: bool,
    pub runtime_s: f64,
}

/// Search for the coarsest uniform tail whose max-norm trajectory matches the adaptive one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformComparison {
    pub attempts: Vec<UniformAttempt>,
    /// Step count of the first agreeing uniform run.
    pub matched: Option<usize>,
    #[serde(skip)]
    pub matched_history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct AdaptiveExperiment {
    pub config: ExperimentConfig,
    pub run: AdaptiveRun<f64>,
    pub comparison: Option<UniformComparison>,
    pub runtime_s: f64,
}

impl AdaptiveExperiment {
    /// Accepted adaptive steps in `(T0, T]`.
    pub fn adaptive_steps(&self) -> usize {
        self.run.record.accepted()
    }

    /// Adaptive max norms at the comparison times.
    pub fn adaptive_samples(&self) -> Vec<f64> {
        self.config
            .comparison_times()
            .iter()
            .map(|&t| self.run.max_norm_at(t).unwrap_or(f64::NAN))
            .collect()
    }
}

/// `max_j |a_j - b_j| / max_j |b_j|`.
pub fn trajectory_deviation(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}

fn run_context(cfg: &ExperimentConfig, stage: &str) -> String {
    format!(
        "{stage} failed; run manifest {}",
        serde_json::to_string(cfg).unwrap_or_default()
    )
}

/// `(t, max |u|)` samples.
pub type NormHistory = Vec<(f64, f64)>;

/// Alikhanov run on the start-up mesh followed by `steps` uniform steps; returns the
/// max norms at the comparison times and the whole `(t, max |u|)` history.
pub fn uniform_run(cfg: &ExperimentConfig, steps: usize) -> Result<(Vec<f64>, NormHistory)> {
    let k = cfg.comparison_points;
    if steps == 0 || !steps.is_multiple_of(k) {
        return Err(HarnessError::Config(format!(
            "uniform step count {steps} must be a positive multiple of {k}"
        )));
    }
    let w = cfg.warmup();
    let problem = example2(cfg.alpha, cfg.horizon)?;
    let mesh = two_part_mesh(w.t0, cfg.horizon, w.steps, steps, w.gamma, Tail::Uniform)?;
    let traj = fracwave::run(&problem, &mesh, cfg.m, SchemeKind::Alikhanov, cfg.kernels)?;
    let samples = (1..=k)
        .map(|j| traj.records[w.steps + j * steps / k].max_norm)
        .collect();
    let history = traj.records.iter().map(|r| (r.t, r.max_norm)).collect();
    Ok((samples, history))
}

/// Runs the adaptive experiment; with `compare_uniform` the uniform tail starts at
/// the adaptive step count rounded down to a multiple of the comparison count and
/// doubles until the trajectories agree within `tol`.
pub fn run_adaptive_experiment(cfg: &ExperimentConfig) -> Result<AdaptiveExperiment> {
    if cfg.comparison_points == 0 {
        return Err(HarnessError::Config(
            "comparison_points must be positive".into(),
        ));
    }
    let clock = Instant::now();
    let problem = example2(cfg.alpha, cfg.horizon)?;
    let mut outputs = cfg.snapshots.clone();
    outputs.extend(cfg.comparison_times());
    let run = run_adaptive(
        &problem,
        cfg.m,
        cfg.controller(),
        cfg.warmup(),
        cfg.kernels,
        &outputs,
    )
    .map_err(|source| HarnessError::Run {
        context: run_context(cfg, "adaptive run"),
        source,
    })?;
    let mut run = run;
    // Comparison times are landing points only; snapshots keep their requested labels.
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    run.snapshots = cfg
        .snapshots
        .iter()
        .filter_map(|&s| {
            run.snapshots
                .iter()
                .find(|(t, _)| close(*t, s))
                .map(|(_, f)| (s, f.clone()))
        })
        .collect();
    let mut exp = AdaptiveExperiment {
        config: cfg.clone(),
        run,
        comparison: None,
        runtime_s: 0.0,
    };
    if cfg.compare_uniform {
        let reference = exp.adaptive_samples();
        let k = cfg.comparison_points;
        let n_ad = exp.adaptive_steps();
        let mut steps = (n_ad / k).max(1) * k;
        let mut cmp = UniformComparison {
            attempts: Vec::new(),
            matched: None,
            matched_history: Vec::new(),
        };
        while steps <= cfg.max_uniform_factor * n_ad.max(k) {
            let t = Instant::now();
            let (samples, history) = uniform_run(cfg, steps).map_err(|e| match e {
                HarnessError::Solver(source) => HarnessError::Run {
                    context: run_context(cfg, &format!("uniform run with {steps} steps")),
                    source,
                },
                other => other,
            })?;
            let deviation = trajectory_deviation(&reference, &samples);
            let agrees = deviation <= cfg.tol;
            cmp.attempts.push(UniformAttempt {
                steps,
                deviation,
                agrees,
                runtime_s: t.elapsed().as_secs_f64(),
            });
            if agrees {
                cmp.matched = Some(steps);
                cmp.matched_history = history;
                break;
            }
            steps *= 2;
        }
        exp.comparison = Some(cmp);
    }
    exp.runtime_s = clock.elapsed().as_secs_f64();
    Ok(exp)
}

impl AdaptiveExperiment {
    /// Writes step sizes, max-norm histories, snapshots, the comparison and plot scripts.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let config = serde_json::to_value(&self.config)?;
        let details = json!({
            "accepted_steps": self.adaptive_steps(),
            "rejections": self.run.record.rejections,
            "warmup_nodes": self.run.warmup_nodes.len(),
            "runtime_s": self.runtime_s,
            "comparison": self.comparison,
        });
        output::write_csv_with_manifest(
            dir,
            "adaptive_steps",
            &self.run.record.to_csv(),
            "adaptive-step-sizes",
            config.clone(),
            details.clone(),
        )?;
        output::write_csv_with_manifest(
            dir,
            "adaptive_max_norm",
            &self.run.max_norm_csv(),
            "adaptive-max-norm",
            config.clone(),
            details.clone(),
        )?;
        for (t, field) in &self.run.snapshots {
            output::write_csv_with_manifest(
                dir,
                &format!("snapshot_t{t}"),
                &field.to_csv(),
                "grid-snapshot",
                config.clone(),
                json!({ "t": t, "rows": field.my + 1, "columns": field.mx + 1 }),
            )?;
        }
        let mut norm_curves = vec![Curve {
            file: "adaptive_max_norm.csv".into(),
            using: "1:2".into(),
            title: "adaptive".into(),
            style: "lines",
        }];
        if let Some(cmp) = &self.comparison {
            #[derive(Serialize)]
            struct Sample {
                t: f64,
                max_norm: f64,
            }
            let rows: Vec<Sample> = cmp
                .matched_history
                .iter()
                .map(|&(t, max_norm)| Sample { t, max_norm })
                .collect();
            output::write_csv_with_manifest(
                dir,
                "uniform_max_norm",
                &output::records_to_csv(&rows)?,
                "graded-uniform-max-norm",
                config.clone(),
                details.clone(),
            )?;
            output::write_csv_with_manifest(
                dir,
                "uniform_search",
                &output::records_to_csv(&cmp.attempts)?,
                "graded-uniform-search",
                config,
                details,
            )?;
            norm_curves.push(Curve {
                file: "uniform_max_norm.csv".into(),
                using: "1:2".into(),
                title: "graded-uniform".into(),
                style: "lines",
            });
        }
        std::fs::write(
            dir.join("adaptive_max_norm.gp"),
            output::gnuplot_script("adaptive_max_norm.png", "t", "max |u|", "", &norm_curves),
        )?;
        std::fs::write(
            dir.join("adaptive_steps.gp"),
            output::gnuplot_script(
                "adaptive_steps.png",
                "t",
                "step size",
                "y",
                &[Curve {
                    file: "adaptive_steps.csv".into(),
                    using: "1:2".into(),
                    title: "tau".into(),
                    style: "points",
                }],
            ),
        )?;
        Ok(())
    }
}
