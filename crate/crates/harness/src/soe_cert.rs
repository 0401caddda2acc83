//! Certification reports for the sum-of-exponentials kernel.

use fracwave::mesh::{split_rule, two_part_mesh};
use fracwave::problems::example1;
use fracwave::stepper::{KernelMode, SforSolver, SolverConfig};
use fracwave::{build_soe, SchemeKind, Tail};
use serde::Serialize;

use crate::output;
use crate::Result;

/// Points of the independent dense sweep, on top of the sweep done while building.
pub const DENSE_SWEEP_POINTS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoeCertReport {
    pub beta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub tol: f64,
    pub modes: Option<usize>,
    /// Error found by the construction's own sweep.
    pub certified_error: Option<f64>,
    pub dense_error: Option<f64>,
    pub passed: bool,
    pub message: Option<String>,
}

pub fn certify_soe(beta: f64, dt: f64, horizon: f64, tol: f64) -> SoeCertReport {
    match build_soe(beta, dt, horizon, tol) {
        Ok(soe) => {
            let dense = soe.sweep(DENSE_SWEEP_POINTS);
            SoeCertReport {
                beta,
                dt,
                horizon,
                tol,
                modes: Some(soe.modes()),
                certified_error: Some(soe.certified_error),
                dense_error: Some(dense),
                passed: soe.certified_error <= tol && dense <= tol,
                message: None,
            }
        }
        Err(e) => SoeCertReport {
            beta,
            dt,
            horizon,
            tol,
            modes: None,
            certified_error: None,
            dense_error: None,
            passed: false,
            message: Some(e.to_string()),
        },
    }
}

/// Largest nodal difference between fast and direct runs of the manufactured problem
/// on a graded-plus-random-tail mesh with `n` steps and `m` cells per direction.
pub fn fast_direct_deviation(
    alpha: f64,
    scheme: SchemeKind,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let p = example1(alpha)?;
    let gamma = p.optimal_gamma(scheme);
    let (t0, n0, n1) = split_rule(p.horizon, n, gamma);
    let mesh = two_part_mesh(t0, p.horizon, n0, n1, gamma, Tail::Random { seed })?;
    let mut direct = SforSolver::new(
        p.clone(),
        m,
        SolverConfig::for_mesh(scheme, KernelMode::Direct, &mesh),
    )?;
    let mut fast = SforSolver::new(
        p,
        m,
        SolverConfig::for_mesh(scheme, KernelMode::fast(), &mesh),
    )?;
    let mut worst = 0.0f64;
    for k in 1..=mesh.len() {
        let a = direct.trial_until(mesh.node(k))?;
        let b = fast.trial_until(mesh.node(k))?;
        direct.commit(&a)?;
        fast.commit(&b)?;
        let diff =
            a.u.data
                .iter()
                .zip(&b.u.data)
                .fold(0.0f64, |w, (x, y)| w.max((x - y).abs()));
        worst = worst.max(diff);
    }
    Ok(worst)
}

pub fn reports_to_csv(reports: &[SoeCertReport]) -> Result<String> {
    output::records_to_csv(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_input_is_a_failed_report() {
        let r = certify_soe(1.5, 1e-3, 10.0, 1e-12);
        assert!(!r.passed);
        assert!(r.message.unwrap().contains("beta"));
    }

    #[test]
    fn moderate_tolerance_certifies() {
        let r = certify_soe(0.75, 1e-2, 1.0, 1e-8);
        assert!(r.passed, "{r:?}");
        assert!(r.modes.unwrap() > 0);
    }
}
