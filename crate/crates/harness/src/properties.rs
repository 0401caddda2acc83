//! Kernel property suite: positivity and monotonicity, lower bounds,
//! complementary kernels, the energy inequality, SOE certification and the
//! consistency scans.

use std::path::Path;

use fracwave::kernels::{
    check_kernel_properties, complementary_bounds, complementary_kernels, energy_inequality_gap,
    orthogonality_defect, KernelTable, SchemeKind,
};
use fracwave::mesh::{two_part_mesh, Tail};
use fracwave::verify::{consistency_scan, ConsistencyKind, ConsistencyScan};
use fracwave::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::GammaSpec;
use crate::output;
use crate::soe_cert::{certify_soe, SoeCertReport};
use crate::{HarnessError, Result};

/// Smoothness exponent of a scanned function, absolute or tied to `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    /// Only `"beta"` is accepted.
    Named(String),
}

impl SigmaSpec {
    pub fn resolve(&self, beta: f64) -> Result<f64> {
        match self {
            SigmaSpec::Value(s) => Ok(*s),
            SigmaSpec::Named(n) if n == "beta" => Ok(beta),
            SigmaSpec::Named(n) => Err(HarnessError::Config(format!("unknown sigma '{n}'"))),
        }
    }
}

/// Scan grading: `opt` resolves to `(2 - beta) / sigma`, raised to 1 when smaller.
pub fn scan_gamma(spec: GammaSpec, beta: f64, sigma: f64) -> f64 {
    match spec {
        GammaSpec::Value(g) => g,
        GammaSpec::Optimal(f) => (f * (2.0 - beta) / sigma).max(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyConfig {
    pub seed: u64,
    pub l1_meshes: usize,
    pub alikhanov_meshes: usize,
    pub max_ratio: f64,
    pub histories: usize,
    pub tolerance: f64,
    pub soe_betas: Vec<f64>,
    pub soe_dt: f64,
    pub soe_horizon: f64,
    pub soe_tol: f64,
    pub scans: bool,
    pub scan_betas: Vec<f64>,
    pub scan_sigmas: Vec<SigmaSpec>,
    pub scan_gammas: Vec<GammaSpec>,
    pub scan_ns: Vec<usize>,
    pub scan_band: f64,
    /// Negates coefficient `(n, j)` of the first L1 table before checking.
    pub inject_sign_flip: Option<(usize, usize)>,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            l1_meshes: 200,
            alikhanov_meshes: 200,
            max_ratio: 1.75,
            histories: 1000,
            tolerance: 1e-12,
            soe_betas: vec![0.55, 0.75, 0.95],
            soe_dt: 1e-3,
            soe_horizon: 10.0,
            soe_tol: 1e-12,
            scans: true,
            scan_betas: vec![0.6, 0.75],
            scan_sigmas: vec![SigmaSpec::Named("beta".into()), SigmaSpec::Value(1.5)],
            scan_gammas: vec![
                GammaSpec::Value(1.0),
                GammaSpec::Optimal(1.0),
                GammaSpec::Value(2.0),
            ],
            scan_ns: vec![128, 256, 512, 1024],
            scan_band: 0.2,
            inject_sign_flip: None,
        }
    }
}

/// Outcome of one check; `seed` rebuilds the case through [`l1_case`] or [`alikhanov_case`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub scheme: String,
    pub seed: Option<u64>,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub config: PropertyConfig,
    pub checks: Vec<CheckOutcome>,
    pub soe: Vec<SoeCertReport>,
    #[serde(skip)]
    pub scans: Vec<ConsistencyScan>,
}

impl SuiteReport {
    pub fn scan_passed(&self, scan: &ConsistencyScan) -> bool {
        scan.deviation() <= self.config.scan_band
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| {
                format!(
                    "{} ({}) seed {}: {}",
                    c.check,
                    c.scheme,
                    c.seed.map_or("-".into(), |s| s.to_string()),
                    c.detail
                )
            })
            .collect();
        out.extend(self.soe.iter().filter(|r| !r.passed).map(|r| {
            format!(
                "soe beta={}: {}",
                r.beta,
                r.message.clone().unwrap_or_else(|| format!(
                    "errors {:?} / {:?} above {}",
                    r.certified_error, r.dense_error, r.tol
                ))
            )
        }));
        out.extend(self.scans.iter().filter(|s| !self.scan_passed(s)).map(|s| {
            format!(
                "scan {} {} beta={} sigma={} gamma={}: rate {:.3} vs {:.3}",
                s.kind,
                s.scheme.name(),
                s.beta,
                s.sigma,
                s.gamma,
                s.rate,
                s.predicted
            )
        }));
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Count of passing and total checks per check name.
    pub fn summary(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        for c in &self.checks {
            let key = format!("{} ({})", c.check, c.scheme);
            match out.iter_mut().find(|e| e.0 == key) {
                Some(e) => {
                    e.1 += c.passed as usize;
                    e.2 += 1;
                }
                None => out.push((key, c.passed as usize, 1)),
            }
        }
        out
    }

    pub fn scans_csv(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.scans.iter().enumerate() {
            let csv = s.to_csv();
            if i == 0 {
                out.push_str(&csv);
            } else {
                out.extend(csv.lines().skip(1).map(|l| format!("{l}\n")));
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let config = serde_json::to_value(&self.config)?;
        let failures = self.failures();
        let details = json!({ "passed": failures.is_empty(), "failures": failures });
        output::write_csv_with_manifest(
            dir,
            "property_checks",
            &output::records_to_csv(&self.checks)?,
            "kernel-properties",
            config.clone(),
            details.clone(),
        )?;
        output::write_csv_with_manifest(
            dir,
            "soe_certification",
            &output::records_to_csv(&self.soe)?,
            "soe-certification",
            config.clone(),
            details.clone(),
        )?;
        if !self.scans.is_empty() {
            output::write_csv_with_manifest(
                dir,
                "consistency_scans",
                &self.scans_csv(),
                "consistency-scans",
                config,
                details,
            )?;
        }
        Ok(())
    }
}

/// Graded start plus random tail, the mesh family of the convergence tables.
pub fn l1_case(seed: u64) -> Result<(f64, Mesh)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = rng.gen_range(0.05..0.95);
    let gamma = rng.gen_range(1.0..4.0);
    let t0 = rng.gen_range(0.1..0.9);
    let n0 = rng.gen_range(2..32);
    let n1 = rng.gen_range(1..32);
    let mesh = two_part_mesh(t0, 1.0, n0, n1, gamma, Tail::Random { seed: rng.gen() })?;
    Ok((beta, mesh))
}

/// Random steps whose consecutive ratios `tau_k / tau_{k+1}` stay below `max_ratio`.
pub fn ratio_bounded_mesh(rng: &mut ChaCha8Rng, n: usize, max_ratio: f64) -> Result<Mesh> {
    let mut steps = vec![rng.gen_range(0.01..1.0f64)];
    for _ in 1..n {
        let prev = steps[steps.len() - 1];
        steps.push(prev / rng.gen_range(0.3..max_ratio));
    }
    let total: f64 = steps.iter().sum();
    let mut nodes = vec![0.0];
    for s in &steps {
        nodes.push(nodes[nodes.len() - 1] + s / total);
    }
    let last = nodes.len() - 1;
    nodes[last] = 1.0;
    Ok(Mesh::from_nodes(nodes, 1.0)?)
}

pub fn alikhanov_case(seed: u64, max_ratio: f64) -> Result<(f64, Mesh)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = rng.gen_range(0.05..0.95);
    let n = rng.gen_range(2..48);
    let mesh = ratio_bounded_mesh(&mut rng, n, max_ratio)?;
    Ok((beta, mesh))
}

fn outcome(
    check: &str,
    scheme: SchemeKind,
    seed: u64,
    passed: bool,
    value: f64,
    detail: String,
) -> CheckOutcome {
    CheckOutcome {
        check: check.into(),
        scheme: scheme.name().into(),
        seed: Some(seed),
        passed,
        value,
        detail,
    }
}

fn table_checks(
    scheme: SchemeKind,
    seed: u64,
    beta: f64,
    mesh: &Mesh,
    tol: f64,
    flip: Option<(usize, usize)>,
) -> Result<Vec<CheckOutcome>> {
    let mut table = KernelTable::build(mesh, beta, scheme)?;
    if let Some((n, j)) = flip {
        if n >= 1 && n <= table.len() && j < n {
            let c = &mut table.rows[n - 1].coeffs[j];
            *c = -*c;
        }
    }
    let report = check_kernel_properties(&table, mesh);
    let mut out = vec![
        outcome(
            "A1 positivity and monotonicity",
            scheme,
            seed,
            report.a1_holds(),
            report.first_violation.map_or(0.0, |_| 1.0),
            match report.first_violation {
                Some((n, j)) => format!(
                    "beta={beta}, N={}: first violation at row {n}, index {j}",
                    mesh.len()
                ),
                None => format!("beta={beta}, N={}", mesh.len()),
            },
        ),
        outcome(
            "A2 lower bound",
            scheme,
            seed,
            report.a2_holds,
            report.a2_min_ratio,
            format!(
                "min ratio {:.6} against 1/pi_A = {:.6}",
                report.a2_min_ratio,
                1.0 / report.pi_a
            ),
        ),
    ];
    if !report.a1_holds() {
        return Ok(out);
    }
    let comp = complementary_kernels(&table)?;
    let defect = orthogonality_defect(&table, &comp);
    out.push(outcome(
        "orthogonality",
        scheme,
        seed,
        defect <= tol,
        defect,
        format!("max |sum P A - 1| = {defect:.3e}"),
    ));
    let (local, global, min_p) = complementary_bounds(&table, &comp, mesh);
    out.push(outcome(
        "complementary bounds",
        scheme,
        seed,
        local <= 1.0 + tol && global <= 1.0 + tol && min_p >= -tol,
        local.max(global),
        format!("local {local:.6}, global {global:.6}, min P {min_p:.3e}"),
    ));
    Ok(out)
}

fn energy_check(scheme: SchemeKind, seed: u64, max_ratio: f64, tol: f64) -> Result<CheckOutcome> {
    let (beta, mesh) = alikhanov_case(seed, max_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let history: Vec<f64> = (0..=mesh.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let table = KernelTable::build(&mesh, beta, scheme)?;
    let theta = scheme.theta(beta);
    let mut worst = f64::INFINITY;
    let mut at = 0;
    for n in 1..=mesh.len() {
        let row = table.row(n);
        let gap = energy_inequality_gap(row, theta, &history[..=n])?;
        let scale: f64 = (1..=n)
            .map(|k| row.cell(k) * (history[k] * history[k] + history[k - 1] * history[k - 1]))
            .sum();
        let rel = gap / scale;
        if rel < worst {
            worst = rel;
            at = n;
        }
    }
    Ok(outcome(
        "energy inequality",
        scheme,
        seed,
        worst >= -tol,
        worst,
        format!(
            "beta={beta}, N={}: smallest relative gap {worst:.3e} at n={at}",
            mesh.len()
        ),
    ))
}

/// Runs every check of `cfg`; the report lists failures with their seeds.
pub fn run_property_suite(cfg: &PropertyConfig) -> Result<SuiteReport> {
    if !(cfg.max_ratio > 0.3) {
        return Err(HarnessError::Config(format!(
            "max_ratio {} must exceed 0.3",
            cfg.max_ratio
        )));
    }
    let tol = cfg.tolerance;
    let l1: Vec<Vec<CheckOutcome>> = (0..cfg.l1_meshes as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed + i;
            let (beta, mesh) = l1_case(seed)?;
            let flip = if i == 0 { cfg.inject_sign_flip } else { None };
            table_checks(SchemeKind::L1, seed, beta, &mesh, tol, flip)
        })
        .collect::<Result<_>>()?;
    let al: Vec<Vec<CheckOutcome>> = (0..cfg.alikhanov_meshes as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed + i;
            let (beta, mesh) = alikhanov_case(seed, cfg.max_ratio)?;
            table_checks(SchemeKind::Alikhanov, seed, beta, &mesh, tol, None)
        })
        .collect::<Result<_>>()?;
    let energy: Vec<CheckOutcome> = (0..cfg.histories as u64)
        .into_par_iter()
        .flat_map_iter(|i| {
            [SchemeKind::L1, SchemeKind::Alikhanov]
                .map(|s| energy_check(s, cfg.seed + i, cfg.max_ratio, tol))
        })
        .collect::<Result<_>>()?;
    let mut checks: Vec<CheckOutcome> = l1.into_iter().chain(al).flatten().collect();
    checks.extend(energy);

    let soe = cfg
        .soe_betas
        .iter()
        .map(|&b| certify_soe(b, cfg.soe_dt, cfg.soe_horizon, cfg.soe_tol))
        .collect();

    let mut scans = Vec::new();
    if cfg.scans {
        let mut cells = Vec::new();
        for &beta in &cfg.scan_betas {
            for s in &cfg.scan_sigmas {
                let sigma = s.resolve(beta)?;
                for &g in &cfg.scan_gammas {
                    let gamma = scan_gamma(g, beta, sigma);
                    for (kind, scheme) in scan_kinds() {
                        let cell = (kind, scheme, beta, sigma, gamma);
                        if !cells.contains(&cell) {
                            cells.push(cell);
                        }
                    }
                }
            }
        }
        scans = cells
            .par_iter()
            .map(|&(kind, scheme, beta, sigma, gamma)| {
                consistency_scan(kind, scheme, beta, sigma, gamma, &cfg.scan_ns)
                    .map_err(HarnessError::from)
            })
            .collect::<Result<_>>()?;
    }
    Ok(SuiteReport {
        config: cfg.clone(),
        checks,
        soe,
        scans,
    })
}

/// The five scanned remainders.
pub fn scan_kinds() -> [(ConsistencyKind, SchemeKind); 5] {
    [
        (ConsistencyKind::Caputo, SchemeKind::L1),
        (ConsistencyKind::Caputo, SchemeKind::Alikhanov),
        (ConsistencyKind::OffsetInterpolation, SchemeKind::Alikhanov),
        (ConsistencyKind::Linearization, SchemeKind::L1),
        (ConsistencyKind::Linearization, SchemeKind::Alikhanov),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PropertyConfig {
        PropertyConfig {
            l1_meshes: 4,
            alikhanov_meshes: 4,
            histories: 4,
            soe_betas: vec![],
            scans: false,
            ..Default::default()
        }
    }

    #[test]
    fn cases_are_reproducible_from_seed() {
        let (b1, m1) = alikhanov_case(7, 1.75).unwrap();
        let (b2, m2) = alikhanov_case(7, 1.75).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(m1.nodes(), m2.nodes());
        assert!(m1.ratios().iter().all(|&r| r < 1.75));
    }

    #[test]
    fn small_suite_passes() {
        let report = run_property_suite(&small()).unwrap();
        assert!(report.passed(), "{:?}", report.failures());
    }

    #[test]
    fn sign_flip_is_reported_with_location_and_seed() {
        let cfg = PropertyConfig {
            inject_sign_flip: Some((2, 1)),
            ..small()
        };
        let report = run_property_suite(&cfg).unwrap();
        let failures = report.failures();
        let a1: Vec<&String> = failures.iter().filter(|f| f.contains("A1")).collect();
        assert_eq!(a1.len(), 1, "{failures:?}");
        assert!(a1[0].contains("seed 2024"));
        assert!(a1[0].contains("row 2, index 1"));
        assert!(failures.iter().all(|f| f.contains("seed 2024")));
    }

    #[test]
    fn scan_grid_gamma_resolution() {
        assert!((scan_gamma(GammaSpec::Optimal(1.0), 0.6, 0.6) - 1.4 / 0.6).abs() < 1e-12);
        assert_eq!(scan_gamma(GammaSpec::Optimal(1.0), 0.6, 1.5), 1.0);
        assert!(SigmaSpec::Named("alpha".into()).resolve(0.5).is_err());
    }

    #[test]
    fn empty_config_uses_defaults() {
        let cfg: PropertyConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PropertyConfig::default());
        let cfg: PropertyConfig =
            serde_json::from_str(r#"{"scan_sigmas": ["beta", 1.5]}"#).unwrap();
        assert_eq!(cfg.scan_sigmas, PropertyConfig::default().scan_sigmas);
    }
}
