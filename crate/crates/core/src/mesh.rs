//! Nonuniform temporal meshes: graded meshes, graded-plus-tail meshes and
//! diagnostics for the step-size growth conditions the schemes rely on.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest accepted random tail fraction; smaller draws are redrawn.
pub const MIN_TAIL_FRACTION: f64 = 1e-6;

/// Largest step-size ratio `tau_k / tau_{k+1}` covered by the Alikhanov kernel theory.
pub const ALIKHANOV_MAX_RATIO: f64 = 1.75;

/// Time nodes `0 = t_0 < t_1 < ... < t_N` with cached steps and ratios.
///
/// Steps and ratios use the 1-based numbering of the nodes: `step(k) = t_k - t_{k-1}`
/// for `1 <= k <= N` and `ratio(k) = step(k) / step(k+1)` for `1 <= k <= N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMesh<S> {
    nodes: Vec<S>,
    steps: Vec<S>,
    ratios: Vec<S>,
    gamma: S,
}

/// How the tail `(T0, T]` of a two-part mesh is subdivided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Uniform,
    /// Normalised uniform(0,1) fractions drawn from a seeded ChaCha8 stream.
    Random {
        seed: u64,
    },
}

/// Fitted constants of the mesh assumption; see [`check_mesh_assumption`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaReport {
    /// `max_k tau_k / (tau * min(1, t_k^(1 - 1/gamma)))`
    pub c_step: f64,
    /// `max_{k>=2} t_k / t_{k-1}`
    pub c_node: f64,
    /// `max_{k>=2} (tau_k t_{k-1}) / (t_k tau_{k-1})`
    pub c_relative: f64,
    /// Largest ratio `tau_k / tau_{k+1}` (0 for a single-step mesh).
    pub max_ratio: f64,
    /// Whether `max_ratio <= 7/4`.
    pub ratio_within_alikhanov_bound: bool,
}

impl<S: Scalar> TemporalMesh<S> {
    /// Builds a mesh from explicit nodes; the first node must be 0 and nodes must increase.
    pub fn from_nodes(nodes: Vec<S>, gamma: S) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidMesh("a mesh needs at least two nodes".into()));
        }
        if nodes[0] != S::zero() {
            return Err(Error::InvalidMesh(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        let steps: Vec<S> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(k) = steps.iter().position(|&s| !(s > S::zero())) {
            return Err(Error::InvalidMesh(format!(
                "nodes must be strictly increasing (step {} is {})",
                k + 1,
                steps[k]
            )));
        }
        let ratios = steps.windows(2).map(|w| w[0] / w[1]).collect();
        Ok(Self {
            nodes,
            steps,
            ratios,
            gamma,
        })
    }

    /// Uniform mesh with `n` steps on `[0, horizon]`.
    pub fn uniform(horizon: S, n: usize) -> Result<Self> {
        graded_mesh(horizon, n, S::one())
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    /// `tau_1, ..., tau_N`, stored at indices `0..N`.
    pub fn steps(&self) -> &[S] {
        &self.steps
    }

    /// `rho_1, ..., rho_{N-1}`, stored at indices `0..N-1`.
    pub fn ratios(&self) -> &[S] {
        &self.ratios
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn node(&self, k: usize) -> S {
        self.nodes[k]
    }

    /// `tau_k` for `1 <= k <= N`.
    pub fn step(&self, k: usize) -> S {
        self.steps[k - 1]
    }

    /// `rho_k = tau_k / tau_{k+1}` for `1 <= k <= N-1`.
    pub fn ratio(&self, k: usize) -> S {
        self.ratios[k - 1]
    }

    pub fn horizon(&self) -> S {
        *self.nodes.last().expect("mesh has nodes")
    }

    pub fn max_step(&self) -> S {
        self.steps.iter().copied().fold(S::zero(), S::max)
    }

    pub fn min_step(&self) -> S {
        self.steps.iter().copied().fold(S::infinity(), S::min)
    }

    /// One node per line, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.nodes.len() * 24);
        for t in &self.nodes {
            let _ = writeln!(out, "{:.17e}", t.as_f64());
        }
        out
    }

    /// Parses the format written by [`TemporalMesh::to_csv`]; blank lines are ignored.
    pub fn from_csv(text: &str, gamma: S) -> Result<Self> {
        let nodes = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map(S::of)
                    .map_err(|e| Error::InvalidMesh(format!("bad node '{l}': {e}")))
            })
            .collect::<Result<Vec<S>>>()?;
        Self::from_nodes(nodes, gamma)
    }
}

/// Graded mesh `t_k = horizon * (k/n)^gamma`; the last node is exactly `horizon`.
pub fn graded_mesh<S: Scalar>(horizon: S, n: usize, gamma: S) -> Result<TemporalMesh<S>> {
    if n == 0 {
        return Err(Error::InvalidMesh(
            "number of steps must be positive".into(),
        ));
    }
    if !(gamma >= S::one()) {
        return Err(Error::InvalidMesh(format!(
            "grading parameter must be >= 1, got {gamma}"
        )));
    }
    if !(horizon > S::zero()) {
        return Err(Error::InvalidMesh(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let nn = S::of_usize(n);
    let mut nodes: Vec<S> = (0..=n)
        .map(|k| horizon * (S::of_usize(k) / nn).powf(gamma))
        .collect();
    nodes[n] = horizon;
    TemporalMesh::from_nodes(nodes, gamma)
}

/// Graded part on `[0, t0]` with `n0` steps followed by `n1` tail steps on `(t0, horizon]`.
///
/// `t0 == horizon` is accepted only together with `n1 == 0`, which reduces to
/// [`graded_mesh`]; this is what the split rule produces for `gamma = 1`.
pub fn two_part_mesh<S: Scalar>(
    t0: S,
    horizon: S,
    n0: usize,
    n1: usize,
    gamma: S,
    tail: Tail,
) -> Result<TemporalMesh<S>> {
    if !(t0 > S::zero()) {
        return Err(Error::InvalidMesh(format!(
            "split point must be positive, got {t0}"
        )));
    }
    if t0 > horizon || (t0 == horizon && n1 > 0) || (t0 < horizon && n1 == 0) {
        return Err(Error::InvalidMesh(format!(
            "inconsistent split: t0 = {t0}, T = {horizon}, tail steps = {n1}"
        )));
    }
    let graded = graded_mesh(t0, n0, gamma)?;
    if n1 == 0 {
        return Ok(graded);
    }
    let mut nodes = graded.nodes;
    let span = horizon - t0;
    match tail {
        Tail::Uniform => {
            let h = span / S::of_usize(n1);
            nodes.extend((1..=n1).map(|k| t0 + h * S::of_usize(k)));
        }
        Tail::Random { seed } => {
            let fractions = random_fractions(seed, n1);
            let total: f64 = fractions.iter().sum();
            let mut acc = 0.0;
            for eps in &fractions {
                acc += eps;
                nodes.push(t0 + span * S::of(acc / total));
            }
        }
    }
    nodes[n0 + n1] = horizon;
    TemporalMesh::from_nodes(nodes, gamma)
}

fn random_fractions(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let eps: f64 = rng.gen();
            if eps >= MIN_TAIL_FRACTION {
                break eps;
            }
        })
        .collect()
}

/// Split used for the graded-plus-random-tail meshes: `T0 = min(1/gamma, T)`,
/// `N0 = ceil(N / (T + 1 - 1/gamma))` (capped at `N`), `N1 = N - N0`.
pub fn split_rule(horizon: f64, n: usize, gamma: f64) -> (f64, usize, usize) {
    let t0 = (1.0 / gamma).min(horizon);
    let denom = horizon + 1.0 - 1.0 / gamma;
    let mut n0 = ((n as f64) / denom).ceil() as usize;
    n0 = n0.clamp(1, n);
    if t0 >= horizon {
        n0 = n;
    } else if n0 == n && n > 1 {
        n0 = n - 1;
    }
    (t0, n0, n - n0)
}

/// Scans a mesh for the smallest constants satisfying the mesh assumption.
pub fn check_mesh_assumption<S: Scalar>(mesh: &TemporalMesh<S>, gamma: S) -> MaReport {
    let tau = mesh.max_step().as_f64();
    let g = gamma.as_f64();
    let nodes: Vec<f64> = mesh.nodes().iter().map(|t| t.as_f64()).collect();
    let steps: Vec<f64> = mesh.steps().iter().map(|t| t.as_f64()).collect();
    let mut c_step = 0.0f64;
    let mut c_node = 0.0f64;
    let mut c_relative = 0.0f64;
    for k in 1..nodes.len() {
        let tk = nodes[k];
        let tau_k = steps[k - 1];
        let bound = tau * 1f64.min(tk.powf(1.0 - 1.0 / g));
        c_step = c_step.max(tau_k / bound);
        if k >= 2 {
            let prev = nodes[k - 1];
            c_node = c_node.max(tk / prev);
            c_relative = c_relative.max((tau_k * prev) / (tk * steps[k - 2]));
        }
    }
    let max_ratio = mesh.ratios().iter().map(|r| r.as_f64()).fold(0.0, f64::max);
    MaReport {
        c_step,
        c_node,
        c_relative,
        max_ratio,
        ratio_within_alikhanov_bound: max_ratio <= ALIKHANOV_MAX_RATIO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_nodes_follow_power_law() {
        let m = graded_mesh(1.0f64, 4, 2.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0]);
        let u = graded_mesh(1.0f64, 4, 1.0).unwrap();
        assert_eq!(u.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn graded_rejects_bad_parameters() {
        assert!(graded_mesh(1.0f64, 0, 2.0).is_err());
        assert!(graded_mesh(1.0f64, 4, 0.5).is_err());
    }

    #[test]
    fn two_part_uniform_tail() {
        let m = two_part_mesh(0.5f64, 1.0, 2, 2, 2.0, Tail::Uniform).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.125, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn random_tail_is_deterministic_and_ends_at_horizon() {
        let a = two_part_mesh(0.4f64, 1.0, 10, 7, 2.5, Tail::Random { seed: 7 }).unwrap();
        let b = two_part_mesh(0.4f64, 1.0, 10, 7, 2.5, Tail::Random { seed: 7 }).unwrap();
        let c = two_part_mesh(0.4f64, 1.0, 10, 7, 2.5, Tail::Random { seed: 8 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 17);
        assert_eq!(a.horizon(), 1.0);
        assert_eq!(a.node(10), 0.4);
    }

    #[test]
    fn split_rule_matches_protocol() {
        let gamma = 2.5 / 1.5;
        let (t0, n0, n1) = split_rule(1.0, 128, gamma);
        assert!((t0 - 0.6).abs() < 1e-15);
        assert_eq!(n0, (128.0f64 / (2.0 - 0.6)).ceil() as usize);
        assert_eq!(n0 + n1, 128);
        assert_eq!(split_rule(1.0, 64, 1.0), (1.0, 64, 0));
    }

    #[test]
    fn ma_report_on_uniform_mesh() {
        let m = graded_mesh(1.0f64, 4, 1.0).unwrap();
        let r = check_mesh_assumption(&m, 1.0);
        assert!((r.c_node - 2.0).abs() < 1e-15);
        assert!((r.max_ratio - 1.0).abs() < 1e-15);
        assert!(r.ratio_within_alikhanov_bound);
    }

    #[test]
    fn ma_report_flags_large_ratio() {
        let m = TemporalMesh::from_nodes(vec![0.0f64, 1.0, 1.1, 1.2], 1.0).unwrap();
        let r = check_mesh_assumption(&m, 1.0);
        assert!((r.max_ratio - 10.0).abs() < 1e-9);
        assert!(!r.ratio_within_alikhanov_bound);
    }

    #[test]
    fn graded_mesh_constants_are_finite() {
        let m = graded_mesh(1.0f64, 64, 2.0).unwrap();
        let r = check_mesh_assumption(&m, 2.0);
        assert!(r.c_step.is_finite() && r.c_node.is_finite() && r.c_relative.is_finite());
        assert!(r.ratio_within_alikhanov_bound);
    }

    #[test]
    fn csv_round_trip() {
        let m = two_part_mesh(0.3f64, 1.0, 5, 5, 3.0, Tail::Random { seed: 1 }).unwrap();
        let back = TemporalMesh::from_csv(&m.to_csv(), 3.0).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_non_increasing_nodes() {
        assert!(TemporalMesh::from_nodes(vec![0.0f64, 0.5, 0.5], 1.0).is_err());
        assert!(TemporalMesh::from_nodes(vec![0.1f64, 0.5], 1.0).is_err());
    }
}
