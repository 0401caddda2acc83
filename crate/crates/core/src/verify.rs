//! Reference values and consistency scans for the discrete Caputo operators.
//!
//! [`consistency_scan`] measures how fast the complementary-kernel weighted
//! truncation sums `max_n sum_j P^(n)_{n-j} |R^{j-theta}|` decay on graded
//! meshes for the monomial `g(t) = t^sigma`, and compares the fitted exponent
//! with the predicted one.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::{row_from_nodes, KernelTable, SchemeKind};
use crate::mesh::{graded_mesh, TemporalMesh};
use crate::scalar::Scalar;

/// Caputo derivative of order `beta` of `t^sigma`:
/// `Gamma(sigma+1)/Gamma(sigma+1-beta) t^(sigma-beta)`, and zero for `sigma = 0`.
pub fn exact_caputo_monomial<S: Scalar>(beta: S, sigma: S, t: S) -> Result<S> {
    if !(beta > S::zero() && beta < S::one()) {
        return Err(Error::InvalidArgument(format!(
            "order must lie in (0,1), got {beta}"
        )));
    }
    if sigma < S::zero() {
        return Err(Error::InvalidArgument(format!(
            "exponent must be nonnegative, got {sigma}"
        )));
    }
    if !(t > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "time must be positive, got {t}"
        )));
    }
    if sigma == S::zero() {
        return Ok(S::zero());
    }
    let one = S::one();
    let ratio =
        S::of(libm::lgamma(sigma.as_f64() + 1.0) - libm::lgamma((sigma + one - beta).as_f64()));
    Ok(ratio.exp() * t.powf(sigma - beta))
}

/// `(D_tau^beta g)^{n-theta}` for `n = 1..N`, assembling every row afresh and
/// summing the convolution in `O(N^2)`.
pub fn direct_convolution_caputo<S: Scalar>(
    mesh: &TemporalMesh<S>,
    beta: S,
    scheme: SchemeKind,
    history: &[S],
) -> Result<Vec<S>> {
    if history.len() != mesh.len() + 1 {
        return Err(Error::LengthMismatch {
            expected: mesh.len(),
            got: history.len(),
        });
    }
    if !(beta > S::zero() && beta < S::one()) {
        return Err(Error::InvalidArgument(format!(
            "order must lie in (0,1), got {beta}"
        )));
    }
    let nodes = mesh.nodes();
    let mut out = Vec::with_capacity(mesh.len());
    for n in 1..=mesh.len() {
        let row = row_from_nodes(scheme, &nodes[..=n], beta);
        let mut acc = S::zero();
        for k in 1..=n {
            acc += row.coeffs[n - k] * (history[k] - history[k - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Which truncation error is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConsistencyKind {
    /// `D^beta g(t_{n-theta}) - (D_tau^beta g)^{n-theta}`.
    Caputo,
    /// `g(t_{n-theta}) - ((1-theta) g^n + theta g^{n-1})`; Alikhanov offset only.
    OffsetInterpolation,
    /// Remainder of the one-step linearisation of `f(u) = u^3` along `u = 1 + t^sigma`.
    Linearization,
}

impl ConsistencyKind {
    pub fn name(self) -> &'static str {
        match self {
            ConsistencyKind::Caputo => "caputo",
            ConsistencyKind::OffsetInterpolation => "offset",
            ConsistencyKind::Linearization => "linearization",
        }
    }

    /// Decay exponent of the leading terms of the bound for the weighted sum.
    ///
    /// The initial-step terms `tau_1^(sigma+beta)` of the offset and
    /// linearisation bounds and the `tau^(3-beta)` interior term of the
    /// Alikhanov bound are kept, so the exponent is attained on graded meshes.
    pub fn predicted_rate(self, scheme: SchemeKind, beta: f64, sigma: f64, gamma: f64) -> f64 {
        let gs = gamma * sigma;
        match (self, scheme) {
            (ConsistencyKind::Caputo, SchemeKind::L1) => gs.min(2.0 - beta),
            (ConsistencyKind::Caputo, SchemeKind::Alikhanov) => gs.min(3.0 - beta),
            (ConsistencyKind::OffsetInterpolation, _) => (gamma * (sigma + beta)).min(2.0),
            (ConsistencyKind::Linearization, SchemeKind::L1) => {
                (gamma * (2.0 * sigma + beta)).min(2.0)
            }
            (ConsistencyKind::Linearization, SchemeKind::Alikhanov) => {
                (gamma * (sigma + beta)).min(2.0)
            }
        }
    }

    /// Coarser exponent obtained after bounding every term by `tau^(gamma sigma)`
    /// or the scheme order; a lower bound for [`Self::predicted_rate`].
    pub fn simplified_rate(self, scheme: SchemeKind, beta: f64, sigma: f64, gamma: f64) -> f64 {
        let gs = gamma * sigma;
        match (self, scheme) {
            (ConsistencyKind::Caputo, SchemeKind::L1) => gs.min(2.0 - beta),
            (ConsistencyKind::Caputo, SchemeKind::Alikhanov) => gs.min(2.0),
            (ConsistencyKind::OffsetInterpolation, _) => gs.min(2.0),
            (ConsistencyKind::Linearization, SchemeKind::L1) => (2.0 * gs).min(2.0),
            (ConsistencyKind::Linearization, SchemeKind::Alikhanov) => gs.min(2.0),
        }
    }
}

impl fmt::Display for ConsistencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Weighted truncation sums on a family of graded meshes and their fitted decay.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyScan {
    pub kind: ConsistencyKind,
    pub scheme: SchemeKind,
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    /// `(N, max_n sum_j P^(n)_{n-j} |R^{j-theta}|)`.
    pub sums: Vec<(usize, f64)>,
    pub rate: f64,
    pub predicted: f64,
    pub simplified: f64,
}

impl ConsistencyScan {
    pub fn deviation(&self) -> f64 {
        (self.rate - self.predicted).abs()
    }

    /// `kind,scheme,beta,sigma,gamma,N,error_sum,rate,predicted,simplified` rows.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("kind,scheme,beta,sigma,gamma,N,error_sum,rate,predicted,simplified\n");
        for &(n, e) in &self.sums {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.10e},{:.6},{:.6},{:.6}\n",
                self.kind,
                self.scheme.name(),
                self.beta,
                self.sigma,
                self.gamma,
                n,
                e,
                self.rate,
                self.predicted,
                self.simplified
            ));
        }
        out
    }
}

/// Least-squares slope of `-log e` against `log N` over the last three doublings.
pub fn fit_decay_rate(sums: &[(usize, f64)]) -> Result<f64> {
    if sums.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least three doublings, got {} sizes",
            sums.len()
        )));
    }
    let tail = &sums[sums.len() - 4..];
    for w in tail.windows(2) {
        if w[1].0 != 2 * w[0].0 {
            return Err(Error::InvalidArgument(format!(
                "sizes {} and {} are not a doubling",
                w[0].0, w[1].0
            )));
        }
    }
    if tail.iter().any(|&(_, e)| !(e > 0.0)) {
        return Err(Error::InvalidArgument(
            "error sums must be positive to fit a rate".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(-sxy / sxx)
}

fn local_errors<S: Scalar>(
    kind: ConsistencyKind,
    table: &KernelTable<S>,
    sigma: S,
    mesh: &TemporalMesh<S>,
) -> Result<Vec<S>> {
    let one = S::one();
    let beta = table.beta;
    let theta = table.scheme.theta(beta);
    let nodes = mesh.nodes();
    let g: Vec<S> = nodes.iter().map(|&t| t.powf(sigma)).collect();
    let offset = |j: usize| (one - theta) * nodes[j] + theta * nodes[j - 1];
    match kind {
        ConsistencyKind::Caputo => (1..=mesh.len())
            .map(|j| {
                let row = table.row(j);
                let discrete: S = (1..=j).map(|k| row.cell(k) * (g[k] - g[k - 1])).sum();
                Ok(exact_caputo_monomial(beta, sigma, offset(j))? - discrete)
            })
            .collect(),
        ConsistencyKind::OffsetInterpolation => Ok((1..=mesh.len())
            .map(|j| offset(j).powf(sigma) - ((one - theta) * g[j] + theta * g[j - 1]))
            .collect()),
        ConsistencyKind::Linearization => {
            let three = S::of(3.0);
            let eta = |v: S| one + v;
            Ok((1..=mesh.len())
                .map(|j| {
                    let exact = eta(offset(j).powf(sigma));
                    let prev = eta(g[j - 1]);
                    let linear = prev * prev * prev
                        + (one - theta) * three * prev * prev * (g[j] - g[j - 1]);
                    exact * exact * exact - linear
                })
                .collect())
        }
    }
}

/// `Q^n = sum_j P^(n)_{n-j} r_j` for `n = 1..N`.
///
/// Because the complementary kernels invert the discrete Caputo operator,
/// `Q` is the solution of `sum_k A^(n)_{n-k} (Q^k - Q^{k-1}) = r_n`, `Q^0 = 0`,
/// which costs `O(N^2)` instead of forming every complementary row.
pub fn complementary_weighted_sums<S: Scalar>(table: &KernelTable<S>, r: &[S]) -> Result<Vec<S>> {
    if r.len() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            got: r.len(),
        });
    }
    let mut q = vec![S::zero(); table.len() + 1];
    for n in 1..=table.len() {
        let row = table.row(n);
        if !(row.leading() > S::zero()) {
            return Err(Error::NonPositiveKernel { step: n });
        }
        let mut known = S::zero();
        for k in 1..n {
            known += row.cell(k) * (q[k] - q[k - 1]);
        }
        q[n] = q[n - 1] + (r[n - 1] - known) / row.leading();
    }
    q.remove(0);
    Ok(q)
}

/// `max_{1<=n<=N} sum_j P^(n)_{n-j} |R^{j-theta}|` on one mesh.
pub fn weighted_error_sum<S: Scalar>(
    kind: ConsistencyKind,
    scheme: SchemeKind,
    beta: S,
    sigma: S,
    mesh: &TemporalMesh<S>,
) -> Result<S> {
    if kind == ConsistencyKind::OffsetInterpolation && scheme == SchemeKind::L1 {
        return Err(Error::InvalidArgument(
            "the offset interpolation error vanishes for the L1 scheme".into(),
        ));
    }
    if !(sigma > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "exponent must be positive, got {sigma}"
        )));
    }
    let table = KernelTable::build(mesh, beta, scheme)?;
    let errors: Vec<S> = local_errors(kind, &table, sigma, mesh)?
        .iter()
        .map(|e| e.abs())
        .collect();
    let sums = complementary_weighted_sums(&table, &errors)?;
    Ok(sums.into_iter().fold(S::zero(), S::max))
}

/// Weighted truncation sums for `g = t^sigma` on graded meshes `t_k = (k/N)^gamma`
/// over `n_list`, with the decay exponent fitted over the last three doublings.
pub fn consistency_scan<S: Scalar>(
    kind: ConsistencyKind,
    scheme: SchemeKind,
    beta: S,
    sigma: S,
    gamma: S,
    n_list: &[usize],
) -> Result<ConsistencyScan> {
    let sums = n_list
        .iter()
        .map(|&n| {
            let mesh = graded_mesh(S::one(), n, gamma)?;
            Ok((
                n,
                weighted_error_sum(kind, scheme, beta, sigma, &mesh)?.as_f64(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let rate = fit_decay_rate(&sums)?;
    let (b, s, g) = (beta.as_f64(), sigma.as_f64(), gamma.as_f64());
    Ok(ConsistencyScan {
        kind,
        scheme,
        beta: b,
        sigma: s,
        gamma: g,
        sums,
        rate,
        predicted: kind.predicted_rate(scheme, b, s, g),
        simplified: kind.simplified_rate(scheme, b, s, g),
    })
}
