//! Discrete Caputo convolution kernels of the nonuniform L1 and Alikhanov
//! formulas, their complementary kernels, and property diagnostics.
//!
//! Every cell integral is evaluated from closed-form antiderivatives of
//! `x^(-beta)` and `x^(-beta) (c - x)`. Differences of nearby powers are
//! formed through `expm1`/`ln_1p` and the first-moment integral switches to a
//! binomial series on cells that are short relative to their distance from the
//! evaluation point, so far-history coefficients keep full relative accuracy.

use crate::error::{Error, Result};
use crate::mesh::{TemporalMesh, ALIKHANOV_MAX_RATIO};
use crate::scalar::{diff_pow, rl_kernel, Scalar};

/// Which discrete Caputo formula is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Piecewise-linear interpolant, evaluated at `t_n` (`theta = 0`).
    L1,
    /// Quadratic interpolant evaluated at the offset point `t_{n-theta}`, `theta = beta/2`.
    Alikhanov,
}

impl SchemeKind {
    /// Offset `theta` for a derivative of order `beta`.
    pub fn theta<S: Scalar>(self, beta: S) -> S {
        match self {
            SchemeKind::L1 => S::zero(),
            SchemeKind::Alikhanov => beta / S::of(2.0),
        }
    }

    /// Constant `pi_A` of the kernel lower bound (1 for L1, 11/4 for Alikhanov).
    pub fn pi_a(self) -> f64 {
        match self {
            SchemeKind::L1 => 1.0,
            SchemeKind::Alikhanov => 11.0 / 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::L1 => "l1",
            SchemeKind::Alikhanov => "alikhanov",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(SchemeKind::L1),
            "alikhanov" | "l2-1sigma" => Ok(SchemeKind::Alikhanov),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Coefficients `A^(n)_j`, `j = 0..n-1`, of one discrete Caputo operator.
///
/// `coeffs[j]` multiplies the increment `g^{n-j} - g^{n-j-1}`, i.e. the
/// coefficient of cell `k` is `coeffs[n - k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow<S> {
    pub n: usize,
    pub coeffs: Vec<S>,
}

impl<S: Scalar> KernelRow<S> {
    /// `A^(n)_0`, the coefficient of the newest increment.
    pub fn leading(&self) -> S {
        self.coeffs[0]
    }

    /// Coefficient of cell `k` (`1 <= k <= n`).
    pub fn cell(&self, k: usize) -> S {
        self.coeffs[self.n - k]
    }
}

/// `(1/len) * int_lo^{lo+len} omega_{1-beta}(x) dx` for `lo >= 0`.
pub(crate) fn cell_mean<S: Scalar>(lo: S, len: S, beta: S) -> S {
    let one = S::one();
    diff_pow(lo, len, one - beta) / (len * (S::of(2.0) - beta).tgamma())
}

/// `int_{c-h}^{c+h} x^(-beta) (c - x) dx` for `0 <= h <= c`.
pub(crate) fn first_moment<S: Scalar>(c: S, h: S, beta: S) -> S {
    let one = S::one();
    let two = S::of(2.0);
    let r = h / c;
    if r < S::of(0.25) {
        // -(c^(2-beta)) * sum_{j odd} binom(-beta, j) * 2 r^(j+2) / (j+2)
        let mut binom = one;
        let mut rpow = r * r;
        let mut sum = S::zero();
        for j in 1..80usize {
            let jj = S::of_usize(j);
            binom = binom * (-beta - jj + one) / jj;
            rpow *= r;
            if j % 2 == 1 {
                let term = binom * two * rpow / (jj + two);
                sum += term;
                if term.abs() <= S::epsilon() * S::of(1e-3) * sum.abs() {
                    break;
                }
            }
        }
        -c.powf(two - beta) * sum
    } else {
        let lo = c - h;
        let p1 = one - beta;
        let p2 = two - beta;
        c * diff_pow(lo, two * h, p1) / p1 - diff_pow(lo, two * h, p2) / p2
    }
}

/// L1 coefficients of step `n` from the nodes `t_0..t_n` (`nodes.len() == n + 1`).
pub fn l1_row_from_nodes<S: Scalar>(nodes: &[S], beta: S) -> KernelRow<S> {
    let n = nodes.len() - 1;
    let tn = nodes[n];
    let coeffs = (0..n)
        .map(|j| {
            let k = n - j;
            let tau = nodes[k] - nodes[k - 1];
            cell_mean(tn - nodes[k], tau, beta)
        })
        .collect();
    KernelRow { n, coeffs }
}

/// Raw Alikhanov integrals of step `n`: `(a_0..a_{n-1}, b_1..b_{n-1})`, `b` indexed
/// so that `b[j-1] = b^(n)_j`.
pub(crate) fn alikhanov_parts<S: Scalar>(nodes: &[S], beta: S) -> (Vec<S>, Vec<S>) {
    let n = nodes.len() - 1;
    let one = S::one();
    let two = S::of(2.0);
    let theta = beta / two;
    let tau_n = nodes[n] - nodes[n - 1];
    let offset = (one - theta) * tau_n; // t_{n-theta} - t_{n-1}
    let gamma_1mb = (one - beta).tgamma();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n.saturating_sub(1));
    a.push(offset.powf(one - beta) / (tau_n * (two - beta).tgamma()));
    for j in 1..n {
        let k = n - j;
        let tau_k = nodes[k] - nodes[k - 1];
        let tau_next = nodes[k + 1] - nodes[k];
        let lo = (nodes[n - 1] - nodes[k]) + offset;
        a.push(cell_mean(lo, tau_k, beta));
        let half = tau_k / two;
        let moment = first_moment(lo + half, half, beta) / gamma_1mb;
        b.push(two * moment / (tau_k * (tau_k + tau_next)));
    }
    (a, b)
}

/// Alikhanov coefficients of step `n` from the nodes `t_0..t_n`.
pub fn alikhanov_row_from_nodes<S: Scalar>(nodes: &[S], beta: S) -> KernelRow<S> {
    let n = nodes.len() - 1;
    let (a, b) = alikhanov_parts(nodes, beta);
    if n == 1 {
        return KernelRow { n, coeffs: a };
    }
    let tau = |k: usize| nodes[k] - nodes[k - 1];
    let mut coeffs = Vec::with_capacity(n);
    coeffs.push(a[0] + tau(n - 1) / tau(n) * b[0]);
    for j in 1..n - 1 {
        let k = n - j;
        let rho = tau(k - 1) / tau(k);
        coeffs.push(a[j] + rho * b[j] - b[j - 1]);
    }
    coeffs.push(a[n - 1] - b[n - 2]);
    KernelRow { n, coeffs }
}

/// Row of step `n` for either scheme from the nodes `t_0..t_n`.
pub fn row_from_nodes<S: Scalar>(scheme: SchemeKind, nodes: &[S], beta: S) -> KernelRow<S> {
    match scheme {
        SchemeKind::L1 => l1_row_from_nodes(nodes, beta),
        SchemeKind::Alikhanov => alikhanov_row_from_nodes(nodes, beta),
    }
}

fn check_step<S: Scalar>(mesh: &TemporalMesh<S>, n: usize) -> Result<()> {
    if n == 0 || n > mesh.len() {
        return Err(Error::InvalidArgument(format!(
            "step index {n} outside 1..={}",
            mesh.len()
        )));
    }
    Ok(())
}

fn check_beta<S: Scalar>(beta: S) -> Result<()> {
    if !(beta > S::zero() && beta < S::one()) {
        return Err(Error::InvalidArgument(format!(
            "order must lie in (0,1), got {beta}"
        )));
    }
    Ok(())
}

/// Nonuniform L1 coefficients of step `n`.
pub fn l1_row<S: Scalar>(mesh: &TemporalMesh<S>, beta: S, n: usize) -> Result<KernelRow<S>> {
    check_step(mesh, n)?;
    check_beta(beta)?;
    Ok(l1_row_from_nodes(&mesh.nodes()[..=n], beta))
}

/// Nonuniform Alikhanov coefficients of step `n` (offset `theta = beta/2`).
pub fn alikhanov_row<S: Scalar>(mesh: &TemporalMesh<S>, beta: S, n: usize) -> Result<KernelRow<S>> {
    check_step(mesh, n)?;
    check_beta(beta)?;
    Ok(alikhanov_row_from_nodes(&mesh.nodes()[..=n], beta))
}

/// `sum_{k=1}^n A^(n)_{n-k} (g^k - g^{k-1})` for a scalar history `g^0..g^n`.
pub fn discrete_caputo<S: Scalar>(row: &KernelRow<S>, history: &[S]) -> Result<S> {
    if history.len() != row.n + 1 {
        return Err(Error::LengthMismatch {
            expected: row.n,
            got: history.len(),
        });
    }
    Ok((1..=row.n)
        .map(|k| row.cell(k) * (history[k] - history[k - 1]))
        .sum())
}

/// All rows `n = 1..N` of one scheme on a fixed mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<S> {
    pub scheme: SchemeKind,
    pub beta: S,
    pub rows: Vec<KernelRow<S>>,
}

impl<S: Scalar> KernelTable<S> {
    pub fn build(mesh: &TemporalMesh<S>, beta: S, scheme: SchemeKind) -> Result<Self> {
        check_beta(beta)?;
        let rows = (1..=mesh.len())
            .map(|n| row_from_nodes(scheme, &mesh.nodes()[..=n], beta))
            .collect();
        Ok(Self { scheme, beta, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row of step `n` (1-based).
    pub fn row(&self, n: usize) -> &KernelRow<S> {
        &self.rows[n - 1]
    }

    /// `A^(n)_j`.
    pub fn coeff(&self, n: usize, j: usize) -> S {
        self.rows[n - 1].coeffs[j]
    }

    /// Comma separated dump: `n,j,A^(n)_j`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,j,coefficient\n");
        for row in &self.rows {
            for (j, c) in row.coeffs.iter().enumerate() {
                out.push_str(&format!("{},{},{:.17e}\n", row.n, j, c.as_f64()));
            }
        }
        out
    }
}

/// Complementary kernels `P^(n)_j`, `j = 0..n-1`, for `n = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementaryKernels<S> {
    pub rows: Vec<Vec<S>>,
}

impl<S: Scalar> ComplementaryKernels<S> {
    /// `P^(n)_{n-j}`.
    pub fn get(&self, n: usize, j: usize) -> S {
        self.rows[n - 1][n - j]
    }
}

/// Complementary row of step `n`: `P^(n)_{n-j}` stored at index `n - j`.
pub fn complementary_row<S: Scalar>(table: &KernelTable<S>, n: usize) -> Result<Vec<S>> {
    for j in 1..=n {
        if !(table.coeff(j, 0) > S::zero()) {
            return Err(Error::NonPositiveKernel { step: j });
        }
    }
    let mut p = vec![S::zero(); n];
    p[0] = S::one() / table.coeff(n, 0);
    for j in (1..n).rev() {
        let mut acc = S::zero();
        for k in j + 1..=n {
            let row = table.row(k);
            acc += (row.coeffs[k - j - 1] - row.coeffs[k - j]) * p[n - k];
        }
        p[n - j] = acc / table.coeff(j, 0);
    }
    Ok(p)
}

/// Full lower-triangular table of complementary kernels.
pub fn complementary_kernels<S: Scalar>(table: &KernelTable<S>) -> Result<ComplementaryKernels<S>> {
    let rows = (1..=table.len())
        .map(|n| complementary_row(table, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComplementaryKernels { rows })
}

/// Outcome of [`check_kernel_properties`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub scheme: SchemeKind,
    pub positive: bool,
    pub monotone: bool,
    /// First `(n, j)` where positivity or monotonicity fails.
    pub first_violation: Option<(usize, usize)>,
    /// `min_{k,n} A^(n)_{n-k} / mean_{cell k} omega_{1-beta}(t_n - s)`.
    pub a2_min_ratio: f64,
    pub pi_a: f64,
    pub a2_holds: bool,
    pub max_step_ratio: f64,
    /// `true` when the mesh ratio exceeds 7/4 for the Alikhanov formula, where
    /// the kernel properties are no longer covered by theory.
    pub ratio_warning: bool,
}

impl PropertyReport {
    pub fn a1_holds(&self) -> bool {
        self.positive && self.monotone
    }
}

/// Checks positivity/monotonicity of every row and the lower bound against the
/// L1 cell averages.
pub fn check_kernel_properties<S: Scalar>(
    table: &KernelTable<S>,
    mesh: &TemporalMesh<S>,
) -> PropertyReport {
    let mut positive = true;
    let mut monotone = true;
    let mut first_violation = None;
    let mut a2_min_ratio = f64::INFINITY;
    let nodes = mesh.nodes();
    for row in &table.rows {
        let n = row.n;
        for (j, c) in row.coeffs.iter().enumerate() {
            let ok_pos = *c > S::zero();
            let ok_mono = j == 0 || row.coeffs[j - 1] >= *c;
            if !ok_pos {
                positive = false;
            }
            if !ok_mono {
                monotone = false;
            }
            if (!ok_pos || !ok_mono) && first_violation.is_none() {
                first_violation = Some((n, j));
            }
            let k = n - j;
            let mean = cell_mean(nodes[n] - nodes[k], nodes[k] - nodes[k - 1], table.beta);
            a2_min_ratio = a2_min_ratio.min((*c / mean).as_f64());
        }
    }
    let pi_a = table.scheme.pi_a();
    let max_step_ratio = mesh.ratios().iter().map(|r| r.as_f64()).fold(0.0, f64::max);
    PropertyReport {
        scheme: table.scheme,
        positive,
        monotone,
        first_violation,
        a2_min_ratio,
        pi_a,
        a2_holds: a2_min_ratio >= 1.0 / pi_a,
        max_step_ratio,
        ratio_warning: table.scheme == SchemeKind::Alikhanov
            && max_step_ratio > ALIKHANOV_MAX_RATIO,
    }
}

/// `max_{k<=n} |sum_{j=k}^n P^(n)_{n-j} A^(j)_{j-k} - 1|` over every `n`.
pub fn orthogonality_defect<S: Scalar>(
    table: &KernelTable<S>,
    comp: &ComplementaryKernels<S>,
) -> f64 {
    let mut worst = 0.0f64;
    for n in 1..=table.len() {
        for k in 1..=n {
            let s: S = (k..=n)
                .map(|j| comp.get(n, j) * table.coeff(j, j - k))
                .sum();
            worst = worst.max((s - S::one()).abs().as_f64());
        }
    }
    worst
}

/// Slack of the complementary-kernel bounds: returns
/// `(max_{n,j} P^(n)_{n-j} / (pi_A Gamma(2-beta) tau_j^beta), max_n sum_j P^(n)_{n-j} omega_{1-beta}(t_j) / pi_A, min P)`.
/// Both ratios are at most 1 and the minimum is nonnegative when the bounds hold.
pub fn complementary_bounds<S: Scalar>(
    table: &KernelTable<S>,
    comp: &ComplementaryKernels<S>,
    mesh: &TemporalMesh<S>,
) -> (f64, f64, f64) {
    let beta = table.beta;
    let pi_a = table.scheme.pi_a();
    let g2 = (S::of(2.0) - beta).tgamma().as_f64();
    let mut local = 0.0f64;
    let mut global = 0.0f64;
    let mut min_p = f64::INFINITY;
    for n in 1..=table.len() {
        let mut sum = 0.0;
        for j in 1..=n {
            let p = comp.get(n, j).as_f64();
            min_p = min_p.min(p);
            let tau_j = mesh.step(j).as_f64();
            local = local.max(p / (pi_a * g2 * tau_j.powf(beta.as_f64())));
            sum += p * rl_kernel(S::one() - beta, mesh.node(j)).as_f64();
        }
        global = global.max(sum / pi_a);
    }
    (local, global, min_p)
}

/// `<(D g)^{n-theta}, g^{n-theta}> - 1/2 sum_k A^(n)_{n-k} ((g^k)^2 - (g^{k-1})^2)` for a
/// scalar history; nonnegative whenever the energy inequality holds.
pub fn energy_inequality_gap<S: Scalar>(row: &KernelRow<S>, theta: S, history: &[S]) -> Result<S> {
    let d = discrete_caputo(row, history)?;
    let n = row.n;
    let g_offset = theta * history[n - 1] + (S::one() - theta) * history[n];
    let half = S::of(0.5);
    let rhs: S = (1..=n)
        .map(|k| row.cell(k) * (history[k] * history[k] - history[k - 1] * history[k - 1]))
        .sum();
    Ok(d * g_offset - half * rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::graded_mesh;

    const G15: f64 = 0.886_226_925_452_758;

    #[test]
    fn l1_first_coefficients_on_unit_steps() {
        let mesh = TemporalMesh::from_nodes(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let r1 = l1_row(&mesh, 0.5, 1).unwrap();
        assert!((r1.leading() - 1.0 / G15).abs() < 1e-14);
        let r2 = l1_row(&mesh, 0.5, 2).unwrap();
        assert!((r2.coeffs[1] - (2f64.sqrt() - 1.0) / G15).abs() < 1e-14);
        assert!(r2.coeffs[1] < r2.coeffs[0]);
    }

    #[test]
    fn l1_first_row_closed_form() {
        let mesh = graded_mesh(2.0f64, 7, 2.3).unwrap();
        let beta = 0.37;
        let r = l1_row(&mesh, beta, 1).unwrap();
        let expect = mesh.step(1).powf(-beta) / (2.0 - beta).tgamma();
        assert!((r.leading() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn alikhanov_first_coefficient() {
        let mesh = TemporalMesh::from_nodes(vec![0.0, 1.0], 1.0).unwrap();
        let r = alikhanov_row(&mesh, 0.5, 1).unwrap();
        assert!((r.leading() - 0.75f64.sqrt() / G15).abs() < 1e-14);
    }

    #[test]
    fn first_moment_series_and_closed_form_agree() {
        for &beta in &[0.1f64, 0.5, 0.9] {
            for &(c, h) in &[(1.0f64, 0.2499f64), (1.0, 0.2501), (3.0, 0.74)] {
                let lo = c - h;
                let hi = c + h;
                let closed = c * (hi.powf(1.0 - beta) - lo.powf(1.0 - beta)) / (1.0 - beta)
                    - (hi.powf(2.0 - beta) - lo.powf(2.0 - beta)) / (2.0 - beta);
                let ours = first_moment(c, h, beta);
                assert!(
                    (ours - closed).abs() < 1e-12 * closed.abs(),
                    "{beta} {c} {h}"
                );
            }
        }
    }

    #[test]
    fn first_moment_tiny_cell_keeps_relative_accuracy() {
        // leading term 2 beta h^3 c^(-beta-1) / 3
        let (c, h, beta): (f64, f64, f64) = (1.0, 1e-8, 0.6);
        let lead = 2.0 * beta * h.powi(3) * c.powf(-beta - 1.0) / 3.0;
        let m = first_moment(c, h, beta);
        assert!((m - lead).abs() < 1e-6 * lead);
    }

    #[test]
    fn discrete_caputo_checks_length() {
        let mesh = graded_mesh(1.0f64, 3, 1.0).unwrap();
        let row = l1_row(&mesh, 0.5, 2).unwrap();
        assert!(discrete_caputo(&row, &[0.0, 1.0]).is_err());
        assert_eq!(discrete_caputo(&row, &[3.0, 3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn complementary_first_entry_is_reciprocal() {
        let mesh = graded_mesh(1.0f64, 8, 1.0).unwrap();
        let beta = 0.4;
        let table = KernelTable::build(&mesh, beta, SchemeKind::L1).unwrap();
        let comp = complementary_kernels(&table).unwrap();
        let tau: f64 = 1.0 / 8.0;
        assert!((comp.get(1, 1) - (2.0 - beta).tgamma() * tau.powf(beta)).abs() < 1e-14);
        for n in 1..=8 {
            assert!((comp.get(n, n) - 1.0 / table.coeff(n, 0)).abs() < 1e-15);
        }
    }

    #[test]
    fn l1_a2_ratio_is_exactly_one() {
        let mesh = graded_mesh(1.0f64, 16, 2.0).unwrap();
        let table = KernelTable::build(&mesh, 0.7, SchemeKind::L1).unwrap();
        let rep = check_kernel_properties(&table, &mesh);
        assert_eq!(rep.a2_min_ratio, 1.0);
        assert!(rep.a1_holds() && rep.a2_holds && !rep.ratio_warning);
    }

    #[test]
    fn alikhanov_report_flags_large_ratio() {
        let nodes = vec![0.0, 0.3, 0.4, 0.5, 0.6];
        let mesh = TemporalMesh::from_nodes(nodes, 1.0).unwrap();
        let table = KernelTable::build(&mesh, 0.6, SchemeKind::Alikhanov).unwrap();
        let rep = check_kernel_properties(&table, &mesh);
        assert!(rep.ratio_warning);
        assert!((rep.max_step_ratio - 3.0).abs() < 1e-12);
    }

    #[test]
    fn faulty_row_is_located() {
        let mesh = graded_mesh(1.0f64, 6, 2.0).unwrap();
        let mut table = KernelTable::build(&mesh, 0.5, SchemeKind::L1).unwrap();
        table.rows[3].coeffs[2] = -table.rows[3].coeffs[2];
        let rep = check_kernel_properties(&table, &mesh);
        assert!(!rep.positive);
        assert_eq!(rep.first_violation, Some((4, 2)));
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("L1".parse::<SchemeKind>().unwrap(), SchemeKind::L1);
        assert_eq!(
            "alikhanov".parse::<SchemeKind>().unwrap(),
            SchemeKind::Alikhanov
        );
        assert!("bdf2".parse::<SchemeKind>().is_err());
        assert_eq!(SchemeKind::Alikhanov.theta(0.6f64), 0.3);
    }
}
