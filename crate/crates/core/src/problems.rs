//! Problem definitions for `D_t^alpha u = nu^2 Laplace(u) + f(u, x, y, t)` with
//! homogeneous Dirichlet data, `u(0) = phi`, `u_t(0) = phi_rate`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::SchemeKind;
use crate::scalar::Scalar;
use crate::spatial::Grid2D;

/// `g(x, y)`.
pub type PointFn<S> = Arc<dyn Fn(S, S) -> S + Send + Sync>;
/// `f(u, x, y, t)`.
pub type SourceFn<S> = Arc<dyn Fn(S, S, S, S) -> S + Send + Sync>;
/// `u(x, y, t)`.
pub type SolutionFn<S> = Arc<dyn Fn(S, S, S) -> S + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec<S> {
    pub name: String,
    pub x_range: (S, S),
    pub y_range: (S, S),
    pub horizon: S,
    pub nu: S,
    pub alpha: S,
    pub source: SourceFn<S>,
    /// Partial derivative of the source with respect to `u`.
    pub source_du: SourceFn<S>,
    pub initial: PointFn<S>,
    pub initial_rate: PointFn<S>,
    /// Analytic Laplacian of `initial_rate`; the grid Laplacian of its samples is used otherwise.
    pub initial_rate_laplacian: Option<PointFn<S>>,
    pub exact: Option<SolutionFn<S>>,
    /// Regularity exponents `(sigma_1, sigma_2)` of `u` and of its half-order derivative.
    pub regularity: (S, S),
}

impl<S: Scalar> fmt::Debug for ProblemSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("x_range", &self.x_range)
            .field("y_range", &self.y_range)
            .field("horizon", &self.horizon)
            .field("nu", &self.nu)
            .field("alpha", &self.alpha)
            .field("exact", &self.exact.is_some())
            .field("regularity", &self.regularity)
            .finish()
    }
}

fn check_alpha<S: Scalar>(alpha: S) -> Result<()> {
    if !(alpha > S::one() && alpha < S::of(2.0)) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} must lie in (1, 2)"
        )));
    }
    Ok(())
}

impl<S: Scalar> ProblemSpec<S> {
    /// Half order `beta = alpha / 2` of the reduced system.
    pub fn beta(&self) -> S {
        self.alpha / S::of(2.0)
    }

    /// Grading exponent that balances the initial singularity against the
    /// scheme's accuracy: `(2 - beta)/sigma_2` for L1, `2/sigma_2` for Alikhanov.
    pub fn optimal_gamma(&self, scheme: SchemeKind) -> S {
        let sigma = self.regularity.1;
        match scheme {
            SchemeKind::L1 => (S::of(2.0) - self.beta()) / sigma,
            SchemeKind::Alikhanov => S::of(2.0) / sigma,
        }
    }

    /// Grid with `m` cells per direction on the problem's rectangle.
    pub fn grid(&self, m: usize) -> Result<Grid2D<S>> {
        Grid2D::new(self.x_range, self.y_range, m, m)
    }

    /// Checks the order range and that the initial fields vanish on the boundary.
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let tol = S::epsilon() * S::of(1e3);
        for k in 0..=16 {
            let r = S::of_usize(k) / S::of(16.0);
            let xs = x0 + r * (x1 - x0);
            let ys = y0 + r * (y1 - y0);
            for (x, y) in [(xs, y0), (xs, y1), (x0, ys), (x1, ys)] {
                if (self.initial)(x, y).abs() > tol || (self.initial_rate)(x, y).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "initial data of '{}' do not vanish at ({x}, {y})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sine_profile<S: Scalar>(x: S, y: S) -> S {
    (S::PI() * x).sin() * (S::PI() * y).sin()
}

fn example1_with_eigenvalue<S: Scalar>(alpha: S, lambda: S, name: &str) -> Result<ProblemSpec<S>> {
    check_alpha(alpha)?;
    let time = move |t: S| S::one() + t + t.powf(alpha);
    let g_alpha = (alpha + S::one()).tgamma();
    let three = S::of(3.0);
    Ok(ProblemSpec {
        name: name.into(),
        x_range: (S::zero(), S::one()),
        y_range: (S::zero(), S::one()),
        horizon: S::one(),
        nu: S::one(),
        alpha,
        source: Arc::new(move |u, x, y, t| {
            let s = sine_profile(x, y);
            let w = s * time(t);
            -u * u * u + w * w * w + s * (g_alpha + lambda * time(t))
        }),
        source_du: Arc::new(move |u, _, _, _| -three * u * u),
        initial: Arc::new(sine_profile),
        initial_rate: Arc::new(sine_profile),
        initial_rate_laplacian: Some(Arc::new(move |x, y| -lambda * sine_profile(x, y))),
        exact: Some(Arc::new(move |x, y, t| sine_profile(x, y) * time(t))),
        regularity: (alpha, alpha / S::of(2.0)),
    })
}

/// Manufactured problem on the unit square with solution
/// `sin(pi x) sin(pi y) (1 + t + t^alpha)`, `T = 1`.
pub fn example1<S: Scalar>(alpha: S) -> Result<ProblemSpec<S>> {
    let two_pi2 = S::of(2.0) * S::PI() * S::PI();
    example1_with_eigenvalue(alpha, two_pi2, "example1")
}

/// Variant of [`example1`] whose source uses the eigenvalue of the five-point
/// Laplacian on an `m x m` grid instead of `2 pi^2`, so that the semi-discrete
/// solution equals the exact one at the grid nodes and only temporal errors remain.
pub fn example1_grid_consistent<S: Scalar>(alpha: S, m: usize) -> Result<ProblemSpec<S>> {
    let grid = Grid2D::square(S::zero(), S::one(), m)?;
    example1_with_eigenvalue(alpha, grid.eigenvalue(1, 1), "example1-grid")
}

/// Cubic damping `f = -u^3` on `(-1, 1)^2` from two Gaussian bumps at rest.
pub fn example2<S: Scalar>(alpha: S, horizon: S) -> Result<ProblemSpec<S>> {
    check_alpha(alpha)?;
    if !(horizon > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let ten = S::of(10.0);
    let shift = S::of(0.4);
    let three = S::of(3.0);
    Ok(ProblemSpec {
        name: "example2".into(),
        x_range: (-S::one(), S::one()),
        y_range: (-S::one(), S::one()),
        horizon,
        nu: S::one(),
        alpha,
        source: Arc::new(|u, _, _, _| -u * u * u),
        source_du: Arc::new(move |u, _, _, _| -three * u * u),
        initial: Arc::new(move |x, y| {
            let bump = |c: S| (-ten * ((x - c) * (x - c) + y * y)).exp();
            (x * x - S::one()) * (y * y - S::one()) * (bump(-shift) + bump(shift))
        }),
        initial_rate: Arc::new(|_, _| S::zero()),
        initial_rate_laplacian: Some(Arc::new(|_, _| S::zero())),
        exact: None,
        regularity: (alpha, alpha / S::of(2.0)),
    })
}

/// Looks a problem up by name (`example1`, `example1-grid`, `example2`).
pub fn by_name<S: Scalar>(
    name: &str,
    alpha: S,
    m: usize,
    horizon: Option<S>,
) -> Result<ProblemSpec<S>> {
    match name {
        "example1" => example1(alpha),
        "example1-grid" => example1_grid_consistent(alpha, m),
        "example2" => example2(alpha, horizon.unwrap_or(S::of(10.0))),
        other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
    }
}
