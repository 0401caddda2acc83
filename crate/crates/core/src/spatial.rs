//! Uniform rectangular grids with homogeneous Dirichlet boundary: five-point
//! Laplacian, discrete norms and a sine-transform preconditioned solver for
//! `(c I - d Laplace_h - diag) x = rhs`.

use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Iteration cap of the preconditioned conjugate gradient solver.
pub const MAX_CG_ITERATIONS: usize = 200;

/// Tensor grid on `[x_l, x_r] x [y_l, y_r]` with `mx x my` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D<S> {
    pub x_range: (S, S),
    pub y_range: (S, S),
    pub mx: usize,
    pub my: usize,
}

/// Nodal values in row-major order, `(my + 1)` rows of `(mx + 1)` entries,
/// boundary ring included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<S> {
    pub mx: usize,
    pub my: usize,
    pub data: Vec<S>,
}

/// Discrete norms of a zero-boundary field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms<S> {
    pub l2: S,
    pub max: S,
    pub h1: S,
    pub h2: S,
}

impl<S: Scalar> Grid2D<S> {
    pub fn new(x_range: (S, S), y_range: (S, S), mx: usize, my: usize) -> Result<Self> {
        if mx < 2 || my < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 cells per direction, got {mx} x {my}"
            )));
        }
        if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(Error::InvalidArgument(
                "grid ranges must be increasing".into(),
            ));
        }
        Ok(Self {
            x_range,
            y_range,
            mx,
            my,
        })
    }

    /// Square grid with `m` cells per direction.
    pub fn square(lo: S, hi: S, m: usize) -> Result<Self> {
        Self::new((lo, hi), (lo, hi), m, m)
    }

    pub fn hx(&self) -> S {
        (self.x_range.1 - self.x_range.0) / S::of_usize(self.mx)
    }

    pub fn hy(&self) -> S {
        (self.y_range.1 - self.y_range.0) / S::of_usize(self.my)
    }

    pub fn x(&self, i: usize) -> S {
        self.x_range.0 + S::of_usize(i) * self.hx()
    }

    pub fn y(&self, j: usize) -> S {
        self.y_range.0 + S::of_usize(j) * self.hy()
    }

    /// Total node count including the boundary ring.
    pub fn size(&self) -> usize {
        (self.mx + 1) * (self.my + 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.mx + 1) + i
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i < self.mx && j < self.my
    }

    pub fn zeros(&self) -> GridField<S> {
        GridField {
            mx: self.mx,
            my: self.my,
            data: vec![S::zero(); self.size()],
        }
    }

    /// Samples `f` at interior nodes; boundary entries are zero.
    pub fn sample(&self, mut f: impl FnMut(S, S) -> S) -> GridField<S> {
        let mut out = self.zeros();
        for j in 1..self.my {
            let y = self.y(j);
            for i in 1..self.mx {
                out.data[self.index(i, j)] = f(self.x(i), y);
            }
        }
        out
    }

    /// Eigenvalue of `-Laplace_h` for the sine mode `(p, q)`.
    pub fn eigenvalue(&self, p: usize, q: usize) -> S {
        let four = S::of(4.0);
        let half_pi = S::FRAC_PI_2();
        let sx = (half_pi * S::of_usize(p) / S::of_usize(self.mx)).sin();
        let sy = (half_pi * S::of_usize(q) / S::of_usize(self.my)).sin();
        four * sx * sx / (self.hx() * self.hx()) + four * sy * sy / (self.hy() * self.hy())
    }

    pub fn check(&self, field: &GridField<S>) -> Result<()> {
        if field.mx != self.mx || field.my != self.my || field.data.len() != self.size() {
            return Err(Error::LengthMismatch {
                expected: self.size(),
                got: field.data.len(),
            });
        }
        Ok(())
    }
}

impl<S: Scalar> GridField<S> {
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[j * (self.mx + 1) + i]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// CSV matrix, one grid row (fixed `y`) per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.data.chunks(self.mx + 1) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.10e}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// `Laplace_h u` written into `out` (boundary zero).
pub fn laplacian_into<S: Scalar>(grid: &Grid2D<S>, u: &[S], out: &mut [S]) {
    let (mx, my) = (grid.mx, grid.my);
    let ihx2 = (grid.hx() * grid.hx()).recip();
    let ihy2 = (grid.hy() * grid.hy()).recip();
    let two = S::of(2.0);
    let w = mx + 1;
    out.iter_mut().for_each(|o| *o = S::zero());
    for j in 1..my {
        for i in 1..mx {
            let k = j * w + i;
            let c = u[k];
            out[k] =
                (u[k + 1] - two * c + u[k - 1]) * ihx2 + (u[k + w] - two * c + u[k - w]) * ihy2;
        }
    }
}

pub fn laplacian<S: Scalar>(grid: &Grid2D<S>, field: &GridField<S>) -> Result<GridField<S>> {
    grid.check(field)?;
    let mut out = grid.zeros();
    laplacian_into(grid, &field.data, &mut out.data);
    Ok(out)
}

/// `h_x h_y sum u v` over interior nodes.
pub fn inner<S: Scalar>(grid: &Grid2D<S>, u: &GridField<S>, v: &GridField<S>) -> S {
    grid.hx() * grid.hy() * u.data.iter().zip(&v.data).map(|(a, b)| *a * *b).sum::<S>()
}

/// Squared forward-difference gradient norm.
fn grad_sq<S: Scalar>(grid: &Grid2D<S>, u: &[S]) -> S {
    let (mx, my) = (grid.mx, grid.my);
    let w = mx + 1;
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut sx = S::zero();
    let mut sy = S::zero();
    for j in 0..=my {
        for i in 0..=mx {
            let k = j * w + i;
            if i < mx && j > 0 && j < my {
                let d = u[k + 1] - u[k];
                sx += d * d;
            }
            if j < my && i > 0 && i < mx {
                let d = u[k + w] - u[k];
                sy += d * d;
            }
        }
    }
    hx * hy * (sx / (hx * hx) + sy / (hy * hy))
}

pub fn norms<S: Scalar>(grid: &Grid2D<S>, field: &GridField<S>) -> Norms<S> {
    let area = grid.hx() * grid.hy();
    let l2sq = area * field.data.iter().map(|v| *v * *v).sum::<S>();
    let h1sq = grad_sq(grid, &field.data);
    let mut lap = vec![S::zero(); field.data.len()];
    laplacian_into(grid, &field.data, &mut lap);
    let lapsq = area * lap.iter().map(|v| *v * *v).sum::<S>();
    Norms {
        l2: l2sq.sqrt(),
        max: field.max_abs(),
        h1: h1sq.sqrt(),
        h2: (l2sq + h1sq + lapsq).sqrt(),
    }
}

/// Iteration count and final relative residual of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats<S> {
    pub iterations: usize,
    pub residual: S,
}

/// Type-I sine transform along one direction of a grid, computed through an
/// odd extension of length `2m`.
#[derive(Clone)]
struct SineTransform<S: Scalar> {
    m: usize,
    fft: Arc<dyn Fft<S>>,
}

impl<S: Scalar> SineTransform<S> {
    fn new(planner: &mut FftPlanner<S>, m: usize) -> Self {
        Self {
            m,
            fft: planner.plan_fft_forward(2 * m),
        }
    }

    /// `X_k = sum_{j=1}^{m-1} x_j sin(pi j k / m)` for each of the `lines`
    /// (strided) sequences.
    fn apply(
        &self,
        data: &mut [S],
        lines: impl Iterator<Item = (usize, usize)>,
        buf: &mut Vec<Complex<S>>,
    ) {
        let m = self.m;
        let half = S::of(0.5);
        for (start, stride) in lines {
            buf.clear();
            buf.resize(2 * m, Complex::new(S::zero(), S::zero()));
            for j in 1..m {
                let v = data[start + j * stride];
                buf[j] = Complex::new(v, S::zero());
                buf[2 * m - j] = Complex::new(-v, S::zero());
            }
            self.fft.process(buf);
            for k in 1..m {
                data[start + k * stride] = -buf[k].im * half;
            }
        }
    }
}

/// Reusable solver for `(c I - d Laplace_h - diag) x = rhs` on a fixed grid.
#[derive(Clone)]
pub struct HelmholtzSolver<S: Scalar> {
    grid: Grid2D<S>,
    sx: SineTransform<S>,
    sy: SineTransform<S>,
    lambda: Vec<S>,
}

impl<S: Scalar> std::fmt::Debug for HelmholtzSolver<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzSolver")
            .field("grid", &self.grid)
            .finish()
    }
}

impl<S: Scalar> HelmholtzSolver<S> {
    pub fn new(grid: Grid2D<S>) -> Self {
        let mut planner = FftPlanner::new();
        let sx = SineTransform::new(&mut planner, grid.mx);
        let sy = SineTransform::new(&mut planner, grid.my);
        let mut lambda = vec![S::zero(); grid.size()];
        for q in 1..grid.my {
            for p in 1..grid.mx {
                lambda[grid.index(p, q)] = grid.eigenvalue(p, q);
            }
        }
        Self {
            grid,
            sx,
            sy,
            lambda,
        }
    }

    pub fn grid(&self) -> &Grid2D<S> {
        &self.grid
    }

    fn transform(&self, data: &mut [S], buf: &mut Vec<Complex<S>>) {
        let (mx, my) = (self.grid.mx, self.grid.my);
        let w = mx + 1;
        self.sx.apply(data, (1..my).map(|j| (j * w, 1)), buf);
        self.sy.apply(data, (1..mx).map(|i| (i, w)), buf);
    }

    /// Applies `(c I - d Laplace_h)^{-1}` in place.
    fn precondition(&self, c: S, d: S, data: &mut [S], buf: &mut Vec<Complex<S>>) {
        self.transform(data, buf);
        let norm = S::of(4.0) / S::of_usize(self.grid.mx * self.grid.my);
        for j in 1..self.grid.my {
            for i in 1..self.grid.mx {
                let k = self.grid.index(i, j);
                data[k] = data[k] * norm / (c + d * self.lambda[k]);
            }
        }
        self.transform(data, buf);
    }

    fn apply(&self, c: S, d: S, diag: Option<&[S]>, x: &[S], out: &mut [S]) {
        laplacian_into(&self.grid, x, out);
        for k in 0..out.len() {
            out[k] = c * x[k] - d * out[k];
        }
        if let Some(g) = diag {
            for (o, (gk, xk)) in out.iter_mut().zip(g.iter().zip(x)) {
                *o -= *gk * *xk;
            }
        }
        self.zero_boundary(out);
    }

    fn zero_boundary(&self, v: &mut [S]) {
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

    /// Solves `(c I - d Laplace_h - diag) x = rhs` to relative residual `tol`.
    pub fn solve(
        &self,
        c: S,
        d: S,
        diag: Option<&GridField<S>>,
        rhs: &GridField<S>,
        tol: S,
    ) -> Result<(GridField<S>, SolveStats<S>)> {
        self.grid.check(rhs)?;
        if let Some(g) = diag {
            self.grid.check(g)?;
        }
        if !(c > S::zero()) || d < S::zero() {
            return Err(Error::InvalidArgument(format!(
                "need c > 0 and d >= 0, got c = {c}, d = {d}"
            )));
        }
        let diag = diag.map(|g| g.data.as_slice());
        let n = self.grid.size();
        let dot = |a: &[S], b: &[S]| a.iter().zip(b).map(|(x, y)| *x * *y).sum::<S>();
        let mut b = rhs.data.clone();
        self.zero_boundary(&mut b);
        let bnorm = dot(&b, &b).sqrt();
        let mut x = vec![S::zero(); n];
        if bnorm == S::zero() {
            return Ok((
                self.grid.zeros(),
                SolveStats {
                    iterations: 0,
                    residual: S::zero(),
                },
            ));
        }
        let mut buf = Vec::with_capacity(2 * self.grid.mx.max(self.grid.my));
        let mut r = b;
        let mut z = r.clone();
        self.precondition(c, d, &mut z, &mut buf);
        let mut p = z.clone();
        let mut ap = vec![S::zero(); n];
        let mut rz = dot(&r, &z);
        let mut res = S::one();
        for it in 1..=MAX_CG_ITERATIONS {
            self.apply(c, d, diag, &p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > S::zero()) {
                break;
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            res = dot(&r, &r).sqrt() / bnorm;
            if res <= tol {
                // Confirm against the true residual before returning.
                self.apply(c, d, diag, &x, &mut ap);
                let true_res =
                    ap.iter()
                        .zip(&rhs.data)
                        .enumerate()
                        .fold(S::zero(), |s, (k, (a, b))| {
                            let (i, j) = (k % (self.grid.mx + 1), k / (self.grid.mx + 1));
                            if self.grid.is_interior(i, j) {
                                s + (*a - *b) * (*a - *b)
                            } else {
                                s
                            }
                        });
                let true_res = true_res.sqrt() / bnorm;
                if true_res <= tol {
                    let field = GridField {
                        mx: self.grid.mx,
                        my: self.grid.my,
                        data: x,
                    };
                    return Ok((
                        field,
                        SolveStats {
                            iterations: it,
                            residual: true_res,
                        },
                    ));
                }
                r = rhs.data.clone();
                self.zero_boundary(&mut r);
                for k in 0..n {
                    r[k] -= ap[k];
                }
            }
            z.copy_from_slice(&r);
            self.precondition(c, d, &mut z, &mut buf);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        let max_diag = diag
            .map(|g| g.iter().fold(S::neg_infinity(), |m, v| m.max(*v)))
            .unwrap_or(S::zero());
        Err(Error::SolverDivergence {
            iterations: MAX_CG_ITERATIONS,
            residual: res.as_f64(),
            shift: c.as_f64(),
            max_diag: max_diag.as_f64(),
        })
    }
}
