use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracwave::spatial::{inner, laplacian, norms, Grid2D, GridField, HelmholtzSolver};

fn random_field(grid: &Grid2D<f64>, rng: &mut ChaCha8Rng) -> GridField<f64> {
    grid.sample(|_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn zero_field_maps_to_zero() {
    let grid = Grid2D::square(0.0f64, 1.0, 10).unwrap();
    let z = grid.zeros();
    assert_eq!(laplacian(&grid, &z).unwrap(), z);
    let n = norms(&grid, &z);
    assert_eq!((n.l2, n.max, n.h1, n.h2), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn shape_mismatch_is_rejected() {
    let grid = Grid2D::square(0.0f64, 1.0, 10).unwrap();
    let other = Grid2D::square(0.0f64, 1.0, 8).unwrap();
    assert!(laplacian(&grid, &other.zeros()).is_err());
}

#[test]
fn sine_modes_match_dense_eigendecomposition() {
    let grid = Grid2D::new((0.0f64, 2.0), (-1.0, 0.5), 8, 8).unwrap();
    let (mx, my) = (grid.mx, grid.my);
    let n = (mx - 1) * (my - 1);
    let id = |i: usize, j: usize| (j - 1) * (mx - 1) + (i - 1);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let (ihx2, ihy2) = (1.0 / grid.hx().powi(2), 1.0 / grid.hy().powi(2));
    for j in 1..my {
        for i in 1..mx {
            let k = id(i, j);
            a[(k, k)] = 2.0 * ihx2 + 2.0 * ihy2;
            if i > 1 {
                a[(k, id(i - 1, j))] = -ihx2;
            }
            if i + 1 < mx {
                a[(k, id(i + 1, j))] = -ihx2;
            }
            if j > 1 {
                a[(k, id(i, j - 1))] = -ihy2;
            }
            if j + 1 < my {
                a[(k, id(i, j + 1))] = -ihy2;
            }
        }
    }
    let mut dense: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    dense.sort_by(f64::total_cmp);
    let mut formula: Vec<f64> = (1..mx)
        .flat_map(|p| (1..my).map(move |q| (p, q)))
        .map(|(p, q)| grid.eigenvalue(p, q))
        .collect();
    formula.sort_by(f64::total_cmp);
    for (d, f) in dense.iter().zip(&formula) {
        assert!((d - f).abs() <= 1e-11 * f, "{d} vs {f}");
    }
    // The sampled mode is an eigenvector.
    let (lx, ly) = (2.0, 1.5);
    for (p, q) in [(1, 1), (3, 5), (7, 2)] {
        let mode = grid
            .sample(|x, y| (p as f64 * PI * x / lx).sin() * (q as f64 * PI * (y + 1.0) / ly).sin());
        let lap = laplacian(&grid, &mode).unwrap();
        let lam = grid.eigenvalue(p, q);
        for (l, m) in lap.data.iter().zip(&mode.data) {
            assert!((l + lam * m).abs() < 1e-10 * lam);
        }
    }
}

#[test]
fn laplacian_is_second_order_accurate() {
    let mut errs = Vec::new();
    for m in [64, 128, 256] {
        let grid = Grid2D::square(0.0f64, 1.0, m).unwrap();
        let u = grid.sample(|x, y| (PI * x).sin() * (PI * y).sin());
        let lap = laplacian(&grid, &u).unwrap();
        let err = lap
            .data
            .iter()
            .zip(&u.data)
            .map(|(l, u)| (l + 2.0 * PI * PI * u).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 2.0).abs() < 0.05, "rate {rate}");
    }
}

#[test]
fn single_node_norm() {
    let grid = Grid2D::new((0.0f64, 1.0), (0.0, 2.0), 4, 5).unwrap();
    let mut u = grid.zeros();
    u.data[grid.index(2, 3)] = 1.0;
    let n = norms(&grid, &u);
    assert!((n.l2 - (grid.hx() * grid.hy()).sqrt()).abs() < 1e-15);
    assert_eq!(n.max, 1.0);
}

#[test]
fn embedding_constants_are_finite() {
    let grid = Grid2D::square(0.0f64, 1.0, 24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut c_poincare: f64 = 0.0;
    let mut c_max: f64 = 0.0;
    for _ in 0..100 {
        let u = random_field(&grid, &mut rng);
        let n = norms(&grid, &u);
        let lap = norms(&grid, &laplacian(&grid, &u).unwrap()).l2;
        c_poincare = c_poincare.max(n.l2 / n.h1);
        c_max = c_max.max(n.max / lap);
    }
    // Poincare constant of the unit square is 1/(pi sqrt 2).
    assert!(c_poincare.is_finite() && c_poincare <= 1.0 / (PI * 2f64.sqrt()) + 1e-12);
    assert!(c_max.is_finite());
}

proptest! {
    #[test]
    fn summation_by_parts(seed in 0u64..1000, mx in 2usize..12, my in 2usize..12) {
        let grid = Grid2D::new((0.0f64, 1.3), (0.0, 0.7), mx, my).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(&grid, &mut rng);
        let lap = laplacian(&grid, &u).unwrap();
        let h1 = norms(&grid, &u).h1;
        let lhs = inner(&grid, &lap, &u);
        prop_assert!((lhs + h1 * h1).abs() <= 1e-10 * (h1 * h1).max(1.0));
    }

    #[test]
    fn laplacian_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = Grid2D::square(0.0f64, 1.0, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(&grid, &mut rng);
        let v = random_field(&grid, &mut rng);
        let mut w = grid.zeros();
        for k in 0..w.data.len() { w.data[k] = a * u.data[k] + b * v.data[k]; }
        let (lu, lv, lw) = (laplacian(&grid, &u).unwrap(), laplacian(&grid, &v).unwrap(), laplacian(&grid, &w).unwrap());
        for k in 0..w.data.len() {
            prop_assert!((lw.data[k] - a * lu.data[k] - b * lv.data[k]).abs() <= 1e-12 * 400.0);
        }
    }
}

#[test]
fn identity_solve_returns_rhs() {
    let grid = Grid2D::square(0.0f64, 1.0, 16).unwrap();
    let solver = HelmholtzSolver::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rhs = random_field(&grid, &mut rng);
    let (x, _) = solver.solve(1.0, 0.0, None, &rhs, 1e-14).unwrap();
    for (a, b) in x.data.iter().zip(&rhs.data) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn exact_preconditioner_converges_in_one_iteration() {
    let grid = Grid2D::new((-1.0f64, 1.0), (-1.0, 1.0), 32, 20).unwrap();
    let solver = HelmholtzSolver::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target = random_field(&grid, &mut rng);
    let (c, d) = (3.5, 0.8);
    let lap = laplacian(&grid, &target).unwrap();
    let mut rhs = grid.zeros();
    for k in 0..rhs.data.len() {
        rhs.data[k] = c * target.data[k] - d * lap.data[k];
    }
    let (x, stats) = solver.solve(c, d, None, &rhs, 1e-12).unwrap();
    assert_eq!(stats.iterations, 1);
    let err = x
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-11);
}

#[test]
fn variable_reaction_converges_quickly() {
    let grid = Grid2D::square(0.0f64, 1.0, 64).unwrap();
    let solver = HelmholtzSolver::new(grid);
    // Reaction derivative -3u^2 of the cubic source at the exact solution of
    // the sine test problem with alpha = 1.5, t = 1.
    let diag = grid.sample(|x, y| {
        let u = 3.0 * (PI * x).sin() * (PI * y).sin();
        -3.0 * u * u
    });
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rhs = random_field(&grid, &mut rng);
    let (c, d) = (2.0, 0.75);
    let (x, stats) = solver.solve(c, d, Some(&diag), &rhs, 1e-12).unwrap();
    assert!(stats.iterations < 30, "{} iterations", stats.iterations);
    // Independent residual check.
    let lap = laplacian(&grid, &x).unwrap();
    let mut r2 = 0.0;
    let mut b2 = 0.0;
    for k in 0..x.data.len() {
        let ax = c * x.data[k] - d * lap.data[k] - diag.data[k] * x.data[k];
        r2 += (ax - rhs.data[k]).powi(2);
        b2 += rhs.data[k].powi(2);
    }
    assert!((r2 / b2).sqrt() <= 1e-12);
}

#[test]
fn snapshot_has_one_line_per_grid_row() {
    let grid = Grid2D::new((0.0f64, 1.0), (0.0, 1.0), 4, 6).unwrap();
    let csv = grid.zeros().to_csv();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().all(|l| l.split(',').count() == 5));
}
