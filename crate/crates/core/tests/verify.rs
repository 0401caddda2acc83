mod common;

use common::{tanh_sinh, weakly_singular};
use fracwave::kernels::{discrete_caputo, row_from_nodes, KernelTable, SchemeKind};
use fracwave::mesh::{graded_mesh, two_part_mesh, Tail};
use fracwave::verify::{
    consistency_scan, direct_convolution_caputo, exact_caputo_monomial, ConsistencyKind,
};

const SCAN_SIZES: [usize; 4] = [128, 256, 512, 1024];

#[test]
fn monomial_formula_reference_values() {
    let v = exact_caputo_monomial(0.5f64, 1.0, 1.0).unwrap();
    assert!((v - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-14);
    for t in [1e-3, 0.4, 7.0] {
        assert_eq!(exact_caputo_monomial(0.3f64, 0.0, t).unwrap(), 0.0);
        let same = exact_caputo_monomial(0.7f64, 0.7, t).unwrap();
        assert!((same - libm::tgamma(1.7)).abs() < 1e-14);
    }
    assert!(exact_caputo_monomial(1.0f64, 1.0, 1.0).is_err());
    assert!(exact_caputo_monomial(0.5f64, 1.0, 0.0).is_err());
}

#[test]
fn monomial_formula_matches_quadrature_of_definition() {
    for (beta, sigma) in [(0.3, 0.4), (0.6, 1.5), (0.9, 2.7)] {
        for t in [0.2, 1.0, 3.0] {
            let integral = tanh_sinh(
                |_, from_zero, to_t| {
                    weakly_singular(beta, to_t) * sigma * from_zero.powf(sigma - 1.0)
                },
                0.0,
                t,
            );
            let exact = exact_caputo_monomial(beta, sigma, t).unwrap();
            assert!(
                ((integral - exact) / exact).abs() < 1e-10,
                "beta {beta} sigma {sigma} t {t}: {integral} vs {exact}"
            );
        }
    }
}

#[test]
fn direct_convolution_agrees_bitwise_with_kernel_rows() {
    let mesh = two_part_mesh(0.4f64, 1.0, 12, 20, 2.5, Tail::Random { seed: 7 }).unwrap();
    let history: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|t| (3.0 * t).sin() + t.sqrt())
        .collect();
    for scheme in [SchemeKind::L1, SchemeKind::Alikhanov] {
        let table = KernelTable::build(&mesh, 0.7, scheme).unwrap();
        let direct = direct_convolution_caputo(&mesh, 0.7, scheme, &history).unwrap();
        for n in 1..=mesh.len() {
            let production = discrete_caputo(table.row(n), &history[..=n]).unwrap();
            assert_eq!(direct[n - 1], production, "{scheme:?} step {n}");
        }
    }
    assert!(direct_convolution_caputo(&mesh, 0.7, SchemeKind::L1, &history[1..]).is_err());
}

#[test]
fn linear_functions_are_differentiated_exactly() {
    let beta = 0.65f64;
    let mesh = two_part_mesh(0.3f64, 2.0, 10, 30, 3.0, Tail::Random { seed: 11 }).unwrap();
    let history: Vec<f64> = mesh.nodes().iter().map(|t| 2.5 * t - 1.0).collect();
    for scheme in [SchemeKind::L1, SchemeKind::Alikhanov] {
        let theta = scheme.theta(beta);
        let values = direct_convolution_caputo(&mesh, beta, scheme, &history).unwrap();
        for n in 1..=mesh.len() {
            let t = (1.0 - theta) * mesh.node(n) + theta * mesh.node(n - 1);
            let exact = 2.5 * exact_caputo_monomial(beta, 1.0, t).unwrap();
            assert!(
                ((values[n - 1] - exact) / exact).abs() < 1e-13,
                "{scheme:?} step {n}"
            );
        }
    }
}

#[test]
fn alikhanov_rows_match_quadrature_of_the_interpolants() {
    let beta = 0.55;
    let theta = beta / 2.0;
    let mesh = two_part_mesh(0.5f64, 1.0, 6, 6, 2.0, Tail::Random { seed: 3 }).unwrap();
    let t = mesh.nodes();
    let g: Vec<f64> = t.iter().map(|x| (2.0 * x).cos() + x.powf(0.8)).collect();
    let slope = |k: usize| (g[k] - g[k - 1]) / (t[k] - t[k - 1]);
    for n in 1..=mesh.len() {
        let at = (1.0 - theta) * t[n] + theta * t[n - 1];
        let mut reference = 0.0;
        for k in 1..n {
            let mid = 0.5 * (t[k - 1] + t[k]);
            let curvature = 2.0 * (slope(k + 1) - slope(k)) / (t[k + 1] - t[k - 1]);
            reference += tanh_sinh(
                |s, _, _| weakly_singular(beta, at - s) * (slope(k) + curvature * (s - mid)),
                t[k - 1],
                t[k],
            );
        }
        reference += tanh_sinh(
            |_, _, to_end| weakly_singular(beta, to_end) * slope(n),
            t[n - 1],
            at,
        );
        let row = row_from_nodes(SchemeKind::Alikhanov, &t[..=n], beta);
        let discrete = discrete_caputo(&row, &g[..=n]).unwrap();
        assert!(
            (discrete - reference).abs() < 1e-11 * reference.abs().max(1.0),
            "step {n}: {discrete} vs {reference}"
        );
    }
}

#[test]
fn l1_scan_follows_the_grading_limited_rate() {
    let scan = consistency_scan(
        ConsistencyKind::Caputo,
        SchemeKind::L1,
        0.75f64,
        0.75,
        1.0,
        &SCAN_SIZES,
    )
    .unwrap();
    assert!((scan.rate - 0.75).abs() <= 0.2, "{scan:?}");
    assert_eq!(scan.predicted, 0.75);
}

#[test]
fn l1_scan_at_optimal_grading_reaches_scheme_order() {
    let scan = consistency_scan(
        ConsistencyKind::Caputo,
        SchemeKind::L1,
        0.75f64,
        0.75,
        1.25 / 0.75,
        &SCAN_SIZES,
    )
    .unwrap();
    assert!((scan.rate - 1.25).abs() <= 0.2, "{scan:?}");
}

#[test]
fn alikhanov_scan_with_smooth_data_exceeds_second_order() {
    let scan = consistency_scan(
        ConsistencyKind::Caputo,
        SchemeKind::Alikhanov,
        0.6f64,
        1.5,
        2.0,
        &SCAN_SIZES,
    )
    .unwrap();
    assert!((scan.rate - 2.4).abs() <= 0.2, "{scan:?}");
    assert!(scan.rate >= scan.simplified - 0.2);
}

#[test]
fn offset_and_linearization_scans_match_initial_step_term() {
    for (kind, scheme, expected) in [
        (
            ConsistencyKind::OffsetInterpolation,
            SchemeKind::Alikhanov,
            1.2,
        ),
        (ConsistencyKind::Linearization, SchemeKind::L1, 1.8),
        (ConsistencyKind::Linearization, SchemeKind::Alikhanov, 1.2),
    ] {
        let scan = consistency_scan(kind, scheme, 0.6f64, 0.6, 1.0, &SCAN_SIZES).unwrap();
        assert!((scan.predicted - expected).abs() < 1e-12);
        assert!(scan.deviation() <= 0.2, "{scan:?}");
    }
}

#[test]
fn scan_requires_three_doublings_and_valid_kind() {
    assert!(consistency_scan(
        ConsistencyKind::Caputo,
        SchemeKind::L1,
        0.5f64,
        0.5,
        1.0,
        &[8, 16, 32]
    )
    .is_err());
    let mesh = graded_mesh(1.0f64, 8, 1.0).unwrap();
    assert!(fracwave::verify::weighted_error_sum(
        ConsistencyKind::OffsetInterpolation,
        SchemeKind::L1,
        0.5,
        0.5,
        &mesh
    )
    .is_err());
}

#[test]
fn scan_csv_has_one_row_per_size() {
    let scan = consistency_scan(
        ConsistencyKind::Caputo,
        SchemeKind::L1,
        0.5f64,
        0.5,
        1.0,
        &[16, 32, 64, 128],
    )
    .unwrap();
    let csv = scan.to_csv();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("kind,scheme,beta,sigma,gamma,N"));
}
