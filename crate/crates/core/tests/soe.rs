use fracwave::history::{CaputoHistory, DirectHistory};
use fracwave::kernels::{discrete_caputo, row_from_nodes, SchemeKind};
use fracwave::mesh::graded_mesh;
use fracwave::soe::{build_soe, fast_discrete_caputo, FastHistory};

#[test]
fn certification_sweep_passes_across_orders() {
    for beta in [0.55, 0.75, 0.95] {
        let soe = build_soe(beta, 1e-3, 10.0, 1e-12).unwrap();
        assert!(soe.sweep(5000) <= 1e-12, "beta {beta}: {}", soe.sweep(5000));
        assert!(soe.exponents.iter().chain(&soe.weights).all(|&x| x > 0.0));
        println!("beta {beta}: {} modes", soe.modes());
    }
}

#[test]
fn endpoints_are_within_tolerance() {
    let soe = build_soe(0.5f64, 1e-3, 1.0, 1e-12).unwrap();
    let omega = |t: f64| t.powf(-0.5) / libm::tgamma(0.5);
    for t in [1e-3, 1.0] {
        assert!(((soe.eval(t) - omega(t)) / omega(t)).abs() <= 1e-12);
    }
}

#[test]
fn looser_tolerance_needs_fewer_modes() {
    let tight = build_soe(0.5f64, 1e-3, 1.0, 1e-12).unwrap();
    let loose = build_soe(0.5, 1e-3, 1.0, 1e-9).unwrap();
    assert!(
        loose.modes() < tight.modes(),
        "{} vs {}",
        loose.modes(),
        tight.modes()
    );
}

#[test]
fn single_precision_build_fails_certification_at_double_tolerance() {
    assert!(build_soe(0.5f32, 1e-3, 1.0, 1e-12).is_err());
    assert!(build_soe(0.5f32, 1e-3, 1.0, 1e-5).is_ok());
}

fn fast_vs_direct(scheme: SchemeKind) -> f64 {
    let beta = 0.6;
    let mesh = graded_mesh(1.0f64, 64, 3.0).unwrap();
    let t = mesh.nodes();
    let g: Vec<f64> = t.iter().map(|t| t.powf(1.3)).collect();
    let soe = build_soe(beta, mesh.min_step(), 1.0, 1e-12).unwrap();
    let mut fast = FastHistory::new(scheme, beta, 1, soe).unwrap();
    let mut worst: f64 = 0.0;
    for n in 1..t.len() {
        let v = fast_discrete_caputo(&mut fast, n, mesh.step(n), g[n], g[n - 1]).unwrap();
        let row = row_from_nodes(scheme, &t[..=n], beta);
        let direct = discrete_caputo(&row, &g[..=n]).unwrap();
        worst = worst.max(((v - direct) / direct).abs());
    }
    worst
}

#[test]
fn fast_l1_matches_direct_sum() {
    let err = fast_vs_direct(SchemeKind::L1);
    assert!(err <= 1e-11, "relative error {err:e}");
}

#[test]
fn fast_alikhanov_matches_direct_sum() {
    let err = fast_vs_direct(SchemeKind::Alikhanov);
    assert!(err <= 1e-11, "relative error {err:e}");
}

#[test]
fn first_step_is_the_local_term() {
    for scheme in [SchemeKind::L1, SchemeKind::Alikhanov] {
        let soe = build_soe(0.4, 1e-2, 1.0, 1e-10).unwrap();
        let mut fast = FastHistory::new(scheme, 0.4, 1, soe).unwrap();
        let v: f64 = fast_discrete_caputo(&mut fast, 1, 0.1, 2.0, 0.5).unwrap();
        let row = row_from_nodes(scheme, &[0.0, 0.1], 0.4);
        assert_eq!(v, row.leading() * 1.5);
    }
}

#[test]
fn constant_signal_has_zero_derivative() {
    for scheme in [SchemeKind::L1, SchemeKind::Alikhanov] {
        let soe = build_soe(0.7, 1e-2, 1.0, 1e-10).unwrap();
        let mut fast = FastHistory::new(scheme, 0.7, 1, soe).unwrap();
        for n in 1..=50 {
            assert_eq!(
                fast_discrete_caputo(&mut fast, n, 0.02, 3.0, 3.0).unwrap(),
                0.0
            );
        }
    }
}

#[test]
fn out_of_order_call_is_rejected() {
    let soe = build_soe(0.7, 1e-2, 1.0, 1e-10).unwrap();
    let mut fast = FastHistory::new(SchemeKind::L1, 0.7, 1, soe).unwrap();
    assert!(fast_discrete_caputo(&mut fast, 2, 0.02, 1.0, 0.0).is_err());
}

#[test]
fn per_step_cost_does_not_grow_with_depth() {
    let lanes = 7;
    for scheme in [SchemeKind::L1, SchemeKind::Alikhanov] {
        let soe = build_soe(0.5, 1e-3, 1.0, 1e-10).unwrap();
        let modes = soe.modes() as u64;
        let mut fast = FastHistory::new(scheme, 0.5, lanes, soe).unwrap();
        let mut out = vec![0.0; lanes];
        let diff = vec![1e-3; lanes];
        let mut costs = Vec::new();
        for _ in 0..400 {
            let before = fast.prepare_ops();
            fast.prepare(1e-3, &mut out).unwrap();
            fast.commit(1e-3, &diff).unwrap();
            costs.push(fast.prepare_ops() - before + fast.last_commit_ops());
        }
        assert!(costs[5..].iter().all(|&c| c == costs[5]));
        assert!(costs[5] <= 2 * modes * lanes as u64);
    }
}

#[test]
fn direct_history_matches_kernel_rows() {
    let mesh = graded_mesh(1.0f64, 20, 2.0).unwrap();
    let t = mesh.nodes();
    let g: Vec<f64> = t.iter().map(|t| (3.0 * t).sin()).collect();
    let mut hist = DirectHistory::new(SchemeKind::Alikhanov, 0.3, 1);
    for n in 1..t.len() {
        let mut h = [0.0];
        let lead = hist.prepare(mesh.step(n), &mut h).unwrap();
        let diff = g[n] - g[n - 1];
        let row = row_from_nodes(SchemeKind::Alikhanov, &t[..=n], 0.3);
        let direct = discrete_caputo(&row, &g[..=n]).unwrap();
        assert!((lead * diff + h[0] - direct).abs() <= 1e-13 * direct.abs().max(1.0));
        hist.commit(mesh.step(n), &[diff]).unwrap();
    }
}
