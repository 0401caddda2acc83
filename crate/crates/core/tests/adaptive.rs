use fracwave::adaptive::{
    relative_difference, run_adaptive, tau_ada, AdaptiveConfig, AdaptiveController, DualStepper,
    KeepPolicy, Warmup,
};
use fracwave::problems::example2;
use fracwave::stepper::KernelMode;
use fracwave::Error;

/// Reports a scripted sequence of estimates and records the trial ends.
struct Scripted {
    t: f64,
    estimates: Vec<f64>,
    ends: Vec<f64>,
}

impl DualStepper<f64> for Scripted {
    type Trial = f64;

    fn time(&self) -> f64 {
        self.t
    }

    fn try_step(&mut self, end: f64) -> fracwave::Result<(f64, f64)> {
        self.ends.push(end);
        let e = if self.estimates.is_empty() {
            0.0
        } else {
            self.estimates.remove(0)
        };
        Ok((e, end))
    }

    fn accept(&mut self, end: f64) -> fracwave::Result<f64> {
        self.t = end;
        Ok(1.0)
    }
}

#[test]
fn proposal_follows_square_root_rule() {
    let cfg = AdaptiveConfig::<f64>::default();
    assert!((tau_ada(1e-3, 0.01, &cfg) - 0.009).abs() < 1e-15);
    assert!((tau_ada(0.25e-3, 0.01, &cfg) - 0.018).abs() < 1e-15);
    assert_eq!(tau_ada(0.0, 0.01, &cfg), cfg.tau_max);
}

#[test]
fn large_estimate_is_retried_at_the_shrink_floor_then_accepted() {
    let cfg = AdaptiveConfig::<f64>::default();
    let mut ctl = AdaptiveController::new(cfg, 0.01, vec![1.0]).unwrap();
    let mut dual = Scripted {
        t: 0.0,
        estimates: vec![10e-3, 10e-3],
        ends: vec![],
    };
    let step = ctl.advance(&mut dual).unwrap();
    // sqrt(1/10) * 0.9 < 2/3, so the retry uses the floor and is accepted regardless.
    assert_eq!(step.retries, 1);
    assert!((dual.ends[1] - 0.01 * 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(ctl.record.rejections, 1);
    assert!((step.t - dual.ends[1]).abs() < 1e-15);
}

#[test]
fn moderate_rejection_retries_with_the_proposal() {
    let cfg = AdaptiveConfig::<f64>::default();
    let mut ctl = AdaptiveController::new(cfg, 0.01, vec![1.0]).unwrap();
    let mut dual = Scripted {
        t: 0.0,
        estimates: vec![1.2e-3, 0.5e-3],
        ends: vec![],
    };
    let step = ctl.advance(&mut dual).unwrap();
    let expected = 0.9 * (1.0f64 / 1.2).sqrt() * 0.01;
    assert!((dual.ends[1] - expected).abs() < 1e-15);
    assert_eq!(step.retries, 1);
    let next = (0.9 * (2.0f64).sqrt() * expected).min(0.1);
    assert!((ctl.next_tau() - next).abs() < 1e-15);
}

#[test]
fn steps_at_the_minimum_are_accepted() {
    let cfg = AdaptiveConfig::<f64>::default();
    let mut ctl = AdaptiveController::new(cfg, 1e-3, vec![1.0]).unwrap();
    let mut dual = Scripted {
        t: 0.0,
        estimates: vec![1.0],
        ends: vec![],
    };
    let step = ctl.advance(&mut dual).unwrap();
    assert_eq!(step.retries, 0);
    assert!(step.estimate > cfg.tol);
}

#[test]
fn retry_limit_is_enforced() {
    let cfg = AdaptiveConfig::<f64> {
        max_retries: 3,
        tau_min: 1e-9,
        ..Default::default()
    };
    let mut ctl = AdaptiveController::new(cfg, 0.01, vec![1.0]).unwrap();
    // Estimates just above tolerance never reach the floor.
    let mut dual = Scripted {
        t: 0.0,
        estimates: vec![1.05e-3; 10],
        ends: vec![],
    };
    assert!(matches!(
        ctl.advance(&mut dual),
        Err(Error::RetryLimit { .. })
    ));
}

#[test]
fn targets_are_hit_exactly() {
    let cfg = AdaptiveConfig::<f64>::default();
    let ctl = AdaptiveController::new(cfg, 0.1, vec![0.5, 2.0]).unwrap();
    assert_eq!(ctl.fit(0.45, 0.1), 0.5);
    assert_eq!(ctl.fit(0.3, 0.1), 0.4);
    // A remainder shorter than tau_min is split in half instead.
    assert!((ctl.fit(0.3995, 0.1) - 0.44975).abs() < 1e-15);
    assert!((ctl.fit(0.35, 0.1495) - 0.425).abs() < 1e-15);
    let mut dual = Scripted {
        t: 0.0,
        estimates: vec![],
        ends: vec![],
    };
    let mut ctl = AdaptiveController::new(cfg, 0.07, vec![0.5, 2.0]).unwrap();
    while !ctl.finished(dual.t) {
        ctl.advance(&mut dual).unwrap();
    }
    assert!(dual.ends.contains(&0.5));
    assert_eq!(dual.t, 2.0);
}

#[test]
fn targets_within_round_off_are_merged() {
    let cfg = AdaptiveConfig::<f64>::default();
    let near = f64::from_bits(0.05f64.to_bits() + 1);
    let ctl = AdaptiveController::new(cfg, 0.01, vec![0.05, near, 0.1]).unwrap();
    assert_eq!(ctl.fit(0.045, 0.01), 0.05);
    assert!((ctl.fit(0.05, 0.01) - 0.06).abs() < 1e-15);
}

#[test]
fn invalid_configurations_are_rejected() {
    let bad = AdaptiveConfig::<f64> {
        tau_min: 0.2,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    assert!(AdaptiveController::new(AdaptiveConfig::<f64>::default(), 0.0, vec![1.0]).is_err());
    assert!("sideways".parse::<KeepPolicy>().is_err());
    assert_eq!("u2".parse::<KeepPolicy>().unwrap(), KeepPolicy::Alikhanov);
}

#[test]
fn short_example2_run_lands_on_outputs() {
    let p = example2(1.5f64, 0.1).unwrap();
    for keep in [
        KeepPolicy::Alikhanov,
        KeepPolicy::L1,
        KeepPolicy::Independent,
    ] {
        let cfg = AdaptiveConfig {
            keep,
            ..Default::default()
        };
        let run = run_adaptive(
            &p,
            16,
            cfg,
            Warmup::standard(1.5),
            KernelMode::fast(),
            &[0.0, 0.05],
        )
        .unwrap();
        let last = run.max_norm_history.last().unwrap().0;
        assert!((last - 0.1).abs() < 1e-14);
        assert_eq!(run.warmup_nodes.len(), 31);
        assert!(run
            .record
            .steps
            .iter()
            .all(|s| s.tau >= cfg.tau_min * (1.0 - 1e-12) / 2.0 && s.tau <= cfg.tau_max));
        let times: Vec<f64> = run.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(times.len(), 2);
        assert_eq!(times[0], 0.0);
        assert!((times[1] - 0.05).abs() < 1e-14);
        let initial = &run.snapshots[0].1;
        assert_eq!(
            relative_difference(
                initial,
                &p.grid(16).unwrap().sample(|x, y| (p.initial)(x, y))
            ),
            0.0
        );
    }
}
