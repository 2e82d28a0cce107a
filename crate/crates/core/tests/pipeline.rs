use smooth_smc::certificate::build_certificate;
use smooth_smc::disturbance::DisturbanceSpec;
use smooth_smc::experiment::{run_cell, simulate_cell, Experiment, Method, RunConfig};
use smooth_smc::laws::{critical_k4, GainConfig};
use smooth_smc::metrics::ExperimentReport;
use smooth_smc::sim::{simulate_controller, simulate_observer, PlantSource, SimConfig, SmoothController};
use smooth_smc::trajectory::Trajectory;

#[test]
fn unperturbed_state_reaches_origin() {
    let traj = simulate_controller(&GainConfig::reference(), &SimConfig::reference(), &DisturbanceSpec::None { dim: 3 })
        .unwrap();
    let norms = traj.state_norms();
    let tail = traj.times.iter().position(|t| *t >= 8.0).unwrap();
    assert!(norms[tail..].iter().all(|n| *n < 1e-6));
    assert!(traj.v.as_ref().unwrap().iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn unperturbed_state_and_rate_settle_at_fine_step() {
    // The sample-and-hold residual of ẋ1 shrinks roughly like dt²; at
    // dt = 1e-3 it sits near 4e-4, at 2.5e-5 near 2e-7.
    let sim = SimConfig {
        dt: 2.5e-5,
        horizon: 2.0,
        ..SimConfig::reference()
    };
    let traj = simulate_controller(&GainConfig::reference(), &sim, &DisturbanceSpec::None { dim: 3 }).unwrap();
    let rate: Vec<f64> = traj
        .x1
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| ((a - b) / sim.dt).powi(2)).sum::<f64>().sqrt())
        .collect();
    let norms = traj.state_norms();
    let last_x = norms.iter().rposition(|v| *v >= 1e-6).unwrap();
    let last_rate = rate.iter().rposition(|v| *v >= 1e-6).unwrap();
    assert!(traj.times[last_x] < 1.0, "x1 above 1e-6 until t = {}", traj.times[last_x]);
    assert!(traj.times[last_rate] < 1.0, "ẋ1 above 1e-6 until t = {}", traj.times[last_rate]);
}

#[test]
fn lyapunov_decreases_once_adaptation_stops() {
    let sim = SimConfig {
        dt: 1e-4,
        horizon: 3.0,
        ..SimConfig::reference()
    };
    let traj = simulate_controller(&GainConfig::reference(), &sim, &DisturbanceSpec::None { dim: 3 }).unwrap();
    let (v, l0, norms) = (traj.v.as_ref().unwrap(), traj.l0.as_ref().unwrap(), traj.state_norms());
    let frozen = (0..l0.len() - 1).rev().find(|&k| l0[k + 1] > l0[k]).unwrap() + 1;
    assert!(traj.times[frozen] < 1.0);
    for k in frozen..v.len() - 1 {
        if norms[k] > 1e-11 {
            let rate = (v[k + 1] - v[k]) / sim.dt;
            assert!(rate <= 1e-6 * v[k].max(1.0), "t = {}: dV/dt = {rate:e}", traj.times[k]);
        }
    }
}

#[test]
fn repeat_runs_are_bit_identical() {
    for (exp, method) in [(Experiment::Exp2, Method::AmstsmcBaseline), (Experiment::Exp3, Method::Amsdo)] {
        let mut cfg = RunConfig::preset(exp, method).unwrap();
        cfg.sim.horizon = 2.0;
        let a = simulate_cell(&cfg).unwrap().to_csv_string().unwrap();
        let b = simulate_cell(&cfg).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn csv_round_trip_of_real_run() {
    let mut cfg = RunConfig::preset(Experiment::Exp3, Method::AmdoBaseline).unwrap();
    cfg.sim.horizon = 1.0;
    let traj = simulate_cell(&cfg).unwrap();
    let text = traj.to_csv_string().unwrap();
    let back = Trajectory::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, traj);
}

#[test]
fn report_json_round_trip() {
    let mut cfg = RunConfig::preset(Experiment::Exp1, Method::Amssosmc).unwrap();
    cfg.sim.horizon = 2.0;
    let report = run_cell(&cfg).unwrap().report;
    let text = serde_json::to_string(&report).unwrap();
    let back: ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    let echoed: RunConfig = serde_json::from_value(report.config.clone()).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn log_stride_subsamples() {
    let dist = DisturbanceSpec::experiment2();
    let mut sim = SimConfig {
        horizon: 1.0,
        ..SimConfig::reference()
    };
    let full = simulate_controller(&GainConfig::reference(), &sim, &dist).unwrap();
    sim.log_stride = 10;
    let thin = simulate_controller(&GainConfig::reference(), &sim, &dist).unwrap();
    assert_eq!(thin.len(), 101);
    for (i, k) in (0..full.len()).step_by(10).enumerate() {
        assert_eq!(thin.times[i], full.times[k]);
        assert_eq!(thin.x1[i], full.x1[k]);
        assert_eq!(thin.u[i], full.u[k]);
    }
}

#[test]
fn observer_on_recorded_run_matches_live() {
    let cfg = GainConfig::reference();
    let sim = SimConfig {
        horizon: 2.0,
        ..SimConfig::reference()
    };
    let dist = DisturbanceSpec::experiment2();
    let recorded = simulate_controller(&cfg, &sim, &dist).unwrap();
    let replay = simulate_observer(PlantSource::Recorded(&recorded), &cfg, &sim, &dist).unwrap();
    let live = simulate_observer(
        PlantSource::Live(Box::new(SmoothController::new(cfg, 3).unwrap())),
        &cfg,
        &sim,
        &dist,
    )
    .unwrap();
    assert_eq!(replay.x1, recorded.x1);
    assert_eq!(replay.d_hat, live.d_hat);
    let err = replay.estimation_error().unwrap();
    let last = err.last().unwrap();
    assert!(last.iter().all(|e| e.abs() < 0.05), "{last:?}");
}

#[test]
fn final_l0_non_increasing_in_dead_zone() {
    let mut last = f64::INFINITY;
    for eps in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let mut cfg = RunConfig::preset(Experiment::Exp1, Method::Amssosmc).unwrap();
        cfg.gains.epsilon = eps;
        cfg.sim.horizon = 3.0;
        let l0 = run_cell(&cfg).unwrap().report.final_l0;
        assert!(l0 <= last, "eps = {eps}: {l0} > {last}");
        last = l0;
    }
}

#[test]
fn certificate_flips_at_critical_k4() {
    for m in [2.5, 3.0, 4.0, 7.0] {
        let base = GainConfig::reference().with_m(m);
        let k4_star = critical_k4(&base);
        for f in [0.9, 0.999, 1.001, 1.1] {
            let cfg = GainConfig { k4: f * k4_star, ..base };
            let cert = build_certificate(&cfg).unwrap();
            assert_eq!(cert.is_valid(), f > 1.0, "m = {m}, k4 = {f} k4*");
            assert!(cert.p.positive_definite && cert.omega2.positive_definite);
        }
    }
}

#[test]
fn smoother_law_has_smaller_tail_bound_on_every_experiment() {
    for (exp, smooth, base) in [
        (Experiment::Exp1, Method::Amssosmc, Method::AmstsmcBaseline),
        (Experiment::Exp2, Method::Amssosmc, Method::AmstsmcBaseline),
        (Experiment::Exp3, Method::Amsdo, Method::AmdoBaseline),
    ] {
        let s = run_cell(&RunConfig::preset(exp, smooth).unwrap()).unwrap().report;
        let b = run_cell(&RunConfig::preset(exp, base).unwrap()).unwrap().report;
        assert!(s.settled && b.settled, "{exp:?}");
        assert!(s.ultimate_bound < b.ultimate_bound, "{exp:?}");
        assert!(s.chattering_index < b.chattering_index, "{exp:?}");
    }
}
