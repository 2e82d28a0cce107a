//! Fixed-step simulation of the perturbed integrator plant `ẋ1 = u + d1(t)`.
//!
//! Feedback laws are sampled once per major step and their output is held
//! over the step. Inside a step the plant is advanced with classical RK4,
//! evaluating the disturbance at the substage times.

use serde::{Deserialize, Serialize};

use crate::certificate::{build_certificate, lyapunov_value, LyapunovCertificate, TransformedState};
use crate::disturbance::DisturbanceSpec;
use crate::error::{Error, Result};
use crate::laws::{
    controller_step, observation_error, observer_step, ControllerState, GainConfig, ObserverState,
    DEFAULT_SINGULAR_TOL,
};
use crate::trajectory::Trajectory;
use crate::vector::{check_dim, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub x1_init: Vec<f64>,
    pub singular_tol: f64,
    pub log_stride: usize,
}

impl SimConfig {
    /// `dt = 1e-3`, `horizon = 10`, `x1(0) = [1, 3, 2]`.
    pub fn reference() -> Self {
        Self {
            dt: 1e-3,
            horizon: 10.0,
            x1_init: vec![1.0, 3.0, 2.0],
            singular_tol: DEFAULT_SINGULAR_TOL,
            log_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSimConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon > self.dt) {
            return bad(format!("horizon must exceed dt, got {}", self.horizon));
        }
        if !(self.singular_tol.is_finite() && self.singular_tol > 0.0) {
            return bad(format!("singular_tol must be positive, got {}", self.singular_tol));
        }
        if self.log_stride == 0 {
            return bad("log_stride must be >= 1".into());
        }
        if self.x1_init.is_empty() || self.x1_init.iter().any(|v| !v.is_finite()) {
            return bad("x1_init must be a non-empty finite vector".into());
        }
        Ok(())
    }

    /// Number of major steps, `round(horizon / dt)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::reference()
    }
}

/// What a law reports at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LawSample {
    /// Control held over the coming step.
    pub u: Vec<f64>,
    /// Adaptive gain used for `u`.
    pub l0: Option<f64>,
    /// Integral term used for `u`; the virtual second state is `d − integral`.
    pub integral: Option<Vec<f64>>,
}

pub trait FeedbackLaw {
    fn dim(&self) -> usize;

    /// Computes the control for the sampled state and advances the law by `dt`.
    fn sample(&mut self, t: f64, x1: &[f64], dt: f64, singular_tol: f64) -> Result<LawSample>;
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroControl {
    pub dim: usize,
}

impl FeedbackLaw for ZeroControl {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&mut self, _t: f64, x1: &[f64], _dt: f64, _tol: f64) -> Result<LawSample> {
        check_dim(self.dim, x1.len())?;
        Ok(LawSample {
            u: vec![0.0; self.dim],
            l0: None,
            integral: None,
        })
    }
}

/// The adaptive smooth second-order sliding-mode controller (`m = 2` gives
/// the super-twisting baseline).
#[derive(Debug, Clone)]
pub struct SmoothController {
    pub cfg: GainConfig,
    pub state: ControllerState,
}

impl SmoothController {
    pub fn new(cfg: GainConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            state: ControllerState::new(dim, &cfg),
            cfg,
        })
    }
}

impl FeedbackLaw for SmoothController {
    fn dim(&self) -> usize {
        self.state.dim()
    }

    fn sample(&mut self, _t: f64, x1: &[f64], dt: f64, singular_tol: f64) -> Result<LawSample> {
        let (u, next) = controller_step(x1, &self.state, &self.cfg, dt, singular_tol)?;
        let prev = std::mem::replace(&mut self.state, next);
        Ok(LawSample {
            u,
            l0: Some(prev.l0),
            integral: Some(prev.integral_term),
        })
    }
}

/// One classical RK4 step for `ẏ = f(t, y)`.
pub fn rk4_step<F>(f: F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let shift = |k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &shift(&k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &shift(&k2, 0.5 * h));
    let k4 = f(t + h, &shift(&k3, h));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn plant_step(x: &[f64], u: &[f64], dist: &DisturbanceSpec, t: f64, dt: f64) -> Vec<f64> {
    rk4_step(
        |s, _y| u.iter().zip(dist.at(s)).map(|(u, d)| u + d).collect(),
        t,
        x,
        dt,
    )
}

fn check_finite(step: usize, t: f64, x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalAbort {
            step,
            t,
            state: x.to_vec(),
        })
    }
}

fn check_inputs(sim: &SimConfig, dist: &DisturbanceSpec, dim: usize) -> Result<()> {
    sim.validate()?;
    dist.validate()?;
    check_dim(dim, sim.x1_init.len())?;
    check_dim(dim, dist.dim())
}

/// Lyapunov value at one sample, from the sliding variable `s`, the integral
/// term, the current disturbance and `L0`.
fn sample_lyapunov(
    cert: &LyapunovCertificate,
    s: &[f64],
    integral: &[f64],
    d: &[f64],
    l0: f64,
    singular_tol: f64,
) -> Result<f64> {
    let x2 = sub(d, integral);
    let xi = TransformedState::from_plant(s, &x2, l0, cert.m, singular_tol)?;
    lyapunov_value(&xi, &cert.p.block)
}

/// Integrates the closed loop under `law`. When a certificate is supplied
/// and the law reports its integral and `L0`, `V` is logged too.
pub fn simulate_closed_loop(
    law: &mut dyn FeedbackLaw,
    sim: &SimConfig,
    dist: &DisturbanceSpec,
    cert: Option<&LyapunovCertificate>,
) -> Result<Trajectory> {
    let dim = law.dim();
    check_inputs(sim, dist, dim)?;
    let steps = sim.steps();
    let mut traj = Trajectory::default();
    let mut l0_log = Vec::new();
    let mut v_log = Vec::new();
    let mut x = sim.x1_init.clone();

    for k in 0..=steps {
        let t = k as f64 * sim.dt;
        let sample = law.sample(t, &x, sim.dt, sim.singular_tol)?;
        check_finite(k, t, &sample.u)?;
        if k % sim.log_stride == 0 {
            let d = dist.at(t);
            if let Some(l0) = sample.l0 {
                l0_log.push(l0);
            }
            if let (Some(cert), Some(l0), Some(integral)) = (cert, sample.l0, &sample.integral) {
                v_log.push(sample_lyapunov(cert, &x, integral, &d, l0, sim.singular_tol)?);
            }
            traj.times.push(t);
            traj.x1.push(x.clone());
            traj.u.push(sample.u.clone());
            traj.d_true.push(d);
        }
        if k < steps {
            x = plant_step(&x, &sample.u, dist, t, sim.dt);
            check_finite(k + 1, t + sim.dt, &x)?;
        }
    }

    let n = traj.len();
    traj.l0 = (l0_log.len() == n).then_some(l0_log);
    traj.v = (v_log.len() == n).then_some(v_log);
    Ok(traj)
}

/// Closed loop under the smooth controller with `cfg`. `V` is logged for
/// `m > 2` (the certificate is undefined for the baseline).
pub fn simulate_controller(cfg: &GainConfig, sim: &SimConfig, dist: &DisturbanceSpec) -> Result<Trajectory> {
    let mut law = SmoothController::new(*cfg, sim.x1_init.len())?;
    let cert = if cfg.m > 2.0 { Some(build_certificate(cfg)?) } else { None };
    simulate_closed_loop(&mut law, sim, dist, cert.as_ref())
}

/// Where the observer's measurements come from.
pub enum PlantSource<'a> {
    /// Simulate the plant under this control law.
    Live(Box<dyn FeedbackLaw + 'a>),
    /// Replay logged `x1` and `u` (log stride must equal the observer `dt`).
    Recorded(&'a Trajectory),
}

impl PlantSource<'_> {
    /// Live plant with `u ≡ 0`.
    pub fn open_loop(dim: usize) -> Self {
        PlantSource::Live(Box::new(ZeroControl { dim }))
    }
}

/// Runs the disturbance observer against a plant and logs `d̂1` next to `d1`.
pub fn simulate_observer(
    source: PlantSource<'_>,
    cfg: &GainConfig,
    sim: &SimConfig,
    dist: &DisturbanceSpec,
) -> Result<Trajectory> {
    cfg.validate()?;
    let cert = if cfg.m > 2.0 { Some(build_certificate(cfg)?) } else { None };
    let mut traj = Trajectory {
        d_hat: Some(Vec::new()),
        l0: Some(Vec::new()),
        v: cert.as_ref().map(|_| Vec::new()),
        ..Default::default()
    };

    let log = |traj: &mut Trajectory, t: f64, x: &[f64], u: &[f64], d: Vec<f64>, obs: &ObserverState, d_hat: Vec<f64>| -> Result<()> {
        if let (Some(cert), Some(v)) = (&cert, traj.v.as_mut()) {
            let e1 = observation_error(x, &obs.z1);
            v.push(sample_lyapunov(cert, &e1, &obs.integral_term, &d, obs.l0, sim.singular_tol)?);
        }
        traj.times.push(t);
        traj.x1.push(x.to_vec());
        traj.u.push(u.to_vec());
        traj.d_true.push(d);
        traj.d_hat.as_mut().expect("observer log").push(d_hat);
        traj.l0.as_mut().expect("observer log").push(obs.l0);
        Ok(())
    };

    match source {
        PlantSource::Live(mut law) => {
            let dim = law.dim();
            check_inputs(sim, dist, dim)?;
            let steps = sim.steps();
            let mut x = sim.x1_init.clone();
            let mut obs = ObserverState::new(x.clone(), cfg);
            for k in 0..=steps {
                let t = k as f64 * sim.dt;
                let u = law.sample(t, &x, sim.dt, sim.singular_tol)?.u;
                let (d_hat, next) = observer_step(&x, &u, &obs, cfg, sim.dt, sim.singular_tol)?;
                check_finite(k, t, &d_hat)?;
                if k % sim.log_stride == 0 {
                    log(&mut traj, t, &x, &u, dist.at(t), &obs, d_hat)?;
                }
                obs = next;
                if k < steps {
                    x = plant_step(&x, &u, dist, t, sim.dt);
                    check_finite(k + 1, t + sim.dt, &x)?;
                }
            }
        }
        PlantSource::Recorded(rec) => {
            sim.validate()?;
            if rec.len() < 2 {
                return Err(Error::InvalidSimConfig("recorded trajectory needs at least 2 samples".into()));
            }
            for w in rec.times.windows(2) {
                let spacing = w[1] - w[0];
                if (spacing - sim.dt).abs() > 1e-9 * sim.dt.max(1.0) {
                    return Err(Error::InvalidSimConfig(format!(
                        "recorded spacing {spacing} does not match dt {}",
                        sim.dt
                    )));
                }
            }
            let dim = rec.dim();
            check_dim(dim, dist.dim())?;
            let mut obs = ObserverState::new(rec.x1[0].clone(), cfg);
            for k in 0..rec.len() {
                let (t, x, u) = (rec.times[k], &rec.x1[k], &rec.u[k]);
                let (d_hat, next) = observer_step(x, u, &obs, cfg, sim.dt, sim.singular_tol)?;
                check_finite(k, t, &d_hat)?;
                if k % sim.log_stride == 0 {
                    log(&mut traj, t, x, u, rec.d_true[k].clone(), &obs, d_hat)?;
                }
                obs = next;
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::norm;

    fn short(dt: f64, horizon: f64, x1: Vec<f64>) -> SimConfig {
        SimConfig {
            dt,
            horizon,
            x1_init: x1,
            ..SimConfig::reference()
        }
    }

    #[test]
    fn rk4_exponential() {
        let mut y = vec![1.0];
        for k in 0..100 {
            y = rk4_step(|_, y| vec![y[0]], k as f64 * 0.01, &y, 0.01);
        }
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_control_no_disturbance_is_equilibrium() {
        let sim = short(1e-3, 1.0, vec![1.0, -2.0, 0.5]);
        let traj = simulate_closed_loop(
            &mut ZeroControl { dim: 3 },
            &sim,
            &DisturbanceSpec::None { dim: 3 },
            None,
        )
        .unwrap();
        assert_eq!(traj.len(), 1001);
        assert!(traj.x1.iter().all(|x| x == &sim.x1_init));
        assert!(traj.l0.is_none() && traj.v.is_none());
    }

    #[test]
    fn zero_control_constant_disturbance_is_linear() {
        let sim = short(1e-3, 2.0, vec![0.0; 3]);
        let d = DisturbanceSpec::experiment1();
        let traj = simulate_closed_loop(&mut ZeroControl { dim: 3 }, &sim, &d, None).unwrap();
        let dv = d.at(0.0);
        for (t, x) in traj.times.iter().zip(&traj.x1) {
            for (xi, di) in x.iter().zip(&dv) {
                assert!((xi - t * di).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_stride_spacing() {
        let sim = SimConfig {
            log_stride: 10,
            ..short(1e-3, 1.0, vec![1.0, 3.0, 2.0])
        };
        let traj = simulate_controller(&GainConfig::reference(), &sim, &DisturbanceSpec::experiment1()).unwrap();
        assert_eq!(traj.len(), 101);
        for w in traj.times.windows(2) {
            assert!((w[1] - w[0] - 1e-2).abs() < 1e-12);
        }
        assert!(traj.v.is_some());
    }

    #[test]
    fn baseline_has_no_lyapunov_column() {
        let sim = short(1e-3, 0.5, vec![1.0, 3.0, 2.0]);
        let traj = simulate_controller(&GainConfig::baseline(), &sim, &DisturbanceSpec::experiment1()).unwrap();
        assert!(traj.v.is_none());
        assert!(traj.l0.is_some());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let sim = short(1e-3, 0.5, vec![1.0, 3.0]);
        assert!(simulate_controller(&GainConfig::reference(), &sim, &DisturbanceSpec::experiment1()).is_err());
    }

    #[test]
    fn numerical_abort_reports_step() {
        struct Blowup;
        impl FeedbackLaw for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn sample(&mut self, t: f64, _x: &[f64], _dt: f64, _tol: f64) -> Result<LawSample> {
                let u = if t > 0.0045 { f64::INFINITY } else { 1.0 };
                Ok(LawSample { u: vec![u], l0: None, integral: None })
            }
        }
        let sim = short(1e-3, 1.0, vec![0.0]);
        let err = simulate_closed_loop(&mut Blowup, &sim, &DisturbanceSpec::None { dim: 1 }, None).unwrap_err();
        assert!(matches!(err, Error::NumericalAbort { step: 5, .. }), "{err:?}");
    }

    #[test]
    fn observer_without_disturbance_stays_at_zero() {
        let sim = short(1e-3, 2.0, vec![1.0, 3.0, 2.0]);
        let traj = simulate_observer(
            PlantSource::open_loop(3),
            &GainConfig::reference(),
            &sim,
            &DisturbanceSpec::None { dim: 3 },
        )
        .unwrap();
        assert!(traj.d_hat.unwrap().iter().all(|d| d.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn recorded_source_reproduces_live_run() {
        let sim = short(1e-3, 2.0, vec![1.0, 3.0, 2.0]);
        let dist = DisturbanceSpec::experiment3();
        let cfg = GainConfig::reference();
        let live = simulate_observer(PlantSource::open_loop(3), &cfg, &sim, &dist).unwrap();
        let plant = simulate_closed_loop(&mut ZeroControl { dim: 3 }, &sim, &dist, None).unwrap();
        let replay = simulate_observer(PlantSource::Recorded(&plant), &cfg, &sim, &dist).unwrap();
        assert_eq!(live, replay);

        let coarse = SimConfig { dt: 2e-3, ..sim };
        assert!(simulate_observer(PlantSource::Recorded(&plant), &cfg, &coarse, &dist).is_err());
    }

    #[test]
    fn observer_converges_on_constant_disturbance() {
        let sim = short(1e-3, 10.0, vec![1.0, 3.0, 2.0]);
        let dist = DisturbanceSpec::Constant { value: vec![0.5, -1.0, 0.25] };
        let traj = simulate_observer(PlantSource::open_loop(3), &GainConfig::reference(), &sim, &dist).unwrap();
        let err = traj.estimation_error().unwrap();
        let tail = &err[err.len() * 8 / 10..];
        assert!(tail.iter().all(|e| norm(e) < 1e-2));
    }
}
