//! Reference experiments and the (method × scenario) cell runner.
//!
//! All three reference scenarios start from `x1(0) = [1, 3, 2]` and use the
//! gains `m = 3, k = (2, 2.5, 4, 30), κ = 10`; the baselines differ only in
//! `m = 2`. Experiments I and II compare controllers under a constant and a
//! time-varying disturbance; Experiment III compares disturbance observers.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certificate::{build_certificate, convergence_estimate, ConvergenceInputs};
use crate::disturbance::DisturbanceSpec;
use crate::error::{Error, Result};
use crate::laws::{check_gain_condition, GainConfig};
use crate::metrics::{
    chattering_index, settling_time, tail_start, ultimate_bound, CertificateSummary, ExperimentReport, Signal,
    CONTROLLER_SETTLING_FRACTION, DEFAULT_TAIL_FRACTION, OBSERVER_SETTLING_THRESHOLD,
};
use crate::sim::{simulate_controller, simulate_observer, PlantSource, SimConfig};
use crate::trajectory::Trajectory;
use crate::vector::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
    Custom,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Custom => "custom",
        }
    }

    /// Preset disturbance; `None` for custom scenarios.
    pub fn disturbance(self) -> Option<DisturbanceSpec> {
        match self {
            Experiment::Exp1 => Some(DisturbanceSpec::experiment1()),
            Experiment::Exp2 => Some(DisturbanceSpec::experiment2()),
            Experiment::Exp3 => Some(DisturbanceSpec::experiment3()),
            Experiment::Custom => None,
        }
    }

    pub fn accepts(self, method: Method) -> bool {
        match self {
            Experiment::Exp1 | Experiment::Exp2 => method.is_controller(),
            Experiment::Exp3 => !method.is_controller(),
            Experiment::Custom => true,
        }
    }

    /// Methods compared in the reference presentation.
    pub fn reference_methods(self) -> Vec<Method> {
        match self {
            Experiment::Exp3 => vec![Method::Amsdo, Method::AmdoBaseline],
            _ => vec![Method::Amssosmc, Method::AmstsmcBaseline],
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Experiment::Exp1),
            "exp2" => Ok(Experiment::Exp2),
            "exp3" => Ok(Experiment::Exp3),
            "custom" => Ok(Experiment::Custom),
            _ => Err(Error::Unsupported(format!("unknown experiment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Smooth controller (`m > 2`).
    Amssosmc,
    /// Super-twisting controller (`m = 2`).
    AmstsmcBaseline,
    /// Smooth disturbance observer (`m > 2`).
    Amsdo,
    /// Super-twisting disturbance observer (`m = 2`).
    AmdoBaseline,
}

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Method::Amssosmc => "amssosmc",
            Method::AmstsmcBaseline => "amstsmc-baseline",
            Method::Amsdo => "amsdo",
            Method::AmdoBaseline => "amdo-baseline",
        }
    }

    pub fn is_controller(self) -> bool {
        matches!(self, Method::Amssosmc | Method::AmstsmcBaseline)
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Method::AmstsmcBaseline | Method::AmdoBaseline)
    }

    /// Gains this method actually runs with: baselines force `m = 2`.
    pub fn resolve_gains(self, gains: GainConfig) -> GainConfig {
        if self.is_baseline() {
            gains.with_m(2.0)
        } else {
            gains
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amssosmc" => Ok(Method::Amssosmc),
            "amstsmc-baseline" => Ok(Method::AmstsmcBaseline),
            "amsdo" => Ok(Method::Amsdo),
            "amdo-baseline" => Ok(Method::AmdoBaseline),
            _ => Err(Error::Unsupported(format!("unknown method {s:?}"))),
        }
    }
}

/// Everything needed to reproduce one cell, with defaults materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub method: Method,
    pub gains: GainConfig,
    pub sim: SimConfig,
    pub disturbance: DisturbanceSpec,
    pub tail_fraction: f64,
    pub settling_threshold: f64,
}

impl RunConfig {
    /// Reference configuration for a preset experiment.
    pub fn preset(experiment: Experiment, method: Method) -> Result<Self> {
        let disturbance = experiment.disturbance().ok_or_else(|| {
            Error::Unsupported("custom experiments need an explicit disturbance".into())
        })?;
        Self::new(experiment, method, GainConfig::reference(), SimConfig::reference(), disturbance)
    }

    /// Resolves method-specific gains and the default settling threshold.
    pub fn new(
        experiment: Experiment,
        method: Method,
        gains: GainConfig,
        sim: SimConfig,
        disturbance: DisturbanceSpec,
    ) -> Result<Self> {
        if !experiment.accepts(method) {
            return Err(Error::Unsupported(format!(
                "method {} cannot run on experiment {}",
                method.id(),
                experiment.id()
            )));
        }
        let settling_threshold = default_threshold(method, &sim);
        let cfg = Self {
            experiment,
            method,
            gains: method.resolve_gains(gains),
            sim,
            disturbance,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            settling_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.experiment.accepts(self.method) {
            return Err(Error::Unsupported(format!(
                "method {} cannot run on experiment {}",
                self.method.id(),
                self.experiment.id()
            )));
        }
        if self.method.is_baseline() != self.gains.is_baseline() {
            return Err(Error::InvalidGains(format!(
                "method {} requires {} m = 2, got m = {}",
                self.method.id(),
                if self.method.is_baseline() { "" } else { "non-baseline" },
                self.gains.m
            )));
        }
        self.gains.validate()?;
        self.sim.validate()?;
        self.disturbance.validate()?;
        if self.disturbance.dim() != self.sim.x1_init.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sim.x1_init.len(),
                got: self.disturbance.dim(),
            });
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::OutOfRange(format!("tail_fraction {}", self.tail_fraction)));
        }
        if !(self.settling_threshold > 0.0) {
            return Err(Error::OutOfRange(format!("settling_threshold {}", self.settling_threshold)));
        }
        Ok(())
    }

    pub fn cell_id(&self) -> String {
        format!("{}_{}", self.experiment.id(), self.method.id())
    }
}

pub fn default_threshold(method: Method, sim: &SimConfig) -> f64 {
    if method.is_controller() {
        CONTROLLER_SETTLING_FRACTION * norm(&sim.x1_init)
    } else {
        OBSERVER_SETTLING_THRESHOLD
    }
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub config: RunConfig,
    pub trajectory: Trajectory,
    pub report: ExperimentReport,
}

pub fn simulate_cell(cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.method.is_controller() {
        simulate_controller(&cfg.gains, &cfg.sim, &cfg.disturbance)
    } else {
        simulate_observer(
            PlantSource::open_loop(cfg.sim.x1_init.len()),
            &cfg.gains,
            &cfg.sim,
            &cfg.disturbance,
        )
    }
}

pub fn run_cell(cfg: &RunConfig) -> Result<CellOutcome> {
    let trajectory = simulate_cell(cfg)?;
    let report = build_report(cfg, &trajectory)?;
    Ok(CellOutcome {
        config: cfg.clone(),
        trajectory,
        report,
    })
}

pub fn build_report(cfg: &RunConfig, traj: &Trajectory) -> Result<ExperimentReport> {
    let (settle_sig, bound_sig, chatter_sig) = if cfg.method.is_controller() {
        (Signal::State, Signal::State, Signal::Control)
    } else {
        (Signal::Error, Signal::Error, Signal::Estimate)
    };
    let settling = settling_time(traj, settle_sig, cfg.settling_threshold)?;
    let gain_check = check_gain_condition(&cfg.gains);
    let final_l0 = traj.final_l0().unwrap_or(cfg.gains.l0_init);

    let certificate_summary = if cfg.gains.m > 2.0 {
        let cert = build_certificate(&cfg.gains)?;
        // The certified inequality is driven by d for the controller and by
        // ḋ for the observer.
        let delta = if cfg.method.is_controller() {
            cfg.disturbance.norm_bound()
        } else {
            cfg.disturbance.derivative_bound()
        };
        let v0 = traj.v.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.0);
        let estimate_at_start = convergence_estimate(&cert, ConvergenceInputs::at_start(&cfg.gains, v0, delta)).ok();
        let after = ConvergenceInputs {
            l0: final_l0,
            l0_dot: 0.0,
            ..ConvergenceInputs::at_start(&cfg.gains, v0, delta)
        };
        let estimate_after_adaptation = convergence_estimate(&cert, after).ok();
        let tail_max_v = traj.v.as_ref().map(|v| {
            let start = tail_start(&traj.times, cfg.tail_fraction);
            v[start..].iter().copied().fold(0.0, f64::max)
        });
        Some(CertificateSummary {
            gain_status: gain_check.status,
            gain_lhs: gain_check.lhs,
            gain_rhs: gain_check.rhs,
            p_positive_definite: cert.p.positive_definite,
            q_positive_definite: cert.q.positive_definite,
            omega1_positive_definite: cert.omega1.positive_definite,
            omega2_positive_definite: cert.omega2.positive_definite,
            p1: cert.p1,
            constants: cert.constants,
            estimate_at_start,
            estimate_after_adaptation,
            tail_max_v,
        })
    } else {
        None
    };

    Ok(ExperimentReport {
        method_id: cfg.method.id().to_string(),
        scenario_id: cfg.experiment.id().to_string(),
        settled: settling.is_settled(),
        settling_time: settling,
        settling_signal: settle_sig,
        settling_threshold: cfg.settling_threshold,
        ultimate_bound: ultimate_bound(traj, bound_sig, cfg.tail_fraction)?,
        chattering_index: chattering_index(traj, chatter_sig, cfg.tail_fraction)?,
        chattering_signal: chatter_sig,
        tail_fraction: cfg.tail_fraction,
        final_l0,
        gain_status: gain_check.status,
        certificate_summary,
        dt_used: cfg.sim.dt,
        horizon: cfg.sim.horizon,
        config: serde_json::to_value(cfg).map_err(|e| Error::Unsupported(e.to_string()))?,
    })
}
