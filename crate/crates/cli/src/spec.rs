//! Run specifications: config-file schema, flag overlay and resolution
//! into a [`RunConfig`].
//!
//! The file schema matches the serialized [`RunConfig`], so a `config.json`
//! written next to any run can be fed back with `--config` to reproduce it.
//! Every field is optional; flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smooth_smc::disturbance::DisturbanceSpec;
use smooth_smc::experiment::{default_threshold, Experiment, Method, RunConfig};
use smooth_smc::laws::GainConfig;
use smooth_smc::metrics::DEFAULT_TAIL_FRACTION;
use smooth_smc::sim::SimConfig;

use crate::CliError;

pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainOverrides {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub k4: Option<f64>,
    pub m: Option<f64>,
    pub kappa: Option<f64>,
    pub epsilon: Option<f64>,
    #[serde(rename = "L0_init")]
    pub l0_init: Option<f64>,
}

impl GainOverrides {
    fn overlay(&mut self, top: &GainOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if top.$f.is_some() { self.$f = top.$f; } )* };
        }
        take!(k1, k2, k3, k4, m, kappa, epsilon, l0_init);
    }

    pub fn apply(&self, mut g: GainConfig) -> GainConfig {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { g.$f = v; } )* };
        }
        set!(k1, k2, k3, k4, m, kappa, epsilon, l0_init);
        g
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOverrides {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub x1_init: Option<Vec<f64>>,
    pub singular_tol: Option<f64>,
    pub log_stride: Option<usize>,
}

impl SimOverrides {
    fn overlay(&mut self, top: &SimOverrides) {
        if top.dt.is_some() {
            self.dt = top.dt;
        }
        if top.horizon.is_some() {
            self.horizon = top.horizon;
        }
        if top.x1_init.is_some() {
            self.x1_init.clone_from(&top.x1_init);
        }
        if top.singular_tol.is_some() {
            self.singular_tol = top.singular_tol;
        }
        if top.log_stride.is_some() {
            self.log_stride = top.log_stride;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub experiment: Option<Experiment>,
    pub method: Option<Method>,
    pub gains: GainOverrides,
    pub sim: SimOverrides,
    pub disturbance: Option<DisturbanceSpec>,
    pub tail_fraction: Option<f64>,
    pub settling_threshold: Option<f64>,
    pub out: Option<PathBuf>,
}

impl RunSpec {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RunSpec) -> Self {
        if top.experiment.is_some() {
            self.experiment = top.experiment;
        }
        if top.method.is_some() {
            self.method = top.method;
        }
        self.gains.overlay(&top.gains);
        self.sim.overlay(&top.sim);
        if top.disturbance.is_some() {
            self.disturbance.clone_from(&top.disturbance);
        }
        if top.tail_fraction.is_some() {
            self.tail_fraction = top.tail_fraction;
        }
        if top.settling_threshold.is_some() {
            self.settling_threshold = top.settling_threshold;
        }
        if top.out.is_some() {
            self.out.clone_from(&top.out);
        }
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    /// Resolved gains before any method-specific adjustment.
    pub fn gains(&self) -> GainConfig {
        self.gains.apply(GainConfig::reference())
    }

    /// Resolves the cell for `method`. An explicit `m` other than 2 on a
    /// baseline method is rejected unless `force_baseline_m` is set, in
    /// which case baselines silently run with `m = 2`.
    pub fn resolve_for(&self, method: Method, force_baseline_m: bool) -> Result<RunConfig, CliError> {
        let experiment = self
            .experiment
            .ok_or_else(|| CliError::Usage("no experiment given (--experiment or config file)".into()))?;
        if !experiment.accepts(method) {
            return Err(CliError::Usage(format!(
                "method {} cannot run on experiment {} ({} expects {} methods)",
                method.id(),
                experiment.id(),
                experiment.id(),
                if method.is_controller() { "observer" } else { "controller" }
            )));
        }
        if method.is_baseline() && !force_baseline_m {
            if let Some(m) = self.gains.m.filter(|m| *m != 2.0) {
                return Err(CliError::Usage(format!("method {} runs with m = 2, got m = {m}", method.id())));
            }
        }

        let reference = SimConfig::reference();
        let sim = SimConfig {
            dt: self.sim.dt.unwrap_or(reference.dt),
            horizon: self.sim.horizon.unwrap_or(reference.horizon),
            x1_init: self.sim.x1_init.clone().unwrap_or(reference.x1_init),
            singular_tol: self.sim.singular_tol.unwrap_or(reference.singular_tol),
            log_stride: self.sim.log_stride.unwrap_or(reference.log_stride),
        };

        let disturbance = match experiment.disturbance() {
            Some(preset) => {
                if self.disturbance.as_ref().is_some_and(|d| *d != preset) {
                    return Err(CliError::Usage(format!(
                        "experiment {} fixes its disturbance; use --experiment custom to supply one",
                        experiment.id()
                    )));
                }
                if sim.x1_init != SimConfig::reference().x1_init {
                    return Err(CliError::Usage(format!(
                        "experiment {} fixes x1(0) = [1, 3, 2]; use --experiment custom to change it",
                        experiment.id()
                    )));
                }
                preset
            }
            None => {
                let d = self
                    .disturbance
                    .clone()
                    .ok_or_else(|| CliError::Usage("custom experiments need a disturbance in the config file".into()))?;
                if self.sim.x1_init.is_none() {
                    return Err(CliError::Usage("custom experiments need sim.x1_init in the config file".into()));
                }
                d
            }
        };

        let gains = method.resolve_gains(self.gains());
        let cfg = RunConfig {
            experiment,
            method,
            gains,
            tail_fraction: self.tail_fraction.unwrap_or(DEFAULT_TAIL_FRACTION),
            settling_threshold: self.settling_threshold.unwrap_or_else(|| default_threshold(method, &sim)),
            sim,
            disturbance,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let method = self
            .method
            .ok_or_else(|| CliError::Usage("no method given (--method or config file)".into()))?;
        self.resolve_for(method, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(experiment: Experiment, method: Method) -> RunSpec {
        RunSpec {
            experiment: Some(experiment),
            method: Some(method),
            ..RunSpec::default()
        }
    }

    #[test]
    fn preset_resolution_matches_library_preset() {
        let cfg = spec(Experiment::Exp2, Method::Amssosmc).resolve().unwrap();
        assert_eq!(cfg, RunConfig::preset(Experiment::Exp2, Method::Amssosmc).unwrap());
        let cfg = spec(Experiment::Exp1, Method::AmstsmcBaseline).resolve().unwrap();
        assert_eq!(cfg.gains.m, 2.0);
    }

    #[test]
    fn written_config_round_trips() {
        let mut s = spec(Experiment::Exp3, Method::Amsdo);
        s.gains.k4 = Some(40.0);
        s.sim.dt = Some(5e-4);
        let cfg = s.resolve().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.resolve().unwrap(), cfg);
    }

    #[test]
    fn flags_override_file() {
        let mut file = spec(Experiment::Exp1, Method::Amssosmc);
        file.gains.k4 = Some(40.0);
        file.gains.k1 = Some(3.0);
        let flags = RunSpec {
            gains: GainOverrides {
                k4: Some(50.0),
                ..GainOverrides::default()
            },
            ..RunSpec::default()
        };
        let g = file.overlay(&flags).gains();
        assert_eq!((g.k1, g.k4), (3.0, 50.0));
    }

    #[test]
    fn pairing_and_baseline_m_rules() {
        assert!(matches!(spec(Experiment::Exp3, Method::Amssosmc).resolve(), Err(CliError::Usage(_))));
        assert!(matches!(spec(Experiment::Exp1, Method::Amsdo).resolve(), Err(CliError::Usage(_))));
        let mut s = spec(Experiment::Exp1, Method::AmstsmcBaseline);
        s.gains.m = Some(3.0);
        assert!(matches!(s.resolve(), Err(CliError::Usage(_))));
        assert_eq!(s.resolve_for(Method::AmstsmcBaseline, true).unwrap().gains.m, 2.0);
    }

    #[test]
    fn presets_fix_the_scenario() {
        let mut s = spec(Experiment::Exp1, Method::Amssosmc);
        s.disturbance = Some(DisturbanceSpec::experiment2());
        assert!(s.resolve().is_err());
        let mut s = spec(Experiment::Exp1, Method::Amssosmc);
        s.sim.x1_init = Some(vec![1.0, 1.0, 1.0]);
        assert!(s.resolve().is_err());
        assert!(spec(Experiment::Custom, Method::Amssosmc).resolve().is_err());

        let mut s = spec(Experiment::Custom, Method::Amssosmc);
        s.disturbance = Some(DisturbanceSpec::Constant { value: vec![0.3, -0.1] });
        s.sim.x1_init = Some(vec![2.0, -1.0]);
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.sim.x1_init.len(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunSpec>(r#"{"gains": {"k5": 1.0}}"#).is_err());
    }
}
