//! Settling time, ultimate bound and chattering index of a trajectory.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::certificate::{ConvergenceEstimate, DecayConstants};
use crate::error::{Error, Result};
use crate::laws::GainStatus;
use crate::trajectory::Trajectory;
use crate::vector::norm;

/// Default tail window for bounds and chattering.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;
/// Controller settling threshold, relative to `‖x1(0)‖`.
pub const CONTROLLER_SETTLING_FRACTION: f64 = 0.01;
/// Observer settling threshold on `‖d̂1 − d1‖`.
pub const OBSERVER_SETTLING_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    /// `x1`
    State,
    /// `d̂1 − d1`
    Error,
    /// `u`
    Control,
    /// `d̂1`
    Estimate,
}

impl Signal {
    fn series(self, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
        let missing = || Error::Unsupported(format!("trajectory has no {self:?} signal"));
        Ok(match self {
            Signal::State => traj.x1.clone(),
            Signal::Control => traj.u.clone(),
            Signal::Estimate => traj.d_hat.clone().ok_or_else(missing)?,
            Signal::Error => traj.estimation_error().ok_or_else(missing)?,
        })
    }

    pub fn norms(self, traj: &Trajectory) -> Result<Vec<f64>> {
        Ok(self.series(traj)?.iter().map(|v| norm(v)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SettlingTime {
    Settled(f64),
    NotSettled,
}

impl SettlingTime {
    pub fn time(self) -> Option<f64> {
        match self {
            SettlingTime::Settled(t) => Some(t),
            SettlingTime::NotSettled => None,
        }
    }

    pub fn is_settled(self) -> bool {
        matches!(self, SettlingTime::Settled(_))
    }
}

impl std::fmt::Display for SettlingTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SettlingTime::Settled(t) => write!(f, "{t}"),
            SettlingTime::NotSettled => f.write_str("not settled"),
        }
    }
}

impl Serialize for SettlingTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SettlingTime::Settled(t) => s.serialize_f64(*t),
            SettlingTime::NotSettled => s.serialize_str("not settled"),
        }
    }
}

impl<'de> Deserialize<'de> for SettlingTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Time(f64),
            Label(String),
        }
        match Raw::deserialize(d)? {
            Raw::Time(t) => Ok(SettlingTime::Settled(t)),
            Raw::Label(s) if s == "not settled" => Ok(SettlingTime::NotSettled),
            Raw::Label(s) => Err(serde::de::Error::custom(format!("unexpected settling time {s:?}"))),
        }
    }
}

/// Earliest logged time after which the norm stays below `threshold`.
pub fn settling_time_of(times: &[f64], norms: &[f64], threshold: f64) -> SettlingTime {
    match norms.iter().rposition(|&v| !(v < threshold)) {
        None => times.first().map_or(SettlingTime::NotSettled, |&t| SettlingTime::Settled(t)),
        Some(last) if last + 1 < times.len() => SettlingTime::Settled(times[last + 1]),
        Some(_) => SettlingTime::NotSettled,
    }
}

pub fn settling_time(traj: &Trajectory, signal: Signal, threshold: f64) -> Result<SettlingTime> {
    if !(threshold > 0.0) {
        return Err(Error::OutOfRange(format!("threshold must be positive, got {threshold}")));
    }
    Ok(settling_time_of(&traj.times, &signal.norms(traj)?, threshold))
}

fn check_fraction(tail_fraction: f64) -> Result<()> {
    if tail_fraction > 0.0 && tail_fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("tail fraction must lie in (0, 1), got {tail_fraction}")))
    }
}

/// Index of the first sample in the final `tail_fraction` of the time span.
pub fn tail_start(times: &[f64], tail_fraction: f64) -> usize {
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return 0;
    };
    let cut = t1 - tail_fraction * (t1 - t0);
    times.partition_point(|&t| t < cut - 1e-12 * (1.0 + cut.abs()))
}

pub fn ultimate_bound(traj: &Trajectory, signal: Signal, tail_fraction: f64) -> Result<f64> {
    check_fraction(tail_fraction)?;
    let norms = signal.norms(traj)?;
    let start = tail_start(&traj.times, tail_fraction);
    if start >= norms.len() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(norms[start..].iter().copied().fold(0.0, f64::max))
}

/// Total variation per second of a vector series over a window.
pub fn total_variation_rate(times: &[f64], series: &[Vec<f64>]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: series.len() });
    }
    let tv: f64 = series
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum();
    let span = times[times.len() - 1] - times[0];
    Ok(tv / span)
}

pub fn chattering_index(traj: &Trajectory, signal: Signal, tail_fraction: f64) -> Result<f64> {
    check_fraction(tail_fraction)?;
    let series = signal.series(traj)?;
    let start = tail_start(&traj.times, tail_fraction);
    total_variation_rate(&traj.times[start..], &series[start..])
}

/// Certificate data attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub gain_status: GainStatus,
    pub gain_lhs: f64,
    pub gain_rhs: f64,
    pub p_positive_definite: bool,
    pub q_positive_definite: bool,
    pub omega1_positive_definite: bool,
    pub omega2_positive_definite: bool,
    pub p1: f64,
    pub constants: Option<DecayConstants>,
    /// Coefficients frozen at `t = 0` with `L̇0 = κ`.
    pub estimate_at_start: Option<ConvergenceEstimate>,
    /// Coefficients at the final `L0` with adaptation stopped.
    pub estimate_after_adaptation: Option<ConvergenceEstimate>,
    /// Largest logged `V` over the tail window, for comparison with the residual level.
    #[serde(rename = "tail_max_V")]
    pub tail_max_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method_id: String,
    pub scenario_id: String,
    pub settled: bool,
    pub settling_time: SettlingTime,
    pub settling_signal: Signal,
    pub settling_threshold: f64,
    pub ultimate_bound: f64,
    pub chattering_index: f64,
    pub chattering_signal: Signal,
    pub tail_fraction: f64,
    #[serde(rename = "final_L0")]
    pub final_l0: f64,
    pub gain_status: GainStatus,
    pub certificate_summary: Option<CertificateSummary>,
    pub dt_used: f64,
    pub horizon: f64,
    /// Full resolved run configuration.
    pub config: serde_json::Value,
}

/// Header of the comparison table.
pub const COMPARISON_HEADER: &str = "method,scenario,settling_time,ultimate_bound,chattering_index,final_L0,dt";

impl ExperimentReport {
    pub fn comparison_row(&self) -> String {
        format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{:e}",
            self.method_id,
            self.scenario_id,
            self.settling_time,
            self.ultimate_bound,
            self.chattering_index,
            self.final_l0,
            self.dt_used
        )
    }
}

pub fn comparison_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.comparison_row());
        out.push('\n');
    }
    out
}
