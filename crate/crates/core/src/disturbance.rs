use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::norm;

/// One component `amplitude · sin(frequency · t)` (or `cos` when `cosine`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidChannel {
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    #[serde(rename = "phase_is_cosine")]
    pub cosine: bool,
}

impl SinusoidChannel {
    pub const fn sin(amplitude: f64, frequency: f64) -> Self {
        Self { amplitude, frequency, cosine: false }
    }

    pub const fn cos(amplitude: f64, frequency: f64) -> Self {
        Self { amplitude, frequency, cosine: true }
    }

    fn at(&self, t: f64) -> f64 {
        let arg = self.frequency * t;
        self.amplitude * if self.cosine { arg.cos() } else { arg.sin() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceSpec {
    None { dim: usize },
    Constant { value: Vec<f64> },
    SinusoidMix { channels: Vec<SinusoidChannel> },
}

impl DisturbanceSpec {
    /// Constant `[0.1, 0.2, 0.2]`.
    pub fn experiment1() -> Self {
        Self::Constant { value: vec![0.1, 0.2, 0.2] }
    }

    /// `[0.1 sin t, 0.2 cos 4t, 0.2 cos 2t]`.
    pub fn experiment2() -> Self {
        Self::SinusoidMix {
            channels: vec![
                SinusoidChannel::sin(0.1, 1.0),
                SinusoidChannel::cos(0.2, 4.0),
                SinusoidChannel::cos(0.2, 2.0),
            ],
        }
    }

    /// `[sin t, 2 cos 4t, 2 cos 2t]`.
    pub fn experiment3() -> Self {
        Self::SinusoidMix {
            channels: vec![
                SinusoidChannel::sin(1.0, 1.0),
                SinusoidChannel::cos(2.0, 4.0),
                SinusoidChannel::cos(2.0, 2.0),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::None { dim } => *dim,
            Self::Constant { value } => value.len(),
            Self::SinusoidMix { channels } => channels.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::InvalidDisturbance("dimension must be at least 1".into()));
        }
        let finite = match self {
            Self::None { .. } => true,
            Self::Constant { value } => value.iter().all(|v| v.is_finite()),
            Self::SinusoidMix { channels } => channels
                .iter()
                .all(|c| c.amplitude.is_finite() && c.frequency.is_finite()),
        };
        if !finite {
            return Err(Error::InvalidDisturbance("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        match self {
            Self::None { dim } => vec![0.0; *dim],
            Self::Constant { value } => value.clone(),
            Self::SinusoidMix { channels } => channels.iter().map(|c| c.at(t)).collect(),
        }
    }

    /// Closed-form bound `δ ≥ sup_t ‖d(t)‖`.
    pub fn norm_bound(&self) -> f64 {
        match self {
            Self::None { .. } => 0.0,
            Self::Constant { value } => norm(value),
            Self::SinusoidMix { channels } => {
                channels.iter().map(|c| c.amplitude * c.amplitude).sum::<f64>().sqrt()
            }
        }
    }

    /// Closed-form bound `δ1 ≥ sup_t ‖ḋ(t)‖`.
    pub fn derivative_bound(&self) -> f64 {
        match self {
            Self::None { .. } | Self::Constant { .. } => 0.0,
            Self::SinusoidMix { channels } => channels
                .iter()
                .map(|c| (c.amplitude * c.frequency).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn experiment_signals() {
        for t in [0.0, 1.3, 100.0] {
            assert_eq!(DisturbanceSpec::experiment1().at(t), vec![0.1, 0.2, 0.2]);
        }
        assert_eq!(DisturbanceSpec::experiment2().at(0.0), vec![0.0, 0.2, 0.2]);
        let d = DisturbanceSpec::experiment3().at(FRAC_PI_2);
        let expected = [1.0, 2.0, -2.0];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds() {
        assert_eq!(DisturbanceSpec::None { dim: 3 }.norm_bound(), 0.0);
        assert!((DisturbanceSpec::experiment1().norm_bound() - 0.3).abs() < 1e-15);
        assert!((DisturbanceSpec::experiment3().norm_bound() - 3.0).abs() < 1e-15);
        assert!((DisturbanceSpec::experiment3().derivative_bound() - 81f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bounds_are_honest() {
        let dt = 1e-3;
        for spec in [
            DisturbanceSpec::experiment1(),
            DisturbanceSpec::experiment2(),
            DisturbanceSpec::experiment3(),
        ] {
            let (delta, delta1) = (spec.norm_bound(), spec.derivative_bound());
            let curvature: f64 = match &spec {
                DisturbanceSpec::SinusoidMix { channels } => channels
                    .iter()
                    .map(|c| (c.amplitude * c.frequency * c.frequency).powi(2))
                    .sum::<f64>()
                    .sqrt(),
                _ => 0.0,
            };
            let mut prev = spec.at(0.0);
            for k in 1..=20_000 {
                let t = k as f64 * dt;
                let d = spec.at(t);
                assert!(norm(&d) <= delta + 1e-12);
                let rate: Vec<f64> = d.iter().zip(&prev).map(|(a, b)| (a - b) / dt).collect();
                assert!(norm(&rate) <= delta1 + 1e-6 + dt * curvature);
                prev = d;
            }
        }
    }

    #[test]
    fn serde_shape() {
        let json = serde_json::to_value(DisturbanceSpec::experiment2()).unwrap();
        assert_eq!(json["kind"], "sinusoid-mix");
        assert_eq!(json["channels"][1]["phase_is_cosine"], true);
        let back: DisturbanceSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, DisturbanceSpec::experiment2());
        assert!(DisturbanceSpec::None { dim: 0 }.validate().is_err());
    }
}
