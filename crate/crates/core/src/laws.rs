//! Adaptive gains and the smooth second-order sliding-mode laws.
//!
//! Both the controller and the observer share the same structure: a
//! fractional-power direction term, a linear term, and an integral of a
//! second fractional-power term plus a second linear term. All four gains
//! are power laws of a single scalar `L0` that ramps at rate `kappa`
//! while the sliding variable is outside an `epsilon` ball.
//!
//! With `m = 2` the laws reduce to the multivariable super-twisting
//! baseline; with `m > 2` the integral term becomes continuous at the
//! origin, which is what removes the chattering of the baseline.
//!
//! The laws are discrete blocks: one explicit Euler update of the integral
//! and of `L0` per call.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{check_dim, norm};

/// Below this norm the direction term is regularized to zero.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub m: f64,
    pub kappa: f64,
    pub epsilon: f64,
    #[serde(rename = "L0_init")]
    pub l0_init: f64,
}

impl GainConfig {
    /// Gains used by all three reference experiments (`m = 3`).
    pub const fn reference() -> Self {
        Self {
            k1: 2.0,
            k2: 2.5,
            k3: 4.0,
            k4: 30.0,
            m: 3.0,
            kappa: 10.0,
            epsilon: 1e-3,
            l0_init: 1.0,
        }
    }

    /// Same gains with `m = 2`: the super-twisting baseline.
    pub const fn baseline() -> Self {
        let mut cfg = Self::reference();
        cfg.m = 2.0;
        cfg
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("kappa", self.kappa),
            ("epsilon", self.epsilon),
            ("L0_init", self.l0_init),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGains(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.m.is_finite() && self.m >= 2.0) {
            return Err(Error::InvalidGains(format!("m must be >= 2, got {}", self.m)));
        }
        Ok(())
    }

    pub fn is_baseline(&self) -> bool {
        self.m == 2.0
    }
}

impl Default for GainConfig {
    fn default() -> Self {
        Self::reference()
    }
}

/// Outcome of the gain feasibility inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainStatus {
    /// `m > 2` and the inequality holds.
    Certified,
    /// `m > 2` and the inequality fails; runs are allowed but flagged.
    Uncertified,
    /// `m == 2`: the super-twisting baseline is outside this certificate.
    BaselineExempt,
}

impl GainStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GainStatus::Certified => "certified",
            GainStatus::Uncertified => "uncertified",
            GainStatus::BaselineExempt => "baseline-exempt",
        }
    }
}

impl std::fmt::Display for GainStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    pub status: GainStatus,
    /// `m² k3 k4`
    pub lhs: f64,
    /// `(m³ k3 / (m − 1) + (4m² − 4m + 1) k1²) k2²`
    pub rhs: f64,
}

impl GainCheck {
    pub fn holds(&self) -> bool {
        self.status == GainStatus::Certified
    }
}

/// Evaluates `m² k3 k4 > (m³ k3/(m−1) + (4m²−4m+1) k1²) k2²` with `m > 2`.
pub fn check_gain_condition(cfg: &GainConfig) -> GainCheck {
    let GainConfig { k1, k2, k3, k4, m, .. } = *cfg;
    let lhs = m * m * k3 * k4;
    let rhs = (m * m * m * k3 / (m - 1.0) + (4.0 * m * m - 4.0 * m + 1.0) * k1 * k1) * k2 * k2;
    let status = if m <= 2.0 {
        GainStatus::BaselineExempt
    } else if lhs > rhs {
        GainStatus::Certified
    } else {
        GainStatus::Uncertified
    };
    GainCheck { status, lhs, rhs }
}

/// The `k4` at which the feasibility inequality becomes an equality.
pub fn critical_k4(cfg: &GainConfig) -> f64 {
    let GainConfig { k1, k2, k3, m, .. } = *cfg;
    (m * m * m * k3 / (m - 1.0) + (4.0 * m * m - 4.0 * m + 1.0) * k1 * k1) * k2 * k2 / (m * m * k3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGains {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
}

/// `L1 = k1 L0^((m−1)/m)`, `L2 = k2 L0`, `L3 = k3 L0^((2m−2)/m)`, `L4 = k4 L0²`.
pub fn gains_from_l0(cfg: &GainConfig, l0: f64) -> AdaptiveGains {
    let m = cfg.m;
    AdaptiveGains {
        l1: cfg.k1 * l0.powf((m - 1.0) / m),
        l2: cfg.k2 * l0,
        l3: cfg.k3 * l0.powf((2.0 * m - 2.0) / m),
        l4: cfg.k4 * l0 * l0,
        l0,
    }
}

/// One Euler step of the dead-zone adaptation law. Never decreases `l0`.
pub fn update_l0(l0: f64, sliding_norm: f64, cfg: &GainConfig, dt: f64) -> f64 {
    if sliding_norm >= cfg.epsilon {
        l0 + cfg.kappa * dt
    } else {
        l0
    }
}

/// `x / ‖x‖^exponent`, or zero when `‖x‖ < singular_tol`.
pub fn unit_power_direction(x: &[f64], exponent: f64, singular_tol: f64) -> Vec<f64> {
    debug_assert!(exponent > 0.0 && exponent <= 1.0);
    let r = norm(x);
    if r < singular_tol {
        return vec![0.0; x.len()];
    }
    let scale = r.powf(-exponent);
    x.iter().map(|v| v * scale).collect()
}

/// Shared feedback shape: `(L1 φ(s, 1/m) + L2 s, L3 φ(s, 2/m) + L4 s)`.
fn feedback_terms(s: &[f64], g: &AdaptiveGains, m: f64, singular_tol: f64) -> (Vec<f64>, Vec<f64>) {
    let d1 = unit_power_direction(s, 1.0 / m, singular_tol);
    let d2 = unit_power_direction(s, 2.0 / m, singular_tol);
    let prop = d1.iter().zip(s).map(|(a, b)| g.l1 * a + g.l2 * b).collect();
    let integrand = d2.iter().zip(s).map(|(a, b)| g.l3 * a + g.l4 * b).collect();
    (prop, integrand)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub integral_term: Vec<f64>,
    #[serde(rename = "L0")]
    pub l0: f64,
}

impl ControllerState {
    pub fn new(n: usize, cfg: &GainConfig) -> Self {
        Self {
            integral_term: vec![0.0; n],
            l0: cfg.l0_init,
        }
    }

    pub fn dim(&self) -> usize {
        self.integral_term.len()
    }
}

/// One sample of the controller
/// `u = −L1 x/‖x‖^(1/m) − L2 x − ∫ (L3 x/‖x‖^(2/m) + L4 x)`.
///
/// `u` uses the gains and integral held in `state`; the returned state has
/// the integral and `L0` advanced by one Euler step of length `dt`.
pub fn controller_step(
    x1: &[f64],
    state: &ControllerState,
    cfg: &GainConfig,
    dt: f64,
    singular_tol: f64,
) -> Result<(Vec<f64>, ControllerState)> {
    check_dim(state.dim(), x1.len())?;
    let g = gains_from_l0(cfg, state.l0);
    let (prop, integrand) = feedback_terms(x1, &g, cfg.m, singular_tol);
    let u = prop
        .iter()
        .zip(&state.integral_term)
        .map(|(p, i)| -p - i)
        .collect();
    let integral_term = state
        .integral_term
        .iter()
        .zip(&integrand)
        .map(|(i, f)| i + dt * f)
        .collect();
    let next = ControllerState {
        integral_term,
        l0: update_l0(state.l0, norm(x1), cfg, dt),
    };
    Ok((u, next))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverState {
    /// Auxiliary state tracking the measured plant state.
    pub z1: Vec<f64>,
    /// Most recent disturbance estimate.
    pub d_hat: Vec<f64>,
    pub integral_term: Vec<f64>,
    #[serde(rename = "L0")]
    pub l0: f64,
}

impl ObserverState {
    pub fn new(z1_init: Vec<f64>, cfg: &GainConfig) -> Self {
        let n = z1_init.len();
        Self {
            z1: z1_init,
            d_hat: vec![0.0; n],
            integral_term: vec![0.0; n],
            l0: cfg.l0_init,
        }
    }

    pub fn dim(&self) -> usize {
        self.z1.len()
    }
}

/// Observation error `e1 = x1 − z1`. This orientation makes `ė1 = d1 − d̂1`,
/// so the positive-signed estimate below is stabilizing.
pub fn observation_error(x1_measured: &[f64], z1: &[f64]) -> Vec<f64> {
    x1_measured.iter().zip(z1).map(|(x, z)| x - z).collect()
}

/// One sample of the disturbance observer
/// `d̂ = L1 e/‖e‖^(1/m) + L2 e + ∫ (L3 e/‖e‖^(2/m) + L4 e)`, `ż = u + d̂`.
pub fn observer_step(
    x1_measured: &[f64],
    u: &[f64],
    state: &ObserverState,
    cfg: &GainConfig,
    dt: f64,
    singular_tol: f64,
) -> Result<(Vec<f64>, ObserverState)> {
    let n = state.dim();
    check_dim(n, x1_measured.len())?;
    check_dim(n, u.len())?;
    check_dim(n, state.integral_term.len())?;
    let e1 = observation_error(x1_measured, &state.z1);
    let g = gains_from_l0(cfg, state.l0);
    let (prop, integrand) = feedback_terms(&e1, &g, cfg.m, singular_tol);
    let d_hat: Vec<f64> = prop
        .iter()
        .zip(&state.integral_term)
        .map(|(p, i)| p + i)
        .collect();
    let integral_term = state
        .integral_term
        .iter()
        .zip(&integrand)
        .map(|(i, f)| i + dt * f)
        .collect();
    let z1 = state
        .z1
        .iter()
        .zip(u.iter().zip(&d_hat))
        .map(|(z, (u, d))| z + dt * (u + d))
        .collect();
    let next = ObserverState {
        z1,
        d_hat: d_hat.clone(),
        integral_term,
        l0: update_l0(state.l0, norm(&e1), cfg, dt),
    };
    Ok((d_hat, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = DEFAULT_SINGULAR_TOL;

    #[test]
    fn gain_condition_reference_holds() {
        let c = check_gain_condition(&GainConfig::reference());
        assert_eq!(c.lhs, 1080.0);
        assert_eq!(c.rhs, 962.5);
        assert_eq!(c.status, GainStatus::Certified);
    }

    #[test]
    fn gain_condition_reduced_k4_fails() {
        let cfg = GainConfig { k4: 20.0, ..GainConfig::reference() };
        let c = check_gain_condition(&cfg);
        assert_eq!(c.lhs, 720.0);
        assert_eq!(c.rhs, 962.5);
        assert_eq!(c.status, GainStatus::Uncertified);
        assert!(!c.holds());
    }

    #[test]
    fn gain_condition_baseline_exempt() {
        for k4 in [1.0, 30.0, 1e6] {
            let cfg = GainConfig { k4, ..GainConfig::baseline() };
            let c = check_gain_condition(&cfg);
            assert_eq!(c.status, GainStatus::BaselineExempt);
            assert!(!c.holds());
        }
        assert_eq!(GainStatus::BaselineExempt.to_string(), "baseline-exempt");
    }

    #[test]
    fn critical_k4_sits_on_the_boundary() {
        let cfg = GainConfig::reference();
        let k4 = critical_k4(&cfg);
        assert!((k4 - 962.5 / 36.0).abs() < 1e-12);
        let below = GainConfig { k4: k4 * (1.0 - 1e-9), ..cfg };
        let above = GainConfig { k4: k4 * (1.0 + 1e-9), ..cfg };
        assert!(!check_gain_condition(&below).holds());
        assert!(check_gain_condition(&above).holds());
    }

    #[test]
    fn validation() {
        assert!(GainConfig::reference().validate().is_ok());
        assert!(GainConfig::baseline().validate().is_ok());
        assert!(GainConfig { m: 1.5, ..GainConfig::reference() }.validate().is_err());
        assert!(GainConfig { kappa: 0.0, ..GainConfig::reference() }.validate().is_err());
        assert!(GainConfig { k2: f64::NAN, ..GainConfig::reference() }.validate().is_err());
        assert!(GainConfig { l0_init: -1.0, ..GainConfig::reference() }.validate().is_err());
    }

    #[test]
    fn direction_term_examples() {
        assert_eq!(unit_power_direction(&[0.0, 0.0, 0.0], 0.5, TOL), vec![0.0; 3]);
        assert_eq!(unit_power_direction(&[4.0, 0.0, 0.0], 0.5, TOL), vec![2.0, 0.0, 0.0]);
        assert_eq!(unit_power_direction(&[1.0, 0.0, 0.0], 1.0 / 3.0, TOL), vec![1.0, 0.0, 0.0]);
        assert_eq!(unit_power_direction(&[1e-13, 0.0], 0.5, TOL), vec![0.0, 0.0]);
    }

    #[test]
    fn baseline_integral_direction_has_unit_norm() {
        for x in [[1e-9, 0.0, 0.0], [3.0, -4.0, 0.0], [1e3, 2.0, -7.0]] {
            let d = unit_power_direction(&x, 2.0 / 2.0, TOL);
            assert!((norm(&d) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn l0_adaptation() {
        let cfg = GainConfig { kappa: 10.0, epsilon: 1e-3, ..GainConfig::reference() };
        assert!((update_l0(1.0, 0.5, &cfg, 1e-3) - 1.01).abs() < 1e-15);
        assert_eq!(update_l0(1.0, 1e-4, &cfg, 1e-3), 1.0);
        assert_eq!(update_l0(2.0, cfg.epsilon, &cfg, 1e-3), 2.0 + 10.0 * 1e-3);
    }

    #[test]
    fn gains_examples() {
        let cfg = GainConfig::reference();
        let g = gains_from_l0(&cfg, 1.0);
        assert_eq!((g.l1, g.l2, g.l3, g.l4), (cfg.k1, cfg.k2, cfg.k3, cfg.k4));

        let g = gains_from_l0(&cfg, 4.0);
        assert!((g.l1 - 2.0 * 4f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((g.l1 - 5.0397).abs() < 1e-4);
        assert_eq!(g.l2, 10.0);
        assert!((g.l3 - 25.398).abs() < 1e-3);
        assert_eq!(g.l4, 480.0);

        let b = GainConfig::baseline();
        let g = gains_from_l0(&b, 9.0);
        assert!((g.l1 - 3.0 * b.k1).abs() < 1e-12);
        assert!((g.l3 - 9.0 * b.k3).abs() < 1e-12);
    }

    #[test]
    fn controller_at_origin_is_zero() {
        let cfg = GainConfig::reference();
        let st = ControllerState::new(3, &cfg);
        let (u, _) = controller_step(&[0.0; 3], &st, &cfg, 1e-3, TOL).unwrap();
        assert_eq!(u, vec![0.0; 3]);
    }

    #[test]
    fn controller_unit_state() {
        let cfg = GainConfig::reference();
        let st = ControllerState::new(3, &cfg);
        let (u, _) = controller_step(&[1.0, 0.0, 0.0], &st, &cfg, 1e-3, TOL).unwrap();
        assert_eq!(u, vec![-4.5, 0.0, 0.0]);
    }

    #[test]
    fn controller_two_step_integral() {
        let cfg = GainConfig::reference();
        let dt = 1e-3;
        let x = [1.0, 0.0, 0.0];
        let s0 = ControllerState::new(3, &cfg);
        let (_, s1) = controller_step(&x, &s0, &cfg, dt, TOL).unwrap();
        let (_, s2) = controller_step(&x, &s1, &cfg, dt, TOL).unwrap();
        // first step at L0 = 1, second at L0 = 1 + κ·dt
        let i1 = dt * (cfg.k3 + cfg.k4);
        let l0 = 1.0 + cfg.kappa * dt;
        let i2 = i1 + dt * (cfg.k3 * l0.powf(4.0 / 3.0) + cfg.k4 * l0 * l0);
        assert!((s1.integral_term[0] - i1).abs() < 1e-15);
        assert!((s2.integral_term[0] - i2).abs() < 1e-15);
        assert_eq!(s2.integral_term[1], 0.0);
        assert!((s2.l0 - 1.02).abs() < 1e-15);
    }

    #[test]
    fn controller_rejects_dimension_mismatch() {
        let cfg = GainConfig::reference();
        let st = ControllerState::new(3, &cfg);
        assert!(matches!(
            controller_step(&[1.0, 0.0], &st, &cfg, 1e-3, TOL),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn observer_zero_error_zero_estimate() {
        let cfg = GainConfig::reference();
        let x = vec![1.0, 3.0, 2.0];
        let st = ObserverState::new(x.clone(), &cfg);
        let (d_hat, next) = observer_step(&x, &[0.0; 3], &st, &cfg, 1e-3, TOL).unwrap();
        assert_eq!(d_hat, vec![0.0; 3]);
        assert_eq!(next.z1, x);
        assert_eq!(next.l0, cfg.l0_init);
    }

    #[test]
    fn observer_unit_error() {
        let cfg = GainConfig::reference();
        // e1 = x1 − z1 = [1, 0, 0]
        let st = ObserverState::new(vec![0.0; 3], &cfg);
        let (d_hat, next) = observer_step(&[1.0, 0.0, 0.0], &[0.0; 3], &st, &cfg, 1e-3, TOL).unwrap();
        assert_eq!(d_hat, vec![4.5, 0.0, 0.0]);
        assert_eq!(next.d_hat, d_hat);
        assert!((next.z1[0] - 4.5e-3).abs() < 1e-18);
        assert!((next.integral_term[0] - 34e-3).abs() < 1e-15);
    }

    #[test]
    fn observer_rejects_dimension_mismatch() {
        let cfg = GainConfig::reference();
        let st = ObserverState::new(vec![0.0; 3], &cfg);
        assert!(observer_step(&[0.0; 3], &[0.0; 2], &st, &cfg, 1e-3, TOL).is_err());
        assert!(observer_step(&[0.0; 4], &[0.0; 3], &st, &cfg, 1e-3, TOL).is_err());
    }

    #[test]
    fn observer_tracks_constant_disturbance() {
        let cfg = GainConfig::reference();
        let dt = 1e-3;
        let d = [0.3, -0.5, 0.8];
        let mut x = vec![1.0, 3.0, 2.0];
        let mut st = ObserverState::new(x.clone(), &cfg);
        let mut d_hat = vec![0.0; 3];
        for _ in 0..10_000 {
            let (dh, next) = observer_step(&x, &[0.0; 3], &st, &cfg, dt, TOL).unwrap();
            d_hat = dh;
            st = next;
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += dt * di;
            }
        }
        let err: Vec<f64> = d_hat.iter().zip(&d).map(|(a, b)| a - b).collect();
        assert!(norm(&err) < 1e-2, "estimate error {}", norm(&err));
    }

    proptest! {
        #[test]
        fn direction_is_homogeneous(
            x in prop::collection::vec(-10.0f64..10.0, 3),
            c in 0.01f64..100.0,
            p in 0.05f64..1.0,
        ) {
            prop_assume!(norm(&x) > 1e-6);
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            let lhs = unit_power_direction(&scaled, p, TOL);
            let rhs = unit_power_direction(&x, p, TOL);
            let f = c.powf(1.0 - p);
            for (a, b) in lhs.iter().zip(&rhs) {
                prop_assert!((a - f * b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn controller_observer_duality(
            x in prop::collection::vec(-5.0f64..5.0, 3),
            l0 in 0.5f64..50.0,
            m in 2.0f64..8.0,
        ) {
            let cfg = GainConfig { l0_init: l0, ..GainConfig::reference().with_m(m) };
            let cs = ControllerState::new(3, &cfg);
            let os = ObserverState::new(vec![0.0; 3], &cfg);
            let (u, _) = controller_step(&x, &cs, &cfg, 1e-3, TOL).unwrap();
            let (d_hat, _) = observer_step(&x, &[0.0; 3], &os, &cfg, 1e-3, TOL).unwrap();
            for (a, b) in u.iter().zip(&d_hat) {
                prop_assert_eq!(*a, -*b);
            }
        }

        #[test]
        fn l0_never_decreases(l0 in 0.1f64..100.0, r in 0.0f64..1.0, dt in 1e-5f64..1e-1) {
            let cfg = GainConfig::reference();
            prop_assert!(update_l0(l0, r, &cfg, dt) >= l0);
        }
    }
}
