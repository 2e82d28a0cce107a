//! Lyapunov certificate for the smooth second-order sliding-mode laws.
//!
//! The closed loop is rewritten in the coordinates
//! `ξ1 = L0^((m−1)/m) x1/‖x1‖^(1/m)`, `ξ2 = L0 x1`, `ξ3 = x2` and the
//! quadratic function `V = ξᵀ (P ⊗ I_n) ξ` is shown to satisfy
//!
//! ```text
//! V̇ ≤ −L0 n1 V^p1 + δ n2' V^(1/2) − (L0 n3 − (2m−2)/m · n4 · L̇0/L0) V
//! ```
//!
//! with `p1 = (2m−3)/(2m−2)`. This module builds the 3×3 factors `P`, `Q`,
//! `Ω̃1`, `Ω̃2`, checks them for positive-definiteness, derives `n1..n4`,
//! and evaluates the settling-time and residual-set formulas of the two
//! finite-time stability lemmas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{check_gain_condition, unit_power_direction, GainCheck, GainConfig};
use crate::linalg::{default_pd_tol, eig_sym, EigenSummary, SymMatrix};
use crate::vector::{check_dim, dot};

/// Bisection target for the θ3 equation.
pub const THETA3_RESIDUAL_TOL: f64 = 1e-12;
/// Exponent of the disturbance term in the perturbed decrease inequality.
pub const PERTURBATION_EXPONENT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedState {
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub xi3: Vec<f64>,
}

impl TransformedState {
    pub fn from_plant(x1: &[f64], x2: &[f64], l0: f64, m: f64, singular_tol: f64) -> Result<Self> {
        check_dim(x1.len(), x2.len())?;
        let scale = l0.powf((m - 1.0) / m);
        let xi1 = unit_power_direction(x1, 1.0 / m, singular_tol)
            .into_iter()
            .map(|v| scale * v)
            .collect();
        let xi2 = x1.iter().map(|v| l0 * v).collect();
        Ok(Self {
            xi1,
            xi2,
            xi3: x2.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.xi1.len()
    }

    /// Stacked `[ξ1; ξ2; ξ3]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.xi1
            .iter()
            .chain(&self.xi2)
            .chain(&self.xi3)
            .copied()
            .collect()
    }

    pub fn norm_squared(&self) -> f64 {
        dot(&self.xi1, &self.xi1) + dot(&self.xi2, &self.xi2) + dot(&self.xi3, &self.xi3)
    }

    fn blocks(&self) -> [&[f64]; 3] {
        [&self.xi1, &self.xi2, &self.xi3]
    }
}

fn sym3(rows: [[f64; 3]; 3]) -> SymMatrix {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    SymMatrix::from_rows(&rows).expect("certificate blocks are symmetric by construction")
}

/// 3×3 factor of `P`.
pub fn build_p(cfg: &GainConfig) -> SymMatrix {
    let GainConfig { k1, k2, k3, k4, m, .. } = *cfg;
    let h = 0.5;
    sym3([
        [h * (2.0 * m / (m - 1.0) * k3 + k1 * k1), h * k1 * k2, -h * k1],
        [h * k1 * k2, h * (2.0 * k4 + k2 * k2), -h * k2],
        [-h * k1, -h * k2, h * 2.0],
    ])
}

/// Diagonal 3×3 factor of `Q`.
pub fn build_q(cfg: &GainConfig) -> SymMatrix {
    let GainConfig { k1, k2, k3, k4, m, .. } = *cfg;
    let cross = (2.0 * m - 1.0) * k1 * k2 / (2.0 * (m - 1.0));
    let q1 = 2.0 * m / (m - 1.0) * k3 + k1 * k1 + cross + k1 / 2.0;
    let q2 = m / (2.0 * (m - 1.0)) * (4.0 * k4 + 2.0 * k2 * k2 + k2) + cross;
    let q3 = k1 / 2.0 + m * k2 / (2.0 * (m - 1.0));
    SymMatrix::diagonal(&[q1, q2, q3]).expect("finite diagonal")
}

/// 3×3 factors of `Ω̃1` and `Ω̃2`.
pub fn build_omega_tildes(cfg: &GainConfig) -> (SymMatrix, SymMatrix) {
    let GainConfig { k1, k2, k3, k4, m, .. } = *cfg;
    let s1 = k1 / m;
    let a13 = -k1 * (m - 1.0);
    let a23 = -k2 * (2.0 * m - 1.0);
    let omega1 = sym3([
        [s1 * (k3 * m + k1 * k1 * (m - 1.0)), 0.0, s1 * a13],
        [0.0, s1 * (k4 * m + k2 * k2 * (3.0 * m - 1.0)), s1 * a23],
        [s1 * a13, s1 * a23, s1 * (m - 1.0)],
    ]);
    let omega2 = sym3([
        [k2 * (k3 + k1 * k1 * (3.0 * m - 2.0) / m), 0.0, 0.0],
        [0.0, k2 * (k4 + k2 * k2), -k2 * k2],
        [0.0, -k2 * k2, k2],
    ]);
    (omega1, omega2)
}

/// `p1 = (2m − 3)/(2m − 2)`.
pub fn decay_exponent(m: f64) -> f64 {
    (2.0 * m - 3.0) / (2.0 * m - 2.0)
}

/// `V = Σ_ij P[i][j] ⟨ξi, ξj⟩`, i.e. `ξᵀ (P ⊗ I_n) ξ` without forming the expansion.
pub fn lyapunov_value(xi: &TransformedState, p_block: &SymMatrix) -> Result<f64> {
    check_dim(3, p_block.order())?;
    let n = xi.dim();
    check_dim(n, xi.xi2.len())?;
    check_dim(n, xi.xi3.len())?;
    let b = xi.blocks();
    let mut v = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            v += p_block.get(i, j) * dot(b[i], b[j]);
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub block: SymMatrix,
    pub eigen: EigenSummary,
    pub positive_definite: bool,
}

impl BlockCheck {
    fn new(block: SymMatrix) -> Result<Self> {
        let eigen = eig_sym(&block)?;
        let positive_definite = eigen.lambda_min > default_pd_tol(&eigen);
        Ok(Self {
            block,
            eigen,
            positive_definite,
        })
    }
}

/// `n1..n4`. `n2_coeff` excludes the disturbance bound: `n2 = δ · n2_coeff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    pub n1: f64,
    pub n2_coeff: f64,
    pub n3: f64,
    pub n4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub m: f64,
    pub p: BlockCheck,
    pub q: BlockCheck,
    pub omega1: BlockCheck,
    pub omega2: BlockCheck,
    pub p1: f64,
    pub gain_check: GainCheck,
    pub gain_condition_ok: bool,
    /// `None` when any of the four blocks fails the PD check.
    pub constants: Option<DecayConstants>,
}

impl LyapunovCertificate {
    pub fn all_positive_definite(&self) -> bool {
        self.p.positive_definite
            && self.q.positive_definite
            && self.omega1.positive_definite
            && self.omega2.positive_definite
    }

    /// Gain condition holds and every block is PD.
    pub fn is_valid(&self) -> bool {
        self.gain_condition_ok && self.constants.is_some()
    }

    pub fn lyapunov_value(&self, xi: &TransformedState) -> Result<f64> {
        lyapunov_value(xi, &self.p.block)
    }

    /// `c1 = L0 n1` and `c2 = L0 n3 − (2m−2)/m · n4 · L̇0/L0` at one instant.
    pub fn decay_coefficients(&self, l0: f64, l0_dot: f64) -> Option<(f64, f64)> {
        let k = self.constants?;
        let c1 = l0 * k.n1;
        let c2 = l0 * k.n3 - (2.0 * self.m - 2.0) / self.m * k.n4 * l0_dot / l0;
        Some((c1, c2))
    }
}

pub fn build_certificate(cfg: &GainConfig) -> Result<LyapunovCertificate> {
    cfg.validate()?;
    if cfg.m <= 2.0 {
        return Err(Error::Unsupported(
            "certificate requires m > 2 (m = 2 is baseline-exempt)".into(),
        ));
    }
    let (o1, o2) = build_omega_tildes(cfg);
    let p = BlockCheck::new(build_p(cfg))?;
    let q = BlockCheck::new(build_q(cfg))?;
    let omega1 = BlockCheck::new(o1)?;
    let omega2 = BlockCheck::new(o2)?;
    let p1 = decay_exponent(cfg.m);
    let gain_check = check_gain_condition(cfg);

    let all_pd =
        p.positive_definite && q.positive_definite && omega1.positive_definite && omega2.positive_definite;
    let constants = all_pd.then(|| DecayConstants {
        n1: omega1.eigen.lambda_min / p.eigen.lambda_max.powf(p1),
        n2_coeff: (cfg.k1 * cfg.k1 + cfg.k2 * cfg.k2 + 4.0).sqrt() / p.eigen.lambda_min.sqrt(),
        n3: omega2.eigen.lambda_min / p.eigen.lambda_max,
        n4: q.eigen.lambda_max / (2.0 * p.eigen.lambda_min),
    });

    Ok(LyapunovCertificate {
        m: cfg.m,
        p,
        q,
        omega1,
        omega2,
        p1,
        gain_check,
        gain_condition_ok: gain_check.holds(),
        constants,
    })
}

/// Fast finite-time settling bound `ln(1 + c2 V0^(1−p)/c1) / (c2 (1 − p))`.
pub fn settling_time_lemma1(c1: f64, c2: f64, p: f64, v0: f64) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::OutOfRange(format!("c1, c2 must be positive (c1 = {c1}, c2 = {c2})")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange(format!("p must lie in (0, 1), got {p}")));
    }
    if !(v0 >= 0.0) {
        return Err(Error::OutOfRange(format!("V0 must be >= 0, got {v0}")));
    }
    if v0 == 0.0 {
        return Ok(0.0);
    }
    Ok((c2 * v0.powf(1.0 - p) / c1).ln_1p() / (c2 * (1.0 - p)))
}

fn check_lemma2_exponents(p1: f64, p2: f64) -> Result<()> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::OutOfRange(format!("p1 must lie in (0, 1), got {p1}")));
    }
    if !(p2 > 0.0 && p2 < p1) {
        return Err(Error::OutOfRange(format!("p2 must lie in (0, p1), got {p2}")));
    }
    Ok(())
}

/// Settling bound for the ultimately bounded case. Reduces to
/// [`settling_time_lemma1`] as `θ1, θ2 → 0`.
#[allow(clippy::too_many_arguments)]
pub fn settling_time_lemma2(
    c1: f64,
    c2: f64,
    c3: f64,
    p1: f64,
    p2: f64,
    v0: f64,
    theta1: f64,
    theta2: f64,
) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0 && c3 > 0.0) {
        return Err(Error::OutOfRange(format!(
            "c1, c2, c3 must be positive (got {c1}, {c2}, {c3})"
        )));
    }
    check_lemma2_exponents(p1, p2)?;
    if !(theta1 > 0.0 && theta1 < c1) {
        return Err(Error::OutOfRange(format!("theta1 must lie in (0, c1 = {c1}), got {theta1}")));
    }
    if !(theta2 > 0.0 && theta2 < c2) {
        return Err(Error::OutOfRange(format!("theta2 must lie in (0, c2 = {c2}), got {theta2}")));
    }
    settling_time_lemma1(c1 - theta1, c2 - theta2, p1, v0)
}

/// `g(θ3) = θ3^(1−p2) θ2^(p1−p2) c3^(1−p1) − θ1^(1−p2) (1 − θ3)^(p1−p2)`.
///
/// `g(θ3) = 0` is exactly the condition under which the two residual-set
/// levels of [`residual_sets`] coincide. Raising both levels to the power
/// `(p1−p2)(1−p2)` leaves `c3^(1−p2)` against `c3^(p1−p2)`, hence the net
/// exponent `1 − p1` on `c3`.
pub fn theta3_residual(theta3: f64, theta1: f64, theta2: f64, c3: f64, p1: f64, p2: f64) -> f64 {
    theta3.powf(1.0 - p2) * theta2.powf(p1 - p2) * c3.powf(1.0 - p1)
        - theta1.powf(1.0 - p2) * (1.0 - theta3).powf(p1 - p2)
}

/// Unique root in `(0, 1)` of [`theta3_residual`], found by bisection.
///
/// `g` is strictly increasing with `g(0) < 0 < g(1)`; the bisection runs
/// until the bracket cannot shrink further in f64.
pub fn solve_theta3(theta1: f64, theta2: f64, c3: f64, p1: f64, p2: f64) -> Result<f64> {
    if !(theta1 > 0.0 && theta2 > 0.0 && c3 > 0.0) {
        return Err(Error::OutOfRange(format!(
            "theta1, theta2, c3 must be positive (got {theta1}, {theta2}, {c3})"
        )));
    }
    check_lemma2_exponents(p1, p2)?;
    let g = |t: f64| theta3_residual(t, theta1, theta2, c3, p1, p2);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::NoBracket(format!("g(0) = {g_lo}, g(1) = {g_hi}")));
    }
    let mut best = (f64::INFINITY, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm.abs() < best.0 {
            best = (gm.abs(), mid);
        }
        if gm == 0.0 {
            break;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// V-levels bounding the residual sets `D1 = {V^(p1−p2) < θ3 c3/θ1}` and
/// `D2 = {V^(1−p2) < (1 − θ3) c3/θ2}`. They coincide at the solved θ3.
pub fn residual_sets(c3: f64, theta1: f64, theta2: f64, theta3: f64, p1: f64, p2: f64) -> Result<(f64, f64)> {
    check_lemma2_exponents(p1, p2)?;
    if !(theta3 > 0.0 && theta3 < 1.0) {
        return Err(Error::OutOfRange(format!("theta3 must lie in (0, 1), got {theta3}")));
    }
    let d1 = (theta3 * c3 / theta1).powf(1.0 / (p1 - p2));
    let d2 = ((1.0 - theta3) * c3 / theta2).powf(1.0 / (1.0 - p2));
    Ok((d1, d2))
}

/// Instant at which the decay coefficients are evaluated, plus the
/// disturbance bound and optional Lemma-2 slack parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInputs {
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L0_dot")]
    pub l0_dot: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    pub delta: f64,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
}

impl ConvergenceInputs {
    /// Coefficients frozen at `t = 0` while adapting (`L̇0 = κ`).
    pub fn at_start(cfg: &GainConfig, v0: f64, delta: f64) -> Self {
        Self {
            l0: cfg.l0_init,
            l0_dot: cfg.kappa,
            v0,
            delta,
            theta1: None,
            theta2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEstimate {
    pub inputs: ConvergenceInputs,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub p: f64,
    pub p2: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    /// `None` when no finite bound applies (`c2 ≤ 0` at the chosen instant).
    pub settling_time_bound: Option<f64>,
    /// D1 V-level; `None` for the unperturbed case or when no bound applies.
    #[serde(rename = "residual_V_level")]
    pub residual_v_level: Option<f64>,
    #[serde(rename = "residual_V_level_D2")]
    pub residual_v_level_d2: Option<f64>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub theta3: Option<f64>,
    pub note: Option<String>,
}

pub fn convergence_estimate(cert: &LyapunovCertificate, inputs: ConvergenceInputs) -> Result<ConvergenceEstimate> {
    if !(inputs.l0 > 0.0 && inputs.l0_dot >= 0.0 && inputs.v0 >= 0.0 && inputs.delta >= 0.0) {
        return Err(Error::OutOfRange(format!("invalid convergence inputs {inputs:?}")));
    }
    let p = cert.p1;
    let p2 = PERTURBATION_EXPONENT;
    let mut est = ConvergenceEstimate {
        inputs,
        c1: f64::NAN,
        c2: f64::NAN,
        c3: 0.0,
        p,
        p2,
        v0: inputs.v0,
        settling_time_bound: None,
        residual_v_level: None,
        residual_v_level_d2: None,
        theta1: None,
        theta2: None,
        theta3: None,
        note: None,
    };
    let Some((c1, c2)) = cert.decay_coefficients(inputs.l0, inputs.l0_dot) else {
        est.c1 = 0.0;
        est.c2 = 0.0;
        est.note = Some("certificate blocks not positive definite; no decay constants".into());
        return Ok(est);
    };
    let constants = cert.constants.expect("decay_coefficients implies constants");
    est.c1 = c1;
    est.c2 = c2;
    est.c3 = inputs.delta * constants.n2_coeff;
    if c2 <= 0.0 {
        est.note = Some(format!(
            "linear decay coefficient c2 = {c2:.6e} is not positive at L0 = {}, L0_dot = {}; \
             no settling bound at this instant",
            inputs.l0, inputs.l0_dot
        ));
        return Ok(est);
    }
    if est.c3 == 0.0 {
        est.settling_time_bound = Some(settling_time_lemma1(c1, c2, p, inputs.v0)?);
        return Ok(est);
    }
    let theta1 = inputs.theta1.unwrap_or(0.5 * c1);
    let theta2 = inputs.theta2.unwrap_or(0.5 * c2);
    let theta3 = solve_theta3(theta1, theta2, est.c3, p, p2)?;
    let (d1, d2) = residual_sets(est.c3, theta1, theta2, theta3, p, p2)?;
    est.settling_time_bound = Some(settling_time_lemma2(c1, c2, est.c3, p, p2, inputs.v0, theta1, theta2)?);
    est.residual_v_level = Some(d1);
    est.residual_v_level_d2 = Some(d2);
    est.theta1 = Some(theta1);
    est.theta2 = Some(theta2);
    est.theta3 = Some(theta3);
    Ok(est)
}
