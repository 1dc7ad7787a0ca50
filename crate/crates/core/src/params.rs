//! Derived local-lemma parameters: the frozen threshold `p'` and the slacks `η`, `ζ`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::CspFormula;

/// How `p'` and `ζ` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParameterMode {
    /// `p' = (18e²q²kΔ⁴)⁻¹`, `ζ = (8eqkΔ³)⁻¹`.
    Strong,
    /// `p' = sqrt(p_max / (2eq²Δ))`, `ζ = (1/q − η)/2`; needs `2eq²p_maxΔ < 1`.
    Weak,
    /// Caller-supplied `p'` and `ζ`; `η` is still derived from `p'`.
    Explicit { p_prime: f64, zeta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LllParameters {
    pub mode: ParameterMode,
    pub p_prime: f64,
    pub eta: f64,
    pub zeta: f64,
    /// `p_max` the parameters were accepted against.
    pub p_max: f64,
    pub q: u32,
    pub k: usize,
    pub degree: usize,
}

impl LllParameters {
    /// `θ_v = 1/q_v − η − ζ`.
    #[inline]
    pub fn theta(&self, q_v: u32) -> f64 {
        1.0 / q_v as f64 - self.eta - self.zeta
    }

    /// `θ` at the largest domain, the smallest of the `θ_v`.
    pub fn theta_min(&self) -> f64 {
        self.theta(self.q)
    }
}

/// Outcome of comparing `q²·k·p·Δ⁷` with `(150e³)⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrongConditionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `η = (1 − e·p'·q)^{−Δ} − 1`, or `None` when `e·p'·q ≥ 1`.
pub fn eta_for(p_prime: f64, q: u32, degree: usize) -> Option<f64> {
    let base = 1.0 - E * p_prime * q as f64;
    (base > 0.0).then(|| base.powi(-(degree as i32)) - 1.0)
}

/// Derive parameters from the raw shape `(q, k, Δ)` and a bound `p_max ≥ max_c P[¬c]`.
pub fn derive_from_shape(
    q: u32,
    k: usize,
    degree: usize,
    p_max: f64,
    mode: ParameterMode,
) -> Result<LllParameters> {
    let (qf, kf, df) = (q as f64, k as f64, degree as f64);
    let p_prime = match mode {
        ParameterMode::Strong => 1.0 / (18.0 * E * E * qf * qf * kf * df.powi(4)),
        ParameterMode::Weak => {
            let lhs = 2.0 * E * qf * qf * p_max * df;
            if lhs >= 1.0 {
                return Err(Error::ConditionViolated {
                    inequality: "2e*q^2*p*Delta < 1",
                    lhs,
                    rhs: 1.0,
                });
            }
            let cap = 1.0 / (2.0 * E * qf * qf * df);
            if p_max > 0.0 {
                (p_max * cap).sqrt()
            } else {
                0.5 * cap
            }
        }
        ParameterMode::Explicit { p_prime, .. } => p_prime,
    };
    if !(p_prime > 0.0 && p_prime < 1.0) {
        return Err(Error::ConditionViolated {
            inequality: "0 < p' < 1",
            lhs: p_prime,
            rhs: 1.0,
        });
    }
    let eta = eta_for(p_prime, q, degree).ok_or(Error::ConditionViolated {
        inequality: "e*p'*q < 1",
        lhs: E * p_prime * qf,
        rhs: 1.0,
    })?;
    let zeta = match mode {
        ParameterMode::Strong => 1.0 / (8.0 * E * qf * kf * df.powi(3)),
        ParameterMode::Weak => (1.0 / qf - eta) / 2.0,
        ParameterMode::Explicit { zeta, .. } => zeta,
    };
    if zeta.is_nan() || zeta <= 0.0 {
        return Err(Error::ConditionViolated {
            inequality: "zeta > 0",
            lhs: zeta,
            rhs: 0.0,
        });
    }
    let params = LllParameters {
        mode,
        p_prime,
        eta,
        zeta,
        p_max,
        q,
        k,
        degree,
    };
    let theta = params.theta_min();
    if theta <= 0.0 {
        return Err(Error::ConditionViolated {
            inequality: "theta = 1/q - eta - zeta > 0",
            lhs: theta,
            rhs: 0.0,
        });
    }
    if p_max >= p_prime {
        return Err(Error::ConditionViolated {
            inequality: "p_max < p'",
            lhs: p_max,
            rhs: p_prime,
        });
    }
    Ok(params)
}

/// Derive parameters for `formula`, using its exact `p_Φ` unless `p_max` is given.
pub fn derive_parameters(
    formula: &CspFormula,
    p_max: Option<f64>,
    mode: ParameterMode,
) -> Result<LllParameters> {
    let p = match p_max {
        Some(p) => p,
        None => formula.max_violation_probability()?,
    };
    derive_from_shape(formula.max_domain(), formula.width(), formula.degree(), p, mode)
}

pub fn strong_condition(q: u32, k: usize, degree: usize, p_max: f64) -> StrongConditionReport {
    let lhs = (q as f64).powi(2) * k as f64 * p_max * (degree as f64).powi(7);
    let rhs = 1.0 / (150.0 * E.powi(3));
    StrongConditionReport {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

pub fn check_strong_condition(formula: &CspFormula, p_max: f64) -> StrongConditionReport {
    strong_condition(formula.max_domain(), formula.width(), formula.degree(), p_max)
}

/// `2e·q²·p·Δ` and whether it is below 1.
pub fn weak_condition(q: u32, degree: usize, p_max: f64) -> (f64, bool) {
    let lhs = 2.0 * E * (q as f64).powi(2) * p_max * degree as f64;
    (lhs, lhs < 1.0)
}
