//! Per-coefficient component functions `g(beta_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{FridgeError, Result};
use crate::penalty::GVector;

/// Adaptive bases smaller than this in magnitude are rejected.
pub const ADAPTIVE_BASE_FLOOR: f64 = 1e-8;
/// `|beta_j|` is floored here when evaluating the geometric-mean factor.
pub const GEOMEAN_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentKind {
    /// `|beta_j|`.
    #[default]
    Absolute,
    /// `beta_j^2`; only usable with the reweighted ridge solver.
    Square,
    /// `|beta_j| / |base_j|^gamma`.
    AdaptiveAbsolute { gamma: f64, base: Vec<f64> },
    /// `|beta_j|^(1/(order+1))`.
    GeometricMean { order: usize },
}

impl ComponentKind {
    pub fn adaptive(gamma: f64, base: Vec<f64>) -> Result<Self> {
        let kind = ComponentKind::AdaptiveAbsolute { gamma, base };
        kind.validate(None)?;
        Ok(kind)
    }

    /// Checks parameters; `p` and the penalty order are cross-checked when known.
    pub fn validate(&self, p: Option<usize>) -> Result<()> {
        if let ComponentKind::AdaptiveAbsolute { gamma, base } = self {
            if !(gamma.is_finite() && *gamma > 0.0) {
                return Err(FridgeError::InvalidConfig(format!(
                    "adaptive exponent must be positive, got {gamma}"
                )));
            }
            if let Some((j, b)) = base
                .iter()
                .enumerate()
                .find(|(_, b)| !(b.abs() >= ADAPTIVE_BASE_FLOOR))
            {
                return Err(FridgeError::InvalidConfig(format!(
                    "adaptive base entry {j} = {b} is below the floor {ADAPTIVE_BASE_FLOOR}"
                )));
            }
            if let Some(p) = p {
                if base.len() != p {
                    return Err(FridgeError::InvalidConfig(format!(
                        "adaptive base has length {} but there are {p} coefficients",
                        base.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn supports_coordinate_descent(&self) -> bool {
        !matches!(self, ComponentKind::Square)
    }

    pub fn label(&self) -> String {
        match self {
            ComponentKind::Absolute => "abs".into(),
            ComponentKind::Square => "square".into(),
            ComponentKind::AdaptiveAbsolute { gamma, .. } => format!("adaptive:{gamma}"),
            ComponentKind::GeometricMean { .. } => "geomean".into(),
        }
    }

    fn adaptive_weight(gamma: f64, base: f64) -> f64 {
        1.0 / base.abs().powf(gamma)
    }

    /// `g(beta_j)` for coefficient index `j`.
    #[inline]
    pub fn value(&self, j: usize, beta_j: f64) -> f64 {
        match self {
            ComponentKind::Absolute => beta_j.abs(),
            ComponentKind::Square => beta_j * beta_j,
            ComponentKind::AdaptiveAbsolute { gamma, base } => {
                Self::adaptive_weight(*gamma, base[j]) * beta_j.abs()
            }
            ComponentKind::GeometricMean { order } => {
                beta_j.abs().powf(1.0 / (*order as f64 + 1.0))
            }
        }
    }
}

/// Maps coefficients to component values.
pub fn eval_component(kind: &ComponentKind, beta: &[f64]) -> Result<GVector> {
    kind.validate(Some(beta.len()))?;
    if let Some(j) = beta.iter().position(|b| !b.is_finite()) {
        return Err(FridgeError::InvalidInput(format!(
            "coefficient {j} is not finite"
        )));
    }
    GVector::new(
        beta.iter()
            .enumerate()
            .map(|(j, b)| kind.value(j, *b))
            .collect(),
    )
}

/// Multiplier on `lambda * P_{m-1}(g_{-j})` inside the soft threshold.
pub fn threshold_factor(kind: &ComponentKind, j: usize, beta_j: f64, m: usize) -> f64 {
    match kind {
        ComponentKind::Absolute | ComponentKind::Square => 1.0,
        ComponentKind::AdaptiveAbsolute { gamma, base } => {
            ComponentKind::adaptive_weight(*gamma, base[j])
        }
        ComponentKind::GeometricMean { .. } => {
            if m == 0 {
                return 1.0;
            }
            let mf = m as f64;
            beta_j.abs().max(GEOMEAN_FLOOR).powf(-mf / (mf + 1.0)) / (mf + 1.0)
        }
    }
}
