//! Convex surrogates of the 0-1 loss.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A convex, non-negative, non-decreasing loss with `l(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateLoss {
    /// `max(0, 1 + z)`
    #[default]
    Hinge,
    /// `max(0, 1 + z)^2`
    QuadraticHinge,
}

impl SurrogateLoss {
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        let h = (1.0 + z).max(0.0);
        match self {
            SurrogateLoss::Hinge => h,
            SurrogateLoss::QuadraticHinge => h * h,
        }
    }

    /// Right-derivative; at the hinge kink `z = -1` this is 1.
    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            SurrogateLoss::Hinge => {
                if z >= -1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SurrogateLoss::QuadraticHinge => 2.0 * (1.0 + z).max(0.0),
        }
    }

    /// `l'(0)`, the slope of the tangent `l(z) >= 1 + c z`.
    pub fn deriv_at_zero(self) -> f64 {
        self.deriv(0.0)
    }

    pub fn try_value(self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.value(z))
    }

    pub fn try_deriv(self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.deriv(z))
    }

    pub fn token(self) -> &'static str {
        match self {
            SurrogateLoss::Hinge => "hinge",
            SurrogateLoss::QuadraticHinge => "quadratic_hinge",
        }
    }
}

fn check_finite(z: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("surrogate argument".into()))
    }
}

impl fmt::Display for SurrogateLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SurrogateLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(SurrogateLoss::Hinge),
            "quadratic_hinge" => Ok(SurrogateLoss::QuadraticHinge),
            other => Err(Error::invalid(format!("unknown surrogate `{other}`"))),
        }
    }
}
