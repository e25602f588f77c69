//! Loss functions `phi(t; b)` for linear prediction and their convex
//! conjugates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1/2 (t - b)^2`
    Quadratic,
    /// `log(1 + exp(-b t))` with `b` in `{-1, +1}`
    Logistic,
}

/// `1 / (1 + exp(-z))` without overflow.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `x log x` extended by continuity to `x = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Logistic => "logistic",
        }
    }

    /// The conjugate's strong-convexity modulus, i.e. the loss is
    /// `1/gamma`-smooth.
    pub fn gamma(self) -> f64 {
        match self {
            Self::Quadratic => 1.0,
            Self::Logistic => 4.0,
        }
    }

    pub fn check_label(self, b: f64) -> Result<()> {
        match self {
            Self::Quadratic if b.is_finite() => Ok(()),
            Self::Logistic if b == 1.0 || b == -1.0 => Ok(()),
            _ => Err(Error::InvalidArgument(format!(
                "label {b} is not valid for {} loss",
                self.name()
            ))),
        }
    }

    pub fn value(self, t: f64, b: f64) -> f64 {
        match self {
            Self::Quadratic => 0.5 * (t - b) * (t - b),
            Self::Logistic => softplus(-b * t),
        }
    }

    pub fn derivative(self, t: f64, b: f64) -> f64 {
        match self {
            Self::Quadratic => t - b,
            Self::Logistic => -b * sigmoid(-b * t),
        }
    }

    /// `phi*(u)`; `+inf` outside the domain.
    pub fn conjugate(self, u: f64, b: f64) -> f64 {
        match self {
            Self::Quadratic => 0.5 * u * u + b * u,
            Self::Logistic => {
                // s = b u must lie in [-1, 0]
                let s = b * u;
                if !(-1.0..=0.0).contains(&s) {
                    return f64::INFINITY;
                }
                xlogx(-s) + xlogx(1.0 + s)
            }
        }
    }

    pub fn conjugate_derivative(self, u: f64, b: f64) -> f64 {
        match self {
            Self::Quadratic => u + b,
            Self::Logistic => {
                let s = b * u;
                b * ((1.0 + s) / (-s)).ln()
            }
        }
    }

    pub fn conjugate_second_derivative(self, u: f64, b: f64) -> f64 {
        match self {
            Self::Quadratic => 1.0,
            Self::Logistic => {
                let s = b * u;
                1.0 / (-s * (1.0 + s))
            }
        }
    }

    /// Closed domain of `phi*` as `(lo, hi)`; infinite for quadratic loss.
    pub fn conjugate_domain(self, b: f64) -> (f64, f64) {
        match self {
            Self::Quadratic => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Logistic if b > 0.0 => (-1.0 / b, 0.0),
            Self::Logistic => (0.0, -1.0 / b),
        }
    }
}
