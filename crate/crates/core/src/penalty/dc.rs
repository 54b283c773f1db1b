use std::f64::consts::FRAC_2_PI;

use serde::Serialize;

use super::{Family, PenaltySpec};
use crate::error::{Error, Result};

/// Difference-of-convex split `p(t) = scale * (g(t) - h(t))`.
///
/// `g` is a multiple of `|t|`; `h` is convex, once continuously
/// differentiable, with an `h_lipschitz`-Lipschitz derivative. `scale` is
/// `2/pi` for arctan (whose split is written on `gamma |t|` and
/// `atan(gamma |t|)`) and 1 otherwise. All parts already include `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DcParts {
    pub g_value: f64,
    pub h_value: f64,
    pub h_deriv: f64,
    pub h_lipschitz: f64,
    /// Coefficient of `|t|` in `g`.
    pub g_slope: f64,
    pub scale: f64,
}

impl DcParts {
    /// `scale * (g - h)`, equal to the penalty value.
    pub fn penalty_value(&self) -> f64 {
        self.scale * (self.g_value - self.h_value)
    }

    /// The same split with `scale` folded into every part.
    pub fn scaled(&self) -> DcParts {
        DcParts {
            g_value: self.scale * self.g_value,
            h_value: self.scale * self.h_value,
            h_deriv: self.scale * self.h_deriv,
            h_lipschitz: self.scale * self.h_lipschitz,
            g_slope: self.scale * self.g_slope,
            scale: 1.0,
        }
    }
}

pub(super) fn components(spec: &PenaltySpec, t: f64) -> Result<DcParts> {
    if !t.is_finite() {
        return Err(Error::NonFinite(t));
    }
    let lambda = spec.lambda();
    let x = t.abs();
    let s = if t == 0.0 { 0.0 } else { t.signum() };
    let parts = match spec.family() {
        Family::Laplace { epsilon } => {
            let l = -epsilon.ln();
            // 1 - eps^x, computed without cancellation
            let one_minus = -(-l * x).exp_m1();
            DcParts {
                g_value: lambda * l * x,
                h_value: lambda * (l * x - one_minus),
                h_deriv: lambda * l * s * one_minus,
                h_lipschitz: lambda * l * l,
                g_slope: lambda * l,
                scale: 1.0,
            }
        }
        Family::Arctan { gamma } => {
            let y = gamma * x;
            DcParts {
                g_value: lambda * y,
                h_value: lambda * (y - y.atan()),
                h_deriv: lambda * gamma * s * (y * y) / (1.0 + y * y),
                h_lipschitz: lambda * gamma * gamma,
                g_slope: lambda * gamma,
                scale: FRAC_2_PI,
            }
        }
        Family::Scad { a } => DcParts {
            g_value: lambda * x,
            h_value: lambda * x - spec.eval(t),
            h_deriv: lambda * s - spec.eval_deriv(t),
            h_lipschitz: if lambda > 0.0 { 1.0 / (a - 1.0) } else { 0.0 },
            g_slope: lambda,
            scale: 1.0,
        },
        Family::Mcp { b } => DcParts {
            g_value: lambda * x,
            h_value: lambda * x - spec.eval(t),
            h_deriv: lambda * s - spec.eval_deriv(t),
            h_lipschitz: if lambda > 0.0 { 1.0 / b } else { 0.0 },
            g_slope: lambda,
            scale: 1.0,
        },
        Family::L1 => DcParts {
            g_value: lambda * x,
            h_value: 0.0,
            h_deriv: 0.0,
            h_lipschitz: 0.0,
            g_slope: lambda,
            scale: 1.0,
        },
        _ => {
            return Err(Error::Unsupported {
                op: "DC decomposition",
                family: spec.kind().name(),
                reason: "only laplace, arctan, scad, mcp and l1 have an implemented split",
            })
        }
    };
    Ok(parts)
}
