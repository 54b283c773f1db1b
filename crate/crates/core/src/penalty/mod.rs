//! Coordinate-separable penalty families.
//!
//! Every family is a scalar function `t -> p(t)` already multiplied by its
//! regularization weight `lambda`. SCAD and MCP carry `lambda` inside their
//! piecewise definitions; all other families are `lambda * p(|t|)`.

mod bounds;
mod dc;
mod serde_repr;

pub use bounds::{
    arctan_lower_slack, arctan_sum_square_slack, arctan_upper_slack, laplace_linear_slack,
    laplace_rational_slack, laplace_sum_square_slack,
};
pub use dc::DcParts;
pub use serde_repr::RawPenaltySpec;

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tag of a penalty family, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    None,
    L1,
    L2,
    Bridge,
    Scad,
    Mcp,
    Laplace,
    Arctan,
    GemanMcclure,
    Log,
    CappedL1,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 11] = [
        FamilyKind::None,
        FamilyKind::L1,
        FamilyKind::L2,
        FamilyKind::Bridge,
        FamilyKind::Scad,
        FamilyKind::Mcp,
        FamilyKind::Laplace,
        FamilyKind::Arctan,
        FamilyKind::GemanMcclure,
        FamilyKind::Log,
        FamilyKind::CappedL1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::None => "none",
            FamilyKind::L1 => "l1",
            FamilyKind::L2 => "l2",
            FamilyKind::Bridge => "bridge",
            FamilyKind::Scad => "scad",
            FamilyKind::Mcp => "mcp",
            FamilyKind::Laplace => "laplace",
            FamilyKind::Arctan => "arctan",
            FamilyKind::GemanMcclure => "geman_mcclure",
            FamilyKind::Log => "log",
            FamilyKind::CappedL1 => "capped_l1",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        FamilyKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A penalty family together with its shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    None,
    L1,
    L2,
    /// `|t|^kappa`.
    Bridge { kappa: f64 },
    /// Fan–Li SCAD with shape `a > 2`.
    Scad { a: f64 },
    /// Minimax concave penalty with shape `b > 0`.
    Mcp { b: f64 },
    /// `1 - epsilon^|t|`, `epsilon` in (0, 1).
    Laplace { epsilon: f64 },
    /// `(2/pi) atan(gamma |t|)`.
    Arctan { gamma: f64 },
    /// Transformed L1: `|t| / (sigma + |t|)`.
    GemanMcclure { sigma: f64 },
    /// `log(1 + |t| / sigma)`.
    Log { sigma: f64 },
    /// `min(|t| / c, 1)`.
    CappedL1 { c: f64 },
}

impl Family {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::None => FamilyKind::None,
            Family::L1 => FamilyKind::L1,
            Family::L2 => FamilyKind::L2,
            Family::Bridge { .. } => FamilyKind::Bridge,
            Family::Scad { .. } => FamilyKind::Scad,
            Family::Mcp { .. } => FamilyKind::Mcp,
            Family::Laplace { .. } => FamilyKind::Laplace,
            Family::Arctan { .. } => FamilyKind::Arctan,
            Family::GemanMcclure { .. } => FamilyKind::GemanMcclure,
            Family::Log { .. } => FamilyKind::Log,
            Family::CappedL1 { .. } => FamilyKind::CappedL1,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            Family::None | Family::L1 | Family::L2 => Ok(()),
            Family::Bridge { kappa } => positive("kappa", kappa),
            Family::Scad { a } => {
                if a.is_finite() && a > 2.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!("SCAD shape a must exceed 2, got {a}")))
                }
            }
            Family::Mcp { b } => positive("b", b),
            Family::Laplace { epsilon } => {
                if epsilon > 0.0 && epsilon < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "epsilon must lie in (0, 1), got {epsilon}"
                    )))
                }
            }
            Family::Arctan { gamma } => positive("gamma", gamma),
            Family::GemanMcclure { sigma } | Family::Log { sigma } => positive("sigma", sigma),
            Family::CappedL1 { c } => positive("c", c),
        }
    }
}

/// A validated penalty: family, shape parameter and weight `lambda >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenaltySpec", into = "RawPenaltySpec")]
pub struct PenaltySpec {
    family: Family,
    lambda: f64,
}

impl PenaltySpec {
    pub fn new(family: Family, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        family.validate()?;
        Ok(Self { family, lambda })
    }

    pub fn none() -> Self {
        Self { family: Family::None, lambda: 0.0 }
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(Family::L1, lambda)
    }

    pub fn l2(lambda: f64) -> Result<Self> {
        Self::new(Family::L2, lambda)
    }

    pub fn bridge(lambda: f64, kappa: f64) -> Result<Self> {
        Self::new(Family::Bridge { kappa }, lambda)
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::new(Family::Scad { a }, lambda)
    }

    pub fn mcp(lambda: f64, b: f64) -> Result<Self> {
        Self::new(Family::Mcp { b }, lambda)
    }

    pub fn laplace(lambda: f64, epsilon: f64) -> Result<Self> {
        Self::new(Family::Laplace { epsilon }, lambda)
    }

    pub fn arctan(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(Family::Arctan { gamma }, lambda)
    }

    pub fn geman_mcclure(lambda: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::GemanMcclure { sigma }, lambda)
    }

    pub fn log(lambda: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::Log { sigma }, lambda)
    }

    pub fn capped_l1(lambda: f64, c: f64) -> Result<Self> {
        Self::new(Family::CappedL1 { c }, lambda)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn kind(&self) -> FamilyKind {
        self.family.kind()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same family and shape, different weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda)
    }

    /// Penalty value; rejects non-finite arguments.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite(t));
        }
        Ok(self.eval(t))
    }

    /// Unchecked penalty value for hot loops.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let lambda = self.lambda;
        if lambda == 0.0 {
            return 0.0;
        }
        let x = t.abs();
        match self.family {
            Family::None => 0.0,
            Family::L1 => lambda * x,
            Family::L2 => lambda * x * x,
            Family::Bridge { kappa } => lambda * x.powf(kappa),
            Family::Scad { a } => {
                if x <= lambda {
                    lambda * x
                } else if x <= a * lambda {
                    -(x * x - 2.0 * a * lambda * x + lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lambda * lambda / 2.0
                }
            }
            Family::Mcp { b } => {
                if x <= b * lambda {
                    lambda * x - x * x / (2.0 * b)
                } else {
                    b * lambda * lambda / 2.0
                }
            }
            // 1 - eps^x = -expm1(x ln eps), accurate for small x.
            Family::Laplace { epsilon } => -lambda * (x * epsilon.ln()).exp_m1(),
            Family::Arctan { gamma } => lambda * FRAC_2_PI * (gamma * x).atan(),
            Family::GemanMcclure { sigma } => lambda * x / (sigma + x),
            Family::Log { sigma } => lambda * (x / sigma).ln_1p(),
            Family::CappedL1 { c } => lambda * (x / c).min(1.0),
        }
    }

    /// Derivative at `t != 0`.
    pub fn deriv(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite(t));
        }
        if t == 0.0 {
            return Err(Error::AtZero);
        }
        match self.family {
            Family::Bridge { kappa } if kappa < 1.0 => Err(Error::Unsupported {
                op: "derivative",
                family: "bridge",
                reason: "nonconvex bridge penalties are supported for values only",
            }),
            Family::CappedL1 { c } if t.abs() == c && self.lambda > 0.0 => {
                Err(Error::Kink { family: "capped_l1", at: t })
            }
            _ => Ok(self.eval_deriv(t)),
        }
    }

    /// Unchecked derivative. Returns 0 at `t == 0` (a valid subgradient for
    /// every family with a bounded subgradient interval) and the right-hand
    /// slope at the capped-L1 kink.
    #[inline]
    pub fn eval_deriv(&self, t: f64) -> f64 {
        let lambda = self.lambda;
        if lambda == 0.0 || t == 0.0 {
            return 0.0;
        }
        let x = t.abs();
        let s = t.signum();
        let slope = match self.family {
            Family::None => 0.0,
            Family::L1 => lambda,
            Family::L2 => 2.0 * lambda * x,
            Family::Bridge { kappa } => lambda * kappa * x.powf(kappa - 1.0),
            Family::Scad { a } => {
                if x <= lambda {
                    lambda
                } else if x <= a * lambda {
                    (a * lambda - x) / (a - 1.0)
                } else {
                    0.0
                }
            }
            Family::Mcp { b } => {
                if x <= b * lambda {
                    lambda - x / b
                } else {
                    0.0
                }
            }
            Family::Laplace { epsilon } => {
                let l = -epsilon.ln();
                lambda * l * (-l * x).exp()
            }
            Family::Arctan { gamma } => lambda * FRAC_2_PI * gamma / (1.0 + gamma * gamma * x * x),
            Family::GemanMcclure { sigma } => lambda * sigma / ((sigma + x) * (sigma + x)),
            Family::Log { sigma } => lambda / (sigma + x),
            Family::CappedL1 { c } => {
                if x < c {
                    lambda / c
                } else {
                    0.0
                }
            }
        };
        s * slope
    }

    /// Second derivative at `t != 0` where it exists (piecewise families
    /// return the one-sided value at their breakpoints).
    pub fn second_deriv(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Err(Error::AtZero);
        }
        if let Family::Bridge { kappa } = self.family {
            if kappa < 1.0 {
                return Err(Error::Unsupported {
                    op: "second derivative",
                    family: "bridge",
                    reason: "nonconvex bridge penalties are supported for values only",
                });
            }
        }
        let lambda = self.lambda;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let x = t.abs();
        Ok(match self.family {
            Family::None | Family::L1 | Family::CappedL1 { .. } => 0.0,
            Family::L2 => 2.0 * lambda,
            Family::Bridge { kappa } => lambda * kappa * (kappa - 1.0) * x.powf(kappa - 2.0),
            Family::Scad { a } => {
                if x > lambda && x <= a * lambda {
                    -1.0 / (a - 1.0)
                } else {
                    0.0
                }
            }
            Family::Mcp { b } => {
                if x <= b * lambda {
                    -1.0 / b
                } else {
                    0.0
                }
            }
            Family::Laplace { epsilon } => {
                let l = -epsilon.ln();
                -lambda * l * l * (-l * x).exp()
            }
            Family::Arctan { gamma } => {
                let d = 1.0 + gamma * gamma * x * x;
                -lambda * FRAC_2_PI * 2.0 * gamma.powi(3) * x / (d * d)
            }
            Family::GemanMcclure { sigma } => -2.0 * lambda * sigma / (sigma + x).powi(3),
            Family::Log { sigma } => -lambda / ((sigma + x) * (sigma + x)),
        })
    }

    /// The constant `lambda * L` bounding every derivative and subgradient.
    pub fn lipschitz_bound(&self) -> Result<f64> {
        let lambda = self.lambda;
        match self.family {
            Family::None => Ok(0.0),
            Family::L1 | Family::Scad { .. } | Family::Mcp { .. } => Ok(lambda),
            Family::Bridge { kappa } if kappa == 1.0 => Ok(lambda),
            Family::L2 | Family::Bridge { .. } if lambda == 0.0 => Ok(0.0),
            Family::L2 | Family::Bridge { .. } => Err(Error::Unsupported {
                op: "Lipschitz bound",
                family: self.kind().name(),
                reason: "the penalty is not globally Lipschitz",
            }),
            Family::Laplace { epsilon } => Ok(-lambda * epsilon.ln()),
            Family::Arctan { gamma } => Ok(2.0 * lambda * gamma / PI),
            Family::GemanMcclure { sigma } | Family::Log { sigma } => Ok(lambda / sigma),
            Family::CappedL1 { c } => Ok(lambda / c),
        }
    }

    /// Interval of valid subgradients at `t = 0`.
    pub fn subgradient_interval(&self) -> Result<(f64, f64)> {
        match self.family {
            Family::Bridge { kappa } if kappa < 1.0 && self.lambda > 0.0 => {
                Err(Error::Unsupported {
                    op: "subgradient interval",
                    family: "bridge",
                    reason: "the derivative at zero is infinite",
                })
            }
            Family::L2 | Family::Bridge { .. } if self.lambda == 0.0 => Ok((0.0, 0.0)),
            Family::L2 => Ok((0.0, 0.0)),
            Family::Bridge { kappa } if kappa > 1.0 => Ok((0.0, 0.0)),
            _ => {
                let bound = self.lipschitz_bound()?;
                Ok((-bound, bound))
            }
        }
    }

    /// Smallest `mu` with `p(t) + mu t^2 / 2` convex.
    pub fn weak_convexity_mu(&self) -> Result<f64> {
        let lambda = self.lambda;
        match self.family {
            Family::Bridge { kappa } if kappa < 1.0 && lambda > 0.0 => Err(Error::Unsupported {
                op: "weak convexity",
                family: "bridge",
                reason: "no finite mu convexifies a bridge penalty with kappa < 1",
            }),
            Family::CappedL1 { .. } if lambda > 0.0 => Err(Error::Unsupported {
                op: "weak convexity",
                family: "capped_l1",
                reason: "the cap introduces a concave kink that no quadratic removes",
            }),
            _ if lambda == 0.0 => Ok(0.0),
            Family::None | Family::L1 | Family::L2 | Family::Bridge { .. } => Ok(0.0),
            Family::CappedL1 { .. } => Ok(0.0),
            Family::Scad { a } => Ok(1.0 / (a - 1.0)),
            Family::Mcp { b } => Ok(1.0 / b),
            Family::Laplace { epsilon } => Ok(lambda * epsilon.ln().powi(2)),
            Family::Arctan { gamma } => Ok(2.0 * lambda * gamma * gamma / PI),
            Family::GemanMcclure { sigma } => Ok(2.0 * lambda / (sigma * sigma)),
            Family::Log { sigma } => Ok(lambda / (sigma * sigma)),
        }
    }

    /// Radius beyond which the derivative is exactly zero, if one exists.
    pub fn flat_radius(&self) -> Option<f64> {
        if self.lambda == 0.0 {
            return Some(0.0);
        }
        match self.family {
            Family::None => Some(0.0),
            Family::Scad { a } => Some(a * self.lambda),
            Family::Mcp { b } => Some(b * self.lambda),
            Family::CappedL1 { c } => Some(c),
            _ => None,
        }
    }

    /// Smallest `T` with `|p'(t)| < tol` for all `|t| > T`, for families whose
    /// derivative decays monotonically to zero.
    pub fn tail_radius(&self, tol: f64) -> Option<f64> {
        if let Some(r) = self.flat_radius() {
            return Some(r);
        }
        let lambda = self.lambda;
        match self.family {
            Family::Laplace { epsilon } => {
                let l = -epsilon.ln();
                Some(((lambda * l / tol).ln() / l).max(0.0))
            }
            Family::Arctan { gamma } => {
                let r = 2.0 * lambda * gamma / (PI * tol) - 1.0;
                Some(r.max(0.0).sqrt() / gamma)
            }
            Family::GemanMcclure { sigma } => Some(((lambda * sigma / tol).sqrt() - sigma).max(0.0)),
            Family::Log { sigma } => Some((lambda / tol - sigma).max(0.0)),
            _ => None,
        }
    }

    /// Difference-of-convex split at `t`.
    pub fn dc_components(&self, t: f64) -> Result<DcParts> {
        dc::components(self, t)
    }

    /// `sum_j p(w_j)`.
    pub fn sum(&self, w: &[f64]) -> f64 {
        w.iter().map(|&t| self.eval(t)).sum()
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(lambda={}", self.kind(), self.lambda)?;
        match self.family {
            Family::None | Family::L1 | Family::L2 => {}
            Family::Bridge { kappa } => write!(f, ", kappa={kappa}")?,
            Family::Scad { a } => write!(f, ", a={a}")?,
            Family::Mcp { b } => write!(f, ", b={b}")?,
            Family::Laplace { epsilon } => write!(f, ", epsilon={epsilon}")?,
            Family::Arctan { gamma } => write!(f, ", gamma={gamma}")?,
            Family::GemanMcclure { sigma } | Family::Log { sigma } => write!(f, ", sigma={sigma}")?,
            Family::CappedL1 { c } => write!(f, ", c={c}")?,
        }
        f.write_str(")")
    }
}
