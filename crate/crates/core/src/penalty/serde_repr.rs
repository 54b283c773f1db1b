use serde::{Deserialize, Serialize};

use super::{Family, FamilyKind, PenaltySpec};
use crate::error::Error;

/// Flat wire form of a [`PenaltySpec`]:
/// `{"family": "laplace", "lambda": 1.0, "epsilon": 1e-7}`.
///
/// Only the parameter relevant to `family` is read; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPenaltySpec {
    pub family: Option<FamilyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl RawPenaltySpec {
    /// Builds the family, requiring its shape parameter. `lambda` is not read.
    pub fn family(&self) -> Result<Family, Error> {
        let kind = self.family.ok_or(Error::MissingParameter { family: "any", name: "family" })?;
        let need = |v: Option<f64>, name: &'static str| {
            v.ok_or(Error::MissingParameter { family: kind.name(), name })
        };
        Ok(match kind {
            FamilyKind::None => Family::None,
            FamilyKind::L1 => Family::L1,
            FamilyKind::L2 => Family::L2,
            FamilyKind::Bridge => Family::Bridge { kappa: need(self.kappa, "kappa")? },
            FamilyKind::Scad => Family::Scad { a: need(self.a, "a")? },
            FamilyKind::Mcp => Family::Mcp { b: need(self.b, "b")? },
            FamilyKind::Laplace => Family::Laplace { epsilon: need(self.epsilon, "epsilon")? },
            FamilyKind::Arctan => Family::Arctan { gamma: need(self.gamma, "gamma")? },
            FamilyKind::GemanMcclure => Family::GemanMcclure { sigma: need(self.sigma, "sigma")? },
            FamilyKind::Log => Family::Log { sigma: need(self.sigma, "sigma")? },
            FamilyKind::CappedL1 => Family::CappedL1 { c: need(self.c, "c")? },
        })
    }

    pub fn build(&self) -> Result<PenaltySpec, Error> {
        let family = self.family()?;
        let lambda = match family {
            Family::None => self.lambda.unwrap_or(0.0),
            _ => self.lambda.ok_or(Error::MissingParameter {
                family: family.kind().name(),
                name: "lambda",
            })?,
        };
        PenaltySpec::new(family, lambda)
    }
}

impl TryFrom<RawPenaltySpec> for PenaltySpec {
    type Error = Error;

    fn try_from(raw: RawPenaltySpec) -> Result<Self, Self::Error> {
        raw.build()
    }
}

impl From<PenaltySpec> for RawPenaltySpec {
    fn from(spec: PenaltySpec) -> Self {
        let mut raw = RawPenaltySpec {
            family: Some(spec.kind()),
            lambda: Some(spec.lambda()),
            ..Default::default()
        };
        match spec.family() {
            Family::None | Family::L1 | Family::L2 => {}
            Family::Bridge { kappa } => raw.kappa = Some(kappa),
            Family::Scad { a } => raw.a = Some(a),
            Family::Mcp { b } => raw.b = Some(b),
            Family::Laplace { epsilon } => raw.epsilon = Some(epsilon),
            Family::Arctan { gamma } => raw.gamma = Some(gamma),
            Family::GemanMcclure { sigma } | Family::Log { sigma } => raw.sigma = Some(sigma),
            Family::CappedL1 { c } => raw.c = Some(c),
        }
        raw
    }
}
