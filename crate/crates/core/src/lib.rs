//! Nonconvex sparsity penalties and the tooling around them: proximal
//! operators, penalized least-squares and logistic solvers, property checks,
//! asymptotic simulations and a small MLP training harness.

pub mod asymptotics;
pub mod data;
pub mod error;
pub mod nn;
pub mod numeric;
pub mod penalty;
pub mod properties;
pub mod prox;
pub mod solvers;

pub use data::{Dataset, Role};
pub use error::{Error, Result};
pub use penalty::{DcParts, Family, FamilyKind, PenaltySpec};
pub use properties::{Property, PropertyCheck, PropertyReport, Verdict, Witness};
pub use prox::{LocalMin, OracleMin, ProxMethod, ProxResult};
pub use solvers::{Algorithm, FitResult, Loss, SolverConfig};
