//! Patterson-Sullivan densities, Koopman boundary representations and Hopf
//! ergodic averages, computed exactly on weighted free groups acting on their
//! Cayley trees.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod boundary;
pub mod classify;
pub mod config;
pub mod density;
pub mod error;
pub mod estimates;
pub mod experiments;
pub mod flow;
pub mod koopman;
pub mod par;
pub mod report;
pub mod stats;
pub mod step;
pub mod words;

pub use boundary::{BoundaryPoint, Cylinder, VisualMetric};
pub use density::{critical_exponent, ConformalDensity, TransferMatrix};
pub use error::{LabError, Result};
pub use par::Exec;
pub use step::StepFunction;
pub use words::{GroupModel, Letter, Word};
