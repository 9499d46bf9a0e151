//! Proportionality up to the maximin item (PROPm): fairness checks for
//! indivisible goods, close-to-proportional bundles, a constructive solver
//! with checkable certificates for up to five agents, and exhaustive
//! oracles for small instances.

pub mod cpsets;
pub mod error;
pub mod fairness;
pub mod leximin;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod solver;

pub use error::{Error, Result};
pub use fairness::{check, FairnessReport, Notion};
pub use model::{Allocation, Bundle, Instance, Value};
pub use oracle::Budget;
pub use rational::Rational;
pub use solver::{solve_propm, verify_certificate, Certificate};
