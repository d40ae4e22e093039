use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of its physical range.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An input is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("search space of {states} states exceeds the budget of {budget}")]
    SearchBudget { states: u128, budget: u128 },
    #[error("integration failed at t = {t:e} s after {steps} steps (last step {step:e} s): {reason}")]
    Integration { t: f64, steps: usize, step: f64, reason: &'static str },
    #[error("payload needs {needed} slots but only {capacity} are available")]
    Capacity { needed: u64, capacity: u64 },
    /// Expanded bursts overlap; pairs of offending kick indices.
    #[error("expanded bursts collide for kick pairs {0:?}")]
    Collision(Vec<(usize, usize)>),
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
