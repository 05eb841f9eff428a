use thiserror::Error;

/// Errors raised by the analytic models and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A parameter is outside the range its model accepts.
    #[error("parameter `{field}` = {value} violates {bound}")]
    Parameter {
        field: &'static str,
        value: String,
        bound: String,
    },
    /// The external-memory model cannot run the requested algorithm.
    #[error("external-memory model: {0}")]
    EmModel(String),
}

impl ModelError {
    pub(crate) fn param(
        field: &'static str,
        value: impl ToString,
        bound: impl Into<String>,
    ) -> Self {
        ModelError::Parameter {
            field,
            value: value.to_string(),
            bound: bound.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
