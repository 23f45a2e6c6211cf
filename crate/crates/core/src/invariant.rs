use serde::Serialize;

use crate::error::{Error, Result};

/// Outcome of one runtime-checked property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl InvariantCheck {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        InvariantCheck { name: name.into(), passed, detail: detail.into() }
    }

    /// `lhs <= rhs` up to a relative slack of `1e-9` plus absolute `1e-9`.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let passed = lhs <= rhs + 1e-9 * rhs.abs().max(1.0);
        InvariantCheck::new(name, passed, format!("{lhs} <= {rhs}"))
    }
}

/// First failing check as an [`Error::Invariant`].
pub fn ensure_all(checks: &[InvariantCheck]) -> Result<()> {
    match checks.iter().find(|c| !c.passed) {
        Some(c) => Err(Error::Invariant(format!("{}: {}", c.name, c.detail))),
        None => Ok(()),
    }
}
