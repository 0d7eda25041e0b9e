use std::fmt;

/// Parameter constraint that a [`crate::model::ModelParams`] tuple violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    NonFinite,
    NonPositiveM,
    NonPositiveP,
    NonPositiveB,
    BetaOutOfRange,
    FastDiffusion,
    CriticalBalance,
    NonPositiveTheta,
    NonPositiveUpsilon,
    NonNegativeSpeed,
    BadInput,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::NonFinite => "all parameters must be finite",
            Constraint::NonPositiveM => "m must be positive",
            Constraint::NonPositiveP => "p must be positive",
            Constraint::NonPositiveB => "b must be positive",
            Constraint::BetaOutOfRange => "beta must lie in (0, 1)",
            Constraint::FastDiffusion => "mp <= 1 (slow diffusion requires mp > 1)",
            Constraint::CriticalBalance => "p(m+beta) = 1+p (critical balance is not supported)",
            Constraint::NonPositiveTheta => "theta must be positive",
            Constraint::NonPositiveUpsilon => "upsilon must be positive",
            Constraint::NonNegativeSpeed => "the critical curve exists only for k < 0",
            Constraint::BadInput => "invalid numerical input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {constraint}{}", detail_suffix(.detail))]
    Domain {
        constraint: Constraint,
        detail: String,
    },
    #[error("no asymptotic law covers the {end} end for this regime")]
    UncoveredRegime { end: &'static str },
    #[error("integration failure at x = {at:e}: {reason}")]
    IntegrationFailure { at: f64, reason: String },
    #[error("value {value:e} outside the computed range [{lo:e}, {hi:e}]")]
    RangeExceeded { value: f64, lo: f64, hi: f64 },
    #[error("bracket stalled with sup-gap {gap:e} (target {target:e})")]
    BracketStall { gap: f64, target: f64 },
    #[error("quadrature failure on [{lo:e}, {hi:e}]: refinement budget exhausted")]
    QuadratureFailure { lo: f64, hi: f64 },
}

fn detail_suffix(detail: &str) -> String {
    if detail.is_empty() {
        String::new()
    } else {
        format!(" ({detail})")
    }
}

impl Error {
    pub(crate) fn domain(constraint: Constraint) -> Self {
        Error::Domain {
            constraint,
            detail: String::new(),
        }
    }

    pub(crate) fn domain_with(constraint: Constraint, detail: impl Into<String>) -> Self {
        Error::Domain {
            constraint,
            detail: detail.into(),
        }
    }

    pub(crate) fn integration(at: f64, reason: impl Into<String>) -> Self {
        Error::IntegrationFailure {
            at,
            reason: reason.into(),
        }
    }

    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::UncoveredRegime { .. } => "uncovered_regime",
            Error::IntegrationFailure { .. } => "integration_failure",
            Error::RangeExceeded { .. } => "range_exceeded",
            Error::BracketStall { .. } => "bracket_stall",
            Error::QuadratureFailure { .. } => "quadrature_failure",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
