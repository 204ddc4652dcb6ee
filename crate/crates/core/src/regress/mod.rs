//! OLS estimation of the funding-on-consumption model family, plus rank
//! correlation for cross-dataset checks.

pub mod design;
pub mod ols;
pub mod spearman;
pub mod suite;

use thiserror::Error;

use crate::corpus::FieldId;

pub use design::{build_design, Design, FieldObservation, ModelSpec, Predictor};
pub use ols::{ols_fit, OlsFit};
pub use spearman::{spearman, SpearmanResult};
pub use suite::{
    fit_model, format_f_statistic, format_models_table, model_spec, run_model_suite,
    significance_stars, CoefStat, ModelFit,
};

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("model needs at least one predictor")]
    NoPredictors,
    #[error("{column} is 0 for field {field} and the add-one guard is off")]
    ZeroWithGuardOff { field: FieldId, column: String },
    #[error("{column} is negative for field {field}")]
    NegativeValue { field: FieldId, column: String },
    #[error("design has {rows} usable rows for {cols} columns")]
    TooFewRows { rows: usize, cols: usize },
    #[error("design is numerically singular after column drops")]
    Singular,
    #[error("response is constant, fit statistics undefined")]
    ConstantResponse,
    #[error("inputs differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("rank correlation of a constant sequence is undefined")]
    ConstantInput,
    #[error("no model numbered {0} in the suite")]
    UnknownModel(u32),
}

/// Natural log with the add-one-at-zero guard: values are logged as-is, and
/// an exact zero becomes ln(0 + 1) = 0 when the guard is on.
pub fn log_with_guard(x: f64, guard: bool) -> Result<f64, ZeroLog> {
    if x < 0.0 || x.is_nan() {
        return Err(ZeroLog::Negative);
    }
    if x == 0.0 {
        return if guard { Ok(0.0) } else { Err(ZeroLog::Zero) };
    }
    Ok(x.ln())
}

/// Why [`log_with_guard`] refused a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroLog {
    Zero,
    Negative,
}
