//! The eight-model estimation suite and its summary-table renderer.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{FieldId, FieldTaxonomy};

use super::design::{build_design, FieldObservation, ModelSpec, Predictor};
use super::ols::ols_fit;
use super::RegressError;

/// Model numbers the suite knows, in running order.
pub const MODEL_NUMBERS: [u32; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

/// One estimated coefficient with its classical inference statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefStat {
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

/// A fitted model of the suite, keyed for rendering and reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model_number: u32,
    pub spec: ModelSpec,
    /// Retained design columns, in design order.
    pub labels: Vec<String>,
    /// Columns dropped as linearly dependent.
    pub dropped: Vec<String>,
    /// Fields left out of the estimation sample, with reasons.
    pub skipped_rows: Vec<(FieldId, String)>,
    pub n: usize,
    pub coefficients: BTreeMap<String, CoefStat>,
    pub r_squared: f64,
    /// NaN for intercept-only fits; JSON carries that as null.
    #[serde(deserialize_with = "nan_from_null")]
    pub f_statistic: f64,
    pub rmse: f64,
}

fn nan_from_null<'de, D>(deserializer: D) -> Result<f64, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::NAN))
}

/// The column set for one model of the suite.
///
/// Models 1-3 regress funding per paper on a single consumption index;
/// 4-6 add the paper-count control and level-0 fixed effects; 7 uses all
/// three indices jointly; 8 combines all of the above.
pub fn model_spec(model_number: u32) -> Option<ModelSpec> {
    let (predictors, controls) = match model_number {
        1 => (vec![Predictor::RciGovernment], false),
        2 => (vec![Predictor::RciNews], false),
        3 => (vec![Predictor::RciPatent], false),
        4 => (vec![Predictor::RciGovernment], true),
        5 => (vec![Predictor::RciNews], true),
        6 => (vec![Predictor::RciPatent], true),
        7 => (Predictor::ALL.to_vec(), false),
        8 => (Predictor::ALL.to_vec(), true),
        _ => return None,
    };
    Some(ModelSpec {
        predictors,
        paper_count_control: controls,
        level0_fixed_effects: controls,
        ..ModelSpec::default()
    })
}

/// Estimate one model of the suite.
pub fn fit_model(
    model_number: u32,
    observations: &[FieldObservation],
    taxonomy: &FieldTaxonomy,
) -> Result<ModelFit, RegressError> {
    let spec = model_spec(model_number).ok_or(RegressError::UnknownModel(model_number))?;
    let design = build_design(observations, taxonomy, &spec)?;
    let fit = ols_fit(&design.x, &design.y)?;
    let coefficients = design
        .labels
        .iter()
        .enumerate()
        .map(|(j, label)| {
            (
                label.clone(),
                CoefStat {
                    estimate: fit.coefficients[j],
                    std_error: fit.std_errors[j],
                    t_value: fit.t_values[j],
                    p_value: fit.p_values[j],
                },
            )
        })
        .collect();
    Ok(ModelFit {
        model_number,
        spec,
        labels: design.labels,
        dropped: design.dropped,
        skipped_rows: design.skipped_rows,
        n: fit.n,
        coefficients,
        r_squared: fit.r_squared,
        f_statistic: fit.f_statistic,
        rmse: fit.rmse,
    })
}

/// Estimate all eight models on the same field panel.
pub fn run_model_suite(
    observations: &[FieldObservation],
    taxonomy: &FieldTaxonomy,
) -> Result<Vec<ModelFit>, RegressError> {
    MODEL_NUMBERS
        .iter()
        .map(|&m| fit_model(m, observations, taxonomy))
        .collect()
}

/// Two-sided significance stars at the 1%, 5%, and 10% levels.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.1 {
        "*"
    } else {
        ""
    }
}

/// F statistic to four significant digits, trailing zeros kept.
pub fn format_f_statistic(f: f64) -> String {
    if !f.is_finite() {
        return String::new();
    }
    let magnitude = f.abs();
    let decimals = if magnitude == 0.0 {
        3
    } else {
        (3 - magnitude.log10().floor() as i64).max(0) as usize
    };
    format!("{f:.decimals$}")
}

fn coefficient_cell(stat: &CoefStat) -> String {
    format!(
        "{:.3}{} ({:.3})",
        stat.estimate,
        significance_stars(stat.p_value),
        stat.std_error
    )
}

fn predictor_row_label(p: Predictor) -> &'static str {
    match p {
        Predictor::RciGovernment => "Policy (RCI)",
        Predictor::RciNews => "News (RCI)",
        Predictor::RciPatent => "Patent (RCI)",
    }
}

/// Render fitted models as a tab-separated table, one column per model.
///
/// Coefficient cells hold the estimate, stars, and the standard error in
/// parentheses. The paper-count and fixed-effect rows appear only when some
/// model uses them; intercepts and individual fixed-effect estimates are
/// not shown.
pub fn format_models_table(fits: &[ModelFit]) -> String {
    let mut lines: Vec<String> = Vec::new();
    let row = |label: &str, cells: Vec<String>| -> String {
        let mut line = label.to_string();
        for cell in cells {
            line.push('\t');
            line.push_str(&cell);
        }
        line
    };

    lines.push(row(
        "Model",
        fits.iter().map(|f| format!("({})", f.model_number)).collect(),
    ));
    lines.push(row("VARIABLES", vec![String::new(); fits.len()]));

    for p in Predictor::ALL {
        if !fits.iter().any(|f| f.spec.predictors.contains(&p)) {
            continue;
        }
        let cells = fits
            .iter()
            .map(|f| {
                if f.spec.predictors.contains(&p) {
                    f.coefficients
                        .get(p.label())
                        .map(coefficient_cell)
                        .unwrap_or_default()
                } else {
                    String::new()
                }
            })
            .collect();
        lines.push(row(predictor_row_label(p), cells));
    }

    if fits.iter().any(|f| f.spec.paper_count_control) {
        let cells = fits
            .iter()
            .map(|f| {
                if f.spec.paper_count_control {
                    f.coefficients
                        .get("ln_papers")
                        .map(coefficient_cell)
                        .unwrap_or_default()
                } else {
                    String::new()
                }
            })
            .collect();
        lines.push(row("# Paper (p)", cells));
    }

    if fits.iter().any(|f| f.spec.level0_fixed_effects) {
        let cells = fits
            .iter()
            .map(|f| {
                if f.spec.level0_fixed_effects {
                    "Y".to_string()
                } else {
                    String::new()
                }
            })
            .collect();
        lines.push(row("Level-0 fixed effect", cells));
    }

    lines.push(row(
        "Observations",
        fits.iter().map(|f| f.n.to_string()).collect(),
    ));
    lines.push(row(
        "R2",
        fits.iter().map(|f| format!("{:.3}", f.r_squared)).collect(),
    ));
    lines.push(row(
        "F",
        fits.iter().map(|f| format_f_statistic(f.f_statistic)).collect(),
    ));
    lines.push(row(
        "rmse",
        fits.iter().map(|f| format!("{:.3}", f.rmse)).collect(),
    ));

    let mut out = String::new();
    for line in lines {
        writeln!(out, "{line}").expect("write to string");
    }
    out.push('\n');
    out.push_str("Standard errors in parentheses\n");
    out.push('\n');
    out.push_str("*** p<0.01, ** p<0.05, * p<0.1\n");
    out
}
