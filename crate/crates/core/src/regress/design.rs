//! Design-matrix assembly with deterministic collinearity handling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::{FieldId, FieldTaxonomy};

use super::{log_with_guard, RegressError, ZeroLog};

/// One level-1 field's regression inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldObservation {
    pub field_id: FieldId,
    pub rci_government: f64,
    pub rci_news: f64,
    pub rci_patent: f64,
    pub paper_count: u64,
    /// Average funding per paper in dollars.
    pub funding_per_paper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    RciGovernment,
    RciNews,
    RciPatent,
}

impl Predictor {
    pub const ALL: [Predictor; 3] =
        [Predictor::RciGovernment, Predictor::RciNews, Predictor::RciPatent];

    pub fn label(self) -> &'static str {
        match self {
            Predictor::RciGovernment => "ln_rci_government",
            Predictor::RciNews => "ln_rci_news",
            Predictor::RciPatent => "ln_rci_patent",
        }
    }

    pub fn value(self, obs: &FieldObservation) -> f64 {
        match self {
            Predictor::RciGovernment => obs.rci_government,
            Predictor::RciNews => obs.rci_news,
            Predictor::RciPatent => obs.rci_patent,
        }
    }
}

/// Which columns a model carries. Column order is fixed: intercept,
/// predictors, paper-count control, then one indicator per level-0 field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub predictors: Vec<Predictor>,
    pub paper_count_control: bool,
    pub level0_fixed_effects: bool,
    /// Add 1 before the log only when a measure is exactly 0.
    pub zero_guard: bool,
    pub intercept: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            predictors: Predictor::ALL.to_vec(),
            paper_count_control: false,
            level0_fixed_effects: false,
            zero_guard: true,
            intercept: true,
        }
    }
}

/// Assembled design with provenance of dropped columns and skipped rows.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Labels of retained columns, aligned with `x`.
    pub labels: Vec<String>,
    /// Labels dropped as linearly dependent, in drop order.
    pub dropped: Vec<String>,
    /// Field ids of retained rows, aligned with `x`.
    pub rows: Vec<FieldId>,
    /// Fields excluded before fitting, with the reason.
    pub skipped_rows: Vec<(FieldId, String)>,
}

/// Relative tolerance below which a column counts as linearly dependent.
const COLLINEARITY_TOL: f64 = 1e-10;

/// Build the design matrix and response for one model.
///
/// Rows need a positive funding response and finite predictors; others are
/// skipped with a reason. Collinear columns are dropped greedily in column
/// order, so lower-priority columns (fixed effects last) give way first.
pub fn build_design(
    observations: &[FieldObservation],
    taxonomy: &FieldTaxonomy,
    spec: &ModelSpec,
) -> Result<Design, RegressError> {
    if spec.predictors.is_empty() {
        return Err(RegressError::NoPredictors);
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut y_vals = Vec::new();
    let mut row_data: Vec<Vec<f64>> = Vec::new();

    let level0: Vec<&FieldId> = taxonomy.level0.iter().collect();

    'obs: for obs in observations {
        if !(obs.funding_per_paper > 0.0) || !obs.funding_per_paper.is_finite() {
            skipped.push((obs.field_id.clone(), "nonpositive funding per paper".to_string()));
            continue;
        }
        for p in &spec.predictors {
            if !p.value(obs).is_finite() {
                skipped.push((obs.field_id.clone(), format!("missing {}", p.label())));
                continue 'obs;
            }
        }
        if spec.paper_count_control && obs.paper_count == 0 {
            skipped.push((obs.field_id.clone(), "no papers".to_string()));
            continue;
        }

        let mut row = Vec::new();
        if spec.intercept {
            row.push(1.0);
        }
        for p in &spec.predictors {
            let v = log_with_guard(p.value(obs), spec.zero_guard).map_err(|e| match e {
                ZeroLog::Zero => RegressError::ZeroWithGuardOff {
                    field: obs.field_id.clone(),
                    column: p.label().to_string(),
                },
                ZeroLog::Negative => RegressError::NegativeValue {
                    field: obs.field_id.clone(),
                    column: p.label().to_string(),
                },
            })?;
            row.push(v);
        }
        if spec.paper_count_control {
            row.push((obs.paper_count as f64).ln());
        }
        if spec.level0_fixed_effects {
            let parents = taxonomy.parents.get(&obs.field_id);
            for l0 in &level0 {
                let member = parents.is_some_and(|ps| ps.contains(*l0));
                row.push(if member { 1.0 } else { 0.0 });
            }
        }
        y_vals.push(obs.funding_per_paper.ln());
        row_data.push(row);
        rows.push(obs.field_id.clone());
    }

    let mut labels = Vec::new();
    if spec.intercept {
        labels.push("intercept".to_string());
    }
    for p in &spec.predictors {
        labels.push(p.label().to_string());
    }
    if spec.paper_count_control {
        labels.push("ln_papers".to_string());
    }
    if spec.level0_fixed_effects {
        for l0 in &level0 {
            labels.push(format!("fe:{l0}"));
        }
    }

    let n = row_data.len();
    let total_cols = labels.len();
    if n == 0 {
        return Err(RegressError::TooFewRows { rows: 0, cols: total_cols });
    }
    let full = DMatrix::from_fn(n, total_cols, |i, j| row_data[i][j]);

    // greedy modified Gram-Schmidt: a column is kept only if it has a
    // component independent of everything kept before it
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..total_cols {
        let col = full.column(j).clone_owned();
        let scale = col.norm().max(1.0);
        let mut v = col;
        for u in &basis {
            let proj = u.dot(&v);
            v -= u * proj;
        }
        if v.norm() <= COLLINEARITY_TOL * scale {
            dropped.push(labels[j].clone());
        } else {
            let norm = v.norm();
            basis.push(v / norm);
            kept.push(j);
        }
    }
    let retained_labels: Vec<String> = kept.iter().map(|&j| labels[j].clone()).collect();
    if n <= kept.len() {
        return Err(RegressError::TooFewRows { rows: n, cols: kept.len() });
    }
    let x = DMatrix::from_fn(n, kept.len(), |i, j| full[(i, kept[j])]);

    Ok(Design {
        x,
        y: DVector::from_vec(y_vals),
        labels: retained_labels,
        dropped,
        rows,
        skipped_rows: skipped,
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    pub fn taxonomy(level0: &[&str], parents: &[(&str, &[&str])]) -> FieldTaxonomy {
        let l0: BTreeSet<FieldId> = level0.iter().map(|s| FieldId::from(*s)).collect();
        let ps: BTreeMap<FieldId, BTreeSet<FieldId>> = parents
            .iter()
            .map(|(c, p)| {
                (FieldId::from(*c), p.iter().map(|s| FieldId::from(*s)).collect())
            })
            .collect();
        FieldTaxonomy::new(l0, ps).unwrap()
    }

    pub fn obs(field: &str, gov: f64, news: f64, patent: f64, papers: u64, funding: f64) -> FieldObservation {
        FieldObservation {
            field_id: FieldId::from(field),
            rci_government: gov,
            rci_news: news,
            rci_patent: patent,
            paper_count: papers,
            funding_per_paper: funding,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::{obs, taxonomy};
    use super::*;

    #[test]
    fn generic_position_keeps_all_columns() {
        let tax = taxonomy(&["A"], &[("f0", &["A"])]);
        let observations: Vec<FieldObservation> = (0..294)
            .map(|i| {
                let t = i as f64 * 0.01 + 0.1;
                obs(&format!("f{i}"), t, t * t + 1.0, 0.5, 10, 100.0 + i as f64)
            })
            .collect();
        let spec = ModelSpec {
            predictors: vec![Predictor::RciGovernment, Predictor::RciNews],
            paper_count_control: false,
            level0_fixed_effects: false,
            zero_guard: true,
            intercept: true,
        };
        let design = build_design(&observations, &tax, &spec).unwrap();
        assert_eq!(design.x.ncols(), 3);
        assert!(design.dropped.is_empty());
        assert_eq!(design.x.nrows(), 294);
    }

    #[test]
    fn duplicate_fixed_effect_columns_drop_the_second() {
        // two level-0 fields parenting exactly the same children
        let tax = taxonomy(
            &["A", "B"],
            &[("x", &["A", "B"]), ("y", &["A", "B"])],
        );
        let observations = vec![
            obs("x", 1.0, 2.0, 3.0, 5, 10.0),
            obs("y", 2.0, 1.0, 0.5, 7, 20.0),
            obs("x2", 0.5, 0.7, 1.5, 3, 30.0),
            obs("y2", 1.5, 1.7, 2.5, 4, 40.0),
        ];
        // x2/y2 are unknown to the taxonomy, so their indicators are all zero
        let spec = ModelSpec {
            predictors: vec![Predictor::RciGovernment],
            paper_count_control: false,
            level0_fixed_effects: true,
            zero_guard: true,
            intercept: true,
        };
        let design = build_design(&observations, &tax, &spec).unwrap();
        assert_eq!(design.dropped, vec!["fe:B".to_string()]);
        assert!(design.labels.contains(&"fe:A".to_string()));
    }

    #[test]
    fn indicator_matrix_matches_hand_built_fixture() {
        let tax = taxonomy(
            &["A", "B", "C"],
            &[
                ("x", &["A"]),
                ("y", &["A", "B"]),
                ("z", &["C"]),
                ("w", &["B"]),
                ("v", &["C"]),
                ("u", &["A"]),
            ],
        );
        let observations = vec![
            obs("x", 1.0, 1.0, 2.0, 2, 10.0),
            obs("y", 1.0, 1.0, 3.0, 3, 20.0),
            obs("z", 2.0, 0.5, 5.0, 5, 30.0),
            obs("w", 1.0, 1.0, 7.0, 7, 40.0),
            obs("v", 1.0, 1.0, 1.5, 11, 50.0),
            obs("u", 2.0, 0.5, 4.0, 13, 60.0),
        ];
        let spec = ModelSpec {
            predictors: vec![Predictor::RciPatent],
            paper_count_control: true,
            level0_fixed_effects: true,
            zero_guard: true,
            intercept: false,
        };
        let design = build_design(&observations, &tax, &spec).unwrap();
        // columns: ln_rci_patent, ln_papers, fe:A, fe:B, fe:C
        let fe_a = design.labels.iter().position(|l| l == "fe:A").unwrap();
        let fe_b = design.labels.iter().position(|l| l == "fe:B").unwrap();
        let fe_c = design.labels.iter().position(|l| l == "fe:C").unwrap();
        let want = [
            [1.0, 0.0, 0.0], // x -> A
            [1.0, 1.0, 0.0], // y -> A and B
            [0.0, 0.0, 1.0], // z -> C
            [0.0, 1.0, 0.0], // w -> B
            [0.0, 0.0, 1.0], // v -> C
            [1.0, 0.0, 0.0], // u -> A
        ];
        for (i, row) in want.iter().enumerate() {
            assert_eq!(design.x[(i, fe_a)], row[0]);
            assert_eq!(design.x[(i, fe_b)], row[1]);
            assert_eq!(design.x[(i, fe_c)], row[2]);
        }
        // the multi-parent row carries two ones
        let row_sum: f64 = design.x[(1, fe_a)] + design.x[(1, fe_b)] + design.x[(1, fe_c)];
        assert_eq!(row_sum, 2.0);
    }

    #[test]
    fn nonpositive_funding_rows_are_skipped_with_reason() {
        let tax = taxonomy(&["A"], &[("x", &["A"])]);
        let observations = vec![
            obs("x", 1.0, 1.0, 1.0, 2, 10.0),
            obs("dead", 1.0, 1.0, 1.0, 2, 0.0),
            obs("x2", 1.0, 1.0, 1.0, 2, 5.0),
            obs("x3", 2.0, 1.0, 1.0, 2, 7.0),
        ];
        let design = build_design(&observations, &tax, &ModelSpec::default()).unwrap();
        assert_eq!(design.x.nrows(), 3);
        assert_eq!(design.skipped_rows.len(), 1);
        assert_eq!(design.skipped_rows[0].0.as_str(), "dead");
    }

    #[test]
    fn missing_predictor_skips_the_row() {
        let tax = taxonomy(&["A"], &[("x", &["A"])]);
        let observations = vec![
            obs("x", 1.0, 1.0, 1.0, 2, 10.0),
            obs("hole", f64::NAN, 1.0, 1.0, 2, 10.0),
            obs("x2", 0.5, 1.0, 1.0, 2, 20.0),
            obs("x3", 0.7, 1.0, 1.0, 2, 30.0),
        ];
        let design = build_design(&observations, &tax, &ModelSpec {
            predictors: vec![Predictor::RciGovernment],
            ..ModelSpec::default()
        })
        .unwrap();
        assert_eq!(design.x.nrows(), 3);
        assert!(design.skipped_rows[0].1.contains("ln_rci_government"));
    }

    #[test]
    fn zero_rci_without_guard_is_an_error() {
        let tax = taxonomy(&["A"], &[("x", &["A"])]);
        let observations = vec![
            obs("x", 0.0, 1.0, 1.0, 2, 10.0),
            obs("y", 1.0, 1.0, 1.0, 2, 20.0),
            obs("z", 2.0, 1.0, 1.0, 2, 30.0),
        ];
        let mut spec = ModelSpec {
            predictors: vec![Predictor::RciGovernment],
            ..ModelSpec::default()
        };
        spec.zero_guard = false;
        assert!(matches!(
            build_design(&observations, &tax, &spec),
            Err(RegressError::ZeroWithGuardOff { .. })
        ));
        spec.zero_guard = true;
        let design = build_design(&observations, &tax, &spec).unwrap();
        // guarded zero logs to 0
        assert_eq!(design.x[(0, 1)], 0.0);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let tax = taxonomy(&["A"], &[("x", &["A"])]);
        let observations = vec![obs("x", 1.5, 1.0, 1.0, 2, 10.0)];
        assert!(matches!(
            build_design(&observations, &tax, &ModelSpec::default()),
            Err(RegressError::TooFewRows { .. })
        ));
    }

    #[test]
    fn no_predictors_is_rejected() {
        let tax = taxonomy(&["A"], &[("x", &["A"])]);
        let spec = ModelSpec {
            predictors: vec![],
            ..ModelSpec::default()
        };
        assert!(matches!(
            build_design(&[], &tax, &spec),
            Err(RegressError::NoPredictors)
        ));
    }
}
