//! Hyperparameter-grid ensembles.
//!
//! No single prior weighting is best a priori, so the solver is run once
//! per combination in a grid (the canonical grid is every integer
//! 4-tuple in `[0, 5]^4`, 1296 combinations) and the per-run scores are
//! averaged into the final unsupervised output. The per-combination
//! fairness columns are kept as a feature matrix so an external
//! classifier can learn combination weights from labels instead.
//!
//! Combinations execute in parallel; averaging happens in canonical grid
//! order with exact summation, so the output is bit-identical regardless
//! of completion order or worker count.

use std::io::Write;

use rayon::prelude::*;

use crate::behavior::BehaviorPriors;
use crate::engine::{self, ConvergenceReport, HyperParams, ScoreState};
use crate::error::{Error, Result};
use crate::graph::{LabelSet, RatingGraph};
use crate::scalar::{real, Real};
use crate::sum::ExactSum;

/// Largest grid value of the canonical ensemble, giving `6^4 = 1296`
/// combinations.
pub const DEFAULT_PARAM_MAX: u32 = 5;

/// Ordered list of hyperparameter combinations; canonical order is
/// lexicographic over `(alpha1, alpha2, beta1, beta2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid<S> {
    combos: Vec<HyperParams<S>>,
}

impl<S: Real> ParamGrid<S> {
    pub fn combos(&self) -> &[HyperParams<S>] {
        &self.combos
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    /// A grid holding exactly the given combinations, in the given order.
    pub fn from_combos(combos: Vec<HyperParams<S>>) -> Result<Self> {
        if combos.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for hp in &combos {
            hp.validate()?;
        }
        Ok(Self { combos })
    }
}

/// All integer 4-tuples in `[0, max_value]^4`, lexicographic.
pub fn build_grid<S: Real>(max_value: u32) -> ParamGrid<S> {
    let values: Vec<S> = (0..=max_value).map(|v| real(v as f64)).collect();
    let mut combos = Vec::with_capacity(values.len().pow(4));
    for &a1 in &values {
        for &a2 in &values {
            for &b1 in &values {
                for &b2 in &values {
                    combos.push(HyperParams {
                        alpha1: a1,
                        alpha2: a2,
                        beta1: b1,
                        beta2: b2,
                    });
                }
            }
        }
    }
    ParamGrid { combos }
}

/// Per-user fairness across every grid combination: one row per user,
/// one column per combination in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<S> {
    combos: Vec<HyperParams<S>>,
    /// column-major: `columns[c][u]` = fairness of user `u` under combo `c`
    columns: Vec<Vec<S>>,
}

impl<S: Real> FeatureMatrix<S> {
    pub fn user_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn combo_count(&self) -> usize {
        self.combos.len()
    }

    pub fn combos(&self) -> &[HyperParams<S>] {
        &self.combos
    }

    /// Fairness column for the `c`-th combination.
    pub fn column(&self, c: usize) -> &[S] {
        &self.columns[c]
    }

    /// Fairness of user `u` under the `c`-th combination.
    pub fn get(&self, u: usize, c: usize) -> S {
        self.columns[c][u]
    }
}

/// Runs the solver once per grid combination and averages the scores.
///
/// Returns the averaged state together with the fairness feature matrix.
/// A combination that fails to converge aborts the whole ensemble with
/// diagnostics naming it.
pub fn run_ensemble<S: Real>(
    graph: &RatingGraph<S>,
    priors: &BehaviorPriors<S>,
    grid: &ParamGrid<S>,
    epsilon: S,
) -> Result<(ScoreState<S>, FeatureMatrix<S>)> {
    run_ensemble_observed(graph, priors, grid, epsilon, |_, _| {})
}

/// Like [`run_ensemble`], with a per-combination completion callback
/// `(combo_index, report)` for progress reporting.
pub fn run_ensemble_observed<S: Real>(
    graph: &RatingGraph<S>,
    priors: &BehaviorPriors<S>,
    grid: &ParamGrid<S>,
    epsilon: S,
    on_combo: impl Fn(usize, &ConvergenceReport<S>) + Sync,
) -> Result<(ScoreState<S>, FeatureMatrix<S>)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }

    let mut fairness_acc: Vec<ExactSum<S>> = vec![ExactSum::new(); graph.user_count()];
    let mut goodness_acc: Vec<ExactSum<S>> = vec![ExactSum::new(); graph.product_count()];
    let mut reliability_acc: Vec<ExactSum<S>> = vec![ExactSum::new(); graph.edge_count()];
    let mut columns: Vec<Vec<S>> = Vec::with_capacity(grid.len());

    // Chunked fan-out keeps peak memory at one chunk of full states while
    // the canonical-order fold keeps the average deterministic.
    let chunk = rayon::current_num_threads().max(1) * 4;
    for (chunk_idx, combos) in grid.combos().chunks(chunk).enumerate() {
        let base = chunk_idx * chunk;
        let states: Vec<(usize, ScoreState<S>, ConvergenceReport<S>)> = combos
            .par_iter()
            .enumerate()
            .map(|(offset, hp)| {
                let index = base + offset;
                let (state, report) = engine::run(graph, priors, hp, epsilon, None)?;
                if !report.converged {
                    return Err(Error::EnsembleNonConvergence {
                        combo: hp.label(),
                        iterations: report.iterations,
                        last_error: report
                            .error_trace
                            .last()
                            .and_then(|e| e.to_f64())
                            .unwrap_or(f64::NAN),
                    });
                }
                Ok((index, state, report))
            })
            .collect::<Result<_>>()?;
        for (index, state, report) in states {
            on_combo(index, &report);
            for (acc, &v) in fairness_acc.iter_mut().zip(state.fairness()) {
                acc.add(v);
            }
            for (acc, &v) in goodness_acc.iter_mut().zip(state.goodness()) {
                acc.add(v);
            }
            for (acc, &v) in reliability_acc.iter_mut().zip(state.reliability()) {
                acc.add(v);
            }
            columns.push(state.fairness().to_vec());
        }
    }

    let n: S = real(grid.len() as f64);
    let averaged = ScoreState::from_parts(
        fairness_acc.iter().map(|a| a.value() / n).collect(),
        goodness_acc.iter().map(|a| a.value() / n).collect(),
        reliability_acc.iter().map(|a| a.value() / n).collect(),
    )?;
    let matrix = FeatureMatrix {
        combos: grid.combos().to_vec(),
        columns,
    };
    Ok((averaged, matrix))
}

/// Writes the feature matrix as CSV.
///
/// Header is `user_id`, then one column per combination named by its
/// `a1_a2_b1_b2` values, then `label` when labels are supplied. Users
/// appear in index order; users without a label get an empty field.
pub fn export_features<S: Real, W: Write>(
    matrix: &FeatureMatrix<S>,
    graph: &RatingGraph<S>,
    labels: Option<&LabelSet>,
    writer: W,
) -> Result<()> {
    if matrix.user_count() != graph.user_count() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "feature matrix has {} rows for a graph with {} users",
                matrix.user_count(),
                graph.user_count()
            ),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |source| Error::Csv {
        path: "<features>".into(),
        source,
    };
    let mut header = vec!["user_id".to_string()];
    header.extend(matrix.combos().iter().map(HyperParams::label));
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(wrap)?;
    for u in 0..graph.user_count() {
        let name = graph.users().name(u);
        let mut row = vec![name.to_string()];
        row.extend((0..matrix.combo_count()).map(|c| matrix.get(u, c).to_string()));
        if let Some(set) = labels {
            row.push(set.get(name).map(|l| l.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<features>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::compute_behavior_priors;
    use crate::graph::{GraphBuilder, Label};
    use approx::assert_relative_eq;

    fn toy_graph() -> RatingGraph<f64> {
        let mut b = GraphBuilder::new();
        let mut t = 0;
        for u in ["ua", "ub", "uc", "ud", "ue"] {
            for (p, s) in [("p1", 1.0), ("p2", 0.5), ("p3", -1.0)] {
                t += 100;
                b.add_rating(u, p, s, t).unwrap();
            }
        }
        for (p, s) in [("p1", -1.0), ("p2", -1.0), ("p3", 1.0)] {
            t += 100;
            b.add_rating("uf", p, s, t).unwrap();
        }
        b.finish().unwrap()
    }

    #[test]
    fn grid_sizes_and_order() {
        assert_eq!(build_grid::<f64>(5).len(), 1296);

        let single = build_grid::<f64>(0);
        assert_eq!(single.len(), 1);
        assert_eq!(single.combos()[0], HyperParams::zero());

        let g = build_grid::<f64>(1);
        assert_eq!(g.len(), 16);
        assert_eq!(g.combos()[0], HyperParams::zero());
        assert_eq!(
            g.combos()[15],
            HyperParams::new(1.0, 1.0, 1.0, 1.0).unwrap()
        );
        // lexicographic: beta2 varies fastest
        assert_eq!(g.combos()[1], HyperParams::new(0.0, 0.0, 0.0, 1.0).unwrap());
        assert_eq!(g.combos()[8], HyperParams::new(1.0, 0.0, 0.0, 0.0).unwrap());
    }

    #[test]
    fn single_combo_ensemble_equals_single_run_bitwise() {
        let g = toy_graph();
        let priors = compute_behavior_priors(&g, 32, 1.0);
        let grid = build_grid::<f64>(0);
        let (avg, matrix) = run_ensemble(&g, &priors, &grid, 1e-6).unwrap();
        let (single, _) = engine::run(&g, &priors, &HyperParams::zero(), 1e-6, None).unwrap();
        assert_eq!(avg, single);
        assert_eq!(matrix.combo_count(), 1);
        assert_eq!(matrix.column(0), single.fairness());
    }

    #[test]
    fn toy_zero_grid_matches_worked_example() {
        let g = toy_graph();
        let priors = compute_behavior_priors(&g, 32, 1.0);
        let grid = ParamGrid::from_combos(vec![HyperParams::zero()]).unwrap();
        let (avg, _) = run_ensemble(&g, &priors, &grid, 1e-6).unwrap();
        let uf = g.user_id("uf").unwrap();
        assert!((avg.fairness_of(uf) - 0.22).abs() <= 0.01);
    }

    #[test]
    fn averaged_fairness_is_mean_of_independent_runs() {
        let g = toy_graph();
        let priors = compute_behavior_priors(&g, 32, 1.0);
        let grid = build_grid::<f64>(1);
        let (avg, matrix) = run_ensemble(&g, &priors, &grid, 1e-6).unwrap();

        for u in 0..g.user_count() {
            // independently re-run every combo and average naively
            let mut sum = 0.0;
            for hp in grid.combos() {
                let (state, _) = engine::run(&g, &priors, hp, 1e-6, None).unwrap();
                sum += state.fairness()[u];
            }
            let mean = sum / grid.len() as f64;
            assert_relative_eq!(avg.fairness()[u], mean, epsilon = 1e-12);

            // and the matrix row re-averages to the same value
            let row_mean: f64 =
                (0..matrix.combo_count()).map(|c| matrix.get(u, c)).sum::<f64>() / matrix.combo_count() as f64;
            assert_relative_eq!(avg.fairness()[u], row_mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn ensemble_is_bit_deterministic_across_runs() {
        let g = toy_graph();
        let priors = compute_behavior_priors(&g, 32, 1.0);
        let grid = build_grid::<f64>(1);
        let (a, _) = run_ensemble(&g, &priors, &grid, 1e-6).unwrap();
        let (b, _) = run_ensemble(&g, &priors, &grid, 1e-6).unwrap();
        for (x, y) in a.fairness().iter().zip(b.fairness()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.reliability().iter().zip(b.reliability()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn feature_export_shapes_and_labels() {
        let g = toy_graph();
        let priors = compute_behavior_priors(&g, 32, 1.0);
        let grid = build_grid::<f64>(0);
        let (_, matrix) = run_ensemble(&g, &priors, &grid, 1e-6).unwrap();

        let mut labels = LabelSet::new();
        labels.insert("uf", Label::Unfair).unwrap();
        labels.insert("ua", Label::Fair).unwrap();

        let mut buf = Vec::new();
        export_features(&matrix, &g, Some(&labels), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("user_id,0_0_0_0,label"));
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.lines().any(|l| l.starts_with("ua,") && l.ends_with(",fair")));
        assert!(text.lines().any(|l| l.starts_with("uf,") && l.ends_with(",unfair")));
        // unlabeled users end with an empty label field
        assert!(text.lines().any(|l| l.starts_with("ub,") && l.ends_with(',')));

        // without labels: one fewer column
        let mut buf = Vec::new();
        export_features(&matrix, &g, None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("user_id,0_0_0_0"));
    }

    #[test]
    fn full_grid_export_has_one_column_per_combo() {
        let g = toy_graph();
        let priors = compute_behavior_priors(&g, 32, 1.0);
        let grid = build_grid::<f64>(DEFAULT_PARAM_MAX);
        assert_eq!(grid.len(), 1296);
        let (_, matrix) = run_ensemble(&g, &priors, &grid, 1e-6).unwrap();
        assert_eq!(matrix.combo_count(), 1296);
        let mut buf = Vec::new();
        export_features(&matrix, &g, None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 1297);
        assert!(header.ends_with(",5_5_5_5"));
    }

    #[test]
    fn sixteen_combo_export_has_seventeen_columns() {
        let g = toy_graph();
        let priors = compute_behavior_priors(&g, 32, 1.0);
        let (_, matrix) = run_ensemble(&g, &priors, &build_grid::<f64>(1), 1e-6).unwrap();
        let mut buf = Vec::new();
        export_features(&matrix, &g, None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 17);
        assert!(header.contains("1_0_1_0"));
    }
}
