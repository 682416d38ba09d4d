//! The fixed-point solver for fairness, goodness, and reliability.
//!
//! Scores start at 1 and are refined by a three-phase sweep until the
//! largest per-entry change drops to the tolerance:
//!
//! 1. goodness of every product, from the *previous* iteration's
//!    reliabilities:
//!    `G(p) = (b2 n_P(p) + sum R_prev(u,p) score(u,p)) / (b1 + b2 + |In(p)|)`
//! 2. reliability of every rating, from the previous fairness and the
//!    *current* goodness:
//!    `R(u,p) = (F_prev(u) + (1 - |score(u,p) - G(p)| / 2)) / 2`
//! 3. fairness of every user, from the current reliabilities:
//!    `F(u) = (0.5 a1 + a2 n_U(u) + sum R(u,p)) / (a1 + a2 + |Out(u)|)`
//!
//! The staleness pattern is deliberate and load-bearing: G reads last
//! iteration's R, R reads last iteration's F together with this
//! iteration's G, and F reads this iteration's R. The sweep contracts
//! with ratio 3/4, so the iteration count is bounded by
//! [`max_iterations_bound`] independent of the graph.
//!
//! `a1`/`b1` weight a global cold-start prior (fairness 0.5, goodness 0),
//! `a2`/`b2` weight the per-entity behavioral priors. All four at zero
//! recover the pure network equations; denominators stay positive because
//! graphs reject zero-degree entities.
//!
//! Per-entity sums use order-independent exact summation, so scores are
//! bit-identical across runs and across reorderings or relabelings of
//! the input file.

use std::io::Write;

use crate::behavior::BehaviorPriors;
use crate::error::{Error, Result};
use crate::graph::{ProductId, RatingGraph, UserId};
use crate::scalar::{half, real, two, Real};
use crate::sum::exact_sum;

/// Default convergence tolerance.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Prior-strength constants. The canonical grid uses integers 0..=5, but
/// nothing in the update formulas requires integrality, so any
/// non-negative reals are accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams<S> {
    pub alpha1: S,
    pub alpha2: S,
    pub beta1: S,
    pub beta2: S,
}

impl<S: Real> HyperParams<S> {
    pub fn new(alpha1: S, alpha2: S, beta1: S, beta2: S) -> Result<Self> {
        let hp = Self {
            alpha1,
            alpha2,
            beta1,
            beta2,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// All-zero parameters: the prior-free special case.
    pub fn zero() -> Self {
        Self {
            alpha1: S::zero(),
            alpha2: S::zero(),
            beta1: S::zero(),
            beta2: S::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = S::zero();
        if self.alpha1 >= zero && self.alpha2 >= zero && self.beta1 >= zero && self.beta2 >= zero {
            Ok(())
        } else {
            Err(Error::NegativeHyperParam { label: self.label() })
        }
    }

    /// Compact `a1_a2_b1_b2` form used in feature headers and diagnostics.
    pub fn label(&self) -> String {
        format!("{}_{}_{}_{}", self.alpha1, self.alpha2, self.beta1, self.beta2)
    }
}

/// Dense score arrays: fairness per user in `[0, 1]`, goodness per
/// product in `[-1, 1]`, reliability per edge in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState<S> {
    pub(crate) fairness: Vec<S>,
    pub(crate) goodness: Vec<S>,
    pub(crate) reliability: Vec<S>,
}

impl<S: Real> ScoreState<S> {
    /// Builds a state from raw arrays, validating the score ranges.
    pub fn from_parts(fairness: Vec<S>, goodness: Vec<S>, reliability: Vec<S>) -> Result<Self> {
        let zero = S::zero();
        let one = S::one();
        let in_range = |v: &S, lo: S| *v >= lo && *v <= one;
        if !fairness.iter().all(|v| in_range(v, zero))
            || !goodness.iter().all(|v| in_range(v, -one))
            || !reliability.iter().all(|v| in_range(v, zero))
        {
            return Err(Error::ShapeMismatch {
                what: "score outside its admissible range".into(),
            });
        }
        Ok(Self {
            fairness,
            goodness,
            reliability,
        })
    }

    pub fn fairness(&self) -> &[S] {
        &self.fairness
    }

    pub fn goodness(&self) -> &[S] {
        &self.goodness
    }

    pub fn reliability(&self) -> &[S] {
        &self.reliability
    }

    pub fn fairness_of(&self, u: UserId) -> S {
        self.fairness[u.0]
    }

    pub fn goodness_of(&self, p: ProductId) -> S {
        self.goodness[p.0]
    }
}

/// What the solver did: how many sweeps ran, the error after each, and
/// whether the loop exited through the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<S> {
    pub iterations: usize,
    pub error_trace: Vec<S>,
    pub converged: bool,
    pub epsilon: S,
}

/// All scores start at the most trusting value, 1.
pub fn init_state<S: Real>(graph: &RatingGraph<S>) -> ScoreState<S> {
    let one = S::one();
    ScoreState {
        fairness: vec![one; graph.user_count()],
        goodness: vec![one; graph.product_count()],
        reliability: vec![one; graph.edge_count()],
    }
}

/// Goodness phase: reads only the previous iteration's reliabilities.
pub fn update_goodness<S: Real>(
    graph: &RatingGraph<S>,
    priors: &BehaviorPriors<S>,
    hp: &HyperParams<S>,
    reliability_prev: &[S],
) -> Vec<S> {
    let one = S::one();
    (0..graph.product_count())
        .map(|p| {
            let p = ProductId(p);
            let edges = graph.in_edges(p);
            let sum = exact_sum(edges.iter().map(|&e| {
                let edge = &graph.edges()[e];
                reliability_prev[e] * edge.score
            }));
            let num = hp.beta2 * priors.product(p) + sum;
            let den = hp.beta1 + hp.beta2 + real::<S>(edges.len() as f64);
            // mathematically in [-1, 1]; clamp the possible last-ulp spill
            (num / den).max(-one).min(one)
        })
        .collect()
}

/// Reliability phase: previous fairness, current goodness.
pub fn update_reliability<S: Real>(
    graph: &RatingGraph<S>,
    fairness_prev: &[S],
    goodness_curr: &[S],
) -> Vec<S> {
    let zero = S::zero();
    let one = S::one();
    let h = half::<S>();
    let t = two::<S>();
    graph
        .edges()
        .iter()
        .map(|edge| {
            let dev = (edge.score - goodness_curr[edge.product.0]).abs() / t;
            let r = h * (fairness_prev[edge.user.0] + (one - dev));
            r.max(zero).min(one)
        })
        .collect()
}

/// Fairness phase: reads the reliabilities just computed this iteration.
pub fn update_fairness<S: Real>(
    graph: &RatingGraph<S>,
    priors: &BehaviorPriors<S>,
    hp: &HyperParams<S>,
    reliability_curr: &[S],
) -> Vec<S> {
    let zero = S::zero();
    let one = S::one();
    let h = half::<S>();
    (0..graph.user_count())
        .map(|u| {
            let u = UserId(u);
            let edges = graph.out_edges(u);
            let sum = exact_sum(edges.iter().map(|&e| reliability_curr[e]));
            let num = h * hp.alpha1 + hp.alpha2 * priors.user(u) + sum;
            let den = hp.alpha1 + hp.alpha2 + real::<S>(edges.len() as f64);
            (num / den).max(zero).min(one)
        })
        .collect()
}

fn max_abs_diff<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(S::zero(), S::max)
}

/// Largest absolute per-entry change across the three score arrays.
pub fn compute_error<S: Real>(prev: &ScoreState<S>, curr: &ScoreState<S>) -> Result<S> {
    if prev.fairness.len() != curr.fairness.len()
        || prev.goodness.len() != curr.goodness.len()
        || prev.reliability.len() != curr.reliability.len()
    {
        return Err(Error::ShapeMismatch {
            what: format!(
                "prev ({}, {}, {}) vs curr ({}, {}, {})",
                prev.fairness.len(),
                prev.goodness.len(),
                prev.reliability.len(),
                curr.fairness.len(),
                curr.goodness.len(),
                curr.reliability.len()
            ),
        });
    }
    let f = max_abs_diff(&prev.fairness, &curr.fairness);
    let r = max_abs_diff(&prev.reliability, &curr.reliability);
    let g = max_abs_diff(&prev.goodness, &curr.goodness);
    Ok(f.max(r).max(g))
}

/// Upper bound on the iterations needed to reach tolerance `epsilon`:
/// `2 + ceil(log(epsilon / 2) / log(3 / 4))`, valid for `0 < epsilon < 2`.
pub fn max_iterations_bound<S: Real>(epsilon: S) -> Result<usize> {
    let eps = epsilon.to_f64().unwrap_or(f64::NAN);
    if !(eps > 0.0 && eps < 2.0) {
        return Err(Error::InvalidEpsilon {
            value: eps,
            low: 0.0,
            high: 2.0,
        });
    }
    let ratio = (eps / 2.0).ln() / (0.75f64).ln();
    // Snap values that are integers up to float noise, so tolerances of
    // the exact form 2 * (3/4)^k give 2 + k and not 2 + k + 1.
    let nearest = ratio.round();
    let ceiled = if (ratio - nearest).abs() < 1e-9 {
        nearest
    } else {
        ratio.ceil()
    };
    Ok(2 + ceiled.max(0.0) as usize)
}

fn auto_max_iter(epsilon: f64) -> usize {
    if epsilon < 2.0 {
        max_iterations_bound(epsilon).expect("epsilon validated positive")
    } else {
        // one sweep moves every score by at most 2, so anything looser
        // than the score ranges converges immediately
        2
    }
}

#[cfg(debug_assertions)]
fn debug_assert_ranges<S: Real>(values: &[S], lo: S, hi: S, what: &str) {
    for v in values {
        debug_assert!(*v >= lo && *v <= hi, "{what} out of range: {v}");
    }
}

#[cfg(not(debug_assertions))]
fn debug_assert_ranges<S: Real>(_: &[S], _: S, _: S, _: &str) {}

/// Runs the solver to convergence, invoking `observer` with the
/// iteration number, error, and state after every full sweep.
///
/// `max_iter` defaults to [`max_iterations_bound`] for the given
/// tolerance; exceeding it is reported as `converged = false` rather
/// than an error, since the contraction guarantee makes that outcome a
/// solver bug, not a data condition.
pub fn run_observed<S: Real>(
    graph: &RatingGraph<S>,
    priors: &BehaviorPriors<S>,
    hp: &HyperParams<S>,
    epsilon: S,
    max_iter: Option<usize>,
    mut observer: impl FnMut(usize, S, &ScoreState<S>),
) -> Result<(ScoreState<S>, ConvergenceReport<S>)> {
    let eps_f64 = epsilon.to_f64().unwrap_or(f64::NAN);
    if eps_f64.is_nan() || eps_f64 <= 0.0 {
        return Err(Error::InvalidEpsilon {
            value: eps_f64,
            low: 0.0,
            high: f64::INFINITY,
        });
    }
    hp.validate()?;
    if priors.users().len() != graph.user_count() || priors.products().len() != graph.product_count() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "priors sized ({}, {}) for a graph with ({}, {}) entities",
                priors.users().len(),
                priors.products().len(),
                graph.user_count(),
                graph.product_count()
            ),
        });
    }
    let max_iter = max_iter.unwrap_or_else(|| auto_max_iter(eps_f64)).max(1);

    let zero = S::zero();
    let one = S::one();
    let mut prev = init_state(graph);
    let mut error_trace = Vec::new();
    let mut converged = false;
    let mut t = 0;
    loop {
        t += 1;
        let goodness = update_goodness(graph, priors, hp, &prev.reliability);
        debug_assert_ranges(&goodness, -one, one, "goodness");
        let reliability = update_reliability(graph, &prev.fairness, &goodness);
        debug_assert_ranges(&reliability, zero, one, "reliability");
        let fairness = update_fairness(graph, priors, hp, &reliability);
        debug_assert_ranges(&fairness, zero, one, "fairness");
        let curr = ScoreState {
            fairness,
            goodness,
            reliability,
        };
        let error = compute_error(&prev, &curr).expect("loop states share shapes");
        observer(t, error, &curr);
        error_trace.push(error);
        prev = curr;
        if error <= epsilon {
            converged = true;
            break;
        }
        if t >= max_iter {
            break;
        }
    }
    let report = ConvergenceReport {
        iterations: t,
        error_trace,
        converged,
        epsilon,
    };
    Ok((prev, report))
}

/// Runs the solver to convergence. See [`run_observed`].
pub fn run<S: Real>(
    graph: &RatingGraph<S>,
    priors: &BehaviorPriors<S>,
    hp: &HyperParams<S>,
    epsilon: S,
    max_iter: Option<usize>,
) -> Result<(ScoreState<S>, ConvergenceReport<S>)> {
    run_observed(graph, priors, hp, epsilon, max_iter, |_, _, _| {})
}

/// Like [`run`], but also returns the state after every iteration.
#[allow(clippy::type_complexity)]
pub fn run_traced<S: Real>(
    graph: &RatingGraph<S>,
    priors: &BehaviorPriors<S>,
    hp: &HyperParams<S>,
    epsilon: S,
    max_iter: Option<usize>,
) -> Result<(ScoreState<S>, ConvergenceReport<S>, Vec<ScoreState<S>>)> {
    let mut trace = Vec::new();
    let (state, report) = run_observed(graph, priors, hp, epsilon, max_iter, |_, _, s| {
        trace.push(s.clone())
    })?;
    Ok((state, report, trace))
}

/// Writes the entity score CSV: `entity_id,side,score`, users (fairness)
/// first and products (goodness) second, both in index order.
pub fn write_scores<S: Real, W: Write>(graph: &RatingGraph<S>, state: &ScoreState<S>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |source| Error::Csv {
        path: "<scores>".into(),
        source,
    };
    w.write_record(["entity_id", "side", "score"]).map_err(wrap)?;
    for (i, v) in state.fairness.iter().enumerate() {
        w.write_record([graph.users().name(i), "user", &v.to_string()])
            .map_err(wrap)?;
    }
    for (i, v) in state.goodness.iter().enumerate() {
        w.write_record([graph.products().name(i), "product", &v.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<scores>".into(),
        source,
    })?;
    Ok(())
}

/// Writes the edge score CSV: `user_id,product_id,reliability` in edge
/// order.
pub fn write_reliabilities<S: Real, W: Write>(
    graph: &RatingGraph<S>,
    state: &ScoreState<S>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |source| Error::Csv {
        path: "<reliability>".into(),
        source,
    };
    w.write_record(["user_id", "product_id", "reliability"]).map_err(wrap)?;
    for (edge, r) in graph.edges().iter().zip(&state.reliability) {
        w.write_record([
            graph.user_name(edge.user),
            graph.product_name(edge.product),
            &r.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<reliability>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use approx::assert_relative_eq;

    /// The six-user, three-product network of the worked example: five
    /// users agree on every product, the sixth always dissents.
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

    fn neutral(graph: &RatingGraph<f64>) -> BehaviorPriors<f64> {
        BehaviorPriors::neutral(graph)
    }

    #[test]
    fn init_is_all_ones_with_matching_shapes() {
        let g = toy_graph();
        let s = init_state(&g);
        assert_eq!(s.fairness(), vec![1.0; 6].as_slice());
        assert_eq!(s.goodness(), vec![1.0; 3].as_slice());
        assert_eq!(s.reliability(), vec![1.0; 18].as_slice());
    }

    #[test]
    fn goodness_first_iteration_of_toy() {
        let g = toy_graph();
        let s = init_state(&g);
        let goodness = update_goodness(&g, &neutral(&g), &HyperParams::zero(), s.reliability());
        assert_relative_eq!(goodness[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(goodness[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(goodness[2], -2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn goodness_single_positive_rating_is_one() {
        let mut b = GraphBuilder::new();
        b.add_rating("u", "p", 1.0, 0).unwrap();
        let g: RatingGraph<f64> = b.finish().unwrap();
        let s = init_state(&g);
        let goodness = update_goodness(&g, &neutral(&g), &HyperParams::zero(), s.reliability());
        assert_eq!(goodness[0], 1.0);
    }

    #[test]
    fn goodness_with_priors_direct_substitution() {
        // ratings {+1, -1} with unit reliability, b1 = 1, b2 = 2,
        // product normality 0.5: (2 * 0.5 + 0) / (1 + 2 + 2) = 0.2
        let mut b = GraphBuilder::new();
        b.add_rating("u1", "p", 1.0, 0).unwrap();
        b.add_rating("u2", "p", -1.0, 1).unwrap();
        let g: RatingGraph<f64> = b.finish().unwrap();
        let priors = BehaviorPriors::from_parts(vec![1.0, 1.0], vec![0.5], &g).unwrap();
        let hp = HyperParams::new(0.0, 0.0, 1.0, 2.0).unwrap();
        let goodness = update_goodness(&g, &priors, &hp, init_state(&g).reliability());
        assert_relative_eq!(goodness[0], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn reliability_perfect_agreement_is_one() {
        let mut b = GraphBuilder::new();
        b.add_rating("u", "p", 1.0, 0).unwrap();
        let g: RatingGraph<f64> = b.finish().unwrap();
        let r = update_reliability(&g, &[1.0], &[1.0]);
        assert_eq!(r[0], 1.0);
    }

    #[test]
    fn reliability_dissenter_against_rounded_goodness() {
        // F_prev = 1, score = -1, G = 0.67: 0.5 * (1 + (1 - 1.67 / 2))
        let mut b = GraphBuilder::new();
        b.add_rating("u", "p", -1.0, 0).unwrap();
        let g: RatingGraph<f64> = b.finish().unwrap();
        let r = update_reliability(&g, &[1.0], &[0.67]);
        assert_relative_eq!(r[0], 0.5825, epsilon = 1e-12);
    }

    #[test]
    fn reliability_floor_is_zero() {
        let mut b = GraphBuilder::new();
        b.add_rating("u", "p", 1.0, 0).unwrap();
        let g: RatingGraph<f64> = b.finish().unwrap();
        let r = update_reliability(&g, &[0.0], &[-1.0]);
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn fairness_all_reliable_is_one_and_prior_pulls_sparse_users() {
        let mut b = GraphBuilder::new();
        b.add_rating("u", "p", 1.0, 0).unwrap();
        let g: RatingGraph<f64> = b.finish().unwrap();
        let f = update_fairness(&g, &neutral(&g), &HyperParams::zero(), &[1.0]);
        assert_eq!(f[0], 1.0);

        // a1 = 5 dominates a single unit-reliability rating
        let hp = HyperParams::new(5.0, 0.0, 0.0, 0.0).unwrap();
        let f = update_fairness(&g, &neutral(&g), &hp, &[1.0]);
        assert_relative_eq!(f[0], 3.5 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn fairness_first_iteration_of_toy() {
        let g = toy_graph();
        let priors = neutral(&g);
        let hp = HyperParams::zero();
        let s = init_state(&g);
        let goodness = update_goodness(&g, &priors, &hp, s.reliability());
        let reliability = update_reliability(&g, s.fairness(), &goodness);
        let fairness = update_fairness(&g, &priors, &hp, &reliability);
        assert_relative_eq!(fairness[0], 133.0 / 144.0, epsilon = 1e-14);
        assert_relative_eq!(fairness[5], 89.0 / 144.0, epsilon = 1e-14);
    }

    #[test]
    fn error_of_identical_states_is_zero_and_single_change_is_detected() {
        let g = toy_graph();
        let s = init_state(&g);
        assert_eq!(compute_error(&s, &s).unwrap(), 0.0);

        let mut changed = s.clone();
        changed.goodness[1] = 0.7;
        assert_relative_eq!(compute_error(&s, &changed).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn error_rejects_shape_mismatch() {
        let g = toy_graph();
        let s = init_state(&g);
        let mut other = s.clone();
        other.fairness.pop();
        assert!(matches!(
            compute_error(&s, &other),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn toy_error_between_first_iterations_matches_hand_computation() {
        let g = toy_graph();
        let (_, report, _) =
            run_traced(&g, &neutral(&g), &HyperParams::zero(), 1e-6, None).unwrap();
        // after t=1 every G dropped from 1, the largest fall being 5/3
        assert_relative_eq!(report.error_trace[0], 5.0 / 3.0, epsilon = 1e-12);
        // t=1 -> t=2: the dissenter's edge to p2 moves most, 455/2304
        assert_relative_eq!(report.error_trace[1], 455.0 / 2304.0, epsilon = 1e-12);
    }

    #[test]
    fn run_toy_reproduces_trace_and_converges() {
        let g = toy_graph();
        let (state, report, trace) =
            run_traced(&g, &neutral(&g), &HyperParams::zero(), 1e-6, None).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= max_iterations_bound(1e-6).unwrap());
        assert_eq!(report.error_trace.len(), report.iterations);
        assert!(*report.error_trace.last().unwrap() <= 1e-6);

        // iteration 1
        assert_relative_eq!(trace[0].fairness[5], 89.0 / 144.0, epsilon = 1e-12);
        assert_relative_eq!(trace[0].goodness[1], 0.25, epsilon = 1e-12);
        // iteration 2
        assert_relative_eq!(trace[1].fairness[5], 979.0 / 2304.0, epsilon = 1e-12);
        assert_relative_eq!(trace[1].goodness[1], 53.0 / 192.0, epsilon = 1e-12);
        // converged values
        assert_relative_eq!(state.fairness[0], 0.8628850689265336, epsilon = 1e-9);
        assert_relative_eq!(state.fairness[5], 0.22044826483365595, epsilon = 1e-9);
        assert_relative_eq!(state.goodness[0], 0.6771074974335467, epsilon = 1e-9);
        assert_relative_eq!(state.goodness[1], 0.32309848749816905, epsilon = 1e-9);
        assert_relative_eq!(state.goodness[2], -0.6771074974335467, epsilon = 1e-9);

        // the five agreeing users stay bit-identical at every iteration
        for s in &trace {
            for u in 1..5 {
                assert_eq!(s.fairness[0].to_bits(), s.fairness[u].to_bits());
            }
        }
    }

    #[test]
    fn run_toy_with_loose_tolerance_stops_after_nine_iterations() {
        // between the errors after sweeps 9 (0.00217) and 8 (0.00392), so
        // the loop exits after exactly nine
        let g = toy_graph();
        let (state, report) = run(&g, &neutral(&g), &HyperParams::zero(), 0.003, None).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 9);
        assert!((state.fairness[0] - 0.86).abs() <= 0.01);
        assert!((state.fairness[5] - 0.22).abs() <= 0.01);
        assert!((state.goodness[0] - 0.68).abs() <= 0.01);
        assert!((state.goodness[1] - 0.32).abs() <= 0.01);
        assert!((state.goodness[2] + 0.68).abs() <= 0.01);
    }

    #[test]
    fn run_single_positive_edge_is_fixed_point_immediately() {
        let mut b = GraphBuilder::new();
        b.add_rating("u", "p", 1.0, 0).unwrap();
        let g: RatingGraph<f64> = b.finish().unwrap();
        let (state, report) = run(&g, &neutral(&g), &HyperParams::zero(), 1e-6, None).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        assert_eq!(report.error_trace, vec![0.0]);
        assert_eq!(state.fairness(), &[1.0]);
        assert_eq!(state.goodness(), &[1.0]);
        assert_eq!(state.reliability(), &[1.0]);
    }

    #[test]
    fn run_is_bit_deterministic() {
        let g = toy_graph();
        let hp = HyperParams::new(1.0, 2.0, 3.0, 1.0).unwrap();
        let priors = crate::behavior::compute_behavior_priors(&g, 32, 1.0);
        let (a, _) = run(&g, &priors, &hp, 1e-6, None).unwrap();
        let (b, _) = run(&g, &priors, &hp, 1e-6, None).unwrap();
        for (x, y) in a.fairness.iter().zip(&b.fairness) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.reliability.iter().zip(&b.reliability) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn run_rejects_bad_epsilon_and_negative_params() {
        let g = toy_graph();
        assert!(matches!(
            run(&g, &neutral(&g), &HyperParams::zero(), 0.0, None),
            Err(Error::InvalidEpsilon { .. })
        ));
        let bad = HyperParams {
            alpha1: -1.0,
            alpha2: 0.0,
            beta1: 0.0,
            beta2: 0.0,
        };
        assert!(matches!(
            run(&g, &neutral(&g), &bad, 1e-6, None),
            Err(Error::NegativeHyperParam { .. })
        ));
    }

    #[test]
    fn run_flags_exhausted_iteration_budget() {
        let g = toy_graph();
        let (_, report) = run(&g, &neutral(&g), &HyperParams::zero(), 1e-6, Some(2)).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
    }

    #[test]
    fn iteration_bound_examples() {
        assert_eq!(max_iterations_bound(1e-6).unwrap(), 53);
        assert_eq!(max_iterations_bound(1.5).unwrap(), 3);
        for k in 0..=33 {
            let eps = 2.0 * 0.75f64.powi(k);
            if eps < 2.0 {
                assert_eq!(
                    max_iterations_bound(eps).unwrap(),
                    2 + k as usize,
                    "k = {k}"
                );
            }
        }
        assert!(matches!(
            max_iterations_bound(0.0),
            Err(Error::InvalidEpsilon { .. })
        ));
        assert!(matches!(
            max_iterations_bound(2.0),
            Err(Error::InvalidEpsilon { .. })
        ));
    }

    #[test]
    fn score_csv_writers_emit_expected_shapes() {
        let g = toy_graph();
        let (state, _) = run(&g, &neutral(&g), &HyperParams::zero(), 1e-6, None).unwrap();

        let mut buf = Vec::new();
        write_scores(&g, &state, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("entity_id,side,score"));
        assert_eq!(text.lines().count(), 1 + 6 + 3);
        assert!(text.lines().any(|l| l.starts_with("uf,user,")));
        assert!(text.lines().any(|l| l.starts_with("p3,product,-")));

        let mut buf = Vec::new();
        write_reliabilities(&g, &state, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("user_id,product_id,reliability"));
        assert_eq!(text.lines().count(), 1 + 18);
    }
}
