//! Behavioral normality priors from inter-rating time distributions.
//!
//! Fraud campaigns tend to rate in rapid bursts or at scripted, regular
//! intervals, while organic raters spread out over hours to weeks. Each
//! entity's gaps between consecutive ratings are binned into a
//! log2-spaced histogram and compared against the population-wide
//! histogram of its side; the normality score is `exp(-KL(p_hat || q))`
//! where `p_hat` is the entity's smoothed gap distribution and `q` the
//! global one. A score of 1 means indistinguishable from the population,
//! scores near 0 mean strongly deviant.
//!
//! Scores computed by an external behavioral model can be substituted via
//! [`load_priors`]; anything absent from the file defaults to 1.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{ProductId, RatingGraph, Side, UserId};
use crate::scalar::{real, Real};

/// Default number of log2 bins; covers one second to roughly 136 years.
pub const DEFAULT_BIN_COUNT: usize = 32;

/// Default Dirichlet-style smoothing strength.
pub const DEFAULT_SMOOTHING: f64 = 1.0;

/// Histogram of inter-rating time gaps on log2-spaced bins.
///
/// A gap of `dt` seconds lands in bin `min(floor(log2(dt + 1)), bins - 1)`,
/// a total function of any `dt >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrtHistogram {
    counts: Vec<u64>,
}

impl IrtHistogram {
    pub fn new(bin_count: usize) -> Self {
        assert!(bin_count >= 1, "bin_count must be >= 1");
        Self {
            counts: vec![0; bin_count],
        }
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of gaps recorded.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin index for a gap of `dt` seconds.
    pub fn bin_for(bin_count: usize, dt: u64) -> usize {
        let bin = dt.saturating_add(1).ilog2() as usize;
        bin.min(bin_count - 1)
    }

    pub fn record(&mut self, dt: u64) {
        let bin = Self::bin_for(self.bin_count(), dt);
        self.counts[bin] += 1;
    }

    /// Adds another histogram's counts bin by bin.
    pub fn merge(&mut self, other: &IrtHistogram) {
        assert_eq!(self.bin_count(), other.bin_count());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Gaps between consecutive ratings: sorts the timestamps ascending and
/// returns the `max(0, n - 1)` consecutive differences.
pub fn compute_irt(timestamps: &[u64]) -> Vec<u64> {
    let mut ts = timestamps.to_vec();
    ts.sort_unstable();
    ts.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Builds a gap histogram with the given bin count.
pub fn build_histogram(gaps: &[u64], bin_count: usize) -> IrtHistogram {
    let mut h = IrtHistogram::new(bin_count);
    for &g in gaps {
        h.record(g);
    }
    h
}

/// Floor applied to the normalized global distribution before smoothing,
/// so empty bins cannot blow up the divergence.
const GLOBAL_FLOOR: f64 = 1e-12;

/// Behavioral normality of one entity against the global population.
///
/// With `q` the floored-and-renormalized global distribution and
/// `p_hat = (counts + s * q) / (total + s)` the smoothed entity
/// distribution, returns `exp(-KL(p_hat || q))` (natural log). Always in
/// `(0, 1]`: an empty entity histogram collapses onto `q` and scores 1.
pub fn normality_score<S: Real>(entity: &IrtHistogram, global: &IrtHistogram, smoothing: S) -> Result<S> {
    if entity.bin_count() != global.bin_count() {
        return Err(Error::BinCountMismatch {
            entity: entity.bin_count(),
            global: global.bin_count(),
        });
    }
    if global.total() == 0 {
        return Err(Error::EmptyGlobalHistogram);
    }
    if smoothing.is_nan() || smoothing <= S::zero() {
        return Err(Error::InvalidSmoothing {
            value: smoothing.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(normality_unchecked(entity, global, smoothing))
}

fn normality_unchecked<S: Real>(entity: &IrtHistogram, global: &IrtHistogram, smoothing: S) -> S {
    let zero = S::zero();
    let one = S::one();
    let floor: S = real(GLOBAL_FLOOR);

    let global_total: S = real(global.total() as f64);
    let mut q: Vec<S> = global
        .counts()
        .iter()
        .map(|&c| (real::<S>(c as f64) / global_total).max(floor))
        .collect();
    let q_sum = q.iter().fold(zero, |a, &b| a + b);
    for qi in &mut q {
        *qi = *qi / q_sum;
    }

    let entity_total: S = real(entity.total() as f64);
    let denom = entity_total + smoothing;
    let mut kl = zero;
    for (&c, &qi) in entity.counts().iter().zip(&q) {
        let p = (real::<S>(c as f64) + smoothing * qi) / denom;
        if p > zero {
            kl = kl + p * (p / qi).ln();
        }
    }
    // KL is non-negative; rounding can leave a tiny negative residue.
    (-kl.max(zero)).exp().min(one)
}

/// Per-entity behavioral normality scores, one per user and product.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPriors<S> {
    user_normality: Vec<S>,
    product_normality: Vec<S>,
}

impl<S: Real> BehaviorPriors<S> {
    /// All-ones priors: no behavioral evidence against anyone.
    pub fn neutral(graph: &RatingGraph<S>) -> Self {
        Self {
            user_normality: vec![S::one(); graph.user_count()],
            product_normality: vec![S::one(); graph.product_count()],
        }
    }

    /// Builds priors from raw arrays, validating sizes and the `[0, 1]`
    /// range.
    pub fn from_parts(users: Vec<S>, products: Vec<S>, graph: &RatingGraph<S>) -> Result<Self> {
        if users.len() != graph.user_count() || products.len() != graph.product_count() {
            return Err(Error::ShapeMismatch {
                what: format!(
                    "priors sized ({}, {}) for a graph with ({}, {}) entities",
                    users.len(),
                    products.len(),
                    graph.user_count(),
                    graph.product_count()
                ),
            });
        }
        let zero = S::zero();
        let one = S::one();
        for (side, values) in [("user", &users), ("product", &products)] {
            if let Some(v) = values.iter().find(|v| !(**v >= zero && **v <= one)) {
                return Err(Error::NormalityOutOfRange {
                    id: side.to_owned(),
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self {
            user_normality: users,
            product_normality: products,
        })
    }

    pub fn user(&self, u: UserId) -> S {
        self.user_normality[u.0]
    }

    pub fn product(&self, p: ProductId) -> S {
        self.product_normality[p.0]
    }

    pub fn users(&self) -> &[S] {
        &self.user_normality
    }

    pub fn products(&self) -> &[S] {
        &self.product_normality
    }

    pub fn write<W: Write>(&self, graph: &RatingGraph<S>, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |source| Error::Csv {
            path: "<priors>".into(),
            source,
        };
        w.write_record(["entity_id", "side", "normality"]).map_err(wrap)?;
        for (i, v) in self.user_normality.iter().enumerate() {
            w.write_record([graph.users().name(i), "user", &v.to_string()])
                .map_err(wrap)?;
        }
        for (i, v) in self.product_normality.iter().enumerate() {
            w.write_record([graph.products().name(i), "product", &v.to_string()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<priors>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Computes behavioral priors for every user and product in the graph.
///
/// The global histogram of a side is the sum of the per-entity
/// histograms of that side. Entities with fewer than two ratings have no
/// gaps and score 1; if an entire side has no gaps at all, everyone on
/// that side scores 1. Histograms are order-free, so the result does not
/// depend on edge-list order.
pub fn compute_behavior_priors<S: Real>(
    graph: &RatingGraph<S>,
    bin_count: usize,
    smoothing: S,
) -> BehaviorPriors<S> {
    assert!(bin_count >= 1, "bin_count must be >= 1");
    assert!(smoothing > S::zero(), "smoothing must be positive");

    let user_hists: Vec<IrtHistogram> = (0..graph.user_count())
        .map(|u| {
            let ts: Vec<u64> = graph
                .out_edges(UserId(u))
                .iter()
                .map(|&e| graph.edges()[e].timestamp)
                .collect();
            build_histogram(&compute_irt(&ts), bin_count)
        })
        .collect();
    let product_hists: Vec<IrtHistogram> = (0..graph.product_count())
        .map(|p| {
            let ts: Vec<u64> = graph
                .in_edges(ProductId(p))
                .iter()
                .map(|&e| graph.edges()[e].timestamp)
                .collect();
            build_histogram(&compute_irt(&ts), bin_count)
        })
        .collect();

    BehaviorPriors {
        user_normality: score_side(&user_hists, bin_count, smoothing),
        product_normality: score_side(&product_hists, bin_count, smoothing),
    }
}

fn score_side<S: Real>(hists: &[IrtHistogram], bin_count: usize, smoothing: S) -> Vec<S> {
    let mut global = IrtHistogram::new(bin_count);
    for h in hists {
        global.merge(h);
    }
    if global.total() == 0 {
        return vec![S::one(); hists.len()];
    }
    hists
        .iter()
        .map(|h| {
            if h.total() == 0 {
                S::one()
            } else {
                normality_unchecked(h, &global, smoothing)
            }
        })
        .collect()
}

/// Loads externally computed normality scores.
///
/// CSV header `entity_id,side,normality` with `side` in {user, product}
/// and `normality` in `[0, 1]`. Entities absent from the file default to
/// 1; ids unknown to the graph are skipped with a warning.
pub fn load_priors<S: Real>(path: impl AsRef<Path>, graph: &RatingGraph<S>) -> Result<BehaviorPriors<S>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_priors(&path.display().to_string(), file, graph)
}

/// Same as [`load_priors`] but from any reader; `name` is used in errors.
pub fn read_priors<S: Real, R: Read>(name: &str, reader: R, graph: &RatingGraph<S>) -> Result<BehaviorPriors<S>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut priors = BehaviorPriors::neutral(graph);
    for record in rdr.records() {
        let record = record.map_err(|source| Error::Csv {
            path: name.to_owned(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("");
        let side_token = record.get(1).unwrap_or("");
        let value_token = record.get(2).unwrap_or("");
        let side: Side = side_token.parse().map_err(|()| Error::UnknownSide {
            path: name.to_owned(),
            line,
            token: side_token.to_owned(),
        })?;
        let value: f64 = value_token.parse().map_err(|e| Error::MalformedRow {
            path: name.to_owned(),
            line,
            message: format!("bad normality: {e}"),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::NormalityOutOfRange {
                id: id.to_owned(),
                value,
            });
        }
        let value_s: S = real(value);
        match side {
            Side::User => match graph.user_id(id) {
                Some(u) => priors.user_normality[u.0] = value_s,
                None => log::warn!("{name}:{line}: unknown user `{id}` in priors file, skipped"),
            },
            Side::Product => match graph.product_id(id) {
                Some(p) => priors.product_normality[p.0] = value_s,
                None => log::warn!("{name}:{line}: unknown product `{id}` in priors file, skipped"),
            },
        }
    }
    Ok(priors)
}
