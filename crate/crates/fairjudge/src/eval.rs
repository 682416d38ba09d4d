//! Ranking-quality metrics against ground-truth labels, top-k suspect
//! reports, and reliability-distribution histograms.
//!
//! Both metrics operate on the relative ordering of the *labeled* users
//! among the scored ones. Average precision is the non-interpolated area
//! under the precision-recall curve; ROC AUC is the probability that a
//! random positive outranks a random negative, with ties counted half,
//! computed by rank sum.

use std::io::{Read, Write};
use std::path::Path;

use crate::engine::ScoreState;
use crate::error::{Error, Result};
use crate::graph::{Label, LabelSet, RatingGraph, Side, UserId};
use crate::scalar::{real, Real};

/// Per-user scores in a fixed entity order, plus the direction flag
/// saying whether a *lower* score marks a *more* suspicious user (true
/// for raw fairness output).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedScores<S> {
    entries: Vec<(String, S)>,
    suspicious_is_low: bool,
}

impl<S: Real> RankedScores<S> {
    /// Wraps explicit `(user id, score)` pairs; scores must be finite.
    pub fn new(entries: Vec<(String, S)>, suspicious_is_low: bool) -> Result<Self> {
        if let Some((id, _)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteScore { id: id.clone() });
        }
        Ok(Self {
            entries,
            suspicious_is_low,
        })
    }

    /// Fairness scores of every user in the graph, in entity-index order.
    pub fn from_fairness(graph: &RatingGraph<S>, state: &ScoreState<S>) -> Self {
        let entries = state
            .fairness()
            .iter()
            .enumerate()
            .map(|(u, &f)| (graph.users().name(u).to_owned(), f))
            .collect();
        Self {
            entries,
            suspicious_is_low: true,
        }
    }

    pub fn entries(&self) -> &[(String, S)] {
        &self.entries
    }

    pub fn suspicious_is_low(&self) -> bool {
        self.suspicious_is_low
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads user rows out of an `entity_id,side,score` CSV (product rows are
/// ignored). Row order becomes the tie-breaking entity order.
pub fn read_user_scores<S: Real, R: Read>(name: &str, reader: R) -> Result<RankedScores<S>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut entries = Vec::new();
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
        if side != Side::User {
            continue;
        }
        let value: f64 = value_token.parse().map_err(|e| Error::MalformedRow {
            path: name.to_owned(),
            line,
            message: format!("bad score: {e}"),
        })?;
        entries.push((id.to_owned(), real::<S>(value)));
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput {
            path: name.to_owned(),
        });
    }
    RankedScores::new(entries, true)
}

/// See [`read_user_scores`].
pub fn load_user_scores<S: Real>(path: impl AsRef<Path>) -> Result<RankedScores<S>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_user_scores(&path.display().to_string(), file)
}

/// Labeled entries ordered most-likely-positive first, ties broken by
/// entity order (stable).
fn ranked_labeled<S: Real>(
    scores: &RankedScores<S>,
    labels: &LabelSet,
    positive: Label,
) -> Vec<(S, bool)> {
    let mut rows: Vec<(S, bool)> = scores
        .entries
        .iter()
        .filter_map(|(id, v)| labels.get(id).map(|l| (*v, l == positive)))
        .collect();
    // With fairness-like scores (suspicious_is_low), unfair-positive wants
    // ascending scores; fair-positive wants descending. Suspiciousness
    // scores flip both.
    let ascending = (positive == Label::Unfair) == scores.suspicious_is_low;
    if ascending {
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));
    } else {
        rows.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));
    }
    rows
}

/// Non-interpolated average precision of the `positive` class:
/// `AP = sum_k precision@k [item k positive] / #positives`.
pub fn average_precision<S: Real>(scores: &RankedScores<S>, labels: &LabelSet, positive: Label) -> Result<S> {
    let ranked = ranked_labeled(scores, labels, positive);
    let positives = ranked.iter().filter(|(_, p)| *p).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut seen = 0usize;
    let mut sum = S::zero();
    for (k, (_, is_pos)) in ranked.iter().enumerate() {
        if *is_pos {
            seen += 1;
            sum = sum + real::<S>(seen as f64) / real::<S>((k + 1) as f64);
        }
    }
    Ok(sum / real::<S>(positives as f64))
}

/// ROC AUC of the `positive` class by rank sum, ties counted 0.5.
pub fn roc_auc<S: Real>(scores: &RankedScores<S>, labels: &LabelSet, positive: Label) -> Result<S> {
    // Orient values so that higher means more likely positive.
    let flip = (positive == Label::Unfair) == scores.suspicious_is_low;
    let mut rows: Vec<(S, bool)> = scores
        .entries
        .iter()
        .filter_map(|(id, v)| {
            labels
                .get(id)
                .map(|l| (if flip { -*v } else { *v }, l == positive))
        })
        .collect();
    let positives = rows.iter().filter(|(_, p)| *p).count();
    let negatives = rows.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));

    // average ranks within tie groups, then Mann-Whitney
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].0 == rows[i].0 {
            j += 1;
        }
        let avg_rank = ((i + 1) + j) as f64 / 2.0;
        for row in &rows[i..j] {
            if row.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    let n = negatives as f64;
    let auc = (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
    Ok(real(auc))
}

/// One row of the top-k most-suspicious report.
#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry<S> {
    pub rank: usize,
    pub user: String,
    pub fairness: S,
}

/// The `min(k, |users|)` least-fair users, ascending fairness, ties
/// broken by entity index.
pub fn rank_report<S: Real>(graph: &RatingGraph<S>, state: &ScoreState<S>, k: usize) -> Result<Vec<RankEntry<S>>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let mut order: Vec<usize> = (0..graph.user_count()).collect();
    order.sort_by(|&a, &b| {
        state.fairness()[a]
            .partial_cmp(&state.fairness()[b])
            .expect("fairness is finite")
    });
    order.truncate(k.min(graph.user_count()));
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, u)| RankEntry {
            rank: i + 1,
            user: graph.users().name(u).to_owned(),
            fairness: state.fairness()[u],
        })
        .collect())
}

/// Like [`rank_report`], but over standalone scores (CSV path): ascending
/// score, ties broken by entry order.
pub fn rank_report_from_scores<S: Real>(scores: &RankedScores<S>, k: usize) -> Result<Vec<RankEntry<S>>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores.entries[a]
            .1
            .partial_cmp(&scores.entries[b].1)
            .expect("scores are finite")
    });
    order.truncate(k.min(scores.len()));
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, idx)| RankEntry {
            rank: i + 1,
            user: scores.entries[idx].0.clone(),
            fairness: scores.entries[idx].1,
        })
        .collect())
}

/// Writes a rank report as `rank,user_id,fairness`.
pub fn write_rank_report<S: Real, W: Write>(report: &[RankEntry<S>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |source| Error::Csv {
        path: "<report>".into(),
        source,
    };
    w.write_record(["rank", "user_id", "fairness"]).map_err(wrap)?;
    for e in report {
        w.write_record([&e.rank.to_string(), &e.user, &e.fairness.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<report>".into(),
        source,
    })?;
    Ok(())
}

/// How to pick the two user sets compared by
/// [`reliability_distribution`].
#[derive(Debug, Clone, Copy)]
pub enum DistributionSelector<'a> {
    /// Users labeled fair vs users labeled unfair.
    Labels(&'a LabelSet),
    /// Top k by fairness vs bottom k by fairness; the sets must not
    /// overlap.
    TopK(usize),
}

/// Normalized histograms over `[0, 1]` of the reliabilities of all
/// ratings emitted by the fair-side and unfair-side user sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityDistribution<S> {
    pub bins: usize,
    pub freq_fair: Vec<S>,
    pub freq_unfair: Vec<S>,
}

impl<S: Real> ReliabilityDistribution<S> {
    /// `(lo, hi)` bounds of bin `i`.
    pub fn bin_bounds(&self, i: usize) -> (f64, f64) {
        let w = 1.0 / self.bins as f64;
        (i as f64 * w, (i + 1) as f64 * w)
    }

    /// Frequency-weighted mean reliability of one histogram.
    pub fn mean(freq: &[S]) -> S {
        let bins = freq.len();
        let mut acc = S::zero();
        for (i, &f) in freq.iter().enumerate() {
            let mid = (i as f64 + 0.5) / bins as f64;
            acc = acc + f * real::<S>(mid);
        }
        acc
    }

    /// Writes `bin_lo,bin_hi,freq_fair,freq_unfair` rows.
    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |source| Error::Csv {
            path: "<distribution>".into(),
            source,
        };
        w.write_record(["bin_lo", "bin_hi", "freq_fair", "freq_unfair"])
            .map_err(wrap)?;
        for i in 0..self.bins {
            let (lo, hi) = self.bin_bounds(i);
            w.write_record([
                &lo.to_string(),
                &hi.to_string(),
                &self.freq_fair[i].to_string(),
                &self.freq_unfair[i].to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<distribution>".into(),
            source,
        })?;
        Ok(())
    }
}

fn reliability_histogram<S: Real>(
    graph: &RatingGraph<S>,
    state: &ScoreState<S>,
    users: &[usize],
    bins: usize,
) -> Vec<S> {
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for &u in users {
        for &e in graph.out_edges(UserId(u)) {
            let r = state.reliability()[e].to_f64().unwrap_or(0.0);
            let bin = ((r * bins as f64).floor() as usize).min(bins - 1);
            counts[bin] += 1;
            total += 1;
        }
    }
    counts
        .into_iter()
        .map(|c| real::<S>(c as f64) / real::<S>(total as f64))
        .collect()
}

/// Reliability histograms of the ratings emitted by two disjoint user
/// sets, for the fair-vs-unfair distribution report.
pub fn reliability_distribution<S: Real>(
    graph: &RatingGraph<S>,
    state: &ScoreState<S>,
    selector: DistributionSelector<'_>,
    bins: usize,
) -> Result<ReliabilityDistribution<S>> {
    if bins == 0 {
        return Err(Error::InvalidBins);
    }
    let (fair, unfair): (Vec<usize>, Vec<usize>) = match selector {
        DistributionSelector::Labels(labels) => {
            let resolved = labels.resolve(graph)?;
            let fair: Vec<usize> = resolved
                .iter()
                .enumerate()
                .filter(|(_, l)| **l == Some(Label::Fair))
                .map(|(u, _)| u)
                .collect();
            let unfair: Vec<usize> = resolved
                .iter()
                .enumerate()
                .filter(|(_, l)| **l == Some(Label::Unfair))
                .map(|(u, _)| u)
                .collect();
            (fair, unfair)
        }
        DistributionSelector::TopK(k) => {
            if k == 0 {
                return Err(Error::InvalidK);
            }
            if 2 * k > graph.user_count() {
                return Err(Error::SelectorOverlap {
                    k,
                    users: graph.user_count(),
                });
            }
            let mut order: Vec<usize> = (0..graph.user_count()).collect();
            order.sort_by(|&a, &b| {
                state.fairness()[a]
                    .partial_cmp(&state.fairness()[b])
                    .expect("fairness is finite")
            });
            let unfair = order[..k].to_vec();
            let fair = order[order.len() - k..].to_vec();
            (fair, unfair)
        }
    };
    if fair.is_empty() {
        return Err(Error::EmptySelection { which: "fair" });
    }
    if unfair.is_empty() {
        return Err(Error::EmptySelection { which: "unfair" });
    }
    Ok(ReliabilityDistribution {
        bins,
        freq_fair: reliability_histogram(graph, state, &fair, bins),
        freq_unfair: reliability_histogram(graph, state, &unfair, bins),
    })
}

/// Reads `(user_id, reliability)` pairs out of a
/// `user_id,product_id,reliability` CSV.
pub fn load_edge_reliabilities<S: Real>(path: impl AsRef<Path>) -> Result<Vec<(String, S)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|source| Error::Csv {
            path: name.clone(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let user = record.get(0).unwrap_or("").to_owned();
        let value: f64 = record.get(2).unwrap_or("").parse().map_err(|e| Error::MalformedRow {
            path: name.clone(),
            line,
            message: format!("bad reliability: {e}"),
        })?;
        rows.push((user, real::<S>(value)));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput { path: name });
    }
    Ok(rows)
}

/// Label-selected reliability distribution over raw `(user, reliability)`
/// rows, for evaluating from files without the originating graph.
pub fn distribution_from_edge_scores<S: Real>(
    rows: &[(String, S)],
    labels: &LabelSet,
    bins: usize,
) -> Result<ReliabilityDistribution<S>> {
    if bins == 0 {
        return Err(Error::InvalidBins);
    }
    let mut counts_fair = vec![0u64; bins];
    let mut counts_unfair = vec![0u64; bins];
    let (mut total_fair, mut total_unfair) = (0u64, 0u64);
    for (user, r) in rows {
        let Some(label) = labels.get(user) else { continue };
        let r = r.to_f64().unwrap_or(0.0);
        let bin = ((r * bins as f64).floor() as usize).min(bins - 1);
        match label {
            Label::Fair => {
                counts_fair[bin] += 1;
                total_fair += 1;
            }
            Label::Unfair => {
                counts_unfair[bin] += 1;
                total_unfair += 1;
            }
        }
    }
    if total_fair == 0 {
        return Err(Error::EmptySelection { which: "fair" });
    }
    if total_unfair == 0 {
        return Err(Error::EmptySelection { which: "unfair" });
    }
    let norm = |counts: Vec<u64>, total: u64| {
        counts
            .into_iter()
            .map(|c| real::<S>(c as f64) / real::<S>(total as f64))
            .collect()
    };
    Ok(ReliabilityDistribution {
        bins,
        freq_fair: norm(counts_fair, total_fair),
        freq_unfair: norm(counts_unfair, total_unfair),
    })
}
