//! Synthetic rating networks, planted shill attacks, and the scaling
//! benchmark.
//!
//! The benign model: every product gets a latent quality drawn uniformly
//! from `[-1, 1]`, benign scores are the latent quality plus uniform
//! noise in `[-0.2, 0.2]` clamped back into range, and each user's
//! consecutive ratings are spaced by gaps drawn uniformly between one
//! hour and thirty days. Generation is a pure function of the seed.
//!
//! Attacks add fresh shill users that rate their targets `+1` or `-1` in
//! rapid bursts (default 15 seconds apart), optionally hiding behind a
//! fraction of camouflage edges that mimic the benign model.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::behavior::{compute_behavior_priors, DEFAULT_BIN_COUNT, DEFAULT_SMOOTHING};
use crate::engine::{self, HyperParams};
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, Label, LabelSet, ProductId, RatingGraph};
use crate::scalar::{real, Real};

/// Half-width of the uniform noise added to benign scores.
pub const BENIGN_NOISE: f64 = 0.2;
/// Shortest benign inter-rating gap: one hour.
pub const MIN_GAP_SECS: u64 = 3_600;
/// Longest benign inter-rating gap: thirty days.
pub const MAX_GAP_SECS: u64 = 2_592_000;
/// Default burst spacing of attack edges.
pub const DEFAULT_BURST_GAP: u64 = 15;

/// Shape and seed of a synthetic benign network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_products: usize,
    pub n_edges: usize,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_products == 0 {
            return Err(Error::InfeasibleConfig {
                reason: "need at least one user and one product".into(),
            });
        }
        if self.n_edges < self.n_users.max(self.n_products) {
            return Err(Error::InfeasibleConfig {
                reason: format!(
                    "{} edges cannot cover {} users and {} products",
                    self.n_edges, self.n_users, self.n_products
                ),
            });
        }
        Ok(())
    }
}

fn draw_latent_qualities(rng: &mut ChaCha8Rng, n_products: usize) -> Vec<f64> {
    (0..n_products).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Generates a benign random network and an all-fair label set.
///
/// The first `max(users, products)` edges pair user `i % users` with
/// product `i % products` so every entity gets at least one edge; the
/// rest are uniform random pairs. Deterministic for a given seed.
pub fn generate_random<S: Real>(config: &SynthConfig) -> Result<(RatingGraph<S>, LabelSet)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (n_users, n_products, n_edges) = (config.n_users, config.n_products, config.n_edges);

    let latent = draw_latent_qualities(&mut rng, n_products);

    let coverage = n_users.max(n_products);
    let mut endpoints: Vec<(usize, usize)> = (0..coverage).map(|i| (i % n_users, i % n_products)).collect();
    for _ in coverage..n_edges {
        endpoints.push((rng.gen_range(0..n_users), rng.gen_range(0..n_products)));
    }

    let scores: Vec<f64> = endpoints
        .iter()
        .map(|&(_, p)| (latent[p] + rng.gen_range(-BENIGN_NOISE..=BENIGN_NOISE)).clamp(-1.0, 1.0))
        .collect();

    // per-user timelines: a random start, then benign gaps, assigned to
    // the user's edges in edge order
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    for (e, &(u, _)) in endpoints.iter().enumerate() {
        by_user[u].push(e);
    }
    let mut timestamps = vec![0u64; n_edges];
    for edges in &by_user {
        let mut t = rng.gen_range(0..=MAX_GAP_SECS);
        for &e in edges {
            timestamps[e] = t;
            t += rng.gen_range(MIN_GAP_SECS..=MAX_GAP_SECS);
        }
    }

    let mut b = GraphBuilder::new();
    for (e, &(u, p)) in endpoints.iter().enumerate() {
        b.add_rating(&format!("u{u}"), &format!("p{p}"), real::<S>(scores[e]), timestamps[e])?;
    }
    let graph = b.finish()?;

    let mut labels = LabelSet::new();
    for u in 0..n_users {
        labels.insert(&format!("u{u}"), Label::Fair)?;
    }
    Ok((graph, labels))
}

/// Who the shills rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackTargets {
    /// Shills rate each other: shill `i` rates the product-side entities
    /// of the other shills, as if the ring had been split from a
    /// unipartite network.
    Mutual,
    /// Shills rate the given existing products.
    Products(Vec<String>),
}

/// A planted shill campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub n_shills: usize,
    pub targets: AttackTargets,
    /// `+1.0` (boosting) or `-1.0` (bad-mouthing).
    pub attack_score: f64,
    /// Fraction of each shill's edges that copy benign behavior.
    pub camouflage_fraction: f64,
    /// Seconds between consecutive attack edges.
    pub burst_gap: u64,
    /// Total edges per shill (attack + camouflage).
    pub edges_per_shill: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            n_shills: 40,
            targets: AttackTargets::Mutual,
            attack_score: 1.0,
            camouflage_fraction: 0.0,
            burst_gap: DEFAULT_BURST_GAP,
            edges_per_shill: 10,
        }
    }
}

impl AttackConfig {
    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InfeasibleConfig {
            reason: reason.into(),
        };
        if self.n_shills == 0 {
            return Err(bad("need at least one shill"));
        }
        if self.edges_per_shill == 0 {
            return Err(bad("shills need at least one edge"));
        }
        if !(0.0..=1.0).contains(&self.camouflage_fraction) {
            return Err(bad("camouflage fraction must lie in [0, 1]"));
        }
        if self.attack_score != 1.0 && self.attack_score != -1.0 {
            return Err(bad("attack score must be +1 or -1"));
        }
        if matches!(self.targets, AttackTargets::Mutual) && self.n_shills < 2 && self.attack_edges() > 0 {
            return Err(bad("a mutual attack needs at least two shills"));
        }
        if let AttackTargets::Products(ids) = &self.targets {
            if ids.is_empty() && self.attack_edges() > 0 {
                return Err(bad("no target products given"));
            }
        }
        Ok(())
    }

    /// Camouflage edges per shill: `floor(fraction * edges)`; the
    /// remainder are attack edges, so an exact half splits evenly.
    pub fn camouflage_edges(&self) -> usize {
        (self.camouflage_fraction * self.edges_per_shill as f64).floor() as usize
    }

    pub fn attack_edges(&self) -> usize {
        self.edges_per_shill - self.camouflage_edges()
    }
}

/// Adds `n_shills` fresh unfair users running the given campaign on top
/// of an existing graph. Original edges keep their order and indices;
/// shill edges are appended per shill, attack burst first, camouflage
/// after.
pub fn inject_fraud<S: Real>(
    graph: &RatingGraph<S>,
    labels: &LabelSet,
    attack: &AttackConfig,
    seed: u64,
) -> Result<(RatingGraph<S>, LabelSet)> {
    attack.validate()?;

    let shill_names: Vec<String> = (0..attack.n_shills).map(|i| format!("shill_{i}")).collect();
    for name in &shill_names {
        if graph.user_id(name).is_some() || graph.product_id(name).is_some() {
            return Err(Error::ShillIdCollision { id: name.clone() });
        }
    }
    let attack_targets: Vec<String> = match &attack.targets {
        AttackTargets::Mutual => shill_names.clone(),
        AttackTargets::Products(ids) => {
            for id in ids {
                if graph.product_id(id).is_none() {
                    return Err(Error::MissingTarget { id: id.clone() });
                }
            }
            ids.clone()
        }
    };

    // per-product mean scores of the original graph, for camouflage
    let product_means: Vec<f64> = (0..graph.product_count())
        .map(|p| {
            let edges = graph.in_edges(ProductId(p));
            let sum: f64 = edges
                .iter()
                .map(|&e| graph.edges()[e].score.to_f64().unwrap_or(0.0))
                .sum();
            sum / edges.len() as f64
        })
        .collect();
    let max_ts = graph.edges().iter().map(|e| e.timestamp).max().unwrap_or(0);

    let mut b = GraphBuilder::new();
    for e in graph.edges() {
        b.add_rating(graph.user_name(e.user), graph.product_name(e.product), e.score, e.timestamp)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attack_score: S = real(attack.attack_score);
    let n_attack = attack.attack_edges();
    let n_camo = attack.camouflage_edges();
    for (i, shill) in shill_names.iter().enumerate() {
        let mut t = max_ts + 1 + i as u64 * 86_400;
        if n_attack > 0 {
            let mut targets = attack_targets
                .iter()
                .enumerate()
                .filter(|&(j, _)| !matches!(attack.targets, AttackTargets::Mutual) || j != i)
                .map(|(_, name)| name)
                .cycle();
            for _ in 0..n_attack {
                let target = targets.next().expect("validated non-empty targets");
                b.add_rating(shill, target, attack_score, t)?;
                t += attack.burst_gap;
            }
        }
        for _ in 0..n_camo {
            let p = rng.gen_range(0..graph.product_count());
            let score = (product_means[p] + rng.gen_range(-BENIGN_NOISE..=BENIGN_NOISE)).clamp(-1.0, 1.0);
            t += rng.gen_range(MIN_GAP_SECS..=MAX_GAP_SECS);
            b.add_rating(shill, graph.products().name(p), real::<S>(score), t)?;
        }
    }
    let injected = b.finish()?;

    let mut out_labels = labels.clone();
    for shill in &shill_names {
        out_labels.insert(shill, Label::Unfair)?;
    }
    Ok((injected, out_labels))
}

/// One row of the scaling benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub edges: usize,
    pub seconds: f64,
    pub iterations: usize,
}

/// Times one solver run per edge count on fresh random graphs with a
/// 10:20:1 user:product:edge shape and reports wall time and iterations.
/// Prior computation happens outside the timed section.
pub fn benchmark_scaling<S: Real>(
    sizes: &[usize],
    combo: &HyperParams<S>,
    epsilon: S,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for (i, &edges) in sizes.iter().enumerate() {
        let config = SynthConfig {
            n_users: (edges / 10).max(1),
            n_products: (edges / 20).max(1),
            n_edges: edges,
            seed: seed.wrapping_add(i as u64),
        };
        let (graph, _) = generate_random::<S>(&config)?;
        let priors = compute_behavior_priors(&graph, DEFAULT_BIN_COUNT, real(DEFAULT_SMOOTHING));
        let start = Instant::now();
        let (_, report) = engine::run(&graph, &priors, combo, epsilon, None)?;
        rows.push(ScalingRow {
            edges,
            seconds: start.elapsed().as_secs_f64(),
            iterations: report.iterations,
        });
    }
    Ok(rows)
}

/// Writes benchmark rows as `edges,seconds,iterations`.
pub fn write_benchmark<W: Write>(rows: &[ScalingRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |source| Error::Csv {
        path: "<benchmark>".into(),
        source,
    };
    w.write_record(["edges", "seconds", "iterations"]).map_err(wrap)?;
    for r in rows {
        w.write_record([&r.edges.to_string(), &r.seconds.to_string(), &r.iterations.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<benchmark>".into(),
        source,
    })?;
    Ok(())
}
