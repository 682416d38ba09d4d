//! Shared fixtures and independent oracles for the integration suites.
//!
//! The reference solver and metric oracles here are deliberately plain
//! re-implementations (naive loops, naive summation, quadratic scans) so
//! the main code paths are checked against something that shares none of
//! their machinery.

// each integration target compiles this module and uses its own subset
#![allow(dead_code)]

use fairjudge::graph::{GraphBuilder, Label, LabelSet, ProductId, RatingGraph, UserId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The worked-example network: five users rate three products the same
/// way (+1, +0.5, -1), the sixth dissents on every product.
pub fn toy_graph() -> RatingGraph<f64> {
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

/// Straightforward reference solver: plain loops, naive left-to-right
/// sums, no buffering tricks. Returns `(fairness, goodness, reliability,
/// iterations)`.
#[allow(clippy::too_many_arguments)]
pub fn naive_run(
    graph: &RatingGraph<f64>,
    user_norm: &[f64],
    product_norm: &[f64],
    (a1, a2, b1, b2): (f64, f64, f64, f64),
    eps: f64,
    max_iter: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, usize) {
    let nu = graph.user_count();
    let np = graph.product_count();
    let ne = graph.edge_count();
    let mut f = vec![1.0; nu];
    let mut g = vec![1.0; np];
    let mut r = vec![1.0; ne];
    let mut t = 0;
    loop {
        t += 1;
        let mut g2 = vec![0.0; np];
        for (p, slot) in g2.iter_mut().enumerate() {
            let edges = graph.in_edges(ProductId(p));
            let mut sum = 0.0;
            for &e in edges {
                sum += r[e] * graph.edges()[e].score;
            }
            *slot = (b2 * product_norm[p] + sum) / (b1 + b2 + edges.len() as f64);
        }
        let mut r2 = vec![0.0; ne];
        for (e, edge) in graph.edges().iter().enumerate() {
            r2[e] = 0.5 * (f[edge.user.0] + (1.0 - (edge.score - g2[edge.product.0]).abs() / 2.0));
        }
        let mut f2 = vec![0.0; nu];
        for (u, slot) in f2.iter_mut().enumerate() {
            let edges = graph.out_edges(UserId(u));
            let mut sum = 0.0;
            for &e in edges {
                sum += r2[e];
            }
            *slot = (0.5 * a1 + a2 * user_norm[u] + sum) / (a1 + a2 + edges.len() as f64);
        }
        let mut err = 0.0f64;
        for (a, b) in f.iter().zip(&f2) {
            err = err.max((a - b).abs());
        }
        for (a, b) in r.iter().zip(&r2) {
            err = err.max((a - b).abs());
        }
        for (a, b) in g.iter().zip(&g2) {
            err = err.max((a - b).abs());
        }
        f = f2;
        g = g2;
        r = r2;
        if err <= eps || t >= max_iter {
            return (f, g, r, t);
        }
    }
}

/// Random rating multigraph with every appearing entity guaranteed at
/// least one edge; mixes grid scores (ties, parallel edges) with
/// continuous ones.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    max_users: usize,
    max_products: usize,
    max_edges: usize,
) -> RatingGraph<f64> {
    let users = rng.gen_range(1..=max_users);
    let products = rng.gen_range(1..=max_products);
    let floor = users.max(products);
    let edges = rng.gen_range(floor..=max_edges.max(floor));
    let mut b = GraphBuilder::new();
    for i in 0..edges {
        let (u, p) = if i < floor {
            (i % users, i % products)
        } else {
            (rng.gen_range(0..users), rng.gen_range(0..products))
        };
        let score = if rng.gen_bool(0.3) {
            [-1.0, -0.5, 0.0, 0.5, 1.0][rng.gen_range(0..5)]
        } else {
            rng.gen_range(-1.0..=1.0)
        };
        let ts = rng.gen_range(0..10_000_000u64);
        b.add_rating(&format!("u{u}"), &format!("p{p}"), score, ts).unwrap();
    }
    b.finish().unwrap()
}

pub fn random_hyperparams(rng: &mut ChaCha8Rng) -> fairjudge::HyperParams64 {
    fairjudge::engine::HyperParams::new(
        rng.gen_range(0.0..=5.0),
        rng.gen_range(0.0..=5.0),
        rng.gen_range(0.0..=5.0),
        rng.gen_range(0.0..=5.0),
    )
    .unwrap()
}

/// Brute-force average precision: materialize the explicit ranking, then
/// recount positives over every prefix.
pub fn ap_oracle(scores: &[(String, f64)], labels: &LabelSet, positive: Label) -> Option<f64> {
    let mut items: Vec<(f64, usize, bool)> = scores
        .iter()
        .enumerate()
        .filter_map(|(i, (id, v))| labels.get(id).map(|l| (*v, i, l == positive)))
        .collect();
    // fairness-like scores: ascending marks suspicion first; score ties
    // break by entry index in both directions
    match positive {
        Label::Unfair => items.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1))),
        Label::Fair => items.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1))),
    }
    let total_pos = items.iter().filter(|it| it.2).count();
    if total_pos == 0 {
        return None;
    }
    let mut sum = 0.0;
    for k in 1..=items.len() {
        if items[k - 1].2 {
            let hits = items[..k].iter().filter(|it| it.2).count();
            sum += hits as f64 / k as f64;
        }
    }
    Some(sum / total_pos as f64)
}

/// Brute-force ROC AUC: compare every positive against every negative,
/// ties worth one half.
pub fn auc_oracle(scores: &[(String, f64)], labels: &LabelSet, positive: Label) -> Option<f64> {
    let labeled: Vec<(f64, bool)> = scores
        .iter()
        .filter_map(|(id, v)| labels.get(id).map(|l| (*v, l == positive)))
        .collect();
    let pos: Vec<f64> = labeled.iter().filter(|(_, p)| *p).map(|(v, _)| *v).collect();
    let neg: Vec<f64> = labeled.iter().filter(|(_, p)| !*p).map(|(v, _)| *v).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            // positive should look more suspicious: for unfair-positive a
            // lower fairness wins, for fair-positive a higher one
            let outranks = match positive {
                Label::Unfair => p < n,
                Label::Fair => p > n,
            };
            if outranks {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}
