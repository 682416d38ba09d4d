//! Bipartite rating networks: data model, CSV ingestion, score rescaling,
//! unipartite splitting, and ground-truth labels.
//!
//! A [`RatingGraph`] is an immutable bipartite multigraph: users on one
//! side, products on the other, and timestamped scored ratings as edges.
//! Entities are keyed by opaque string identifiers; dense indices are
//! assigned by first appearance and are an internal detail. Parallel
//! edges are kept distinct, and every entity is required to have at
//! least one edge so the solver's denominators never vanish.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::{two, Real};

/// Dense index of a user within one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub usize);

/// Dense index of a product within one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductId(pub usize);

/// Which side of the bipartition an entity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    User,
    Product,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::User => f.write_str("user"),
            Side::Product => f.write_str("product"),
        }
    }
}

impl FromStr for Side {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "user" => Ok(Side::User),
            "product" => Ok(Side::Product),
            _ => Err(()),
        }
    }
}

/// Interning table mapping raw string identifiers to dense indices.
///
/// Index assignment is a bijection between distinct raw identifiers and
/// `0..len`, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl EntityTable {
    fn intern(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.names.len();
        self.names.push(raw.to_owned());
        self.index.insert(raw.to_owned(), i);
        i
    }

    pub fn get(&self, raw: &str) -> Option<usize> {
        self.index.get(raw).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

/// One timestamped rating of a product by a user, with score in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating<S> {
    pub user: UserId,
    pub product: ProductId,
    pub score: S,
    pub timestamp: u64,
}

/// Immutable bipartite rating multigraph with adjacency indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingGraph<S> {
    users: EntityTable,
    products: EntityTable,
    edges: Vec<Rating<S>>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl<S: Real> RatingGraph<S> {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn product_count(&self) -> usize {
        self.products.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Rating<S>] {
        &self.edges
    }

    /// Edge indices of the ratings given by `u`, in input order.
    pub fn out_edges(&self, u: UserId) -> &[usize] {
        &self.out_adj[u.0]
    }

    /// Edge indices of the ratings received by `p`, in input order.
    pub fn in_edges(&self, p: ProductId) -> &[usize] {
        &self.in_adj[p.0]
    }

    pub fn users(&self) -> &EntityTable {
        &self.users
    }

    pub fn products(&self) -> &EntityTable {
        &self.products
    }

    pub fn user_name(&self, u: UserId) -> &str {
        self.users.name(u.0)
    }

    pub fn product_name(&self, p: ProductId) -> &str {
        self.products.name(p.0)
    }

    pub fn user_id(&self, raw: &str) -> Option<UserId> {
        self.users.get(raw).map(UserId)
    }

    pub fn product_id(&self, raw: &str) -> Option<ProductId> {
        self.products.get(raw).map(ProductId)
    }

    /// Writes the graph back out as a ratings CSV. Scores print in their
    /// shortest round-trippable form, so a rewrite-and-reload cycle with
    /// the default schema reproduces the graph bit for bit.
    pub fn write_ratings<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |source| Error::Csv {
            path: "<ratings>".into(),
            source,
        };
        w.write_record(["user_id", "product_id", "rating", "timestamp"])
            .map_err(wrap)?;
        for e in &self.edges {
            w.write_record([
                self.user_name(e.user),
                self.product_name(e.product),
                &e.score.to_string(),
                &e.timestamp.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<ratings>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Incremental constructor for [`RatingGraph`]; enforces score range at
/// insertion and the no-zero-degree invariant at completion.
#[derive(Debug, Clone)]
pub struct GraphBuilder<S> {
    users: EntityTable,
    products: EntityTable,
    edges: Vec<Rating<S>>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl<S: Real> Default for GraphBuilder<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> GraphBuilder<S> {
    pub fn new() -> Self {
        Self {
            users: EntityTable::default(),
            products: EntityTable::default(),
            edges: Vec::new(),
            out_adj: Vec::new(),
            in_adj: Vec::new(),
        }
    }

    pub fn add_rating(&mut self, user: &str, product: &str, score: S, timestamp: u64) -> Result<()> {
        let one = S::one();
        if !(score >= -one && score <= one) {
            return Err(Error::ScoreOutOfRange {
                score: score.to_f64().unwrap_or(f64::NAN),
            });
        }
        let u = self.users.intern(user);
        let p = self.products.intern(product);
        if u == self.out_adj.len() {
            self.out_adj.push(Vec::new());
        }
        if p == self.in_adj.len() {
            self.in_adj.push(Vec::new());
        }
        let e = self.edges.len();
        self.edges.push(Rating {
            user: UserId(u),
            product: ProductId(p),
            score,
            timestamp,
        });
        self.out_adj[u].push(e);
        self.in_adj[p].push(e);
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn finish(self) -> Result<RatingGraph<S>> {
        if self.edges.is_empty() {
            return Err(Error::EmptyInput {
                path: "<builder>".into(),
            });
        }
        // Degrees are >= 1 by construction (entities only exist through
        // edges), but guard the invariant anyway: downstream denominators
        // rely on it.
        for (i, adj) in self.out_adj.iter().enumerate() {
            if adj.is_empty() {
                return Err(Error::ZeroDegreeEntity {
                    side: "user",
                    id: self.users.name(i).to_owned(),
                });
            }
        }
        for (i, adj) in self.in_adj.iter().enumerate() {
            if adj.is_empty() {
                return Err(Error::ZeroDegreeEntity {
                    side: "product",
                    id: self.products.name(i).to_owned(),
                });
            }
        }
        debug_assert_eq!(
            self.out_adj.iter().map(Vec::len).sum::<usize>(),
            self.edges.len()
        );
        Ok(RatingGraph {
            users: self.users,
            products: self.products,
            edges: self.edges,
            out_adj: self.out_adj,
            in_adj: self.in_adj,
        })
    }
}

/// Affine rescaling of `raw` from `[min, max]` onto `[-1, 1]`.
///
/// Evaluated as `(2 raw - (min + max)) / (max - min)`, which is exact for
/// the common already-rescaled case `[min, max] = [-1, 1]`. The result is
/// clamped to `[-1, 1]` to absorb the last-ulp spill possible at the
/// interval ends.
pub fn rescale_score<S: Real>(raw: S, min: S, max: S) -> Result<S> {
    if min.is_nan() || max.is_nan() || min >= max {
        return Err(Error::InvalidRange {
            min: min.to_f64().unwrap_or(f64::NAN),
            max: max.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !(raw >= min && raw <= max) {
        return Err(Error::RawScoreOutOfRange {
            raw: raw.to_f64().unwrap_or(f64::NAN),
            min: min.to_f64().unwrap_or(f64::NAN),
            max: max.to_f64().unwrap_or(f64::NAN),
        });
    }
    let one = S::one();
    let scaled = (two::<S>() * raw - (min + max)) / (max - min);
    Ok(scaled.max(-one).min(one))
}

/// Column mapping and raw score range for ratings CSV files.
#[derive(Debug, Clone)]
pub struct RatingSchema {
    pub user_col: String,
    pub product_col: String,
    pub rating_col: String,
    pub timestamp_col: String,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl Default for RatingSchema {
    /// Canonical bipartite header with scores already in `[-1, 1]`.
    fn default() -> Self {
        Self {
            user_col: "user_id".into(),
            product_col: "product_id".into(),
            rating_col: "rating".into(),
            timestamp_col: "timestamp".into(),
            raw_min: -1.0,
            raw_max: 1.0,
        }
    }
}

impl RatingSchema {
    /// Default column names with a caller-specified raw score range.
    pub fn with_range(raw_min: f64, raw_max: f64) -> Result<Self> {
        if raw_min.is_nan() || raw_max.is_nan() || raw_min >= raw_max {
            return Err(Error::InvalidRange {
                min: raw_min,
                max: raw_max,
            });
        }
        Ok(Self {
            raw_min,
            raw_max,
            ..Self::default()
        })
    }

    /// Canonical unipartite header (`source_id`, `target_id`).
    pub fn unipartite(raw_min: f64, raw_max: f64) -> Result<Self> {
        let mut s = Self::with_range(raw_min, raw_max)?;
        s.user_col = "source_id".into();
        s.product_col = "target_id".into();
        Ok(s)
    }
}

struct ColumnIndices {
    user: usize,
    product: usize,
    rating: usize,
    timestamp: usize,
}

fn resolve_columns(path: &str, headers: &csv::StringRecord, schema: &RatingSchema) -> Result<ColumnIndices> {
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_owned(),
                column: col.to_owned(),
            })
    };
    Ok(ColumnIndices {
        user: find(&schema.user_col)?,
        product: find(&schema.product_col)?,
        rating: find(&schema.rating_col)?,
        timestamp: find(&schema.timestamp_col)?,
    })
}

struct RawEdge<S> {
    source: String,
    target: String,
    score: S,
    timestamp: u64,
}

fn parse_edges<S: Real, R: Read>(path: &str, reader: R, schema: &RatingSchema) -> Result<Vec<RawEdge<S>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?
        .clone();
    let cols = resolve_columns(path, &headers, schema)?;
    let min = S::from_f64(schema.raw_min).expect("raw_min representable");
    let max = S::from_f64(schema.raw_max).expect("raw_max representable");

    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let malformed = |message: String| Error::MalformedRow {
            path: path.to_owned(),
            line,
            message,
        };
        let field = |i: usize, what: &str| {
            record
                .get(i)
                .ok_or_else(|| malformed(format!("missing {what} field")))
        };
        let source = field(cols.user, "user")?.to_owned();
        let target = field(cols.product, "product")?.to_owned();
        if source.is_empty() || target.is_empty() {
            return Err(malformed("empty entity id".into()));
        }
        let raw: f64 = field(cols.rating, "rating")?
            .parse()
            .map_err(|e| malformed(format!("bad rating: {e}")))?;
        let timestamp: u64 = field(cols.timestamp, "timestamp")?
            .parse()
            .map_err(|e| malformed(format!("bad timestamp: {e}")))?;
        let raw_s = S::from_f64(raw).ok_or_else(|| malformed(format!("rating {raw} not representable")))?;
        let score = rescale_score(raw_s, min, max).map_err(|e| malformed(e.to_string()))?;
        edges.push(RawEdge {
            source,
            target,
            score,
            timestamp,
        });
    }
    if edges.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_owned(),
        });
    }
    Ok(edges)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a bipartite ratings CSV, rescaling raw scores into `[-1, 1]`.
///
/// Edge order equals file row order and entity indices are assigned by
/// first appearance, which anchors all downstream determinism.
pub fn load_ratings<S: Real>(path: impl AsRef<Path>, schema: &RatingSchema) -> Result<RatingGraph<S>> {
    let path = path.as_ref();
    let edges = parse_edges::<S, _>(&path.display().to_string(), open(path)?, schema)?;
    build_bipartite(edges)
}

/// Same as [`load_ratings`] but from any reader; `name` is used in errors.
pub fn read_ratings<S: Real, R: Read>(name: &str, reader: R, schema: &RatingSchema) -> Result<RatingGraph<S>> {
    build_bipartite(parse_edges::<S, _>(name, reader, schema)?)
}

fn build_bipartite<S: Real>(edges: Vec<RawEdge<S>>) -> Result<RatingGraph<S>> {
    let mut b = GraphBuilder::new();
    for e in &edges {
        b.add_rating(&e.source, &e.target, e.score, e.timestamp)?;
    }
    b.finish()
}

/// Splits a unipartite directed rating list into a bipartite graph.
///
/// Every id `X` becomes user-side `X` (its outgoing edges) and
/// product-side `X` (its incoming edges); the two sides are independent
/// namespaces, so ids with only outgoing edges appear only as users and
/// symmetrically. Self-loops are kept and become ordinary bipartite
/// edges. Scores must already lie in `[-1, 1]`.
pub fn split_unipartite<S: Real>(edges: &[(String, String, S, u64)]) -> Result<RatingGraph<S>> {
    let mut b = GraphBuilder::new();
    for (rater, target, score, timestamp) in edges {
        b.add_rating(rater, target, *score, *timestamp)?;
    }
    b.finish()
}

/// Loads a unipartite CSV (`source_id,target_id,rating,timestamp`) and
/// splits it into a bipartite graph, rescaling raw scores on the way.
pub fn load_unipartite<S: Real>(path: impl AsRef<Path>, schema: &RatingSchema) -> Result<RatingGraph<S>> {
    let path = path.as_ref();
    let edges = parse_edges::<S, _>(&path.display().to_string(), open(path)?, schema)?;
    let tuples: Vec<(String, String, S, u64)> = edges
        .into_iter()
        .map(|e| (e.source, e.target, e.score, e.timestamp))
        .collect();
    split_unipartite(&tuples)
}

/// Ground-truth class of a labeled user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Fair,
    Unfair,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Fair => f.write_str("fair"),
            Label::Unfair => f.write_str("unfair"),
        }
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "fair" => Ok(Label::Fair),
            "unfair" => Ok(Label::Unfair),
            _ => Err(()),
        }
    }
}

/// Partial map from user ids to fair/unfair labels; unlabeled users are
/// simply absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    order: Vec<String>,
    labels: HashMap<String, Label>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a label; re-inserting the same label is a no-op and a
    /// conflicting one is an error.
    pub fn insert(&mut self, id: &str, label: Label) -> Result<()> {
        match self.labels.get(id) {
            Some(&existing) if existing != label => Err(Error::ConflictingLabel { id: id.to_owned() }),
            Some(_) => Ok(()),
            None => {
                self.order.push(id.to_owned());
                self.labels.insert(id.to_owned(), label);
                Ok(())
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.labels.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> {
        self.order.iter().map(move |id| (id.as_str(), self.labels[id]))
    }

    /// Per-user labels aligned with the graph's user indices. Fails with
    /// the full list of label ids that do not resolve to graph users.
    pub fn resolve<S: Real>(&self, graph: &RatingGraph<S>) -> Result<Vec<Option<Label>>> {
        let unresolved: Vec<String> = self
            .order
            .iter()
            .filter(|id| graph.user_id(id).is_none())
            .cloned()
            .collect();
        if !unresolved.is_empty() {
            return Err(Error::UnresolvedLabelIds { ids: unresolved });
        }
        let mut out = vec![None; graph.user_count()];
        for (id, label) in self.iter() {
            let u = graph.user_id(id).expect("checked above");
            out[u.0] = Some(label);
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |source| Error::Csv {
            path: "<labels>".into(),
            source,
        };
        w.write_record(["user_id", "label"]).map_err(wrap)?;
        for (id, label) in self.iter() {
            w.write_record([id, &label.to_string()]).map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<labels>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Loads a labels CSV (`user_id,label` with `label` in {fair, unfair}).
///
/// An empty body is a valid, empty label set; conflicting duplicates and
/// unknown label tokens are errors.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelSet> {
    let path = path.as_ref();
    read_labels(&path.display().to_string(), open(path)?)
}

/// Same as [`load_labels`] but from any reader; `name` is used in errors.
pub fn read_labels<R: Read>(name: &str, reader: R) -> Result<LabelSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut set = LabelSet::new();
    for record in rdr.records() {
        let record = record.map_err(|source| Error::Csv {
            path: name.to_owned(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("");
        let token = record.get(1).unwrap_or("");
        if id.is_empty() {
            return Err(Error::MalformedRow {
                path: name.to_owned(),
                line,
                message: "empty user id".into(),
            });
        }
        let label: Label = token.parse().map_err(|()| Error::UnknownLabel {
            path: name.to_owned(),
            line,
            token: token.to_owned(),
        })?;
        set.insert(id, label)?;
    }
    Ok(set)
}
