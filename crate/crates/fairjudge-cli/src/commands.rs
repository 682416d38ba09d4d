//! Argument definitions and per-subcommand drivers.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use fairjudge::behavior::{self, DEFAULT_BIN_COUNT, DEFAULT_SMOOTHING};
use fairjudge::engine::{self, DEFAULT_EPSILON};
use fairjudge::ensemble::{self, DEFAULT_PARAM_MAX};
use fairjudge::eval::{self, RankedScores};
use fairjudge::graph::{self, Label, RatingSchema};
use fairjudge::synth::{self, AttackConfig, AttackTargets, SynthConfig};
use fairjudge::{BehaviorPriors64, Error, HyperParams64, RatingGraph64, ScoreState64};

/// Classified failures, mapped to exit codes in `main`.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    NonConvergence(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::NonConvergence(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidEpsilon { .. }
            | Error::NegativeHyperParam { .. }
            | Error::InvalidRange { .. }
            | Error::InvalidBins
            | Error::InvalidK
            | Error::InvalidSmoothing { .. }
            | Error::EmptyGrid
            | Error::InfeasibleConfig { .. } => CliError::Usage(e.to_string()),
            Error::EnsembleNonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "fairjudge",
    version,
    about = "Trust scores for bipartite rating networks: user fairness, product goodness, rating reliability."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute behavioral normality priors from inter-rating times
    Priors(PriorsCmd),
    /// Run the solver once with fixed hyperparameters
    Score(ScoreCmd),
    /// Average solver output across the hyperparameter grid
    Ensemble(EnsembleCmd),
    /// Export the per-combination fairness feature matrix
    Features(FeaturesCmd),
    /// Rank-quality metrics and reports against ground-truth labels
    Eval(EvalCmd),
    /// Generate a synthetic network, optionally with planted shills
    Gen(GenCmd),
    /// Time solver runs on growing random networks
    Bench(BenchCmd),
}

#[derive(Args)]
struct InputArgs {
    /// Ratings CSV: user_id,product_id,rating,timestamp
    #[arg(long)]
    ratings: PathBuf,
    /// Input is a unipartite edge list (source_id,target_id,rating,timestamp);
    /// each id is split into a rater side and a rated side
    #[arg(long)]
    unipartite: bool,
    /// Smallest raw rating in the input scale
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    raw_min: f64,
    /// Largest raw rating in the input scale
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    raw_max: f64,
}

impl InputArgs {
    fn load(&self) -> Result<RatingGraph64, CliError> {
        let graph = if self.unipartite {
            let schema = RatingSchema::unipartite(self.raw_min, self.raw_max)?;
            graph::load_unipartite(&self.ratings, &schema)?
        } else {
            let schema = RatingSchema::with_range(self.raw_min, self.raw_max)?;
            graph::load_ratings(&self.ratings, &schema)?
        };
        eprintln!(
            "loaded {} users, {} products, {} ratings",
            graph.user_count(),
            graph.product_count(),
            graph.edge_count()
        );
        Ok(graph)
    }
}

#[derive(Args)]
struct PriorArgs {
    /// Histogram bins for inter-rating time distributions
    #[arg(long, default_value_t = DEFAULT_BIN_COUNT)]
    bins: usize,
    /// Smoothing strength for the normality estimate
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smoothing: f64,
    /// Read priors from this CSV instead of computing them
    #[arg(long)]
    priors: Option<PathBuf>,
}

impl PriorArgs {
    fn obtain(&self, graph: &RatingGraph64) -> Result<BehaviorPriors64, CliError> {
        if let Some(path) = &self.priors {
            return Ok(behavior::load_priors(path, graph)?);
        }
        if self.bins == 0 {
            return Err(CliError::Usage("--bins must be >= 1".into()));
        }
        if self.smoothing.is_nan() || self.smoothing <= 0.0 {
            return Err(CliError::Usage("--smoothing must be positive".into()));
        }
        Ok(behavior::compute_behavior_priors(graph, self.bins, self.smoothing))
    }
}

#[derive(Args)]
struct HyperArgs {
    /// Cold-start prior strength on user fairness
    #[arg(long, default_value_t = 0.0)]
    alpha1: f64,
    /// Behavioral prior strength on user fairness
    #[arg(long, default_value_t = 0.0)]
    alpha2: f64,
    /// Cold-start prior strength on product goodness
    #[arg(long, default_value_t = 0.0)]
    beta1: f64,
    /// Behavioral prior strength on product goodness
    #[arg(long, default_value_t = 0.0)]
    beta2: f64,
}

impl HyperArgs {
    fn params(&self) -> Result<HyperParams64, CliError> {
        engine::HyperParams::new(self.alpha1, self.alpha2, self.beta1, self.beta2)
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Convergence tolerance on the max per-iteration score change
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Iteration cap; defaults to the theoretical bound for epsilon
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct JobsArg {
    /// Worker threads for grid runs (defaults to all cores)
    #[arg(long, env = "FAIRJUDGE_JOBS")]
    jobs: Option<usize>,
}

impl JobsArg {
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
        match self.jobs {
            None => Ok(f()),
            Some(0) => Err(CliError::Usage("--jobs must be >= 1".into())),
            Some(n) => Ok(rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build a {n}-thread pool: {e}")))?
                .install(f)),
        }
    }
}

fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

#[derive(Args)]
struct PriorsCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Destination CSV (entity_id,side,normality); stdout if omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

fn cmd_priors(cmd: PriorsCmd) -> CliResult {
    let graph = cmd.input.load()?;
    let priors = cmd.prior.obtain(&graph)?;
    priors.write(&graph, out_writer(cmd.output.as_deref())?)?;
    Ok(())
}

#[derive(Args)]
struct ScoreCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Destination for entity scores (entity_id,side,score); stdout if omitted
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write per-rating reliabilities (user_id,product_id,reliability)
    #[arg(long)]
    reliability_output: Option<PathBuf>,
}

fn cmd_score(cmd: ScoreCmd) -> CliResult {
    let graph = cmd.input.load()?;
    let priors = cmd.prior.obtain(&graph)?;
    let hp = cmd.hyper.params()?;
    let (state, report) = engine::run_observed(
        &graph,
        &priors,
        &hp,
        cmd.solver.epsilon,
        cmd.solver.max_iter,
        |t, err, _| eprintln!("iteration {t}: error {err:e}"),
    )?;
    if !report.converged {
        return Err(CliError::NonConvergence(format!(
            "no convergence after {} iterations (error {:e})",
            report.iterations,
            report.error_trace.last().copied().unwrap_or(f64::NAN)
        )));
    }
    eprintln!("converged after {} iterations", report.iterations);
    engine::write_scores(&graph, &state, out_writer(cmd.output.as_deref())?)?;
    if let Some(path) = &cmd.reliability_output {
        engine::write_reliabilities(&graph, &state, out_writer(Some(path))?)?;
    }
    Ok(())
}

#[derive(Args)]
struct EnsembleCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Grid upper bound: every integer 4-tuple in [0, param-max]^4
    #[arg(long, default_value_t = DEFAULT_PARAM_MAX)]
    param_max: u32,
    #[command(flatten)]
    jobs: JobsArg,
    /// Destination for averaged entity scores; stdout if omitted
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write averaged per-rating reliabilities
    #[arg(long)]
    reliability_output: Option<PathBuf>,
}

fn run_grid(
    graph: &RatingGraph64,
    priors: &BehaviorPriors64,
    param_max: u32,
    epsilon: f64,
    jobs: &JobsArg,
) -> Result<(ScoreState64, ensemble::FeatureMatrix<f64>), CliError> {
    let grid = ensemble::build_grid::<f64>(param_max);
    let total = grid.len();
    eprintln!("running {total} parameter combinations");
    let result = jobs.install(|| {
        ensemble::run_ensemble_observed(graph, priors, &grid, epsilon, |i, report| {
            eprintln!(
                "combo {}/{total} ({}): {} iterations",
                i + 1,
                grid.combos()[i].label(),
                report.iterations
            )
        })
    })?;
    Ok(result?)
}

fn cmd_ensemble(cmd: EnsembleCmd) -> CliResult {
    let graph = cmd.input.load()?;
    let priors = cmd.prior.obtain(&graph)?;
    let (avg, _) = run_grid(&graph, &priors, cmd.param_max, cmd.solver.epsilon, &cmd.jobs)?;
    engine::write_scores(&graph, &avg, out_writer(cmd.output.as_deref())?)?;
    if let Some(path) = &cmd.reliability_output {
        engine::write_reliabilities(&graph, &avg, out_writer(Some(path))?)?;
    }
    Ok(())
}

#[derive(Args)]
struct FeaturesCmd {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Grid upper bound: every integer 4-tuple in [0, param-max]^4
    #[arg(long, default_value_t = DEFAULT_PARAM_MAX)]
    param_max: u32,
    #[command(flatten)]
    jobs: JobsArg,
    /// Labels CSV; adds a trailing label column to the export
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Destination feature CSV; stdout if omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

fn cmd_features(cmd: FeaturesCmd) -> CliResult {
    let graph = cmd.input.load()?;
    let priors = cmd.prior.obtain(&graph)?;
    let labels = cmd.labels.as_deref().map(graph::load_labels).transpose()?;
    let (_, matrix) = run_grid(&graph, &priors, cmd.param_max, cmd.solver.epsilon, &cmd.jobs)?;
    ensemble::export_features(&matrix, &graph, labels.as_ref(), out_writer(cmd.output.as_deref())?)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PositiveClass {
    Unfair,
    Fair,
}

impl From<PositiveClass> for Label {
    fn from(p: PositiveClass) -> Label {
        match p {
            PositiveClass::Unfair => Label::Unfair,
            PositiveClass::Fair => Label::Fair,
        }
    }
}

#[derive(Args)]
struct EvalCmd {
    /// Entity score CSV produced by `score` or `ensemble`
    #[arg(long)]
    scores: PathBuf,
    /// Ground-truth labels CSV (user_id,label)
    #[arg(long)]
    labels: PathBuf,
    /// Class treated as positive by both metrics
    #[arg(long, value_enum, default_value_t = PositiveClass::Unfair)]
    positive: PositiveClass,
    /// Also write the top-k most suspicious users
    #[arg(long)]
    top_k: Option<usize>,
    /// Destination for the top-k report (rank,user_id,fairness)
    #[arg(long, requires = "top_k")]
    report: Option<PathBuf>,
    /// Per-rating reliability CSV for the distribution report
    #[arg(long)]
    reliability: Option<PathBuf>,
    /// Destination for the fair-vs-unfair reliability histogram
    #[arg(long, requires = "reliability")]
    dist_output: Option<PathBuf>,
    /// Histogram bins for the distribution report
    #[arg(long, default_value_t = 20)]
    dist_bins: usize,
}

fn cmd_eval(cmd: EvalCmd) -> CliResult {
    let scores: RankedScores<f64> = eval::load_user_scores(&cmd.scores)?;
    let labels = graph::load_labels(&cmd.labels)?;
    let positive: Label = cmd.positive.into();
    let ap = eval::average_precision(&scores, &labels, positive)?;
    let auc = eval::roc_auc(&scores, &labels, positive)?;
    println!("AP={ap:?} AUC={auc:?}");

    if let Some(k) = cmd.top_k {
        let report = eval::rank_report_from_scores(&scores, k)?;
        eval::write_rank_report(&report, out_writer(cmd.report.as_deref())?)?;
    }
    if let Some(path) = &cmd.reliability {
        let rows = eval::load_edge_reliabilities::<f64>(path)?;
        let dist = eval::distribution_from_edge_scores(&rows, &labels, cmd.dist_bins)?;
        dist.write(out_writer(cmd.dist_output.as_deref())?)?;
    }
    Ok(())
}

#[derive(Args)]
struct GenCmd {
    /// Benign users
    #[arg(long, default_value_t = 1000)]
    users: usize,
    /// Products
    #[arg(long, default_value_t = 200)]
    products: usize,
    /// Benign ratings
    #[arg(long, default_value_t = 10_000)]
    edges: usize,
    /// RNG seed; generation is a pure function of it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shill accounts to plant (0 disables the attack)
    #[arg(long, default_value_t = 0)]
    shills: usize,
    /// Ratings per shill
    #[arg(long, default_value_t = 10)]
    edges_per_shill: usize,
    /// Fraction of each shill's ratings that mimic benign behavior
    #[arg(long, default_value_t = 0.0)]
    camouflage: f64,
    /// Seconds between consecutive attack ratings
    #[arg(long, default_value_t = synth::DEFAULT_BURST_GAP)]
    burst_gap: u64,
    /// Attack rating value: +1 boosts, -1 bad-mouths
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    attack_score: f64,
    /// Comma-separated target product ids; shills rate each other if omitted
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    /// Destination ratings CSV; stdout if omitted
    #[arg(long)]
    output: Option<PathBuf>,
    /// Destination labels CSV (fair benign users, unfair shills)
    #[arg(long)]
    labels_output: Option<PathBuf>,
}

fn cmd_gen(cmd: GenCmd) -> CliResult {
    let config = SynthConfig {
        n_users: cmd.users,
        n_products: cmd.products,
        n_edges: cmd.edges,
        seed: cmd.seed,
    };
    let (mut graph, mut labels) = synth::generate_random::<f64>(&config)?;
    if cmd.shills > 0 {
        let attack = AttackConfig {
            n_shills: cmd.shills,
            targets: match cmd.targets {
                Some(ids) => AttackTargets::Products(ids),
                None => AttackTargets::Mutual,
            },
            attack_score: cmd.attack_score,
            camouflage_fraction: cmd.camouflage,
            burst_gap: cmd.burst_gap,
            edges_per_shill: cmd.edges_per_shill,
        };
        (graph, labels) = synth::inject_fraud(&graph, &labels, &attack, cmd.seed.wrapping_add(1))?;
    }
    eprintln!(
        "generated {} users, {} products, {} ratings",
        graph.user_count(),
        graph.product_count(),
        graph.edge_count()
    );
    graph.write_ratings(out_writer(cmd.output.as_deref())?)?;
    if let Some(path) = &cmd.labels_output {
        labels.write(out_writer(Some(path))?)?;
    }
    Ok(())
}

#[derive(Args)]
struct BenchCmd {
    /// Comma-separated edge counts, ascending
    #[arg(long, value_delimiter = ',', default_value = "10000,20000,40000,80000")]
    sizes: Vec<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// RNG seed for the generated networks
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination CSV (edges,seconds,iterations); stdout if omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

fn cmd_bench(cmd: BenchCmd) -> CliResult {
    let hp = cmd.hyper.params()?;
    let rows = synth::benchmark_scaling(&cmd.sizes, &hp, cmd.solver.epsilon, cmd.seed)?;
    for r in &rows {
        eprintln!("{} edges: {:.3}s, {} iterations", r.edges, r.seconds, r.iterations);
    }
    synth::write_benchmark(&rows, out_writer(cmd.output.as_deref())?)?;
    Ok(())
}

pub fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Priors(cmd) => cmd_priors(cmd),
        Command::Score(cmd) => cmd_score(cmd),
        Command::Ensemble(cmd) => cmd_ensemble(cmd),
        Command::Features(cmd) => cmd_features(cmd),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::Gen(cmd) => cmd_gen(cmd),
        Command::Bench(cmd) => cmd_bench(cmd),
    }
}
