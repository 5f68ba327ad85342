//! Batch command-line front end.
//!
//! Every subcommand reads files or flags, runs one pipeline stage, and
//! prints JSON to stdout (CSV for bulk payloads). Stochastic commands take
//! a seed (flag, then the FACADE_BN_SEED environment variable, then 0) and
//! echo it in their output, so any run can be reproduced byte for byte.
//!
//! Exit codes: 0 success, 2 input/data error, 3 constraint or statistical
//! error, 64 usage error.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cpt::FittedNetwork;
use crate::dag::{
    initial_facade_model, parse_model_string, parse_model_string_lenient, Dag, DagConstraints,
    RandomDagConfig,
};
use crate::dataset::{load_csv, LoadedDataset, MissingPolicy};
use crate::error::Error;
use crate::independence::{arc_strength, ci_test, ArcStrengthReport, CiTestResult, TestKind};
use crate::inference::{forward_sample, query, Evidence, Posterior};
use crate::mcmc::{
    diagnostics_report, sample_posterior, ChainSet, CoefficientId, DiagnosticThresholds,
    DiagnosticsEntry, McmcConfig,
};
use crate::schema::Schema;
use crate::score::{bdeu_score, bic_score, score, ScoreReport, ScoreType};
use crate::search::{run_search, SearchResult};

#[derive(Parser)]
#[command(
    name = "facade-bn",
    version,
    about = "Discrete Bayesian-network toolkit: estimation, scoring, CI tests, structure search, queries, sampling, and MCMC diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CSV observation file against a schema
    Validate(ValidateArgs),
    /// Inspect schemas
    Schema(SchemaArgs),
    /// Parse, print, or randomly generate DAGs
    Dag(DagArgs),
    /// Score a model on data (BIC, BDeu, or log-likelihood)
    Score(ScoreArgs),
    /// Conditional-independence test between two variables
    Citest(CitestArgs),
    /// Per-arc strength (CI-test p-values) for a model
    ArcStrength(ArcStrengthArgs),
    /// Constrained random structure search with top-k selection
    Search(SearchArgs),
    /// Exact evidence query on a fitted model
    Query(QueryArgs),
    /// Fit a model by maximum likelihood and save the CPTs as JSON
    Fit(FitArgs),
    /// Forward-sample synthetic observations from a fitted model
    Simulate(SimulateArgs),
    /// Sample the CPT posterior and write traces plus diagnostics
    Mcmc(McmcArgs),
    /// Recompute diagnostics from stored traces
    McmcDiag(McmcDiagArgs),
    /// Run the whole analysis pipeline and emit one JSON report
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct DataOpts {
    /// CSV observation file
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON file (defaults to the built-in facade schema)
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Missing-cell policy
    #[arg(long, value_enum, default_value_t = MissingArg::Reject)]
    missing: MissingArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Reject,
    Drop,
}

impl From<MissingArg> for MissingPolicy {
    fn from(a: MissingArg) -> Self {
        match a {
            MissingArg::Reject => MissingPolicy::Reject,
            MissingArg::Drop => MissingPolicy::DropRow,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Mi,
    X2,
}

impl From<TestArg> for TestKind {
    fn from(a: TestArg) -> Self {
        match a {
            TestArg::Mi => TestKind::Mi,
            TestArg::X2 => TestKind::X2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Bic,
    Bdeu,
    Loglik,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataOpts,
}

#[derive(Args)]
struct SchemaArgs {
    #[command(subcommand)]
    action: SchemaAction,
}

#[derive(Subcommand)]
enum SchemaAction {
    /// Print the schema as JSON
    Dump {
        /// Schema JSON file (defaults to the built-in facade schema)
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DagArgs {
    #[command(subcommand)]
    action: DagAction,
}

#[derive(Subcommand)]
enum DagAction {
    /// Parse a model string and report its arcs
    Parse {
        #[arg(long)]
        model: String,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Accept the documented MOD alias for MD
        #[arg(long)]
        lenient: bool,
    },
    /// Print the canonical form of a model string
    Print {
        #[arg(long)]
        model: String,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        lenient: bool,
    },
    /// Generate a random constraint-satisfying DAG
    Random {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[command(flatten)]
        constraints: ConstraintOpts,
    },
}

#[derive(Args)]
struct ConstraintOpts {
    /// Minimum number of arcs
    #[arg(long, default_value_t = 5)]
    min_arcs: usize,
    /// Sink variable that must receive arcs and emit none
    #[arg(long, default_value = "CE")]
    sink: String,
    /// Probability of each forward arc when generating
    #[arg(long, default_value_t = 0.25)]
    arc_prob: f64,
    /// Rejection-sampling budget per draw
    #[arg(long, default_value_t = 10_000)]
    max_tries: usize,
}

impl ConstraintOpts {
    fn constraints(&self) -> DagConstraints {
        DagConstraints {
            sink_variable: self.sink.clone(),
            min_arcs: self.min_arcs,
            min_sink_in_degree: 1,
            forbid_sink_out_arcs: true,
        }
    }

    fn generator(&self) -> RandomDagConfig {
        RandomDagConfig {
            arc_probability: self.arc_prob,
            max_tries: self.max_tries,
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    model: String,
    #[arg(long)]
    lenient: bool,
    #[arg(long = "type", value_enum, default_value_t = ScoreArg::Bic)]
    score_type: ScoreArg,
    /// Imaginary sample size for BDeu
    #[arg(long, default_value_t = 1.0)]
    iss: f64,
}

#[derive(Args)]
struct CitestArgs {
    #[command(flatten)]
    data: DataOpts,
    /// First variable
    x: String,
    /// Second variable
    y: String,
    /// Conditioning variables, comma-separated
    #[arg(long, value_delimiter = ',')]
    given: Vec<String>,
    #[arg(long, value_enum)]
    test: TestArg,
}

#[derive(Args)]
struct ArcStrengthArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    model: String,
    #[arg(long)]
    lenient: bool,
    #[arg(long, value_enum)]
    criterion: TestArg,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataOpts,
    /// Number of candidate DAGs to generate
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// How many top-ranked models to report
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    constraints: ConstraintOpts,
    #[arg(long = "score", value_enum, default_value_t = ScoreArg::Bic)]
    score_type: ScoreArg,
    #[arg(long, default_value_t = 1.0)]
    iss: f64,
    /// Also write the full scored candidate pool as CSV
    #[arg(long)]
    emit_pool: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    model: String,
    #[arg(long)]
    lenient: bool,
    /// Target variable
    #[arg(long)]
    target: String,
    /// Evidence as VAR=LEVEL[,VAR=LEVEL...]
    #[arg(long, default_value = "")]
    evidence: String,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    model: String,
    #[arg(long)]
    lenient: bool,
    /// Output path for the fitted-network JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Fitted-network JSON produced by `fit`
    #[arg(long, required_unless_present = "data")]
    params: Option<PathBuf>,
    /// Alternatively, fit this CSV on the fly
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MissingArg::Reject)]
    missing: MissingArg,
    /// Model string (required with --data; cross-checked against --params)
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    lenient: bool,
    /// Rows to sample
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample through unsupported CPT rows using their uniform placeholder
    #[arg(long)]
    allow_unsupported: bool,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct McmcArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    model: String,
    #[arg(long)]
    lenient: bool,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Post-warmup iterations kept per chain
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    /// Warmup iterations per chain (dropped)
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Prior imaginary sample size
    #[arg(long, default_value_t = 1.0)]
    iss: f64,
    /// Also trace every CPT cell probability
    #[arg(long)]
    track_cells: bool,
    /// Directory for trace CSVs, the manifest, and diagnostics JSON
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1.1)]
    psrf_max: f64,
    #[arg(long, default_value_t = 400.0)]
    ess_min: f64,
}

#[derive(Args)]
struct McmcDiagArgs {
    /// Directory written by `mcmc`
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value_t = 1.1)]
    psrf_max: f64,
    #[arg(long, default_value_t = 400.0)]
    ess_min: f64,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    data: DataOpts,
    #[arg(long)]
    seed: Option<u64>,
    /// Candidate pool size
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Top models to keep
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value_t = 0.25)]
    arc_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    iss: f64,
    #[arg(long, default_value_t = 4)]
    mcmc_chains: usize,
    #[arg(long, default_value_t = 5000)]
    mcmc_iters: usize,
    #[arg(long, default_value_t = 1000)]
    mcmc_warmup: usize,
    /// Write the report here as well as to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return match kind {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(StageError { stage, source }) => {
            eprintln!("error in stage {stage:?}: {source}");
            source.exit_code()
        }
    }
}

/// An error annotated with the pipeline stage it came from.
struct StageError {
    stage: &'static str,
    source: Error,
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T> StageExt<T> for Result<T, Error> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

fn dispatch(command: Command) -> Result<(), StageError> {
    match command {
        Command::Validate(args) => cmd_validate(args),
        Command::Schema(args) => cmd_schema(args),
        Command::Dag(args) => cmd_dag(args),
        Command::Score(args) => cmd_score(args),
        Command::Citest(args) => cmd_citest(args),
        Command::ArcStrength(args) => cmd_arc_strength(args),
        Command::Search(args) => cmd_search(args),
        Command::Query(args) => cmd_query(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mcmc(args) => cmd_mcmc(args),
        Command::McmcDiag(args) => cmd_mcmc_diag(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("FACADE_BN_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn load_schema(path: &Option<PathBuf>) -> Result<Schema, Error> {
    match path {
        None => Ok(Schema::facade()),
        Some(p) => Schema::from_json(&std::fs::read_to_string(p)?),
    }
}

fn load_data(opts: &DataOpts) -> Result<(Schema, LoadedDataset), Error> {
    let schema = load_schema(&opts.schema)?;
    let text = std::fs::read_to_string(&opts.data)?;
    let loaded = load_csv(&text, &schema, opts.missing.into())?;
    Ok((schema, loaded))
}

fn parse_model(text: &str, schema: &Schema, lenient: bool) -> Result<Dag, Error> {
    if lenient {
        parse_model_string_lenient(text, schema)
    } else {
        parse_model_string(text, schema)
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serialization cannot fail")
    );
}

fn cmd_validate(args: ValidateArgs) -> Result<(), StageError> {
    #[derive(Serialize)]
    struct ValidateReport {
        valid: bool,
        n: usize,
        variables: usize,
        dropped_rows: usize,
        warnings: Vec<String>,
    }
    let (schema, loaded) = load_data(&args.data).stage("load")?;
    print_json(&ValidateReport {
        valid: true,
        n: loaded.dataset.n(),
        variables: schema.len(),
        dropped_rows: loaded.dropped_rows,
        warnings: loaded.warnings,
    });
    Ok(())
}

fn cmd_schema(args: SchemaArgs) -> Result<(), StageError> {
    match args.action {
        SchemaAction::Dump { schema } => {
            let schema = load_schema(&schema).stage("schema")?;
            println!("{}", schema.to_json());
        }
    }
    Ok(())
}

fn cmd_dag(args: DagArgs) -> Result<(), StageError> {
    #[derive(Serialize)]
    struct DagReport {
        model_string: String,
        nodes: usize,
        arc_count: usize,
        arcs: Vec<(String, String)>,
        #[serde(skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    }
    let report = |dag: &Dag, seed: Option<u64>| DagReport {
        model_string: dag.to_model_string(),
        nodes: dag.node_count(),
        arc_count: dag.arc_count(),
        arcs: dag.arc_names(),
        seed,
    };
    match args.action {
        DagAction::Parse {
            model,
            schema,
            lenient,
        } => {
            let schema = load_schema(&schema).stage("schema")?;
            let dag = parse_model(&model, &schema, lenient).stage("parse")?;
            print_json(&report(&dag, None));
        }
        DagAction::Print {
            model,
            schema,
            lenient,
        } => {
            let schema = load_schema(&schema).stage("schema")?;
            let dag = parse_model(&model, &schema, lenient).stage("parse")?;
            println!("{}", dag.to_model_string());
        }
        DagAction::Random {
            seed,
            schema,
            constraints,
        } => {
            let schema = load_schema(&schema).stage("schema")?;
            let seed = resolve_seed(seed);
            let dag = crate::dag::random_dag(
                &schema,
                &constraints.constraints(),
                &constraints.generator(),
                seed,
            )
            .stage("generate")?;
            print_json(&report(&dag, Some(seed)));
        }
    }
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), StageError> {
    let (schema, loaded) = load_data(&args.data).stage("load")?;
    let dag = parse_model(&args.model, &schema, args.lenient).stage("parse")?;
    let score_type = match args.score_type {
        ScoreArg::Bic => ScoreType::Bic,
        ScoreArg::Loglik => ScoreType::Loglik,
        ScoreArg::Bdeu => ScoreType::Bdeu { iss: args.iss },
    };
    let report = score(&dag, &loaded.dataset, score_type).stage("score")?;
    print_json(&report);
    Ok(())
}

fn cmd_citest(args: CitestArgs) -> Result<(), StageError> {
    let (_, loaded) = load_data(&args.data).stage("load")?;
    let given: Vec<&str> = args.given.iter().map(|s| s.as_str()).collect();
    let result =
        ci_test(&loaded.dataset, &args.x, &args.y, &given, args.test.into()).stage("citest")?;
    print_json(&result);
    Ok(())
}

fn cmd_arc_strength(args: ArcStrengthArgs) -> Result<(), StageError> {
    let (schema, loaded) = load_data(&args.data).stage("load")?;
    let dag = parse_model(&args.model, &schema, args.lenient).stage("parse")?;
    let report =
        arc_strength(&dag, &loaded.dataset, args.criterion.into()).stage("arc-strength")?;
    print_json(&report);
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<(), StageError> {
    let (_, loaded) = load_data(&args.data).stage("load")?;
    let seed = resolve_seed(args.seed);
    let score_type = match args.score_type {
        ScoreArg::Bic => ScoreType::Bic,
        ScoreArg::Loglik => ScoreType::Loglik,
        ScoreArg::Bdeu => ScoreType::Bdeu { iss: args.iss },
    };
    let (result, pool) = run_search(
        &loaded.dataset,
        &args.constraints.constraints(),
        &args.constraints.generator(),
        args.n,
        args.top,
        seed,
        score_type,
    )
    .stage("search")?;
    if let Some(path) = &args.emit_pool {
        let mut out = String::from("model_string,score\n");
        for (model, score) in &pool {
            out.push_str(&format!("{model},{score}\n"));
        }
        std::fs::write(path, out)
            .map_err(Error::from)
            .stage("emit-pool")?;
    }
    print_json(&result);
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<(), StageError> {
    #[derive(Serialize)]
    struct QueryReport {
        model_string: String,
        evidence: String,
        #[serde(flatten)]
        posterior: Posterior,
    }
    let (schema, loaded) = load_data(&args.data).stage("load")?;
    let dag = parse_model(&args.model, &schema, args.lenient).stage("parse")?;
    let fitted = FittedNetwork::fit_mle(&dag, &loaded.dataset).stage("fit")?;
    let evidence = Evidence::parse(&schema, &args.evidence).stage("evidence")?;
    let posterior = query(&fitted, &args.target, &evidence).stage("query")?;
    print_json(&QueryReport {
        model_string: dag.to_model_string(),
        evidence: args.evidence,
        posterior,
    });
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), StageError> {
    let (schema, loaded) = load_data(&args.data).stage("load")?;
    let dag = parse_model(&args.model, &schema, args.lenient).stage("parse")?;
    let fitted = FittedNetwork::fit_mle(&dag, &loaded.dataset).stage("fit")?;
    std::fs::write(&args.out, fitted.to_json())
        .map_err(Error::from)
        .stage("write")?;
    eprintln!("wrote fitted network to {}", args.out.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), StageError> {
    let schema = load_schema(&args.schema).stage("schema")?;
    let fitted = match (&args.params, &args.data) {
        (Some(params), _) => {
            let text = std::fs::read_to_string(params)
                .map_err(Error::from)
                .stage("load")?;
            let fitted = FittedNetwork::from_json(&text, &schema).stage("load")?;
            if let Some(model) = &args.model {
                let dag = parse_model(model, &schema, args.lenient).stage("parse")?;
                if dag != *fitted.dag() {
                    return Err(StageError {
                        stage: "load",
                        source: Error::SchemaMismatch(
                            "--model disagrees with the fitted network's structure".into(),
                        ),
                    });
                }
            }
            fitted
        }
        (None, Some(data)) => {
            let model = args.model.as_deref().ok_or(StageError {
                stage: "parse",
                source: Error::DomainError("--model is required with --data".into()),
            })?;
            let text = std::fs::read_to_string(data)
                .map_err(Error::from)
                .stage("load")?;
            let loaded = load_csv(&text, &schema, args.missing.into()).stage("load")?;
            let dag = parse_model(model, &schema, args.lenient).stage("parse")?;
            FittedNetwork::fit_mle(&dag, &loaded.dataset).stage("fit")?
        }
        (None, None) => unreachable!("clap enforces --params or --data"),
    };
    let seed = resolve_seed(args.seed);
    let sampled =
        forward_sample(&fitted, args.n, seed, args.allow_unsupported).stage("simulate")?;
    std::fs::write(&args.out, sampled.to_csv())
        .map_err(Error::from)
        .stage("write")?;
    eprintln!(
        "wrote {} sampled rows to {} (seed {seed})",
        sampled.n(),
        args.out.display()
    );
    Ok(())
}

/// Manifest connecting trace files in an output directory to coefficients.
#[derive(Serialize, Deserialize)]
struct TraceManifest {
    model_string: String,
    seed: u64,
    chains: usize,
    iters: usize,
    warmup: usize,
    coefficients: Vec<TraceManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct TraceManifestEntry {
    label: String,
    child: String,
    file: String,
}

fn cmd_mcmc(args: McmcArgs) -> Result<(), StageError> {
    let (schema, loaded) = load_data(&args.data).stage("load")?;
    let dag = parse_model(&args.model, &schema, args.lenient).stage("parse")?;
    let seed = resolve_seed(args.seed);
    let config = McmcConfig {
        chains: args.chains,
        iters: args.iters,
        warmup: args.warmup,
        seed,
        prior_iss: args.iss,
        track_cells: args.track_cells,
    };
    let sample = sample_posterior(&dag, &loaded.dataset, &config).stage("mcmc")?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(Error::from)
        .stage("write")?;
    let mut manifest = TraceManifest {
        model_string: dag.to_model_string(),
        seed,
        chains: args.chains,
        iters: args.iters,
        warmup: args.warmup,
        coefficients: Vec::new(),
    };
    for (i, set) in sample.coefficients.iter().enumerate() {
        let file = format!("trace_{i:03}.csv");
        write_trace_csv(&args.out_dir.join(&file), set).stage("write")?;
        manifest.coefficients.push(TraceManifestEntry {
            label: set.coefficient.label.clone(),
            child: set.coefficient.child.clone(),
            file,
        });
    }
    std::fs::write(
        args.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail"),
    )
    .map_err(Error::from)
    .stage("write")?;

    let thresholds = DiagnosticThresholds {
        psrf_max: args.psrf_max,
        ess_min: args.ess_min,
    };
    let entries = diagnostics_report(&sample.coefficients, &thresholds);
    let report = McmcReport::new(&manifest, thresholds, entries);
    std::fs::write(
        args.out_dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&report).expect("report serialization cannot fail"),
    )
    .map_err(Error::from)
    .stage("write")?;
    print_json(&report);
    Ok(())
}

#[derive(Serialize)]
struct McmcReport {
    model_string: String,
    seed: u64,
    chains: usize,
    iters: usize,
    warmup: usize,
    thresholds: DiagnosticThresholds,
    all_pass: bool,
    coefficients: Vec<DiagnosticsEntry>,
}

impl McmcReport {
    fn new(
        manifest: &TraceManifest,
        thresholds: DiagnosticThresholds,
        coefficients: Vec<DiagnosticsEntry>,
    ) -> McmcReport {
        McmcReport {
            model_string: manifest.model_string.clone(),
            seed: manifest.seed,
            chains: manifest.chains,
            iters: manifest.iters,
            warmup: manifest.warmup,
            thresholds,
            all_pass: coefficients.iter().all(|e| e.pass),
            coefficients,
        }
    }
}

/// Trace CSV format: `chain,iteration,value,running_mean`, one block per
/// chain, iterations numbered after warmup.
fn write_trace_csv(path: &Path, set: &ChainSet) -> Result<(), Error> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "chain,iteration,value,running_mean")?;
    for (chain_idx, chain) in set.chains.iter().enumerate() {
        let mut running = 0.0;
        for (t, &value) in chain.iter().enumerate() {
            running += value;
            writeln!(out, "{chain_idx},{t},{value},{}", running / (t + 1) as f64)?;
        }
    }
    Ok(())
}

fn read_trace_csv(path: &Path, chains: usize) -> Result<Vec<Vec<f64>>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); chains];
    for record in reader.records() {
        let record = record?;
        let chain: usize = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::DomainError(format!("bad chain field in {}", path.display())))?;
        let value: f64 = record
            .get(2)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::DomainError(format!("bad value field in {}", path.display())))?;
        if chain >= chains {
            return Err(Error::DomainError(format!(
                "chain index {chain} out of range in {}",
                path.display()
            )));
        }
        out[chain].push(value);
    }
    Ok(out)
}

fn cmd_mcmc_diag(args: McmcDiagArgs) -> Result<(), StageError> {
    let manifest_text = std::fs::read_to_string(args.traces.join("manifest.json"))
        .map_err(Error::from)
        .stage("load")?;
    let manifest: TraceManifest = serde_json::from_str(&manifest_text)
        .map_err(Error::from)
        .stage("load")?;
    let mut chain_sets = Vec::with_capacity(manifest.coefficients.len());
    for entry in &manifest.coefficients {
        let chains =
            read_trace_csv(&args.traces.join(&entry.file), manifest.chains).stage("load")?;
        chain_sets.push(ChainSet {
            coefficient: CoefficientId {
                child: entry.child.clone(),
                label: entry.label.clone(),
            },
            chains,
            warmup_dropped: manifest.warmup,
            seed: manifest.seed,
        });
    }
    let thresholds = DiagnosticThresholds {
        psrf_max: args.psrf_max,
        ess_min: args.ess_min,
    };
    let entries = diagnostics_report(&chain_sets, &thresholds);
    print_json(&McmcReport::new(&manifest, thresholds, entries));
    Ok(())
}

/// The one-shot reproduction driver: initial-model scores and arc strengths,
/// constrained search, CI tests on the top models' sink-adjacent arcs,
/// evidence queries on the best model, and MCMC diagnostics on it.
#[derive(Serialize)]
struct PipelineReport {
    seed: u64,
    n: usize,
    initial_model: InitialModelStage,
    search: SearchResult,
    ci_tests: Vec<CiTestStage>,
    queries: Vec<QueryStage>,
    mcmc: McmcStage,
}

#[derive(Serialize)]
struct InitialModelStage {
    model_string: String,
    bic: ScoreReport,
    bdeu: ScoreReport,
    arc_strength_x2: ArcStrengthReport,
    arc_strength_mi: ArcStrengthReport,
}

#[derive(Serialize)]
struct CiTestStage {
    model_string: String,
    rank: usize,
    tests: Vec<SinkArcTests>,
}

#[derive(Serialize)]
struct SinkArcTests {
    x: String,
    y: String,
    given: Vec<String>,
    mi: CiTestResult,
    x2: CiTestResult,
}

#[derive(Serialize)]
struct QueryStage {
    evidence: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    posterior: Option<Posterior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct McmcStage {
    model_string: String,
    chains: usize,
    iters: usize,
    warmup: usize,
    thresholds: DiagnosticThresholds,
    all_pass: bool,
    coefficients: Vec<DiagnosticsEntry>,
}

fn cmd_pipeline(args: PipelineArgs) -> Result<(), StageError> {
    let (schema, loaded) = load_data(&args.data).stage("load")?;
    let data = &loaded.dataset;
    let seed = resolve_seed(args.seed);

    if schema != Schema::facade() {
        return Err(StageError {
            stage: "initial-score",
            source: Error::SchemaMismatch(
                "the pipeline's initial model is defined on the facade schema".into(),
            ),
        });
    }

    // Stage 1-2: initial model scores and arc strengths.
    let initial = initial_facade_model();
    let initial_stage = InitialModelStage {
        model_string: initial.to_model_string(),
        bic: bic_score(&initial, data).stage("initial-score")?,
        bdeu: bdeu_score(&initial, data, args.iss).stage("initial-score")?,
        arc_strength_x2: arc_strength(&initial, data, TestKind::X2).stage("arc-strength")?,
        arc_strength_mi: arc_strength(&initial, data, TestKind::Mi).stage("arc-strength")?,
    };

    // Stage 3: constrained random search.
    let constraints = DagConstraints::default();
    let generator = RandomDagConfig {
        arc_probability: args.arc_prob,
        ..RandomDagConfig::default()
    };
    let (search_result, _pool) = run_search(
        data,
        &constraints,
        &generator,
        args.n,
        args.top,
        seed,
        ScoreType::Bic,
    )
    .stage("search")?;

    // Stage 4: CI tests between the sink and each of its parents in the top
    // models, conditioning on the parent's own parents.
    let sink = constraints.sink_variable.as_str();
    let mut ci_tests = Vec::new();
    for model in &search_result.top {
        let dag = parse_model_string(&model.model_string, &schema).stage("citest")?;
        let sink_idx = schema.require(sink).stage("citest")?;
        let mut tests = Vec::new();
        for &parent in dag.parent_indices(sink_idx) {
            let parent_name = schema.variable(parent).name();
            let grandparents: Vec<&str> = dag
                .parent_indices(parent)
                .iter()
                .map(|&g| schema.variable(g).name())
                .collect();
            tests.push(SinkArcTests {
                x: sink.to_string(),
                y: parent_name.to_string(),
                given: grandparents.iter().map(|s| s.to_string()).collect(),
                mi: ci_test(data, sink, parent_name, &grandparents, TestKind::Mi)
                    .stage("citest")?,
                x2: ci_test(data, sink, parent_name, &grandparents, TestKind::X2)
                    .stage("citest")?,
            });
        }
        ci_tests.push(CiTestStage {
            model_string: model.model_string.clone(),
            rank: model.rank,
            tests,
        });
    }

    // Stage 5: evidence queries on the best model, sweeping the levels of
    // the decoration and roof variables.
    let best = search_result
        .top
        .first()
        .ok_or(StageError {
            stage: "query",
            source: Error::NoData("search returned no models".into()),
        })?
        .model_string
        .clone();
    let best_dag = parse_model_string(&best, &schema).stage("query")?;
    let fitted = FittedNetwork::fit_mle(&best_dag, data).stage("query")?;
    let mut queries = Vec::new();
    for evidence_var in ["DC", "RF"] {
        let vi = schema.require(evidence_var).stage("query")?;
        for level in schema.variable(vi).levels() {
            let text = format!("{evidence_var}={level}");
            let evidence = Evidence::parse(&schema, &text).stage("query")?;
            match query(&fitted, sink, &evidence) {
                Ok(posterior) => queries.push(QueryStage {
                    evidence: text,
                    posterior: Some(posterior),
                    error: None,
                }),
                Err(Error::ZeroProbabilityEvidence) => queries.push(QueryStage {
                    evidence: text,
                    posterior: None,
                    error: Some(Error::ZeroProbabilityEvidence.to_string()),
                }),
                Err(e) => {
                    return Err(StageError {
                        stage: "query",
                        source: e,
                    })
                }
            }
        }
    }

    // Stage 6: MCMC diagnostics on the best model.
    let mcmc_config = McmcConfig {
        chains: args.mcmc_chains,
        iters: args.mcmc_iters,
        warmup: args.mcmc_warmup,
        seed,
        prior_iss: args.iss,
        track_cells: false,
    };
    let sample = sample_posterior(&best_dag, data, &mcmc_config).stage("mcmc")?;
    let thresholds = DiagnosticThresholds::default();
    let entries = diagnostics_report(&sample.coefficients, &thresholds);
    let mcmc_stage = McmcStage {
        model_string: best,
        chains: mcmc_config.chains,
        iters: mcmc_config.iters,
        warmup: mcmc_config.warmup,
        thresholds,
        all_pass: entries.iter().all(|e| e.pass),
        coefficients: entries,
    };

    let report = PipelineReport {
        seed,
        n: data.n(),
        initial_model: initial_stage,
        search: search_result,
        ci_tests,
        queries,
        mcmc: mcmc_stage,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
    if let Some(path) = &args.out {
        std::fs::write(path, &text)
            .map_err(Error::from)
            .stage("write")?;
    }
    println!("{text}");
    Ok(())
}
