use std::fs;
use std::io::{self, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use situated_rec::backends::server;
use situated_rec::backends::{
    MockBackend, MockUserConfig, PolicyBackend, RemoteBackend, RemoteBackendConfig, ENDPOINT_ENV,
};
use situated_rec::catalog::{build_profile, load_environment, Environment};
use situated_rec::dialogue::StateSchema;
use situated_rec::evaluation::MetricReport;
use situated_rec::harness::pipeline::{
    action_space_for, build_grounder, corpus_backend, evaluate_corpus, simulate_benchmark,
    DialogueRun, Engine,
};
use situated_rec::harness::{
    balance_split, generate_world, ingest_dataset, run_chat, DialogueSession, GroundMode,
    PipelineConfig, SplitRatio, SyntheticWorldConfig,
};
use situated_rec::retrieval::{
    grad_check_fixture, reranker_grad_check, separable_examples, train_reranker, HashingEmbedder,
    RerankTrainingExample, RerankerParams, TrainingConfig, VectorIndex,
};

#[derive(Parser)]
#[command(
    name = "srec",
    version,
    about = "Situated conversational recommendation engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print its statistics.
    Ingest(IngestArgs),
    /// Build scene profiles and the profile embedding index.
    Index(IndexArgs),
    /// Train the profile reranker.
    TrainReranker(TrainArgs),
    /// Replay a corpus and report metrics.
    Evaluate(EvaluateArgs),
    /// Run the synthetic benchmark.
    Simulate(SimulateArgs),
    /// Interactive session over an environment.
    Chat(ChatArgs),
    /// Compare reranker gradients with finite differences.
    GradCheck(GradCheckArgs),
    /// Serve the mock backend over HTTP.
    ServeMock(ServeArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Directory for report files.
    #[arg(long, default_value = "srec-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Corpus directory, or environment file followed by dialogue files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct IndexArgs {
    env: PathBuf,
    #[arg(long, default_value_t = 64)]
    dimension: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON array of training examples; the built-in separable set when omitted.
    examples: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    dimension: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroundArg {
    Gold,
    Predicted,
}

impl From<GroundArg> for GroundMode {
    fn from(g: GroundArg) -> Self {
        match g {
            GroundArg::Gold => GroundMode::Gold,
            GroundArg::Predicted => GroundMode::Predicted,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Items recommended per turn.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Coarse retrieval cut.
    #[arg(long = "N", default_value_t = 10)]
    n: usize,
    /// Transition decision threshold.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Per-turn likelihood weight.
    #[arg(long, default_value_t = 1.0)]
    discount: f64,
    #[arg(long, default_value_t = 64)]
    dimension: usize,
}

impl PipelineArgs {
    fn config(&self, ground: GroundMode) -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.rec.k = self.k;
        c.rec.discount = self.discount;
        c.retrieval.n = self.n;
        c.retrieval.dimension = self.dimension;
        c.tau = self.tau;
        c.ground = ground;
        c
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
    /// Transition to non-transition dialogue ratio.
    #[arg(long, default_value = "1:1")]
    split_ratio: SplitRatio,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scene the sessions follow for the main report; both are always written.
    #[arg(long, value_enum, default_value_t = GroundArg::Predicted)]
    ground: GroundArg,
    /// Rationality of the simulated user.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Trained reranker parameters; identity when omitted.
    #[arg(long)]
    reranker: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 4)]
    scenes: usize,
    #[arg(long, default_value_t = 10)]
    items: usize,
    #[arg(long, default_value_t = 4)]
    attributes: usize,
    #[arg(long, default_value_t = 5)]
    values: usize,
    #[arg(long, default_value_t = 6)]
    turns: usize,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    transition_rate: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Remote,
}

#[derive(Args)]
struct ChatArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// Environment file; a synthetic world when omitted.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Starting scene; the first scene when omitted.
    #[arg(long)]
    scene: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 20)]
    fixtures: u64,
    #[arg(long, default_value_t = 6)]
    dimension: usize,
    #[arg(long, default_value_t = 4)]
    examples: usize,
    #[arg(long, default_value_t = 5)]
    pool: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-6)]
    h: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8750")]
    addr: SocketAddr,
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_report(dir: &Path, stem: &str, report: &MetricReport) -> CliResult {
    write_file(dir, &format!("{stem}.json"), &report.to_json())?;
    write_file(dir, &format!("{stem}.txt"), &report.table())?;
    Ok(())
}

fn write_timings(dir: &Path, report: &MetricReport) -> CliResult {
    write_file(dir, "timings.json", &report.latency_json())?;
    write_file(dir, "timings.txt", &report.latency_table())
}

fn traces_jsonl(runs: &[DialogueRun]) -> String {
    let mut out = String::new();
    for run in runs {
        for turn in &run.turns {
            out.push_str(&serde_json::to_string(&turn.transition.trace).expect("serializable"));
            out.push('\n');
        }
    }
    out
}

fn mock_for(env: &Environment, beta: f64) -> MockBackend {
    MockBackend::new(MockUserConfig {
        beta,
        action_space: action_space_for(env),
        seed: 0,
    })
    .with_lexicon(env.scenes.iter().flat_map(|s| &s.items))
}

fn environment_or_world(path: Option<&Path>) -> Result<Environment, Box<dyn std::error::Error>> {
    Ok(match path {
        Some(p) => load_environment(p)?,
        None => generate_world(&SyntheticWorldConfig::default())?.environment,
    })
}

fn ingest(args: IngestArgs) -> CliResult {
    let corpus = ingest_dataset(&args.paths, &StateSchema::default())?;
    let stats = json(&corpus.stats());
    print!("{stats}");
    write_file(&args.out.out_dir, "stats.json", &stats)
}

fn index(args: IndexArgs) -> CliResult {
    let env = load_environment(&args.env)?;
    let embedder = HashingEmbedder::new(args.dimension);
    let profiles: Vec<_> = env
        .scenes
        .iter()
        .map(|s| build_profile(s, None).profile)
        .collect();
    let index = VectorIndex::build(
        &embedder,
        profiles
            .iter()
            .map(|p| (p.scene_id.as_str(), p.canonical_text.as_str())),
    )?;
    let mut cache = Vec::new();
    index.write_cache(&mut cache)?;
    write_file(&args.out.out_dir, "index.tsv", &String::from_utf8(cache)?)?;
    write_file(&args.out.out_dir, "profiles.json", &json(&profiles))?;
    println!(
        "indexed {} scene profile(s), dimension {}",
        index.len(),
        args.dimension
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainingSummary {
    examples: usize,
    initial_loss: f64,
    final_loss: f64,
    config: TrainingConfig,
}

fn train(args: TrainArgs) -> CliResult {
    let examples: Vec<RerankTrainingExample> = match &args.examples {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de)
                .map_err(|e| format!("{}: {}: {}", path.display(), e.path(), e.inner()))?
        }
        None => separable_examples(32, 5, args.seed),
    };
    let config = TrainingConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        seed: args.seed,
    };
    let outcome = train_reranker(&examples, &HashingEmbedder::new(args.dimension), &config)?;
    let summary = TrainingSummary {
        examples: examples.len(),
        initial_loss: outcome
            .loss_trace
            .first()
            .copied()
            .unwrap_or(outcome.final_loss),
        final_loss: outcome.final_loss,
        config,
    };
    let mut params = Vec::new();
    outcome.params.write(&mut params)?;
    write_file(
        &args.out.out_dir,
        "reranker.txt",
        &String::from_utf8(params)?,
    )?;
    write_file(
        &args.out.out_dir,
        "loss_trace.json",
        &json(&outcome.loss_trace),
    )?;
    let text = json(&summary);
    print!("{text}");
    write_file(&args.out.out_dir, "training.json", &text)
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    let schema = StateSchema::default();
    let corpus = ingest_dataset(&args.corpus, &schema)?;
    let split = balance_split(&corpus, args.split_ratio, args.seed)?;
    let subset = corpus.subset(&split.indices());
    let reranker = match &args.reranker {
        Some(p) => RerankerParams::read(BufReader::new(fs::File::open(p)?))?,
        None => RerankerParams::identity(args.pipeline.dimension),
    };
    let grounder = build_grounder(
        &subset.environment,
        Arc::new(HashingEmbedder::new(args.pipeline.dimension)),
        reranker,
    )?;
    let backend = corpus_backend(&subset, args.beta);
    let dir = &args.out.out_dir;
    write_file(dir, "split.json", &json(&split))?;
    let main: GroundMode = args.ground.into();
    for mode in [GroundMode::Predicted, GroundMode::Gold] {
        let config = args.pipeline.config(mode);
        let engine = Engine {
            backend: &backend,
            grounder: &grounder,
            config: &config,
            schema: &schema,
        };
        let outcome = evaluate_corpus(&subset, &engine)?;
        let name = match mode {
            GroundMode::Gold => "gold",
            GroundMode::Predicted => "predicted",
        };
        write_report(dir, &format!("report-{name}"), &outcome.report)?;
        write_file(
            dir,
            &format!("traces-{name}.jsonl"),
            &traces_jsonl(&outcome.runs),
        )?;
        if mode == main {
            write_report(dir, "report", &outcome.report)?;
            write_timings(dir, &outcome.report)?;
            print!("{}", outcome.report.table());
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> CliResult {
    let world_config = SyntheticWorldConfig {
        n_scenes: args.scenes,
        items_per_scene: args.items,
        n_attributes: args.attributes,
        values_per_attribute: args.values,
        n_turns: args.turns,
        episodes: args.episodes,
        beta: args.beta,
        transition_rate: args.transition_rate,
        seed: args.seed,
    };
    let world = generate_world(&world_config)?;
    let outcome = simulate_benchmark(&world, &args.pipeline.config(GroundMode::Predicted))?;
    let dir = &args.out.out_dir;
    write_report(dir, "report", &outcome.report)?;
    write_timings(dir, &outcome.report)?;
    write_file(
        dir,
        "world.json",
        &json(&serde_json::json!({
            "config": world_config,
            "digest": world.digest(),
        })),
    )?;
    print!("{}", outcome.report.table());
    println!(
        "oracle R@1 {:.4}, rank agreement {}/{}",
        outcome.oracle_r1,
        outcome.rank_agreement,
        outcome.episodes.len()
    );
    Ok(())
}

fn chat(args: ChatArgs) -> CliResult {
    let env = environment_or_world(args.env.as_deref())?;
    let backend: Box<dyn PolicyBackend> = match args.backend {
        BackendKind::Mock => Box::new(mock_for(&env, args.beta)),
        BackendKind::Remote => {
            let mut config = RemoteBackendConfig::default();
            if let Some(e) = args.endpoint {
                config.endpoint = e;
            }
            Box::new(RemoteBackend::new(config)?)
        }
    };
    let config = args.pipeline.config(GroundMode::Predicted);
    let grounder = build_grounder(
        &env,
        Arc::new(HashingEmbedder::new(config.retrieval.dimension)),
        RerankerParams::identity(config.retrieval.dimension),
    )?;
    let schema = StateSchema::default();
    let engine = Engine {
        backend: backend.as_ref(),
        grounder: &grounder,
        config: &config,
        schema: &schema,
    };
    let start = match args.scene {
        Some(s) => s,
        None => env.scenes[0].scene_id.clone(),
    };
    let mut session = DialogueSession::new("chat", &start, &grounder)?;
    run_chat(
        &engine,
        &mut session,
        io::stdin().lock(),
        io::stdout().lock(),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct GradCheckReport {
    h: f64,
    tolerance: f64,
    max_relative_error: Vec<f64>,
    passed: bool,
}

fn grad_check(args: GradCheckArgs) -> CliResult {
    let errors = (0..args.fixtures)
        .map(|seed| {
            let (params, examples) =
                grad_check_fixture(args.dimension, args.examples, args.pool, seed)?;
            reranker_grad_check(&params, &examples, args.h)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = GradCheckReport {
        h: args.h,
        tolerance: args.tolerance,
        passed: errors.iter().all(|e| *e < args.tolerance),
        max_relative_error: errors,
    };
    let text = json(&report);
    print!("{text}");
    write_file(&args.out.out_dir, "grad_check.json", &text)?;
    if !report.passed {
        return Err(format!("gradient check exceeded tolerance {}", args.tolerance).into());
    }
    Ok(())
}

fn serve_mock(args: ServeArgs) -> CliResult {
    let env = environment_or_world(args.env.as_deref())?;
    let handle = server::spawn(Arc::new(mock_for(&env, args.beta)), args.addr)?;
    println!("mock backend listening on {}", handle.endpoint());
    handle.join();
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Index(a) => index(a),
        Command::TrainReranker(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Simulate(a) => simulate(a),
        Command::Chat(a) => chat(a),
        Command::GradCheck(a) => grad_check(a),
        Command::ServeMock(a) => serve_mock(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
