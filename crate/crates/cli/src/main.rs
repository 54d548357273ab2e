//! `metaprov`: consistency checks, version trees, diffs, corpus generation
//! and evaluation from the command line.
//!
//! Exit codes: 0 success, 1 inconsistency over the fail-over threshold,
//! 2 input error (unreadable or malformed file, unknown id, bad flag),
//! 3 size guard (brute force asked for more versions than allowed).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metaprov::config::{CliConfig, OutputFormat};
use metaprov::consistency::{evaluate_many, CapabilityDb, FixtureEnvironment, InconsistencyReport};
use metaprov::embedding::{build_clusters, default_schemas, load_schemas, GroupSchema};
use metaprov::evalgen::{generate_corpus, random_spec, run_experiment, seed_record, CorpusSpec, ExperimentConfig};
use metaprov::ingest::{sort_records, LocalCorpusProvider};
use metaprov::model::{serialize_corpus, Corpus, ImageServiceRecord};
use metaprov::versiontree::{build_tree, semantic_diff, to_document, to_dot, Strategy, TreeError};
use metaprov::Exec;

#[derive(Parser)]
#[command(name = "metaprov", version, about = "Metadata-only analysis of image versions")]
struct Cli {
    /// JSON config file (tolerances, heuristic parameters, limits, format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output format; overrides the config file.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Seed for anything random.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Attribute group table; defaults to the bundled one.
    #[arg(long, global = true)]
    schemas: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every record for internally inconsistent metadata.
    Check {
        corpus: PathBuf,
        /// Highest aggregate score that still counts as a pass.
        #[arg(long)]
        fail_over: Option<f64>,
        /// Camera capability table (JSON); defaults to the bundled one.
        #[arg(long)]
        capabilities: Option<PathBuf>,
        /// Weather and place fixture (JSON); defaults to the bundled one.
        #[arg(long)]
        environment: Option<PathBuf>,
    },
    /// Build a version tree.
    Tree {
        corpus: PathBuf,
        #[arg(long, default_value = "heuristic")]
        strategy: StrategyArg,
    },
    /// Spatial, temporal and context differences between two versions.
    Diff { corpus: PathBuf, id_a: String, id_b: String },
    /// Materialize a synthetic corpus with its true tree.
    Generate(GenerateArgs),
    /// Score all tree builders on generated corpora.
    Evaluate(EvaluateArgs),
    /// Print the per-version attribute clusters.
    Embed {
        corpus: PathBuf,
        #[arg(long, required = true)]
        dump: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StrategyArg {
    Baseline,
    Heuristic,
    Bruteforce,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Baseline => Strategy::Baseline,
            StrategyArg::Heuristic => Strategy::Heuristic,
            StrategyArg::Bruteforce => Strategy::Bruteforce,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Corpus spec (JSON). Without it a random spec is drawn from --seed.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 6, conflicts_with = "spec")]
    nodes: usize,
    #[arg(long, default_value_t = 1, conflicts_with = "spec")]
    ops: usize,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Versions per instance, e.g. 5..8 (inclusive) or 6.
    #[arg(long, default_value = "5..8", value_parser = parse_range)]
    nodes: (usize, usize),
    /// Mutations per edge, inclusive range.
    #[arg(long, default_value = "1..2", value_parser = parse_range)]
    ops: (usize, usize),
    #[arg(long)]
    inversion_rate: Option<f64>,
    /// Record wall-clock time per build (makes reports non-reproducible).
    #[arg(long)]
    timings: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not a count: {t:?}"));
    match s.split_once("..") {
        Some((a, b)) => Ok((num(a)?, num(b.strip_prefix('=').unwrap_or(b))?)),
        None => num(s).map(|n| (n, n)),
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(message: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: message.to_string() }
}

type Outcome = Result<(String, u8), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("metaprov: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Context {
    cfg: CliConfig,
    format: OutputFormat,
    schemas: Vec<GroupSchema>,
    exec: Exec,
}

fn run(cli: &Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(p) => CliConfig::load(p).map_err(input_error)?,
        None => CliConfig::default(),
    };
    let schemas = match &cli.schemas {
        Some(p) => load_schemas(p).map_err(input_error)?,
        None => default_schemas(),
    };
    let ctx = Context {
        format: cli.format.unwrap_or(cfg.format),
        schemas: cfg.apply_text_dims(schemas),
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
        cfg,
    };
    match &cli.command {
        Command::Check { corpus, fail_over, capabilities, environment } => {
            cmd_check(&ctx, corpus, *fail_over, capabilities.as_deref(), environment.as_deref())
        }
        Command::Tree { corpus, strategy } => cmd_tree(&ctx, corpus, (*strategy).into()),
        Command::Diff { corpus, id_a, id_b } => cmd_diff(&ctx, corpus, id_a, id_b),
        Command::Generate(args) => cmd_generate(args, cli.seed),
        Command::Evaluate(args) => cmd_evaluate(&ctx, args, cli.seed),
        Command::Embed { corpus, .. } => cmd_embed(&ctx, corpus),
    }
}

fn load_corpus(path: &Path) -> Result<Corpus, Failure> {
    LocalCorpusProvider::load(path).map_err(input_error)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output types serialize");
    s.push('\n');
    s
}

fn write_or_return(out: Option<&Path>, text: String) -> Outcome {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| input_error(format!("cannot write {}: {e}", p.display())))?;
            Ok((String::new(), 0))
        }
        None => Ok((text, 0)),
    }
}

fn cmd_check(
    ctx: &Context,
    corpus: &Path,
    fail_over: Option<f64>,
    capabilities: Option<&Path>,
    environment: Option<&Path>,
) -> Outcome {
    let corpus = load_corpus(corpus)?;
    let db = match capabilities {
        Some(p) => CapabilityDb::load(p).map_err(input_error)?,
        None => CapabilityDb::bundled(),
    };
    let env = match environment {
        Some(p) => FixtureEnvironment::load(p).map_err(input_error)?,
        None => FixtureEnvironment::bundled(),
    };
    let threshold = fail_over.unwrap_or(ctx.cfg.fail_over);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(input_error(format!("--fail-over must be in [0, 1], got {threshold}")));
    }
    let reports = evaluate_many(&corpus.versions, &db, &env, &ctx.cfg.tolerances, ctx.exec);
    let failed = reports.iter().any(|r| r.aggregate.is_some_and(|a| a > threshold));
    let text = match ctx.format {
        OutputFormat::Document | OutputFormat::Dot => json(&reports),
        OutputFormat::Csv => reports_csv(&reports),
    };
    Ok((text, u8::from(failed)))
}

fn reports_csv(reports: &[InconsistencyReport]) -> String {
    let mut out = String::from("record_id,group_id,status,score\n");
    for r in reports {
        for f in &r.findings {
            let status = serde_json::to_value(f.status).expect("status serializes");
            let group = serde_json::to_value(f.group_id).expect("group serializes");
            let score = f.score.map(|s| format!("{s:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.record_id, group.as_str().unwrap_or(""), status.as_str().unwrap_or(""), score);
        }
    }
    out
}

fn cmd_tree(ctx: &Context, corpus: &Path, strategy: Strategy) -> Outcome {
    let mut versions = load_corpus(corpus)?.versions;
    sort_records(&mut versions);
    let built = build_tree(strategy, &versions, &ctx.schemas, &ctx.cfg.tree(), ctx.exec).map_err(|e| match e {
        TreeError::TooLarge { .. } => Failure { code: 3, message: e.to_string() },
        other => input_error(other),
    })?;
    let text = match ctx.format {
        OutputFormat::Dot => to_dot(&built.tree, &versions),
        OutputFormat::Document => json(&to_document(&built.tree, strategy.as_str())),
        OutputFormat::Csv => {
            let mut out = String::from("child,parent,total_complexity,forced\n");
            for n in &built.tree.nodes {
                if let (Some(p), Some(e)) = (built.tree.parent.get(n), built.tree.edges.get(n)) {
                    let _ = writeln!(out, "{n},{p},{:.9},{}", e.total_complexity, e.forced);
                }
            }
            out
        }
    };
    Ok((text, 0))
}

fn find<'a>(versions: &'a [ImageServiceRecord], id: &str) -> Result<&'a ImageServiceRecord, Failure> {
    versions.iter().find(|r| r.id == id).ok_or_else(|| input_error(format!("no version with id {id:?}")))
}

fn cmd_diff(ctx: &Context, corpus: &Path, a: &str, b: &str) -> Outcome {
    let versions = load_corpus(corpus)?.versions;
    let d = semantic_diff(find(&versions, a)?, find(&versions, b)?);
    let text = match ctx.format {
        OutputFormat::Csv => format!(
            "from,to,delta_spatial_km,changed_labels,delta_temporal_s,delta_context\n{a},{b},{:.6},{},{},{:.6}\n",
            d.delta_spatial_km,
            d.changed_labels.join(";"),
            d.delta_temporal_s,
            d.delta_context
        ),
        _ => json(&d),
    };
    Ok((text, 0))
}

fn cmd_generate(args: &GenerateArgs, seed: u64) -> Outcome {
    let spec: CorpusSpec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| input_error(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| input_error(format!("spec {}: {e}", p.display())))?
        }
        None => {
            if args.nodes == 0 {
                return Err(input_error("--nodes must be at least 1"));
            }
            random_spec(args.nodes, args.ops, seed, &seed_record())
        }
    };
    let (versions, truth) = generate_corpus(&spec).map_err(input_error)?;
    let ground_truth_tree = truth.nodes.iter().map(|n| (n.clone(), truth.parent.get(n).cloned())).collect();
    let corpus = Corpus { image_id: Some("generated".into()), versions, ground_truth_tree: Some(ground_truth_tree) };
    write_or_return(args.out.as_deref(), serialize_corpus(&corpus))
}

fn cmd_evaluate(ctx: &Context, args: &EvaluateArgs, seed: u64) -> Outcome {
    let defaults = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        instances: args.instances,
        nodes: args.nodes,
        ops_per_edge: args.ops,
        rng_seed: seed,
        tree: ctx.cfg.tree(),
        inversion_rate: args.inversion_rate.unwrap_or(defaults.inversion_rate),
        timings: args.timings,
        exec: ctx.exec,
    };
    let result = run_experiment(&cfg, &ctx.schemas).map_err(|e| match e {
        TreeError::TooLarge { .. } => Failure { code: 3, message: e.to_string() },
        other => input_error(other),
    })?;
    let text = match ctx.format {
        OutputFormat::Csv => result.to_csv(),
        _ => result.to_json(),
    };
    write_or_return(args.out.as_deref(), text)
}

fn cmd_embed(ctx: &Context, corpus: &Path) -> Outcome {
    let mut versions = load_corpus(corpus)?.versions;
    sort_records(&mut versions);
    let clusters = build_clusters(&versions, &ctx.schemas);
    match ctx.format {
        OutputFormat::Csv => {
            let mut out = String::from("version_id,t_upload,group_id,values\n");
            for c in &clusters {
                for (g, p) in &c.points {
                    let vals: Vec<String> = p.values.iter().map(|v| format!("{v:.6}")).collect();
                    let _ = writeln!(out, "{},{:.6},{},{}", c.version_id, c.t_upload, g, vals.join(" "));
                }
            }
            Ok((out, 0))
        }
        _ => Ok((json(&clusters), 0)),
    }
}
