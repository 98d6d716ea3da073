use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};
use log::info;

use techmap::aggregate::CooccurrenceUniverse;
use techmap::compare::{CompareOptions, GraphScope, PairSelection};
use techmap::corpus::{parse_corpus, write_corpus, AgentKind, PeriodSpec, Schema};
use techmap::io::{read_aggregates, read_class_stats, read_matrix, render_aggregates, render_matrix, write_atomic};
use techmap::measures::{compute_measure, MeasureId, MeasureOptions};
use techmap::network::EigenOptions;
use techmap::pipeline::{
    aggregate_corpus, check_stats_universe, compare_matrix_dir, export_overlay, run_pipeline, with_jobs,
    with_suffix, NetworkBuild, PipelineConfig, SchemaSource,
};

/// Patent-class proximity measures, technology networks and their comparison.
#[derive(Debug, Parser)]
#[command(name = "techmap", version, propagate_version = true)]
struct Cli {
    /// Pipeline configuration (TOML). Supplies defaults for every subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// More log output; repeat for debug detail.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a patent file and write the normalized corpus.
    Ingest(IngestArgs),
    /// Build the aggregate tables of a corpus, optionally for one period.
    Aggregate(AggregateArgs),
    /// Compute proximity matrices from an aggregate directory.
    Measure(MeasureArgs),
    /// Build a network from a matrix and export its backbone.
    Network(NetworkArgs),
    /// Correlate networks across periods and measures.
    Compare(CompareArgs),
    /// Export a network with one agent's classes highlighted.
    Overlay(OverlayArgs),
    /// Run every stage from the configuration.
    Run,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Schema file (TOML); default is the normalized layout.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Restrict to patents granted in START-END.
    #[arg(long)]
    period: Option<PeriodSpec>,
    /// Class exclusion pattern; repeatable. Default `*99`.
    #[arg(long = "exclude")]
    exclude: Vec<String>,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    #[arg(long)]
    agg_dir: PathBuf,
    /// Measure id, comma-separated ids, or `all`.
    #[arg(long)]
    measure: String,
    /// Output file for one measure; a directory when several are requested.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_universe)]
    cooccurrence_universe: Option<CooccurrenceUniverse>,
    #[arg(long)]
    d2_keep_diagonal: bool,
}

#[derive(Debug, Args)]
struct NetworkArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    stats: PathBuf,
    #[arg(long)]
    backbone_multiplier: Option<usize>,
    /// Detect communities.
    #[arg(long)]
    communities: bool,
    /// Graph for community detection: backbone or full.
    #[arg(long, value_parser = parse_scope)]
    communities_on: Option<GraphScope>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix; suffixes such as `.graphml` are appended.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Directory of `<measure>.csv` files, or of `<period>/<measure>.csv`.
    #[arg(long)]
    matrices: PathBuf,
    #[arg(long)]
    stats: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_parser = parse_pairs)]
    pairs: Option<PairSelection>,
    #[arg(long, value_parser = parse_scope)]
    centrality_on: Option<GraphScope>,
    #[arg(long)]
    backbone_multiplier: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    primary_period: Option<PeriodSpec>,
}

#[derive(Debug, Args)]
struct OverlayArgs {
    #[arg(long)]
    agent: String,
    #[arg(long, default_value = "organization")]
    kind: AgentKind,
    /// Grant years whose patents are highlighted.
    #[arg(long)]
    period: PeriodSpec,
    /// Network measure; default is the first configured one.
    #[arg(long)]
    measure: Option<MeasureId>,
    /// Period of the network; default is the primary period.
    #[arg(long)]
    network_period: Option<PeriodSpec>,
}

fn parse_universe(s: &str) -> Result<CooccurrenceUniverse, String> {
    match s {
        "diversified" => Ok(CooccurrenceUniverse::Diversified),
        "all" => Ok(CooccurrenceUniverse::All),
        _ => Err(format!("expected `diversified` or `all`, got `{s}`")),
    }
}

fn parse_pairs(s: &str) -> Result<PairSelection, String> {
    match s {
        "all" => Ok(PairSelection::All),
        "joint_nonzero" => Ok(PairSelection::JointNonzero),
        _ => Err(format!("expected `all` or `joint_nonzero`, got `{s}`")),
    }
}

fn parse_scope(s: &str) -> Result<GraphScope, String> {
    match s {
        "full" => Ok(GraphScope::Full),
        "backbone" => Ok(GraphScope::Backbone),
        _ => Err(format!("expected `full` or `backbone`, got `{s}`")),
    }
}

/// Command-line misuse that clap cannot detect.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let result = with_jobs(cli.jobs, || dispatch(&cli))
        .map_err(anyhow::Error::from)
        .and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<techmap::Error>() {
        Some(te) if te.is_numerical() => 3,
        _ => 2,
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<Option<PipelineConfig>> {
    cli.config
        .as_deref()
        .map(|p| PipelineConfig::from_file(p).with_context(|| format!("loading {}", p.display())))
        .transpose()
}

fn require_config(cli: &Cli, command: &str) -> anyhow::Result<PipelineConfig> {
    load_config(cli)?.ok_or_else(|| usage(format!("`{command}` needs --config")))
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Aggregate(a) => aggregate(cli, a),
        Command::Measure(a) => measure(cli, a),
        Command::Network(a) => network(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::Overlay(a) => overlay(cli, a),
        Command::Run => {
            let config = require_config(cli, "run")?;
            let manifest = run_pipeline(&config)?;
            println!(
                "{} stages ({} cached); manifest at {}",
                manifest.stages.len(),
                manifest.cache_hits(),
                config.layout().manifest().display()
            );
            for w in &manifest.warnings {
                println!("warning: {w}");
            }
            Ok(())
        }
    }
}

fn ingest(cli: &Cli, a: &IngestArgs) -> anyhow::Result<()> {
    let config = load_config(cli)?;
    let input = a
        .input
        .clone()
        .or_else(|| config.as_ref().map(|c| c.input.clone()))
        .ok_or_else(|| usage("`ingest` needs --input or --config"))?;
    let out = a
        .out
        .clone()
        .or_else(|| config.as_ref().map(|c| c.layout().corpus()))
        .ok_or_else(|| usage("`ingest` needs --out or --config"))?;
    let schema = match (&a.schema, &config) {
        (Some(p), _) => Schema::from_file(p)?,
        (None, Some(c)) => c.schema.load()?,
        (None, None) => SchemaSource::default().load()?,
    };
    let corpus = parse_corpus(&input, &schema)?;
    let mut buf = Vec::new();
    write_corpus(&corpus, &mut buf)?;
    write_atomic(&out, &buf)?;
    info!("ingested {} records", corpus.len());
    println!("{} records -> {}", corpus.len(), out.display());
    Ok(())
}

fn aggregate(cli: &Cli, a: &AggregateArgs) -> anyhow::Result<()> {
    let config = load_config(cli)?;
    let exclude = if !a.exclude.is_empty() {
        a.exclude.clone()
    } else if let Some(c) = &config {
        c.exclude.clone()
    } else {
        vec!["*99".to_string()]
    };
    let corpus = parse_corpus(&a.corpus, &Schema::default())?;
    let agg = aggregate_corpus(&corpus, &exclude, a.period)?;
    for (name, bytes) in render_aggregates(&agg) {
        write_atomic(&a.out_dir.join(name), &bytes)?;
    }
    println!(
        "{} records, {} classes -> {}",
        agg.records,
        agg.universe.len(),
        a.out_dir.display()
    );
    if agg.unclassified > 0 {
        println!("warning: {} patents have no class in the universe", agg.unclassified);
    }
    Ok(())
}

fn measure(cli: &Cli, a: &MeasureArgs) -> anyhow::Result<()> {
    let config = load_config(cli)?;
    let ids = MeasureId::parse_list(&a.measure)?;
    if ids.is_empty() {
        bail!(usage("no measure requested"));
    }
    let base = config.as_ref().map(|c| c.measure_options()).unwrap_or_default();
    let opts = MeasureOptions {
        cooccurrence_universe: a.cooccurrence_universe.unwrap_or(base.cooccurrence_universe),
        d2_keep_diagonal: a.d2_keep_diagonal || base.d2_keep_diagonal,
    };
    let agg = read_aggregates(&a.agg_dir)?;
    let single = ids.len() == 1 && !a.measure.trim().eq_ignore_ascii_case("all");
    for id in ids {
        let pm = compute_measure(id, &agg, &opts)?;
        let path = if single {
            a.out.clone()
        } else {
            a.out.join(format!("{id}.csv"))
        };
        write_atomic(&path, &render_matrix(&pm))?;
        println!("{id} -> {}", path.display());
    }
    Ok(())
}

fn network(cli: &Cli, a: &NetworkArgs) -> anyhow::Result<()> {
    let config = load_config(cli)?;
    let multiplier = a
        .backbone_multiplier
        .or(config.as_ref().map(|c| c.network.backbone_multiplier))
        .unwrap_or(2);
    if multiplier < 1 {
        bail!(usage("--backbone-multiplier must be at least 1"));
    }
    let seed = a.seed.or(config.as_ref().map(|c| c.network.community_seed)).unwrap_or(42);
    let pm = read_matrix(&a.matrix, None)?;
    let (su, stats) = read_class_stats(&a.stats)?;
    check_stats_universe(&pm.universe, &su)?;
    let on = a
        .communities_on
        .or(config.as_ref().map(|c| c.network.communities_on))
        .unwrap_or(GraphScope::Backbone);
    let build = NetworkBuild::new(&pm, &stats, multiplier, a.communities.then_some((seed, on)))?;
    for (suffix, bytes) in build.render() {
        write_atomic(&with_suffix(&a.out, suffix), &bytes)?;
    }
    print!(
        "{} vertices, {} edges, backbone {} edges",
        build.network.vertex_count(),
        build.network.edges().len(),
        build.backbone.kept_edges().len()
    );
    if let Some(p) = &build.partition {
        print!(", {} communities (modularity {:.4})", p.community_count(), p.modularity);
    }
    println!();
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs) -> anyhow::Result<()> {
    let config = load_config(cli)?;
    let base = config.as_ref().map(|c| c.compare_options()).unwrap_or_default();
    let opts = CompareOptions {
        pairs: a.pairs.unwrap_or(base.pairs),
        centrality_on: a.centrality_on.unwrap_or(base.centrality_on),
        backbone_multiplier: a.backbone_multiplier.unwrap_or(base.backbone_multiplier),
        eigen: EigenOptions {
            tolerance: a.tolerance.unwrap_or(base.eigen.tolerance),
            max_iterations: a.max_iterations.unwrap_or(base.eigen.max_iterations),
        },
    };
    if opts.backbone_multiplier < 1 {
        bail!(usage("--backbone-multiplier must be at least 1"));
    }
    let order = config.as_ref().map(|c| c.periods.clone());
    let primary = a.primary_period.or(config.as_ref().map(|c| c.primary()));
    let report = compare_matrix_dir(&a.matrices, &a.stats, &opts, order.as_deref(), primary)?;
    write_report(&report, &a.out_dir)
}

fn write_report(report: &techmap::ComparisonReport, dir: &Path) -> anyhow::Result<()> {
    for (name, bytes) in report.render()? {
        write_atomic(&dir.join(&name), &bytes)?;
    }
    println!("{} tables -> {}", report.temporal.len() + 4, dir.display());
    Ok(())
}

fn overlay(cli: &Cli, a: &OverlayArgs) -> anyhow::Result<()> {
    let config = require_config(cli, "overlay")?;
    let measure = match a.measure {
        Some(m) => m,
        None => config.measure_ids()?[0],
    };
    let net_period = a.network_period.unwrap_or_else(|| config.primary());
    let export = export_overlay(&config, &a.agent, a.kind, a.period, measure, net_period)?;
    println!(
        "{} highlighted classes; wrote {}",
        export.overlay.highlighted.len(),
        export
            .files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    for w in &export.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
