use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use kws_core::synth::SynthConfig;
use kws_core::{
    build_posteriorgram, eval, load_index, parse_lattice, save_index, search, IndexConfig, Method,
    NormalizationConfig, SpotIndex,
};

/// Lattice-based probabilistic keyword spotting.
#[derive(Parser, Debug)]
#[command(name = "kws", version)]
struct Cli {
    /// Emit JSON instead of text output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a spot index from a directory of .lat files.
    Index(IndexArgs),
    /// Query an index for one keyword.
    Search(SearchArgs),
    /// Evaluate an index against ground-truth relevance judgements.
    Eval(EvalArgs),
    /// Generate a synthetic lattice corpus with qrels and queries.
    Synth(SynthArgs),
    /// Print index statistics.
    Stats(StatsArgs),
    /// Dump the posteriorgram of one lattice as CSV.
    Posteriorgram(PosteriorgramArgs),
    /// Serve the HTTP query API.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(short, long, value_name = "DIR")]
    input: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    /// Relevance estimator: onebest, sum, max, nb or exact.
    #[arg(long, default_value = "max")]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = kws_core::posteriorgram::DEFAULT_PEAK_THRESHOLD)]
    peak_threshold: f64,
    /// Drop entries scoring below this value.
    #[arg(long, default_value_t = kws_core::index::DEFAULT_PRUNE_EPSILON)]
    prune: f64,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(short = 'x', long, value_name = "FILE")]
    index: PathBuf,
    #[arg(short, long)]
    query: String,
    #[arg(short, long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 100)]
    limit: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(short = 'x', long, value_name = "FILE")]
    index: PathBuf,
    /// One query word per line.
    #[arg(long, value_name = "FILE")]
    queries: PathBuf,
    /// TSV lines `word<TAB>region_id`.
    #[arg(long, value_name = "FILE")]
    qrels: PathBuf,
    /// Write the global recall-precision curve as CSV.
    #[arg(long, value_name = "FILE")]
    curve: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(short, long, value_name = "DIR")]
    output: PathBuf,
    #[arg(long, default_value_t = 100)]
    lines: usize,
    #[arg(long, default_value_t = 200)]
    vocab: usize,
    #[arg(long, default_value_t = 8)]
    min_words: usize,
    #[arg(long, default_value_t = 12)]
    max_words: usize,
    #[arg(long, default_value_t = 0.5)]
    confusion_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(short = 'x', long, value_name = "FILE")]
    index: PathBuf,
}

#[derive(Args, Debug)]
struct PosteriorgramArgs {
    #[arg(short, long, value_name = "FILE")]
    lattice: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(short = 'x', long, value_name = "FILE")]
    index: PathBuf,
    #[arg(long, default_value_t = kws_service::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<kws_core::Error>() {
            Some(kws_core::Error::InvalidParameter(msg)) => Failure::Usage(msg.clone()),
            _ => Failure::Data(e),
        }
    }
}

impl From<kws_core::Error> for Failure {
    fn from(e: kws_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CliResult = Result<(), Failure>;

fn emit_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn open_index(path: &Path) -> anyhow::Result<SpotIndex> {
    load_index(path).with_context(|| format!("cannot load index {}", path.display()))
}

fn cmd_index(a: IndexArgs, json: bool) -> CliResult {
    let cfg = IndexConfig {
        method: a.method,
        normalization: NormalizationConfig { gamma: a.gamma },
        peak_threshold: a.peak_threshold,
        prune_epsilon: a.prune,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let out = match kws_core::build_index(&a.input, &cfg) {
        Err(kws_core::Error::NoLattices { failures }) => {
            for (path, reason) in &failures {
                eprintln!("{}: {reason}", path.display());
            }
            return Err(Failure::Data(anyhow::anyhow!(
                "no lattice in {} could be indexed",
                a.input.display()
            )));
        }
        other => other.with_context(|| format!("cannot index {}", a.input.display()))?,
    };
    for (path, reason) in &out.failures {
        eprintln!("warning: skipped {}: {reason}", path.display());
    }
    save_index(&out.index, &a.output)?;
    let stats = out.index.stats();
    if json {
        emit_json(&stats)?;
    } else {
        println!(
            "regions={} vocabulary={} spots={} spots_per_line={:.4} method={} skipped={}",
            stats.regions,
            stats.vocabulary_size,
            stats.total_spots,
            stats.spots_per_line,
            cfg.method,
            out.failures.len()
        );
    }
    Ok(())
}

fn cmd_search(a: SearchArgs, json: bool) -> CliResult {
    let ix = open_index(&a.index)?;
    let upper = if ix.method().is_proper() {
        1.0
    } else {
        f64::INFINITY
    };
    if !(0.0..=upper).contains(&a.tau) {
        return Err(Failure::Usage(format!(
            "--tau must lie in [0, {upper}] for a {} index, got {}",
            ix.method(),
            a.tau
        )));
    }
    let r = search(&ix, &a.query, a.tau, a.limit);
    if json {
        emit_json(&r)?;
        return Ok(());
    }
    if r.out_of_lexicon {
        eprintln!("note: {:?} is not in the index lexicon", a.query);
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for h in &r.hits {
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{}\t{}",
            h.rank, h.region_id, h.score, h.span.begin, h.span.end
        )
        .map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs, json: bool) -> CliResult {
    let ix = open_index(&a.index)?;
    let queries = eval::load_queries(&a.queries)?;
    let qrels = eval::Qrels::load(&a.qrels)?;
    let report = if ix.method() == Method::OneBest {
        eval::evaluate_one_best(&ix, &queries, &qrels)?
    } else {
        eval::evaluate(&ix, &queries, &qrels)?
    };
    if let Some(path) = &a.curve {
        eval::write_rp_csv(&report.global, path)?;
    }
    if json {
        emit_json(&report)?;
        return Ok(());
    }
    println!("AP={:.5}", report.ap());
    println!("AP_raw={:.5}", report.global.ap_raw);
    match report.map_value {
        Some(m) => println!("mAP={m:.5}"),
        None => println!("mAP=undefined"),
    }
    println!(
        "queries={} relevant_queries={}",
        report.query_count, report.relevant_query_count
    );
    Ok(())
}

fn cmd_synth(a: SynthArgs, json: bool) -> CliResult {
    let cfg = SynthConfig {
        num_lines: a.lines,
        vocab_size: a.vocab,
        min_words: a.min_words,
        max_words: a.max_words,
        confusion_rate: a.confusion_rate,
        score_noise: a.noise,
        seed: a.seed,
        ..SynthConfig::default()
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let out = kws_core::generate(&cfg, &a.output)?;
    if json {
        emit_json(&serde_json::json!({
            "lattice_dir": out.lattice_dir,
            "lattices": out.lattice_files.len(),
            "qrels": out.qrels_path,
            "queries": out.queries_path,
        }))?;
    } else {
        println!(
            "lattices={} dir={} qrels={} queries={}",
            out.lattice_files.len(),
            out.lattice_dir.display(),
            out.qrels_path.display(),
            out.queries_path.display()
        );
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs, json: bool) -> CliResult {
    let ix = open_index(&a.index)?;
    let s = ix.stats();
    if json {
        emit_json(&s)?;
    } else {
        println!(
            "regions={} vocabulary={} spots={} spots_per_line={:.4} method={} prune={} gamma={} peak_threshold={}",
            s.regions,
            s.vocabulary_size,
            s.total_spots,
            s.spots_per_line,
            ix.method(),
            ix.config.prune_epsilon,
            ix.config.normalization.gamma,
            ix.config.peak_threshold
        );
    }
    Ok(())
}

fn cmd_posteriorgram(a: PosteriorgramArgs) -> CliResult {
    let cfg = NormalizationConfig::new(a.gamma).map_err(|e| Failure::Usage(e.to_string()))?;
    let bytes = std::fs::read(&a.lattice)
        .with_context(|| format!("cannot read {}", a.lattice.display()))?;
    let g = parse_lattice(&bytes)
        .and_then(|g| g.normalize(&cfg))
        .with_context(|| format!("invalid lattice {}", a.lattice.display()))?;
    let pg = build_posteriorgram(&g)?;
    pg.write_csv(std::io::stdout().lock())
        .map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> CliResult {
    if !a.index.is_file() {
        return Err(Failure::Data(anyhow::anyhow!(
            "index file {} does not exist",
            a.index.display()
        )));
    }
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let rt = tokio::runtime::Runtime::new().map_err(anyhow::Error::from)?;
    rt.block_on(kws_service::serve(a.index, SocketAddr::new(a.host, a.port)))
        .map_err(anyhow::Error::from)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let json = cli.json;
    match cli.command {
        Command::Index(a) => cmd_index(a, json),
        Command::Search(a) => cmd_search(a, json),
        Command::Eval(a) => cmd_eval(a, json),
        Command::Synth(a) => cmd_synth(a, json),
        Command::Stats(a) => cmd_stats(a, json),
        Command::Posteriorgram(a) => cmd_posteriorgram(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
