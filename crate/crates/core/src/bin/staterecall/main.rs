//! `staterecall`: generate tasks, run evaluations, score and report.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use staterecall_core::answerparse::ParserConfig;
use staterecall_core::metrics::aggregate;
use staterecall_core::runner::{
    default_grid, execute_run, load_snapshot_config, read_records, rescore, resume_run,
    CatalogSource, RunConfig, RunError, SolverSpec,
};
use staterecall_core::selftest::{self, SelftestOptions};
use staterecall_core::taskgen::{BUNDLED_RETRIEVE_COLUMN, BUNDLED_TARGET_COLUMN};
use staterecall_core::{
    generate_task, render, BaselineKind, BaselineSpec, EndpointConfig, Family,
    PromptTemplateConfig, Seed, SwapPattern, Variant, VelocityPool,
};

#[derive(Parser)]
#[command(
    name = "staterecall",
    version,
    about = "Procedural state-based recall benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instances and rendered prompts to a JSONL file, without any endpoint.
    Generate(GenerateArgs),
    /// Evaluate a baseline or an OpenAI-compatible endpoint over a grid.
    Run(RunArgs),
    /// Re-parse and re-aggregate the records of a run.
    Score(ScoreArgs),
    /// Print the metrics table of one or more runs.
    Report(ReportArgs),
    /// Check the harness end to end with scripted solvers.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone)]
struct TaskArgs {
    /// Task family: astro or collision.
    #[arg(long)]
    family: Family,
    /// Comma-separated bins, e.g. "4x4,8x16".
    #[arg(long, value_parser = parse_grid, conflicts_with_all = ["square", "m", "n"])]
    grid: Option<Grid>,
    /// Full {4,8,16,32,64} x {4,8,16,32,64} grid (also the default).
    #[arg(long)]
    square: bool,
    /// Comma-separated m values, crossed with --n [default: 4,8,16,32,64].
    #[arg(long, value_delimiter = ',', conflicts_with = "square")]
    m: Vec<usize>,
    /// Comma-separated n values, crossed with --m [default: 4,8,16,32,64].
    #[arg(long, value_delimiter = ',', conflicts_with = "square")]
    n: Vec<usize>,
    /// Instances per bin.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Astro swap pattern: anchored, true-swap or general.
    #[arg(long, default_value = "anchored")]
    swap_pattern: SwapPattern,
    /// Astro catalog CSV [default: bundled exoplanet table].
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Numeric catalog column that variables are bound to.
    #[arg(long, default_value = BUNDLED_TARGET_COLUMN)]
    target_column: String,
    /// Catalog column asked for in the question.
    #[arg(long, default_value = BUNDLED_RETRIEVE_COLUMN)]
    retrieve_column: String,
    /// Smallest collision velocity.
    #[arg(long, default_value_t = 0)]
    velocity_min: i64,
    /// Largest collision velocity.
    #[arg(long, default_value_t = 99)]
    velocity_max: i64,
}

#[derive(Clone, Debug)]
struct Grid(Vec<(usize, usize)>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (m, n) = part
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("bin {part:?} is not of the form MxN"))?;
        let m = m.trim().parse().map_err(|_| format!("bad m in {part:?}"))?;
        let n = n.trim().parse().map_err(|_| format!("bad n in {part:?}"))?;
        out.push((m, n));
    }
    if out.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(Grid(out))
}

impl TaskArgs {
    fn grid(&self) -> Vec<(usize, usize)> {
        if let Some(g) = &self.grid {
            return g.0.clone();
        }
        if self.square || (self.m.is_empty() && self.n.is_empty()) {
            return default_grid();
        }
        let axis = staterecall_core::runner::DEFAULT_AXIS.to_vec();
        let ms = if self.m.is_empty() {
            axis.clone()
        } else {
            self.m.clone()
        };
        let ns = if self.n.is_empty() {
            axis
        } else {
            self.n.clone()
        };
        ms.iter()
            .flat_map(|&m| ns.iter().map(move |&n| (m, n)))
            .collect()
    }

    fn apply(&self, cfg: &mut RunConfig) {
        cfg.grid = self.grid();
        cfg.instances_per_bin = self.count;
        cfg.base_seed = Seed(self.seed);
        cfg.swap_pattern = self.swap_pattern;
        cfg.velocity_pool = VelocityPool {
            min: self.velocity_min,
            max: self.velocity_max,
        };
        cfg.catalog = CatalogSource {
            path: self.catalog.clone(),
            target_column: self.target_column.clone(),
            retrieve_column: self.retrieve_column.clone(),
        };
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Output file.
    #[arg(long, default_value = "instances.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct ParserArgs {
    /// Only accept option letters, not option texts.
    #[arg(long)]
    no_option_text: bool,
    /// Reasoning delimiter pair "OPEN,CLOSE"; repeatable [default: <think>,</think>].
    #[arg(long = "reasoning-delimiters", value_parser = parse_delims)]
    delimiters: Vec<(String, String)>,
}

fn parse_delims(s: &str) -> Result<(String, String), String> {
    let (a, b) = s.split_once(',').ok_or("expected OPEN,CLOSE")?;
    Ok((a.to_string(), b.to_string()))
}

impl ParserArgs {
    fn apply(&self, mut base: ParserConfig) -> ParserConfig {
        if self.no_option_text {
            base.accept_option_text = false;
        }
        if !self.delimiters.is_empty() {
            base.reasoning_delimiters = self.delimiters.clone();
        }
        base
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("solver").required(true).args(["baseline", "endpoint"])))]
struct RunArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    parser: ParserArgs,
    /// Scripted solver: oracle, random, stateless or flaky.
    #[arg(long)]
    baseline: Option<BaselineKind>,
    /// Probability that the flaky baseline breaks the answer format.
    #[arg(long, default_value_t = 0.5)]
    flaky_rate: f64,
    /// Solver answering inside the flaky baseline: oracle, random or stateless.
    #[arg(long, default_value = "oracle")]
    flaky_inner: BaselineKind,
    /// Seed for the random and flaky baselines.
    #[arg(long, default_value_t = 0)]
    baseline_seed: u64,
    /// Base URL of an OpenAI-compatible server.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model id sent with each request.
    #[arg(long, default_value = "default")]
    model: String,
    /// Model variant: think (6000 output tokens) or instruct (40).
    #[arg(long, default_value = "think")]
    variant: Variant,
    /// Sampling temperature.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Output token cap [default: from --variant].
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 600.0)]
    timeout: f64,
    /// Retries after a transient failure.
    #[arg(long, default_value_t = 5)]
    retries: u32,
    /// Concurrent requests.
    #[arg(long, default_value_t = 8)]
    max_in_flight: usize,
    /// First retry delay in milliseconds.
    #[arg(long, default_value_t = 1000)]
    backoff_base_ms: u64,
    /// Retry delay cap in milliseconds.
    #[arg(long, default_value_t = 30_000)]
    backoff_cap_ms: u64,
    /// Directory holding run directories.
    #[arg(long, default_value = "runs")]
    output_dir: PathBuf,
    /// Run directory name.
    #[arg(long, default_value = "run")]
    run_id: String,
    /// Require an existing run and complete its missing items.
    #[arg(long)]
    resume: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let solver = if let Some(kind) = self.baseline {
            let seed = Seed(self.baseline_seed);
            let simple = |k: BaselineKind| -> Result<BaselineSpec> {
                Ok(match k {
                    BaselineKind::Oracle => BaselineSpec::oracle(),
                    BaselineKind::Random => BaselineSpec::random(seed),
                    BaselineKind::Stateless => BaselineSpec::stateless(),
                    BaselineKind::FlakyFormat => bail!("--flaky-inner cannot itself be flaky"),
                })
            };
            SolverSpec::Baseline(match kind {
                BaselineKind::FlakyFormat => {
                    BaselineSpec::flaky(simple(self.flaky_inner)?, self.flaky_rate, seed)
                }
                k => simple(k)?,
            })
        } else {
            let url = self.endpoint.as_deref().expect("clap requires a solver");
            let mut e = EndpointConfig::preset(url, &self.model, self.variant);
            e.temperature = self.temperature;
            if let Some(t) = self.max_tokens {
                e.max_output_tokens = t;
            }
            e.request_timeout_secs = self.timeout;
            e.max_retries = self.retries;
            e.max_in_flight = self.max_in_flight;
            e.backoff_base_ms = self.backoff_base_ms;
            e.backoff_cap_ms = self.backoff_cap_ms;
            SolverSpec::Endpoint(e)
        };
        let mut cfg = RunConfig::new(self.task.family, solver, &self.output_dir, &self.run_id);
        self.task.apply(&mut cfg);
        cfg.parser = self.parser.apply(ParserConfig::default());
        Ok(cfg)
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["run_dir", "records"])))]
struct ScoreArgs {
    /// Run directory; its parser settings are the starting point.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// A records file scored with default parser settings.
    #[arg(long)]
    records: Option<PathBuf>,
    #[command(flatten)]
    parser: ParserArgs,
    /// Metrics CSV to write [default: metrics.csv next to the records].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories to report on.
    #[arg(required = true)]
    run_dirs: Vec<PathBuf>,
    /// Print CSV instead of a table.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct SelftestArgs {
    /// Diagonal 4x4, 8x8, 16x16 grid only.
    #[arg(long)]
    quick: bool,
    /// Base seed.
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Selftest(a) => cmd_selftest(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let mut cfg = RunConfig::new(
        a.task.family,
        SolverSpec::Baseline(BaselineSpec::oracle()),
        ".",
        "generate",
    );
    a.task.apply(&mut cfg);
    let plan = staterecall_core::plan_run(&cfg)?;
    let ctx = cfg.gen_context()?;
    let template = PromptTemplateConfig::for_family(cfg.family);
    let mut out = String::new();
    for item in &plan {
        let task = generate_task(&ctx, cfg.family, item.m, item.n, item.index, cfg.base_seed)?;
        let prompt = render(&task, &template);
        let line = serde_json::json!({ "instance": task, "prompt": prompt.text });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} instances to {}", plan.len(), a.out.display());
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = a.config()?;
    let exists = cfg.paths().config.exists();
    if a.resume && !exists {
        return Err(RunError::NoRun(cfg.run_dir()).into());
    }
    let outcome = if exists {
        resume_run(&cfg)?
    } else {
        execute_run(&cfg)?
    };
    if exists {
        println!(
            "resumed {}: {} already done, {} remaining",
            outcome.paths.dir.display(),
            outcome.skipped,
            outcome.executed
        );
    }
    print!("{}", outcome.report.to_table());
    println!("records: {}", outcome.paths.records.display());
    println!("metrics: {}", outcome.paths.metrics.display());
    Ok(())
}

fn load_records_warn(path: &Path) -> Result<Vec<staterecall_core::RunRecord>> {
    let loaded = read_records(path).with_context(|| format!("reading {}", path.display()))?;
    if loaded.dropped_tail {
        eprintln!(
            "warning: ignoring a partial trailing line in {}",
            path.display()
        );
    }
    Ok(loaded.records)
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let (records_path, base_parser) = match (&a.run_dir, &a.records) {
        (Some(dir), _) => (dir.join("records.jsonl"), load_snapshot_config(dir)?.parser),
        (None, Some(p)) => (p.clone(), ParserConfig::default()),
        (None, None) => unreachable!("clap requires an input"),
    };
    if !records_path.exists() {
        bail!("{} does not exist", records_path.display());
    }
    let parser = a.parser.apply(base_parser);
    parser.validate().map_err(anyhow::Error::msg)?;
    let records = rescore(&load_records_warn(&records_path)?, &parser);
    let report = aggregate(&records)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| records_path.with_file_name("metrics.csv"));
    fs::write(&out, report.to_csv())?;
    print!("{}", report.to_table());
    println!("metrics: {}", out.display());
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for (i, dir) in a.run_dirs.iter().enumerate() {
        let report = aggregate(&load_records_warn(&dir.join("records.jsonl"))?)?;
        if a.csv {
            // One header for the whole stream.
            let csv = report.to_csv();
            let body = if i == 0 {
                csv.as_str()
            } else {
                csv.split_once('\n').map_or("", |x| x.1)
            };
            write!(w, "{body}")?;
        } else {
            let pooled = report.pooled();
            writeln!(w, "== {} ==", dir.display())?;
            write!(w, "{}", report.to_table())?;
            writeln!(
                w,
                "pooled: accuracy {} parsed_weighted {} over {} instances",
                staterecall_core::metrics::fixed6(pooled.accuracy()),
                staterecall_core::metrics::fixed6(pooled.parsed_weighted()),
                pooled.total
            )?;
        }
    }
    Ok(())
}

fn cmd_selftest(a: &SelftestArgs) -> Result<()> {
    let started = std::time::Instant::now();
    let report = selftest::run(&SelftestOptions {
        quick: a.quick,
        base_seed: Seed(a.seed),
    })?;
    print!("{report}");
    println!("finished in {:.1}s", started.elapsed().as_secs_f64());
    match report.first_failure() {
        None => Ok(()),
        Some(c) => bail!("property {} failed", c.name),
    }
}
