//! Evaluation runs: plan the `(m, n, index)` items, dispatch them to a solver,
//! score the replies and keep an append-only record of every item.
//!
//! A run directory holds `config.json` (config snapshot and its hash),
//! `records.jsonl` and `metrics.csv`. Workers complete items concurrently and
//! hand them to a single writer that appends in plan order; once all items are
//! done the file is rewritten sorted so finished runs are byte-comparable.

mod records;

pub use records::{read_records, repair_records, write_sorted, LoadedRecords, RunRecord};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

use crate::answerparse::{parse_answer, ParserConfig};
use crate::baselines::{solve, BaselineSpec};
use crate::endpoint::{
    CompletionResult, EndpointClient, EndpointConfig, EndpointError, FinishReason,
};
use crate::metrics::{aggregate, GridReport, MetricsError};
use crate::promptrender::{render, PromptTemplateConfig, RenderedPrompt};
use crate::seed::{derive_instance_seed, Seed};
use crate::taskgen::{
    generate_task, Catalog, CatalogError, Family, GenContext, GenError, SwapPattern, TaskInstance,
    VelocityPool, BUNDLED_CATALOG_CSV,
};

pub const DEFAULT_AXIS: [usize; 5] = [4, 8, 16, 32, 64];

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("run directory {0} already has records; resume it or choose another run id")]
    RunExists(PathBuf),
    #[error("no run to resume at {0}")]
    NoRun(PathBuf),
    #[error("config snapshot hash {found} does not match {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("records line {line} is malformed: {message}")]
    MalformedRecords { line: usize, message: String },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverSpec {
    Endpoint(EndpointConfig),
    Baseline(BaselineSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogSource {
    /// `None` selects the bundled exoplanet table.
    pub path: Option<PathBuf>,
    pub target_column: String,
    pub retrieve_column: String,
}

impl Default for CatalogSource {
    fn default() -> Self {
        CatalogSource {
            path: None,
            target_column: crate::taskgen::BUNDLED_TARGET_COLUMN.to_string(),
            retrieve_column: crate::taskgen::BUNDLED_RETRIEVE_COLUMN.to_string(),
        }
    }
}

impl CatalogSource {
    pub fn load(&self) -> Result<Catalog, CatalogError> {
        match &self.path {
            None => Catalog::from_reader(
                BUNDLED_CATALOG_CSV.as_bytes(),
                &self.target_column,
                &self.retrieve_column,
            ),
            Some(p) => crate::taskgen::load_catalog(p, &self.target_column, &self.retrieve_column),
        }
    }

    fn content_hash(&self) -> Result<String, CatalogError> {
        let bytes = match &self.path {
            None => BUNDLED_CATALOG_CSV.as_bytes().to_vec(),
            Some(p) => fs::read(p)?,
        };
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub family: Family,
    pub grid: Vec<(usize, usize)>,
    pub instances_per_bin: usize,
    pub base_seed: Seed,
    pub swap_pattern: SwapPattern,
    pub velocity_pool: VelocityPool,
    pub catalog: CatalogSource,
    pub solver: SolverSpec,
    pub parser: ParserConfig,
    pub output_dir: PathBuf,
    pub run_id: String,
}

pub fn default_grid() -> Vec<(usize, usize)> {
    DEFAULT_AXIS
        .iter()
        .flat_map(|&m| DEFAULT_AXIS.iter().map(move |&n| (m, n)))
        .collect()
}

impl RunConfig {
    /// Default grid, 100 instances per bin.
    pub fn new(
        family: Family,
        solver: SolverSpec,
        output_dir: impl Into<PathBuf>,
        run_id: &str,
    ) -> Self {
        RunConfig {
            family,
            grid: default_grid(),
            instances_per_bin: 100,
            base_seed: Seed(0),
            swap_pattern: SwapPattern::default(),
            velocity_pool: VelocityPool::default(),
            catalog: CatalogSource::default(),
            solver,
            parser: ParserConfig::default(),
            output_dir: output_dir.into(),
            run_id: run_id.to_string(),
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }

    pub fn paths(&self) -> RunPaths {
        let dir = self.run_dir();
        RunPaths {
            config: dir.join("config.json"),
            records: dir.join("records.jsonl"),
            metrics: dir.join("metrics.csv"),
            dir,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.grid.is_empty() {
            return Err(RunError::InvalidGrid("grid is empty".into()));
        }
        let mut seen = HashSet::new();
        for &(m, n) in &self.grid {
            if m < 2 {
                return Err(RunError::InvalidGrid(format!("m = {m} is below 2")));
            }
            if !seen.insert((m, n)) {
                return Err(RunError::InvalidGrid(format!("bin {m}x{n} listed twice")));
            }
        }
        if self.instances_per_bin < 1 {
            return Err(RunError::InvalidConfig(
                "instances_per_bin must be >= 1".into(),
            ));
        }
        let safe = !self.run_id.is_empty()
            && self.run_id != "."
            && self.run_id != ".."
            && self
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !safe {
            return Err(RunError::InvalidConfig(format!(
                "run id {:?} is not filesystem-safe",
                self.run_id
            )));
        }
        self.parser.validate().map_err(RunError::InvalidConfig)?;
        match &self.solver {
            SolverSpec::Baseline(b) => b.validate().map_err(RunError::InvalidConfig)?,
            SolverSpec::Endpoint(e) => e.validate()?,
        }
        Ok(())
    }

    /// Everything that determines record content. Output location and
    /// operational knobs (timeouts, retries, concurrency, secrets) are left out.
    pub fn fingerprint(&self) -> Result<Value, RunError> {
        let solver = match &self.solver {
            SolverSpec::Baseline(b) => json!({ "baseline": b }),
            SolverSpec::Endpoint(e) => json!({
                "endpoint": {
                    "base_url": e.base_url,
                    "model_id": e.model_id,
                    "variant": e.variant,
                    "temperature": e.temperature,
                    "max_output_tokens": e.max_output_tokens,
                }
            }),
        };
        let mut grid = self.grid.clone();
        grid.sort_unstable();
        Ok(json!({
            "family": self.family,
            "grid": grid,
            "instances_per_bin": self.instances_per_bin,
            "base_seed": self.base_seed,
            "swap_pattern": self.swap_pattern,
            "velocity_pool": self.velocity_pool,
            "catalog": {
                "target_column": self.catalog.target_column,
                "retrieve_column": self.catalog.retrieve_column,
                "sha256": self.catalog.content_hash()?,
            },
            "solver": solver,
            "parser": self.parser,
        }))
    }

    pub fn config_hash(&self) -> Result<String, RunError> {
        Ok(hex::encode(Sha256::digest(
            self.fingerprint()?.to_string().as_bytes(),
        )))
    }

    pub fn gen_context(&self) -> Result<GenContext, RunError> {
        let catalog = match self.family {
            Family::Astro => self.catalog.load()?,
            // Collision tasks never read the catalog.
            Family::Collision => Catalog::bundled(),
        };
        Ok(GenContext {
            catalog: Arc::new(catalog),
            swap_pattern: self.swap_pattern,
            pool: self.velocity_pool,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub records: PathBuf,
    pub metrics: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlannedItem {
    pub m: usize,
    pub n: usize,
    pub index: usize,
    pub instance_seed: Seed,
}

impl PlannedItem {
    pub fn key(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.index)
    }
}

pub fn plan_run(cfg: &RunConfig) -> Result<Vec<PlannedItem>, RunError> {
    cfg.validate()?;
    let mut grid = cfg.grid.clone();
    grid.sort_unstable();
    Ok(grid
        .iter()
        .flat_map(|&(m, n)| {
            (0..cfg.instances_per_bin).map(move |index| PlannedItem {
                m,
                n,
                index,
                instance_seed: derive_instance_seed(cfg.base_seed, cfg.family, m, n, index),
            })
        })
        .collect())
}

/// Produces a completion for one rendered instance.
pub trait Solver: Sync {
    fn complete(
        &self,
        task: &TaskInstance,
        prompt: &RenderedPrompt,
    ) -> Result<CompletionResult, RunError>;

    /// Upper bound on concurrent `complete` calls worth issuing.
    fn concurrency(&self) -> usize {
        1
    }
}

pub struct BaselineSolver(pub BaselineSpec);

impl Solver for BaselineSolver {
    fn complete(
        &self,
        task: &TaskInstance,
        _prompt: &RenderedPrompt,
    ) -> Result<CompletionResult, RunError> {
        Ok(CompletionResult {
            raw_text: solve(task, &self.0),
            finish_reason: FinishReason::Stop,
            latency_ms: 0,
            attempt_count: 1,
        })
    }

    fn concurrency(&self) -> usize {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(8)
    }
}

impl Solver for EndpointClient {
    fn complete(
        &self,
        _task: &TaskInstance,
        prompt: &RenderedPrompt,
    ) -> Result<CompletionResult, RunError> {
        Ok(EndpointClient::complete(self, prompt)?)
    }

    fn concurrency(&self) -> usize {
        self.config().max_in_flight
    }
}

/// Report plus bookkeeping for one `execute_run`/`resume_run` call.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: GridReport,
    pub executed: usize,
    pub skipped: usize,
    pub paths: RunPaths,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    hash: String,
    fingerprint: Value,
    config: RunConfig,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn build_solver(cfg: &RunConfig) -> Result<Box<dyn Solver>, RunError> {
    Ok(match &cfg.solver {
        SolverSpec::Baseline(spec) => Box::new(BaselineSolver(spec.clone())),
        SolverSpec::Endpoint(e) => Box::new(EndpointClient::new(e.clone())?),
    })
}

pub fn execute_run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let solver = build_solver(cfg)?;
    execute_run_with(cfg, solver.as_ref())
}

pub fn resume_run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let solver = build_solver(cfg)?;
    resume_run_with(cfg, solver.as_ref())
}

/// Starts a fresh run. Fails if the run directory already holds records.
pub fn execute_run_with(cfg: &RunConfig, solver: &dyn Solver) -> Result<RunOutcome, RunError> {
    let plan = plan_run(cfg)?;
    let paths = cfg.paths();
    if read_records(&paths.records)
        .map(|l| !l.records.is_empty() || l.dropped_tail)
        .unwrap_or(true)
    {
        return Err(RunError::RunExists(paths.dir));
    }
    let ctx = cfg.gen_context()?;
    preflight(cfg, &ctx)?;
    fs::create_dir_all(&paths.dir)?;
    let hash = cfg.config_hash()?;
    let snapshot = Snapshot {
        hash,
        fingerprint: cfg.fingerprint()?,
        config: cfg.clone(),
    };
    fs::write(
        &paths.config,
        serde_json::to_string_pretty(&snapshot)? + "\n",
    )?;
    fs::write(&paths.records, "")?;
    run_items(cfg, &ctx, solver, &plan, Vec::new(), paths)
}

/// Completes the items missing from an existing run directory.
pub fn resume_run_with(cfg: &RunConfig, solver: &dyn Solver) -> Result<RunOutcome, RunError> {
    let plan = plan_run(cfg)?;
    let paths = cfg.paths();
    if !paths.config.exists() {
        return Err(RunError::NoRun(paths.dir));
    }
    let snapshot: Value = serde_json::from_str(&fs::read_to_string(&paths.config)?)?;
    let found = snapshot
        .get("hash")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let expected = cfg.config_hash()?;
    if found != expected {
        return Err(RunError::ConfigMismatch { expected, found });
    }
    let loaded = repair_records(&paths.records)?;
    let planned: HashSet<_> = plan.iter().map(PlannedItem::key).collect();
    let mut done = HashSet::new();
    for (i, r) in loaded.records.iter().enumerate() {
        if !planned.contains(&r.key()) || !done.insert(r.key()) {
            return Err(RunError::MalformedRecords {
                line: i + 1,
                message: format!("unexpected or repeated item {:?}", r.key()),
            });
        }
    }
    let pending: Vec<PlannedItem> = plan
        .into_iter()
        .filter(|p| !done.contains(&p.key()))
        .collect();
    let ctx = cfg.gen_context()?;
    if !pending.is_empty() {
        preflight(cfg, &ctx)?;
    }
    run_items(cfg, &ctx, solver, &pending, loaded.records, paths)
}

/// Generates index 0 of every bin so parameter errors surface before any
/// request is sent.
fn preflight(cfg: &RunConfig, ctx: &GenContext) -> Result<(), RunError> {
    for &(m, n) in &cfg.grid {
        generate_task(ctx, cfg.family, m, n, 0, cfg.base_seed)?;
    }
    Ok(())
}

pub fn evaluate_item(
    cfg: &RunConfig,
    ctx: &GenContext,
    solver: &dyn Solver,
    item: &PlannedItem,
) -> Result<RunRecord, RunError> {
    let task = generate_task(ctx, cfg.family, item.m, item.n, item.index, cfg.base_seed)?;
    let prompt = render(&task, &PromptTemplateConfig::for_family(cfg.family));
    let completion = solver.complete(&task, &prompt)?;
    let parse = parse_answer(
        &completion.raw_text,
        &prompt.option_letters,
        &prompt.option_texts,
        &cfg.parser,
    );
    let correct_letter = task.correct_letter();
    Ok(RunRecord {
        family: cfg.family,
        m: item.m,
        n: item.n,
        index: item.index,
        instance_seed: item.instance_seed,
        prompt: prompt.text,
        raw_completion: completion.raw_text,
        finish_reason: completion.finish_reason,
        parse,
        predicted: parse.letter,
        correct_letter,
        is_correct: parse.letter == Some(correct_letter),
        attempt_count: completion.attempt_count,
        latency_ms: completion.latency_ms,
        timestamp_ms: now_ms(),
        instance: task,
    })
}

fn run_items(
    cfg: &RunConfig,
    ctx: &GenContext,
    solver: &dyn Solver,
    pending: &[PlannedItem],
    mut finished: Vec<RunRecord>,
    paths: RunPaths,
) -> Result<RunOutcome, RunError> {
    let skipped = finished.len();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&paths.records)?;
    let workers = solver.concurrency().max(1).min(pending.len().max(1));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunRecord, RunError>)>();

    let mut first_error: Option<RunError> = None;
    let mut executed = 0;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, abort) = (&next, &abort);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = pending.get(i) else { break };
                let result = evaluate_item(cfg, ctx, solver, item);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffer: BTreeMap<usize, RunRecord> = BTreeMap::new();
        let mut cursor = 0;
        for (i, result) in rx {
            match result {
                Ok(rec) => {
                    buffer.insert(i, rec);
                }
                Err(e) => {
                    abort.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(e);
                }
            }
            while let Some(rec) = buffer.remove(&cursor) {
                if let Err(e) = file.write_all(rec.to_line().as_bytes()) {
                    abort.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(e.into());
                }
                finished.push(rec);
                executed += 1;
                cursor += 1;
            }
        }
        // Keep completed work past a gap left by a failed item.
        for (_, rec) in std::mem::take(&mut buffer) {
            if file.write_all(rec.to_line().as_bytes()).is_ok() {
                finished.push(rec);
                executed += 1;
            }
        }
    });
    file.flush()?;
    drop(file);
    if let Some(e) = first_error {
        return Err(e);
    }

    write_sorted(&paths.records, &mut finished)?;
    let report = aggregate(&finished)?;
    fs::write(&paths.metrics, report.to_csv())?;
    Ok(RunOutcome {
        report,
        executed,
        skipped,
        paths,
    })
}

/// Re-parses every record with `parser` and recomputes correctness.
pub fn rescore(records: &[RunRecord], parser: &ParserConfig) -> Vec<RunRecord> {
    records.iter().map(|r| r.rescored(parser)).collect()
}

/// Checks that each record's stored instance regenerates from the run's seed
/// and that its correctness flag is consistent with the stored fields.
pub fn verify_records(cfg: &RunConfig, records: &[RunRecord]) -> Result<(), String> {
    let ctx = cfg.gen_context().map_err(|e| e.to_string())?;
    for r in records {
        let regen = generate_task(&ctx, cfg.family, r.m, r.n, r.index, cfg.base_seed)
            .map_err(|e| e.to_string())?;
        if regen != r.instance {
            return Err(format!(
                "instance {:?} does not regenerate from the base seed",
                r.key()
            ));
        }
        if r.is_correct != (r.parse.is_parsed() && r.predicted == Some(r.correct_letter)) {
            return Err(format!(
                "record {:?} has an inconsistent correctness flag",
                r.key()
            ));
        }
        if r.correct_letter != regen.correct_letter() {
            return Err(format!(
                "record {:?} stores the wrong correct letter",
                r.key()
            ));
        }
    }
    Ok(())
}

pub fn load_snapshot_config(run_dir: &Path) -> Result<RunConfig, RunError> {
    let snapshot: Snapshot =
        serde_json::from_str(&fs::read_to_string(run_dir.join("config.json"))?)?;
    Ok(snapshot.config)
}
