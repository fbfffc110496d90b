//! Python bindings for the state-recall benchmark core.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use staterecall_core::answerparse::ParserConfig;
use staterecall_core::metrics::{aggregate, fixed6, to_f64, BinMetrics};
use staterecall_core::runner::{read_records, SolverSpec};
use staterecall_core::selftest::{self, SelftestOptions};
use staterecall_core::{
    BaselineKind, BaselineSpec, Family, GenContext, OptionLetter, ParticleLabel, RunConfig, Seed,
    SwapOp, SwapPattern, TaskInstance, VarName,
};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn family(s: &str) -> PyResult<Family> {
    s.parse().map_err(err)
}

/// A generated task instance.
#[pyclass(frozen, module = "staterecall")]
struct Task {
    inner: TaskInstance,
}

#[pymethods]
impl Task {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Task {
            inner: serde_json::from_str(text).map_err(err)?,
        })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.as_str()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn index(&self) -> usize {
        self.inner.index
    }

    #[getter]
    fn instance_seed(&self) -> u64 {
        self.inner.instance_seed.0
    }

    #[getter]
    fn correct_letter(&self) -> String {
        self.inner.correct_letter().to_string()
    }

    #[getter]
    fn option_letters(&self) -> Vec<String> {
        self.inner
            .option_letters()
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[getter]
    fn option_texts(&self) -> Vec<String> {
        self.inner.option_texts()
    }

    /// Prompt text with the default answer instruction.
    fn prompt(&self) -> String {
        staterecall_core::render(
            &self.inner,
            &staterecall_core::PromptTemplateConfig::for_family(self.inner.family),
        )
        .text
    }

    fn to_json(&self) -> String {
        self.inner.to_canonical_json()
    }

    /// Reply of a scripted baseline: oracle, random, stateless or flaky.
    #[pyo3(signature = (kind, seed = 0, fail_rate = 0.5))]
    fn baseline_reply(&self, kind: &str, seed: u64, fail_rate: f64) -> PyResult<String> {
        let spec = baseline(kind, seed, fail_rate)?;
        Ok(staterecall_core::solve(&self.inner, &spec))
    }

    /// Parse a reply against this task's options: (status, letter, reason).
    #[pyo3(signature = (raw, accept_option_text = true))]
    fn parse(
        &self,
        raw: &str,
        accept_option_text: bool,
    ) -> (String, Option<String>, Option<String>) {
        let cfg = ParserConfig {
            accept_option_text,
            ..ParserConfig::default()
        };
        let out = staterecall_core::parse_answer(
            raw,
            &self.inner.option_letters(),
            &self.inner.option_texts(),
            &cfg,
        );
        outcome_tuple(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Task(family={}, m={}, n={}, index={})",
            self.inner.family, self.inner.m, self.inner.n, self.inner.index
        )
    }
}

fn outcome_tuple(out: staterecall_core::ParseOutcome) -> (String, Option<String>, Option<String>) {
    let json = serde_json::to_value(out).expect("outcomes serialize");
    let field = |k: &str| json.get(k).and_then(|v| v.as_str()).map(str::to_string);
    (
        field("status").unwrap_or_default(),
        field("letter"),
        field("reason"),
    )
}

fn baseline(kind: &str, seed: u64, fail_rate: f64) -> PyResult<BaselineSpec> {
    let spec = match kind.parse::<BaselineKind>().map_err(err)? {
        BaselineKind::Oracle => BaselineSpec::oracle(),
        BaselineKind::Random => BaselineSpec::random(Seed(seed)),
        BaselineKind::Stateless => BaselineSpec::stateless(),
        BaselineKind::FlakyFormat => {
            BaselineSpec::flaky(BaselineSpec::oracle(), fail_rate, Seed(seed))
        }
    };
    spec.validate().map_err(err)?;
    Ok(spec)
}

#[pyfunction]
fn derive_instance_seed(
    base_seed: u64,
    family: &str,
    m: usize,
    n: usize,
    index: usize,
) -> PyResult<u64> {
    Ok(
        staterecall_core::derive_instance_seed(Seed(base_seed), self::family(family)?, m, n, index)
            .0,
    )
}

#[pyfunction]
#[pyo3(signature = (family, m, n, index = 0, base_seed = 0, swap_pattern = "anchored"))]
fn generate(
    family: &str,
    m: usize,
    n: usize,
    index: usize,
    base_seed: u64,
    swap_pattern: &str,
) -> PyResult<Task> {
    let ctx = GenContext {
        swap_pattern: swap_pattern.parse::<SwapPattern>().map_err(err)?,
        ..GenContext::default()
    };
    let inner =
        staterecall_core::generate_task(&ctx, self::family(family)?, m, n, index, Seed(base_seed))
            .map_err(err)?;
    Ok(Task { inner })
}

/// Applies simultaneous swaps `(l0, l1, r0, r1)` to a name -> value binding.
#[pyfunction]
fn simulate_swaps(
    binding: BTreeMap<String, String>,
    ops: Vec<(String, String, String, String)>,
) -> PyResult<BTreeMap<String, String>> {
    let var = |s: &str| VarName::parse(s).ok_or_else(|| err(format!("bad variable name {s:?}")));
    let mut init = BTreeMap::new();
    for (k, v) in binding {
        init.insert(var(&k)?, v);
    }
    let mut swaps = Vec::new();
    for (a, b, c, d) in ops {
        swaps.push(SwapOp::new([var(&a)?, var(&b)?], [var(&c)?, var(&d)?]).map_err(err)?);
    }
    let end = staterecall_core::simulate_swaps(&init, &swaps).map_err(err)?;
    Ok(end.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

#[pyfunction]
fn simulate_collisions(
    velocities: BTreeMap<String, i64>,
    collisions: Vec<(String, String)>,
) -> PyResult<BTreeMap<String, i64>> {
    let label =
        |s: &str| ParticleLabel::parse(s).ok_or_else(|| err(format!("bad particle label {s:?}")));
    let mut init = BTreeMap::new();
    for (k, v) in velocities {
        init.insert(label(&k)?, v);
    }
    let mut cs = Vec::new();
    for (a, b) in collisions {
        cs.push((label(&a)?, label(&b)?));
    }
    let end = staterecall_core::simulate_collisions(&init, &cs).map_err(err)?;
    Ok(end.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

/// Parse a raw reply given the option letters and texts: (status, letter, reason).
#[pyfunction]
#[pyo3(signature = (raw, letters, texts, accept_option_text = true))]
fn parse_answer(
    raw: &str,
    letters: Vec<String>,
    texts: Vec<String>,
    accept_option_text: bool,
) -> PyResult<(String, Option<String>, Option<String>)> {
    let letters = letters
        .iter()
        .map(|l| OptionLetter::parse(l).ok_or_else(|| err(format!("bad option letter {l:?}"))))
        .collect::<PyResult<Vec<_>>>()?;
    let cfg = ParserConfig {
        accept_option_text,
        ..ParserConfig::default()
    };
    Ok(outcome_tuple(staterecall_core::parse_answer(
        raw, &letters, &texts, &cfg,
    )))
}

/// Accuracy, parse rate and parsed-weighted accuracy of a bin, as floats.
#[pyfunction]
fn bin_metrics(total: u64, parsed: u64, correct: u64) -> PyResult<BTreeMap<String, f64>> {
    if total == 0 || parsed > total || correct > parsed {
        return Err(err("need correct <= parsed <= total and total > 0"));
    }
    let b = BinMetrics {
        m: 0,
        n: 0,
        total,
        parsed,
        correct,
    };
    Ok(BTreeMap::from([
        ("accuracy".to_string(), to_f64(b.accuracy())),
        ("parsed_rate".to_string(), to_f64(b.parsed_rate())),
        ("parsed_weighted".to_string(), to_f64(b.parsed_weighted())),
    ]))
}

/// accuracy x parsed / total, rendered with six decimals. `accuracy` is given
/// as a fraction `(numerator, denominator)` so the result stays exact.
#[pyfunction]
fn parsed_weighted(accuracy: (u64, u64), parsed: u64, total: u64) -> PyResult<String> {
    if accuracy.1 == 0 {
        return Err(err("zero denominator"));
    }
    let acc = staterecall_core::metrics::Rational::new(accuracy.0, accuracy.1);
    Ok(fixed6(
        staterecall_core::parsed_weighted(acc, parsed, total).map_err(err)?,
    ))
}

/// Metrics CSV for a records file.
#[pyfunction]
fn metrics_csv(records_path: PathBuf) -> PyResult<String> {
    let loaded = read_records(&records_path).map_err(err)?;
    Ok(aggregate(&loaded.records).map_err(err)?.to_csv())
}

/// Runs a scripted baseline over a grid and returns the metrics CSV.
#[pyfunction]
#[pyo3(signature = (family, grid, count, output_dir, run_id, baseline = "oracle", seed = 0, baseline_seed = 0, fail_rate = 0.5))]
#[allow(clippy::too_many_arguments)]
fn run_baseline(
    family: &str,
    grid: Vec<(usize, usize)>,
    count: usize,
    output_dir: PathBuf,
    run_id: &str,
    baseline: &str,
    seed: u64,
    baseline_seed: u64,
    fail_rate: f64,
) -> PyResult<String> {
    let spec = self::baseline(baseline, baseline_seed, fail_rate)?;
    let mut cfg = RunConfig::new(
        self::family(family)?,
        SolverSpec::Baseline(spec),
        output_dir,
        run_id,
    );
    cfg.grid = grid;
    cfg.instances_per_bin = count;
    cfg.base_seed = Seed(seed);
    let outcome = staterecall_core::execute_run(&cfg).map_err(err)?;
    Ok(outcome.report.to_csv())
}

/// Runs the self-test and returns `(passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (quick = true))]
fn run_selftest(quick: bool) -> PyResult<(bool, String)> {
    let report = selftest::run(&SelftestOptions {
        quick,
        ..Default::default()
    })
    .map_err(err)?;
    Ok((report.passed(), report.to_string()))
}

#[pymodule]
fn staterecall(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Task>()?;
    m.add_function(wrap_pyfunction!(derive_instance_seed, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_swaps, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_collisions, m)?)?;
    m.add_function(wrap_pyfunction!(parse_answer, m)?)?;
    m.add_function(wrap_pyfunction!(bin_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(parsed_weighted, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}
