//! In-process harness check: scripted solvers run over a reduced grid and the
//! resulting metrics are compared against what each solver must produce.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::baselines::{BaselineKind, BaselineSpec};
use crate::metrics::{aggregate, to_f64, GridReport};
use crate::runner::{
    evaluate_item, plan_run, BaselineSolver, RunConfig, RunError, RunRecord, Solver, SolverSpec,
};
use crate::seed::Seed;
use crate::taskgen::{simulate_collisions, simulate_swaps, Family, Payload, TaskInstance};

pub const FLAKY_RATE: f64 = 0.5;
pub const FLAKY_BAND: f64 = 0.15;

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    pub quick: bool,
    pub base_seed: Seed,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            quick: false,
            base_seed: Seed(20240601),
        }
    }
}

impl SelftestOptions {
    pub fn grid(&self) -> Vec<(usize, usize)> {
        if self.quick {
            vec![(4, 4), (8, 8), (16, 16)]
        } else {
            crate::runner::default_grid()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }

    fn push(&mut self, name: &'static str, failures: Vec<String>, ok_detail: String) {
        let passed = failures.is_empty();
        let detail = if passed {
            ok_detail
        } else {
            failures.join("; ")
        };
        self.checks.push(CheckResult {
            name,
            passed,
            detail,
        });
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Runs the self-test with the stock baseline solvers.
pub fn run(opts: &SelftestOptions) -> Result<SelftestReport, RunError> {
    run_with(opts, &|spec| Box::new(BaselineSolver(spec.clone())))
}

/// Runs the self-test, building each solver through `make`. Tests use this to
/// inject faulty solvers.
pub fn run_with(
    opts: &SelftestOptions,
    make: &dyn Fn(&BaselineSpec) -> Box<dyn Solver>,
) -> Result<SelftestReport, RunError> {
    let mut report = SelftestReport::default();
    let families = [Family::Astro, Family::Collision];
    let oracle = BaselineSpec::oracle();
    let random = BaselineSpec::random(Seed(opts.base_seed.0 ^ 0x5eed));
    let flaky = BaselineSpec::flaky(
        BaselineSpec::oracle(),
        FLAKY_RATE,
        Seed(opts.base_seed.0 ^ 0xf1a7),
    );

    let mut runs: BTreeMap<(BaselineKind, Family), (Vec<RunRecord>, GridReport)> = BTreeMap::new();
    for spec in [&oracle, &random, &flaky] {
        let solver = make(spec);
        for family in families {
            let cfg = selftest_config(opts, family, spec);
            let records = evaluate_all(&cfg, solver.as_ref())?;
            let grid = aggregate(&records)?;
            runs.insert((spec.kind, family), (records, grid));
        }
    }

    let mut fails = Vec::new();
    for family in families {
        let grid = &runs[&(BaselineKind::Oracle, family)].1;
        for b in &grid.bins {
            if b.correct != b.total || b.parsed != b.total {
                fails.push(format!(
                    "{family} {}x{}: {}/{} correct",
                    b.m, b.n, b.correct, b.total
                ));
            }
        }
    }
    report.push("oracle-accuracy", fails, "accuracy 1.0 in every bin".into());

    let mut fails = Vec::new();
    let mut seen = Vec::new();
    for family in families {
        let pooled = runs[&(BaselineKind::Random, family)].1.pooled();
        let p = family.chance_level();
        let n = pooled.total as f64;
        let tol = 3.0 * (p * (1.0 - p) / n).sqrt();
        let acc = to_f64(pooled.accuracy());
        seen.push(format!("{family} {acc:.4}"));
        if (acc - p).abs() > tol {
            fails.push(format!("{family}: {acc:.4} outside {p} +/- {tol:.4}"));
        }
    }
    report.push("chance-calibration", fails, seen.join(", "));

    let mut fails = Vec::new();
    for ((kind, family), (_, grid)) in &runs {
        for b in &grid.bins {
            if b.parsed_weighted() * b.total != b.correct.into() {
                fails.push(format!("{kind:?} {family} {}x{}", b.m, b.n));
            }
        }
    }
    report.push(
        "metric-identity",
        fails,
        "parsed_weighted x total = correct in every bin".into(),
    );

    let mut fails = Vec::new();
    for family in families {
        for b in &runs[&(BaselineKind::FlakyFormat, family)].1.bins {
            let acc = to_f64(b.accuracy());
            let rate = to_f64(b.parsed_rate());
            let pw = to_f64(b.parsed_weighted());
            let in_band = |x: f64| (x - FLAKY_RATE).abs() <= FLAKY_BAND;
            if acc < 0.99 || !in_band(rate) || !in_band(pw) {
                fails.push(format!(
                    "{family} {}x{}: acc {acc:.3} parsed {rate:.3} pw {pw:.3}",
                    b.m, b.n
                ));
            }
        }
    }
    report.push(
        "flaky-parsed-weighted",
        fails,
        "raw accuracy high, parsed-weighted near the format rate".into(),
    );

    let mut fails = Vec::new();
    let mut checked = 0;
    for (_, (records, _)) in runs.iter().filter(|((k, _), _)| *k == BaselineKind::Oracle) {
        for r in records {
            checked += 1;
            if let Err(e) = conserved(&r.instance) {
                fails.push(format!("{:?}: {e}", r.key()));
            }
            if let Err(e) = r.instance.validate(&Default::default()) {
                fails.push(format!("{:?}: {e}", r.key()));
            }
        }
    }
    report.push(
        "conservation-and-constraints",
        fails,
        format!("{checked} instances"),
    );

    Ok(report)
}

fn selftest_config(opts: &SelftestOptions, family: Family, spec: &BaselineSpec) -> RunConfig {
    let mut cfg = RunConfig::new(
        family,
        SolverSpec::Baseline(spec.clone()),
        PathBuf::new(),
        "selftest",
    );
    cfg.grid = opts.grid();
    cfg.base_seed = opts.base_seed;
    cfg
}

fn evaluate_all(cfg: &RunConfig, solver: &dyn Solver) -> Result<Vec<RunRecord>, RunError> {
    let plan = plan_run(cfg)?;
    let ctx = cfg.gen_context()?;
    let workers = solver.concurrency().max(1);
    let chunk = plan.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = plan
            .chunks(chunk)
            .map(|items| {
                let ctx = &ctx;
                s.spawn(move || {
                    items
                        .iter()
                        .map(|it| evaluate_item(cfg, ctx, solver, it))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("selftest worker panicked"))
            .collect()
    })
}

/// Final values must be a rearrangement (collisions) or a subset (swaps) of
/// the initial values.
fn conserved(task: &TaskInstance) -> Result<(), String> {
    match &task.payload {
        Payload::Collision(c) => {
            let end =
                simulate_collisions(&c.velocities, &c.collisions).map_err(|e| e.to_string())?;
            let mut a: Vec<i64> = c.velocities.values().copied().collect();
            let mut b: Vec<i64> = end.values().copied().collect();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err("velocity multiset changed".into());
            }
        }
        Payload::Astro(a) => {
            let end = simulate_swaps(&a.binding, &a.swaps).map_err(|e| e.to_string())?;
            if !end.values().all(|v| a.binding.values().any(|w| w == v)) {
                return Err("swap produced a value outside the initial set".into());
            }
        }
    }
    Ok(())
}
