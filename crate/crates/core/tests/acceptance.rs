//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; the process fails if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::AtomicUsize;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{completion_body, prompt_of, solve_astro_prompt, solve_collision_prompt, MockServer};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use staterecall_core::metrics::{fixed6, GridReport, Rational};
use staterecall_core::runner::{default_grid, read_records, RunConfig, SolverSpec};
use staterecall_core::{
    execute_run, generate_task, parsed_weighted, render, simulate_collisions, simulate_swaps,
    BaselineSpec, EndpointConfig, Family, GenContext, GenError, OptionLetter, ParseOutcome,
    ParticleLabel, Payload, PromptTemplateConfig, RunRecord, Seed, SwapOp, SwapPattern,
    UnparsedReason, VarName, Variant, VelocityPool,
};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn baseline_run(
    dir: &Path,
    family: Family,
    spec: BaselineSpec,
    id: &str,
) -> Result<GridReport, String> {
    let mut cfg = RunConfig::new(family, SolverSpec::Baseline(spec), dir, id);
    cfg.base_seed = Seed(2024);
    execute_run(&cfg)
        .map(|o| o.report)
        .map_err(|e| e.to_string())
}

fn identity_holds(report: &GridReport) -> Result<(), String> {
    for b in &report.bins {
        ensure!(
            b.parsed_weighted() * b.total == Rational::from_integer(b.correct),
            "{} {}x{}: parsed_weighted x total != correct",
            report.family,
            b.m,
            b.n
        );
    }
    Ok(())
}

fn oracle_sweep(dir: &Path) -> Outcome {
    let started = Instant::now();
    let mut bins = 0;
    for family in [Family::Astro, Family::Collision] {
        let report = baseline_run(
            dir,
            family,
            BaselineSpec::oracle(),
            &format!("oracle-{family}"),
        )?;
        for b in &report.bins {
            ensure!(
                b.total == 100,
                "{family} {}x{} has {} instances",
                b.m,
                b.n,
                b.total
            );
            ensure!(
                b.accuracy() == Rational::from_integer(1),
                "{family} {}x{} accuracy {}",
                b.m,
                b.n,
                b.accuracy()
            );
            ensure!(
                b.parsed_weighted() == Rational::from_integer(1),
                "{family} {}x{} parsed_weighted",
                b.m,
                b.n
            );
        }
        identity_holds(&report)?;
        bins += report.bins.len();
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(bins == 50, "{bins} bins");
    ensure!(secs < 60.0, "took {secs:.1}s");
    Ok(format!("{bins} bins at 1.0 in {secs:.1}s"))
}

fn chance_calibration(dir: &Path) -> Outcome {
    // Tolerance 0.03 is the 3-sigma binomial bound for p = 0.5 at N = 2500
    // (sigma = 0.01); for p = 0.25 sigma = 0.0087, so 0.03 is looser than 3 sigma.
    let mut notes = Vec::new();
    for family in [Family::Astro, Family::Collision] {
        let report = baseline_run(
            dir,
            family,
            BaselineSpec::random(Seed(99)),
            &format!("random-{family}"),
        )?;
        identity_holds(&report)?;
        let pooled = report.pooled();
        ensure!(pooled.total >= 2500, "only {} instances", pooled.total);
        let acc = staterecall_core::metrics::to_f64(pooled.accuracy());
        let p = family.chance_level();
        ensure!(
            (acc - p).abs() <= 0.03,
            "{family} accuracy {acc:.4} vs chance {p}"
        );
        notes.push(format!("{family} {acc:.4} (chance {p})"));
    }
    Ok(notes.join(", "))
}

fn metric_identity(dir: &Path) -> Outcome {
    let pw = parsed_weighted(Rational::from_integer(1), 3, 100).map_err(|e| e.to_string())?;
    ensure!(pw == Rational::new(3, 100), "(1.0, 3, 100) gave {pw}");
    ensure!(fixed6(pw) == "0.030000", "rendered {}", fixed6(pw));
    let mut checked = 0;
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let records_path = entry
            .map_err(|e| e.to_string())?
            .path()
            .join("records.jsonl");
        let records = read_records(&records_path)
            .map_err(|e| e.to_string())?
            .records;
        if records.is_empty() {
            continue;
        }
        let report = staterecall_core::aggregate(&records).map_err(|e| e.to_string())?;
        identity_holds(&report)?;
        // Recount from the raw records, independently of the aggregator.
        let mut counts: BTreeMap<(usize, usize), (u64, u64, u64)> = BTreeMap::new();
        for r in &records {
            let c = counts.entry((r.m, r.n)).or_default();
            c.0 += 1;
            c.1 += r.parse.is_parsed() as u64;
            c.2 += r.is_correct as u64;
        }
        for b in &report.bins {
            ensure!(
                counts[&(b.m, b.n)] == (b.total, b.parsed, b.correct),
                "recount differs at {}x{}",
                b.m,
                b.n
            );
        }
        checked += report.bins.len();
    }
    ensure!(checked >= 100, "only {checked} bins checked");
    Ok(format!(
        "(1.0, 3, 100) -> 0.030000; identity exact in {checked} bins"
    ))
}

fn flaky_demo(dir: &Path) -> Outcome {
    let mut worst: f64 = 0.0;
    for family in [Family::Astro, Family::Collision] {
        let spec = BaselineSpec::flaky(BaselineSpec::oracle(), 0.5, Seed(31));
        let report = baseline_run(dir, family, spec, &format!("flaky-{family}"))?;
        identity_holds(&report)?;
        for b in &report.bins {
            let acc = staterecall_core::metrics::to_f64(b.accuracy());
            let rate = staterecall_core::metrics::to_f64(b.parsed_rate());
            let pw = staterecall_core::metrics::to_f64(b.parsed_weighted());
            ensure!(acc >= 0.99, "{family} {}x{} raw accuracy {acc}", b.m, b.n);
            ensure!(
                (rate - 0.5).abs() <= 0.15,
                "{family} {}x{} parsed_rate {rate}",
                b.m,
                b.n
            );
            ensure!(
                (pw - 0.5).abs() <= 0.15,
                "{family} {}x{} parsed_weighted {pw}",
                b.m,
                b.n
            );
            worst = worst.max((pw - 0.5).abs());
        }
    }
    Ok(format!(
        "raw accuracy 1.0, parsed_weighted within 0.5 +/- {worst:.2} in all 50 bins"
    ))
}

fn conservation() -> Outcome {
    let cases = 10_000;
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let pool = VelocityPool::default();
    let collisions = (2usize..40, 0usize..60, any::<u64>())
        .prop_filter("degenerate", |(m, n, _)| !(*m == 2 && *n >= 2));
    let count = Arc::new(AtomicUsize::new(0));
    runner
        .run(&collisions, |(m, n, seed)| {
            let inst = staterecall_core::generate_collision(m, n, Seed(seed), &pool)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let end = simulate_collisions(&inst.velocities, &inst.collisions)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut a: Vec<i64> = inst.velocities.values().copied().collect();
            let mut b: Vec<i64> = end.values().copied().collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            count.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            Ok(())
        })
        .map_err(|e| format!("collision: {e}"))?;

    let swaps = (
        2usize..30,
        proptest::collection::vec(
            (any::<u64>(), any::<u64>(), any::<u64>(), any::<u64>()),
            0..60,
        ),
    )
        .prop_flat_map(|(m, raw)| {
            (
                Just(m),
                Just(raw),
                proptest::collection::vec(-1000i64..1000, m),
            )
        });
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&swaps, |(m, raw, values)| {
            let names: Vec<VarName> = (0..m).map(VarName::from_index).collect();
            let init: BTreeMap<VarName, i64> =
                names.iter().cloned().zip(values.iter().copied()).collect();
            let pick = |x: u64| names[(x % m as u64) as usize].clone();
            let ops: Vec<SwapOp> = raw
                .iter()
                .filter_map(|&(a, b, c, d)| {
                    SwapOp::new([pick(a), pick(b)], [pick(c), pick(d)]).ok()
                })
                .collect();
            let end =
                simulate_swaps(&init, &ops).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(end.len(), m);
            for v in end.values() {
                prop_assert!(values.contains(v));
            }
            Ok(())
        })
        .map_err(|e| format!("swaps: {e}"))?;
    let c = count.load(std::sync::atomic::Ordering::Relaxed);
    ensure!(c >= cases as usize, "only {c} collision cases ran");
    Ok(format!(
        "{c} collision instances, {cases} swap cases, no counterexamples"
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut checked = 0usize;
    let mut rejected = 0usize;
    let mut contexts = Vec::new();
    for pattern in [
        SwapPattern::Anchored,
        SwapPattern::TrueSwap,
        SwapPattern::General,
    ] {
        contexts.push((
            Family::Astro,
            GenContext {
                swap_pattern: pattern,
                ..GenContext::default()
            },
        ));
    }
    contexts.push((Family::Collision, GenContext::default()));
    for (family, ctx) in &contexts {
        let template = PromptTemplateConfig::for_family(*family);
        for m in 2..=6 {
            for n in 0..=6 {
                for seed in 0..1000u64 {
                    let task = match generate_task(ctx, *family, m, n, 0, Seed(seed)) {
                        Ok(t) => t,
                        Err(GenError::DegenerateNoUndo { .. })
                        | Err(GenError::InvalidParameters(_)) => {
                            rejected += 1;
                            continue;
                        }
                        Err(e) => return Err(format!("{family} {m}x{n} seed {seed}: {e}")),
                    };
                    let prompt = render(&task, &template).text;
                    let solved = match family {
                        Family::Astro => solve_astro_prompt(&prompt),
                        Family::Collision => solve_collision_prompt(&prompt),
                    }
                    .map_err(|e| {
                        format!("{family} {m}x{n} seed {seed}: interpreter failed: {e}")
                    })?;
                    ensure!(
                        solved == task.correct_letter().as_char(),
                        "{family} {m}x{n} seed {seed}: interpreter {solved}, stored {}",
                        task.correct_letter()
                    );
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "{checked} instances agree ({rejected} parameter combinations rejected by the generator)"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        for family in ["astro", "collision"] {
            let out = dir.path().join(format!("{family}-{name}"));
            let status = Command::new(env!("CARGO_BIN_EXE_staterecall"))
                .args([
                    "generate", "--family", family, "--square", "--count", "4", "--seed", "17",
                    "--out",
                ])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure!(
                status.status.success(),
                "generate failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            files.push((family, fs::read(&out).map_err(|e| e.to_string())?));
        }
    }
    ensure!(
        files[0].1 == files[2].1 && files[1].1 == files[3].1,
        "generate output differs between invocations"
    );

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/v1");
    let mut compared = 0;
    let ctx = GenContext::default();
    for entry in fs::read_dir(&golden).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let Some(stem) = name.strip_suffix(".prompt.txt") else {
            continue;
        };
        // {family}_m{m}_n{n}_i{index}_s{seed}
        let parts: Vec<&str> = stem.split('_').collect();
        let num = |p: &str, k: &str| {
            p.strip_prefix(k)
                .and_then(|x| x.parse::<u64>().ok())
                .ok_or(format!("bad name {name}"))
        };
        let family: Family = parts[0].parse().map_err(|_| format!("bad name {name}"))?;
        let (m, n, i, s) = (
            num(parts[1], "m")?,
            num(parts[2], "n")?,
            num(parts[3], "i")?,
            num(parts[4], "s")?,
        );
        let task = generate_task(&ctx, family, m as usize, n as usize, i as usize, Seed(s))
            .map_err(|e| e.to_string())?;
        let expected = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        ensure!(
            render(&task, &PromptTemplateConfig::for_family(family)).text == expected,
            "{name} differs"
        );
        compared += 1;
    }
    ensure!(compared >= 6, "only {compared} golden prompts found");
    Ok(format!(
        "identical generate output; {compared} golden prompts match"
    ))
}

fn constraint_audit() -> Outcome {
    let pool = VelocityPool::default();
    let mut collisions = 0;
    let mut astros = 0;
    for family in [Family::Collision, Family::Astro] {
        // Small corner cases on top of the standard grid.
        let extra = match family {
            Family::Collision => [(2, 1), (3, 5), (3, 40), (5, 0)],
            Family::Astro => [(2, 0), (3, 5), (3, 40), (5, 0)],
        };
        let grid: Vec<(usize, usize)> = default_grid().into_iter().chain(extra).collect();
        let ctx = GenContext::default();
        let mut index = 0;
        while (if family == Family::Collision {
            collisions
        } else {
            astros
        }) < 10_000
        {
            let (m, n) = grid[index % grid.len()];
            index += 1;
            let task =
                generate_task(&ctx, family, m, n, index, Seed(77)).map_err(|e| e.to_string())?;
            task.validate(&pool).map_err(|e| format!("{m}x{n}: {e}"))?;
            match &task.payload {
                Payload::Collision(c) => {
                    for w in c.collisions.windows(2) {
                        let same = (w[0].0 == w[1].0 && w[0].1 == w[1].1)
                            || (w[0].0 == w[1].1 && w[0].1 == w[1].0);
                        ensure!(
                            !same,
                            "{m}x{n} index {index}: adjacent duplicate pair {:?}",
                            w[0]
                        );
                    }
                    ensure!(c.collisions.iter().all(|(a, b)| a != b), "self collision");
                    let mut opts = c.options.clone();
                    opts.sort_unstable();
                    opts.dedup();
                    ensure!(opts.len() == 4, "repeated option values");
                    ensure!(
                        c.options.iter().all(|v| pool.contains(*v)),
                        "option outside the pool"
                    );
                    let labels: Vec<&ParticleLabel> = c.velocities.keys().collect();
                    ensure!(labels.len() == m, "wrong particle count");
                    ensure!(
                        c.options[c.correct_letter.position()] == c.correct_value(),
                        "correct option mismatch"
                    );
                    collisions += 1;
                }
                Payload::Astro(a) => {
                    ensure!(
                        a.options[0] != a.options[1],
                        "{m}x{n} index {index}: distractor equals the correct answer"
                    );
                    ensure!(
                        a.options[a.correct_letter.position()] == a.answer(),
                        "correct option mismatch"
                    );
                    let idents: Vec<&str> = (0..a.rows.len()).map(|r| a.identity(r)).collect();
                    ensure!(
                        a.options.iter().all(|o| idents.contains(&o.as_str())),
                        "option not in the table"
                    );
                    astros += 1;
                }
            }
        }
    }
    Ok(format!(
        "{collisions} collision and {astros} astro instances clean"
    ))
}

/// Canned replies by instance index.
fn canned(
    index: usize,
    correct: char,
    options: usize,
) -> (String, &'static str, Option<ParseOutcome>) {
    let ok = |c: char| {
        Some(ParseOutcome::parsed(
            OptionLetter::parse(&c.to_string()).unwrap(),
        ))
    };
    let wrong = (b'A' + ((correct as u8 - b'A' + 1) % options as u8)) as char;
    match index % 5 {
        0 => (
            format!("{{\"answer\": \"{correct}\"}}"),
            "stop",
            ok(correct),
        ),
        1 => (
            format!("<think>a, b = b, a ... so {wrong}?</think>\n{{\"answer\": \"{correct}\"}}"),
            "stop",
            ok(correct),
        ),
        2 => (
            "I am not sure about this one.".into(),
            "stop",
            Some(ParseOutcome::unparsed(UnparsedReason::NoJsonObject)),
        ),
        3 => (
            "<think>first swap moves a to d, then".into(),
            "length",
            Some(ParseOutcome::unparsed(UnparsedReason::Truncated)),
        ),
        _ => (
            format!("```json\n{{\"answer\": \"{wrong}\"}}\n```"),
            "stop",
            ok(wrong),
        ),
    }
}

fn mock_round_trip(dir: &Path) -> Outcome {
    let mut notes = Vec::new();
    for family in [Family::Astro, Family::Collision] {
        let mut probe = RunConfig::new(
            family,
            SolverSpec::Baseline(BaselineSpec::oracle()),
            dir,
            "probe",
        );
        probe.grid = vec![(4, 4), (8, 8)];
        probe.instances_per_bin = 20;
        let ctx = probe.gen_context().map_err(|e| e.to_string())?;
        let mut by_prompt: HashMap<String, (String, &'static str)> = HashMap::new();
        let mut expected: HashMap<(usize, usize, usize), ParseOutcome> = HashMap::new();
        for item in staterecall_core::plan_run(&probe).map_err(|e| e.to_string())? {
            let task = generate_task(&ctx, family, item.m, item.n, item.index, probe.base_seed)
                .map_err(|e| e.to_string())?;
            let prompt = render(&task, &PromptTemplateConfig::for_family(family));
            let (reply, finish, outcome) = canned(
                item.index,
                task.correct_letter().as_char(),
                prompt.option_letters.len(),
            );
            by_prompt.insert(prompt.text, (reply, finish));
            expected.insert(item.key(), outcome.unwrap());
        }
        let server = MockServer::start(move |_, body| {
            let (reply, finish) = &by_prompt[&prompt_of(body)];
            (200, completion_body(reply, finish))
        });
        let mut endpoint = EndpointConfig::preset(&server.url, "mock", Variant::Think);
        endpoint.max_in_flight = 4;
        let mut cfg = probe.clone();
        cfg.solver = SolverSpec::Endpoint(endpoint);
        cfg.run_id = format!("mock-{family}");
        let outcome = execute_run(&cfg).map_err(|e| e.to_string())?;
        let records = read_records(&outcome.paths.records)
            .map_err(|e| e.to_string())?
            .records;
        ensure!(records.len() == 40, "{} records", records.len());
        for r in &records {
            ensure!(
                r.parse == expected[&r.key()],
                "{:?}: got {:?}, want {:?}",
                r.key(),
                r.parse,
                expected[&r.key()]
            );
        }
        for b in &outcome.report.bins {
            // Per 20 instances: cases 0, 1 correct; 4 parsed but wrong; 2, 3 unparsed.
            ensure!(
                (b.total, b.parsed, b.correct) == (20, 12, 8),
                "{family} {}x{}: {:?}",
                b.m,
                b.n,
                (b.total, b.parsed, b.correct)
            );
            ensure!(
                b.parsed_weighted() == Rational::new(8, 20),
                "parsed_weighted {}",
                b.parsed_weighted()
            );
        }
        notes.push(format!("{family} 40/40 outcomes"));
    }

    // Retry policy: two server errors, then success.
    let server = MockServer::start(|n, body| match n {
        0 | 1 => (503, "{}".into()),
        _ => {
            let answer = solve_collision_prompt(&prompt_of(body)).unwrap();
            (
                200,
                completion_body(&format!("{{\"answer\": \"{answer}\"}}"), "stop"),
            )
        }
    });
    let mut endpoint = EndpointConfig::preset(&server.url, "mock", Variant::Instruct);
    endpoint.backoff_base_ms = 10;
    endpoint.max_in_flight = 1;
    let mut cfg = RunConfig::new(
        Family::Collision,
        SolverSpec::Endpoint(endpoint),
        dir,
        "mock-retry",
    );
    cfg.grid = vec![(4, 4)];
    cfg.instances_per_bin = 1;
    let outcome = execute_run(&cfg).map_err(|e| e.to_string())?;
    let records = read_records(&outcome.paths.records)
        .map_err(|e| e.to_string())?
        .records;
    ensure!(
        records[0].attempt_count == 3,
        "attempt_count {}",
        records[0].attempt_count
    );
    ensure!(records[0].is_correct, "retried reply not scored correct");
    notes.push("retry attempt_count = 3".into());
    Ok(notes.join(", "))
}

fn resume_after_kill(dir: &Path) -> Outcome {
    let server = MockServer::start(|_, body| {
        std::thread::sleep(Duration::from_millis(4));
        let prompt = prompt_of(body);
        let answer = if prompt.contains("Initial velocities:") {
            solve_collision_prompt(&prompt)
        } else {
            solve_astro_prompt(&prompt)
        };
        // Every seventh reply names a wrong letter so records are not uniform.
        let reply = match answer {
            Ok(c) if !prompt.len().is_multiple_of(7) => format!("{{\"answer\": \"{c}\"}}"),
            _ => "{\"answer\": \"B\"}".into(),
        };
        (200, completion_body(&reply, "stop"))
    });
    let run = |id: &str, resume: bool| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_staterecall"));
        cmd.args([
            "run",
            "--family",
            "astro",
            "--grid",
            "4x4,8x8,16x16,32x32",
            "--count",
            "100",
            "--seed",
            "5",
        ])
        .args([
            "--endpoint",
            &server.url,
            "--max-in-flight",
            "2",
            "--run-id",
            id,
            "--output-dir",
        ])
        .arg(dir);
        if resume {
            cmd.arg("--resume");
        }
        cmd
    };
    let full = run("uninterrupted", false)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        full.status.success(),
        "uninterrupted run failed: {}",
        String::from_utf8_lossy(&full.stderr)
    );

    let records_path = dir.join("killed/records.jsonl");
    let mut child = run("killed", false)
        .stdout(std::process::Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let lines = fs::read_to_string(&records_path)
            .map(|t| t.lines().count())
            .unwrap_or(0);
        if lines >= 200 || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    child.kill().map_err(|e| e.to_string())?;
    let status = child.wait().map_err(|e| e.to_string())?;
    ensure!(!status.success(), "run finished before it could be killed");
    let at_kill = read_records(&records_path)
        .map_err(|e| e.to_string())?
        .records
        .len();
    ensure!(at_kill < 400, "run completed before the kill");

    let resumed = run("killed", true).output().map_err(|e| e.to_string())?;
    ensure!(
        resumed.status.success(),
        "resume failed: {}",
        String::from_utf8_lossy(&resumed.stderr)
    );

    let load = |id: &str| -> Result<Vec<RunRecord>, String> {
        Ok(read_records(&dir.join(id).join("records.jsonl"))
            .map_err(|e| e.to_string())?
            .records
            .iter()
            .map(RunRecord::without_timing)
            .collect())
    };
    let (a, b) = (load("uninterrupted")?, load("killed")?);
    ensure!(a.len() == 400, "{} records", a.len());
    ensure!(a == b, "resumed records differ from the uninterrupted run");
    let ma = fs::read(dir.join("uninterrupted/metrics.csv")).map_err(|e| e.to_string())?;
    let mb = fs::read(dir.join("killed/metrics.csv")).map_err(|e| e.to_string())?;
    ensure!(ma == mb, "metrics differ");
    Ok(format!(
        "killed at {at_kill}/400 records; resumed run identical modulo timing"
    ))
}

fn main() {
    let workdir = tempfile::tempdir().expect("temp dir");
    let baseline_dir = workdir.path().join("baselines");
    let other_dir = workdir.path().join("other");
    fs::create_dir_all(&other_dir).unwrap();
    let criteria: Vec<Criterion> = vec![
        ("oracle sweep", Box::new(|| oracle_sweep(&baseline_dir))),
        (
            "chance calibration",
            Box::new(|| chance_calibration(&baseline_dir)),
        ),
        (
            "flaky-format parsed-weighted demo",
            Box::new(|| flaky_demo(&baseline_dir)),
        ),
        (
            "metric identity",
            Box::new(|| metric_identity(&baseline_dir)),
        ),
        ("simulator conservation", Box::new(conservation)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("determinism and golden prompts", Box::new(determinism)),
        ("constraint audit", Box::new(constraint_audit)),
        (
            "mock-endpoint round trip",
            Box::new(|| mock_round_trip(&other_dir)),
        ),
        (
            "resume after kill",
            Box::new(|| resume_after_kill(&other_dir)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("acceptance {:>2} PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:>2} FAIL {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
