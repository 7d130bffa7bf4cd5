//! Command-line frontend binding the pipeline together.
//!
//! Exit codes: 0 when the command reached its verdict or artifact, 1 when the
//! pipeline could not achieve it (no plausible candidate, inconclusive
//! verification, failed transform), 2 on usage or configuration errors.

use crate::agents::{run_fsm, AgentState, FsmConfig};
use crate::bench::{run_benchmark, shipped_profiles, BenchOptions, Category, CompilerProfile};
use crate::csubset::{parse_function, print_function, SourceFunction};
use crate::difftest::{evaluate_batch, pass_at_k_curve_counts, BatchLabel, TestConfig};
use crate::llm_client::{CompletionBackend, HttpBackend, LlmConfig, ReplayBackend};
use crate::loop_model::{check_splitting_eligibility, compute_alignment, sole_canonical_loop};
use crate::tools::Toolchain;
use crate::transforms::{
    elevate_outer_iterator, externalize_arrays, inject_divisibility_assumption, spatial_split,
    unroll_scalar_c, TransformedPair,
};
use crate::verify::{check_equivalence_texts, EquivResult, ToolConfig, VerifyError};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "vecpipe",
    version,
    about = "Vectorize scalar C loop kernels to AVX2 intrinsics with LLM backends, checksum differential testing, staged formal equivalence checking, and benchmarking"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Serialize)]
enum Cmd {
    /// Drive the vectorize-test-repair state machine on scalar kernels.
    Vectorize(VectorizeArgs),
    /// Checksum-test vectorized candidates against a scalar kernel.
    Test(TestArgs),
    /// Run the staged formal-equivalence driver on a scalar/vectorized pair.
    Verify(VerifyArgs),
    /// Apply verification-enabling rewrites and emit the transformed files.
    Transform(TransformArgs),
    /// Benchmark a vectorized kernel against per-compiler scalar baselines.
    Bench(BenchArgs),
    /// Aggregate a verdict log into Table-style counts and pass@k means.
    Passk(PasskArgs),
}

#[derive(Args, Debug, Serialize)]
struct CommonTestArgs {
    /// Trip count handed to every scalar parameter (multiple of 8).
    #[arg(long = "n", default_value_t = 1024)]
    trip_count: u32,
    /// Independent random trials per candidate.
    #[arg(long, default_value_t = 5)]
    trials: u32,
    /// Seed for the deterministic input generator.
    #[arg(long, default_value_t = 0x5EED)]
    seed: u64,
}

impl CommonTestArgs {
    fn to_config(&self) -> TestConfig {
        TestConfig {
            trip_count: self.trip_count,
            trials: self.trials,
            seed: self.seed,
            ..TestConfig::default()
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct VectorizeArgs {
    /// Scalar kernel files (one function per file).
    #[arg(long = "src", required = true, num_args = 1..)]
    sources: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Completion backend.
    #[arg(long, value_parser = ["http", "replay"], default_value = "http")]
    backend: String,
    /// Replay store directory (required with --backend replay).
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    /// Completions requested per attempt.
    #[arg(long, default_value_t = 1)]
    completions: u32,
    /// Repair attempts before giving up.
    #[arg(long, default_value_t = 10)]
    max_attempts: u32,
    /// Run the formal driver on plausible candidates.
    #[arg(long, default_value_t = false)]
    verify: bool,
    /// Skip collecting Clang vectorization remarks for the initial prompt.
    #[arg(long, default_value_t = false)]
    no_remarks: bool,
    /// Chat-completion endpoint (env VECPIPE_ENDPOINT).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name (env VECPIPE_MODEL).
    #[arg(long)]
    model: Option<String>,
    /// Independent kernels processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    test: CommonTestArgs,
}

#[derive(Args, Debug, Serialize)]
struct TestArgs {
    #[arg(long)]
    src: PathBuf,
    /// Candidate files, evaluated in order.
    #[arg(long = "candidates", required = true, num_args = 1..)]
    candidates: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Candidates evaluated concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    test: CommonTestArgs,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    vec: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Path to the translation validator (env VECPIPE_ALIVE_TV).
    #[arg(long = "alive-tv")]
    alive_tv: Option<PathBuf>,
    /// Path to clang for IR emission (env VECPIPE_CLANG).
    #[arg(long)]
    clang: Option<PathBuf>,
    /// Per-query SMT timeout in seconds.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
    /// Per-query memory cap in MiB.
    #[arg(long, default_value_t = 8192)]
    memory_mb: u64,
    #[command(flatten)]
    test: CommonTestArgs,
}

#[derive(Args, Debug, Serialize)]
struct TransformArgs {
    #[arg(long)]
    src: PathBuf,
    /// Vectorized counterpart (needed by --externalize and --split).
    #[arg(long)]
    vec: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Unroll the kernel's loop this many times at the C level.
    #[arg(long)]
    unroll: Option<u32>,
    /// Inject the divisibility assumption for this unroll factor.
    #[arg(long)]
    assume: Option<u32>,
    /// Move array parameters to file-scope extern declarations.
    #[arg(long, default_value_t = false)]
    externalize: bool,
    /// Promote the outer loop iterator of a nest to a parameter.
    #[arg(long, default_value_t = false)]
    elevate: bool,
    /// Emit the spatial-splitting queries for the pair.
    #[arg(long, default_value_t = false)]
    split: bool,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    vec: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 31)]
    reps: u32,
    #[arg(long = "trip", default_value_t = 32_000)]
    trip_count: u32,
    /// Reject measurements whose relative lower-half spread exceeds this.
    #[arg(long, default_value_t = 0.10)]
    spread: f64,
    #[arg(long, value_enum, default_value = "naively-vectorizable")]
    category: Category,
    /// JSON file with compiler profiles; defaults to the three shipped ones.
    #[arg(long)]
    profiles: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PasskArgs {
    /// Verdict log (JSON lines) produced by `test` or `vectorize`.
    #[arg(long)]
    log: PathBuf,
    /// Comma-separated k values.
    #[arg(long, default_value = "1,10,100", value_delimiter = ',')]
    k: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn dispatch(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("vecpipe: error: {e:#}");
            // distinguish configuration problems from pipeline failures
            if e.to_string().starts_with("config:") {
                2
            } else {
                1
            }
        }
    }
}

fn env_or(flag: Option<String>, env: &str) -> Option<String> {
    flag.or_else(|| std::env::var(env).ok())
}

fn env_or_path(flag: Option<PathBuf>, env: &str) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(env).map(PathBuf::from))
}

fn read_kernel(path: &Path) -> Result<SourceFunction> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("config: cannot read {}", path.display()))?;
    parse_function(&text).with_context(|| format!("config: cannot parse {}", path.display()))
}

fn write_config_snapshot(out: &Path, command: &str, args: &impl Serialize) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let snapshot = serde_json::json!({
        "command": command,
        "args": args,
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&snapshot)?,
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Cmd::Vectorize(args) => cmd_vectorize(args),
        Cmd::Test(args) => cmd_test(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Transform(args) => cmd_transform(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Passk(args) => cmd_passk(args),
    }
}

fn cmd_vectorize(args: VectorizeArgs) -> Result<i32> {
    write_config_snapshot(&args.out, "vectorize", &args)?;
    let toolchain = Toolchain::discover()?;
    let backend: Box<dyn CompletionBackend> = match args.backend.as_str() {
        "replay" => {
            let dir = env_or_path(args.replay_dir.clone(), "VECPIPE_REPLAY_DIR")
                .ok_or_else(|| anyhow::anyhow!("config: --backend replay needs --replay-dir"))?;
            Box::new(ReplayBackend::new(dir))
        }
        _ => Box::new(HttpBackend::new()),
    };
    let mut llm = LlmConfig {
        n: args.completions,
        ..LlmConfig::default()
    };
    if let Some(endpoint) = env_or(args.endpoint.clone(), "VECPIPE_ENDPOINT") {
        llm.endpoint = endpoint;
    }
    if let Some(model) = env_or(args.model.clone(), "VECPIPE_MODEL") {
        llm.model = model;
    }
    let cfg = FsmConfig {
        max_attempts: args.max_attempts,
        test: args.test.to_config(),
        llm,
        verify: args.verify.then(ToolConfig::default),
        collect_remarks: !args.no_remarks,
        deterministic: args.backend == "replay",
        ..FsmConfig::default()
    };

    let kernels: Vec<(PathBuf, SourceFunction)> = args
        .sources
        .iter()
        .map(|p| Ok((p.clone(), read_kernel(p)?)))
        .collect::<Result<_>>()?;

    let run_one = |src: &SourceFunction| run_fsm(src, &cfg, backend.as_ref(), &toolchain);
    let transcripts: Vec<_> = if args.jobs <= 1 || kernels.len() <= 1 {
        kernels.iter().map(|(_, src)| run_one(src)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = kernels
                .iter()
                .map(|(_, src)| scope.spawn(|| run_one(src)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    };

    let mut all_done = true;
    for t in &transcripts {
        let path = args.out.join(format!("{}.transcript.json", t.test));
        std::fs::write(&path, serde_json::to_string_pretty(t)?)?;
        match &t.outcome {
            AgentState::Done { outcome } => {
                println!(
                    "{}: done after {} attempt(s): {:?}",
                    t.test,
                    t.attempt_count(),
                    outcome
                );
            }
            AgentState::Failed { reason } => {
                all_done = false;
                println!(
                    "{}: failed after {} attempt(s): {reason}",
                    t.test,
                    t.attempt_count()
                );
            }
            other => {
                all_done = false;
                println!("{}: ended in non-terminal state {other:?}", t.test);
            }
        }
    }
    Ok(if all_done { 0 } else { 1 })
}

fn cmd_test(args: TestArgs) -> Result<i32> {
    write_config_snapshot(&args.out, "test", &args)?;
    let toolchain = Toolchain::discover()?;
    let src = read_kernel(&args.src)?;
    let candidates: Vec<String> = args
        .candidates
        .iter()
        .map(|p| {
            std::fs::read_to_string(p)
                .with_context(|| format!("config: cannot read {}", p.display()))
        })
        .collect::<Result<_>>()?;
    let cfg = args.test.to_config();
    let batch = evaluate_batch(&src, &candidates, &cfg, &toolchain, args.jobs)?;

    let log_path = args.out.join("verdicts.jsonl");
    let mut log = std::fs::File::create(&log_path)?;
    crate::difftest::emit_verdicts_jsonl(&src.name, &batch, &mut log)?;
    for (i, v) in batch.verdicts.iter().enumerate() {
        println!("candidate {i}: {}", v.label());
    }
    let label = batch.label();
    println!("batch: {label:?}");
    println!("log: {}", log_path.display());
    Ok(if label == BatchLabel::Plausible { 0 } else { 1 })
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    write_config_snapshot(&args.out, "verify", &args)?;
    let toolchain = Toolchain::discover()?;
    let src_text = std::fs::read_to_string(&args.src)
        .with_context(|| format!("config: cannot read {}", args.src.display()))?;
    let vec_text = std::fs::read_to_string(&args.vec)
        .with_context(|| format!("config: cannot read {}", args.vec.display()))?;

    let mut tool_cfg = ToolConfig {
        timeout_secs: args.timeout,
        memory_limit_mb: args.memory_mb,
        work_dir: Some(args.out.join("queries")),
        ..ToolConfig::default()
    };
    if let Some(v) = env_or_path(args.alive_tv.clone(), "VECPIPE_ALIVE_TV") {
        tool_cfg.validator_path = v;
    }
    if let Some(c) = env_or_path(args.clang.clone(), "VECPIPE_CLANG") {
        tool_cfg.compiler_path = c;
    }
    let test_cfg = args.test.to_config();

    match check_equivalence_texts(&src_text, &vec_text, &tool_cfg, &test_cfg, &toolchain) {
        Ok(result) => {
            let record = serde_json::json!({
                "src": args.src.display().to_string(),
                "vec": args.vec.display().to_string(),
                "result": result,
                "timeout_secs": tool_cfg.timeout_secs,
                "memory_limit_mb": tool_cfg.memory_limit_mb,
                "ir_opt_level": tool_cfg.ir_opt_level,
            });
            std::fs::write(
                args.out.join("result.json"),
                serde_json::to_string_pretty(&record)?,
            )?;
            match &result {
                EquivResult::Equivalent { unroll_m, .. } => {
                    println!("Equivalent (modulo loop unrolling, m = {unroll_m})");
                    Ok(0)
                }
                EquivResult::Inequivalent { .. } => {
                    println!("Inequivalent");
                    Ok(0)
                }
                EquivResult::Inconclusive { cause, detail } => {
                    println!("Inconclusive ({cause:?}): {detail}");
                    Ok(1)
                }
            }
        }
        Err(VerifyError::ToolMissing(what)) => {
            // degrade to testing-only
            eprintln!("verifier unavailable ({what}); falling back to checksum testing");
            let src = parse_function(&src_text)
                .map_err(|e| anyhow::anyhow!("config: cannot parse source: {e}"))?;
            let verdict =
                crate::difftest::run_checksum_test(&src, &vec_text, &test_cfg, &toolchain)?;
            println!("checksum verdict: {}", verdict.label());
            std::fs::write(
                args.out.join("result.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "degraded": "testing-only",
                    "checksum_verdict": verdict,
                }))?,
            )?;
            Ok(match verdict {
                crate::difftest::Verdict::Inequivalent { .. } => 0,
                _ => 1,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_transform(args: TransformArgs) -> Result<i32> {
    if args.unroll.is_none()
        && args.assume.is_none()
        && !args.externalize
        && !args.elevate
        && !args.split
    {
        bail!("config: pick at least one of --unroll, --assume, --externalize, --elevate, --split");
    }
    write_config_snapshot(&args.out, "transform", &args)?;
    let src = read_kernel(&args.src)?;
    let stem = args
        .src
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| src.name.clone());
    let mut emitted = Vec::new();

    if let Some(m) = args.unroll {
        let plan = crate::loop_model::plan_for_unroll_factor(&src, m)?;
        let unrolled = unroll_scalar_c(&src, &plan)?;
        let path = args.out.join(format!("{stem}_unrolled{m}.c"));
        std::fs::write(&path, print_function(&unrolled))?;
        emitted.push(path);
    }
    if let Some(m) = args.assume {
        let plan = crate::loop_model::plan_for_unroll_factor(&src, m)?;
        let assumed = inject_divisibility_assumption(&src, &plan);
        let path = args.out.join(format!("{stem}_assume{m}.c"));
        std::fs::write(&path, print_function(&assumed))?;
        emitted.push(path);
    }
    if args.elevate {
        let elevated = elevate_outer_iterator(&src)?;
        let path = args.out.join(format!("{stem}_elevated.c"));
        std::fs::write(&path, print_function(&elevated))?;
        emitted.push(path);
    }
    if args.externalize || args.split {
        let vec_path = args
            .vec
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("config: --externalize/--split need --vec"))?;
        let vec = read_kernel(vec_path)?;
        let sl = sole_canonical_loop(&src)?;
        let vl = crate::loop_model::first_canonical_loop(&vec)?;
        let plan = compute_alignment(&sl, &vl)?;
        let pair = TransformedPair::new(src.clone(), vec.clone(), plan);
        if args.externalize {
            let ext = externalize_arrays(pair.clone())?;
            let src_path = args.out.join(format!("{stem}_extern_src.c"));
            let vec_path = args.out.join(format!("{stem}_extern_vec.c"));
            std::fs::write(&src_path, print_function(&ext.src))?;
            std::fs::write(&vec_path, print_function(&ext.vec))?;
            emitted.push(src_path);
            emitted.push(vec_path);
        }
        if args.split {
            let report = check_splitting_eligibility(&src, &vec);
            let queries = spatial_split(&pair, &report)?;
            for q in &queries {
                let src_path = args.out.join(format!("{stem}_split_j{}_src.c", q.index_j));
                let vec_path = args.out.join(format!("{stem}_split_j{}_vec.c", q.index_j));
                std::fs::write(&src_path, print_function(&q.src_slice))?;
                std::fs::write(&vec_path, print_function(&q.vec_slice))?;
                emitted.push(src_path);
                emitted.push(vec_path);
            }
        }
    }
    for path in &emitted {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    write_config_snapshot(&args.out, "bench", &args)?;
    let toolchain = Toolchain::discover()?;
    let src = read_kernel(&args.src)?;
    let vec_text = std::fs::read_to_string(&args.vec)
        .with_context(|| format!("config: cannot read {}", args.vec.display()))?;
    let profiles: Vec<CompilerProfile> = match &args.profiles {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("config: cannot read {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("config: invalid profiles in {}", path.display()))?
        }
        None => shipped_profiles(),
    };
    let opts = BenchOptions {
        reps: args.reps,
        trip_count: args.trip_count,
        spread_threshold: args.spread,
    };
    let record = run_benchmark(&src, &vec_text, &profiles, &opts, args.category, &toolchain)?;
    let (csv, json) = crate::bench::emit_report(std::slice::from_ref(&record));
    std::fs::write(args.out.join("bench.csv"), &csv)?;
    std::fs::write(
        args.out.join("bench.json"),
        serde_json::to_string_pretty(&json)?,
    )?;
    println!("vectorized: {:.0} ns/call", record.vectorized_ns);
    for b in &record.baselines {
        match (&b.speedup, &b.skipped) {
            (Some(s), _) => println!("vs {}: speedup {s:.2}x", b.compiler),
            (None, Some(reason)) => println!("vs {}: skipped ({reason})", b.compiler),
            _ => {}
        }
    }
    Ok(0)
}

fn cmd_passk(args: PasskArgs) -> Result<i32> {
    if args.k.is_empty() || args.k.contains(&0) {
        bail!("config: --k needs positive values");
    }
    let text = std::fs::read_to_string(&args.log)
        .with_context(|| format!("config: cannot read {}", args.log.display()))?;
    let records = crate::difftest::parse_verdicts_jsonl(&text)
        .map_err(|e| anyhow::anyhow!("config: invalid verdict log: {e}"))?;
    if records.is_empty() {
        bail!("config: verdict log is empty");
    }
    // group by test, in candidate order
    let mut by_test: BTreeMap<String, Vec<(u64, String)>> = BTreeMap::new();
    for r in &records {
        by_test
            .entry(r.test.clone())
            .or_default()
            .push((r.candidate_index, r.verdict.clone()));
    }
    for v in by_test.values_mut() {
        v.sort_by_key(|(i, _)| *i);
    }

    println!("tests: {}", by_test.len());
    println!();
    println!(
        "{:>6} {:>10} {:>14} {:>15} {:>10}",
        "k", "plausible", "not-equivalent", "cannot-compile", "pass@k"
    );
    let mut table = Vec::new();
    for &k in &args.k {
        let mut plausible = 0u64;
        let mut cannot = 0u64;
        let mut counts = Vec::new();
        for verdicts in by_test.values() {
            let prefix: Vec<&str> = verdicts
                .iter()
                .take(k as usize)
                .map(|(_, v)| v.as_str())
                .collect();
            if prefix.contains(&"plausible") {
                plausible += 1;
            } else if prefix.iter().all(|v| *v == "cannot_compile") {
                cannot += 1;
            }
            let n = verdicts.len() as u64;
            let c = verdicts.iter().filter(|(_, v)| v == "plausible").count() as u64;
            counts.push((n, c));
        }
        let not_equiv = by_test.len() as u64 - plausible - cannot;
        let mean = match pass_at_k_curve_counts(&counts, &[k]) {
            Ok(curve) => curve[0].1,
            Err(e) => bail!("config: {e}"),
        };
        println!("{k:>6} {plausible:>10} {not_equiv:>14} {cannot:>15} {mean:>10.4}");
        table.push(serde_json::json!({
            "k": k,
            "plausible": plausible,
            "not_equivalent": not_equiv,
            "cannot_compile": cannot,
            "mean_pass_at_k": mean,
        }));
    }
    if let Some(out) = &args.out {
        write_config_snapshot(out, "passk", &args)?;
        std::fs::write(
            out.join("passk.json"),
            serde_json::to_string_pretty(&serde_json::json!({ "table": table }))?,
        )?;
    }
    Ok(0)
}
