//! Staged formal-equivalence driver and the adapters to the external C
//! compiler and translation validator.
//!
//! The driver runs checksum testing first, then three symbolic stages in
//! order — validator-level unrolling, C-level unrolling, spatial splitting —
//! returning as soon as a stage is conclusive. Stage checkers are a trait so
//! the short-circuit structure is testable with stubs, outcome by outcome.

use crate::csubset::{parse_function, print_function, SourceFunction};
use crate::difftest::{run_checksum_test, TestConfig, Verdict};
use crate::loop_model::{
    check_outer_loops_identical, check_splitting_eligibility, compute_alignment,
    first_canonical_loop, loop_nest_depth, sole_canonical_loop, AlignmentPlan,
};
use crate::tools::{find_in_path, run_command, Toolchain};
use crate::transforms::{
    elevate_outer_iterator, externalize_arrays, inject_divisibility_assumption, spatial_split,
    unroll_scalar_c, TransformedPair,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InconclusiveCause {
    Timeout,
    MemoryOut,
    UnsupportedIntrinsic,
    UnmodeledFunction,
    AnalysisRejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquivResult {
    /// Equivalent modulo loop unrolling; `unroll_m` records the bound.
    Equivalent {
        report: String,
        unroll_m: u32,
    },
    Inequivalent {
        counterexample: String,
    },
    Inconclusive {
        cause: InconclusiveCause,
        detail: String,
    },
}

impl EquivResult {
    pub fn is_inconclusive(&self) -> bool {
        matches!(self, EquivResult::Inconclusive { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            EquivResult::Equivalent { .. } => "equivalent",
            EquivResult::Inequivalent { .. } => "inequivalent",
            EquivResult::Inconclusive { .. } => "inconclusive",
        }
    }

    fn rejected(detail: impl Into<String>) -> EquivResult {
        EquivResult::Inconclusive {
            cause: InconclusiveCause::AnalysisRejected,
            detail: detail.into(),
        }
    }
}

/// Classification table for validator stdout; message formats drift across
/// validator versions, so the phrases are data, not code.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchTable {
    pub equivalent: Vec<String>,
    pub inequivalent: Vec<String>,
    pub timeout: Vec<String>,
    pub memory_out: Vec<String>,
    pub unsupported: Vec<String>,
    pub unmodeled: Vec<String>,
}

impl Default for MatchTable {
    fn default() -> Self {
        MatchTable {
            equivalent: vec!["seems to be correct".to_string()],
            inequivalent: vec!["doesn't verify".to_string()],
            timeout: vec![
                "ERROR: Timeout".to_string(),
                "SMT Error: timeout".to_string(),
            ],
            memory_out: vec![
                "ERROR: Out of memory".to_string(),
                "SMT Error: memout".to_string(),
            ],
            unsupported: vec![
                "ERROR: Unsupported".to_string(),
                "ERROR: Could not translate".to_string(),
            ],
            unmodeled: vec![
                "Unknown function".to_string(),
                "unknown function".to_string(),
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolConfig {
    pub compiler_path: PathBuf,
    pub validator_path: PathBuf,
    pub timeout_secs: u64,
    pub memory_limit_mb: u64,
    /// Optimization level for validation builds: low enough to preserve
    /// loops, high enough to legalize intrinsics into vector IR.
    pub ir_opt_level: String,
    /// Validator argument template; `{src_unroll}`, `{tgt_unroll}`, and
    /// `{timeout_ms}` are substituted per query.
    pub validator_args: Vec<String>,
    pub match_table: MatchTable,
    /// When set, per-query artifacts (.ll files, raw validator output) are
    /// archived here instead of a discarded temp dir.
    pub work_dir: Option<PathBuf>,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            compiler_path: PathBuf::from("clang"),
            validator_path: PathBuf::from("alive-tv"),
            timeout_secs: 300,
            memory_limit_mb: 8192,
            ir_opt_level: "-O1".to_string(),
            validator_args: vec![
                "--src-unroll={src_unroll}".to_string(),
                "--tgt-unroll={tgt_unroll}".to_string(),
                "--smt-to={timeout_ms}".to_string(),
            ],
            match_table: MatchTable::default(),
            work_dir: None,
        }
    }
}

impl ToolConfig {
    pub fn tools_available(&self) -> bool {
        resolve(&self.compiler_path).is_some() && resolve(&self.validator_path).is_some()
    }
}

fn resolve(p: &Path) -> Option<PathBuf> {
    if p.is_file() {
        return Some(p.to_path_buf());
    }
    find_in_path(&p.to_string_lossy())
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("required tool missing: {0}")]
    ToolMissing(String),
    #[error("compile error:\n{0}")]
    CompileError(String),
    #[error(transparent)]
    Tool(#[from] crate::tools::ToolError),
    #[error(transparent)]
    Difftest(#[from] crate::difftest::DifftestError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Emit textual LLVM IR for one function at the pinned validation pipeline.
pub fn compile_to_ir(f: &SourceFunction, cfg: &ToolConfig) -> Result<String, VerifyError> {
    let compiler = resolve(&cfg.compiler_path)
        .ok_or_else(|| VerifyError::ToolMissing(cfg.compiler_path.display().to_string()))?;
    let dir = tempfile::tempdir()?;
    let c_path = dir.path().join("f.c");
    std::fs::write(&c_path, print_function(f))?;
    let mut cmd = Command::new(compiler);
    cmd.args([
        "-S",
        "-emit-llvm",
        &cfg.ir_opt_level,
        "-mavx2",
        "-fno-vectorize",
        "-fno-slp-vectorize",
        "-fno-unroll-loops",
    ])
    .arg(&c_path)
    .args(["-o", "-"]);
    let out = run_command(cmd, Some(Duration::from_secs(60)), None)?;
    if !out.success() {
        return Err(VerifyError::CompileError(out.stderr));
    }
    Ok(out.stdout)
}

/// Map raw validator output onto the three-valued verification outcome.
/// Unknown output is inconclusive with the raw text attached, never a verdict.
pub fn parse_validator_output(raw: &str, table: &MatchTable) -> EquivResult {
    let contains_any = |phrases: &[String]| phrases.iter().any(|p| raw.contains(p.as_str()));
    if contains_any(&table.inequivalent) {
        return EquivResult::Inequivalent {
            counterexample: raw.to_string(),
        };
    }
    if contains_any(&table.equivalent) {
        return EquivResult::Equivalent {
            report: raw.to_string(),
            unroll_m: 0,
        };
    }
    if contains_any(&table.timeout) {
        return EquivResult::Inconclusive {
            cause: InconclusiveCause::Timeout,
            detail: raw.to_string(),
        };
    }
    if contains_any(&table.memory_out) {
        return EquivResult::Inconclusive {
            cause: InconclusiveCause::MemoryOut,
            detail: raw.to_string(),
        };
    }
    if contains_any(&table.unmodeled) {
        return EquivResult::Inconclusive {
            cause: InconclusiveCause::UnmodeledFunction,
            detail: raw.to_string(),
        };
    }
    // unrecognized validator output, including unsupported-intrinsic reports
    EquivResult::Inconclusive {
        cause: InconclusiveCause::UnsupportedIntrinsic,
        detail: raw.to_string(),
    }
}

/// Write both IR files and run one validator query.
fn run_validator_query(
    cfg: &ToolConfig,
    tag: &str,
    src_ir: &str,
    tgt_ir: &str,
    src_unroll: u32,
    tgt_unroll: u32,
) -> Result<EquivResult, VerifyError> {
    let validator = resolve(&cfg.validator_path)
        .ok_or_else(|| VerifyError::ToolMissing(cfg.validator_path.display().to_string()))?;

    let tmp;
    let dir: PathBuf = match &cfg.work_dir {
        Some(d) => {
            let d = d.join(tag);
            std::fs::create_dir_all(&d)?;
            d
        }
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    let src_path = dir.join("src.ll");
    let tgt_path = dir.join("tgt.ll");
    std::fs::write(&src_path, src_ir)?;
    std::fs::write(&tgt_path, tgt_ir)?;

    let timeout_ms = cfg.timeout_secs.saturating_mul(1000);
    let mut cmd = Command::new(validator);
    for arg in &cfg.validator_args {
        let arg = arg
            .replace("{src_unroll}", &src_unroll.to_string())
            .replace("{tgt_unroll}", &tgt_unroll.to_string())
            .replace("{timeout_ms}", &timeout_ms.to_string());
        cmd.arg(arg);
    }
    cmd.arg(&src_path).arg(&tgt_path);
    // the wall clock is the per-query budget; the SMT flag is a best-effort
    // inner bound, so allow a short grace for the validator's own reporting
    let wall = cfg.timeout_secs + 5;
    let out = run_command(
        cmd,
        Some(Duration::from_secs(wall)),
        Some(cfg.memory_limit_mb),
    )?;
    let raw = format!("{}\n{}", out.stdout, out.stderr);
    if cfg.work_dir.is_some() {
        std::fs::write(dir.join("validator.out"), &raw)?;
    }
    if out.timed_out {
        return Ok(EquivResult::Inconclusive {
            cause: InconclusiveCause::Timeout,
            detail: format!("validator killed after {wall}s wall time"),
        });
    }
    Ok(parse_validator_output(&raw, &cfg.match_table))
}

/// One validator query over already-emitted IR; the building block the
/// stages share, exposed for direct pre-transform comparisons.
pub fn validate_ir_pair(
    cfg: &ToolConfig,
    tag: &str,
    src_ir: &str,
    tgt_ir: &str,
    src_unroll: u32,
    tgt_unroll: u32,
) -> Result<EquivResult, VerifyError> {
    run_validator_query(cfg, tag, src_ir, tgt_ir, src_unroll, tgt_unroll)
}

fn with_unroll(result: EquivResult, m: u32) -> EquivResult {
    match result {
        EquivResult::Equivalent { report, .. } => EquivResult::Equivalent {
            report,
            unroll_m: m,
        },
        other => other,
    }
}

/// Testing outcome feeding stage 0 of the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChecksumOutcome {
    Plausible,
    Inequivalent,
    CannotCompile,
}

/// The four stages, pluggable for conformance testing of the driver.
pub trait EquivStages {
    fn checksum_testing(&mut self) -> ChecksumOutcome;
    fn check_with_alive2_unroll(&mut self) -> EquivResult;
    fn check_with_c_unroll(&mut self) -> EquivResult;
    fn check_with_spatial_splitting(&mut self) -> EquivResult;
}

/// The short-circuit skeleton: checksum first (an inequivalence is final and
/// never revisited), then each symbolic stage until one is conclusive.
pub fn drive_equivalence(stages: &mut dyn EquivStages) -> EquivResult {
    let testing = stages.checksum_testing();
    if testing == ChecksumOutcome::Inequivalent {
        return EquivResult::Inequivalent {
            counterexample: "checksum testing found a concrete mismatch".to_string(),
        };
    }
    if testing == ChecksumOutcome::Plausible {
        let result = stages.check_with_alive2_unroll();
        if !result.is_inconclusive() {
            return result;
        }
        let result = stages.check_with_c_unroll();
        if !result.is_inconclusive() {
            return result;
        }
        return stages.check_with_spatial_splitting();
    }
    // the candidate never compiled; no symbolic stage applies
    EquivResult::rejected("candidate did not compile under checksum testing")
}

/// Production stages over real tools.
pub struct RealStages<'a> {
    src: &'a SourceFunction,
    vec: &'a SourceFunction,
    tool_cfg: &'a ToolConfig,
    test_cfg: &'a TestConfig,
    toolchain: &'a Toolchain,
    precomputed_checksum: Option<ChecksumOutcome>,
    pub checksum_witness: Option<crate::difftest::Witness>,
}

impl EquivStages for RealStages<'_> {
    fn checksum_testing(&mut self) -> ChecksumOutcome {
        if let Some(pre) = self.precomputed_checksum {
            return pre;
        }
        match run_checksum_test(
            self.src,
            &print_function(self.vec),
            self.test_cfg,
            self.toolchain,
        ) {
            Ok(Verdict::Plausible) => ChecksumOutcome::Plausible,
            Ok(Verdict::Inequivalent { witness }) => {
                self.checksum_witness = Some(witness);
                ChecksumOutcome::Inequivalent
            }
            Ok(Verdict::CannotCompile { .. }) | Err(_) => ChecksumOutcome::CannotCompile,
        }
    }

    fn check_with_alive2_unroll(&mut self) -> EquivResult {
        match check_with_alive2_unroll_impl(self.src, self.vec, self.tool_cfg) {
            Ok(r) => r,
            Err(VerifyError::ToolMissing(t)) => EquivResult::rejected(format!("tool missing: {t}")),
            Err(e) => EquivResult::rejected(e.to_string()),
        }
    }

    fn check_with_c_unroll(&mut self) -> EquivResult {
        match check_with_c_unroll_impl(self.src, self.vec, self.tool_cfg) {
            Ok(r) => r,
            Err(VerifyError::ToolMissing(t)) => EquivResult::rejected(format!("tool missing: {t}")),
            Err(e) => EquivResult::rejected(e.to_string()),
        }
    }

    fn check_with_spatial_splitting(&mut self) -> EquivResult {
        match check_with_spatial_splitting_impl(self.src, self.vec, self.tool_cfg) {
            Ok(r) => r,
            Err(VerifyError::ToolMissing(t)) => EquivResult::rejected(format!("tool missing: {t}")),
            Err(e) => EquivResult::rejected(e.to_string()),
        }
    }
}

/// Full staged equivalence check for a source/vectorized pair. A checksum
/// verdict already computed by the caller short-circuits stage 0.
pub fn check_equivalence(
    src: &SourceFunction,
    vec: &SourceFunction,
    tool_cfg: &ToolConfig,
    test_cfg: &TestConfig,
    toolchain: &Toolchain,
    precomputed: Option<&Verdict>,
) -> Result<EquivResult, VerifyError> {
    if !tool_cfg.tools_available() {
        return Err(VerifyError::ToolMissing(format!(
            "{} and/or {} not found; formal verification unavailable (testing-only mode)",
            tool_cfg.compiler_path.display(),
            tool_cfg.validator_path.display()
        )));
    }
    let pre = precomputed.map(|v| match v {
        Verdict::Plausible => ChecksumOutcome::Plausible,
        Verdict::Inequivalent { .. } => ChecksumOutcome::Inequivalent,
        Verdict::CannotCompile { .. } => ChecksumOutcome::CannotCompile,
    });
    let mut stages = RealStages {
        src,
        vec,
        tool_cfg,
        test_cfg,
        toolchain,
        precomputed_checksum: pre,
        checksum_witness: None,
    };
    Ok(drive_equivalence(&mut stages))
}

/// Stage 1: externalize arrays, inject the divisibility assumption into the
/// source, compile both to IR, and let the validator unroll (source m,
/// target 1).
pub fn check_with_alive2_unroll(
    src: &SourceFunction,
    vec: &SourceFunction,
    plan: &AlignmentPlan,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    stage1_with_plan(src, vec, plan, cfg)
}

fn check_with_alive2_unroll_impl(
    src: &SourceFunction,
    vec: &SourceFunction,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    let (s, v) = match reduce_nest(src, vec) {
        Ok(pair) => pair,
        Err(result) => return Ok(result),
    };
    let plan = match plan_pair(&s, &v) {
        Ok(p) => p,
        Err(msg) => return Ok(EquivResult::rejected(msg)),
    };
    stage1_with_plan(&s, &v, &plan, cfg)
}

/// Nested kernels reduce to their inner loops for an arbitrary outer
/// iteration, gated on syntactically identical outer loops.
fn reduce_nest(
    src: &SourceFunction,
    vec: &SourceFunction,
) -> Result<(SourceFunction, SourceFunction), EquivResult> {
    if loop_nest_depth(src) < 2 && loop_nest_depth(vec) < 2 {
        return Ok((src.clone(), vec.clone()));
    }
    if !check_outer_loops_identical(src, vec) {
        return Err(EquivResult::rejected(
            "nested pair with non-identical outer loops",
        ));
    }
    let s = elevate_outer_iterator(src)
        .map_err(|e| EquivResult::rejected(format!("outer iterator elevation failed: {e}")))?;
    let v = elevate_outer_iterator(vec)
        .map_err(|e| EquivResult::rejected(format!("outer iterator elevation failed: {e}")))?;
    Ok((s, v))
}

fn plan_pair(src: &SourceFunction, vec: &SourceFunction) -> Result<AlignmentPlan, String> {
    let sl = sole_canonical_loop(src).map_err(|e| format!("source loop: {e}"))?;
    let vl = first_canonical_loop(vec).map_err(|e| format!("vector loop: {e}"))?;
    compute_alignment(&sl, &vl).map_err(|e| e.to_string())
}

fn stage1_with_plan(
    src: &SourceFunction,
    vec: &SourceFunction,
    plan: &AlignmentPlan,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    let pair = TransformedPair::new(src.clone(), vec.clone(), plan.clone());
    let pair = match externalize_arrays(pair) {
        Ok(p) => p,
        Err(e) => return Ok(EquivResult::rejected(e.to_string())),
    };
    let src_assumed = inject_divisibility_assumption(&pair.src, plan);
    let src_ir = compile_to_ir(&src_assumed, cfg)?;
    let tgt_ir = compile_to_ir(&pair.vec, cfg)?;
    let result = run_validator_query(
        cfg,
        "alive2-unroll",
        &src_ir,
        &tgt_ir,
        plan.m,
        plan.vector_unroll,
    )?;
    Ok(with_unroll(result, plan.m))
}

/// Stage 2: unroll the scalar program at the C level and invoke the
/// validator with both sides unrolled once. Nested pairs are reduced to
/// their inner loops first, gated on identical outer loops.
pub fn check_with_c_unroll(
    src: &SourceFunction,
    vec: &SourceFunction,
    plan: &AlignmentPlan,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    c_unroll_with_plan(src, vec, plan, cfg)
}

fn check_with_c_unroll_impl(
    src: &SourceFunction,
    vec: &SourceFunction,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    let (s, v) = match reduce_nest(src, vec) {
        Ok(pair) => pair,
        Err(result) => return Ok(result),
    };
    let plan = match plan_pair(&s, &v) {
        Ok(p) => p,
        Err(msg) => return Ok(EquivResult::rejected(msg)),
    };
    c_unroll_with_plan(&s, &v, &plan, cfg)
}

fn c_unroll_with_plan(
    src: &SourceFunction,
    vec: &SourceFunction,
    plan: &AlignmentPlan,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    let unrolled = match unroll_scalar_c(src, plan) {
        Ok(u) => u,
        Err(e) => return Ok(EquivResult::rejected(e.to_string())),
    };
    let pair = TransformedPair::new(unrolled, vec.clone(), plan.clone());
    let pair = match externalize_arrays(pair) {
        Ok(p) => p,
        Err(e) => return Ok(EquivResult::rejected(e.to_string())),
    };
    let src_assumed = inject_divisibility_assumption(&pair.src, plan);
    let src_ir = compile_to_ir(&src_assumed, cfg)?;
    let tgt_ir = compile_to_ir(&pair.vec, cfg)?;
    let result = run_validator_query(cfg, "c-unroll", &src_ir, &tgt_ir, 1, 1)?;
    Ok(with_unroll(result, plan.m))
}

/// Stage 3: decompose the array equivalence into `m` per-index queries.
/// Equivalent only if every query is; any inequivalent query refutes.
pub fn check_with_spatial_splitting(
    src: &SourceFunction,
    vec: &SourceFunction,
    plan: &AlignmentPlan,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    splitting_with_plan(src, vec, plan, cfg)
}

fn check_with_spatial_splitting_impl(
    src: &SourceFunction,
    vec: &SourceFunction,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    let plan = match plan_pair(src, vec) {
        Ok(p) => p,
        Err(msg) => return Ok(EquivResult::rejected(msg)),
    };
    splitting_with_plan(src, vec, &plan, cfg)
}

fn splitting_with_plan(
    src: &SourceFunction,
    vec: &SourceFunction,
    plan: &AlignmentPlan,
    cfg: &ToolConfig,
) -> Result<EquivResult, VerifyError> {
    let report = check_splitting_eligibility(src, vec);
    if !report.eligible_for_splitting {
        return Ok(EquivResult::rejected(format!(
            "not eligible for spatial splitting: {}",
            report.reasons.join("; ")
        )));
    }
    let pair = TransformedPair::new(src.clone(), vec.clone(), plan.clone());
    let queries = match spatial_split(&pair, &report) {
        Ok(q) => q,
        Err(e) => return Ok(EquivResult::rejected(e.to_string())),
    };
    let mut reports = Vec::new();
    let mut first_inconclusive: Option<EquivResult> = None;
    for q in &queries {
        let src_ir = compile_to_ir(&q.src_slice, cfg)?;
        let tgt_ir = compile_to_ir(&q.vec_slice, cfg)?;
        let tag = format!("split-j{}", q.index_j);
        let result = run_validator_query(cfg, &tag, &src_ir, &tgt_ir, 1, 1)?;
        match result {
            EquivResult::Equivalent { report, .. } => {
                reports.push(format!("j={}: {report}", q.index_j))
            }
            EquivResult::Inequivalent { counterexample } => {
                return Ok(EquivResult::Inequivalent {
                    counterexample: format!("query j={} refuted:\n{counterexample}", q.index_j),
                });
            }
            inconclusive => {
                if first_inconclusive.is_none() {
                    first_inconclusive = Some(inconclusive);
                }
            }
        }
    }
    if let Some(inconclusive) = first_inconclusive {
        return Ok(inconclusive);
    }
    Ok(EquivResult::Equivalent {
        report: reports.join("\n"),
        unroll_m: plan.m,
    })
}

/// Parse both sides from text and run the full driver; the entry point the
/// CLI uses.
pub fn check_equivalence_texts(
    src_text: &str,
    vec_text: &str,
    tool_cfg: &ToolConfig,
    test_cfg: &TestConfig,
    toolchain: &Toolchain,
) -> Result<EquivResult, VerifyError> {
    let src =
        parse_function(src_text).map_err(|e| VerifyError::CompileError(format!("source: {e}")))?;
    match parse_function(vec_text) {
        Ok(vec) => check_equivalence(&src, &vec, tool_cfg, test_cfg, toolchain, None),
        Err(e) => Ok(EquivResult::rejected(format!(
            "candidate is outside the supported subset: {e}"
        ))),
    }
}
