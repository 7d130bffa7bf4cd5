//! Finite-state-machine orchestration: a user proxy hands the scalar kernel
//! and the compiler's dependence remarks to a vectorizer backend, a tester
//! screens each candidate with checksum testing, and failures loop back as
//! repair feedback, up to a bounded number of attempts.

use crate::csubset::{parse_function, print_function, SourceFunction};
use crate::difftest::{evaluate_batch, FailureKind, TestConfig, Verdict, Witness};
use crate::llm_client::{extract_code_block, CompletionBackend, LlmConfig};
use crate::tools::{find_in_path, run_command, split_flags, Toolchain};
use crate::verify::{check_equivalence, EquivResult, ToolConfig, VerifyError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::process::Command;
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum AgentState {
    Init,
    AwaitVectorization,
    Testing,
    RepairFeedback,
    Verifying,
    Done { outcome: FsmOutcome },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FsmOutcome {
    /// Passed checksum testing; formal verification pending or inconclusive.
    Plausible,
    /// Formally verified equivalent modulo the recorded unroll bound.
    Verified { unroll_m: u32 },
}

impl AgentState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, AgentState::Done { .. } | AgentState::Failed { .. })
    }

    fn tag(&self) -> &'static str {
        match self {
            AgentState::Init => "init",
            AgentState::AwaitVectorization => "await_vectorization",
            AgentState::Testing => "testing",
            AgentState::RepairFeedback => "repair_feedback",
            AgentState::Verifying => "verifying",
            AgentState::Done { .. } => "done",
            AgentState::Failed { .. } => "failed",
        }
    }
}

/// The FSM's declared edge set; transcripts must walk only these.
pub fn legal_transition(from: &AgentState, to: &AgentState) -> bool {
    matches!(
        (from.tag(), to.tag()),
        ("init", "await_vectorization")
            | ("await_vectorization", "testing")
            | ("await_vectorization", "failed")
            | ("testing", "done")
            | ("testing", "verifying")
            | ("testing", "repair_feedback")
            | ("testing", "failed")
            | ("verifying", "done")
            | ("verifying", "repair_feedback")
            | ("verifying", "failed")
            | ("repair_feedback", "await_vectorization")
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackKind {
    CompileError,
    ChecksumMismatch,
    VerifierInequivalence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub kind: FeedbackKind,
    /// Compiler diagnostics for compile-error feedback.
    pub diagnostics: Option<String>,
    /// Replayable witness for checksum-mismatch feedback.
    pub witness: Option<Witness>,
    /// Validator counterexample text for verifier feedback.
    pub counterexample: Option<String>,
    pub instruction: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attempt {
    pub index: u32,
    pub prompt: String,
    pub completions: Vec<String>,
    /// Verdict label per candidate, in candidate order.
    pub verdicts: Vec<String>,
    /// Index of the first plausible candidate, when there is one.
    pub chosen: Option<usize>,
    pub feedback: Option<FeedbackMessage>,
    pub note: Option<String>,
}

/// Ordered audit trail of one vectorization session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub test: String,
    pub attempts: Vec<Attempt>,
    pub states: Vec<AgentState>,
    pub outcome: AgentState,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    pub model: String,
    pub backend: String,
    pub template_hashes: BTreeMap<String, String>,
    pub config: serde_json::Value,
}

impl Transcript {
    pub fn attempt_count(&self) -> u32 {
        self.attempts.len() as u32
    }

    /// LLM invocations == visits to AwaitVectorization.
    pub fn await_entries(&self) -> u32 {
        self.states
            .iter()
            .filter(|s| matches!(s, AgentState::AwaitVectorization))
            .count() as u32
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FsmConfig {
    pub max_attempts: u32,
    pub test: TestConfig,
    pub llm: LlmConfig,
    /// Run the formal driver on plausible candidates when set.
    pub verify: Option<ToolConfig>,
    pub collect_remarks: bool,
    /// Suppress wall-clock timestamps so replayed transcripts are
    /// byte-identical.
    pub deterministic: bool,
    pub max_prompt_chars: usize,
}

impl Default for FsmConfig {
    fn default() -> Self {
        FsmConfig {
            max_attempts: 10,
            test: TestConfig::default(),
            llm: LlmConfig::default(),
            verify: None,
            collect_remarks: true,
            deterministic: false,
            max_prompt_chars: 120_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("tool missing: {0}")]
    ToolMissing(String),
    #[error("compile error:\n{0}")]
    CompileError(String),
    #[error(transparent)]
    Tool(#[from] crate::tools::ToolError),
}

// --- prompt templates (versioned text assets) ---

const INITIAL_TEMPLATE: &str = include_str!("../assets/prompts/initial_v1.txt");
const REMARKS_SECTION_TEMPLATE: &str = include_str!("../assets/prompts/remarks_section_v1.txt");
const REPAIR_COMPILE_TEMPLATE: &str = include_str!("../assets/prompts/repair_compile_v1.txt");
const REPAIR_MISMATCH_TEMPLATE: &str = include_str!("../assets/prompts/repair_mismatch_v1.txt");
const REPAIR_INEQUIV_TEMPLATE: &str = include_str!("../assets/prompts/repair_inequiv_v1.txt");

fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn template_hashes() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("initial_v1".to_string(), sha256_hex(INITIAL_TEMPLATE)),
        (
            "remarks_section_v1".to_string(),
            sha256_hex(REMARKS_SECTION_TEMPLATE),
        ),
        (
            "repair_compile_v1".to_string(),
            sha256_hex(REPAIR_COMPILE_TEMPLATE),
        ),
        (
            "repair_mismatch_v1".to_string(),
            sha256_hex(REPAIR_MISMATCH_TEMPLATE),
        ),
        (
            "repair_inequiv_v1".to_string(),
            sha256_hex(REPAIR_INEQUIV_TEMPLATE),
        ),
    ])
}

/// Initial prompt: the scalar source verbatim, the AVX2 target statement,
/// and (when present) the compiler's dependence remarks with the
/// eliminate-the-dependence instruction. Oversized remarks are truncated;
/// the source never is.
pub fn build_initial_prompt(src: &SourceFunction, clang_remarks: &str) -> String {
    build_initial_prompt_bounded(src, clang_remarks, FsmConfig::default().max_prompt_chars)
}

pub fn build_initial_prompt_bounded(
    src: &SourceFunction,
    clang_remarks: &str,
    max_chars: usize,
) -> String {
    let source = print_function(src);
    let base = INITIAL_TEMPLATE
        .replace("{{source}}", source.trim_end())
        .replace("{{remarks_section}}", "");
    let remarks = clang_remarks.trim();
    if remarks.is_empty() {
        return base;
    }
    let section_empty = REMARKS_SECTION_TEMPLATE.replace("{{remarks}}", "");
    let budget = max_chars
        .saturating_sub(base.len())
        .saturating_sub(section_empty.len());
    let remarks = truncate_chars(remarks, budget);
    let section = REMARKS_SECTION_TEMPLATE.replace("{{remarks}}", &remarks);
    INITIAL_TEMPLATE
        .replace("{{source}}", source.trim_end())
        .replace("{{remarks_section}}", &section)
}

/// Repair prompt: the prior candidate plus the feedback — compiler
/// diagnostics, a rendered mismatch witness with concrete array values, or a
/// verifier counterexample.
pub fn build_repair_prompt(prev_candidate: &str, fb: &FeedbackMessage) -> String {
    build_repair_prompt_bounded(prev_candidate, fb, FsmConfig::default().max_prompt_chars)
}

pub fn build_repair_prompt_bounded(
    prev_candidate: &str,
    fb: &FeedbackMessage,
    max_chars: usize,
) -> String {
    let (template, payload) = match fb.kind {
        FeedbackKind::CompileError => (
            REPAIR_COMPILE_TEMPLATE,
            fb.diagnostics.clone().unwrap_or_default(),
        ),
        FeedbackKind::ChecksumMismatch => (
            REPAIR_MISMATCH_TEMPLATE,
            fb.witness
                .as_ref()
                .map(|w| render_witness(w, 16))
                .unwrap_or_default(),
        ),
        FeedbackKind::VerifierInequivalence => (
            REPAIR_INEQUIV_TEMPLATE,
            fb.counterexample.clone().unwrap_or_default(),
        ),
    };
    let placeholder = match fb.kind {
        FeedbackKind::CompileError => "{{diagnostics}}",
        FeedbackKind::ChecksumMismatch => "{{witness}}",
        FeedbackKind::VerifierInequivalence => "{{counterexample}}",
    };
    let base = template
        .replace("{{candidate}}", prev_candidate.trim_end())
        .replace(placeholder, "");
    let budget = max_chars.saturating_sub(base.len());
    let payload = truncate_chars(&payload, budget);
    template
        .replace("{{candidate}}", prev_candidate.trim_end())
        .replace(placeholder, &payload)
}

fn truncate_chars(text: &str, budget: usize) -> String {
    if text.len() <= budget {
        return text.to_string();
    }
    let marker = "\n[... truncated ...]";
    let keep = budget.saturating_sub(marker.len());
    let mut cut = keep.min(text.len());
    while cut > 0 && !text.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}{}", &text[..cut], marker)
}

/// Human-readable witness: the failing trial's inputs (clipped per array)
/// and the first mismatch with expected vs actual values.
pub fn render_witness(w: &Witness, max_elems: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "trial {} with trip count n = {} (seed {:#x}):\n",
        w.trial, w.trip_count, w.seed
    ));
    for trial in &w.inputs {
        for (name, values) in trial {
            let shown: Vec<String> = values
                .iter()
                .take(max_elems)
                .map(|v| v.to_string())
                .collect();
            let ellipsis = if values.len() > max_elems {
                ", ..."
            } else {
                ""
            };
            out.push_str(&format!(
                "  input {name} = [{}{}]\n",
                shown.join(", "),
                ellipsis
            ));
        }
    }
    match &w.kind {
        FailureKind::Mismatch {
            array,
            index,
            expected,
            actual,
        } => out.push_str(&format!(
            "  first mismatch: output array `{array}` at index {index}: expected {expected}, actual {actual}\n"
        )),
        FailureKind::ScalarReturn { expected, actual } => out.push_str(&format!(
            "  scalar result mismatch: expected {expected}, actual {actual}\n"
        )),
        FailureKind::Runtime { detail } => {
            out.push_str(&format!("  runtime failure: {detail}\n"))
        }
    }
    out
}

/// Capture `-Rpass-analysis=loop-vectorize` remarks for the kernel; empty
/// when the loop vectorizes cleanly. Requires clang (remark flags are
/// clang-specific).
pub fn collect_clang_remarks(src: &SourceFunction, _tc: &Toolchain) -> Result<String, AgentError> {
    let clang = find_in_path("clang")
        .ok_or_else(|| AgentError::ToolMissing("clang (required for remarks)".to_string()))?;
    let dir = tempfile::tempdir().map_err(crate::tools::ToolError::Io)?;
    let path = dir.path().join("kernel.c");
    std::fs::write(&path, print_function(src)).map_err(crate::tools::ToolError::Io)?;
    let flags = "-O3 -mavx2 -fstrict-aliasing -fvectorize -Rpass-analysis=loop-vectorize";
    let (compile_flags, _) = split_flags(flags);
    let mut cmd = Command::new(clang);
    cmd.args(&compile_flags)
        .arg("-c")
        .arg(&path)
        .args(["-o", "/dev/null"]);
    let out = run_command(cmd, Some(Duration::from_secs(60)), None)?;
    if !out.success() {
        return Err(AgentError::CompileError(out.stderr));
    }
    let remarks: Vec<&str> = out
        .stderr
        .lines()
        .filter(|l| l.contains("remark:"))
        .collect();
    Ok(remarks.join("\n"))
}

fn now_string() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    format!("{}.{:03}", now.as_secs(), now.subsec_millis())
}

/// Drive one vectorization session to a terminal state.
pub fn run_fsm(
    src: &SourceFunction,
    cfg: &FsmConfig,
    backend: &dyn CompletionBackend,
    toolchain: &Toolchain,
) -> Transcript {
    let mut states = vec![AgentState::Init];
    let mut attempts: Vec<Attempt> = Vec::new();
    let started_at = (!cfg.deterministic).then(now_string);

    let remarks = if cfg.collect_remarks {
        collect_clang_remarks(src, toolchain).unwrap_or_default()
    } else {
        String::new()
    };
    let mut prompt = build_initial_prompt_bounded(src, &remarks, cfg.max_prompt_chars);

    let terminal: AgentState = loop {
        states.push(AgentState::AwaitVectorization);
        let attempt_index = attempts.len() as u32 + 1;
        let set = match backend.complete(&prompt, &cfg.llm) {
            Ok(set) => set,
            Err(e) => {
                let failed = AgentState::Failed {
                    reason: format!("backend unavailable: {e}"),
                };
                states.push(failed.clone());
                attempts.push(Attempt {
                    index: attempt_index,
                    prompt: prompt.clone(),
                    completions: Vec::new(),
                    verdicts: Vec::new(),
                    chosen: None,
                    feedback: None,
                    note: Some(e.to_string()),
                });
                break failed;
            }
        };
        states.push(AgentState::Testing);
        let candidates: Vec<String> = set
            .completions
            .iter()
            .map(|c| extract_code_block(c))
            .collect();
        let batch = match evaluate_batch(src, &candidates, &cfg.test, toolchain, 1) {
            Ok(b) => b,
            Err(e) => {
                let failed = AgentState::Failed {
                    reason: format!("testing infrastructure failure: {e}"),
                };
                states.push(failed.clone());
                break failed;
            }
        };
        let verdict_labels: Vec<String> = batch
            .verdicts
            .iter()
            .map(|v| v.label().to_string())
            .collect();

        let mut attempt = Attempt {
            index: attempt_index,
            prompt: prompt.clone(),
            completions: set.completions.clone(),
            verdicts: verdict_labels,
            chosen: batch.first_plausible(),
            feedback: None,
            note: None,
        };

        if let Some(chosen) = batch.first_plausible() {
            // plausible: verify when configured, otherwise done
            let Some(verify_cfg) = &cfg.verify else {
                attempts.push(attempt);
                let done = AgentState::Done {
                    outcome: FsmOutcome::Plausible,
                };
                states.push(done.clone());
                break done;
            };
            states.push(AgentState::Verifying);
            let chosen_text = &candidates[chosen];
            let verify_result = match parse_function(chosen_text) {
                Ok(vec_fn) => check_equivalence(
                    src,
                    &vec_fn,
                    verify_cfg,
                    &cfg.test,
                    toolchain,
                    Some(&Verdict::Plausible),
                ),
                Err(e) => Err(VerifyError::CompileError(format!(
                    "candidate outside supported subset: {e}"
                ))),
            };
            match verify_result {
                Ok(EquivResult::Equivalent { unroll_m, .. }) => {
                    attempt.note = Some("formally verified equivalent".to_string());
                    attempts.push(attempt);
                    let done = AgentState::Done {
                        outcome: FsmOutcome::Verified { unroll_m },
                    };
                    states.push(done.clone());
                    break done;
                }
                Ok(EquivResult::Inequivalent { counterexample }) => {
                    let fb = FeedbackMessage {
                        kind: FeedbackKind::VerifierInequivalence,
                        diagnostics: None,
                        witness: None,
                        counterexample: Some(counterexample),
                        instruction: "resolve the discrepancies found by the verifier".to_string(),
                    };
                    attempt.feedback = Some(fb.clone());
                    let prev = candidates[chosen].clone();
                    attempts.push(attempt);
                    if attempts.len() as u32 >= cfg.max_attempts {
                        let failed = AgentState::Failed {
                            reason: "attempt budget exhausted".to_string(),
                        };
                        states.push(failed.clone());
                        break failed;
                    }
                    states.push(AgentState::RepairFeedback);
                    prompt = build_repair_prompt_bounded(&prev, &fb, cfg.max_prompt_chars);
                    continue;
                }
                Ok(EquivResult::Inconclusive { cause, detail }) => {
                    attempt.note = Some(format!("verification inconclusive ({cause:?}): {detail}"));
                    attempts.push(attempt);
                    let done = AgentState::Done {
                        outcome: FsmOutcome::Plausible,
                    };
                    states.push(done.clone());
                    break done;
                }
                Err(e) => {
                    attempt.note = Some(format!("verification unavailable: {e}"));
                    attempts.push(attempt);
                    let done = AgentState::Done {
                        outcome: FsmOutcome::Plausible,
                    };
                    states.push(done.clone());
                    break done;
                }
            }
        }

        // nothing plausible: build feedback, preferring a concrete mismatch
        let mismatch = batch
            .verdicts
            .iter()
            .position(|v| matches!(v, Verdict::Inequivalent { .. }));
        let (fb, prev_index) = match mismatch {
            Some(i) => {
                let Verdict::Inequivalent { witness } = &batch.verdicts[i] else {
                    unreachable!()
                };
                (
                    FeedbackMessage {
                        kind: FeedbackKind::ChecksumMismatch,
                        diagnostics: None,
                        witness: Some(witness.clone()),
                        counterexample: None,
                        instruction: "use the input and output values to repair the vectorization"
                            .to_string(),
                    },
                    i,
                )
            }
            None => {
                let Verdict::CannotCompile { diagnostics } = &batch.verdicts[0] else {
                    unreachable!("no plausible, no mismatch, so all must be compile failures")
                };
                (
                    FeedbackMessage {
                        kind: FeedbackKind::CompileError,
                        diagnostics: Some(diagnostics.clone()),
                        witness: None,
                        counterexample: None,
                        instruction: "fix the compilation errors".to_string(),
                    },
                    0,
                )
            }
        };
        attempt.feedback = Some(fb.clone());
        let prev = candidates[prev_index].clone();
        attempts.push(attempt);
        if attempts.len() as u32 >= cfg.max_attempts {
            let failed = AgentState::Failed {
                reason: "attempt budget exhausted".to_string(),
            };
            states.push(failed.clone());
            break failed;
        }
        states.push(AgentState::RepairFeedback);
        prompt = build_repair_prompt_bounded(&prev, &fb, cfg.max_prompt_chars);
    };

    let finished_at = (!cfg.deterministic).then(now_string);
    Transcript {
        test: src.name.clone(),
        attempts,
        states,
        outcome: terminal,
        started_at,
        finished_at,
        model: cfg.llm.model.clone(),
        backend: backend.id().to_string(),
        template_hashes: template_hashes(),
        config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
    }
}
