//! Checksum-based differential testing: random inputs, run both versions,
//! compare outputs element-wise. Plus the pass@k success metric.
//!
//! Candidates are handled as raw C text: each side is compiled in its own
//! translation unit under a preprocessor rename and linked against a
//! generated `main` that embeds the trial data. The scalar reference is
//! compiled with auto-vectorization disabled so the reference semantics stay
//! scalar; the C compiler is the judge of whether a candidate compiles.

mod harness;
mod passk;

pub use harness::{HarnessReport, TrialInputs, CAND_SUFFIX, PAD, SCALAR_SUFFIX};
pub use passk::{binomial, pass_at_k, pass_at_k_curve_counts, PassKError};

use crate::csubset::{print_function, ParamKind, SourceFunction};
use crate::tools::{run_command, split_flags, CmdOutput, ToolError, Toolchain};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::process::Command;
use std::time::Duration;

/// The shipped Clang scalar profile flags; the scalar reference must not
/// be auto-vectorized.
pub const SCALAR_FLAGS: &str = "-O3 -mavx2 -lm -fno-tree-vectorize";
/// Candidate flags: intrinsics are explicit, no auto-vectorization on top.
pub const CAND_FLAGS: &str = "-O3 -mavx2 -lm";
const RUN_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestConfig {
    /// Trip count handed to every scalar-int parameter; array buffers hold
    /// `trip_count + PAD` elements.
    pub trip_count: u32,
    pub trials: u32,
    pub seed: u64,
    /// Inclusive value range for random inputs; small nonnegative values keep
    /// intermediate arithmetic inside 32 bits across the corpus kernels.
    pub value_range: (i32, i32),
    /// Candidate vector width the trip count must be a multiple of; 8 for
    /// AVX2 candidates, 1 when the candidate is scalar.
    #[serde(default = "default_vector_width")]
    pub vector_width: u32,
}

fn default_vector_width() -> u32 {
    8
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            trip_count: 1024,
            trials: 5,
            seed: 0x5EED,
            value_range: (0, 100),
            vector_width: 8,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<(), DifftestError> {
        if self.trip_count == 0
            || self.vector_width == 0
            || !self.trip_count.is_multiple_of(self.vector_width)
        {
            return Err(DifftestError::Config(format!(
                "trip_count must be a positive multiple of the vector width ({}), got {}",
                self.vector_width, self.trip_count
            )));
        }
        if self.trials == 0 {
            return Err(DifftestError::Config("trials must be >= 1".to_string()));
        }
        if self.value_range.0 > self.value_range.1 {
            return Err(DifftestError::Config("empty value_range".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DifftestError {
    #[error("invalid test config: {0}")]
    Config(String),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    Mismatch {
        array: String,
        index: u32,
        expected: i32,
        actual: i32,
    },
    ScalarReturn {
        expected: i32,
        actual: i32,
    },
    Runtime {
        detail: String,
    },
}

/// Everything needed to replay a failing run: the inputs are exact buffer
/// contents, one trial for a mismatch, all trials for a runtime failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub seed: u64,
    pub trip_count: u32,
    pub trial: u32,
    pub inputs: Vec<TrialInputs>,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Plausible,
    Inequivalent { witness: Witness },
    CannotCompile { diagnostics: String },
}

impl Verdict {
    pub fn is_plausible(&self) -> bool {
        matches!(self, Verdict::Plausible)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Plausible => "plausible",
            Verdict::Inequivalent { .. } => "inequivalent",
            Verdict::CannotCompile { .. } => "cannot_compile",
        }
    }
}

/// SplitMix64; pinned here so input streams never drift under dependency
/// upgrades.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in the inclusive range.
    pub fn int_in(&mut self, lo: i32, hi: i32) -> i32 {
        let span = (i64::from(hi) - i64::from(lo) + 1) as u64;
        (i64::from(lo) + (self.next_u64() % span) as i64) as i32
    }
}

fn generate_trials(src: &SourceFunction, cfg: &TestConfig) -> Vec<TrialInputs> {
    let mut rng = SplitMix64::new(cfg.seed);
    let total = (cfg.trip_count + PAD) as usize;
    (0..cfg.trials)
        .map(|_| {
            src.params
                .iter()
                .filter(|p| p.kind == ParamKind::IntArray)
                .map(|p| {
                    let values = (0..total)
                        .map(|_| rng.int_in(cfg.value_range.0, cfg.value_range.1))
                        .collect();
                    (p.name.clone(), values)
                })
                .collect()
        })
        .collect()
}

/// Compile both versions into a harness, run the trials, and classify.
/// Deterministic for a fixed (src, vec_text, cfg.seed).
pub fn run_checksum_test(
    src: &SourceFunction,
    vec_text: &str,
    cfg: &TestConfig,
    tc: &Toolchain,
) -> Result<Verdict, DifftestError> {
    cfg.validate()?;
    let trials = generate_trials(src, cfg);
    run_trials(src, vec_text, cfg.trip_count, cfg.seed, &trials, tc)
}

/// Re-run a previously captured witness; a mismatch witness reproduces the
/// same first mismatch.
pub fn replay_witness(
    src: &SourceFunction,
    vec_text: &str,
    witness: &Witness,
    tc: &Toolchain,
) -> Result<Verdict, DifftestError> {
    run_trials(
        src,
        vec_text,
        witness.trip_count,
        witness.seed,
        &witness.inputs,
        tc,
    )
}

fn compile_tu(
    tc: &Toolchain,
    dir: &Path,
    file: &str,
    flags: &str,
    define: Option<(&str, &str)>,
    out: &str,
) -> Result<CmdOutput, DifftestError> {
    let (compile_flags, _link) = split_flags(flags);
    let mut cmd = Command::new(&tc.cc);
    cmd.current_dir(dir).args(&compile_flags);
    if let Some((from, to)) = define {
        cmd.arg(format!("-D{from}={to}"));
    }
    cmd.args(["-c", file, "-o", out]);
    Ok(run_command(cmd, Some(Duration::from_secs(60)), None)?)
}

fn run_trials(
    src: &SourceFunction,
    vec_text: &str,
    trip_count: u32,
    seed: u64,
    trials: &[TrialInputs],
    tc: &Toolchain,
) -> Result<Verdict, DifftestError> {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    std::fs::write(d.join("reference.c"), print_function(src))?;
    std::fs::write(d.join("candidate.c"), vec_text)?;
    std::fs::write(
        d.join("main.c"),
        harness::emit_main(src, trip_count, trials),
    )?;

    let scalar_name = format!("{}{SCALAR_SUFFIX}", src.name);
    let out = compile_tu(
        tc,
        d,
        "reference.c",
        SCALAR_FLAGS,
        Some((&src.name, &scalar_name)),
        "reference.o",
    )?;
    if !out.success() {
        return Ok(Verdict::CannotCompile {
            diagnostics: format!("scalar reference failed to compile:\n{}", out.stderr),
        });
    }
    let cand_name = format!("{}{CAND_SUFFIX}", src.name);
    let out = compile_tu(
        tc,
        d,
        "candidate.c",
        CAND_FLAGS,
        Some((&src.name, &cand_name)),
        "candidate.o",
    )?;
    if !out.success() {
        return Ok(Verdict::CannotCompile {
            diagnostics: out.stderr,
        });
    }
    let (_, link_flags) = split_flags(CAND_FLAGS);
    let mut link = Command::new(&tc.cc);
    link.current_dir(d)
        .args([
            "-O1",
            "main.c",
            "reference.o",
            "candidate.o",
            "-o",
            "harness",
        ])
        .args(&link_flags);
    let out = run_command(link, Some(Duration::from_secs(60)), None)?;
    if !out.success() {
        return Ok(Verdict::CannotCompile {
            diagnostics: format!("harness link failed:\n{}", out.stderr),
        });
    }

    let run = run_command(Command::new(d.join("harness")), Some(RUN_TIMEOUT), None)?;
    let runtime_witness = |detail: String| Verdict::Inequivalent {
        witness: Witness {
            seed,
            trip_count,
            trial: 0,
            inputs: trials.to_vec(),
            kind: FailureKind::Runtime { detail },
        },
    };
    if run.timed_out {
        return Ok(runtime_witness(format!(
            "test binary exceeded the {}s timeout",
            RUN_TIMEOUT.as_secs()
        )));
    }
    match harness::parse_report(&run.stdout) {
        Some(HarnessReport::Ok) if run.status == Some(0) => Ok(Verdict::Plausible),
        Some(HarnessReport::Mismatch {
            trial,
            array,
            index,
            expected,
            actual,
        }) => Ok(Verdict::Inequivalent {
            witness: Witness {
                seed,
                trip_count,
                trial,
                inputs: vec![trials[trial as usize].clone()],
                kind: FailureKind::Mismatch {
                    array,
                    index,
                    expected,
                    actual,
                },
            },
        }),
        Some(HarnessReport::ScalarMismatch {
            trial,
            expected,
            actual,
        }) => Ok(Verdict::Inequivalent {
            witness: Witness {
                seed,
                trip_count,
                trial,
                inputs: vec![trials[trial as usize].clone()],
                kind: FailureKind::ScalarReturn { expected, actual },
            },
        }),
        _ => Ok(runtime_witness(match run.status {
            Some(code) => format!("test binary exited with status {code}"),
            None => "test binary was killed by a signal".to_string(),
        })),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchLabel {
    Plausible,
    NotEquivalent,
    CannotCompile,
}

#[derive(Debug, Clone)]
pub struct CandidateBatch {
    pub source: SourceFunction,
    pub candidates: Vec<String>,
    pub verdicts: Vec<Verdict>,
}

impl CandidateBatch {
    /// Plausible if any candidate is; CannotCompile only if every candidate
    /// failed to compile; NotEquivalent otherwise.
    pub fn label(&self) -> BatchLabel {
        if self.verdicts.iter().any(Verdict::is_plausible) {
            BatchLabel::Plausible
        } else if self
            .verdicts
            .iter()
            .all(|v| matches!(v, Verdict::CannotCompile { .. }))
        {
            BatchLabel::CannotCompile
        } else {
            BatchLabel::NotEquivalent
        }
    }

    pub fn first_plausible(&self) -> Option<usize> {
        self.verdicts.iter().position(Verdict::is_plausible)
    }

    /// (samples, plausible) counts for pass@k.
    pub fn counts(&self) -> (u64, u64) {
        (
            self.verdicts.len() as u64,
            self.verdicts.iter().filter(|v| v.is_plausible()).count() as u64,
        )
    }
}

/// Evaluate every candidate; `parallelism` > 1 fans evaluations out across
/// threads, each owning its working directory, with results merged back in
/// candidate order.
pub fn evaluate_batch(
    src: &SourceFunction,
    candidates: &[String],
    cfg: &TestConfig,
    tc: &Toolchain,
    parallelism: usize,
) -> Result<CandidateBatch, DifftestError> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(DifftestError::Config(
            "candidate list must be nonempty".to_string(),
        ));
    }
    let mut verdicts: Vec<Option<Verdict>> = vec![None; candidates.len()];
    if parallelism <= 1 {
        for (i, cand) in candidates.iter().enumerate() {
            verdicts[i] = Some(run_checksum_test(src, cand, cfg, tc)?);
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results = std::sync::Mutex::new(vec![None; candidates.len()]);
        let first_err = std::sync::Mutex::new(None);
        std::thread::scope(|scope| {
            for _ in 0..parallelism.min(candidates.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= candidates.len() {
                        break;
                    }
                    match run_checksum_test(src, &candidates[i], cfg, tc) {
                        Ok(v) => results.lock().unwrap()[i] = Some(v),
                        Err(e) => {
                            let mut slot = first_err.lock().unwrap();
                            if slot.is_none() {
                                *slot = Some(e);
                            }
                            break;
                        }
                    }
                });
            }
        });
        if let Some(e) = first_err.into_inner().unwrap() {
            return Err(e);
        }
        verdicts = results.into_inner().unwrap();
    }
    let verdicts = verdicts
        .into_iter()
        .map(|v| v.expect("every candidate evaluated"))
        .collect();
    Ok(CandidateBatch {
        source: src.clone(),
        candidates: candidates.to_vec(),
        verdicts,
    })
}

/// Mean pass@k across evaluated batches.
pub fn pass_at_k_curve(
    batches: &[CandidateBatch],
    ks: &[u64],
) -> Result<Vec<(u64, f64)>, PassKError> {
    let counts: Vec<(u64, u64)> = batches.iter().map(CandidateBatch::counts).collect();
    pass_at_k_curve_counts(&counts, ks)
}

/// One JSON line per candidate: {test, candidate_index, verdict, witness?}.
pub fn emit_verdicts_jsonl(
    test: &str,
    batch: &CandidateBatch,
    w: &mut impl std::io::Write,
) -> std::io::Result<()> {
    for (i, verdict) in batch.verdicts.iter().enumerate() {
        let mut obj = serde_json::json!({
            "test": test,
            "candidate_index": i,
            "verdict": verdict.label(),
        });
        match verdict {
            Verdict::Inequivalent { witness } => {
                obj["witness"] = serde_json::to_value(witness).expect("witness serializes");
            }
            Verdict::CannotCompile { diagnostics } => {
                obj["diagnostics"] = serde_json::Value::String(diagnostics.clone());
            }
            Verdict::Plausible => {}
        }
        writeln!(w, "{obj}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
pub struct VerdictRecord {
    pub test: String,
    pub candidate_index: u64,
    pub verdict: String,
    #[serde(default)]
    pub witness: Option<Witness>,
    #[serde(default)]
    pub diagnostics: Option<String>,
}

pub fn parse_verdicts_jsonl(text: &str) -> Result<Vec<VerdictRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csubset::parse_function;

    const S212: &str = "void s212(int n, int *a, int *b, int *c, int *d) { for (int i = 0; i < n-1; i++) { a[i] *= c[i]; b[i] += a[i + 1] * d[i]; } }";

    fn quick_cfg() -> TestConfig {
        TestConfig {
            trip_count: 64,
            trials: 2,
            seed: 7,
            value_range: (0, 100),
            vector_width: 8,
        }
    }

    fn tc() -> Toolchain {
        Toolchain::discover().unwrap()
    }

    #[test]
    fn self_comparison_is_plausible() {
        let src = parse_function(S212).unwrap();
        let v = run_checksum_test(&src, &print_function(&src), &quick_cfg(), &tc()).unwrap();
        assert_eq!(v, Verdict::Plausible);
    }

    #[test]
    fn undeclared_identifier_cannot_compile() {
        let src = parse_function(S212).unwrap();
        let cand = "void s212(int n, int *a, int *b, int *c, int *d) { undeclared_thing(); }";
        let v = run_checksum_test(&src, cand, &quick_cfg(), &tc()).unwrap();
        match v {
            Verdict::CannotCompile { diagnostics } => {
                assert!(diagnostics.contains("undeclared"), "{diagnostics}")
            }
            other => panic!("expected CannotCompile, got {other:?}"),
        }
    }

    #[test]
    fn wrong_candidate_yields_replayable_witness() {
        let src = parse_function(S212).unwrap();
        let cand = "void s212(int n, int *a, int *b, int *c, int *d) { for (int i = 0; i < n-1; i++) { a[i] *= c[i]; b[i] += a[i + 1] * d[i] + 1; } }";
        let v = run_checksum_test(&src, cand, &quick_cfg(), &tc()).unwrap();
        let Verdict::Inequivalent { witness } = &v else {
            panic!("expected Inequivalent, got {v:?}");
        };
        let FailureKind::Mismatch {
            array,
            index,
            expected,
            actual,
        } = &witness.kind
        else {
            panic!("expected element mismatch");
        };
        assert_eq!(array, "b");
        assert_eq!(*actual, *expected + 1);
        assert_eq!(*index, 0);
        // replaying the captured inputs reproduces the identical mismatch
        let replayed = replay_witness(&src, cand, witness, &tc()).unwrap();
        let Verdict::Inequivalent { witness: w2 } = replayed else {
            panic!("replay changed verdict");
        };
        assert_eq!(w2.kind, witness.kind);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let src = parse_function(S212).unwrap();
        let cand = "void s212(int n, int *a, int *b, int *c, int *d) { for (int i = 0; i < n-1; i++) { a[i] *= c[i]; b[i] += a[i] * d[i]; } }";
        let v1 = run_checksum_test(&src, cand, &quick_cfg(), &tc()).unwrap();
        let v2 = run_checksum_test(&src, cand, &quick_cfg(), &tc()).unwrap();
        assert_eq!(v1, v2);
        assert!(matches!(v1, Verdict::Inequivalent { .. }));
    }

    #[test]
    fn scalar_return_values_compared() {
        let src = parse_function(
            "int vsumr(int n, int *a) { int sum = 0; for (int i = 0; i < n; i++) { sum += a[i]; } return sum; }",
        )
        .unwrap();
        let bad = "int vsumr(int n, int *a) { int sum = 0; for (int i = 0; i < n; i++) { sum += a[i]; } return sum + 1; }";
        let v = run_checksum_test(&src, bad, &quick_cfg(), &tc()).unwrap();
        let Verdict::Inequivalent { witness } = v else {
            panic!("expected Inequivalent");
        };
        assert!(matches!(witness.kind, FailureKind::ScalarReturn { .. }));
    }

    #[test]
    fn crash_reports_runtime_cause() {
        let src =
            parse_function("void f(int n, int *a) { for (int i = 0; i < n; i++) { a[i] = 0; } }")
                .unwrap();
        let cand = "#include <stdlib.h>\nvoid f(int n, int *a) { abort(); }";
        let v = run_checksum_test(&src, cand, &quick_cfg(), &tc()).unwrap();
        let Verdict::Inequivalent { witness } = v else {
            panic!("expected Inequivalent");
        };
        assert!(matches!(witness.kind, FailureKind::Runtime { .. }));
    }

    #[test]
    fn empty_kernel_pair_is_plausible() {
        let src = parse_function("void f(int n, int *a) { }").unwrap();
        let v = run_checksum_test(&src, "void f(int n, int *a) { }", &quick_cfg(), &tc()).unwrap();
        assert_eq!(v, Verdict::Plausible);
    }

    #[test]
    fn batch_labels_follow_the_rules() {
        let src =
            parse_function("void f(int n, int *a) { for (int i = 0; i < n; i++) { a[i] += 1; } }")
                .unwrap();
        let good = "void f(int n, int *a) { for (int i = 0; i < n; i++) { a[i] += 1; } }";
        let wrong = "void f(int n, int *a) { for (int i = 0; i < n; i++) { a[i] += 2; } }";
        let broken = "void f(int n, int *a) { nope(); }";
        let cfg = quick_cfg();

        let batch = evaluate_batch(
            &src,
            &[broken.to_string(), wrong.to_string(), good.to_string()],
            &cfg,
            &tc(),
            1,
        )
        .unwrap();
        assert_eq!(batch.label(), BatchLabel::Plausible);
        assert_eq!(batch.first_plausible(), Some(2));
        assert_eq!(batch.counts(), (3, 1));

        let batch = evaluate_batch(
            &src,
            &[broken.to_string(), broken.to_string()],
            &cfg,
            &tc(),
            1,
        )
        .unwrap();
        assert_eq!(batch.label(), BatchLabel::CannotCompile);

        let batch = evaluate_batch(
            &src,
            &[wrong.to_string(), broken.to_string()],
            &cfg,
            &tc(),
            2,
        )
        .unwrap();
        assert_eq!(batch.label(), BatchLabel::NotEquivalent);
    }

    #[test]
    fn jsonl_round_trips() {
        let src = parse_function("void f(int n, int *a) { }").unwrap();
        let batch = CandidateBatch {
            source: src,
            candidates: vec!["x".to_string(), "y".to_string()],
            verdicts: vec![
                Verdict::Plausible,
                Verdict::CannotCompile {
                    diagnostics: "bad".to_string(),
                },
            ],
        };
        let mut buf = Vec::new();
        emit_verdicts_jsonl("t0", &batch, &mut buf).unwrap();
        let records = parse_verdicts_jsonl(&String::from_utf8(buf).unwrap()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].verdict, "plausible");
        assert_eq!(records[1].verdict, "cannot_compile");
        assert_eq!(records[1].diagnostics.as_deref(), Some("bad"));
    }

    #[test]
    fn splitmix_is_stable() {
        let mut rng = SplitMix64::new(0x5EED);
        let first: Vec<u64> = (0..4).map(|_| rng.next_u64()).collect();
        let mut rng2 = SplitMix64::new(0x5EED);
        let second: Vec<u64> = (0..4).map(|_| rng2.next_u64()).collect();
        assert_eq!(first, second);
        let mut rng3 = SplitMix64::new(1);
        for _ in 0..1000 {
            let v = rng3.int_in(0, 100);
            assert!((0..=100).contains(&v));
        }
    }
}
