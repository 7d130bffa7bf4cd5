//! Runtime comparison of LLM-vectorized kernels against per-compiler scalar
//! baselines. The candidate is compiled once with Clang and no
//! auto-vectorization on top (so the measurement isolates the intrinsics);
//! each profile contributes its own scalar baseline.

use crate::csubset::{print_function, CType, ParamKind, SourceFunction};
use crate::tools::{find_in_path, run_command, split_flags, Toolchain};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompilerProfile {
    /// "gcc", "clang", "icc", or a user-defined id; the binary is looked up
    /// under this name unless `path` overrides it.
    pub id: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub version: String,
    pub scalar_flags: String,
    pub vectorized_flags: String,
}

/// The three shipped profiles; flag strings are data and kept verbatim.
pub fn shipped_profiles() -> Vec<CompilerProfile> {
    vec![
        CompilerProfile {
            id: "gcc".to_string(),
            path: None,
            version: "10.5.0".to_string(),
            scalar_flags: "-O3 -mavx2 -lm".to_string(),
            vectorized_flags: "-W -O3 -mavx2 -lm -ftree-vectorizer-verbose=3 -ftree-vectorize -fopt-info-vec-optimized".to_string(),
        },
        CompilerProfile {
            id: "clang".to_string(),
            path: None,
            version: "19.0.0".to_string(),
            scalar_flags: "-O3 -mavx2 -lm -fno-tree-vectorize".to_string(),
            vectorized_flags: "-O3 -mavx2 -fstrict-aliasing -fvectorize -fslp-vectorize-aggressive -Rpass-analysis=loop-vectorize -lm".to_string(),
        },
        CompilerProfile {
            id: "icc".to_string(),
            path: None,
            version: "2021.10.0".to_string(),
            scalar_flags: "-restrict -std=c99 -O3 -ip -no-vec".to_string(),
            vectorized_flags: "-restrict -std=c99 -O3 -ip -vec -xAVX2".to_string(),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Category {
    ControlFlow,
    Dependence,
    DependenceControlFlow,
    NaivelyVectorizable,
    Reduction,
    ReductionControlFlow,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::ControlFlow => "control-flow",
            Category::Dependence => "dependence",
            Category::DependenceControlFlow => "dependence+control-flow",
            Category::NaivelyVectorizable => "naively-vectorizable",
            Category::Reduction => "reduction",
            Category::ReductionControlFlow => "reduction+control-flow",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        match s {
            "control-flow" => Some(Category::ControlFlow),
            "dependence" => Some(Category::Dependence),
            "dependence+control-flow" => Some(Category::DependenceControlFlow),
            "naively-vectorizable" => Some(Category::NaivelyVectorizable),
            "reduction" => Some(Category::Reduction),
            "reduction+control-flow" => Some(Category::ReductionControlFlow),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineTiming {
    pub compiler: String,
    pub baseline_ns: Option<f64>,
    pub speedup: Option<f64>,
    /// Reason this profile was skipped (binary not installed, compile failed).
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub test: String,
    pub category: Category,
    pub baselines: Vec<BaselineTiming>,
    pub vectorized_ns: f64,
    pub trip_count: u32,
    pub reps: u32,
    pub machine: String,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("candidate failed to compile:\n{0}")]
    CandidateCompile(String),
    #[error("timing harness failed: {0}")]
    Harness(String),
    #[error("unstable measurement: spread {spread:.3} exceeds threshold {threshold:.3}")]
    Unstable { spread: f64, threshold: f64 },
    #[error(transparent)]
    Tool(#[from] crate::tools::ToolError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// speedup = baseline / candidate; below 1.0 is a slowdown.
pub fn compute_speedup(baseline_ns: f64, candidate_ns: f64) -> Result<f64, BenchError> {
    if baseline_ns <= 0.0 || candidate_ns <= 0.0 {
        return Err(BenchError::Domain(format!(
            "times must be positive, got baseline={baseline_ns} candidate={candidate_ns}"
        )));
    }
    Ok(baseline_ns / candidate_ns)
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub reps: u32,
    pub trip_count: u32,
    /// Relative lower-half spread (median - q1)/median beyond which a
    /// measurement is rejected as unstable.
    pub spread_threshold: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            reps: 31,
            trip_count: 32_000,
            spread_threshold: 0.10,
        }
    }
}

fn machine_fingerprint() -> String {
    let uname = Command::new("uname")
        .arg("-mrs")
        .output()
        .ok()
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_default();
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|text| {
            text.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1).map(|s| s.trim().to_string()))
        })
        .unwrap_or_default();
    format!("{uname}; {model}").trim().to_string()
}

/// Per-call timing harness: fault the pages once, re-initialize the arrays
/// outside the timed window before every call, report the median of `reps`
/// per-call times in ns. Checksum computation happens nowhere inside the
/// timed region.
fn emit_timing_main(f: &SourceFunction, trip: u32, reps: u32) -> String {
    let pad = 64;
    let total = trip + pad;
    let mut c = String::new();
    c.push_str("#include <stdio.h>\n#include <time.h>\n\n");
    let params = f
        .params
        .iter()
        .map(|p| match p.kind {
            ParamKind::ScalarInt => format!("int {}", p.name),
            ParamKind::IntArray => format!("int *{}", p.name),
        })
        .collect::<Vec<_>>()
        .join(", ");
    let ret = if f.return_type == CType::Int {
        "int"
    } else {
        "void"
    };
    let _ = writeln!(c, "{ret} {}({params});\n", f.name);
    let arrays: Vec<&str> = f
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::IntArray)
        .map(|p| p.name.as_str())
        .collect();
    for a in &arrays {
        let _ = writeln!(
            c,
            "static int vp_{a}[{total}] __attribute__((aligned(64)));"
        );
    }
    c.push_str(
        "\nstatic long long vp_now(void) {\n    struct timespec ts;\n    clock_gettime(CLOCK_MONOTONIC, &ts);\n    return ts.tv_sec * 1000000000LL + ts.tv_nsec;\n}\n\nstatic int vp_cmp(const void *a, const void *b) {\n    long long x = *(const long long *)a, y = *(const long long *)b;\n    return (x > y) - (x < y);\n}\n",
    );
    c.push_str("#include <stdlib.h>\n\n");
    let _ = writeln!(c, "static long long vp_samples[{reps}];\n");
    let mut init = String::new();
    for (ai, a) in arrays.iter().enumerate() {
        let _ = writeln!(
            init,
            "    for (int vp_i = 0; vp_i < {total}; vp_i++) vp_{a}[vp_i] = (vp_i * {mult} + {off}) % 64;",
            mult = 7 + ai,
            off = 3 * ai + 1
        );
    }
    let args = f
        .params
        .iter()
        .map(|p| match p.kind {
            ParamKind::ScalarInt => format!("{trip}"),
            ParamKind::IntArray => format!("vp_{}", p.name),
        })
        .collect::<Vec<_>>()
        .join(", ");
    c.push_str("int main(void) {\n");
    c.push_str(&init);
    // fault the pages and let the frequency governor settle before sampling
    let _ = writeln!(c, "    long long vp_w0 = vp_now();");
    let _ = writeln!(c, "    while (vp_now() - vp_w0 < 200000000LL) {{");
    c.push_str(&init.replace("    for", "        for"));
    let _ = writeln!(c, "        {}({args});", f.name);
    c.push_str("    }\n");
    let _ = writeln!(c, "    for (int vp_r = 0; vp_r < {reps}; vp_r++) {{");
    c.push_str(&init.replace("    for", "        for"));
    let _ = writeln!(c, "        long long vp_t0 = vp_now();");
    let _ = writeln!(c, "        {}({args});", f.name);
    let _ = writeln!(c, "        long long vp_t1 = vp_now();");
    c.push_str("        vp_samples[vp_r] = vp_t1 - vp_t0;\n    }\n");
    let _ = writeln!(
        c,
        "    qsort(vp_samples, {reps}, sizeof(long long), vp_cmp);"
    );
    let _ = writeln!(
        c,
        "    printf(\"median_ns=%lld q1_ns=%lld q3_ns=%lld\\n\", vp_samples[{mid}], vp_samples[{q1}], vp_samples[{q3}]);",
        mid = reps / 2,
        q1 = reps / 4,
        q3 = (3 * reps) / 4
    );
    c.push_str("    return 0;\n}\n");
    c
}

struct Timing {
    median_ns: f64,
    spread: f64,
}

fn compile_and_time(
    cc: &PathBuf,
    flags: &str,
    kernel_text: &str,
    f: &SourceFunction,
    opts: &BenchOptions,
) -> Result<Timing, BenchError> {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    std::fs::write(d.join("kernel.c"), kernel_text)?;
    std::fs::write(
        d.join("main.c"),
        emit_timing_main(f, opts.trip_count, opts.reps),
    )?;
    let (compile_flags, link_flags) = split_flags(flags);
    let mut cmd = Command::new(cc);
    cmd.current_dir(d)
        .args(&compile_flags)
        .args(["-c", "kernel.c", "-o", "kernel.o"]);
    let out = run_command(cmd, Some(Duration::from_secs(120)), None)?;
    if !out.success() {
        return Err(BenchError::CandidateCompile(out.stderr));
    }
    let mut link = Command::new(cc);
    link.current_dir(d)
        .args(["-O2", "main.c", "kernel.o", "-o", "bench"])
        .args(&link_flags);
    let out = run_command(link, Some(Duration::from_secs(120)), None)?;
    if !out.success() {
        return Err(BenchError::Harness(format!("link failed:\n{}", out.stderr)));
    }
    let out = run_command(
        Command::new(d.join("bench")),
        Some(Duration::from_secs(300)),
        None,
    )?;
    if !out.success() {
        return Err(BenchError::Harness(format!(
            "bench binary failed: {:?}\n{}",
            out.status, out.stderr
        )));
    }
    let kv: std::collections::BTreeMap<&str, f64> = out
        .stdout
        .split_whitespace()
        .filter_map(|tok| {
            let (k, v) = tok.split_once('=')?;
            Some((k, v.parse().ok()?))
        })
        .collect();
    let median = *kv
        .get("median_ns")
        .ok_or_else(|| BenchError::Harness(format!("no median in output: {}", out.stdout)))?;
    let q1 = kv.get("q1_ns").copied().unwrap_or(median);
    if median <= 0.0 {
        return Err(BenchError::Harness("non-positive median".to_string()));
    }
    // timing noise is one-sided (samples only get slower), so the gate is the
    // lower-half spread: it bounds how far the median sits from the fastest
    // stable runs without punishing occasional scheduler blips in the tail
    Ok(Timing {
        median_ns: median,
        spread: (median - q1) / median,
    })
}

/// Benchmark one kernel pair. The candidate is timed once under Clang with
/// auto-vectorization disabled; each installed profile contributes a scalar
/// baseline and a speedup. Missing compilers are skipped and flagged.
pub fn run_benchmark(
    src: &SourceFunction,
    vec_text: &str,
    profiles: &[CompilerProfile],
    opts: &BenchOptions,
    category: Category,
    toolchain: &Toolchain,
) -> Result<BenchmarkRecord, BenchError> {
    let clang = find_in_path("clang").unwrap_or_else(|| toolchain.cc.clone());
    let isolation_flags = "-O3 -mavx2 -lm -fno-tree-vectorize";
    let cand = compile_and_time(&clang, isolation_flags, vec_text, src, opts)?;
    if cand.spread > opts.spread_threshold {
        return Err(BenchError::Unstable {
            spread: cand.spread,
            threshold: opts.spread_threshold,
        });
    }

    let scalar_text = print_function(src);
    let mut baselines = Vec::new();
    for profile in profiles {
        let binary = profile.path.clone().or_else(|| find_in_path(&profile.id));
        let Some(cc) = binary else {
            baselines.push(BaselineTiming {
                compiler: profile.id.clone(),
                baseline_ns: None,
                speedup: None,
                skipped: Some("compiler not installed".to_string()),
            });
            continue;
        };
        match compile_and_time(&cc, &profile.scalar_flags, &scalar_text, src, opts) {
            Ok(timing) => {
                if timing.spread > opts.spread_threshold {
                    baselines.push(BaselineTiming {
                        compiler: profile.id.clone(),
                        baseline_ns: Some(timing.median_ns),
                        speedup: None,
                        skipped: Some(format!(
                            "unstable: spread {:.3} over threshold",
                            timing.spread
                        )),
                    });
                } else {
                    baselines.push(BaselineTiming {
                        compiler: profile.id.clone(),
                        baseline_ns: Some(timing.median_ns),
                        speedup: Some(compute_speedup(timing.median_ns, cand.median_ns)?),
                        skipped: None,
                    });
                }
            }
            Err(e) => baselines.push(BaselineTiming {
                compiler: profile.id.clone(),
                baseline_ns: None,
                speedup: None,
                skipped: Some(e.to_string()),
            }),
        }
    }

    Ok(BenchmarkRecord {
        test: src.name.clone(),
        category,
        baselines,
        vectorized_ns: cand.median_ns,
        trip_count: opts.trip_count,
        reps: opts.reps,
        machine: machine_fingerprint(),
    })
}

pub const CSV_HEADER: &str =
    "test,category,compiler,baseline_ns,vectorized_ns,speedup,reps,trip_count,skipped";

/// CSV with one row per (test, compiler) plus grouped plot data mirroring a
/// per-category, grouped-bar chart. Timing excludes checksum computation;
/// the JSON says so in its header field.
pub fn emit_report(records: &[BenchmarkRecord]) -> (String, serde_json::Value) {
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in records {
        for b in &r.baselines {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                r.test,
                r.category.as_str(),
                b.compiler,
                b.baseline_ns.map(|v| v.to_string()).unwrap_or_default(),
                r.vectorized_ns,
                b.speedup.map(|v| v.to_string()).unwrap_or_default(),
                r.reps,
                r.trip_count,
                b.skipped.clone().unwrap_or_default()
            );
        }
    }

    let mut categories = serde_json::Map::new();
    for r in records {
        let entry = categories
            .entry(r.category.as_str().to_string())
            .or_insert_with(|| serde_json::Value::Array(Vec::new()));
        let speedups: serde_json::Map<String, serde_json::Value> = r
            .baselines
            .iter()
            .map(|b| {
                let v = match (&b.speedup, &b.skipped) {
                    (Some(s), _) => serde_json::json!(s),
                    (None, Some(reason)) => serde_json::json!({ "skipped": reason }),
                    (None, None) => serde_json::Value::Null,
                };
                (b.compiler.clone(), v)
            })
            .collect();
        entry.as_array_mut().unwrap().push(serde_json::json!({
            "test": r.test,
            "vectorized_ns": r.vectorized_ns,
            "speedups": speedups,
        }));
    }
    let json = serde_json::json!({
        "note": "per-call kernel timing; checksum computation is outside the timed region",
        "baseline_convention": "speedup 1.0 means parity with the compiler baseline; below 1.0 is a slowdown",
        "categories": categories,
    });
    (csv, json)
}

/// Parse an emitted CSV back into per-row fields (used by tests and report
/// tooling); returns (test, category, compiler, baseline_ns, vectorized_ns,
/// speedup, reps, trip_count, skipped).
#[allow(clippy::type_complexity)]
pub fn parse_report_csv(
    csv: &str,
) -> Vec<(
    String,
    String,
    String,
    Option<f64>,
    f64,
    Option<f64>,
    u32,
    u32,
    String,
)> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut parts = line.split(',');
            let test = parts.next().unwrap_or_default().to_string();
            let category = parts.next().unwrap_or_default().to_string();
            let compiler = parts.next().unwrap_or_default().to_string();
            let baseline = parts.next().and_then(|s| s.parse().ok());
            let vectorized = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
            let speedup = parts.next().and_then(|s| s.parse().ok());
            let reps = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0);
            let trip = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0);
            let skipped = parts.collect::<Vec<_>>().join(",");
            (
                test, category, compiler, baseline, vectorized, speedup, reps, trip, skipped,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_flag_strings_are_verbatim() {
        let profiles = shipped_profiles();
        assert_eq!(profiles.len(), 3);
        assert_eq!(profiles[0].scalar_flags, "-O3 -mavx2 -lm");
        assert_eq!(
            profiles[0].vectorized_flags,
            "-W -O3 -mavx2 -lm -ftree-vectorizer-verbose=3 -ftree-vectorize -fopt-info-vec-optimized"
        );
        assert_eq!(
            profiles[1].scalar_flags,
            "-O3 -mavx2 -lm -fno-tree-vectorize"
        );
        assert_eq!(
            profiles[1].vectorized_flags,
            "-O3 -mavx2 -fstrict-aliasing -fvectorize -fslp-vectorize-aggressive -Rpass-analysis=loop-vectorize -lm"
        );
        assert_eq!(
            profiles[2].scalar_flags,
            "-restrict -std=c99 -O3 -ip -no-vec"
        );
        assert_eq!(
            profiles[2].vectorized_flags,
            "-restrict -std=c99 -O3 -ip -vec -xAVX2"
        );
        assert_eq!(
            (
                profiles[0].version.as_str(),
                profiles[1].version.as_str(),
                profiles[2].version.as_str()
            ),
            ("10.5.0", "19.0.0", "2021.10.0")
        );
    }

    #[test]
    fn speedup_arithmetic() {
        assert_eq!(compute_speedup(200.0, 100.0).unwrap(), 2.0);
        assert_eq!(compute_speedup(100.0, 100.0).unwrap(), 1.0);
        assert_eq!(compute_speedup(100.0, 200.0).unwrap(), 0.5);
        assert!(compute_speedup(0.0, 1.0).is_err());
        assert!(compute_speedup(1.0, -3.0).is_err());
    }

    fn record(
        test: &str,
        category: Category,
        compilers: &[(&str, Option<f64>)],
    ) -> BenchmarkRecord {
        BenchmarkRecord {
            test: test.to_string(),
            category,
            baselines: compilers
                .iter()
                .map(|(id, speedup)| BaselineTiming {
                    compiler: id.to_string(),
                    baseline_ns: speedup.map(|s| s * 100.0),
                    speedup: *speedup,
                    skipped: if speedup.is_none() {
                        Some("compiler not installed".to_string())
                    } else {
                        None
                    },
                })
                .collect(),
            vectorized_ns: 100.0,
            trip_count: 32_000,
            reps: 31,
            machine: "test".to_string(),
        }
    }

    #[test]
    fn report_rows_and_groups() {
        let r = record(
            "s212",
            Category::Dependence,
            &[
                ("gcc", Some(8.08)),
                ("clang", Some(7.35)),
                ("icc", Some(2.09)),
            ],
        );
        let (csv, json) = emit_report(std::slice::from_ref(&r));
        let rows = parse_report_csv(&csv);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].0, "s212");
        assert_eq!(rows[0].2, "gcc");
        assert_eq!(rows[0].5, Some(8.08));
        assert_eq!(
            json["categories"]["dependence"].as_array().unwrap().len(),
            1
        );

        // all six categories appear as groups
        let all = [
            Category::ControlFlow,
            Category::Dependence,
            Category::DependenceControlFlow,
            Category::NaivelyVectorizable,
            Category::Reduction,
            Category::ReductionControlFlow,
        ];
        let records: Vec<BenchmarkRecord> = all
            .iter()
            .enumerate()
            .map(|(i, c)| record(&format!("t{i}"), *c, &[("clang", Some(1.5))]))
            .collect();
        let (_, json) = emit_report(&records);
        assert_eq!(json["categories"].as_object().unwrap().len(), 6);

        // missing compiler shows up as a skipped marker, not a row omission
        let r = record("s000", Category::NaivelyVectorizable, &[("icc", None)]);
        let (csv, _) = emit_report(std::slice::from_ref(&r));
        let rows = parse_report_csv(&csv);
        assert_eq!(rows.len(), 1);
        assert!(rows[0].8.contains("not installed"));
        assert_eq!(rows[0].5, None);
    }

    #[test]
    fn csv_round_trips_persisted_fields() {
        let r = record(
            "s278",
            Category::ControlFlow,
            &[("gcc", Some(3.5)), ("clang", Some(2.25))],
        );
        let (csv, _) = emit_report(std::slice::from_ref(&r));
        let rows = parse_report_csv(&csv);
        for (row, b) in rows.iter().zip(&r.baselines) {
            assert_eq!(row.0, r.test);
            assert_eq!(row.1, r.category.as_str());
            assert_eq!(row.2, b.compiler);
            assert_eq!(row.3, b.baseline_ns);
            assert_eq!(row.4, r.vectorized_ns);
            assert_eq!(row.5, b.speedup);
            assert_eq!(row.6, r.reps);
            assert_eq!(row.7, r.trip_count);
        }
    }

    #[test]
    #[ignore = "timing-sensitive; run on a quiet machine"]
    fn doubling_trip_count_does_not_speed_up() {
        let src = crate::csubset::parse_function(
            "void s000(int n, int *a, int *b) { for (int i = 0; i < n; i++) { a[i] = b[i] + 1; } }",
        )
        .unwrap();
        let tc = Toolchain::discover().unwrap();
        let time_with = |trip: u32| {
            let opts = BenchOptions {
                trip_count: trip,
                spread_threshold: 1.0,
                ..BenchOptions::default()
            };
            run_benchmark(
                &src,
                &print_function(&src),
                &[],
                &opts,
                Category::NaivelyVectorizable,
                &tc,
            )
            .unwrap()
            .vectorized_ns
        };
        let t1 = time_with(32_000);
        let t2 = time_with(64_000);
        assert!(
            t2 * 1.5 >= t1,
            "doubling trip count sped things up: {t1} -> {t2}"
        );
    }
}
