//! Generated C test harness: one `main` that replays embedded random trials
//! against the scalar reference and the candidate, comparing every array
//! parameter element-wise plus the scalar return value.

use crate::csubset::{CType, ParamKind, SourceFunction};
use std::fmt::Write;

/// Extra elements appended to every buffer so shifted or vector-wide reads
/// past `n` stay in bounds for realistic candidates.
pub const PAD: u32 = 64;

pub const SCALAR_SUFFIX: &str = "_vp_scalar";
pub const CAND_SUFFIX: &str = "_vp_cand";

/// One trial's inputs: a full buffer per array parameter, in parameter order.
pub type TrialInputs = Vec<(String, Vec<i32>)>;

pub fn emit_main(src: &SourceFunction, n: u32, trials: &[TrialInputs]) -> String {
    let mut c = String::new();
    c.push_str("#include <stdio.h>\n#include <string.h>\n\n");
    let proto_params = src
        .params
        .iter()
        .map(|p| match p.kind {
            ParamKind::ScalarInt => format!("int {}", p.name),
            ParamKind::IntArray => format!("int *{}", p.name),
        })
        .collect::<Vec<_>>()
        .join(", ");
    let ret = if src.return_type == CType::Int {
        "int"
    } else {
        "void"
    };
    let _ = writeln!(c, "{ret} {}{SCALAR_SUFFIX}({proto_params});", src.name);
    let _ = writeln!(c, "{ret} {}{CAND_SUFFIX}({proto_params});\n", src.name);

    let total = n + PAD;
    let arrays: Vec<&str> = src
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::IntArray)
        .map(|p| p.name.as_str())
        .collect();

    for (t, trial) in trials.iter().enumerate() {
        for (name, values) in trial {
            let _ = writeln!(
                c,
                "static const int vp_t{t}_{name}[{total}] = {{{}}};",
                render_values(values)
            );
        }
    }
    c.push('\n');
    for a in &arrays {
        let _ = writeln!(
            c,
            "static int vp_s_{a}[{total}] __attribute__((aligned(64)));"
        );
        let _ = writeln!(
            c,
            "static int vp_c_{a}[{total}] __attribute__((aligned(64)));"
        );
    }

    c.push_str("\nint main(void) {\n");
    for (t, _) in trials.iter().enumerate() {
        for a in &arrays {
            let _ = writeln!(
                c,
                "    memcpy(vp_s_{a}, vp_t{t}_{a}, sizeof vp_s_{a});\n    memcpy(vp_c_{a}, vp_t{t}_{a}, sizeof vp_c_{a});"
            );
        }
        let args_for = |side: &str| -> String {
            src.params
                .iter()
                .map(|p| match p.kind {
                    ParamKind::ScalarInt => format!("{n}"),
                    ParamKind::IntArray => format!("vp_{side}_{}", p.name),
                })
                .collect::<Vec<_>>()
                .join(", ")
        };
        if src.return_type == CType::Int {
            let _ = writeln!(
                c,
                "    int vp_rs_{t} = {f}{SCALAR_SUFFIX}({args});",
                f = src.name,
                args = args_for("s")
            );
            let _ = writeln!(
                c,
                "    int vp_rc_{t} = {f}{CAND_SUFFIX}({args});",
                f = src.name,
                args = args_for("c")
            );
        } else {
            let _ = writeln!(
                c,
                "    {f}{SCALAR_SUFFIX}({args});",
                f = src.name,
                args = args_for("s")
            );
            let _ = writeln!(
                c,
                "    {f}{CAND_SUFFIX}({args});",
                f = src.name,
                args = args_for("c")
            );
        }
        for a in &arrays {
            let _ = writeln!(
                c,
                "    for (int vp_i = 0; vp_i < {n}; vp_i++) {{\n        if (vp_s_{a}[vp_i] != vp_c_{a}[vp_i]) {{\n            printf(\"MISMATCH trial={t} array={a} index=%d expected=%d actual=%d\\n\", vp_i, vp_s_{a}[vp_i], vp_c_{a}[vp_i]);\n            return 1;\n        }}\n    }}"
            );
        }
        if src.return_type == CType::Int {
            let _ = writeln!(
                c,
                "    if (vp_rs_{t} != vp_rc_{t}) {{\n        printf(\"SCALAR_MISMATCH trial={t} expected=%d actual=%d\\n\", vp_rs_{t}, vp_rc_{t});\n        return 1;\n    }}"
            );
        }
    }
    c.push_str("    printf(\"OK\\n\");\n    return 0;\n}\n");
    c
}

fn render_values(values: &[i32]) -> String {
    let mut out = String::with_capacity(values.len() * 4);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
            if i % 16 == 0 {
                out.push('\n');
            }
        }
        let _ = write!(out, "{v}");
    }
    out
}

/// Outcome line printed by the harness binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HarnessReport {
    Ok,
    Mismatch {
        trial: u32,
        array: String,
        index: u32,
        expected: i32,
        actual: i32,
    },
    ScalarMismatch {
        trial: u32,
        expected: i32,
        actual: i32,
    },
}

pub fn parse_report(stdout: &str) -> Option<HarnessReport> {
    for line in stdout.lines() {
        if line.trim() == "OK" {
            return Some(HarnessReport::Ok);
        }
        if let Some(rest) = line.strip_prefix("MISMATCH ") {
            let kv = parse_kv(rest);
            return Some(HarnessReport::Mismatch {
                trial: kv.get("trial")?.parse().ok()?,
                array: kv.get("array")?.to_string(),
                index: kv.get("index")?.parse().ok()?,
                expected: kv.get("expected")?.parse().ok()?,
                actual: kv.get("actual")?.parse().ok()?,
            });
        }
        if let Some(rest) = line.strip_prefix("SCALAR_MISMATCH ") {
            let kv = parse_kv(rest);
            return Some(HarnessReport::ScalarMismatch {
                trial: kv.get("trial")?.parse().ok()?,
                expected: kv.get("expected")?.parse().ok()?,
                actual: kv.get("actual")?.parse().ok()?,
            });
        }
    }
    None
}

fn parse_kv(s: &str) -> std::collections::BTreeMap<String, String> {
    s.split_whitespace()
        .filter_map(|tok| {
            let (k, v) = tok.split_once('=')?;
            Some((k.to_string(), v.to_string()))
        })
        .collect()
}
