//! Canonical JSON and plain-text rendering of analysis reports.
//!
//! Canonical JSON is compact, has object keys in sorted order and prints
//! every float with 17 significant digits, so equal reports serialize to
//! equal bytes and floats survive a round trip exactly.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::fibre::{CircleStatus, Sign};
use crate::pipeline::{FibreReport, ReportEnvelope};

/// Serializes any value as canonical JSON followed by a newline.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut out = String::new();
    write_value(&v, &mut out);
    out.push('\n');
    out
}

pub fn report_json(envelope: &ReportEnvelope) -> String {
    canonical_json(envelope)
}

pub fn parse_report(text: &str) -> Result<ReportEnvelope, serde_json::Error> {
    serde_json::from_str(text)
}

/// Same as [`report_json`] with the timings block removed. Two runs with the
/// same configuration produce identical output here.
pub fn deterministic_json(envelope: &ReportEnvelope) -> String {
    let mut v = serde_json::to_value(envelope).expect("report types serialize to JSON");
    if let Value::Object(m) = &mut v {
        m.remove("timings");
    }
    let mut out = String::new();
    write_value(&v, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().expect("f64 number");
                let _ = write!(out, "{}", format_float(x));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// 17 significant digits in scientific notation, e.g. `4.0000000000000000e0`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|&x| short(x)).collect();
    format!("({})", parts.join(", "))
}

fn render_fibre(r: &FibreReport, out: &mut String) {
    let heading = match r.sign {
        Sign::Positive => "positive fibre".to_string(),
        Sign::Negative => "negative fibre (positive fibre of -f)".to_string(),
    };
    let _ = writeln!(out, "\n{heading}");
    let _ = writeln!(out, "  f_t = {}", r.perturbed);
    if let Some(m) = &r.milnor {
        let _ = writeln!(
            out,
            "  t = {}{}, delta = {}, epsilon = {:e} (bracket {:e} .. {:e})",
            point(&m.t.t),
            if m.t.explicit { " (explicit)" } else { "" },
            short(m.delta),
            m.epsilon,
            m.epsilon_rationale.lower,
            m.epsilon_rationale.upper
        );
    }
    let _ = writeln!(
        out,
        "  sphere critical points: {} ({})",
        r.critical_points.len(),
        if r.search_exhaustive {
            "exhaustive sweep"
        } else {
            "multi-start search"
        }
    );
    for p in &r.critical_points {
        let idx = p.morse_index.map_or("-".to_string(), |k| k.to_string());
        let _ = writeln!(
            out,
            "    value {:>12}  index {idx}  at {}",
            short(p.value),
            point(&p.location)
        );
    }
    if let Some(h) = &r.handles {
        let _ = writeln!(out, "  Φ ∼ {}", h.describe());
    }
    let _ = write!(out, "{}", r.homology);
    let _ = writeln!(out, "  euler_rel = {}", r.homology.euler_rel);
    if let Some(gc) = &r.great_circle {
        let status = match &gc.status {
            CircleStatus::NoViolationFound => "no violation found".to_string(),
            CircleStatus::Violation {
                point: p,
                direction,
                min_value_on_circle,
            } => format!(
                "violation: circle through {} along {} stays above {}",
                point(p),
                point(direction),
                short(*min_value_on_circle)
            ),
        };
        let _ = writeln!(
            out,
            "  great circle check: {status} ({} circles sampled; claimed automatic: {})",
            gc.samples_used,
            if gc.automatic { "yes" } else { "no" }
        );
    }
    if let Some(o) = &r.oracle {
        let _ = writeln!(
            out,
            "  oracle: {} (level {:e}, resolution {:e}, {} vertices, {} cells)",
            if o.verdict.agree { "agree" } else { "DISAGREE" },
            o.level,
            o.resolution,
            o.vertices,
            o.cells
        );
        if !o.verdict.agree {
            let _ = write!(out, "{}", o.homology);
        }
    }
    let caveats: Vec<String> = r
        .homology
        .caveats
        .iter()
        .map(|c| {
            serde_json::to_value(c)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        })
        .collect();
    let _ = writeln!(
        out,
        "  caveats: {}",
        if caveats.is_empty() {
            "none".into()
        } else {
            caveats.join(", ")
        }
    );
}

pub fn report_text(e: &ReportEnvelope) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "milnor {} (schema {})",
        e.tool_version, e.schema_version
    );
    let _ = writeln!(
        out,
        "f = {}  in variables {}",
        e.config.polynomial.trim(),
        e.config.variables.join(", ")
    );
    let h = &e.hypotheses;
    let _ = writeln!(
        out,
        "zero locus near 0: found {}",
        point(&h.zero_locus_witness)
    );
    let _ = writeln!(
        out,
        "isolated singularity: {}",
        match &h.off_origin_singular_point {
            None => "no other singular point found".to_string(),
            Some(p) => format!("singular point at {}", point(p)),
        }
    );
    let _ = writeln!(
        out,
        "radius check: {}",
        if h.delta_check.passed() {
            "pass"
        } else {
            "fail"
        }
    );
    for r in &e.fibres {
        render_fibre(r, &mut out);
    }
    let _ = writeln!(out, "\nexit code {}", e.exit_code);
    out
}
