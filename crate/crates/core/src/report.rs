//! Text output: 12-significant-digit numbers, CSV tables and JSON
//! trajectories.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::laplacian_analysis::{CoherenceReport, GrowResult};
use crate::stable_analysis::DeltaReport;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%.12g`-style formatting; non-finite values become `inf`, `-inf`, `nan`.
pub fn fmt_num(x: f64) -> String {
    fmt_sig(x, SIGNIFICANT_DIGITS)
}

pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to 12 significant digits (for JSON output).
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().expect("formatted number parses")
    } else {
        x
    }
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        json!(fmt_num(x))
    }
}

pub const DELTA_CSV_HEADER: &str = "s,t,margin,destabilizing,hinf,h2_lower_bound";

pub fn delta_reports_csv(reports: &[DeltaReport]) -> String {
    let mut out = String::with_capacity(48 * (reports.len() + 1));
    out.push_str(DELTA_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.s,
            r.t,
            fmt_num(r.margin),
            r.destabilizing,
            fmt_num(r.hinf),
            fmt_num(r.h2_lower_bound)
        );
    }
    out
}

pub fn delta_reports_json(reports: &[DeltaReport]) -> Value {
    Value::Array(
        reports
            .iter()
            .map(|r| {
                json!({
                    "s": r.s,
                    "t": r.t,
                    "w": json_num(r.w),
                    "margin": json_num(r.margin),
                    "destabilizing": r.destabilizing,
                    "hinf": json_num(r.hinf),
                    "h2_lower_bound": json_num(r.h2_lower_bound),
                })
            })
            .collect(),
    )
}

pub const COHERENCE_CSV_HEADER: &str = "s,t,w,coherence_delta,admissible";

pub fn coherence_csv(report: &CoherenceReport) -> String {
    let mut out = String::new();
    out.push_str(COHERENCE_CSV_HEADER);
    out.push('\n');
    for (s, t, delta, admissible) in report.pairs() {
        let _ = writeln!(out, "{s},{t},{},{},{admissible}", fmt_num(report.w), fmt_num(delta));
    }
    out
}

pub fn coherence_json(report: &CoherenceReport) -> Value {
    json!({
        "baseline": json_num(report.baseline),
        "w": json_num(report.w),
        "pairs": report
            .pairs()
            .into_iter()
            .map(|(s, t, delta, admissible)| json!({
                "s": s,
                "t": t,
                "coherence_delta": json_num(delta),
                "admissible": admissible,
            }))
            .collect::<Vec<_>>(),
    })
}

/// `{"initial": C, "steps": [{"s", "t", "w", "coherence"}, ...]}`.
pub fn grow_json(result: &GrowResult) -> Value {
    json!({
        "initial": json_num(result.initial),
        "steps": result
            .steps
            .iter()
            .map(|s| json!({
                "s": s.s,
                "t": s.t,
                "w": json_num(s.w),
                "coherence": json_num(s.coherence),
            }))
            .collect::<Vec<_>>(),
    })
}
