//! JSON renderings of certificates and reports.

use psdcompress::compressor::{CompressionCertificate, CompressionReport, MatrixLabel, PairClass, TailProfile};
use serde_json::{json, Value};

pub fn label(l: MatrixLabel) -> String {
    match l {
        MatrixLabel::State(x) => format!("rho[{x}]"),
        MatrixLabel::Effect(y, z) => format!("E[{y},{z}]"),
        MatrixLabel::Left(n) => format!("A[{n}]"),
        MatrixLabel::Right(m) => format!("B[{m}]"),
    }
}

pub fn class_name(c: PairClass) -> &'static str {
    match c {
        PairClass::StateState => "state_state",
        PairClass::StateMeasurement => "state_measurement",
        PairClass::MeasurementMeasurement => "measurement_measurement",
        PairClass::Factor => "factor",
    }
}

pub fn certificate(c: &CompressionCertificate) -> Value {
    json!({
        "seed": c.seed,
        "attempts": c.attempts,
        "dim": c.dim,
        "required_dim": c.required_dim,
        "formula_satisfied": c.formula_satisfied,
        "epsilon": c.epsilon,
        "certified_epsilon": c.certified_epsilon,
        "certified_epsilon_exceeds_half": c.certified_epsilon_exceeds_half,
        "jl_event_held": c.jl_event_held,
        "norm_events": c.norm_events,
        "promised_bound_constant": c.promised_bound_constant,
        "max_violation_ratio": c.max_violation_ratio,
    })
}

pub fn report(r: &CompressionReport) -> Value {
    let classes =
        [PairClass::StateState, PairClass::StateMeasurement, PairClass::MeasurementMeasurement, PairClass::Factor];
    let max_error: serde_json::Map<String, Value> = classes
        .iter()
        .filter(|&&c| r.class(c).next().is_some())
        .map(|&c| (class_name(c).to_string(), json!(r.max_error(c))))
        .collect();
    let pairs: Vec<Value> = r
        .pairs
        .iter()
        .map(|p| {
            json!({
                "class": class_name(p.class),
                "a": label(p.a),
                "b": label(p.b),
                "original": p.original,
                "compressed": p.compressed,
                "error": p.error,
                "bound": p.bound,
            })
        })
        .collect();
    json!({
        "epsilon": r.epsilon,
        "bound_constant": r.bound_constant,
        "max_violation_ratio": r.max_violation_ratio(),
        "violations": r.violations().count(),
        "uncertified_pairs": r.uncertified().count(),
        "max_error": max_error,
        "pairs": pairs,
    })
}

pub fn profiles(ps: &[TailProfile]) -> Value {
    ps.iter().map(|p| json!({ "j_star": p.j_star, "b": p.b })).collect()
}

/// Pretty JSON with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}
