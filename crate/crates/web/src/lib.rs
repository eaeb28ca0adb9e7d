//! Browser demo: an error-versus-dimension sweep, the dimension formulas and
//! the data-table lower bound. Every export returns a JSON string.

use psdcompress::bounds::lower_bound;
use psdcompress::compressor::{CompressError, PairClass, PreparedModel};
use psdcompress::models::{binary_rank_one_model, DataTable};
use psdcompress::projection::{dim_for_model, dim_for_psd, dim_for_tail, epsilon_for_dim, CompressionConfig, Regime};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_DIM: usize = 512;
const MAX_SEEDS: u64 = 200;

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}

fn parse_grid(grid: &str) -> Result<Vec<usize>, String> {
    grid.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<usize>() {
            Ok(d) if (1..=MAX_DIM).contains(&d) => Ok(d),
            _ => Err(format!("grid entry {s:?} is not in 1..={MAX_DIM}")),
        })
        .collect()
}

pub fn sweep_value(dim: usize, states: usize, measurements: usize, grid: &str, seeds: u64) -> Result<Value, String> {
    if dim == 0 || dim > MAX_DIM || states == 0 || states > dim || measurements == 0 || measurements > 16 {
        return Err(format!("need 1 ≤ X ≤ D ≤ {MAX_DIM} and 1 ≤ Y ≤ 16"));
    }
    if seeds == 0 || seeds > MAX_SEEDS {
        return Err(format!("seeds must be in 1..={MAX_SEEDS}"));
    }
    let grid = parse_grid(grid)?;
    let m = binary_rank_one_model(states, measurements, dim, 0).map_err(|e| e.to_string())?;
    let prepared = PreparedModel::new(&m).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for d in grid {
        let mut errors = Vec::new();
        for seed in 0..seeds {
            let cfg = CompressionConfig::new(0.5, seed).map_err(|e| e.to_string())?;
            match prepared.compress(&cfg, d) {
                Ok(out) => errors.push(out.report.max_error(PairClass::StateMeasurement)),
                Err(CompressError::RetriesExhausted { .. }) => {}
                Err(e) => return Err(e.to_string()),
            }
        }
        let eff =
            epsilon_for_dim(d, m.num_matrices(), dim, Regime::Model { max_rank: 1 }).map_err(|e| e.to_string())?;
        rows.push(json!({
            "d": d,
            "accepted": errors.len(),
            "median": median(errors.clone()),
            "max": errors.iter().copied().reduce(f64::max),
            "effective_epsilon": eff.value,
        }));
    }
    Ok(json!({ "dim": dim, "seeds": seeds, "rows": rows }))
}

pub fn dimensions_value(
    epsilon: f64,
    j: usize,
    dim: usize,
    max_rank: usize,
    j_star: usize,
    b: f64,
) -> Result<Value, String> {
    let s = |e: psdcompress::projection::ProjectionError| e.to_string();
    Ok(json!({
        "psd": dim_for_psd(epsilon, j, dim).map_err(s)?,
        "model": dim_for_model(epsilon, j, dim, max_rank).map_err(s)?,
        "tail": dim_for_tail(epsilon, j, dim, j_star, b).map_err(s)?,
    }))
}

/// Rows are inputs `x`, columns outcomes `z` of a single measurement.
pub fn lower_bound_value(table: &str, eps_noise: f64) -> Result<Value, String> {
    let rows: Vec<Vec<f64>> = table
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| format!("{s:?} is not a number")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let z = rows.first().map_or(0, Vec::len);
    if z == 0 || rows.iter().any(|r| r.len() != z) {
        return Err("rows must be non-empty and of equal length".into());
    }
    if !(eps_noise >= 0.0) {
        return Err("noise must be nonnegative".into());
    }
    let t = DataTable::new(rows.len(), 1, z, rows.concat(), false).map_err(|e| e.to_string())?;
    let r = lower_bound(&t);
    let noisy = r.noisy(eps_noise);
    Ok(json!({
        "column_maxima": r.column_maxima[0],
        "bound": r.bound,
        "noisy": noisy.value,
        "noisy_raw": noisy.raw,
    }))
}

fn js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn error_sweep(dim: usize, states: usize, measurements: usize, grid: &str, seeds: u32) -> Result<String, JsError> {
    js(sweep_value(dim, states, measurements, grid, seeds as u64))
}

#[wasm_bindgen]
pub fn dimensions(
    epsilon: f64,
    j: usize,
    dim: usize,
    max_rank: usize,
    j_star: usize,
    b: f64,
) -> Result<String, JsError> {
    js(dimensions_value(epsilon, j, dim, max_rank, j_star, b))
}

#[wasm_bindgen]
pub fn table_lower_bound(table: &str, eps_noise: f64) -> Result<String, JsError> {
    js(lower_bound_value(table, eps_noise))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_bound() {
        let text = "1 0 0\n0 1 0\n0 0 1\n";
        let v = lower_bound_value(text, 0.01).unwrap();
        assert_eq!(v["bound"], 3.0);
        assert!((v["noisy"].as_f64().unwrap() - 2.97).abs() < 1e-12);
        assert!(lower_bound_value("1 0\n1\n", 0.0).is_err());
    }

    #[test]
    fn formulas_match_core() {
        let v = dimensions_value(0.5, 10, 1024, 4, 4, 0.5).unwrap();
        assert_eq!(v["psd"], 636);
        assert_eq!(v["tail"], dim_for_tail(0.5, 10, 1024, 4, 0.5).unwrap());
        assert!(dimensions_value(0.9, 10, 1024, 4, 4, 0.5).is_err());
    }

    #[test]
    fn small_sweep() {
        let v = sweep_value(32, 4, 2, "8, 16 32", 5).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r["accepted"].as_u64().unwrap() <= 5));
        assert!(sweep_value(32, 4, 2, "0", 5).is_err());
    }
}
