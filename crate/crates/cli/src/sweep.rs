//! Error-versus-dimension sweeps.

use std::fmt::Write;

use psdcompress::compressor::{CompressError, PairClass, PreparedModel};
use psdcompress::models::QuantumModel;
use psdcompress::projection::{dim_for_model, epsilon_for_dim, CompressionConfig, Regime};

pub const HEADER: &str = "d,seeds,accepted,acceptance_rate,mean_attempts,effective_epsilon,certified_epsilon,\
median_state_state,max_state_state,median_state_measurement,max_state_measurement,\
median_measurement_measurement,max_measurement_measurement,max_violation_ratio";

pub const CELL_HEADER: &str =
    "d,seed,accepted,attempts,max_state_state,max_state_measurement,max_measurement_measurement,max_violation_ratio";

const CLASSES: [PairClass; 3] = [PairClass::StateState, PairClass::StateMeasurement, PairClass::MeasurementMeasurement];

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub grid: Vec<usize>,
    pub seeds: u64,
    pub epsilon: f64,
    pub max_retries: usize,
}

/// One `(d, seed)` run. Errors are NaN when the run was not accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub d: usize,
    pub seed: u64,
    pub accepted: bool,
    pub attempts: usize,
    pub max_errors: [f64; 3],
    pub max_violation_ratio: f64,
}

/// Statistics over the accepted seeds at one `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub d: usize,
    pub seeds: u64,
    pub accepted: usize,
    pub mean_attempts: f64,
    pub effective_epsilon: f64,
    pub certified_epsilon: f64,
    pub median_errors: [f64; 3],
    pub max_errors: [f64; 3],
    pub max_violation_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

/// Median, averaging the middle pair for even counts; NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Runs the model pipeline for every `d` in the grid and seeds `0..seeds`.
pub fn sweep(m: &QuantumModel, cfg: &SweepConfig) -> Result<SweepResult, CompressError> {
    let prepared = PreparedModel::new(m)?;
    let (j, big_d) = (m.num_matrices(), m.dim());
    let mut rows = Vec::with_capacity(cfg.grid.len());
    let mut cells = Vec::new();
    for &d in &cfg.grid {
        let effective = epsilon_for_dim(d, j, big_d, Regime::Model { max_rank: prepared.max_rank() })?;
        let required = dim_for_model(cfg.epsilon, j, big_d, prepared.max_rank())?;
        let certified = if d >= required { cfg.epsilon } else { cfg.epsilon.max(effective.value) };
        let mut row_cells = Vec::with_capacity(cfg.seeds as usize);
        for seed in 0..cfg.seeds {
            let c = CompressionConfig::with_retries(cfg.epsilon, seed, cfg.max_retries)?;
            let cell = match prepared.compress(&c, d) {
                Ok(out) => SweepCell {
                    d,
                    seed,
                    accepted: true,
                    attempts: out.certificate.attempts,
                    max_errors: CLASSES.map(|k| out.report.max_error(k)),
                    max_violation_ratio: out.report.max_violation_ratio(),
                },
                Err(CompressError::RetriesExhausted { attempts, best_violation_ratio, .. }) => SweepCell {
                    d,
                    seed,
                    accepted: false,
                    attempts,
                    max_errors: [f64::NAN; 3],
                    max_violation_ratio: best_violation_ratio,
                },
                Err(e) => return Err(e),
            };
            row_cells.push(cell);
        }
        let ok: Vec<&SweepCell> = row_cells.iter().filter(|c| c.accepted).collect();
        let column = |k: usize| ok.iter().map(|c| c.max_errors[k]).collect::<Vec<_>>();
        let max = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().copied().fold(0.0, f64::max) };
        rows.push(SweepRow {
            d,
            seeds: cfg.seeds,
            accepted: ok.len(),
            mean_attempts: row_cells.iter().map(|c| c.attempts as f64).sum::<f64>() / cfg.seeds.max(1) as f64,
            effective_epsilon: effective.value,
            certified_epsilon: certified,
            median_errors: [0, 1, 2].map(|k| median(&column(k))),
            max_errors: [0, 1, 2].map(|k| max(&column(k))),
            max_violation_ratio: max(&ok.iter().map(|c| c.max_violation_ratio).collect::<Vec<_>>()),
        });
        cells.extend(row_cells);
    }
    Ok(SweepResult { rows, cells })
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for r in &self.rows {
            let rate = if r.seeds == 0 { f64::NAN } else { r.accepted as f64 / r.seeds as f64 };
            write!(
                s,
                "{},{},{},{},{},{},{}",
                r.d, r.seeds, r.accepted, rate, r.mean_attempts, r.effective_epsilon, r.certified_epsilon
            )
            .unwrap();
            for k in 0..3 {
                write!(s, ",{},{}", r.median_errors[k], r.max_errors[k]).unwrap();
            }
            writeln!(s, ",{}", r.max_violation_ratio).unwrap();
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let mut s = format!("{CELL_HEADER}\n");
        for c in &self.cells {
            let [a, b, e] = c.max_errors;
            writeln!(s, "{},{},{},{},{a},{b},{e},{}", c.d, c.seed, c.accepted, c.attempts, c.max_violation_ratio)
                .unwrap();
        }
        s
    }
}
