//! The compression pipelines.
//!
//! Psd factorizations map `M ↦ Π M Π†`. Quantum models use
//! `C(ρ) = Π ρ Π† / tr(Π ρ Π†)`, `C(E_yz) = Π E_yz Π† / (1+ε)` for `z < Z` and
//! `C(E_yZ) = I − Σ_{z<Z} C(E_yz)`; the last element is psd exactly when
//! `‖Π (Σ_{z<Z} E_yz) Π†‖ ≤ 1+ε`. Each draw of `Π` that fails a validity event
//! or a promised bound is discarded and `Π` is redrawn from the next attempt
//! stream of the seed.

mod model;
mod psd;
mod report;
mod tail;

pub use model::{
    compress_model, compress_model_factored, event_norm_check, event_norms, CompressedModel, ModelCompression,
    PreparedModel,
};
pub use psd::compress_psd;
pub use report::{
    error_report, psd_error_report, CompressionReport, MatrixLabel, PairClass, PairEntry, MODEL_BOUND_CONSTANT,
    PSD_BOUND_CONSTANT, REPORT_ABS_TOL,
};
pub use tail::{
    block_size, block_split, compress_model_tail, compress_model_tail_factored, profile_holds, tail_fit, tail_spectrum,
    TailProfile, B_MAX, TAIL_ONE_TOL,
};

pub(crate) use model::run_model;

use thiserror::Error;

use crate::models::{ModelError, Violation};
use crate::numerics::NumericsError;
use crate::projection::{EffectiveEpsilon, ProjectionError};

/// States whose sketched trace falls below this force a redraw.
pub const DEGENERATE_TRACE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompressError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("input model is invalid: {} violation(s)", .0.len())]
    InvalidModel(Vec<Violation>),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no valid (j*, b): {0}")]
    NoTailFit(String),
    #[error(
        "retries exhausted after {attempts} attempts ({failed_events} failed norm events, \
         {degenerate} degenerate states, best violation ratio {best_violation_ratio})"
    )]
    RetriesExhausted { attempts: usize, failed_events: usize, degenerate: usize, best_violation_ratio: f64 },
}

/// What held for the accepted sketch.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressionCertificate {
    pub seed: u64,
    /// Attempts consumed, counting the accepted one.
    pub attempts: usize,
    pub dim: usize,
    /// Smallest dimension the mode's dimension formula allows.
    pub required_dim: usize,
    /// `dim ≥ required_dim`. When false the bounds were checked at the
    /// effective ε that `dim` buys.
    pub formula_satisfied: bool,
    pub epsilon: f64,
    /// ε the promised bounds were evaluated with.
    pub certified_epsilon: f64,
    pub certified_epsilon_exceeds_half: bool,
    /// The JL event is certified by direct bound verification: true iff every
    /// certified pair met its bound.
    pub jl_event_held: bool,
    pub norm_events: Vec<bool>,
    pub promised_bound_constant: f64,
    pub max_violation_ratio: f64,
}

/// Threshold bookkeeping shared by the pipelines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Certification {
    pub required_dim: usize,
    pub formula_satisfied: bool,
    pub certified_epsilon: f64,
}

impl Certification {
    pub fn new(epsilon: f64, d: usize, required_dim: usize, effective: EffectiveEpsilon) -> Self {
        let formula_satisfied = d >= required_dim;
        let certified_epsilon = if formula_satisfied { epsilon } else { epsilon.max(effective.value) };
        Self { required_dim, formula_satisfied, certified_epsilon }
    }
}
