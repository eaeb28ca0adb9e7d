//! Pairwise inner-product tables and their promised bounds.

use nalgebra::DMatrix;

use super::CompressError;
use crate::models::{self, PsdFactorization, QuantumModel};

/// Bound constant for psd factorizations.
pub const PSD_BOUND_CONSTANT: f64 = 192.0;
/// Bound constant for quantum models, after rounding 192 up.
pub const MODEL_BOUND_CONSTANT: f64 = 200.0;
/// Errors at or below this are treated as zero when forming violation ratios.
pub const REPORT_ABS_TOL: f64 = 1e-9;

/// A matrix of a model or factorization. Indices are zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatrixLabel {
    State(usize),
    Effect(usize, usize),
    Left(usize),
    Right(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairClass {
    StateState,
    StateMeasurement,
    MeasurementMeasurement,
    /// Any pair of psd factors.
    Factor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEntry {
    pub class: PairClass,
    pub a: MatrixLabel,
    pub b: MatrixLabel,
    pub original: f64,
    pub compressed: f64,
    pub error: f64,
    /// `None` for pairs with no promised bound (two last outcomes).
    pub bound: Option<f64>,
}

impl PairEntry {
    fn new(
        class: PairClass,
        a: MatrixLabel,
        b: MatrixLabel,
        original: f64,
        compressed: f64,
        bound: Option<f64>,
    ) -> Self {
        Self { class, a, b, original, compressed, error: (compressed - original).abs(), bound }
    }

    /// `error / bound`; zero for errors within [`REPORT_ABS_TOL`], `None` when
    /// uncertified.
    pub fn ratio(&self) -> Option<f64> {
        let bound = self.bound?;
        Some(if self.error <= REPORT_ABS_TOL {
            0.0
        } else if bound > 0.0 {
            self.error / bound
        } else {
            f64::INFINITY
        })
    }

    pub fn passes(&self) -> bool {
        self.ratio().map_or(true, |r| r <= 1.0)
    }
}

/// Every pairwise inner product before and after compression.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressionReport {
    /// The ε the bounds were computed with.
    pub epsilon: f64,
    pub bound_constant: f64,
    pub pairs: Vec<PairEntry>,
}

impl CompressionReport {
    pub fn class(&self, class: PairClass) -> impl Iterator<Item = &PairEntry> {
        self.pairs.iter().filter(move |p| p.class == class)
    }

    /// Largest error over bound among certified pairs; 0 when there are none.
    pub fn max_violation_ratio(&self) -> f64 {
        self.pairs.iter().filter_map(PairEntry::ratio).fold(0.0, f64::max)
    }

    pub fn violations(&self) -> impl Iterator<Item = &PairEntry> {
        self.pairs.iter().filter(|p| !p.passes())
    }

    pub fn uncertified(&self) -> impl Iterator<Item = &PairEntry> {
        self.pairs.iter().filter(|p| p.bound.is_none())
    }

    /// Largest absolute error in a class; 0 for an empty class.
    pub fn max_error(&self, class: PairClass) -> f64 {
        self.class(class).map(|p| p.error).fold(0.0, f64::max)
    }
}

/// Index layout of a model's Gram matrix: states, then effects with `y` major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Shape {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Shape {
    pub fn of(m: &QuantumModel) -> Self {
        Self { x: m.num_states(), y: m.num_measurements(), z: m.num_outcomes() }
    }

    pub fn effect(&self, y: usize, z: usize) -> usize {
        self.x + y * self.z + z
    }

    pub fn len(&self) -> usize {
        self.x + self.y * self.z
    }
}

/// Builds the model report from both Gram matrices.
///
/// `effect_traces[y][z]` are the original `tr(E_yz)`. Bounds, with
/// `K = bound_constant · ε` and `S_y = Σ_{z<Z} E_yz`:
/// state–state `K`; state–effect `K tr(E_yz)` for `z < Z` and `K tr(S_y)` for
/// the last outcome; effect–effect `K tr(E) tr(E')` when both are below `Z`,
/// `K tr(E)(1 + tr(S_y'))` when only `E'` is last, and none when both are.
pub(crate) fn model_report(
    shape: Shape,
    original: &DMatrix<f64>,
    compressed: &DMatrix<f64>,
    effect_traces: &[Vec<f64>],
    epsilon: f64,
) -> CompressionReport {
    let k = MODEL_BOUND_CONSTANT * epsilon;
    let last = shape.z - 1;
    let sum_traces: Vec<f64> = effect_traces.iter().map(|t| t[..last].iter().sum()).collect();
    let mut pairs = Vec::with_capacity(shape.len() * (shape.len() + 1) / 2);
    let mut push = |class, a, b, i: usize, j: usize, bound| {
        pairs.push(PairEntry::new(class, a, b, original[(i, j)], compressed[(i, j)], bound));
    };
    for x in 0..shape.x {
        for x2 in x..shape.x {
            push(PairClass::StateState, MatrixLabel::State(x), MatrixLabel::State(x2), x, x2, Some(k));
        }
    }
    for x in 0..shape.x {
        for y in 0..shape.y {
            for z in 0..shape.z {
                let t = if z < last { effect_traces[y][z] } else { sum_traces[y] };
                let e = MatrixLabel::Effect(y, z);
                push(PairClass::StateMeasurement, MatrixLabel::State(x), e, x, shape.effect(y, z), Some(k * t));
            }
        }
    }
    for y in 0..shape.y {
        for z in 0..shape.z {
            let i = shape.effect(y, z);
            for y2 in y..shape.y {
                let z_start = if y2 == y { z } else { 0 };
                for z2 in z_start..shape.z {
                    let bound = match (z < last, z2 < last) {
                        (true, true) => Some(k * effect_traces[y][z] * effect_traces[y2][z2]),
                        (true, false) => Some(k * effect_traces[y][z] * (1.0 + sum_traces[y2])),
                        (false, true) => Some(k * effect_traces[y2][z2] * (1.0 + sum_traces[y])),
                        (false, false) => None,
                    };
                    let (a, b) = (MatrixLabel::Effect(y, z), MatrixLabel::Effect(y2, z2));
                    push(PairClass::MeasurementMeasurement, a, b, i, shape.effect(y2, z2), bound);
                }
            }
        }
    }
    CompressionReport { epsilon, bound_constant: MODEL_BOUND_CONSTANT, pairs }
}

pub(crate) fn effect_traces(m: &QuantumModel) -> Vec<Vec<f64>> {
    m.measurements().iter().map(|povm| povm.iter().map(|e| e.trace()).collect()).collect()
}

/// Tabulates every inner product of `original` against `compressed` with the
/// model bounds at `epsilon`. The two models need equal `X, Y, Z` but not
/// equal dimension.
pub fn error_report(
    original: &QuantumModel,
    compressed: &QuantumModel,
    epsilon: f64,
) -> Result<CompressionReport, CompressError> {
    let shape = Shape::of(original);
    if shape != Shape::of(compressed) {
        return Err(CompressError::Precondition(format!(
            "model shapes differ: {:?} vs {:?}",
            shape,
            Shape::of(compressed)
        )));
    }
    let g0 = models::gram(&original.matrices().cloned().collect::<Vec<_>>())?;
    let g1 = models::gram(&compressed.matrices().cloned().collect::<Vec<_>>())?;
    Ok(model_report(shape, &g0.0, &g1.0, &effect_traces(original), epsilon))
}

/// Psd factorization report: every pair `(i ≤ j)` of the `J` factors against
/// `192 ε tr(M_i) tr(M_j)`.
pub fn psd_error_report(
    original: &PsdFactorization,
    compressed: &PsdFactorization,
    epsilon: f64,
) -> Result<CompressionReport, CompressError> {
    if original.left().len() != compressed.left().len() || original.right().len() != compressed.right().len() {
        return Err(CompressError::Precondition("factorizations have different factor counts".into()));
    }
    let labels: Vec<MatrixLabel> = (0..original.left().len())
        .map(MatrixLabel::Left)
        .chain((0..original.right().len()).map(MatrixLabel::Right))
        .collect();
    let g0 = models::gram(&original.matrices().cloned().collect::<Vec<_>>())?;
    let g1 = models::gram(&compressed.matrices().cloned().collect::<Vec<_>>())?;
    let traces: Vec<f64> = original.matrices().map(|m| m.trace()).collect();
    let k = PSD_BOUND_CONSTANT * epsilon;
    let mut pairs = Vec::new();
    for i in 0..labels.len() {
        for j in i..labels.len() {
            let bound = Some(k * traces[i] * traces[j]);
            pairs.push(PairEntry::new(PairClass::Factor, labels[i], labels[j], g0.get(i, j), g1.get(i, j), bound));
        }
    }
    Ok(CompressionReport { epsilon, bound_constant: PSD_BOUND_CONSTANT, pairs })
}
