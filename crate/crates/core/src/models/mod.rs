//! Quantum models, psd factorizations and data tables.
//!
//! A [`QuantumModel`] is `X` states `ρ_x` and `Y` measurements with `Z`
//! outcomes each, all on `C^D`. Its [`DataTable`] holds the outcome
//! probabilities `tr(ρ_x E_yz)` indexed `(x; y, z)`. Construction only checks
//! shapes; the numerical invariants (positivity, unit trace, POVM
//! normalization) are reported by [`validate_model`] as data.

mod random;

pub use random::{
    basis_measurement_model, binary_rank_one_model, random_model, random_psd_factorization, random_state, random_table,
    tail_model, RankSpec,
};

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::numerics::{self, HermitianMatrix, NumericsError};

/// Normalization tolerance for states, POVMs and table rows.
pub const TOL_NORM: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("model violates its invariants: {}", summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("table is not normalized")]
    Unnormalized,
    #[error("invalid table: {0}")]
    Table(String),
    #[error("infeasible rank request: {0}")]
    InfeasibleRank(String),
}

fn summarize(v: &[Violation]) -> String {
    let shown: Vec<String> = v.iter().take(3).map(|x| x.to_string()).collect();
    if v.len() > 3 {
        format!("{} (+{} more)", shown.join("; "), v.len() - 3)
    } else {
        shown.join("; ")
    }
}

/// One failed invariant of a [`QuantumModel`]. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    StateNotPsd {
        x: usize,
        min_eigenvalue: f64,
    },
    StateTrace {
        x: usize,
        trace: f64,
    },
    EffectNotPsd {
        y: usize,
        z: usize,
        min_eigenvalue: f64,
    },
    /// `max |Σ_z E_yz − I|` over entries.
    Normalization {
        y: usize,
        deviation: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StateNotPsd { x, min_eigenvalue } => {
                write!(f, "state {x} not psd (min eigenvalue {min_eigenvalue:.3e})")
            }
            Violation::StateTrace { x, trace } => write!(f, "state {x} has trace {trace}"),
            Violation::EffectNotPsd { y, z, min_eigenvalue } => {
                write!(f, "effect ({y},{z}) not psd (min eigenvalue {min_eigenvalue:.3e})")
            }
            Violation::Normalization { y, deviation } => {
                write!(f, "measurement {y} does not sum to identity (deviation {deviation:.3e})")
            }
        }
    }
}

/// States and POVMs on a common space `C^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumModel {
    dim: usize,
    states: Vec<HermitianMatrix>,
    measurements: Vec<Vec<HermitianMatrix>>,
}

impl QuantumModel {
    /// Checks shapes: `X, Y, Z ≥ 1`, every measurement has the same number of
    /// outcomes, every matrix is `dim × dim`.
    pub fn new(
        dim: usize,
        states: Vec<HermitianMatrix>,
        measurements: Vec<Vec<HermitianMatrix>>,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Shape("dimension must be positive".into()));
        }
        if states.is_empty() || measurements.is_empty() {
            return Err(ModelError::Shape("need at least one state and one measurement".into()));
        }
        let z = measurements[0].len();
        if z == 0 {
            return Err(ModelError::Shape("measurements need at least one outcome".into()));
        }
        if let Some(y) = measurements.iter().position(|m| m.len() != z) {
            return Err(ModelError::Shape(format!(
                "measurement {y} has {} outcomes, expected {z}",
                measurements[y].len()
            )));
        }
        let bad = states.iter().chain(measurements.iter().flatten()).find(|h| h.dim() != dim);
        if let Some(h) = bad {
            return Err(ModelError::Shape(format!("matrix of dim {} in a dim-{dim} model", h.dim())));
        }
        Ok(Self { dim, states, measurements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_measurements(&self) -> usize {
        self.measurements.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.measurements[0].len()
    }

    /// `J = X + Y·Z`, the number of matrices in the model.
    pub fn num_matrices(&self) -> usize {
        self.num_states() + self.num_measurements() * self.num_outcomes()
    }

    pub fn states(&self) -> &[HermitianMatrix] {
        &self.states
    }

    pub fn measurements(&self) -> &[Vec<HermitianMatrix>] {
        &self.measurements
    }

    pub fn state(&self, x: usize) -> &HermitianMatrix {
        &self.states[x]
    }

    pub fn effect(&self, y: usize, z: usize) -> &HermitianMatrix {
        &self.measurements[y][z]
    }

    /// `Σ_{z<Z} E_yz`, the complement of the last outcome.
    pub fn small_outcome_sum(&self, y: usize) -> HermitianMatrix {
        let z = self.num_outcomes();
        HermitianMatrix::sum(self.dim, &self.measurements[y][..z - 1]).expect("shapes checked at construction")
    }

    /// All matrices in the order states, then `E_yz` with `y` major.
    pub fn matrices(&self) -> impl Iterator<Item = &HermitianMatrix> {
        self.states.iter().chain(self.measurements.iter().flatten())
    }

    /// Same model with the outcomes of measurement `y` reordered by `perm`
    /// (new outcome `z` is old outcome `perm[z]`).
    pub fn with_permuted_outcomes(&self, y: usize, perm: &[usize]) -> Result<Self, ModelError> {
        let z = self.num_outcomes();
        let mut seen = vec![false; z];
        if perm.len() != z || perm.iter().any(|&p| p >= z || std::mem::replace(&mut seen[p], true)) {
            return Err(ModelError::Shape(format!("{perm:?} is not a permutation of {z} outcomes")));
        }
        let mut out = self.clone();
        out.measurements[y] = perm.iter().map(|&p| self.measurements[y][p].clone()).collect();
        Ok(out)
    }

    pub fn into_parts(self) -> (usize, Vec<HermitianMatrix>, Vec<Vec<HermitianMatrix>>) {
        (self.dim, self.states, self.measurements)
    }
}

/// Lists every violated invariant; empty iff the model is valid.
pub fn validate_model(m: &QuantumModel) -> Vec<Violation> {
    let mut out = Vec::new();
    for (x, rho) in m.states.iter().enumerate() {
        let tol = numerics::psd_tolerance(rho);
        if !numerics::is_psd(rho, tol) {
            out.push(Violation::StateNotPsd { x, min_eigenvalue: numerics::min_eigenvalue(rho) });
        }
        let trace = rho.trace();
        if (trace - 1.0).abs() > TOL_NORM {
            out.push(Violation::StateTrace { x, trace });
        }
    }
    let identity = HermitianMatrix::identity(m.dim);
    for (y, povm) in m.measurements.iter().enumerate() {
        for (z, e) in povm.iter().enumerate() {
            let tol = numerics::psd_tolerance(e);
            if !numerics::is_psd(e, tol) {
                let min_eigenvalue = numerics::min_eigenvalue(e);
                out.push(Violation::EffectNotPsd { y, z, min_eigenvalue });
            }
        }
        let total = HermitianMatrix::sum(m.dim, povm).expect("shapes checked at construction");
        let deviation = total.max_abs_diff(&identity);
        if deviation > TOL_NORM {
            out.push(Violation::Normalization { y, deviation });
        }
    }
    out
}

/// Psd factorization `M_nm = tr(A_n B_m)` on `C^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdFactorization {
    dim: usize,
    left: Vec<HermitianMatrix>,
    right: Vec<HermitianMatrix>,
}

impl PsdFactorization {
    /// Checks shapes and positivity (within the numerics psd tolerance).
    pub fn new(dim: usize, left: Vec<HermitianMatrix>, right: Vec<HermitianMatrix>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Shape("dimension must be positive".into()));
        }
        for (side, mats) in [("left", &left), ("right", &right)] {
            for (i, h) in mats.iter().enumerate() {
                if h.dim() != dim {
                    return Err(ModelError::Shape(format!("{side}[{i}] has dim {}, expected {dim}", h.dim())));
                }
                let tol = numerics::psd_tolerance(h);
                if !numerics::is_psd(h, tol) {
                    return Err(NumericsError::Indefinite { min_eigenvalue: numerics::min_eigenvalue(h), tol }.into());
                }
            }
        }
        Ok(Self { dim, left, right })
    }

    /// For sketches `Π M Π†` of already validated factors, which are psd by
    /// construction.
    pub(crate) fn from_sketches(dim: usize, left: Vec<HermitianMatrix>, right: Vec<HermitianMatrix>) -> Self {
        Self { dim, left, right }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn left(&self) -> &[HermitianMatrix] {
        &self.left
    }

    pub fn right(&self) -> &[HermitianMatrix] {
        &self.right
    }

    /// `J = N + M`.
    pub fn num_matrices(&self) -> usize {
        self.left.len() + self.right.len()
    }

    /// Left factors followed by right factors.
    pub fn matrices(&self) -> impl Iterator<Item = &HermitianMatrix> {
        self.left.iter().chain(self.right.iter())
    }

    /// The factorized nonnegative matrix `M_nm = tr(A_n B_m)` as an
    /// unnormalized single-measurement table.
    pub fn product_table(&self) -> DataTable {
        let mut entries = Vec::with_capacity(self.left.len() * self.right.len());
        for a in &self.left {
            for b in &self.right {
                entries.push(numerics::trace_inner(a, b).expect("dims checked").max(0.0));
            }
        }
        DataTable { x: self.left.len(), y: 1, z: self.right.len(), entries, normalized: false }
    }
}

/// Outcome table `D[x; y, z]`, stored row-major with `z` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DataTable {
    x: usize,
    y: usize,
    z: usize,
    entries: Vec<f64>,
    normalized: bool,
}

impl DataTable {
    /// With `normalized`, entries must lie in `[0, 1 + TOL_NORM]` and every
    /// `(x, y)` row must sum to one within `TOL_NORM`. Unnormalized tables only
    /// need finite nonnegative entries.
    pub fn new(x: usize, y: usize, z: usize, entries: Vec<f64>, normalized: bool) -> Result<Self, ModelError> {
        if x == 0 || y == 0 || z == 0 {
            return Err(ModelError::Table(format!("shape ({x},{y},{z}) must be positive")));
        }
        if entries.len() != x * y * z {
            return Err(ModelError::Table(format!("{} entries for shape ({x},{y},{z})", entries.len())));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::Table(format!("entry {i} = {} is negative", entries[i])));
        }
        let t = Self { x, y, z, entries, normalized };
        if normalized {
            if let Some(i) = t.entries.iter().position(|&v| v > 1.0 + TOL_NORM) {
                return Err(ModelError::Table(format!("entry {i} = {} exceeds 1", t.entries[i])));
            }
            for xi in 0..x {
                for yi in 0..y {
                    let s: f64 = t.row(xi, yi).iter().sum();
                    if (s - 1.0).abs() > TOL_NORM {
                        return Err(ModelError::Table(format!("row ({xi},{yi}) sums to {s}")));
                    }
                }
            }
        }
        Ok(t)
    }

    /// `D = I_n`: one measurement with `n` outcomes, `n` inputs.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { x: n, y: 1, z: n, entries, normalized: true }
    }

    /// Every entry equal to `1/z`.
    pub fn constant(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z, entries: vec![1.0 / z as f64; x * y * z], normalized: true }
    }

    pub fn num_inputs(&self) -> usize {
        self.x
    }

    pub fn num_measurements(&self) -> usize {
        self.y
    }

    pub fn num_outcomes(&self) -> usize {
        self.z
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.entries[(x * self.y + y) * self.z + z]
    }

    pub fn row(&self, x: usize, y: usize) -> &[f64] {
        let start = (x * self.y + y) * self.z;
        &self.entries[start..start + self.z]
    }

    /// Entrywise maximum deviation; `None` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        if (self.x, self.y, self.z) != (other.x, other.y, other.z) {
            return None;
        }
        Some(self.entries.iter().zip(&other.entries).fold(0.0, |a, (p, q)| f64::max(a, (p - q).abs())))
    }
}

/// `D[x; y, z] = tr(ρ_x E_yz)`, clamped to `[0, 1]` after validation.
pub fn data_table(m: &QuantumModel) -> Result<DataTable, ModelError> {
    let violations = validate_model(m);
    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations));
    }
    let (x, y, z) = (m.num_states(), m.num_measurements(), m.num_outcomes());
    let mut entries = Vec::with_capacity(x * y * z);
    for rho in &m.states {
        for povm in &m.measurements {
            for e in povm {
                entries.push(numerics::trace_inner(rho, e)?.clamp(0.0, 1.0));
            }
        }
    }
    DataTable::new(x, y, z, entries, true)
}

/// The `X`-dimensional model realizing `D = I·D`: `ρ_x = |x⟩⟨x|` and diagonal
/// effects `(E_yz)_ii = D[i; y, z]`.
pub fn trivial_model(t: &DataTable) -> Result<QuantumModel, ModelError> {
    if !t.normalized {
        return Err(ModelError::Unnormalized);
    }
    let dim = t.x;
    let states = (0..dim).map(|x| HermitianMatrix::basis_projector(dim, x)).collect();
    let measurements = (0..t.y)
        .map(|y| {
            (0..t.z)
                .map(|z| {
                    let diag: Vec<f64> = (0..dim).map(|i| t.get(i, y, z)).collect();
                    HermitianMatrix::from_diagonal(&diag)
                })
                .collect()
        })
        .collect();
    QuantumModel::new(dim, states, measurements)
}

/// Real symmetric Gram matrix `G_nm = tr(M_n M_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(pub DMatrix<f64>);

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.0[(n, m)]
    }
}

pub fn gram(mats: &[HermitianMatrix]) -> Result<GramMatrix, ModelError> {
    let j = mats.len();
    let mut g = DMatrix::zeros(j, j);
    for n in 0..j {
        for m in n..j {
            let v = numerics::trace_inner(&mats[n], &mats[m])?;
            g[(n, m)] = v;
            g[(m, n)] = v;
        }
    }
    Ok(GramMatrix(g))
}
