//! JSON archives.
//!
//! Every archive is one JSON object with `format_version`, a `kind` tag and
//! the kind's fields. Complex matrices are flat row-major lists of `[re, im]`
//! pairs. Floats are written in their shortest round-trip form, so reading an
//! archive back gives bit-identical values.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use psdcompress::models::{validate_model, DataTable, ModelError, PsdFactorization, QuantumModel, Violation};
use psdcompress::numerics::{CMatrix, HermitianMatrix};
use psdcompress::projection::ProjectionMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed archive: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("expected a {expected} archive, found {found}")]
    Kind { expected: &'static str, found: &'static str },
    #[error("bad shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("model fails validation with {} violation(s)", .0.len())]
    Invalid(Vec<Violation>),
}

/// Flat row-major `[re, im]` pairs.
pub type Entries = Vec<[f64; 2]>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    QuantumModel {
        dim: usize,
        num_states: usize,
        num_measurements: usize,
        num_outcomes: usize,
        states: Vec<Entries>,
        /// `effects[y][z]`.
        effects: Vec<Vec<Entries>>,
    },
    PsdFactorization {
        dim: usize,
        left: Vec<Entries>,
        right: Vec<Entries>,
    },
    DataTable {
        num_inputs: usize,
        num_measurements: usize,
        num_outcomes: usize,
        normalized: bool,
        /// Indexed `(x·Y + y)·Z + z`.
        entries: Vec<f64>,
    },
    Projection {
        rows: usize,
        cols: usize,
        seed: u64,
        attempt: u64,
        entries: Entries,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::QuantumModel { .. } => "quantum_model",
            Payload::PsdFactorization { .. } => "psd_factorization",
            Payload::DataTable { .. } => "data_table",
            Payload::Projection { .. } => "projection",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub format_version: u32,
    #[serde(flatten)]
    pub payload: Payload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn entries(m: &CMatrix) -> Entries {
    let (r, c) = m.shape();
    (0..r).flat_map(|j| (0..c).map(move |k| (j, k))).map(|(j, k)| [m[(j, k)].re, m[(j, k)].im]).collect()
}

fn matrix(e: &Entries, rows: usize, cols: usize) -> Result<CMatrix, ArchiveError> {
    if e.len() != rows * cols {
        return Err(ArchiveError::Shape(format!("{} entries for a {rows} × {cols} matrix", e.len())));
    }
    if e.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ArchiveError::Shape("non-finite matrix entry".into()));
    }
    Ok(DMatrix::from_fn(rows, cols, |j, k| {
        let [re, im] = e[j * cols + k];
        Complex64::new(re, im)
    }))
}

fn hermitian(e: &Entries, dim: usize) -> Result<HermitianMatrix, ArchiveError> {
    HermitianMatrix::new(matrix(e, dim, dim)?).map_err(|err| ArchiveError::Model(err.into()))
}

fn hermitians(es: &[Entries], dim: usize) -> Result<Vec<HermitianMatrix>, ArchiveError> {
    es.iter().map(|e| hermitian(e, dim)).collect()
}

impl Archive {
    fn new(payload: Payload, provenance: Option<Provenance>) -> Self {
        Self { format_version: FORMAT_VERSION, payload, provenance }
    }

    pub fn from_model(m: &QuantumModel, provenance: Option<Provenance>) -> Self {
        let dense = |h: &HermitianMatrix| entries(h.matrix());
        Self::new(
            Payload::QuantumModel {
                dim: m.dim(),
                num_states: m.num_states(),
                num_measurements: m.num_measurements(),
                num_outcomes: m.num_outcomes(),
                states: m.states().iter().map(dense).collect(),
                effects: m.measurements().iter().map(|p| p.iter().map(dense).collect()).collect(),
            },
            provenance,
        )
    }

    pub fn from_factorization(f: &PsdFactorization, provenance: Option<Provenance>) -> Self {
        let dense = |h: &HermitianMatrix| entries(h.matrix());
        Self::new(
            Payload::PsdFactorization {
                dim: f.dim(),
                left: f.left().iter().map(dense).collect(),
                right: f.right().iter().map(dense).collect(),
            },
            provenance,
        )
    }

    pub fn from_table(t: &DataTable, provenance: Option<Provenance>) -> Self {
        Self::new(
            Payload::DataTable {
                num_inputs: t.num_inputs(),
                num_measurements: t.num_measurements(),
                num_outcomes: t.num_outcomes(),
                normalized: t.is_normalized(),
                entries: t.entries().to_vec(),
            },
            provenance,
        )
    }

    pub fn from_projection(p: &ProjectionMatrix, provenance: Option<Provenance>) -> Self {
        Self::new(
            Payload::Projection {
                rows: p.rows(),
                cols: p.cols(),
                seed: p.seed(),
                attempt: p.attempt(),
                entries: entries(p.matrix()),
            },
            provenance,
        )
    }

    pub fn kind(&self) -> &'static str {
        self.payload.kind()
    }

    fn wrong_kind(&self, expected: &'static str) -> ArchiveError {
        ArchiveError::Kind { expected, found: self.kind() }
    }

    /// The model, without checking positivity or normalization.
    pub fn to_model_unchecked(&self) -> Result<QuantumModel, ArchiveError> {
        let Payload::QuantumModel { dim, num_states, num_measurements, num_outcomes, states, effects } = &self.payload
        else {
            return Err(self.wrong_kind("quantum_model"));
        };
        if states.len() != *num_states
            || effects.len() != *num_measurements
            || effects.iter().any(|p| p.len() != *num_outcomes)
        {
            return Err(ArchiveError::Shape("matrix counts disagree with the declared shape".into()));
        }
        let measurements = effects.iter().map(|p| hermitians(p, *dim)).collect::<Result<Vec<_>, _>>()?;
        Ok(QuantumModel::new(*dim, hermitians(states, *dim)?, measurements)?)
    }

    /// The model, re-validated.
    pub fn to_model(&self) -> Result<QuantumModel, ArchiveError> {
        let m = self.to_model_unchecked()?;
        let violations = validate_model(&m);
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(ArchiveError::Invalid(violations))
        }
    }

    pub fn to_factorization(&self) -> Result<PsdFactorization, ArchiveError> {
        let Payload::PsdFactorization { dim, left, right } = &self.payload else {
            return Err(self.wrong_kind("psd_factorization"));
        };
        Ok(PsdFactorization::new(*dim, hermitians(left, *dim)?, hermitians(right, *dim)?)?)
    }

    pub fn to_table(&self) -> Result<DataTable, ArchiveError> {
        let Payload::DataTable { num_inputs, num_measurements, num_outcomes, normalized, entries } = &self.payload
        else {
            return Err(self.wrong_kind("data_table"));
        };
        Ok(DataTable::new(*num_inputs, *num_measurements, *num_outcomes, entries.clone(), *normalized)?)
    }

    pub fn to_projection(&self) -> Result<ProjectionMatrix, ArchiveError> {
        let Payload::Projection { rows, cols, seed, attempt, entries } = &self.payload else {
            return Err(self.wrong_kind("projection"));
        };
        ProjectionMatrix::from_parts(*seed, *attempt, matrix(entries, *rows, *cols)?)
            .map_err(|e| ArchiveError::Shape(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("archives serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str, path: &str) -> Result<Self, ArchiveError> {
        let a: Archive =
            serde_json::from_str(s).map_err(|source| ArchiveError::Json { path: path.to_string(), source })?;
        if a.format_version != FORMAT_VERSION {
            return Err(ArchiveError::Version(a.format_version));
        }
        Ok(a)
    }

    pub fn read(path: &Path) -> Result<Self, ArchiveError> {
        let name = path.display().to_string();
        let s = fs::read_to_string(path).map_err(|source| ArchiveError::Io { path: name.clone(), source })?;
        Self::from_json(&s, &name)
    }

    pub fn write(&self, path: &Path) -> Result<(), ArchiveError> {
        fs::write(path, self.to_json()).map_err(|source| ArchiveError::Io { path: path.display().to_string(), source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use psdcompress::models::{random_model, random_psd_factorization, random_table, RankSpec};
    use psdcompress::projection::ProjectionMatrix;

    fn round_trip(a: &Archive) -> Archive {
        Archive::from_json(&a.to_json(), "mem").unwrap()
    }

    #[test]
    fn kinds_are_tagged() {
        let a = Archive::from_table(&DataTable::identity(2), None);
        assert!(a.to_json().starts_with(r#"{"format_version":1,"kind":"data_table""#));
        assert!(matches!(a.to_model(), Err(ArchiveError::Kind { expected: "quantum_model", found: "data_table" })));
    }

    #[test]
    fn version_is_checked() {
        let s = Archive::from_table(&DataTable::identity(2), None).to_json().replace(":1,", ":7,");
        assert!(matches!(Archive::from_json(&s, "mem"), Err(ArchiveError::Version(7))));
    }

    #[test]
    fn tampering_is_caught_on_load() {
        let m = random_model(2, 1, 2, 3, RankSpec { state: 1, effect: 1 }, 0).unwrap();
        let mut a = Archive::from_model(&m, None);
        if let Payload::QuantumModel { effects, .. } = &mut a.payload {
            effects[0][0][0][0] += 0.5;
        }
        assert!(matches!(a.to_model(), Err(ArchiveError::Invalid(_))));
        assert!(a.to_model_unchecked().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lossless_for_every_kind(seed in any::<u64>(), dim in 1usize..6) {
            let m = random_model(3, 2, 2, dim + 1, RankSpec { state: 1, effect: 1 }, seed).unwrap();
            let a = Archive::from_model(&m, Some(Provenance { generator: "test".into(), seed: Some(seed) }));
            prop_assert_eq!(&round_trip(&a), &a);
            prop_assert_eq!(round_trip(&a).to_model().unwrap(), m);

            let f = random_psd_factorization(2, 3, dim, dim, seed).unwrap();
            let a = Archive::from_factorization(&f, None);
            prop_assert_eq!(round_trip(&a).to_factorization().unwrap(), f);

            let t = random_table(3, 2, dim, seed);
            let a = Archive::from_table(&t, None);
            prop_assert_eq!(round_trip(&a).to_table().unwrap(), t);

            let p = ProjectionMatrix::sample(dim, dim + 2, seed, 3);
            let a = Archive::from_projection(&p, None);
            prop_assert_eq!(round_trip(&a).to_projection().unwrap(), p);
        }
    }
}
