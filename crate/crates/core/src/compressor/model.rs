//! Model compression in factored form.
//!
//! Every original matrix `A` is stored once as `A = F F†`. For a sketch `Π`
//! with `K = Π†Π`, all compressed traces and pairwise inner products follow
//! from `tr(Π A Π†) = tr(F† K F)` and `tr(Π A Π† Π B Π†) = ‖F_A† K F_B‖²_F`, so
//! an attempt costs `O(D²)` per matrix regardless of `d`. The dense `d × d`
//! matrices are built only on request by [`CompressedModel::materialize`].

use std::sync::Arc;

use nalgebra::DMatrix;

use super::report::{self, CompressionReport, Shape, MODEL_BOUND_CONSTANT};
use super::{Certification, CompressError, CompressionCertificate, DEGENERATE_TRACE};
use crate::models::{validate_model, DataTable, ModelError, QuantumModel, Violation};
use crate::numerics::{self, CMatrix, HermitianMatrix, TOL_PSD};
use crate::projection::{self, CompressionConfig, ProjectionError, ProjectionMatrix, Regime};

/// `F` with `F F† = A`, from the eigenpairs of `A` with positive eigenvalue.
/// Also returns the descending spectrum.
fn psd_factor(a: &HermitianMatrix) -> Result<(CMatrix, Vec<f64>), CompressError> {
    let eig = numerics::eigh(a)?;
    let keep = eig.eigenvalues.iter().take_while(|&&v| v > 0.0).count();
    let mut f = CMatrix::zeros(a.dim(), keep);
    for j in 0..keep {
        let col = eig.eigenvectors.column(j) * num_complex::Complex64::from(eig.eigenvalues[j].sqrt());
        f.set_column(j, &col);
    }
    Ok((f, eig.eigenvalues))
}

fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest eigenvalue of `Π F F† Π†`, computed as that of `F† K F`.
fn top_sketched_eigenvalue(k: &CMatrix, f: &CMatrix) -> f64 {
    if f.ncols() == 0 {
        return 0.0;
    }
    let inner = numerics::matmul(&f.adjoint(), &numerics::matmul(k, f));
    numerics::op_norm(&HermitianMatrix::hermitian_part(&inner).expect("square"))
}

/// A validated model with its factors and Gram matrix, reusable across
/// attempts and sketch dimensions.
#[derive(Clone, Debug)]
pub struct PreparedModel {
    model: Arc<QuantumModel>,
    shape: Shape,
    /// States, then the effects `z < Z` with `y` major.
    factors: Vec<CMatrix>,
    /// Factors of `S_y = Σ_{z<Z} E_yz`.
    sum_factors: Vec<CMatrix>,
    original_gram: DMatrix<f64>,
    effect_traces: Vec<Vec<f64>>,
    max_rank: usize,
}

impl PreparedModel {
    pub fn new(m: &QuantumModel) -> Result<Self, CompressError> {
        let violations = validate_model(m);
        if !violations.is_empty() {
            return Err(CompressError::InvalidModel(violations));
        }
        let shape = Shape::of(m);
        let last = shape.z - 1;
        let mut factors = Vec::with_capacity(shape.x + shape.y * last);
        for rho in m.states() {
            factors.push(psd_factor(rho)?.0);
        }
        for povm in m.measurements() {
            for e in &povm[..last] {
                factors.push(psd_factor(e)?.0);
            }
        }
        let mut sum_factors = Vec::with_capacity(shape.y);
        let mut max_rank = 0;
        for y in 0..shape.y {
            let (f, spectrum) = psd_factor(&m.small_outcome_sum(y))?;
            max_rank = max_rank.max(numerics::rank_of_spectrum(&spectrum, numerics::RANK_TOL));
            sum_factors.push(f);
        }
        let original_gram = crate::models::gram(&m.matrices().cloned().collect::<Vec<_>>())?.0;
        Ok(Self {
            model: Arc::new(m.clone()),
            shape,
            factors,
            sum_factors,
            original_gram,
            effect_traces: report::effect_traces(m),
            max_rank,
        })
    }

    pub fn model(&self) -> &QuantumModel {
        &self.model
    }

    /// `max_y rank(Σ_{z<Z} E_yz)`.
    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    pub fn original_gram(&self) -> &DMatrix<f64> {
        &self.original_gram
    }

    fn small(&self, y: usize, z: usize) -> usize {
        self.shape.x + y * (self.shape.z - 1) + z
    }

    pub(crate) fn model_certification(&self, epsilon: f64, d: usize) -> Result<Certification, CompressError> {
        let (j, big_d) = (self.model.num_matrices(), self.model.dim());
        let required = projection::dim_for_model(epsilon, j, big_d, self.max_rank)?;
        let effective = projection::epsilon_for_dim(d, j, big_d, Regime::Model { max_rank: self.max_rank })?;
        Ok(Certification::new(epsilon, d, required, effective))
    }

    /// Runs the model pipeline at sketch dimension `d`.
    pub fn compress(&self, cfg: &CompressionConfig, d: usize) -> Result<ModelCompression, CompressError> {
        let cert = self.model_certification(cfg.epsilon, d)?;
        run_model(self, cfg, d, cert, |_, _| true)
    }

    /// Applies one sketch.
    pub fn sketch(&self, projection: ProjectionMatrix, epsilon: f64) -> Result<CompressedModel, CompressError> {
        if projection.cols() != self.model.dim() {
            return Err(ProjectionError::DimMismatch { expected: self.model.dim(), got: projection.cols() }.into());
        }
        let d = projection.rows();
        let k = projection.gram().into_matrix();
        let images: Vec<CMatrix> = self.factors.iter().map(|f| numerics::matmul(&k, f)).collect();
        let n = self.factors.len();
        let mut raw = DMatrix::zeros(n, n);
        let mut raw_traces = vec![0.0; n];
        for a in 0..n {
            let fa = self.factors[a].adjoint();
            for b in a..n {
                let cross = numerics::matmul(&fa, &images[b]);
                if a == b {
                    raw_traces[a] = (0..cross.nrows()).map(|i| cross[(i, i)].re).sum();
                }
                let v = frobenius_sq(&cross);
                raw[(a, b)] = v;
                raw[(b, a)] = v;
            }
        }
        let event_norms = self.sum_factors.iter().map(|f| top_sketched_eigenvalue(&k, f)).collect();
        let state_traces = raw_traces[..self.shape.x].to_vec();
        let gram = self.compressed_gram(d, epsilon, &raw, &raw_traces);
        let last = self.shape.z - 1;
        let sum_traces = (0..self.shape.y).map(|y| (0..last).map(|z| raw_traces[self.small(y, z)]).sum()).collect();
        Ok(CompressedModel {
            original: Arc::clone(&self.model),
            projection,
            epsilon,
            shape: self.shape,
            state_traces,
            event_norms,
            sum_traces,
            gram,
        })
    }

    fn compressed_gram(&self, d: usize, epsilon: f64, raw: &DMatrix<f64>, raw_traces: &[f64]) -> DMatrix<f64> {
        let s = self.shape;
        let last = s.z - 1;
        let c = 1.0 / (1.0 + epsilon);
        let t = &raw_traces[..s.x];
        let mut g = DMatrix::zeros(s.len(), s.len());
        let mut set = |i: usize, j: usize, v: f64| {
            g[(i, j)] = v;
            g[(j, i)] = v;
        };
        for x in 0..s.x {
            for x2 in x..s.x {
                set(x, x2, raw[(x, x2)] / (t[x] * t[x2]));
            }
            for y in 0..s.y {
                let mut acc = 0.0;
                for z in 0..last {
                    let v = c * raw[(x, self.small(y, z))] / t[x];
                    set(x, s.effect(y, z), v);
                    acc += v;
                }
                set(x, s.effect(y, last), 1.0 - acc);
            }
        }
        let sum_traces: Vec<f64> = (0..s.y).map(|y| (0..last).map(|z| raw_traces[self.small(y, z)]).sum()).collect();
        for y in 0..s.y {
            for y2 in 0..s.y {
                let mut both_last = d as f64 - c * sum_traces[y] - c * sum_traces[y2];
                for z in 0..last {
                    let a = self.small(y, z);
                    let mut cross = 0.0;
                    for z2 in 0..last {
                        let v = c * c * raw[(a, self.small(y2, z2))];
                        set(s.effect(y, z), s.effect(y2, z2), v);
                        cross += v;
                    }
                    set(s.effect(y, z), s.effect(y2, last), c * raw_traces[a] - cross);
                    both_last += cross;
                }
                set(s.effect(y, last), s.effect(y2, last), both_last);
            }
        }
        g
    }

    fn report(&self, compressed: &CompressedModel, epsilon: f64) -> CompressionReport {
        report::model_report(self.shape, &self.original_gram, &compressed.gram, &self.effect_traces, epsilon)
    }
}

/// A compressed model held as its sketch and exact pairwise inner products.
#[derive(Clone, Debug)]
pub struct CompressedModel {
    original: Arc<QuantumModel>,
    projection: ProjectionMatrix,
    epsilon: f64,
    shape: Shape,
    state_traces: Vec<f64>,
    event_norms: Vec<f64>,
    /// `tr(Π S_y Π†)`.
    sum_traces: Vec<f64>,
    gram: DMatrix<f64>,
}

impl CompressedModel {
    pub fn dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.projection
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `tr(Π ρ_x Π†)` before normalization.
    pub fn state_traces(&self) -> &[f64] {
        &self.state_traces
    }

    /// `‖Π (Σ_{z<Z} E_yz) Π†‖` per `y`.
    pub fn event_norms(&self) -> &[f64] {
        &self.event_norms
    }

    pub fn norm_events(&self) -> Vec<bool> {
        self.event_norms.iter().map(|&v| v <= 1.0 + self.epsilon).collect()
    }

    /// `tr(M'_i M'_j)` over the compressed matrices in model order.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Invariant violations of the compressed model, from its spectral data.
    ///
    /// States and effects `z < Z` are psd sketches and the measurements sum to
    /// the identity by construction, so only the last outcomes can fail: the
    /// smallest eigenvalue of `C(E_yZ)` is `1 − ‖Π S_y Π†‖/(1+ε)`.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (x, &t) in self.state_traces.iter().enumerate() {
            if !(t >= DEGENERATE_TRACE) {
                out.push(Violation::StateTrace { x, trace: t });
            }
        }
        let c = 1.0 / (1.0 + self.epsilon);
        let last = self.shape.z - 1;
        for (y, &norm) in self.event_norms.iter().enumerate() {
            let min_eigenvalue = 1.0 - c * norm;
            let trace = self.dim() as f64 - c * self.sum_traces[y];
            if min_eigenvalue < -TOL_PSD * trace.abs().max(1.0) {
                out.push(Violation::EffectNotPsd { y, z: last, min_eigenvalue });
            }
        }
        out
    }

    /// `D'[x; y, z] = tr(C(ρ_x) C(E_yz))`, clamped to `[0, 1]`.
    pub fn data_table(&self) -> Result<DataTable, ModelError> {
        let s = self.shape;
        let mut entries = Vec::with_capacity(s.x * s.y * s.z);
        for x in 0..s.x {
            for y in 0..s.y {
                for z in 0..s.z {
                    entries.push(self.gram[(x, s.effect(y, z))].clamp(0.0, 1.0));
                }
            }
        }
        DataTable::new(s.x, s.y, s.z, entries, true)
    }

    /// The dense `d`-dimensional model.
    pub fn materialize(&self) -> QuantumModel {
        let p = self.projection.matrix();
        let d = self.dim();
        let c = 1.0 / (1.0 + self.epsilon);
        let states = self
            .original
            .states()
            .iter()
            .zip(&self.state_traces)
            .map(|(rho, &t)| numerics::sandwich(p, rho).scaled(1.0 / t))
            .collect();
        let last = self.shape.z - 1;
        let measurements = self
            .original
            .measurements()
            .iter()
            .map(|povm| {
                let mut out: Vec<HermitianMatrix> =
                    povm[..last].iter().map(|e| numerics::sandwich(p, e).scaled(c)).collect();
                let rest = HermitianMatrix::sum(d, &out).expect("same dim");
                out.push(HermitianMatrix::identity(d).checked_sub(&rest).expect("same dim"));
                out
            })
            .collect();
        QuantumModel::new(d, states, measurements).expect("shape preserved")
    }
}

/// An accepted compression with its certificate and report.
#[derive(Clone, Debug)]
pub struct ModelCompression {
    pub model: CompressedModel,
    pub certificate: CompressionCertificate,
    pub report: CompressionReport,
}

/// The retry loop. `accept` is an extra acceptance predicate on top of the
/// norm events and the promised bounds.
pub(crate) fn run_model<F>(
    prepared: &PreparedModel,
    cfg: &CompressionConfig,
    d: usize,
    cert: Certification,
    accept: F,
) -> Result<ModelCompression, CompressError>
where
    F: Fn(&CompressedModel, &CompressionReport) -> bool,
{
    if d == 0 {
        return Err(CompressError::Precondition("sketch dimension must be positive".into()));
    }
    let big_d = prepared.model.dim();
    let (mut failed_events, mut degenerate) = (0, 0);
    let mut best = f64::INFINITY;
    for attempt in 0..cfg.max_retries {
        let p = ProjectionMatrix::sample(d, big_d, cfg.seed, attempt as u64);
        let compressed = prepared.sketch(p, cfg.epsilon)?;
        if compressed.state_traces.iter().any(|&t| !(t >= DEGENERATE_TRACE)) {
            degenerate += 1;
            continue;
        }
        let report = prepared.report(&compressed, cert.certified_epsilon);
        let ratio = report.max_violation_ratio();
        best = best.min(ratio);
        let events = compressed.norm_events();
        if !events.iter().all(|&e| e) {
            failed_events += 1;
            continue;
        }
        if ratio > 1.0 || !accept(&compressed, &report) {
            continue;
        }
        let certificate = CompressionCertificate {
            seed: cfg.seed,
            attempts: attempt + 1,
            dim: d,
            required_dim: cert.required_dim,
            formula_satisfied: cert.formula_satisfied,
            epsilon: cfg.epsilon,
            certified_epsilon: cert.certified_epsilon,
            certified_epsilon_exceeds_half: cert.certified_epsilon > projection::MAX_EPSILON,
            jl_event_held: true,
            norm_events: events,
            promised_bound_constant: MODEL_BOUND_CONSTANT,
            max_violation_ratio: ratio,
        };
        return Ok(ModelCompression { model: compressed, certificate, report });
    }
    Err(CompressError::RetriesExhausted {
        attempts: cfg.max_retries,
        failed_events,
        degenerate,
        best_violation_ratio: best,
    })
}

/// Compresses `m` to dimension `d` and materializes the result.
pub fn compress_model(
    m: &QuantumModel,
    cfg: &CompressionConfig,
    d: usize,
) -> Result<(QuantumModel, CompressionCertificate, CompressionReport), CompressError> {
    let out = compress_model_factored(m, cfg, d)?;
    Ok((out.model.materialize(), out.certificate, out.report))
}

/// [`compress_model`] without building the dense `d × d` matrices.
pub fn compress_model_factored(
    m: &QuantumModel,
    cfg: &CompressionConfig,
    d: usize,
) -> Result<ModelCompression, CompressError> {
    PreparedModel::new(m)?.compress(cfg, d)
}

/// `‖Π (Σ_{z<Z} E_yz) Π†‖` for each `y`.
pub fn event_norms(p: &ProjectionMatrix, m: &QuantumModel) -> Result<Vec<f64>, CompressError> {
    if p.cols() != m.dim() {
        return Err(ProjectionError::DimMismatch { expected: m.dim(), got: p.cols() }.into());
    }
    let k = p.gram().into_matrix();
    (0..m.num_measurements())
        .map(|y| Ok(top_sketched_eigenvalue(&k, &psd_factor(&m.small_outcome_sum(y))?.0)))
        .collect()
}

/// Whether `‖Π (Σ_{z<Z} E_yz) Π†‖ ≤ 1+ε` for each `y`.
pub fn event_norm_check(p: &ProjectionMatrix, m: &QuantumModel, epsilon: f64) -> Result<Vec<bool>, CompressError> {
    Ok(event_norms(p, m)?.into_iter().map(|v| v <= 1.0 + epsilon).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressor::{error_report, PairClass};
    use crate::models::{basis_measurement_model, binary_rank_one_model, data_table, random_model, RankSpec};
    use crate::projection::sample_projection;

    fn cfg(epsilon: f64, seed: u64) -> CompressionConfig {
        CompressionConfig::new(epsilon, seed).unwrap()
    }

    #[test]
    fn factored_gram_matches_dense_materialization() {
        let m = random_model(3, 2, 3, 10, RankSpec { state: 2, effect: 2 }, 4).unwrap();
        let prepared = PreparedModel::new(&m).unwrap();
        for (seed, d) in [(0, 4), (1, 10), (2, 25)] {
            let c = prepared.sketch(ProjectionMatrix::sample(d, 10, seed, 0), 0.3).unwrap();
            let dense = c.materialize();
            let g = crate::models::gram(&dense.matrices().cloned().collect::<Vec<_>>()).unwrap();
            let scale = g.0.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            let diff = (&g.0 - c.gram()).abs().max();
            assert!(diff <= 1e-10 * scale, "d={d}: {diff}");
        }
    }

    #[test]
    fn factored_report_matches_dense_report() {
        let m = random_model(2, 2, 2, 8, RankSpec { state: 1, effect: 1 }, 9).unwrap();
        let out = compress_model_factored(&m, &cfg(0.5, 3), 12).unwrap();
        let dense = error_report(&m, &out.model.materialize(), out.report.epsilon).unwrap();
        assert_eq!(dense.pairs.len(), out.report.pairs.len());
        for (a, b) in dense.pairs.iter().zip(&out.report.pairs) {
            assert_eq!((a.a, a.b, a.bound), (b.a, b.b, b.bound));
            assert!((a.compressed - b.compressed).abs() < 1e-10);
        }
    }

    #[test]
    fn factored_violations_agree_with_dense_validation() {
        let m = random_model(2, 3, 2, 12, RankSpec { state: 1, effect: 4 }, 5).unwrap();
        let prepared = PreparedModel::new(&m).unwrap();
        let (mut saw_valid, mut saw_invalid) = (false, false);
        for seed in 0..40 {
            let c = prepared.sketch(ProjectionMatrix::sample(6, 12, seed, 0), 0.5).unwrap();
            let factored = c.violations().is_empty();
            let dense = validate_model(&c.materialize()).is_empty();
            assert_eq!(factored, dense, "seed {seed}");
            assert_eq!(factored, c.norm_events().iter().all(|&e| e));
            saw_valid |= factored;
            saw_invalid |= !factored;
        }
        assert!(saw_valid && saw_invalid);
    }

    #[test]
    fn square_sketch_gives_valid_model_with_bounds() {
        let m = random_model(3, 2, 2, 6, RankSpec { state: 2, effect: 1 }, 1).unwrap();
        let (out, cert, report) = compress_model(&m, &cfg(0.5, 8), 6).unwrap();
        assert!(validate_model(&out).is_empty());
        assert!(cert.max_violation_ratio <= 1.0 && report.max_violation_ratio() <= 1.0);
        assert!(cert.norm_events.iter().all(|&e| e));
        assert!(!cert.formula_satisfied);
    }

    #[test]
    fn single_outcome_model_is_trivially_normalized() {
        let m = random_model(1, 1, 1, 5, RankSpec { state: 2, effect: 1 }, 2).unwrap();
        let (out, cert, _) = compress_model(&m, &cfg(0.5, 0), 3).unwrap();
        assert_eq!(out.effect(0, 0), &HermitianMatrix::identity(3));
        assert_eq!(cert.attempts, 1);
        assert!((data_table(&out).unwrap().get(0, 0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_model_errors_within_promise() {
        let m = binary_rank_one_model(4, 3, 16, 6).unwrap();
        let eps = 0.5;
        let out = compress_model_factored(&m, &cfg(eps, 2), 16).unwrap();
        let t0 = data_table(&m).unwrap();
        let t1 = out.model.data_table().unwrap();
        assert!(t0.max_abs_diff(&t1).unwrap() <= 200.0 * out.report.epsilon);
        assert!(out.report.max_error(PairClass::StateMeasurement) <= 200.0 * eps);
    }

    #[test]
    fn rows_stay_normalized() {
        let m = random_model(3, 2, 3, 9, RankSpec { state: 1, effect: 2 }, 8).unwrap();
        let out = compress_model_factored(&m, &cfg(0.4, 1), 7).unwrap();
        let g = out.model.gram();
        let s = Shape::of(&m);
        for x in 0..3 {
            for y in 0..2 {
                let total: f64 = (0..3).map(|z| g[(x, s.effect(y, z))]).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn event_check_cases() {
        let m = random_model(1, 1, 1, 4, RankSpec { state: 1, effect: 1 }, 0).unwrap();
        assert_eq!(event_norm_check(&sample_projection(2, 4, 0), &m, 0.1).unwrap(), vec![true]);
        // Σ_{z<Z} E = I on C^64 sketched to d = 4 has norm near 64/4.
        let basis = basis_measurement_model(64);
        let fails =
            (0..50).filter(|&s| !event_norm_check(&sample_projection(4, 64, s), &basis, 0.5).unwrap()[0]).count();
        assert!(fails >= 45, "{fails}");
        assert!(event_norm_check(&sample_projection(4, 63, 0), &basis, 0.5).is_err());
    }

    #[test]
    fn rank_one_event_frequency_meets_bound() {
        let (eps, d) = (0.5, 128usize);
        let m = binary_rank_one_model(1, 1, 32, 3).unwrap();
        let trials = 200;
        let held = (0..trials).filter(|&s| event_norm_check(&sample_projection(d, 32, s), &m, eps).unwrap()[0]).count();
        let p = 1.0 - d as f64 * (-eps * eps * d as f64 / 32.0).exp();
        let sigma = (p.max(0.0) * (1.0 - p.max(0.0)) / trials as f64).sqrt().max(1.0 / trials as f64);
        assert!(held as f64 / trials as f64 >= p - 3.0 * sigma, "{held}/{trials} vs {p}");
    }

    #[test]
    fn invalid_input_is_rejected() {
        let (dim, mut states, meas) = basis_measurement_model(3).into_parts();
        states[0] = states[0].scaled(0.5);
        let m = QuantumModel::new(dim, states, meas).unwrap();
        assert!(matches!(compress_model(&m, &cfg(0.5, 0), 3), Err(CompressError::InvalidModel(_))));
    }

    #[test]
    fn exhausted_retries_report_diagnostics() {
        let m = basis_measurement_model(32);
        let c = CompressionConfig::with_retries(0.1, 0, 3).unwrap();
        match compress_model(&m, &c, 2) {
            Err(CompressError::RetriesExhausted { attempts, failed_events, .. }) => {
                assert_eq!((attempts, failed_events), (3, 3));
            }
            other => panic!("{other:?}"),
        }
    }
}
