use super::report::{psd_error_report, PSD_BOUND_CONSTANT};
use super::{Certification, CompressError, CompressionCertificate};
use crate::models::PsdFactorization;
use crate::numerics;
use crate::projection::{self, CompressionConfig, ProjectionMatrix, Regime};

/// Maps every factor to `Π M Π†` and checks all `J²` pairs against
/// `192 ε tr(M_i) tr(M_j)`, redrawing `Π` on failure.
///
/// The outputs are psd by construction and are not re-validated.
pub fn compress_psd(
    f: &PsdFactorization,
    cfg: &CompressionConfig,
    d: usize,
) -> Result<(PsdFactorization, CompressionCertificate), CompressError> {
    let (j, big_d) = (f.num_matrices(), f.dim());
    if j == 0 {
        return Err(CompressError::Precondition("factorization has no matrices".into()));
    }
    if d == 0 {
        return Err(CompressError::Precondition("sketch dimension must be positive".into()));
    }
    let required = projection::dim_for_psd(cfg.epsilon, j, big_d)?;
    let effective = projection::epsilon_for_dim(d, j, big_d, Regime::Psd)?;
    let cert = Certification::new(cfg.epsilon, d, required, effective);
    let mut best = f64::INFINITY;
    for attempt in 0..cfg.max_retries {
        let p = ProjectionMatrix::sample(d, big_d, cfg.seed, attempt as u64);
        let sketch =
            |ms: &[numerics::HermitianMatrix]| ms.iter().map(|m| numerics::sandwich(p.matrix(), m)).collect::<Vec<_>>();
        let out = PsdFactorization::from_sketches(d, sketch(f.left()), sketch(f.right()));
        let report = psd_error_report(f, &out, cert.certified_epsilon)?;
        let ratio = report.max_violation_ratio();
        best = best.min(ratio);
        if ratio <= 1.0 {
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
                norm_events: Vec::new(),
                promised_bound_constant: PSD_BOUND_CONSTANT,
                max_violation_ratio: ratio,
            };
            return Ok((out, certificate));
        }
    }
    Err(CompressError::RetriesExhausted {
        attempts: cfg.max_retries,
        failed_events: 0,
        degenerate: 0,
        best_violation_ratio: best,
    })
}
