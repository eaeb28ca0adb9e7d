//! Spectral tails: fitting `(j*, b)`, the block decomposition and the tail
//! pipeline. The map is the same as for models; only the dimension
//! requirement changes.

use super::model::{run_model, ModelCompression, PreparedModel};
use super::{Certification, CompressError, CompressionCertificate, CompressionReport};
use crate::models::QuantumModel;
use crate::numerics::{self, HermitianMatrix, NumericsError};
use crate::projection::{self, CompressionConfig, EffectiveEpsilon, Regime};

/// Cap on `b` for tails that are identically zero.
pub const B_MAX: f64 = 50.0;
/// Leading entries within this of 1 count as 1 when `j*` is inferred.
pub const TAIL_ONE_TOL: f64 = 1e-9;
/// Eigenvalues at most this fraction of the largest are flushed to zero.
const SPECTRUM_FLUSH: f64 = 1e-12;
/// Relative slack when [`compress_model_tail`] re-checks a profile.
const PROFILE_SLACK: f64 = 1e-9;
/// Allowed increase between consecutive entries of a "descending" spectrum.
const ORDER_TOL: f64 = 1e-12;

/// Decay certificate `ε_{j*+j} ≤ e^{−bj}` for all `j ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailProfile {
    pub j_star: usize,
    pub b: f64,
}

/// Descending eigenvalues of `e` with entries up to `1e-12 · λ_max` (and
/// negative rounding noise) set to zero.
pub fn tail_spectrum(e: &HermitianMatrix) -> Vec<f64> {
    let mut ev = numerics::eigenvalues(e);
    let cut = SPECTRUM_FLUSH * ev.first().copied().unwrap_or(0.0).max(0.0);
    for v in &mut ev {
        if *v <= cut {
            *v = 0.0;
        }
    }
    ev
}

/// Whether `ε_{j*+j} ≤ e^{−bj}(1 + rel_slack)` for every `j ≥ 1` in range.
pub fn profile_holds(spectrum: &[f64], profile: TailProfile, rel_slack: f64) -> bool {
    spectrum
        .iter()
        .skip(profile.j_star)
        .enumerate()
        .all(|(i, &v)| v <= 0.0 || v <= (-profile.b * (i + 1) as f64).exp() * (1.0 + rel_slack))
}

/// Largest `b ≤ B_MAX` with `ε_{j*+j} ≤ e^{−bj}` for all `j`, and `j*` itself
/// when no hint is given (the number of leading entries equal to 1 within
/// [`TAIL_ONE_TOL`]). The result satisfies [`profile_holds`] with zero slack.
pub fn tail_fit(spectrum: &[f64], j_star_hint: Option<usize>) -> Result<TailProfile, CompressError> {
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(CompressError::Precondition("spectrum has non-finite entries".into()));
    }
    let top = spectrum.first().copied().unwrap_or(0.0).abs().max(1.0);
    if spectrum.windows(2).any(|w| w[1] > w[0] + ORDER_TOL * top) {
        return Err(CompressError::Precondition("spectrum is not sorted descending".into()));
    }
    let j_star = match j_star_hint {
        Some(j) => j,
        None => {
            let j = spectrum.iter().take_while(|&&v| v >= 1.0 - TAIL_ONE_TOL).count();
            if j == spectrum.len() {
                return Err(CompressError::NoTailFit("every entry is 1".into()));
            }
            j
        }
    };
    let tail = spectrum.get(j_star..).unwrap_or(&[]);
    if let Some(i) = tail.iter().position(|&v| v >= 1.0) {
        return Err(CompressError::NoTailFit(format!(
            "entry {} = {} after j* = {j_star} is not below 1",
            j_star + i,
            tail[i]
        )));
    }
    let mut b = B_MAX;
    for (i, &v) in tail.iter().enumerate() {
        if v > 0.0 {
            b = b.min(-v.ln() / (i + 1) as f64);
        }
    }
    // ln and exp are not exact inverses; step down until the invariant holds.
    for (i, &v) in tail.iter().enumerate() {
        while v > 0.0 && v > (-b * (i + 1) as f64).exp() {
            b = b.next_down();
        }
    }
    if !(b > 0.0) {
        return Err(CompressError::NoTailFit(format!("fitted rate {b} is not positive")));
    }
    Ok(TailProfile { j_star, b })
}

/// `r = ⌈ln(8/ε)/b⌉`, at least 1.
pub fn block_size(epsilon: f64, b: f64) -> usize {
    ((8.0 / epsilon).ln() / b).ceil().max(1.0) as usize
}

/// `E = Σ_i E^(i)`: `E^(0)` holds the top `j* + r` eigenpairs and `E^(i)` the
/// next `r` for `i ≥ 1`. Eigenpairs below numerical rank go to the last
/// block, so the blocks always sum to `E`.
pub fn block_split(e: &HermitianMatrix, j_star: usize, r: usize) -> Result<Vec<HermitianMatrix>, NumericsError> {
    let eig = numerics::eigh(e)?;
    let rank = numerics::rank_of_spectrum(&eig.eigenvalues, numerics::RANK_TOL);
    let head = j_star + r;
    if rank <= head || r == 0 {
        return Ok(vec![e.clone()]);
    }
    let n = eig.len();
    let mut bounds = vec![0, head];
    while *bounds.last().unwrap() < rank {
        bounds.push(bounds.last().unwrap() + r);
    }
    *bounds.last_mut().unwrap() = n;
    Ok(bounds.windows(2).map(|w| eig.partial_sum(w[0]..w[1])).collect())
}

fn tail_certification(
    prepared: &PreparedModel,
    epsilon: f64,
    d: usize,
    profiles: &[TailProfile],
) -> Result<Certification, CompressError> {
    let m = prepared.model();
    if profiles.len() != m.num_measurements() {
        return Err(CompressError::Precondition(format!(
            "{} profiles for {} measurements",
            profiles.len(),
            m.num_measurements()
        )));
    }
    let (j, big_d) = (m.num_matrices(), m.dim());
    let mut required = 0;
    let mut effective: Option<EffectiveEpsilon> = None;
    for (y, &p) in profiles.iter().enumerate() {
        let spectrum = tail_spectrum(&m.small_outcome_sum(y));
        if !profile_holds(&spectrum, p, PROFILE_SLACK) {
            return Err(CompressError::Precondition(format!(
                "profile (j* = {}, b = {}) does not bound the spectrum of measurement {y}",
                p.j_star, p.b
            )));
        }
        required = required.max(projection::dim_for_tail(epsilon, j, big_d, p.j_star, p.b)?);
        let e = projection::epsilon_for_dim(d, j, big_d, Regime::Tail { j_star: p.j_star, b: p.b })?;
        if effective.map_or(true, |best| e.value > best.value) {
            effective = Some(e);
        }
    }
    let effective = effective.expect("models have at least one measurement");
    Ok(Certification::new(epsilon, d, required, effective))
}

/// The model map with the spectral-tail dimension requirement.
pub fn compress_model_tail_factored(
    m: &QuantumModel,
    cfg: &CompressionConfig,
    d: usize,
    profiles: &[TailProfile],
) -> Result<ModelCompression, CompressError> {
    let prepared = PreparedModel::new(m)?;
    let cert = tail_certification(&prepared, cfg.epsilon, d, profiles)?;
    run_model(&prepared, cfg, d, cert, |_, _| true)
}

pub fn compress_model_tail(
    m: &QuantumModel,
    cfg: &CompressionConfig,
    d: usize,
    profiles: &[TailProfile],
) -> Result<(QuantumModel, CompressionCertificate, CompressionReport), CompressError> {
    let out = compress_model_tail_factored(m, cfg, d, profiles)?;
    Ok((out.model.materialize(), out.certificate, out.report))
}
