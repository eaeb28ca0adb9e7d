//! Complex Gaussian sketches, the JL check and the dimension formulas.

use thiserror::Error;

use crate::numerics::{self, CMatrix, CVector, HermitianMatrix};
use crate::rng::{Gaussian, PROJECTION_INDEX};

/// Largest ε the compression guarantees allow.
pub const MAX_EPSILON: f64 = 0.5;

/// Norms below this are treated as the zero vector by [`jl_check`].
pub const JL_ZERO_NORM: f64 = 1e-14;

pub const DEFAULT_MAX_RETRIES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
}

fn domain(msg: impl Into<String>) -> ProjectionError {
    ProjectionError::Domain(msg.into())
}

/// The `d × D` sketch `Π = G/√(2d)`, `G_jk = S + iT` with `S, T ~ N(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    seed: u64,
    attempt: u64,
    entries: CMatrix,
}

/// Draws `Π` from attempt 0 of `seed`.
pub fn sample_projection(d: usize, big_d: usize, seed: u64) -> ProjectionMatrix {
    ProjectionMatrix::sample(d, big_d, seed, 0)
}

impl ProjectionMatrix {
    /// Draws `Π` from the projection sub-stream of `(seed, attempt)`.
    pub fn sample(d: usize, big_d: usize, seed: u64, attempt: u64) -> Self {
        assert!(d >= 1 && big_d >= 1, "sketch dimensions must be positive");
        let mut g = Gaussian::stream(seed, attempt, PROJECTION_INDEX);
        let scale = 1.0 / (2.0 * d as f64).sqrt();
        let mut entries = CMatrix::zeros(d, big_d);
        for j in 0..d {
            for k in 0..big_d {
                entries[(j, k)] = g.complex_normal() * scale;
            }
        }
        Self { seed, attempt, entries }
    }

    /// Output dimension `d`.
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    /// Input dimension `D`.
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn attempt(&self) -> u64 {
        self.attempt
    }

    /// Rebuilds a stored sketch. `seed` and `attempt` are kept as provenance
    /// and are not checked against the entries.
    pub fn from_parts(seed: u64, attempt: u64, entries: CMatrix) -> Result<Self, ProjectionError> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(domain("sketch dimensions must be positive"));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("sketch has non-finite entries"));
        }
        Ok(Self { seed, attempt, entries })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector, ProjectionError> {
        if v.len() != self.cols() {
            return Err(ProjectionError::DimMismatch { expected: self.cols(), got: v.len() });
        }
        Ok(&self.entries * v)
    }

    /// `Π H Π†`.
    pub fn compress(&self, h: &HermitianMatrix) -> Result<HermitianMatrix, ProjectionError> {
        if h.dim() != self.cols() {
            return Err(ProjectionError::DimMismatch { expected: self.cols(), got: h.dim() });
        }
        Ok(numerics::sandwich(&self.entries, h))
    }

    /// `Π†Π`, a `D × D` Hermitian matrix.
    pub fn gram(&self) -> HermitianMatrix {
        let k = numerics::matmul(&self.entries.adjoint(), &self.entries);
        HermitianMatrix::hermitian_part(&k).expect("square")
    }
}

/// Target accuracy, seed and retry budget shared by the compression pipelines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressionConfig {
    pub epsilon: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl CompressionConfig {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self, ProjectionError> {
        Self::with_retries(epsilon, seed, DEFAULT_MAX_RETRIES)
    }

    pub fn with_retries(epsilon: f64, seed: u64, max_retries: usize) -> Result<Self, ProjectionError> {
        check_epsilon(epsilon)?;
        if max_retries == 0 {
            return Err(domain("max_retries must be positive"));
        }
        Ok(Self { epsilon, seed, max_retries })
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), ProjectionError> {
    if !(epsilon > 0.0 && epsilon <= MAX_EPSILON) {
        return Err(domain(format!("epsilon {epsilon} outside (0, 1/2]")));
    }
    Ok(())
}

fn check_counts(j: usize, big_d: usize) -> Result<(), ProjectionError> {
    if j == 0 || big_d == 0 {
        return Err(domain(format!("J = {j} and D = {big_d} must be positive")));
    }
    Ok(())
}

/// Which vector of the polar family a condition tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JlVector {
    Single(usize),
    Sum(usize, usize),
    Difference(usize, usize),
    /// `v_i + i·v_j`.
    ImagSum(usize, usize),
    /// `v_i − i·v_j`.
    ImagDifference(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JlCondition {
    pub vector: JlVector,
    pub norm: f64,
    pub image_norm: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JlReport {
    pub epsilon: f64,
    pub conditions: Vec<JlCondition>,
}

impl JlReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &JlCondition> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

/// Checks `‖Πw‖ ∈ [(1−ε)‖w‖, (1+ε)‖w‖]` for every `w` in the polar family of
/// `vectors`: each `v_i`, and `v_i ± v_j`, `v_i ± i·v_j` for `i < j`.
pub fn jl_check(p: &ProjectionMatrix, vectors: &[CVector], epsilon: f64) -> Result<JlReport, ProjectionError> {
    let images = vectors.iter().map(|v| p.apply(v)).collect::<Result<Vec<_>, _>>()?;
    let i_unit = num_complex::Complex64::new(0.0, 1.0);
    let check = |vector, w: CVector, pw: CVector| {
        let norm = numerics::vector_norm(&w);
        let image_norm = numerics::vector_norm(&pw);
        let passed =
            norm < JL_ZERO_NORM || ((1.0 - epsilon) * norm <= image_norm && image_norm <= (1.0 + epsilon) * norm);
        JlCondition { vector, norm, image_norm, passed }
    };
    let mut conditions = Vec::new();
    for (i, (v, pv)) in vectors.iter().zip(&images).enumerate() {
        conditions.push(check(JlVector::Single(i), v.clone(), pv.clone()));
    }
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let (vi, vj, pi, pj) = (&vectors[i], &vectors[j], &images[i], &images[j]);
            conditions.push(check(JlVector::Sum(i, j), vi + vj, pi + pj));
            conditions.push(check(JlVector::Difference(i, j), vi - vj, pi - pj));
            conditions.push(check(JlVector::ImagSum(i, j), vi + vj * i_unit, pi + pj * i_unit));
            conditions.push(check(JlVector::ImagDifference(i, j), vi - vj * i_unit, pi - pj * i_unit));
        }
    }
    Ok(JlReport { epsilon, conditions })
}

/// Smallest integer strictly above `x`.
fn strictly_above(x: f64) -> Result<usize, ProjectionError> {
    to_dim(x.floor() + 1.0)
}

fn at_least(x: f64) -> Result<usize, ProjectionError> {
    to_dim(x.ceil().max(1.0))
}

fn to_dim(x: f64) -> Result<usize, ProjectionError> {
    if !x.is_finite() || x >= usize::MAX as f64 {
        return Err(domain(format!("required dimension {x} is not representable")));
    }
    Ok(x as usize)
}

/// `d > 16/ε² ln(2JD)` for psd factorizations.
pub fn dim_for_psd(epsilon: f64, j: usize, big_d: usize) -> Result<usize, ProjectionError> {
    check_epsilon(epsilon)?;
    check_counts(j, big_d)?;
    strictly_above(16.0 / (epsilon * epsilon) * (2.0 * j as f64 * big_d as f64).ln())
}

/// `d > 32/ε² ln(4JD)` and `d > 32/ε² · max_rank` for quantum models.
pub fn dim_for_model(epsilon: f64, j: usize, big_d: usize, max_rank: usize) -> Result<usize, ProjectionError> {
    check_epsilon(epsilon)?;
    check_counts(j, big_d)?;
    let c = 32.0 / (epsilon * epsilon);
    let jl = c * (4.0 * j as f64 * big_d as f64).ln();
    strictly_above(jl.max(c * max_rank as f64))
}

/// `d ≥ 128/ε² ln(4JD)` and `d ≥ 128/ε² (j* + (1/b) ln(8/ε))` for spectral tails.
/// `b = ∞` drops the tail term.
pub fn dim_for_tail(epsilon: f64, j: usize, big_d: usize, j_star: usize, b: f64) -> Result<usize, ProjectionError> {
    check_epsilon(epsilon)?;
    check_counts(j, big_d)?;
    if !(b > 0.0) {
        return Err(domain(format!("tail rate b = {b} must be positive")));
    }
    let c = 128.0 / (epsilon * epsilon);
    let jl = c * (4.0 * j as f64 * big_d as f64).ln();
    let tail = c * (j_star as f64 + (8.0 / epsilon).ln() / b);
    at_least(jl.max(tail))
}

/// `d ≥ 1280000 r²/ε₁² · max(ln(4(2ⁿ + 2^{m+1})D), r)` for communication protocols.
pub fn dim_for_comm(epsilon1: f64, n: u32, m: u32, big_d: usize, r: usize) -> Result<usize, ProjectionError> {
    if !(epsilon1 > 0.0 && epsilon1 < 1.0) {
        return Err(domain(format!("epsilon1 {epsilon1} outside (0, 1)")));
    }
    if n == 0 || m == 0 || r == 0 || big_d == 0 {
        return Err(domain("n, m, r and D must be positive"));
    }
    let r = r as f64;
    let count = 2f64.powi(n as i32) + 2f64.powi(m as i32 + 1);
    let log = (4.0 * count * big_d as f64).ln();
    at_least(1_280_000.0 * r * r / (epsilon1 * epsilon1) * log.max(r))
}

/// Which dimension formula [`epsilon_for_dim`] inverts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    Psd,
    Model { max_rank: usize },
    Tail { j_star: usize, b: f64 },
}

/// ε bought by a given `d`. `value` is the raw inverse; `clamped` caps it
/// at 1/2 and `exceeds_half` records whether that happened.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveEpsilon {
    pub value: f64,
    pub clamped: f64,
    pub exceeds_half: bool,
}

impl EffectiveEpsilon {
    fn new(value: f64) -> Self {
        Self { value, clamped: value.min(MAX_EPSILON), exceeds_half: value > MAX_EPSILON }
    }
}

/// Smallest ε at which `d` meets the regime's inequalities (as equalities).
pub fn epsilon_for_dim(d: usize, j: usize, big_d: usize, regime: Regime) -> Result<EffectiveEpsilon, ProjectionError> {
    check_counts(j, big_d)?;
    if d == 0 {
        return Err(domain("d must be positive"));
    }
    let d = d as f64;
    let jd = j as f64 * big_d as f64;
    let value = match regime {
        Regime::Psd => (16.0 * (2.0 * jd).ln() / d).sqrt(),
        Regime::Model { max_rank } => {
            let jl = (32.0 * (4.0 * jd).ln() / d).sqrt();
            jl.max((32.0 * max_rank as f64 / d).sqrt())
        }
        Regime::Tail { j_star, b } => {
            if !(b > 0.0) {
                return Err(domain(format!("tail rate b = {b} must be positive")));
            }
            let jl = (128.0 * (4.0 * jd).ln() / d).sqrt();
            jl.max(tail_epsilon(d, j_star as f64, b))
        }
    };
    Ok(EffectiveEpsilon::new(value))
}

/// Root of `ε² d/128 = j* + ln(8/ε)/b`. The left side increases and the right
/// side decreases in ε, so bisection brackets a unique root.
fn tail_epsilon(d: f64, j_star: f64, b: f64) -> f64 {
    let f = |e: f64| e * e * d / 128.0 - j_star - (8.0 / e).ln() / b;
    let mut lo = f64::MIN_POSITIVE.sqrt();
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn unit_vectors(count: usize, dim: usize, seed: u64) -> Vec<CVector> {
        let mut g = Gaussian::stream(seed, 0, 99);
        (0..count)
            .map(|_| {
                let v = CVector::from_fn(dim, |_, _| g.complex_normal());
                v.unscale(numerics::vector_norm(&v))
            })
            .collect()
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_projection(5, 7, 3);
        assert_eq!(a, sample_projection(5, 7, 3));
        assert_ne!(a, sample_projection(5, 7, 4));
        assert_ne!(a.matrix(), ProjectionMatrix::sample(5, 7, 3, 1).matrix());
        assert_eq!((a.rows(), a.cols()), (5, 7));
    }

    #[test]
    fn squared_length_is_preserved_in_mean() {
        let v = CVector::from_element(1, Complex64::new(1.0, 0.0));
        let n = 10_000;
        let mean: f64 =
            (0..n).map(|s| numerics::vector_norm(&sample_projection(1, 1, s).apply(&v).unwrap()).powi(2)).sum::<f64>()
                / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn gram_diagonal_is_near_one_for_large_d() {
        let k = sample_projection(512, 8, 9).gram();
        let mean: f64 = (0..8).map(|i| k.entry(i, i).re).sum::<f64>() / 8.0;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn zero_vector_is_vacuous() {
        let p = sample_projection(2, 4, 0);
        let r = jl_check(&p, &[CVector::zeros(4)], 0.1).unwrap();
        assert_eq!(r.conditions.len(), 1);
        assert!(r.all_passed());
    }

    #[test]
    fn repeated_vector_gives_vacuous_difference() {
        let v = unit_vectors(1, 6, 1).remove(0);
        let p = sample_projection(300, 6, 2);
        let r = jl_check(&p, &[v.clone(), v], 0.5).unwrap();
        assert_eq!(r.conditions.len(), 6);
        let diff = r.conditions.iter().find(|c| c.vector == JlVector::Difference(0, 1)).unwrap();
        assert!(diff.norm < JL_ZERO_NORM && diff.passed);
    }

    #[test]
    fn jl_rejects_wrong_dimension() {
        let p = sample_projection(2, 4, 0);
        assert!(matches!(jl_check(&p, &[CVector::zeros(3)], 0.1), Err(ProjectionError::DimMismatch { .. })));
    }

    #[test]
    fn jl_holds_at_sized_dimension() {
        // d ≥ (8/ε²) ln(4S²/δ) with S = 10, δ = 1/10.
        let (eps, s) = (0.5, 10usize);
        let d = (8.0 / (eps * eps) * (4.0 * (s * s) as f64 * 10.0).ln()).ceil() as usize;
        let vectors = unit_vectors(s, 16, 5);
        let passes = (0..100)
            .filter(|&seed| jl_check(&sample_projection(d, 16, seed), &vectors, eps).unwrap().all_passed())
            .count();
        assert!(passes >= 90, "{passes}/100");
    }

    #[test]
    fn jl_fails_at_tiny_dimension() {
        let vectors = unit_vectors(20, 64, 6);
        let failures = (0..100)
            .filter(|&seed| !jl_check(&sample_projection(2, 64, seed), &vectors, 0.1).unwrap().all_passed())
            .count();
        assert!(failures >= 1);
    }

    #[test]
    fn dimension_formula_values() {
        // Oracles: the formulas evaluated directly.
        assert_eq!(dim_for_psd(0.5, 10, 1024).unwrap(), (64.0 * 20480f64.ln()).floor() as usize + 1);
        assert_eq!(dim_for_psd(0.5, 10, 1024).unwrap(), 636);
        assert_eq!(dim_for_psd(0.5, 1, 1).unwrap(), 45);
        assert_eq!(dim_for_model(0.5, 2, 2, 1).unwrap(), 355);
        assert_eq!(dim_for_model(0.5, 2, 2, 100).unwrap(), 12801);
        let tail = (512.0 * 16f64.ln()).ceil().max((512.0 * (4.0 + 2.0 * 16f64.ln())).ceil());
        assert_eq!(dim_for_tail(0.5, 2, 2, 4, 0.5).unwrap(), tail as usize);
        assert_eq!(dim_for_comm(0.1, 1, 1, 2, 1).unwrap(), (1.28e8 * 48f64.ln()).ceil() as usize);
    }

    #[test]
    fn dimension_formula_domains() {
        assert!(dim_for_psd(0.0, 1, 1).is_err());
        assert!(dim_for_psd(0.6, 1, 1).is_err());
        assert!(dim_for_psd(0.5, 0, 1).is_err());
        assert!(dim_for_tail(0.5, 1, 1, 0, 0.0).is_err());
        assert!(dim_for_comm(1.0, 1, 1, 2, 1).is_err());
        assert!(dim_for_comm(0.1, 0, 1, 2, 1).is_err());
    }

    #[test]
    fn tail_limits() {
        let jl = (512.0 * (4.0 * 4.0f64).ln()).ceil() as usize;
        assert_eq!(dim_for_tail(0.5, 2, 2, 0, f64::INFINITY).unwrap(), jl);
        assert!(dim_for_tail(0.5, 2, 2, 0, 1e6).unwrap() <= jl + 1);
    }

    #[test]
    fn comm_scaling() {
        let base = dim_for_comm(0.1, 1, 1, 2, 10).unwrap();
        let big = dim_for_comm(0.1, 1, 1, 2, 20).unwrap();
        assert_eq!(base, (1.28e8 * 1000.0_f64).ceil() as usize);
        assert_eq!(big, 8 * base);
        let doubled = dim_for_comm(0.2, 1, 1, 2, 1).unwrap();
        let single = dim_for_comm(0.1, 1, 1, 2, 1).unwrap();
        assert!(doubled.abs_diff(single / 4) <= 1);
    }

    #[test]
    fn epsilon_inverts_dimension() {
        let e = epsilon_for_dim(636, 10, 1024, Regime::Psd).unwrap();
        assert!((e.value - (16.0 * 20480f64.ln() / 636.0).sqrt()).abs() < 1e-15);
        assert!((e.value - 0.4997).abs() < 1e-4 && !e.exceeds_half);
        let small = epsilon_for_dim(8, 10, 1024, Regime::Psd).unwrap();
        assert!(small.exceeds_half && small.clamped == 0.5 && small.value > 0.5);
    }

    #[test]
    fn model_regime_reports_binding_branch() {
        let d = 1000;
        let jl = (32.0 * (4.0 * 4.0f64).ln() / d as f64).sqrt();
        let rank = (32.0 * 100.0 / d as f64).sqrt();
        let e = epsilon_for_dim(d, 2, 2, Regime::Model { max_rank: 100 }).unwrap();
        assert_eq!(e.value, rank.max(jl));
        assert_eq!(e.value, rank);
        let e = epsilon_for_dim(d, 2, 2, Regime::Model { max_rank: 1 }).unwrap();
        assert_eq!(e.value, jl);
    }

    #[test]
    fn tail_regime_solves_implicit_equation() {
        let d = dim_for_tail(0.5, 8, 32, 4, 0.5).unwrap();
        let e = epsilon_for_dim(d, 8, 32, Regime::Tail { j_star: 4, b: 0.5 }).unwrap();
        assert!(e.value <= 0.5 && e.value > 0.49, "{}", e.value);
        let lhs = e.value * e.value * d as f64 / 128.0;
        let rhs = 4.0 + (8.0 / e.value).ln() / 0.5;
        assert!((lhs - rhs).abs() < 1e-9 || e.value == (128.0 * 1024f64.ln() / d as f64).sqrt());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn formulas_are_monotone(
                e1 in 0.01f64..0.5, e2 in 0.01f64..0.5, j in 1usize..50, big_d in 1usize..5000,
                rank in 0usize..40, j_star in 0usize..20, b in 0.05f64..10.0,
            ) {
                let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
                prop_assert!(dim_for_psd(hi, j, big_d).unwrap() <= dim_for_psd(lo, j, big_d).unwrap());
                prop_assert!(dim_for_psd(lo, j, big_d).unwrap() <= dim_for_psd(lo, j + 1, big_d).unwrap());
                prop_assert!(dim_for_psd(lo, j, big_d).unwrap() <= dim_for_psd(lo, j, 2 * big_d).unwrap());
                prop_assert!(dim_for_model(hi, j, big_d, rank).unwrap() <= dim_for_model(lo, j, big_d, rank).unwrap());
                prop_assert!(dim_for_model(lo, j, big_d, rank).unwrap() <= dim_for_model(lo, j, big_d, rank + 1).unwrap());
                prop_assert!(dim_for_model(lo, j, big_d, rank).unwrap() as f64 > 32.0 / (lo * lo) * rank as f64);
                prop_assert!(dim_for_tail(hi, j, big_d, j_star, b).unwrap() <= dim_for_tail(lo, j, big_d, j_star, b).unwrap());
                prop_assert!(dim_for_tail(lo, j, big_d, j_star, 2.0 * b).unwrap() <= dim_for_tail(lo, j, big_d, j_star, b).unwrap());
                prop_assert!(dim_for_tail(lo, j, big_d, j_star, b).unwrap() <= dim_for_tail(lo, j, big_d, j_star + 1, b).unwrap());
                prop_assert!(dim_for_tail(lo, j, big_d, j_star, b).unwrap() <= dim_for_tail(lo, j, 2 * big_d, j_star, b).unwrap());
            }

            #[test]
            fn inverse_pairs(e in 0.01f64..0.5, j in 1usize..50, big_d in 1usize..5000, rank in 0usize..40, j_star in 0usize..10, b in 0.05f64..10.0) {
                let d = dim_for_psd(e, j, big_d).unwrap();
                prop_assert!(epsilon_for_dim(d, j, big_d, Regime::Psd).unwrap().value <= e);
                let d = dim_for_model(e, j, big_d, rank).unwrap();
                let model = Regime::Model { max_rank: rank };
                prop_assert!(epsilon_for_dim(d, j, big_d, model).unwrap().value <= e);
                let d = dim_for_tail(e, j, big_d, j_star, b).unwrap();
                let tail = Regime::Tail { j_star, b };
                prop_assert!(epsilon_for_dim(d, j, big_d, tail).unwrap().value <= e * (1.0 + 1e-12));
            }
        }
    }
}
