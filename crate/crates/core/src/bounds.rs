//! Dimension lower bounds from data tables and the one-way communication
//! compression planner.

use thiserror::Error;

use crate::compressor::{
    run_model, Certification, CompressError, CompressedModel, CompressionCertificate, CompressionReport, PairClass,
    PreparedModel,
};
use crate::models::{ModelError, QuantumModel};
use crate::numerics::{self, HermitianMatrix};
use crate::projection::{self, CompressionConfig, ProjectionError, Regime};

/// Tolerance on the protocol's `ε₀` promise.
pub const PROMISE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("invalid protocol: {0}")]
    Protocol(String),
    #[error("protocol misses its error promise at (x={x}, y={y}): error {error} > ε₀ = {eps0}")]
    Promise { x: usize, y: usize, error: f64, eps0: f64 },
}

/// Column maxima `c*_z = max_x D[x; y, z]` and their sums per measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundReport {
    /// `column_maxima[y][z]`.
    pub column_maxima: Vec<Vec<f64>>,
    /// `l_y = Σ_z c*_z`.
    pub per_measurement: Vec<f64>,
    /// `l = max_y l_y`.
    pub bound: f64,
    pub num_outcomes: usize,
}

/// Noise-adjusted bound `l − Z ε_noise`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyBound {
    pub raw: f64,
    /// `raw` floored at 0.
    pub value: f64,
}

impl LowerBoundReport {
    pub fn noisy(&self, eps_noise: f64) -> NoisyBound {
        let z = self.num_outcomes as f64;
        let raw = self.per_measurement.iter().map(|l| l - z * eps_noise).fold(f64::NEG_INFINITY, f64::max);
        NoisyBound { raw, value: raw.max(0.0) }
    }
}

/// Any model reproducing `t` has dimension at least `bound`.
pub fn lower_bound(t: &crate::models::DataTable) -> LowerBoundReport {
    let (nx, ny, nz) = (t.num_inputs(), t.num_measurements(), t.num_outcomes());
    let column_maxima: Vec<Vec<f64>> = (0..ny)
        .map(|y| (0..nz).map(|z| (0..nx).map(|x| t.get(x, y, z)).fold(f64::NEG_INFINITY, f64::max)).collect())
        .collect();
    let per_measurement: Vec<f64> = column_maxima.iter().map(|c| c.iter().sum()).collect();
    let bound = per_measurement.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    LowerBoundReport { column_maxima, per_measurement, bound, num_outcomes: nz }
}

/// `max_y (l_y − Z ε_noise)`, floored at 0.
pub fn noisy_lower_bound(t: &crate::models::DataTable, eps_noise: f64) -> f64 {
    lower_bound(t).noisy(eps_noise).value
}

/// `f(x, y)` for `x < 2ⁿ`, `y < 2ᵐ`, stored row-major by `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    n: u32,
    m: u32,
    values: Vec<bool>,
}

impl TruthTable {
    pub fn new(n: u32, m: u32, values: Vec<bool>) -> Result<Self, BoundsError> {
        if n == 0 || m == 0 || n > 20 || m > 20 {
            return Err(BoundsError::Protocol(format!("input sizes n = {n}, m = {m} outside 1..=20")));
        }
        if values.len() != 1 << (n + m) {
            return Err(BoundsError::Protocol(format!("{} values for n = {n}, m = {m}", values.len())));
        }
        Ok(Self { n, m, values })
    }

    pub fn from_fn(n: u32, m: u32, f: impl Fn(usize, usize) -> bool) -> Result<Self, BoundsError> {
        let values =
            (0..1usize << n).flat_map(|x| (0..1usize << m).map(move |y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(n, m, values)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[(x << self.m) + y]
    }
}

/// `n`-bit equality with the `2ⁿ`-dimensional basis protocol: Alice sends
/// `|x⟩`, Bob measures `{|y⟩⟨y|, I − |y⟩⟨y|}`. Outcome 0 means "equal".
pub fn equality_protocol(n: u32) -> Result<(TruthTable, QuantumModel), BoundsError> {
    let table = TruthTable::from_fn(n, n, |x, y| x == y)?;
    let dim = 1usize << n;
    let states: Vec<_> = (0..dim).map(|k| HermitianMatrix::basis_projector(dim, k)).collect();
    let identity = HermitianMatrix::identity(dim);
    let measurements = states.iter().map(|p| vec![p.clone(), identity.checked_sub(p).expect("same dim")]).collect();
    Ok((table, QuantumModel::new(dim, states.clone(), measurements)?))
}

/// Parameters for compressing a one-way protocol. Outcome 0 of each
/// measurement is the answer "f = 1".
#[derive(Clone, Debug, PartialEq)]
pub struct CommPlan {
    pub n: u32,
    pub m: u32,
    pub table: TruthTable,
    pub dim: usize,
    /// `max_y min_z rank E_yz`, at least 1.
    pub r: usize,
    pub eps0: f64,
    pub eps1: f64,
    /// Measurements whose two outcomes are swapped so the low-rank element
    /// comes first.
    pub swapped: Vec<bool>,
    pub required_dim: usize,
}

impl CommPlan {
    /// `ε = ε₁ / (200 r)`, the accuracy handed to the model pipeline.
    pub fn internal_epsilon(&self) -> f64 {
        self.eps1 / (200.0 * self.r as f64)
    }
}

fn protocol_error(table: &TruthTable, p_one: f64, x: usize, y: usize) -> f64 {
    if table.get(x, y) {
        1.0 - p_one
    } else {
        p_one
    }
}

/// Checks the protocol against its `ε₀` promise and plans the compression.
pub fn comm_plan(table: &TruthTable, protocol: &QuantumModel, eps0: f64, eps1: f64) -> Result<CommPlan, BoundsError> {
    if !(eps1 > 0.0 && eps1 < 1.0) || !(eps0 >= 0.0) || !(eps0 + eps1 < 0.5) {
        return Err(BoundsError::Protocol(format!("need ε₀ ≥ 0, ε₁ ∈ (0, 1), ε₀ + ε₁ < 1/2 (got {eps0}, {eps1})")));
    }
    let (nx, ny) = (1usize << table.n, 1usize << table.m);
    if protocol.num_states() != nx || protocol.num_measurements() != ny || protocol.num_outcomes() != 2 {
        return Err(BoundsError::Protocol(format!(
            "protocol has {} states, {} measurements, {} outcomes; table needs {nx}, {ny}, 2",
            protocol.num_states(),
            protocol.num_measurements(),
            protocol.num_outcomes()
        )));
    }
    let t = crate::models::data_table(protocol)?;
    for x in 0..nx {
        for y in 0..ny {
            let error = protocol_error(table, t.get(x, y, 0), x, y);
            if error > eps0 + PROMISE_TOL {
                return Err(BoundsError::Promise { x, y, error, eps0 });
            }
        }
    }
    let mut r = 0;
    let mut swapped = Vec::with_capacity(ny);
    for povm in protocol.measurements() {
        let r0 = numerics::numerical_rank(&povm[0], numerics::RANK_TOL);
        let r1 = numerics::numerical_rank(&povm[1], numerics::RANK_TOL);
        r = r.max(r0.min(r1));
        swapped.push(r0 > r1);
    }
    let r = r.max(1);
    let required_dim = projection::dim_for_comm(eps1, table.n, table.m, protocol.dim(), r)?;
    Ok(CommPlan {
        n: table.n,
        m: table.m,
        table: table.clone(),
        dim: protocol.dim(),
        r,
        eps0,
        eps1,
        swapped,
        required_dim,
    })
}

fn permuted(plan: &CommPlan, protocol: &QuantumModel) -> Result<QuantumModel, BoundsError> {
    let mut out = protocol.clone();
    for (y, &s) in plan.swapped.iter().enumerate() {
        if s {
            out = out.with_permuted_outcomes(y, &[1, 0])?;
        }
    }
    Ok(out)
}

/// Accepted compression of a protocol.
#[derive(Clone, Debug)]
pub struct CommCompression {
    pub model: CompressedModel,
    pub certificate: CompressionCertificate,
    pub report: CompressionReport,
    /// `max_{x,y} |p'(1|x,y) − p(1|x,y)|`.
    pub max_probability_shift: f64,
    /// Worst-case error of the compressed protocol against the truth table.
    pub worst_case_error: f64,
    swapped: Vec<bool>,
}

impl CommCompression {
    /// The compressed protocol as a dense model, with the original outcome
    /// order restored.
    pub fn protocol(&self) -> Result<QuantumModel, BoundsError> {
        let mut out = self.model.materialize();
        for (y, &s) in self.swapped.iter().enumerate() {
            if s {
                out = out.with_permuted_outcomes(y, &[1, 0])?;
            }
        }
        Ok(out)
    }
}

/// Runs the model pipeline at `ε = ε₁/(200 r)` and dimension `plan.required_dim`
/// or `d_override`, accepting only sketches that move every outcome
/// probability by at most `ε₁`. The seed and retry budget come from `cfg`;
/// its ε is replaced.
pub fn comm_compress(
    plan: &CommPlan,
    protocol: &QuantumModel,
    cfg: &CompressionConfig,
    d_override: Option<usize>,
) -> Result<CommCompression, BoundsError> {
    let model = permuted(plan, protocol)?;
    let prepared = PreparedModel::new(&model)?;
    let epsilon = plan.internal_epsilon();
    let inner = CompressionConfig::with_retries(epsilon, cfg.seed, cfg.max_retries)?;
    let d = d_override.unwrap_or(plan.required_dim);
    let (j, big_d) = (model.num_matrices(), model.dim());
    let effective = projection::epsilon_for_dim(d, j, big_d, Regime::Model { max_rank: prepared.max_rank() })?;
    let cert = Certification::new(epsilon, d, plan.required_dim, effective);
    let eps1 = plan.eps1;
    let out = run_model(&prepared, &inner, d, cert, |_, report| {
        report.class(PairClass::StateMeasurement).all(|p| p.error <= eps1)
    })?;
    let t = out.model.data_table()?;
    let original = crate::models::data_table(&model)?;
    let (mut shift, mut worst) = (0.0_f64, 0.0_f64);
    for x in 0..model.num_states() {
        for y in 0..model.num_measurements() {
            let one = if plan.swapped[y] { 1 } else { 0 };
            let p = t.get(x, y, one);
            shift = shift.max((p - original.get(x, y, one)).abs());
            worst = worst.max(protocol_error(&plan.table, p, x, y));
        }
    }
    Ok(CommCompression {
        model: out.model,
        certificate: out.certificate,
        report: out.report,
        max_probability_shift: shift,
        worst_case_error: worst,
        swapped: plan.swapped.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{data_table, random_model, random_table, DataTable, RankSpec};

    #[test]
    fn identity_table_bound() {
        let r = lower_bound(&DataTable::identity(16));
        assert!(r.column_maxima[0].iter().all(|&c| c == 1.0));
        assert_eq!(r.bound, 16.0);
        let noisy = noisy_lower_bound(&DataTable::identity(16), 0.01);
        assert!((noisy - 15.84).abs() < 1e-12);
        assert_eq!(noisy_lower_bound(&DataTable::identity(16), 0.0), 16.0);
        assert_eq!(noisy_lower_bound(&DataTable::identity(16), 1.0), 0.0);
        assert!(lower_bound(&DataTable::identity(16)).noisy(2.0).raw < 0.0);
    }

    #[test]
    fn constant_table_bound() {
        let r = lower_bound(&DataTable::constant(5, 3, 4));
        assert!((r.bound - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_table_matches_scan() {
        let t = random_table(6, 3, 4, 17);
        let mut best = 0.0_f64;
        for y in 0..3 {
            let mut l = 0.0;
            for z in 0..4 {
                let mut c = 0.0_f64;
                for x in 0..6 {
                    c = c.max(t.get(x, y, z));
                }
                l += c;
            }
            best = best.max(l);
        }
        assert_eq!(lower_bound(&t).bound, best);
    }

    #[test]
    fn one_bit_equality_plan() {
        let (table, protocol) = equality_protocol(1).unwrap();
        let plan = comm_plan(&table, &protocol, 0.0, 0.2).unwrap();
        assert_eq!(plan.r, 1);
        assert_eq!(plan.dim, 2);
        assert_eq!(plan.required_dim, projection::dim_for_comm(0.2, 1, 1, 2, 1).unwrap());
        assert_eq!(plan.swapped, vec![false, false]);
        assert!((plan.internal_epsilon() - 0.001).abs() < 1e-18);
    }

    #[test]
    fn broken_promise_is_reported() {
        let (table, protocol) = equality_protocol(1).unwrap();
        let (dim, mut states, meas) = protocol.into_parts();
        // p(1 | x=0, y=0) = 0.6, an error of 0.4.
        let mut v = crate::numerics::CVector::zeros(2);
        v[0] = num_complex::Complex64::new(0.6f64.sqrt(), 0.0);
        v[1] = num_complex::Complex64::new(0.4f64.sqrt(), 0.0);
        states[0] = HermitianMatrix::projector(&v);
        let protocol = QuantumModel::new(dim, states, meas).unwrap();
        match comm_plan(&table, &protocol, 1.0 / 3.0, 0.1) {
            Err(BoundsError::Promise { x: 0, y: 0, error, .. }) => assert!((error - 0.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rank_uses_smaller_outcome() {
        let (table, protocol) = equality_protocol(2).unwrap();
        let (dim, states, meas) = protocol.into_parts();
        let flipped: Vec<Vec<HermitianMatrix>> = meas.into_iter().map(|p| vec![p[1].clone(), p[0].clone()]).collect();
        let table = TruthTable::from_fn(2, 2, |x, y| !table.get(x, y)).unwrap();
        let protocol = QuantumModel::new(dim, states, flipped).unwrap();
        let plan = comm_plan(&table, &protocol, 0.0, 0.1).unwrap();
        assert_eq!(plan.r, 1);
        assert!(plan.swapped.iter().all(|&s| s));
    }

    #[test]
    fn one_bit_equality_at_full_dimension() {
        let (table, protocol) = equality_protocol(1).unwrap();
        let plan = comm_plan(&table, &protocol, 0.0, 0.2).unwrap();
        let mut accepted = 0;
        for seed in 0..20 {
            let cfg = CompressionConfig::with_retries(0.5, seed, 256).unwrap();
            let Ok(out) = comm_compress(&plan, &protocol, &cfg, Some(2)) else { continue };
            accepted += 1;
            // Exhaustive oracle over the four input pairs.
            let t = data_table(&out.protocol().unwrap()).unwrap();
            for x in 0..2 {
                for y in 0..2 {
                    let p = t.get(x, y, 0);
                    let err = if x == y { 1.0 - p } else { p };
                    assert!(err <= 0.2 + 1e-9, "seed {seed}: ({x},{y}) error {err}");
                }
            }
            assert!(out.worst_case_error <= 0.2 + 1e-12);
        }
        assert!(accepted > 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn bound_never_exceeds_dimension(seed in any::<u64>(), x in 1usize..6, y in 1usize..4, z in 1usize..4, extra in 0usize..8) {
                let dim = z + extra;
                let m = random_model(x, y, z, dim, RankSpec { state: 1, effect: 1 }, seed).unwrap();
                let l = lower_bound(&data_table(&m).unwrap()).bound;
                prop_assert!(l <= dim as f64 + z as f64 * crate::models::TOL_NORM);
            }

            #[test]
            fn monotone_and_lipschitz(seed in any::<u64>(), seed2 in any::<u64>(), x in 1usize..5, y in 1usize..3, z in 1usize..5, bump in 0.0f64..0.3) {
                let t = random_table(x, y, z, seed);
                let bigger: Vec<f64> = t.entries().iter().map(|v| v + bump).collect();
                let bigger = DataTable::new(x, y, z, bigger, false).unwrap();
                prop_assert!(lower_bound(&t).bound <= lower_bound(&bigger).bound);
                let u = random_table(x, y, z, seed2);
                let gap = (lower_bound(&t).bound - lower_bound(&u).bound).abs();
                prop_assert!(gap <= z as f64 * t.max_abs_diff(&u).unwrap() + 1e-12);
            }
        }
    }
}
