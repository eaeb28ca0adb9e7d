//! Seeded instance generators.
//!
//! Stream layout under a seed: index `1 + x` for state `x`, index
//! `1 + X + y·Z + z` for effect `(y, z)`; attempt 0 throughout. Index 0 is
//! left to projections.

use num_complex::Complex64;

use super::{DataTable, ModelError, PsdFactorization, QuantumModel};
use crate::numerics::{self, CMatrix, HermitianMatrix};
use crate::rng::Gaussian;

/// Requested ranks of the generated states and of the effects `z < Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankSpec {
    pub state: usize,
    pub effect: usize,
}

fn gaussian_matrix(g: &mut Gaussian, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| g.complex_normal())
}

/// `G G†` for a `dim × rank` complex Gaussian `G`; rank `rank` almost surely.
fn wishart(g: &mut Gaussian, dim: usize, rank: usize) -> HermitianMatrix {
    let f = gaussian_matrix(g, dim, rank);
    HermitianMatrix::hermitian_part(&numerics::matmul(&f, &f.adjoint())).expect("square by construction")
}

fn check_rank(rank: usize, dim: usize, what: &str) -> Result<(), ModelError> {
    if rank == 0 || rank > dim {
        return Err(ModelError::InfeasibleRank(format!("{what} rank {rank} outside 1..={dim}")));
    }
    Ok(())
}

/// Unit-trace Wishart state of the given rank.
pub fn random_state(dim: usize, rank: usize, seed: u64, index: u64) -> Result<HermitianMatrix, ModelError> {
    check_rank(rank, dim, "state")?;
    let w = wishart(&mut Gaussian::stream(seed, 0, index), dim, rank);
    let t = w.trace();
    Ok(w.scaled(1.0 / t))
}

/// Random valid model.
///
/// Effects `z < Z` are Wishart matrices of rank `ranks.effect` scaled to an
/// operator norm drawn uniformly from `[1/2, 1]`. If their sum exceeds the
/// identity they are all shrunk by its top eigenvalue, and `E_yZ` is the
/// remainder `I − Σ_{z<Z} E_yz`.
pub fn random_model(
    x: usize,
    y: usize,
    z: usize,
    dim: usize,
    ranks: RankSpec,
    seed: u64,
) -> Result<QuantumModel, ModelError> {
    if x == 0 || y == 0 || z == 0 || dim == 0 {
        return Err(ModelError::Shape(format!("shape ({x},{y},{z}) in dim {dim} must be positive")));
    }
    check_rank(ranks.state, dim, "state")?;
    if z > 1 {
        check_rank(ranks.effect, dim, "effect")?;
    }
    let states = (0..x).map(|i| random_state(dim, ranks.state, seed, 1 + i as u64)).collect::<Result<Vec<_>, _>>()?;
    let identity = HermitianMatrix::identity(dim);
    let mut measurements = Vec::with_capacity(y);
    for yi in 0..y {
        let mut povm: Vec<HermitianMatrix> = (0..z - 1)
            .map(|zi| {
                let index = 1 + x as u64 + (yi * z + zi) as u64;
                let mut g = Gaussian::stream(seed, 0, index);
                let w = wishart(&mut g, dim, ranks.effect);
                let target = 0.5 + 0.5 * g.uniform();
                w.scaled(target / numerics::op_norm(&w))
            })
            .collect();
        let total = HermitianMatrix::sum(dim, &povm)?;
        let top = numerics::op_norm(&total);
        if top > 1.0 {
            for e in &mut povm {
                *e = e.scaled(1.0 / top);
            }
        }
        let rest = HermitianMatrix::sum(dim, &povm)?;
        povm.push(identity.checked_sub(&rest)?);
        measurements.push(povm);
    }
    QuantumModel::new(dim, states, measurements)
}

/// `N` left and `M` right unit-trace psd matrices of rank `rank`.
pub fn random_psd_factorization(
    n: usize,
    m: usize,
    dim: usize,
    rank: usize,
    seed: u64,
) -> Result<PsdFactorization, ModelError> {
    check_rank(rank, dim, "factor")?;
    let draw = |i: usize| random_state(dim, rank, seed, 1 + i as u64);
    let left = (0..n).map(draw).collect::<Result<Vec<_>, _>>()?;
    let right = (n..n + m).map(draw).collect::<Result<Vec<_>, _>>()?;
    PsdFactorization::new(dim, left, right)
}

/// Normalized table with rows drawn uniformly from the simplex.
pub fn random_table(x: usize, y: usize, z: usize, seed: u64) -> DataTable {
    let mut g = Gaussian::stream(seed, 0, 1);
    let mut entries = Vec::with_capacity(x * y * z);
    for _ in 0..x * y {
        let row: Vec<f64> = (0..z).map(|_| -(1.0 - g.uniform()).ln()).collect();
        let s: f64 = row.iter().sum();
        entries.extend(row.iter().map(|v| v / s));
    }
    DataTable::new(x, y, z, entries, true).expect("rows normalized by construction")
}

/// Basis states `|x⟩⟨x|` and the single measurement `{|z⟩⟨z|}` on `C^D`.
pub fn basis_measurement_model(dim: usize) -> QuantumModel {
    let basis: Vec<_> = (0..dim).map(|k| HermitianMatrix::basis_projector(dim, k)).collect();
    QuantumModel::new(dim, basis.clone(), vec![basis]).expect("valid shape")
}

/// States `|x⟩⟨x|` for `x < X` with binary measurements
/// `{|φ_y⟩⟨φ_y|, I − |φ_y⟩⟨φ_y|}` for uniformly random unit vectors `φ_y`.
pub fn binary_rank_one_model(x: usize, y: usize, dim: usize, seed: u64) -> Result<QuantumModel, ModelError> {
    if x == 0 || y == 0 || x > dim {
        return Err(ModelError::Shape(format!("{x} basis states and {y} measurements in dim {dim}")));
    }
    let states = (0..x).map(|k| HermitianMatrix::basis_projector(dim, k)).collect();
    let identity = HermitianMatrix::identity(dim);
    let measurements = (0..y)
        .map(|yi| {
            let mut g = Gaussian::stream(seed, 0, 1 + (x + 2 * yi) as u64);
            let v = gaussian_matrix(&mut g, dim, 1).column(0).into_owned();
            let v = v.unscale(numerics::vector_norm(&v));
            let p = HermitianMatrix::projector(&v);
            let q = identity.checked_sub(&p).expect("same dim");
            vec![p, q]
        })
        .collect();
    QuantumModel::new(dim, states, measurements)
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian, with
/// the phases of `R`'s diagonal moved into `Q`.
fn random_unitary(g: &mut Gaussian, dim: usize) -> CMatrix {
    let qr = gaussian_matrix(g, dim, dim).qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Model whose `Σ_{z<Z} E_yz` has spectrum `min(1, e^{−b(j−j*)})`, `j = 1..D`,
/// in a random eigenbasis per `y`, split evenly over the `Z − 1` small
/// outcomes. States are random rank-one.
pub fn tail_model(
    x: usize,
    y: usize,
    z: usize,
    dim: usize,
    j_star: usize,
    b: f64,
    seed: u64,
) -> Result<QuantumModel, ModelError> {
    if x == 0 || y == 0 || z < 2 || dim == 0 || !(b > 0.0) {
        return Err(ModelError::Shape(format!("tail model needs X, Y ≥ 1, Z ≥ 2, b > 0 (got {x}, {y}, {z}, {b})")));
    }
    let spectrum: Vec<f64> =
        (1..=dim).map(|j| if j <= j_star { 1.0 } else { (-b * (j - j_star) as f64).exp() }).collect();
    let states = (0..x).map(|i| random_state(dim, 1, seed, 1 + i as u64)).collect::<Result<Vec<_>, _>>()?;
    let identity = HermitianMatrix::identity(dim);
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        spectrum.iter().map(|&v| Complex64::new(v / (z - 1) as f64, 0.0)),
    ));
    let measurements = (0..y)
        .map(|yi| {
            let mut g = Gaussian::stream(seed, 0, 1 + (x + yi * z) as u64);
            let u = random_unitary(&mut g, dim);
            let part = HermitianMatrix::hermitian_part(&numerics::matmul(&numerics::matmul(&u, &diag), &u.adjoint()))
                .expect("square");
            let mut povm = vec![part.clone(); z - 1];
            let rest = HermitianMatrix::sum(dim, &povm).expect("same dim");
            povm.push(identity.checked_sub(&rest).expect("same dim"));
            povm
        })
        .collect();
    QuantumModel::new(dim, states, measurements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::validate_model;

    #[test]
    fn small_model_has_requested_rank() {
        let m = random_model(2, 1, 2, 4, RankSpec { state: 1, effect: 1 }, 7).unwrap();
        assert!(validate_model(&m).is_empty());
        assert_eq!(numerics::numerical_rank(m.effect(0, 0), numerics::RANK_TOL), 1);
        assert_eq!(numerics::numerical_rank(m.state(1), numerics::RANK_TOL), 1);
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = RankSpec { state: 2, effect: 2 };
        assert_eq!(random_model(3, 2, 3, 6, spec, 11).unwrap(), random_model(3, 2, 3, 6, spec, 11).unwrap());
        assert_ne!(random_model(3, 2, 3, 6, spec, 11).unwrap(), random_model(3, 2, 3, 6, spec, 12).unwrap());
        assert_eq!(random_psd_factorization(1, 1, 2, 1, 0).unwrap(), random_psd_factorization(1, 1, 2, 1, 0).unwrap());
    }

    #[test]
    fn single_outcome_is_identity() {
        let m = random_model(2, 2, 1, 5, RankSpec { state: 3, effect: 1 }, 1).unwrap();
        for y in 0..2 {
            assert_eq!(m.measurements()[y], vec![HermitianMatrix::identity(5)]);
        }
    }

    #[test]
    fn infeasible_ranks_are_rejected() {
        let spec = RankSpec { state: 5, effect: 1 };
        assert!(matches!(random_model(1, 1, 2, 4, spec, 0), Err(ModelError::InfeasibleRank(_))));
        let spec = RankSpec { state: 1, effect: 0 };
        assert!(matches!(random_model(1, 1, 2, 4, spec, 0), Err(ModelError::InfeasibleRank(_))));
        assert!(random_psd_factorization(1, 1, 3, 4, 0).is_err());
    }

    #[test]
    fn validity_over_many_seeds() {
        for seed in 0..100 {
            let m = random_model(4, 3, 3, 16, RankSpec { state: 2, effect: 3 }, seed).unwrap();
            let v = validate_model(&m);
            assert!(v.is_empty(), "seed {seed}: {v:?}");
        }
    }

    #[test]
    fn rank_one_factors() {
        let f = random_psd_factorization(1, 1, 2, 1, 0).unwrap();
        for a in f.matrices() {
            assert!((a.trace() - 1.0).abs() < 1e-12);
            assert_eq!(numerics::numerical_rank(a, numerics::RANK_TOL), 1);
            assert!(numerics::is_psd(a, numerics::psd_tolerance(a)));
        }
    }

    #[test]
    fn full_rank_factors_are_definite() {
        let f = random_psd_factorization(2, 2, 6, 6, 5).unwrap();
        for a in f.matrices() {
            let ev = numerics::eigh(a).unwrap().eigenvalues;
            assert!(*ev.last().unwrap() > 0.0);
        }
    }

    #[test]
    fn tail_model_spectrum() {
        let m = tail_model(2, 2, 2, 12, 3, 0.5, 4).unwrap();
        assert!(validate_model(&m).is_empty());
        for y in 0..2 {
            let ev = numerics::eigenvalues(&m.small_outcome_sum(y));
            for (j, v) in ev.iter().enumerate() {
                let expect = if j < 3 { 1.0 } else { (-0.5 * (j + 1 - 3) as f64).exp() };
                assert!((v - expect).abs() < 1e-12, "y={y} j={j}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn binary_model_is_valid() {
        let m = binary_rank_one_model(8, 4, 16, 2).unwrap();
        assert!(validate_model(&m).is_empty());
        assert_eq!(m.num_matrices(), 16);
        assert!(binary_rank_one_model(17, 1, 16, 0).is_err());
    }
}
