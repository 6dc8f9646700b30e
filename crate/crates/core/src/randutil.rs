//! Seeded random matrices and states used by fuzzing-style checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hilbert::{Operator, StateVector};
#[cfg(test)]
use crate::hilbert::{PartyDims, QuantumState};

pub(crate) fn random_complex_gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

/// Unitary from Gram-Schmidt orthonormalization of a complex Gaussian matrix.
pub(crate) fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    loop {
        let g = random_complex_gaussian(dim, dim, rng);
        if let Some(u) = gram_schmidt(&g) {
            return u;
        }
    }
}

fn gram_schmidt(m: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let dim = m.nrows();
    let mut cols: Vec<DVector<Complex64>> = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut v = m.column(j).into_owned();
        for q in &cols {
            let overlap = q.dotc(&v);
            v -= q * overlap;
        }
        // Re-orthogonalize once; plain MGS loses orthogonality in unlucky draws.
        for q in &cols {
            let overlap = q.dotc(&v);
            v -= q * overlap;
        }
        let norm = v.norm();
        if norm < 1e-10 {
            return None;
        }
        cols.push(v.unscale(norm));
    }
    Some(DMatrix::from_columns(&cols))
}

#[cfg(test)]
pub(crate) fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    let g = random_complex_gaussian(dim, dim, rng);
    (&g + g.adjoint()).scale(0.5)
}

pub(crate) fn random_state_vector<R: Rng>(dim: usize, rng: &mut R) -> StateVector {
    loop {
        let v: StateVector = random_complex_gaussian(dim, 1, rng).column(0).into_owned();
        let norm = v.norm();
        if norm > 1e-6 {
            return v.unscale(norm);
        }
    }
}

#[cfg(test)]
pub(crate) fn random_pure_state<R: Rng>(dims: &PartyDims, rng: &mut R) -> QuantumState {
    let psi = random_state_vector(dims.total_dim(), rng);
    QuantumState::pure_normalized(psi, dims.clone()).expect("normalized by construction")
}

/// Random full-rank density matrix G G† / Tr[G G†].
#[cfg(test)]
pub(crate) fn random_density<R: Rng>(dims: &PartyDims, rng: &mut R) -> QuantumState {
    let d = dims.total_dim();
    let g = random_complex_gaussian(d, d, rng);
    let rho = &g * g.adjoint();
    let rho = rho.clone().unscale(rho.trace().re);
    let rho = (&rho + rho.adjoint()).scale(0.5);
    QuantumState::mixed(rho, dims.clone()).expect("PSD by construction")
}
