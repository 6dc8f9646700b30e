//! Finite-dimensional complex operator algebra on a tensor product of parties.
//!
//! Everything is dense. Basis convention: party 0 is the most significant
//! digit of the mixed-radix basis index, so the basis label |b₀b₁…⟩ reads
//! left to right. All operator comparisons use the Frobenius norm with a
//! tolerance scaled by dimension.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Operator = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

/// Default cap on the total Hilbert-space dimension (product over parties).
pub const DEFAULT_DIM_CAP: usize = 1 << 14;

/// Frobenius tolerance per unit of dimension for operator identities.
pub const OP_TOL_PER_DIM: f64 = 1e-10;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// Party dimensions
// ---------------------------------------------------------------------------

/// Local Hilbert-space dimensions, one per party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyDims {
    dims: Vec<usize>,
}

impl PartyDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_cap(dims, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(dims: Vec<usize>, cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::arg("at least one party is required"));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::arg(format!("party dimension {d} < 2")));
        }
        let total: u128 = dims.iter().map(|&d| d as u128).product();
        if total > cap as u128 {
            return Err(Error::CapExceeded { got: total, cap });
        }
        Ok(PartyDims { dims })
    }

    /// `n` qubit parties.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dim(&self, party: usize) -> usize {
        self.dims[party]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn all_qubits(&self) -> bool {
        self.dims.iter().all(|&d| d == 2)
    }

    /// Stride of each party in the flattened index (party 0 most significant).
    pub fn strides(&self) -> Vec<usize> {
        let n = self.dims.len();
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Elementary matrices
// ---------------------------------------------------------------------------

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

pub fn pauli_x() -> Operator {
    Operator::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO])
}

pub fn pauli_y() -> Operator {
    Operator::from_row_slice(2, 2, &[C_ZERO, -C_I, C_I, C_ZERO])
}

pub fn pauli_z() -> Operator {
    Operator::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, -C_ONE])
}

pub fn hadamard() -> Operator {
    let h = 1.0 / 2.0_f64.sqrt();
    Operator::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

/// Hermiticity defect ‖A − A†‖_F.
pub fn hermiticity_defect(op: &Operator) -> f64 {
    (op - op.adjoint()).norm()
}

pub fn is_hermitian(op: &Operator, tol: f64) -> bool {
    hermiticity_defect(op) <= tol
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
    a * b + b * a
}

/// Eigendecomposition of a Hermitian operator: (eigenvalues, eigenvectors).
///
/// The input is symmetrized to (A + A†)/2 first; callers are expected to pass
/// operators that are Hermitian up to rounding.
pub fn hermitian_eigen(op: &Operator) -> (DVector<f64>, DMatrix<Complex64>) {
    let sym = (op + op.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

pub fn min_eigenvalue(op: &Operator) -> f64 {
    let (vals, _) = hermitian_eigen(op);
    vals.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(op: &Operator) -> f64 {
    let (vals, _) = hermitian_eigen(op);
    vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral norm of a Hermitian operator (largest |eigenvalue|).
pub fn spectral_norm_hermitian(op: &Operator) -> f64 {
    let (vals, _) = hermitian_eigen(op);
    vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

// ---------------------------------------------------------------------------
// Embedding local operators
// ---------------------------------------------------------------------------

/// Embeds `op` at the given party slot: 1 ⊗ … ⊗ op ⊗ … ⊗ 1.
pub fn embed_local(op: &Operator, party: usize, dims: &PartyDims) -> Result<Operator> {
    embed_on_parties(&[(party, op)], dims)
}

/// Embeds a product of local operators sitting on distinct parties.
///
/// The slots need not be adjacent; all remaining parties carry the identity.
pub fn embed_on_parties(ops: &[(usize, &Operator)], dims: &PartyDims) -> Result<Operator> {
    let n = dims.len();
    for &(party, op) in ops {
        if party >= n {
            return Err(Error::arg(format!("party index {party} out of range (n = {n})")));
        }
        if op.nrows() != op.ncols() {
            return Err(Error::dim("local operator must be square"));
        }
        if op.nrows() != dims.dim(party) {
            return Err(Error::dim(format!(
                "operator dim {} does not match party {party} dim {}",
                op.nrows(),
                dims.dim(party)
            )));
        }
    }
    let mut seen = vec![false; n];
    for &(party, _) in ops {
        if seen[party] {
            return Err(Error::arg(format!("party {party} listed twice")));
        }
        seen[party] = true;
    }

    let strides = dims.strides();
    let slot_parties: Vec<usize> = ops.iter().map(|&(p, _)| p).collect();
    let slot_dims: Vec<usize> = slot_parties.iter().map(|&p| dims.dim(p)).collect();
    let rest_parties: Vec<usize> = (0..n).filter(|p| !slot_parties.contains(p)).collect();
    let rest_dims: Vec<usize> = rest_parties.iter().map(|&p| dims.dim(p)).collect();
    let rest_total: usize = rest_dims.iter().product();
    let slot_total: usize = slot_dims.iter().product();
    let total = dims.total_dim();

    // Offsets contributed by every combination of rest digits and slot digits.
    let offsets = |parties: &[usize], pdims: &[usize], count: usize| -> Vec<usize> {
        let mut out = vec![0usize; count];
        for (idx, off) in out.iter_mut().enumerate() {
            let mut rem = idx;
            for m in (0..parties.len()).rev() {
                let digit = rem % pdims[m];
                rem /= pdims[m];
                *off += digit * strides[parties[m]];
            }
        }
        out
    };
    let rest_offsets = offsets(&rest_parties, &rest_dims, rest_total);
    let slot_offsets = offsets(&slot_parties, &slot_dims, slot_total);

    // Entry of the slot-product operator at composite slot indices.
    let slot_entry = |row: usize, col: usize| -> Complex64 {
        let mut val = C_ONE;
        let mut r = row;
        let mut cidx = col;
        for m in (0..ops.len()).rev() {
            let d = slot_dims[m];
            let (dr, dc) = (r % d, cidx % d);
            r /= d;
            cidx /= d;
            val *= ops[m].1[(dr, dc)];
        }
        val
    };

    let mut out = Operator::zeros(total, total);
    for sr in 0..slot_total {
        for sc in 0..slot_total {
            let v = slot_entry(sr, sc);
            if v == C_ZERO {
                continue;
            }
            for &roff in &rest_offsets {
                out[(slot_offsets[sr] + roff, slot_offsets[sc] + roff)] = v;
            }
        }
    }
    Ok(out)
}

/// Embeds an operator acting jointly on the listed slots (slots[0] is the
/// most significant digit of the operator's own index) into the full space.
pub fn embed_joint(op: &Operator, slots: &[usize], dims: &PartyDims) -> Result<Operator> {
    let n = dims.len();
    if slots.is_empty() {
        return Err(Error::arg("at least one slot is required"));
    }
    let mut seen = vec![false; n];
    for &s in slots {
        if s >= n {
            return Err(Error::arg(format!("slot {s} out of range (n = {n})")));
        }
        if seen[s] {
            return Err(Error::arg(format!("slot {s} listed twice")));
        }
        seen[s] = true;
    }
    let slot_dims: Vec<usize> = slots.iter().map(|&s| dims.dim(s)).collect();
    let d_slots: usize = slot_dims.iter().product();
    if op.nrows() != d_slots || op.ncols() != d_slots {
        return Err(Error::dim(format!(
            "operator is {}x{}, slot product dimension is {d_slots}",
            op.nrows(),
            op.ncols()
        )));
    }
    let strides = dims.strides();
    let rest: Vec<usize> = (0..n).filter(|p| !slots.contains(p)).collect();
    let rest_dims: Vec<usize> = rest.iter().map(|&p| dims.dim(p)).collect();
    let d_rest: usize = rest_dims.iter().product();

    let offsets = |parties: &[usize], pdims: &[usize], count: usize| -> Vec<usize> {
        let mut out = vec![0usize; count];
        for (idx, off) in out.iter_mut().enumerate() {
            let mut rem = idx;
            for m in (0..parties.len()).rev() {
                let digit = rem % pdims[m];
                rem /= pdims[m];
                *off += digit * strides[parties[m]];
            }
        }
        out
    };
    let slot_off = offsets(slots, &slot_dims, d_slots);
    let rest_off = offsets(&rest, &rest_dims, d_rest);

    let total = dims.total_dim();
    let mut out = Operator::zeros(total, total);
    for sr in 0..d_slots {
        for sc in 0..d_slots {
            let v = op[(sr, sc)];
            if v == C_ZERO {
                continue;
            }
            for &t in &rest_off {
                out[(slot_off[sr] + t, slot_off[sc] + t)] = v;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Collective spin
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Collective spin component Ĵ_axis = (1/2) Σᵢ σ_axis^(i) on n qubits.
pub fn collective_spin(n: usize, axis: Axis) -> Result<Operator> {
    let dims = PartyDims::qubits(n)?;
    let local = match axis {
        Axis::X => pauli_x(),
        Axis::Y => pauli_y(),
        Axis::Z => pauli_z(),
    };
    let total = dims.total_dim();
    let mut sum = Operator::zeros(total, total);
    for i in 0..n {
        sum += embed_local(&local, i, &dims)?;
    }
    Ok(sum.scale(0.5))
}

/// Total spin squared Ĵ² = Ĵ_x² + Ĵ_y² + Ĵ_z² on n qubits.
pub fn total_spin_squared(n: usize) -> Result<Operator> {
    let jx = collective_spin(n, Axis::X)?;
    let jy = collective_spin(n, Axis::Y)?;
    let jz = collective_spin(n, Axis::Z)?;
    Ok(&jx * &jx + &jy * &jy + &jz * &jz)
}

// ---------------------------------------------------------------------------
// Sign regularization
// ---------------------------------------------------------------------------

/// Replaces a Hermitian operator by the unitary sign of its spectrum.
///
/// Eigenvectors are preserved and each eigenvalue λ maps to sign(λ), with the
/// convention sign(0) = +1. The output squares to the identity.
pub fn dichotomize(h: &Operator) -> Result<Operator> {
    let dim = h.nrows();
    if h.ncols() != dim {
        return Err(Error::dim("dichotomize requires a square matrix"));
    }
    if !is_hermitian(h, 1e-12 * dim as f64) {
        return Err(Error::arg(format!(
            "dichotomize requires a Hermitian input (defect {:.3e})",
            hermiticity_defect(h)
        )));
    }
    let (vals, vecs) = hermitian_eigen(h);
    // Eigenvalues within rounding of zero count as zero, hence +1.
    let zero_tol = 1e-12 * h.norm().max(1.0);
    let signs = DVector::from_iterator(
        dim,
        vals.iter().map(|&v| if v < -zero_tol { -C_ONE } else { C_ONE }),
    );
    Ok(&vecs * DMatrix::from_diagonal(&signs) * vecs.adjoint())
}

// ---------------------------------------------------------------------------
// Quantum states
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum StateData {
    Pure(StateVector),
    Mixed(DMatrix<Complex64>),
}

/// A pure state vector or density matrix over a product of parties.
#[derive(Debug, Clone)]
pub struct QuantumState {
    data: StateData,
    dims: PartyDims,
}

impl QuantumState {
    /// Pure state; the vector must be normalized to within 1e-12.
    pub fn pure(psi: StateVector, dims: PartyDims) -> Result<Self> {
        if psi.len() != dims.total_dim() {
            return Err(Error::dim(format!(
                "state length {} does not match total dimension {}",
                psi.len(),
                dims.total_dim()
            )));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::arg(format!("pure state norm {norm} is not 1")));
        }
        Ok(QuantumState { data: StateData::Pure(psi), dims })
    }

    /// Pure state from an un-normalized vector (must be nonzero).
    pub fn pure_normalized(psi: StateVector, dims: PartyDims) -> Result<Self> {
        let norm = psi.norm();
        if norm < 1e-300 {
            return Err(Error::arg("cannot normalize the zero vector"));
        }
        Self::pure(psi.unscale(norm), dims)
    }

    /// Density matrix; must be Hermitian, unit trace, and PSD up to -1e-10.
    pub fn mixed(rho: DMatrix<Complex64>, dims: PartyDims) -> Result<Self> {
        let d = dims.total_dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::dim(format!(
                "density matrix is {}x{}, expected {d}x{d}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if !is_hermitian(&rho, 1e-12 * d as f64) {
            return Err(Error::arg("density matrix is not Hermitian"));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::arg(format!("density matrix trace {tr} is not 1")));
        }
        let min = min_eigenvalue(&rho);
        if min < -1e-10 {
            return Err(Error::arg(format!("density matrix has eigenvalue {min} < -1e-10")));
        }
        Ok(QuantumState { data: StateData::Mixed(rho), dims })
    }

    /// Maximally mixed state 1/D.
    pub fn maximally_mixed(dims: PartyDims) -> Self {
        let d = dims.total_dim();
        let rho = Operator::identity(d, d).scale(1.0 / d as f64);
        QuantumState { data: StateData::Mixed(rho), dims }
    }

    /// Computational basis state |b₀b₁…⟩ from per-party digits.
    pub fn basis_state(digits: &[usize], dims: PartyDims) -> Result<Self> {
        if digits.len() != dims.len() {
            return Err(Error::dim("one digit per party is required"));
        }
        let strides = dims.strides();
        let mut idx = 0usize;
        for (i, &b) in digits.iter().enumerate() {
            if b >= dims.dim(i) {
                return Err(Error::arg(format!("digit {b} out of range for party {i}")));
            }
            idx += b * strides[i];
        }
        let mut psi = StateVector::zeros(dims.total_dim());
        psi[idx] = C_ONE;
        Ok(QuantumState { data: StateData::Pure(psi), dims })
    }

    pub fn party_dims(&self) -> &PartyDims {
        &self.dims
    }

    pub fn n_parties(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.total_dim()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn pure_vector(&self) -> Option<&StateVector> {
        match &self.data {
            StateData::Pure(psi) => Some(psi),
            StateData::Mixed(_) => None,
        }
    }

    /// Density-matrix form (ψψ† for pure states).
    pub fn density(&self) -> DMatrix<Complex64> {
        match &self.data {
            StateData::Pure(psi) => psi * psi.adjoint(),
            StateData::Mixed(rho) => rho.clone(),
        }
    }

    /// ⟨A⟩ as a complex number (no Hermiticity assumed).
    pub fn expectation_complex(&self, op: &Operator) -> Complex64 {
        match &self.data {
            StateData::Pure(psi) => psi.dotc(&(op * psi)),
            StateData::Mixed(rho) => (op * rho).trace(),
        }
    }

    /// ⟨A⟩ for Hermitian A (real part of the complex expectation).
    pub fn expectation(&self, op: &Operator) -> f64 {
        self.expectation_complex(op).re
    }

    /// ⟨ψ|O†O|ψ⟩ respectively Tr[ρO†O]; the squared residual norm of O.
    pub fn residual_norm_sq(&self, op: &Operator) -> f64 {
        match &self.data {
            StateData::Pure(psi) => (op * psi).norm_squared(),
            StateData::Mixed(rho) => ((op.adjoint() * op) * rho).trace().re,
        }
    }

    pub fn apply_unitary(&self, u: &Operator) -> Result<Self> {
        let d = self.total_dim();
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::dim("unitary dimension does not match state"));
        }
        match &self.data {
            StateData::Pure(psi) => QuantumState::pure_normalized(u * psi, self.dims.clone()),
            StateData::Mixed(rho) => {
                let out = u * rho * u.adjoint();
                // Renormalize rounding drift in the trace.
                let tr = out.trace().re;
                QuantumState::mixed(out.unscale(tr), self.dims.clone())
            }
        }
    }

    /// Overlap with a pure reference: |⟨φ|ψ⟩|² or ⟨φ|ρ|φ⟩.
    pub fn fidelity_with_pure(&self, reference: &StateVector) -> Result<f64> {
        if reference.len() != self.total_dim() {
            return Err(Error::dim("reference state has wrong dimension"));
        }
        Ok(match &self.data {
            StateData::Pure(psi) => reference.dotc(psi).norm_sqr(),
            StateData::Mixed(rho) => reference.dotc(&(rho * reference)).re,
        })
    }

    /// Convex mixture Σ wᵢ ρᵢ of states on identical party dimensions.
    pub fn convex_mix(parts: &[(f64, QuantumState)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::arg("empty mixture"));
        }
        let dims = parts[0].1.party_dims().clone();
        let wsum: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::arg("mixture weights must be nonnegative and sum to 1"));
        }
        let d = dims.total_dim();
        let mut rho = DMatrix::<Complex64>::zeros(d, d);
        for (w, s) in parts {
            if s.party_dims() != &dims {
                return Err(Error::dim("mixture parts live on different party dimensions"));
            }
            rho += s.density().scale(*w);
        }
        let tr = rho.trace().re;
        QuantumState::mixed(rho.unscale(tr), dims)
    }
}

/// Reduced state on the kept parties (ascending order), as a density matrix.
pub fn partial_trace(state: &QuantumState, keep: &[usize]) -> Result<QuantumState> {
    let (out, keep_dims) = partial_trace_matrix(&state.density(), state.party_dims(), keep)?;
    // Clean up rounding so the output satisfies the state invariants exactly.
    let out = (&out + out.adjoint()).scale(0.5);
    let tr = out.trace().re;
    QuantumState::mixed(out.unscale(tr), keep_dims)
}

/// Raw partial trace over everything outside `keep`, without state-invariant
/// validation; the input need not be a density matrix.
pub(crate) fn partial_trace_matrix(
    rho: &DMatrix<Complex64>,
    dims: &PartyDims,
    keep: &[usize],
) -> Result<(DMatrix<Complex64>, PartyDims)> {
    let n = dims.len();
    if keep.is_empty() {
        return Err(Error::arg("keep-set must be non-empty"));
    }
    let total = dims.total_dim();
    if rho.nrows() != total || rho.ncols() != total {
        return Err(Error::dim("matrix does not match the party dimensions"));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if *keep.last().unwrap() >= n {
        return Err(Error::arg("keep-set contains an out-of-range party"));
    }

    let strides = dims.strides();
    let traced: Vec<usize> = (0..n).filter(|p| !keep.contains(p)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&p| dims.dim(p)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&p| dims.dim(p)).collect();
    let dk: usize = keep_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    let offsets = |parties: &[usize], pdims: &[usize], count: usize| -> Vec<usize> {
        let mut out = vec![0usize; count];
        for (idx, off) in out.iter_mut().enumerate() {
            let mut rem = idx;
            for m in (0..parties.len()).rev() {
                let digit = rem % pdims[m];
                rem /= pdims[m];
                *off += digit * strides[parties[m]];
            }
        }
        out
    };
    let keep_off = offsets(&keep, &keep_dims, dk);
    let traced_off = offsets(&traced, &traced_dims, dt);

    let mut out = DMatrix::<Complex64>::zeros(dk, dk);
    for kr in 0..dk {
        for kc in 0..dk {
            let mut acc = C_ZERO;
            for &t in &traced_off {
                acc += rho[(keep_off[kr] + t, keep_off[kc] + t)];
            }
            out[(kr, kc)] = acc;
        }
    }
    Ok((out, PartyDims::new(keep_dims)?))
}
