//! SWAP-isometry extraction and the robustness bound.
//!
//! An ancilla qubit in |+⟩ is attached to every party and the partial SWAP
//! gate Φᵢ = (cX̃^(i)) (H ⊗ 1) (cZ̃^(i)) is applied, where Z̃, X̃ are the
//! sign-regularized versions of the derived operators Z̄, X̄ and the controls
//! sit on the ancilla. Tracing out the boxes leaves an n-qubit state; for a
//! maximally violating model/state pair it is a many-body singlet, and at
//! violation deficit ε its planar spin fluctuations obey
//!
//!   ⟨Ĵ_z² + Ĵ_x²⟩ ≤ (n²ε/4) (√(2/n) + √r)²,   r = 751.553…
//!
//! The constant r comes from the chain α = 144, α₁ = (1 + √α/2)² = 49,
//! r = α₁ + [α₁ + (√α + (1 + 8/π)√α₁)²]/2. The bound is valid, not tight.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::bellspec::violation_deficit;
use crate::error::{Error, Result};
use crate::hilbert::{
    dichotomize, embed_joint, hadamard, identity, max_eigenvalue, partial_trace_matrix, Operator,
    PartyDims, QuantumState, StateVector, C_ONE,
};
use crate::quantum::{phase_weighted_spin, total_spin_expectation};
use crate::sos::{derived_operators, BlackBoxModel};

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

/// Sign-regularized Z̃^(i), X̃^(i): Hermitian unitaries sharing the
/// eigenvectors of Z̄^(i), X̄^(i), with every eigenvalue mapped to its sign
/// (sign(0) = +1).
#[derive(Debug, Clone)]
pub struct RegularizedPair {
    ztilde: Vec<Operator>,
    xtilde: Vec<Operator>,
}

impl RegularizedPair {
    pub fn n(&self) -> usize {
        self.ztilde.len()
    }

    pub fn ztilde(&self, party: usize) -> &Operator {
        &self.ztilde[party]
    }

    pub fn xtilde(&self, party: usize) -> &Operator {
        &self.xtilde[party]
    }
}

pub fn regularize(model: &BlackBoxModel) -> Result<RegularizedPair> {
    let derived = derived_operators(model)?;
    let n = model.spec().n();
    let mut ztilde = Vec::with_capacity(n);
    let mut xtilde = Vec::with_capacity(n);
    for i in 0..n {
        ztilde.push(dichotomize(derived.zbar(i))?);
        xtilde.push(dichotomize(derived.xbar(i))?);
    }
    Ok(RegularizedPair { ztilde, xtilde })
}

// ---------------------------------------------------------------------------
// Partial SWAP gate
// ---------------------------------------------------------------------------

/// Controlled-A on (ancilla qubit) ⊗ (box): |0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ A.
fn controlled(a: &Operator) -> Operator {
    let d = a.nrows();
    let mut out = Operator::zeros(2 * d, 2 * d);
    for r in 0..d {
        out[(r, r)] = C_ONE;
        for c in 0..d {
            out[(d + r, d + c)] = a[(r, c)];
        }
    }
    out
}

/// The partial SWAP unitary for one party, on (ancilla qubit) ⊗ (box i):
/// controlled-Z̃, Hadamard on the ancilla, controlled-X̃.
pub fn partial_swap_unitary(pair: &RegularizedPair, party: usize) -> Result<Operator> {
    if party >= pair.n() {
        return Err(Error::arg(format!("party {party} out of range")));
    }
    let d = pair.ztilde(party).nrows();
    let h = hadamard().kronecker(&identity(d));
    Ok(controlled(pair.xtilde(party)) * h * controlled(pair.ztilde(party)))
}

/// Full-space dims for the extraction: n leading ancilla qubits, boxes after.
fn extraction_dims(model: &BlackBoxModel) -> Result<PartyDims> {
    let mut dims: Vec<usize> = vec![2; model.spec().n()];
    dims.extend_from_slice(model.dims().dims());
    PartyDims::new(dims)
}

/// Channel form of the extraction on an arbitrary box operator:
/// M ↦ Tr_boxes[ U_Φ (|+⟩⟨+|^⊗n ⊗ M) U_Φ† ].
fn extract_matrix(model: &BlackBoxModel, box_op: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = model.spec().n();
    let full_dims = extraction_dims(model)?;
    let pair = regularize(model)?;

    let d_full = full_dims.total_dim();
    let mut u = identity(d_full);
    for i in 0..n {
        let phi = partial_swap_unitary(&pair, i)?;
        u = embed_joint(&phi, &[i, n + i], &full_dims)? * u;
    }

    // |+⟩⟨+|^⊗n ⊗ M, with ancillas leading.
    let d_anc = 1usize << n;
    let plus_proj = DMatrix::from_element(d_anc, d_anc, Complex64::new(1.0 / d_anc as f64, 0.0));
    let full = plus_proj.kronecker(box_op);
    let evolved = &u * full * u.adjoint();
    let keep: Vec<usize> = (0..n).collect();
    let (reduced, _) = partial_trace_matrix(&evolved, &full_dims, &keep)?;
    Ok(reduced)
}

/// Applies the SWAP isometry and traces out the boxes, returning the n-qubit
/// state carried by the ancillas.
pub fn extract_state(model: &BlackBoxModel, state: &QuantumState) -> Result<QuantumState> {
    if state.party_dims() != model.dims() {
        return Err(Error::dim("state does not live on the model's party dimensions"));
    }
    let n = model.spec().n();

    // Pure states ride through as vectors; the reduction is a Gram matrix.
    if let Some(psi) = state.pure_vector() {
        let full_dims = extraction_dims(model)?;
        let pair = regularize(model)?;
        let d_full = full_dims.total_dim();
        let d_anc = 1usize << n;
        let d_box = model.total_dim();

        let amp = Complex64::new(1.0 / (d_anc as f64).sqrt(), 0.0);
        let mut full = StateVector::zeros(d_full);
        for anc in 0..d_anc {
            for b in 0..d_box {
                full[anc * d_box + b] = amp * psi[b];
            }
        }
        for i in 0..n {
            let phi = partial_swap_unitary(&pair, i)?;
            full = embed_joint(&phi, &[i, n + i], &full_dims)? * full;
        }
        let reshaped = DMatrix::from_fn(d_anc, d_box, |r, c| full[r * d_box + c]);
        let rho = &reshaped * reshaped.adjoint();
        let rho = (&rho + rho.adjoint()).scale(0.5);
        let tr = rho.trace().re;
        return QuantumState::mixed(rho.unscale(tr), PartyDims::qubits(n)?);
    }

    let reduced = extract_matrix(model, &state.density())?;
    let reduced = (&reduced + reduced.adjoint()).scale(0.5);
    let tr = reduced.trace().re;
    QuantumState::mixed(reduced.unscale(tr), PartyDims::qubits(n)?)
}

// ---------------------------------------------------------------------------
// Robustness constants and bound
// ---------------------------------------------------------------------------

/// The explicit constant chain behind the robustness bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RobustnessConstants {
    pub alpha: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub r: f64,
}

pub fn robustness_constants() -> RobustnessConstants {
    let alpha: f64 = 144.0;
    let alpha0 = alpha;
    let alpha1 = (1.0 + alpha.sqrt() / 2.0).powi(2);
    let inner = alpha0.sqrt() + (1.0 + 8.0 / std::f64::consts::PI) * alpha1.sqrt();
    let r = alpha1 + (alpha1 + inner * inner) / 2.0;
    RobustnessConstants { alpha, alpha0, alpha1, r }
}

/// The certified ceiling on ⟨Ĵ_z² + Ĵ_x²⟩ after extraction at violation
/// deficit ε:  (n²ε/4)(√(2/n) + √r)².
pub fn robustness_bound(n: usize, epsilon: f64) -> Result<f64> {
    if epsilon < 0.0 {
        return Err(Error::arg(format!("negative violation deficit {epsilon}")));
    }
    if n == 0 {
        return Err(Error::arg("party count must be positive"));
    }
    let r = robustness_constants().r;
    let nf = n as f64;
    Ok(nf * nf * epsilon / 4.0 * ((2.0 / nf).sqrt() + r.sqrt()).powi(2))
}

// ---------------------------------------------------------------------------
// Extraction report
// ---------------------------------------------------------------------------

/// Everything the robustness statement talks about, for one (model, state)
/// pair: the Bell value and deficit from the exact correlator table, the
/// extracted state's spin moments, and the bound comparison.
#[derive(Debug, Clone)]
pub struct ExtractionReport {
    pub bell_value: f64,
    pub epsilon: f64,
    pub extracted: QuantumState,
    /// ⟨Ĵ_z² + Ĵ_x²⟩ of the extracted state (phase-weighted components when
    /// the spec carries phases).
    pub jz2_plus_jx2: f64,
    /// ⟨Ĵ²⟩ of the extracted state; diagnostic only, the bound does not
    /// constrain it.
    pub jsq: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
    /// True when the bound exceeds the algebraic maximum of Ĵ_z² + Ĵ_x², so
    /// it constrains nothing at this ε.
    pub bound_vacuous: bool,
}

impl ExtractionReport {
    pub fn to_json_value(&self, include_state: bool) -> serde_json::Value {
        let mut v = serde_json::json!({
            "bell_value": self.bell_value,
            "epsilon": self.epsilon,
            "jz2_plus_jx2": self.jz2_plus_jx2,
            "jsq": self.jsq,
            "bound": self.bound,
            "bound_satisfied": self.bound_satisfied,
            "bound_vacuous": self.bound_vacuous,
        });
        if include_state {
            v["extracted"] = crate::quantum::state_to_json(&self.extracted);
        }
        v
    }
}

pub fn extraction_report(model: &BlackBoxModel, state: &QuantumState) -> Result<ExtractionReport> {
    let spec = model.spec();
    let n = spec.n();
    let bell = model.bell_value_of(state)?;
    let epsilon = violation_deficit(&bell)?;
    let extracted = extract_state(model, state)?;

    let (jz, jx) = phase_weighted_spin(n, spec.phases())?;
    let moment_op = &jz * &jz + &jx * &jx;
    let jz2_plus_jx2 = extracted.expectation(&moment_op);
    let jsq = total_spin_expectation(&extracted)?;
    let bound = robustness_bound(n, epsilon)?;
    Ok(ExtractionReport {
        bell_value: bell.value,
        epsilon,
        jz2_plus_jx2,
        jsq,
        bound,
        bound_satisfied: jz2_plus_jx2 <= bound + 1e-9,
        bound_vacuous: bound > max_eigenvalue(&moment_op),
        extracted,
    })
}
