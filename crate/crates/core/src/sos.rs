//! Black-box models and the sum-of-squares structure of the Bell operator.
//!
//! A black-box model is an explicit finite-dimensional stand-in for the
//! uncharacterized devices: per party, k Hermitian unitary observables on an
//! arbitrary local dimension. For every such model the shifted Bell operator
//! admits the decomposition
//!
//!   B̄ + nk·1 = (k/2)(S̄_z² + S̄_x²) + Σ_{i,a} (Ā_a^(i))²,
//!
//! an exact matrix identity that uses nothing beyond [σ̄_a^(i)]² = 1 and
//! commutation across parties. The residual norms of the squared terms on a
//! given state are what every self-testing conclusion is read off from.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bellspec::{bell_value, BellSpec, BellValue, CorrelatorTable};
use crate::error::{Error, Result};
use crate::hilbert::{
    embed_local, embed_on_parties, hermiticity_defect, identity, is_hermitian, Operator,
    PartyDims, QuantumState, StateVector, C_ZERO,
};

pub const FOUR_OVER_PI: f64 = 4.0 / std::f64::consts::PI;

// ---------------------------------------------------------------------------
// BlackBoxModel
// ---------------------------------------------------------------------------

/// Per-party dichotomic observables on arbitrary finite dimensions.
#[derive(Debug, Clone)]
pub struct BlackBoxModel {
    spec: BellSpec,
    dims: PartyDims,
    observables: Vec<Vec<Operator>>,
}

impl BlackBoxModel {
    pub fn new(spec: BellSpec, dims: PartyDims, observables: Vec<Vec<Operator>>) -> Result<Self> {
        if dims.len() != spec.n() {
            return Err(Error::dim(format!(
                "{} party dimensions for an n = {} spec",
                dims.len(),
                spec.n()
            )));
        }
        if observables.len() != spec.n() {
            return Err(Error::dim("one observable row per party is required"));
        }
        for (i, row) in observables.iter().enumerate() {
            if row.len() != spec.k() {
                return Err(Error::dim(format!(
                    "party {i} has {} observables, expected k = {}",
                    row.len(),
                    spec.k()
                )));
            }
            let d = dims.dim(i);
            for (a, op) in row.iter().enumerate() {
                if op.nrows() != d || op.ncols() != d {
                    return Err(Error::dim(format!(
                        "observable ({i},{a}) is {}x{}, party dimension is {d}",
                        op.nrows(),
                        op.ncols()
                    )));
                }
                if !is_hermitian(op, 1e-12 * d as f64) {
                    return Err(Error::arg(format!(
                        "observable ({i},{a}) is not Hermitian (defect {:.3e})",
                        hermiticity_defect(op)
                    )));
                }
                let sq_defect = (op * op - identity(d)).norm();
                if sq_defect > 1e-10 * d as f64 {
                    return Err(Error::arg(format!(
                        "observable ({i},{a}) does not square to 1 (defect {sq_defect:.3e})"
                    )));
                }
            }
        }
        Ok(BlackBoxModel { spec, dims, observables })
    }

    /// Qubit boxes measuring Ẑ cos θ + X̂ sin θ at the given angles.
    pub fn from_angles(spec: &BellSpec, angles: &crate::quantum::MeasurementAngles) -> Result<Self> {
        if angles.n() != spec.n() || angles.k() != spec.k() {
            return Err(Error::dim("angles and spec disagree on (n, k)"));
        }
        let dims = PartyDims::qubits(spec.n())?;
        let observables = (0..spec.n())
            .map(|i| {
                (0..spec.k())
                    .map(|a| crate::quantum::measurement_observable(angles.angle(i, a)))
                    .collect()
            })
            .collect();
        Self::new(spec.clone(), dims, observables)
    }

    /// The canonical qubit realization: equispaced planar measurements.
    pub fn ideal_qubit(spec: &BellSpec) -> Result<Self> {
        let angles = crate::quantum::MeasurementAngles::default_planar(spec.n(), spec.k())?;
        Self::from_angles(spec, &angles)
    }

    /// Seeded random model: each observable is U diag(±1) U† with U drawn
    /// from orthonormalized complex Gaussians.
    pub fn random(spec: &BellSpec, dims: &PartyDims, seed: u64) -> Result<Self> {
        if dims.len() != spec.n() {
            return Err(Error::dim("dims and spec disagree on the party count"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut observables = Vec::with_capacity(spec.n());
        for i in 0..spec.n() {
            let d = dims.dim(i);
            let mut row = Vec::with_capacity(spec.k());
            for _a in 0..spec.k() {
                let u = crate::randutil::random_unitary(d, &mut rng);
                let signs: Vec<Complex64> = (0..d)
                    .map(|_| {
                        if rng.gen::<bool>() {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(-1.0, 0.0)
                        }
                    })
                    .collect();
                let diag = Operator::from_diagonal(&nalgebra::DVector::from_vec(signs));
                let op = &u * diag * u.adjoint();
                let op = (&op + op.adjoint()).scale(0.5);
                row.push(op);
            }
            observables.push(row);
        }
        Self::new(spec.clone(), dims.clone(), observables)
    }

    pub fn spec(&self) -> &BellSpec {
        &self.spec
    }

    pub fn dims(&self) -> &PartyDims {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.total_dim()
    }

    pub fn observable(&self, party: usize, setting: usize) -> &Operator {
        &self.observables[party][setting]
    }

    pub fn embedded_observable(&self, party: usize, setting: usize) -> Result<Operator> {
        embed_local(&self.observables[party][setting], party, &self.dims)
    }

    /// Exact two-body correlators of a state under this model.
    pub fn correlator_table(&self, state: &QuantumState) -> Result<CorrelatorTable> {
        if state.party_dims() != &self.dims {
            return Err(Error::dim("state does not live on the model's party dimensions"));
        }
        let n = self.spec.n();
        let k = self.spec.k();
        if let Some(psi) = state.pure_vector() {
            let mut applied: Vec<Vec<StateVector>> = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(k);
                for a in 0..k {
                    row.push(&self.embedded_observable(i, a)? * psi);
                }
                applied.push(row);
            }
            CorrelatorTable::from_fn(n, k, |i, j, a, b| applied[i][a].dotc(&applied[j][b]).re)
        } else {
            let rho = state.density();
            let mut right = Vec::with_capacity(n);
            let mut embedded = Vec::with_capacity(n);
            for i in 0..n {
                let mut row_r = Vec::with_capacity(k);
                let mut row_e = Vec::with_capacity(k);
                for a in 0..k {
                    let e = self.embedded_observable(i, a)?;
                    row_r.push(&rho * &e);
                    row_e.push(e);
                }
                right.push(row_r);
                embedded.push(row_e);
            }
            let tr_prod = |x: &Operator, y: &Operator| -> f64 {
                let d = x.nrows();
                let mut acc = C_ZERO;
                for r in 0..d {
                    for s in 0..d {
                        acc += x[(r, s)] * y[(s, r)];
                    }
                }
                acc.re
            };
            CorrelatorTable::from_fn(n, k, |i, j, a, b| tr_prod(&right[i][a], &embedded[j][b]))
        }
    }

    /// Bell value of a state under this model.
    pub fn bell_value_of(&self, state: &QuantumState) -> Result<BellValue> {
        let table = self.correlator_table(state)?;
        bell_value(&table, &self.spec)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let observables: Vec<Vec<Vec<[f64; 2]>>> = self
            .observables
            .iter()
            .map(|row| {
                row.iter()
                    .map(|op| {
                        let d = op.nrows();
                        let mut flat = Vec::with_capacity(d * d);
                        for r in 0..d {
                            for c in 0..d {
                                flat.push([op[(r, c)].re, op[(r, c)].im]);
                            }
                        }
                        flat
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "spec": self.spec.to_json_value(),
            "dims": self.dims.dims(),
            "observables": observables,
        })
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let raw: ModelJson = serde_json::from_value(v.clone())?;
        let spec = BellSpec::from_json_value(&raw.spec)?;
        let dims = PartyDims::new(raw.dims)?;
        let mut observables = Vec::with_capacity(raw.observables.len());
        for (i, row) in raw.observables.iter().enumerate() {
            let d = dims.dims().get(i).copied().unwrap_or(0);
            let mut ops = Vec::with_capacity(row.len());
            for flat in row {
                if flat.len() != d * d {
                    return Err(Error::dim(format!(
                        "party {i}: matrix has {} entries, expected {}",
                        flat.len(),
                        d * d
                    )));
                }
                let mut op = Operator::zeros(d, d);
                for r in 0..d {
                    for c in 0..d {
                        let [re, im] = flat[r * d + c];
                        op[(r, c)] = Complex64::new(re, im);
                    }
                }
                ops.push(op);
            }
            observables.push(ops);
        }
        Self::new(spec, dims, observables)
    }
}

#[derive(Deserialize, Serialize)]
struct ModelJson {
    spec: serde_json::Value,
    dims: Vec<usize>,
    observables: Vec<Vec<Vec<[f64; 2]>>>,
}

// ---------------------------------------------------------------------------
// Derived operators
// ---------------------------------------------------------------------------

/// The operators the decomposition is phrased in:
/// Z̄ = (2/k) Σ_a σ̄_a cos(aπ/k), X̄ = (2/k) Σ_a σ̄_a sin(aπ/k) per party,
/// Ā_a = σ̄_a − [Z̄ cos(aπ/k) + X̄ sin(aπ/k)], and the phase-weighted
/// collective sums S̄_z = Σᵢ [cos φᵢ Z̄ − sin φᵢ X̄]^(i),
/// S̄_x = Σᵢ [cos φᵢ X̄ + sin φᵢ Z̄]^(i).
#[derive(Debug, Clone)]
pub struct DerivedOperators {
    zbar: Vec<Operator>,
    xbar: Vec<Operator>,
    abar: Vec<Vec<Operator>>,
    sz: Operator,
    sx: Operator,
}

impl DerivedOperators {
    /// Local Z̄ on party i's dimension.
    pub fn zbar(&self, party: usize) -> &Operator {
        &self.zbar[party]
    }

    pub fn xbar(&self, party: usize) -> &Operator {
        &self.xbar[party]
    }

    pub fn abar(&self, party: usize, setting: usize) -> &Operator {
        &self.abar[party][setting]
    }

    /// Embedded phase-weighted collective sum S̄_z.
    pub fn sz(&self) -> &Operator {
        &self.sz
    }

    pub fn sx(&self) -> &Operator {
        &self.sx
    }
}

pub fn derived_operators(model: &BlackBoxModel) -> Result<DerivedOperators> {
    let n = model.spec().n();
    let k = model.spec().k();
    let kf = k as f64;
    let pi = std::f64::consts::PI;
    let dims = model.dims();

    let mut zbar = Vec::with_capacity(n);
    let mut xbar = Vec::with_capacity(n);
    let mut abar = Vec::with_capacity(n);
    for i in 0..n {
        let d = dims.dim(i);
        let mut z = Operator::zeros(d, d);
        let mut x = Operator::zeros(d, d);
        for a in 0..k {
            let theta = a as f64 * pi / kf;
            z += model.observable(i, a).scale(2.0 / kf * theta.cos());
            x += model.observable(i, a).scale(2.0 / kf * theta.sin());
        }
        let mut row = Vec::with_capacity(k);
        for a in 0..k {
            let theta = a as f64 * pi / kf;
            row.push(model.observable(i, a) - (z.scale(theta.cos()) + x.scale(theta.sin())));
        }
        zbar.push(z);
        xbar.push(x);
        abar.push(row);
    }

    let total = dims.total_dim();
    let mut sz = Operator::zeros(total, total);
    let mut sx = Operator::zeros(total, total);
    for i in 0..n {
        let phi = model.spec().phases()[i];
        let (c, s) = (phi.cos(), phi.sin());
        sz += embed_local(&(zbar[i].scale(c) - xbar[i].scale(s)), i, dims)?;
        sx += embed_local(&(xbar[i].scale(c) + zbar[i].scale(s)), i, dims)?;
    }

    Ok(DerivedOperators { zbar, xbar, abar, sz, sx })
}

/// The Bell operator, built term by term from the correlator form:
/// B̄ = (2/k) Σ_{i≠j} Σ_{a,b} cos[π(a−b)/k + φᵢ − φⱼ] σ̄_a^(i) σ̄_b^(j).
pub fn bell_operator(model: &BlackBoxModel) -> Result<Operator> {
    let n = model.spec().n();
    let k = model.spec().k();
    let kf = k as f64;
    let pi = std::f64::consts::PI;
    let phases = model.spec().phases();
    let dims = model.dims();
    let total = dims.total_dim();
    let mut op = Operator::zeros(total, total);
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = phases[i] - phases[j];
            for a in 0..k {
                for b in 0..k {
                    // The (i,j,a,b) and (j,i,b,a) terms of the sum coincide.
                    let w = 2.0 * (((a as f64 - b as f64) * pi / kf) + delta).cos();
                    let pair = embed_on_parties(
                        &[(i, model.observable(i, a)), (j, model.observable(j, b))],
                        dims,
                    )?;
                    op += pair.scale(2.0 / kf * w);
                }
            }
        }
    }
    Ok(op)
}

/// Frobenius norm of  (B̄ + nk·1) − [(k/2)(S̄_z² + S̄_x²) + Σ_{i,a}(Ā_a^(i))²].
///
/// Zero (up to rounding, ≤ 1e-10·dim) for every valid model: the
/// decomposition is an operator identity, not a state property.
pub fn sos_identity_residual(model: &BlackBoxModel) -> Result<f64> {
    let bell = bell_operator(model)?;
    let rhs = sos_right_hand_side(model, &derived_operators(model)?)?;
    let nk = (model.spec().n() * model.spec().k()) as f64;
    let d = model.total_dim();
    let lhs = bell + identity(d).scale(nk);
    Ok((lhs - rhs).norm())
}

fn sos_right_hand_side(model: &BlackBoxModel, derived: &DerivedOperators) -> Result<Operator> {
    let k = model.spec().k();
    let dims = model.dims();
    let total = dims.total_dim();
    let sz2 = derived.sz() * derived.sz();
    let sx2 = derived.sx() * derived.sx();
    let mut rhs = (sz2 + sx2).scale(k as f64 / 2.0);
    let mut asq_total = Operator::zeros(total, total);
    for i in 0..model.spec().n() {
        for a in 0..k {
            let local = derived.abar(i, a);
            asq_total += embed_local(&(local * local), i, dims)?;
        }
    }
    rhs += asq_total;
    Ok(rhs)
}

// ---------------------------------------------------------------------------
// Residual norms on states
// ---------------------------------------------------------------------------

/// Squared residual norms of the SOS terms on a state.
///
/// For pure states these are ‖O|ψ⟩‖²; for mixed states the trace forms
/// Tr[ρO†O]. The identity guarantees
/// (k/2)(sz + sx) + Σ aa = ⟨B̄⟩ + nk, recorded as `reconstruction_gap`.
#[derive(Debug, Clone, Serialize)]
pub struct SosReport {
    pub identity_residual: f64,
    pub sz_norm_sq: f64,
    pub sx_norm_sq: f64,
    /// ‖Ā_a^(i)|ψ⟩‖² indexed [party][setting].
    pub aa_norms_sq: Vec<Vec<f64>>,
    /// ⟨B̄⟩ + nk.
    pub shifted_expectation: f64,
    pub reconstruction_gap: f64,
}

pub fn sos_residual_norms(model: &BlackBoxModel, state: &QuantumState) -> Result<SosReport> {
    if state.party_dims() != model.dims() {
        return Err(Error::dim("state does not live on the model's party dimensions"));
    }
    let derived = derived_operators(model)?;
    let k = model.spec().k();
    let n = model.spec().n();
    let dims = model.dims();

    let sz_norm_sq = state.residual_norm_sq(derived.sz());
    let sx_norm_sq = state.residual_norm_sq(derived.sx());
    let mut aa_norms_sq = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(k);
        for a in 0..k {
            let e = embed_local(derived.abar(i, a), i, dims)?;
            row.push(state.residual_norm_sq(&e));
        }
        aa_norms_sq.push(row);
    }

    let shifted = model.bell_value_of(state)?.value + (n * k) as f64;
    let total: f64 =
        k as f64 / 2.0 * (sz_norm_sq + sx_norm_sq) + aa_norms_sq.iter().flatten().sum::<f64>();
    Ok(SosReport {
        identity_residual: sos_identity_residual(model)?,
        sz_norm_sq,
        sx_norm_sq,
        aa_norms_sq,
        shifted_expectation: shifted,
        reconstruction_gap: (total - shifted).abs(),
    })
}

/// Residuals of the qubit-algebra relations per party:
/// ‖(Z̄² − 1)|ψ⟩‖, ‖(X̄² − 1)|ψ⟩‖, ‖(Z̄X̄ + X̄Z̄)|ψ⟩‖.
///
/// All three vanish on a maximally violating state; that is what lets the
/// regularized Z̄, X̄ be treated as Pauli operators there.
#[derive(Debug, Clone, Serialize)]
pub struct PauliResiduals {
    pub z_squared: f64,
    pub x_squared: f64,
    pub anticommutator: f64,
}

pub fn pauli_relation_residuals(
    model: &BlackBoxModel,
    state: &QuantumState,
) -> Result<Vec<PauliResiduals>> {
    if state.party_dims() != model.dims() {
        return Err(Error::dim("state does not live on the model's party dimensions"));
    }
    let derived = derived_operators(model)?;
    let dims = model.dims();
    let mut out = Vec::with_capacity(model.spec().n());
    for i in 0..model.spec().n() {
        let d = dims.dim(i);
        let z = derived.zbar(i);
        let x = derived.xbar(i);
        let z2m1 = z * z - identity(d);
        let x2m1 = x * x - identity(d);
        let anti = z * x + x * z;
        let r = |local: &Operator| -> Result<f64> {
            let e = embed_local(local, i, dims)?;
            Ok(state.residual_norm_sq(&e).max(0.0).sqrt())
        };
        out.push(PauliResiduals {
            z_squared: r(&z2m1)?,
            x_squared: r(&x2m1)?,
            anticommutator: r(&anti)?,
        });
    }
    Ok(out)
}

/// Residuals ‖[Z̄ cos(aπ/k) + X̄ sin(aπ/k) − σ̄_a]^(i)|ψ⟩‖ per (party, setting).
///
/// The operator in brackets is −Ā_a^(i) by definition, so these coincide with
/// the square roots of the Ā-term norms in [`SosReport`]; they are computed
/// here from the explicit combination.
pub fn measurement_selftest_residuals(
    model: &BlackBoxModel,
    state: &QuantumState,
) -> Result<Vec<Vec<f64>>> {
    if state.party_dims() != model.dims() {
        return Err(Error::dim("state does not live on the model's party dimensions"));
    }
    let derived = derived_operators(model)?;
    let k = model.spec().k();
    let kf = k as f64;
    let pi = std::f64::consts::PI;
    let dims = model.dims();
    let mut out = Vec::with_capacity(model.spec().n());
    for i in 0..model.spec().n() {
        let mut row = Vec::with_capacity(k);
        for a in 0..k {
            let theta = a as f64 * pi / kf;
            let combo = derived.zbar(i).scale(theta.cos()) + derived.xbar(i).scale(theta.sin())
                - model.observable(i, a);
            let e = embed_local(&combo, i, dims)?;
            row.push(state.residual_norm_sq(&e).max(0.0).sqrt());
        }
        out.push(row);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Norm bounds
// ---------------------------------------------------------------------------

/// Triangle-inequality bounds on the derived operators.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormBounds {
    /// ‖X̄‖ ≤ (2/k) Σ_a sin(aπ/k) = sin(π/k)/(k sin²[π/(2k)]); below 4/π for
    /// every k and increasing toward it.
    pub x_bound: f64,
    /// ‖Z̄‖ ≤ (2/k) Σ_a |cos(aπ/k)|. Below 4/π for even k; for odd k the
    /// exact value slightly exceeds 4/π (4/3 at k = 3), approaching it from
    /// above as k grows.
    pub z_bound: f64,
}

pub fn norm_bounds(k: usize) -> Result<NormBounds> {
    if k < 3 {
        return Err(Error::arg(format!("k = {k} < 3")));
    }
    let kf = k as f64;
    let pi = std::f64::consts::PI;
    let x_closed = (pi / kf).sin() / (kf * (pi / (2.0 * kf)).sin().powi(2));
    let z_sum: f64 = (0..k).map(|a| (a as f64 * pi / kf).cos().abs()).sum();
    Ok(NormBounds { x_bound: x_closed, z_bound: 2.0 / kf * z_sum })
}

// ---------------------------------------------------------------------------

/// Per-party residual of Σ_a R̄_a R̄_a + k (Z̄ + iX̄)², with
/// R̄_a = 2 e^{iaπ/k} σ̄_a − (Z̄ + iX̄). An exact matrix identity.
#[cfg(test)]
fn r_relation_residual(model: &BlackBoxModel, party: usize) -> Result<f64> {
    use crate::hilbert::C_I;
    let derived = derived_operators(model)?;
    let k = model.spec().k();
    let kf = k as f64;
    let pi = std::f64::consts::PI;
    let d = model.dims().dim(party);
    let zx = derived.zbar(party) + derived.xbar(party).map(|v| v * C_I);
    let mut acc = Operator::zeros(d, d);
    for a in 0..k {
        let phase = Complex64::from_polar(2.0, a as f64 * pi / kf);
        let r = model.observable(party, a).map(|v| v * phase) - &zx;
        acc += &r * &r;
    }
    Ok((acc + (&zx * &zx).scale(kf)).norm())
}
