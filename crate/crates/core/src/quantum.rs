//! The qubit-side realization: planar measurements, the singlet manifold,
//! rotated singlets, noise families, correlator tables.
//!
//! The canonical measurements are k equispaced directions in the xz plane,
//! σ_a = Ẑ cos(aπ/k) + X̂ sin(aπ/k). Any state in the kernel of the total
//! spin Ĵ² reaches the quantum bound −nk under them; conversely that kernel
//! membership is what maximal violation certifies.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bellspec::{bell_value, BellSpec, CorrelatorTable};
use crate::error::{Error, Result};
use crate::hilbert::{
    collective_spin, embed_local, hermitian_eigen, identity, pauli_x, pauli_z, total_spin_squared,
    Axis, Operator, PartyDims, QuantumState, StateVector, C_ZERO, DEFAULT_DIM_CAP,
};

// ---------------------------------------------------------------------------
// Measurement angles
// ---------------------------------------------------------------------------

/// Per-party measurement directions in the xz plane (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementAngles {
    angles: Vec<Vec<f64>>,
}

impl MeasurementAngles {
    pub fn new(angles: Vec<Vec<f64>>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::arg("at least one party is required"));
        }
        let k = angles[0].len();
        if k == 0 {
            return Err(Error::arg("at least one setting per party is required"));
        }
        if angles.iter().any(|a| a.len() != k) {
            return Err(Error::arg("every party must have the same number of settings"));
        }
        Ok(MeasurementAngles { angles })
    }

    /// The canonical grid θ_a = aπ/k for every party.
    pub fn default_planar(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::arg("n and k must be positive"));
        }
        let pi = std::f64::consts::PI;
        let row: Vec<f64> = (0..k).map(|a| a as f64 * pi / k as f64).collect();
        Ok(MeasurementAngles { angles: vec![row; n] })
    }

    pub fn n(&self) -> usize {
        self.angles.len()
    }

    pub fn k(&self) -> usize {
        self.angles[0].len()
    }

    pub fn angle(&self, party: usize, setting: usize) -> f64 {
        self.angles[party][setting]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.angles
    }
}

/// The 2×2 observable Ẑ cos θ + X̂ sin θ (Hermitian, unitary).
pub fn measurement_observable(theta: f64) -> Operator {
    pauli_z().scale(theta.cos()) + pauli_x().scale(theta.sin())
}

// ---------------------------------------------------------------------------
// Singlet manifold
// ---------------------------------------------------------------------------

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Dimension of the total-spin-zero subspace, C(n, n/2) − C(n, n/2 − 1).
pub fn singlet_dimension(n: usize) -> usize {
    assert!(n % 2 == 0 && n > 0, "singlet dimension is defined for even n");
    let nn = n as u64;
    (binomial(nn, nn / 2) - binomial(nn, nn / 2 - 1)) as usize
}

/// Orthonormal basis of the kernel of Ĵ² on n qubits.
#[derive(Debug, Clone)]
pub struct SingletBasis {
    n: usize,
    vectors: Vec<StateVector>,
}

impl SingletBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, idx: usize) -> &StateVector {
        &self.vectors[idx]
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }
}

/// Computes the singlet basis by dense eigendecomposition of Ĵ² with kernel
/// threshold 1e-9, followed by orthonormalization and a deterministic
/// canonical ordering (descending |first nonvanishing coefficient|, then
/// position of that coefficient; global phase fixed to make it real
/// positive).
pub fn singlet_basis(n: usize) -> Result<SingletBasis> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::arg(format!("singlet basis requires even n ≥ 2, got {n}")));
    }
    if n >= 64 || (1u128 << n) > DEFAULT_DIM_CAP as u128 {
        return Err(Error::CapExceeded { got: 1u128 << n.min(127), cap: DEFAULT_DIM_CAP });
    }
    let jsq = total_spin_squared(n)?;
    let (vals, vecs) = hermitian_eigen(&jsq);
    let mut kernel: Vec<StateVector> = Vec::new();
    for (idx, &v) in vals.iter().enumerate() {
        if v.abs() <= 1e-9 {
            kernel.push(vecs.column(idx).into_owned());
        }
    }
    // Orthonormalize (the eigensolver already returns an orthonormal set;
    // this guards against rounding in degenerate clusters).
    let mut ortho: Vec<StateVector> = Vec::new();
    for mut v in kernel {
        for q in &ortho {
            let overlap = q.dotc(&v);
            v -= q * overlap;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            ortho.push(v.unscale(norm));
        }
    }
    // Canonical phase and ordering.
    let mut keyed: Vec<(f64, usize, StateVector)> = ortho
        .into_iter()
        .map(|v| {
            let first = v
                .iter()
                .position(|c| c.norm() > 1e-9)
                .expect("unit vector has a nonvanishing coefficient");
            let phase = v[first] / v[first].norm();
            let canon = v.map(|c| c / phase);
            (canon[first].re, first, canon)
        })
        .collect();
    keyed.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then_with(|| {
                for (x, y) in a.2.iter().zip(b.2.iter()) {
                    let ord = x
                        .re
                        .partial_cmp(&y.re)
                        .unwrap()
                        .then(x.im.partial_cmp(&y.im).unwrap());
                    if ord != std::cmp::Ordering::Equal {
                        return ord;
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    let vectors: Vec<StateVector> = keyed.into_iter().map(|(_, _, v)| v).collect();
    if vectors.len() != singlet_dimension(n) {
        return Err(Error::invariant(format!(
            "singlet kernel has dimension {}, expected {}",
            vectors.len(),
            singlet_dimension(n)
        )));
    }
    Ok(SingletBasis { n, vectors })
}

/// Pure state Σᵢ cᵢ |bᵢ⟩ with amplitudes over the singlet basis.
pub fn singlet_pure(n: usize, coefficients: &[Complex64]) -> Result<QuantumState> {
    let basis = singlet_basis(n)?;
    if coefficients.len() != basis.dim() {
        return Err(Error::arg(format!(
            "got {} coefficients for a dimension-{} singlet space",
            coefficients.len(),
            basis.dim()
        )));
    }
    let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("coefficient norm {norm} is not 1")));
    }
    let mut psi = StateVector::zeros(1 << n);
    for (c, b) in coefficients.iter().zip(basis.vectors()) {
        psi += b * *c;
    }
    QuantumState::pure_normalized(psi, PartyDims::qubits(n)?)
}

/// Mixture Σᵢ wᵢ |bᵢ⟩⟨bᵢ| over the singlet basis.
pub fn singlet_mixture(n: usize, weights: &[f64]) -> Result<QuantumState> {
    let basis = singlet_basis(n)?;
    if weights.len() != basis.dim() {
        return Err(Error::arg(format!(
            "got {} weights for a dimension-{} singlet space",
            weights.len(),
            basis.dim()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::arg("weights must be nonnegative and sum to 1"));
    }
    let d = 1usize << n;
    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for (w, b) in weights.iter().zip(basis.vectors()) {
        rho += (b * b.adjoint()).scale(*w);
    }
    let tr = rho.trace().re;
    QuantumState::mixed(rho.unscale(tr), PartyDims::qubits(n)?)
}

/// Uniform mixture over the singlet basis.
pub fn uniform_singlet_mixture(n: usize) -> Result<QuantumState> {
    let d = singlet_dimension(n);
    singlet_mixture(n, &vec![1.0 / d as f64; d])
}

/// Seeded random pure state in the singlet manifold.
pub fn random_singlet_pure(n: usize, seed: u64) -> Result<QuantumState> {
    let basis = singlet_basis(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = crate::randutil::random_state_vector(basis.dim(), &mut rng);
    let coeffs: Vec<Complex64> = raw.iter().cloned().collect();
    singlet_pure(n, &coeffs)
}

/// Seeded random mixture over the singlet basis.
pub fn random_singlet_mixture(n: usize, seed: u64) -> Result<QuantumState> {
    let basis = singlet_basis(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..basis.dim()).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    singlet_mixture(n, &w)
}

// ---------------------------------------------------------------------------
// Local y rotations and the phases variant
// ---------------------------------------------------------------------------

/// exp(iφY/2) = [[cos(φ/2), sin(φ/2)], [−sin(φ/2), cos(φ/2)]].
fn y_rotation(phi: f64) -> Operator {
    let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    Operator::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(c, 0.0),
        ],
    )
}

/// Applies the local rotation ⊗ᵢ exp(iφᵢY/2) to a qubit state.
pub fn apply_y_rotations(state: &QuantumState, phases: &[f64]) -> Result<QuantumState> {
    let dims = state.party_dims();
    if !dims.all_qubits() {
        return Err(Error::arg("y rotations require qubit parties"));
    }
    if phases.len() != dims.len() {
        return Err(Error::arg("one phase per party is required"));
    }
    let mut u = identity(dims.total_dim());
    for (i, &phi) in phases.iter().enumerate() {
        u = embed_local(&y_rotation(phi), i, dims)? * u;
    }
    state.apply_unitary(&u)
}

/// A many-body singlet with the local rotation exp(iφᵢY/2) applied per party.
///
/// The rotation direction is aligned with the phase-φ inequality: the output
/// maximally violates `BellSpec::with_phases(n, k, φ)` under the canonical
/// planar measurements. The base state is the first canonical singlet basis
/// vector.
pub fn rotated_singlet(n: usize, phases: &[f64]) -> Result<QuantumState> {
    let basis = singlet_basis(n)?;
    let base = QuantumState::pure_normalized(basis.vector(0).clone(), PartyDims::qubits(n)?)?;
    apply_y_rotations(&base, phases)
}

/// Phase-weighted collective spin components:
/// J'_z = (1/2) Σᵢ [cos φᵢ Ẑ − sin φᵢ X̂]^(i),
/// J'_x = (1/2) Σᵢ [cos φᵢ X̂ + sin φᵢ Ẑ]^(i).
pub fn phase_weighted_spin(n: usize, phases: &[f64]) -> Result<(Operator, Operator)> {
    if phases.len() != n {
        return Err(Error::arg("one phase per party is required"));
    }
    let dims = PartyDims::qubits(n)?;
    let d = dims.total_dim();
    let mut jz = Operator::zeros(d, d);
    let mut jx = Operator::zeros(d, d);
    for (i, &phi) in phases.iter().enumerate() {
        let (c, s) = (phi.cos(), phi.sin());
        let local_z = pauli_z().scale(c) - pauli_x().scale(s);
        let local_x = pauli_x().scale(c) + pauli_z().scale(s);
        jz += embed_local(&local_z, i, &dims)?;
        jx += embed_local(&local_x, i, &dims)?;
    }
    Ok((jz.scale(0.5), jx.scale(0.5)))
}

/// The self-tested statistic of the phases variant,
/// S = 4⟨(J'_z)² + (J'_x)²⟩; reduces to Σᵢⱼ ⟨X̂ᵢX̂ⱼ + ẐᵢẐⱼ⟩ at zero phases.
/// Maximal violation of the phase-φ inequality certifies S = 0.
pub fn phase_spin_statistic(state: &QuantumState, phases: &[f64]) -> Result<f64> {
    let n = state.n_parties();
    if !state.party_dims().all_qubits() {
        return Err(Error::arg("the spin statistic requires qubit parties"));
    }
    let (jz, jx) = phase_weighted_spin(n, phases)?;
    Ok(4.0 * (state.expectation(&(&jz * &jz)) + state.expectation(&(&jx * &jx))))
}

/// ⟨Ĵ_z² + Ĵ_x²⟩ on a qubit state.
pub fn jz2_plus_jx2(state: &QuantumState) -> Result<f64> {
    if !state.party_dims().all_qubits() {
        return Err(Error::arg("collective spin moments require qubit parties"));
    }
    let n = state.n_parties();
    let jz = collective_spin(n, Axis::Z)?;
    let jx = collective_spin(n, Axis::X)?;
    Ok(state.expectation(&(&jz * &jz)) + state.expectation(&(&jx * &jx)))
}

/// ⟨Ĵ²⟩ on a qubit state.
pub fn total_spin_expectation(state: &QuantumState) -> Result<f64> {
    if !state.party_dims().all_qubits() {
        return Err(Error::arg("collective spin moments require qubit parties"));
    }
    Ok(state.expectation(&total_spin_squared(state.n_parties())?))
}

// ---------------------------------------------------------------------------
// Correlator tables from states
// ---------------------------------------------------------------------------

/// Exact two-body correlators ⟨σ_{θa}^(i) σ_{θb}^(j)⟩ for all i ≠ j.
pub fn correlator_table(state: &QuantumState, angles: &MeasurementAngles) -> Result<CorrelatorTable> {
    let dims = state.party_dims();
    if !dims.all_qubits() {
        return Err(Error::arg("correlator_table requires qubit parties"));
    }
    let n = dims.len();
    if angles.n() != n {
        return Err(Error::dim(format!(
            "angles cover {} parties, state has {n}",
            angles.n()
        )));
    }
    let k = angles.k();

    if let Some(psi) = state.pure_vector() {
        // σ_a^(i)|ψ⟩ once per (i, a); every correlator is an inner product.
        let mut applied: Vec<Vec<StateVector>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(k);
            for a in 0..k {
                let obs = measurement_observable(angles.angle(i, a));
                let e = embed_local(&obs, i, dims)?;
                row.push(&e * psi);
            }
            applied.push(row);
        }
        CorrelatorTable::from_fn(n, k, |i, j, a, b| applied[i][a].dotc(&applied[j][b]).re)
    } else {
        let rho = state.density();
        let mut right: Vec<Vec<DMatrix<Complex64>>> = Vec::with_capacity(n);
        let mut embedded: Vec<Vec<Operator>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row_r = Vec::with_capacity(k);
            let mut row_e = Vec::with_capacity(k);
            for a in 0..k {
                let obs = measurement_observable(angles.angle(i, a));
                let e = embed_local(&obs, i, dims)?;
                row_r.push(&rho * &e);
                row_e.push(e);
            }
            right.push(row_r);
            embedded.push(row_e);
        }
        // Tr[ρ σ_a^(i) σ_b^(j)] = Tr[(ρ σ_a^(i)) σ_b^(j)].
        let trace_product = |x: &DMatrix<Complex64>, y: &Operator| -> f64 {
            let d = x.nrows();
            let mut acc = C_ZERO;
            for r in 0..d {
                for s in 0..d {
                    acc += x[(r, s)] * y[(s, r)];
                }
            }
            acc.re
        };
        CorrelatorTable::from_fn(n, k, |i, j, a, b| trace_product(&right[i][a], &embedded[j][b]))
    }
}

// ---------------------------------------------------------------------------
// Noise models
// ---------------------------------------------------------------------------

/// Imperfection families used to generate states/measurements at a given
/// distance from the ideal point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// ρ ↦ (1−p)ρ + p·1/D.
    DepolarizingGlobal { strength: f64 },
    /// Per-party phase flip: ρ ↦ (1−p)ρ + p ẐᵢρẐᵢ, applied for every party.
    DephasingLocal { strength: f64 },
    /// Calibration error: θ_a ↦ θ_a + δ with δ ~ U[−s, s], drawn once per
    /// (party, setting) from the given seed.
    AngleJitter { strength: f64, seed: u64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::DepolarizingGlobal { strength } | NoiseModel::DephasingLocal { strength } => {
                if !(0.0..=1.0).contains(&strength) {
                    return Err(Error::arg(format!("noise strength {strength} outside [0, 1]")));
                }
            }
            NoiseModel::AngleJitter { strength, .. } => {
                if !(strength >= 0.0 && strength.is_finite()) {
                    return Err(Error::arg(format!("jitter strength {strength} must be ≥ 0")));
                }
            }
        }
        Ok(())
    }

    /// Applies the imperfection to a realization, returning the possibly
    /// modified state and measurement angles.
    pub fn apply(
        &self,
        state: &QuantumState,
        angles: &MeasurementAngles,
    ) -> Result<(QuantumState, MeasurementAngles)> {
        self.validate()?;
        match *self {
            NoiseModel::DepolarizingGlobal { strength: p } => {
                if p == 0.0 {
                    return Ok((state.clone(), angles.clone()));
                }
                let d = state.total_dim();
                let rho = state.density().scale(1.0 - p) + identity(d).scale(p / d as f64);
                let rho = (&rho + rho.adjoint()).scale(0.5);
                let tr = rho.trace().re;
                Ok((
                    QuantumState::mixed(rho.unscale(tr), state.party_dims().clone())?,
                    angles.clone(),
                ))
            }
            NoiseModel::DephasingLocal { strength: p } => {
                if p == 0.0 {
                    return Ok((state.clone(), angles.clone()));
                }
                let dims = state.party_dims().clone();
                if !dims.all_qubits() {
                    return Err(Error::arg("local dephasing requires qubit parties"));
                }
                let mut rho = state.density();
                for i in 0..dims.len() {
                    let zi = embed_local(&pauli_z(), i, &dims)?;
                    rho = rho.scale(1.0 - p) + (&zi * rho * &zi).scale(p);
                }
                let rho = (&rho + rho.adjoint()).scale(0.5);
                let tr = rho.trace().re;
                Ok((QuantumState::mixed(rho.unscale(tr), dims)?, angles.clone()))
            }
            NoiseModel::AngleJitter { strength, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let jittered: Vec<Vec<f64>> = angles
                    .rows()
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|&t| t + rng.gen_range(-strength..=strength))
                            .collect()
                    })
                    .collect();
                Ok((state.clone(), MeasurementAngles::new(jittered)?))
            }
        }
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;

    /// Accepts `depolarizing:P`, `dephasing:P`, `jitter:S` or `jitter:S:SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let strength: f64 = parts
            .get(1)
            .ok_or_else(|| Error::arg(format!("noise spec '{s}' is missing a strength")))?
            .parse()
            .map_err(|_| Error::arg(format!("bad noise strength in '{s}'")))?;
        let model = match parts[0] {
            "depolarizing" | "depolarizing_global" => NoiseModel::DepolarizingGlobal { strength },
            "dephasing" | "dephasing_local" => NoiseModel::DephasingLocal { strength },
            "jitter" | "angle_jitter" => {
                let seed: u64 = match parts.get(2) {
                    Some(x) => x
                        .parse()
                        .map_err(|_| Error::arg(format!("bad jitter seed in '{s}'")))?,
                    None => 0,
                };
                NoiseModel::AngleJitter { strength, seed }
            }
            other => return Err(Error::arg(format!("unknown noise kind '{other}'"))),
        };
        model.validate()?;
        Ok(model)
    }
}

// ---------------------------------------------------------------------------
// The scaling identity
// ---------------------------------------------------------------------------

/// Both sides of the qubit identity  B + nk = 2k ⟨Ĵ_z² + Ĵ_x²⟩, evaluated
/// under the canonical planar measurements. The two returned numbers agree
/// for every qubit state; their common value is nk·ε.
pub fn eq9_check(state: &QuantumState, k: usize) -> Result<(f64, f64)> {
    let n = state.n_parties();
    let spec = BellSpec::new(n, k)?;
    let angles = MeasurementAngles::default_planar(n, k)?;
    let table = correlator_table(state, &angles)?;
    let b = bell_value(&table, &spec)?;
    let lhs = b.value + (n * k) as f64;
    let rhs = 2.0 * k as f64 * jz2_plus_jx2(state)?;
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// State JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateJson {
    n: usize,
    kind: String,
    /// Flat row-major [re, im] pairs; length D for pure, D² for mixed.
    data: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dims: Option<Vec<usize>>,
}

pub fn state_to_json(state: &QuantumState) -> serde_json::Value {
    let dims = state.party_dims();
    let dims_field = if dims.all_qubits() { None } else { Some(dims.dims().to_vec()) };
    let (kind, data) = match state.pure_vector() {
        Some(psi) => (
            "pure".to_string(),
            psi.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
        ),
        None => {
            let rho = state.density();
            let d = rho.nrows();
            let mut data = Vec::with_capacity(d * d);
            for r in 0..d {
                for col in 0..d {
                    let v = rho[(r, col)];
                    data.push([v.re, v.im]);
                }
            }
            ("mixed".to_string(), data)
        }
    };
    serde_json::to_value(StateJson { n: dims.len(), kind, data, dims: dims_field })
        .expect("state serializes")
}

pub fn state_from_json(v: &serde_json::Value) -> Result<QuantumState> {
    let raw: StateJson = serde_json::from_value(v.clone())?;
    let dims = match raw.dims {
        Some(d) => {
            if d.len() != raw.n {
                return Err(Error::arg("dims length does not match n"));
            }
            PartyDims::new(d)?
        }
        None => PartyDims::qubits(raw.n)?,
    };
    let d = dims.total_dim();
    match raw.kind.as_str() {
        "pure" => {
            if raw.data.len() != d {
                return Err(Error::dim(format!(
                    "pure state data has {} entries, expected {d}",
                    raw.data.len()
                )));
            }
            let psi = StateVector::from_iterator(
                d,
                raw.data.iter().map(|&[re, im]| Complex64::new(re, im)),
            );
            QuantumState::pure(psi, dims)
        }
        "mixed" => {
            if raw.data.len() != d * d {
                return Err(Error::dim(format!(
                    "mixed state data has {} entries, expected {}",
                    raw.data.len(),
                    d * d
                )));
            }
            let mut rho = DMatrix::<Complex64>::zeros(d, d);
            for r in 0..d {
                for col in 0..d {
                    let [re, im] = raw.data[r * d + col];
                    rho[(r, col)] = Complex64::new(re, im);
                }
            }
            QuantumState::mixed(rho, dims)
        }
        other => Err(Error::arg(format!("unknown state kind '{other}'"))),
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::C_ONE;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn observable_special_angles() {
        assert!((measurement_observable(0.0) - pauli_z()).norm() < 1e-15);
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!((measurement_observable(half_pi) - pauli_x()).norm() < 1e-15);
        let (vals, _) = hermitian_eigen(&measurement_observable(std::f64::consts::PI / 3.0));
        let mut v: Vec<f64> = vals.iter().cloned().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(close(v[0], -1.0, 1e-12) && close(v[1], 1.0, 1e-12));
    }

    #[test]
    fn singlet_dimensions() {
        assert_eq!(singlet_dimension(2), 1);
        assert_eq!(singlet_dimension(4), 2);
        assert_eq!(singlet_dimension(6), 5);
        for n in [2usize, 4, 6] {
            let b = singlet_basis(n).unwrap();
            assert_eq!(b.dim(), singlet_dimension(n));
        }
        assert!(singlet_basis(3).is_err());
        assert!(singlet_basis(0).is_err());
    }

    #[test]
    fn singlet_basis_two_qubits_canonical_form() {
        let b = singlet_basis(2).unwrap();
        let v = b.vector(0);
        let s = 1.0 / 2.0_f64.sqrt();
        assert!(v[0].norm() < 1e-12);
        assert!((v[1] - Complex64::new(s, 0.0)).norm() < 1e-9);
        assert!((v[2] - Complex64::new(-s, 0.0)).norm() < 1e-9);
        assert!(v[3].norm() < 1e-12);
    }

    #[test]
    fn singlet_basis_annihilated_and_orthonormal() {
        for n in [2usize, 4, 6] {
            let b = singlet_basis(n).unwrap();
            let jx = collective_spin(n, Axis::X).unwrap();
            let jy = collective_spin(n, Axis::Y).unwrap();
            let jz = collective_spin(n, Axis::Z).unwrap();
            for (i, v) in b.vectors().iter().enumerate() {
                assert!((&jx * v).norm() <= 1e-9, "Jx n={n} i={i}");
                assert!((&jy * v).norm() <= 1e-9, "Jy n={n} i={i}");
                assert!((&jz * v).norm() <= 1e-9, "Jz n={n} i={i}");
                for (j, w) in b.vectors().iter().enumerate() {
                    let overlap = v.dotc(w).norm();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(close(overlap, expected, 1e-10), "n={n} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn singlet_states_have_zero_total_spin() {
        let uniform = uniform_singlet_mixture(4).unwrap();
        assert!(total_spin_expectation(&uniform).unwrap() <= 1e-9);

        let pure = random_singlet_pure(4, 12345).unwrap();
        assert!(total_spin_expectation(&pure).unwrap() <= 1e-9);

        let mixed = random_singlet_mixture(6, 7).unwrap();
        assert!(total_spin_expectation(&mixed).unwrap() <= 1e-9);
    }

    #[test]
    fn singlet_constructor_validation() {
        assert!(singlet_mixture(4, &[0.5, 0.6]).is_err());
        assert!(singlet_mixture(4, &[1.0]).is_err());
        assert!(singlet_pure(4, &[C_ONE, C_ONE]).is_err());
    }

    #[test]
    fn seeded_singlet_reproducibility() {
        let a = random_singlet_pure(4, 99).unwrap();
        let b = random_singlet_pure(4, 99).unwrap();
        assert!((a.pure_vector().unwrap() - b.pure_vector().unwrap()).norm() < 1e-15);
    }

    #[test]
    fn singlet_correlators_match_analytic_form() {
        let s = random_singlet_pure(2, 1).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let t = correlator_table(&s, &angles).unwrap();
        let pi = std::f64::consts::PI;
        for a in 0..3 {
            for b in 0..3 {
                let expected = -((a as f64 - b as f64) * pi / 3.0).cos();
                assert!(close(t.get(0, 1, a, b), expected, 1e-12), "({a},{b})");
            }
        }
    }

    #[test]
    fn correlators_of_simple_states() {
        let dims = PartyDims::qubits(2).unwrap();
        let mm = QuantumState::maximally_mixed(dims.clone());
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let t = correlator_table(&mm, &angles).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!(t.get(0, 1, a, b).abs() < 1e-13);
            }
        }

        let zero = QuantumState::basis_state(&[0, 0], dims).unwrap();
        let t = correlator_table(&zero, &angles).unwrap();
        let pi = std::f64::consts::PI;
        for a in 0..3 {
            for b in 0..3 {
                let expected = (a as f64 * pi / 3.0).cos() * (b as f64 * pi / 3.0).cos();
                assert!(close(t.get(0, 1, a, b), expected, 1e-12));
            }
        }
    }

    #[test]
    fn singlet_reaches_quantum_bound() {
        for (n, k) in [(2usize, 3usize), (4, 3), (4, 5)] {
            let s = random_singlet_pure(n, 3 * n as u64 + k as u64).unwrap();
            let spec = BellSpec::new(n, k).unwrap();
            let angles = MeasurementAngles::default_planar(n, k).unwrap();
            let t = correlator_table(&s, &angles).unwrap();
            let b = bell_value(&t, &spec).unwrap();
            assert!(close(b.value, spec.quantum_bound(), 1e-9), "n={n} k={k}: {}", b.value);
        }
    }

    #[test]
    fn rotated_singlet_zero_phases_unchanged() {
        let r = rotated_singlet(4, &[0.0; 4]).unwrap();
        let base = singlet_basis(4).unwrap();
        assert!(close(r.fidelity_with_pure(base.vector(0)).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn rotated_singlet_global_rotation_stays_singlet() {
        let r = rotated_singlet(2, &[0.7, 0.7]).unwrap();
        assert!(total_spin_expectation(&r).unwrap() <= 1e-9);
        let r = rotated_singlet(4, &[-1.2; 4]).unwrap();
        assert!(total_spin_expectation(&r).unwrap() <= 1e-9);
    }

    #[test]
    fn rotated_singlet_maximally_violates_phase_inequality() {
        let phases = vec![0.4, -1.3];
        let spec = BellSpec::with_phases(2, 3, phases.clone()).unwrap();
        let state = rotated_singlet(2, &phases).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let t = correlator_table(&state, &angles).unwrap();
        let b = bell_value(&t, &spec).unwrap();
        assert!(close(b.value, -6.0, 1e-9), "bell = {}", b.value);
        // And the self-tested statistic vanishes.
        assert!(phase_spin_statistic(&state, &phases).unwrap() <= 1e-9);
    }

    #[test]
    fn opposite_rotation_pi_case() {
        // Rotating one party by π leaves the singlet manifold but zeroes the
        // phase-weighted statistic.
        let phases = vec![0.0, std::f64::consts::PI];
        let state = rotated_singlet(2, &phases).unwrap();
        assert!(total_spin_expectation(&state).unwrap() > 0.5);
        assert!(phase_spin_statistic(&state, &phases).unwrap() <= 1e-9);
    }

    #[test]
    fn noise_depolarizing() {
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let s = random_singlet_pure(2, 4).unwrap();

        let (same, _) = NoiseModel::DepolarizingGlobal { strength: 0.0 }.apply(&s, &angles).unwrap();
        assert!(same.is_pure());

        let (mm, _) = NoiseModel::DepolarizingGlobal { strength: 1.0 }.apply(&s, &angles).unwrap();
        assert!((mm.density() - identity(4).scale(0.25)).norm() < 1e-12);

        let s4 = uniform_singlet_mixture(4).unwrap();
        let angles4 = MeasurementAngles::default_planar(4, 3).unwrap();
        let (noisy, _) = NoiseModel::DepolarizingGlobal { strength: 0.1 }.apply(&s4, &angles4).unwrap();
        assert!(close(jz2_plus_jx2(&noisy).unwrap(), 0.2, 1e-12));
    }

    #[test]
    fn noise_validation_and_parsing() {
        assert!(NoiseModel::DepolarizingGlobal { strength: 1.5 }.validate().is_err());
        assert!(NoiseModel::AngleJitter { strength: -0.1, seed: 0 }.validate().is_err());

        let m: NoiseModel = "depolarizing:0.25".parse().unwrap();
        assert_eq!(m, NoiseModel::DepolarizingGlobal { strength: 0.25 });
        let m: NoiseModel = "jitter:0.1:42".parse().unwrap();
        assert_eq!(m, NoiseModel::AngleJitter { strength: 0.1, seed: 42 });
        assert!("boom:0.1".parse::<NoiseModel>().is_err());
        assert!("depolarizing:2".parse::<NoiseModel>().is_err());
    }

    #[test]
    fn jitter_is_reproducible_and_per_setting() {
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let s = random_singlet_pure(2, 4).unwrap();
        let model = NoiseModel::AngleJitter { strength: 0.05, seed: 9 };
        let (_, a1) = model.apply(&s, &angles).unwrap();
        let (_, a2) = model.apply(&s, &angles).unwrap();
        assert_eq!(a1, a2);
        for i in 0..2 {
            for a in 0..3 {
                let d = (a1.angle(i, a) - angles.angle(i, a)).abs();
                assert!(d > 0.0 && d <= 0.05);
            }
        }
    }

    #[test]
    fn eq9_identity() {
        // Exact singlet: both sides vanish.
        let s = random_singlet_pure(2, 8).unwrap();
        let (lhs, rhs) = eq9_check(&s, 3).unwrap();
        assert!(lhs.abs() <= 1e-9 && rhs.abs() <= 1e-9);

        // Depolarized singlet: both sides equal knp.
        let s4 = uniform_singlet_mixture(4).unwrap();
        let angles = MeasurementAngles::default_planar(4, 3).unwrap();
        let (noisy, _) = NoiseModel::DepolarizingGlobal { strength: 0.1 }.apply(&s4, &angles).unwrap();
        let (lhs, rhs) = eq9_check(&noisy, 3).unwrap();
        assert!(close(lhs, 1.2, 1e-9), "lhs = {lhs}");
        assert!(close(rhs, 1.2, 1e-9), "rhs = {rhs}");

        // Arbitrary state: the identity holds regardless.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dims = PartyDims::qubits(2).unwrap();
        let arbitrary = crate::randutil::random_pure_state(&dims, &mut rng);
        let (lhs, rhs) = eq9_check(&arbitrary, 5).unwrap();
        assert!(close(lhs, rhs, 1e-9), "lhs = {lhs}, rhs = {rhs}");
    }

    #[test]
    fn state_json_round_trip() {
        let s = random_singlet_pure(2, 5).unwrap();
        let v = state_to_json(&s);
        assert_eq!(v["kind"], "pure");
        let s2 = state_from_json(&v).unwrap();
        assert!((s.density() - s2.density()).norm() < 1e-15);

        let m = uniform_singlet_mixture(4).unwrap();
        let v = state_to_json(&m);
        assert_eq!(v["kind"], "mixed");
        let m2 = state_from_json(&v).unwrap();
        assert!((m.density() - m2.density()).norm() < 1e-15);

        // Non-qubit dims round-trip through the dims field.
        let dims = PartyDims::new(vec![2, 3]).unwrap();
        let mm = QuantumState::maximally_mixed(dims);
        let v = state_to_json(&mm);
        let mm2 = state_from_json(&v).unwrap();
        assert_eq!(mm2.party_dims().dims(), &[2, 3]);
    }

    #[test]
    fn y_rotation_is_unitary_rotation() {
        let u = y_rotation(0.8);
        assert!((&u * u.adjoint() - identity(2)).norm() < 1e-14);
        // exp(iφY/2) Z exp(−iφY/2) = Z cos φ − X sin φ.
        let rotated = &u * pauli_z() * u.adjoint();
        let expected = pauli_z().scale(0.8_f64.cos()) - pauli_x().scale(0.8_f64.sin());
        assert!((rotated - expected).norm() < 1e-12);
    }
}
