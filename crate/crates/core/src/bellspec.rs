//! The Bell inequality instance and its closed-form bounds.
//!
//! The expression is a permutation-invariant combination of two-body
//! correlators,
//!
//!   B = (2/k) Σ_{a,b} Σ_{i≠j} ⟨σ_a^(i) σ_b^(j)⟩ cos[π(a−b)/k + φᵢ − φⱼ],
//!
//! with k ≥ 3 settings per party and optional local phases φᵢ (all zero in
//! the plain variant). Classical models obey B ≥ −2n/(k sin²[π/(2k)]) for
//! even n and zero phases; quantum models obey B ≥ −nk for any phases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Warn-vs-error threshold for a Bell value below the quantum bound.
pub const DEFICIT_NOISE_FLOOR: f64 = -1e-9;

// ---------------------------------------------------------------------------
// BellSpec
// ---------------------------------------------------------------------------

/// An inequality instance: party count, settings per party, local phases.
#[derive(Debug, Clone, PartialEq)]
pub struct BellSpec {
    n: usize,
    k: usize,
    phases: Vec<f64>,
}

impl BellSpec {
    /// Plain (zero-phase) instance.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        Self::with_phases(n, k, vec![0.0; n])
    }

    /// Instance with per-party phases φᵢ in radians.
    pub fn with_phases(n: usize, k: usize, phases: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("party count must be positive"));
        }
        if k < 3 {
            return Err(Error::arg(format!("k = {k} < 3 settings per party")));
        }
        if phases.len() != n {
            return Err(Error::arg(format!(
                "got {} phases for {n} parties",
                phases.len()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::arg("phases must be finite"));
        }
        Ok(BellSpec { n, k, phases })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn has_phases(&self) -> bool {
        self.phases.iter().any(|&p| p != 0.0)
    }

    /// Quantum bound −nk; holds for arbitrary phases.
    pub fn quantum_bound(&self) -> f64 {
        -((self.n * self.k) as f64)
    }

    /// Classical bound −2n/(k sin²[π/(2k)]).
    ///
    /// Only established for even n and zero phases; anything else errors
    /// (the brute-force oracle in [`crate::lhv`] still applies there).
    pub fn classical_bound(&self) -> Result<f64> {
        if self.has_phases() {
            return Err(Error::arg(
                "no closed-form classical bound with nonzero phases; use the brute-force oracle",
            ));
        }
        if self.n % 2 != 0 {
            return Err(Error::arg(
                "the classical-bound formula requires an even party count",
            ));
        }
        let k = self.k as f64;
        let s = (std::f64::consts::PI / (2.0 * k)).sin();
        Ok(-2.0 * self.n as f64 / (k * s * s))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(BellSpecJson::from(self)).expect("spec serializes")
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let raw: BellSpecJson = serde_json::from_value(v.clone())?;
        raw.try_into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BellSpecJson {
    n: usize,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases: Option<Vec<f64>>,
}

impl From<&BellSpec> for BellSpecJson {
    fn from(s: &BellSpec) -> Self {
        BellSpecJson {
            n: s.n,
            k: s.k,
            phases: if s.has_phases() { Some(s.phases.clone()) } else { None },
        }
    }
}

impl TryFrom<BellSpecJson> for BellSpec {
    type Error = Error;
    fn try_from(raw: BellSpecJson) -> Result<Self> {
        match raw.phases {
            Some(p) => BellSpec::with_phases(raw.n, raw.k, p),
            None => BellSpec::new(raw.n, raw.k),
        }
    }
}

// ---------------------------------------------------------------------------
// BellMatrix
// ---------------------------------------------------------------------------

/// The rank-2 projector M_ab = (2/k) cos[π(a−b)/k] and its eigenvectors.
///
/// M = cc^T + ss^T with c_a = √(2/k) cos(aπ/k) and s_a = √(2/k) sin(aπ/k).
#[derive(Debug, Clone)]
pub struct BellMatrix {
    m: DMatrix<f64>,
    c: DVector<f64>,
    s: DVector<f64>,
}

impl BellMatrix {
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }
}

pub fn bell_matrix(k: usize) -> Result<BellMatrix> {
    if k < 3 {
        return Err(Error::arg(format!("k = {k} < 3")));
    }
    let kf = k as f64;
    let pi = std::f64::consts::PI;
    let scale = (2.0 / kf).sqrt();
    let c = DVector::from_fn(k, |a, _| scale * (a as f64 * pi / kf).cos());
    let s = DVector::from_fn(k, |a, _| scale * (a as f64 * pi / kf).sin());
    let m = DMatrix::from_fn(k, k, |a, b| {
        (2.0 / kf) * ((a as f64 - b as f64) * pi / kf).cos()
    });
    Ok(BellMatrix { m, c, s })
}

// ---------------------------------------------------------------------------
// CorrelatorTable
// ---------------------------------------------------------------------------

/// Pairwise correlator data ⟨σ_a^(i) σ_b^(j)⟩ for i ≠ j.
///
/// Stored per ordered pair with the symmetry values[i,j,a,b] = values[j,i,b,a];
/// diagonal blocks (i = j) are unused and held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorTable {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl CorrelatorTable {
    pub fn zeros(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg("a correlator table needs at least two parties"));
        }
        if k < 3 {
            return Err(Error::arg(format!("k = {k} < 3")));
        }
        Ok(CorrelatorTable { n, k, values: vec![0.0; n * n * k * k] })
    }

    /// Builds the table by evaluating `f(i, j, a, b)` on pairs i < j and
    /// mirroring to (j, i, b, a).
    pub fn from_fn(n: usize, k: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut t = Self::zeros(n, k)?;
        for i in 0..n {
            for j in (i + 1)..n {
                for a in 0..k {
                    for b in 0..k {
                        t.set_pair(i, j, a, b, f(i, j, a, b));
                    }
                }
            }
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn idx(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        ((i * self.n + j) * self.k + a) * self.k + b
    }

    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.values[self.idx(i, j, a, b)]
    }

    /// Sets both (i,j,a,b) and its mirror (j,i,b,a).
    pub fn set_pair(&mut self, i: usize, j: usize, a: usize, b: usize, v: f64) {
        assert!(i != j, "diagonal correlators are undefined");
        let x = self.idx(i, j, a, b);
        self.values[x] = v;
        let y = self.idx(j, i, b, a);
        self.values[y] = v;
    }

    /// Checks range and symmetry invariants.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                for a in 0..self.k {
                    for b in 0..self.k {
                        let v = self.get(i, j, a, b);
                        if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&v) {
                            return Err(Error::arg(format!(
                                "correlator ({i},{j},{a},{b}) = {v} outside [-1, 1]"
                            )));
                        }
                        let w = self.get(j, i, b, a);
                        if (v - w).abs() > 1e-12 {
                            return Err(Error::arg(format!(
                                "correlator table breaks symmetry at ({i},{j},{a},{b}): {v} vs {w}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json_value(&self, phases: Option<&[f64]>) -> serde_json::Value {
        let mut entries = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for a in 0..self.k {
                    for b in 0..self.k {
                        entries.push(TableEntry { i, j, a, b, v: self.get(i, j, a, b) });
                    }
                }
            }
        }
        serde_json::to_value(TableJson {
            n: self.n,
            k: self.k,
            phases: phases.map(|p| p.to_vec()),
            values: entries,
        })
        .expect("table serializes")
    }

    /// Loads a table, completing missing mirrors (j,i,b,a) and checking the
    /// stated ones for consistency at 1e-9. Every i ≠ j cell must end up
    /// covered. Returns the table and the optional phases from the file.
    pub fn from_json_value(v: &serde_json::Value) -> Result<(Self, Option<Vec<f64>>)> {
        let raw: TableJson = serde_json::from_value(v.clone())?;
        let mut t = Self::zeros(raw.n, raw.k)?;
        let cells = raw.n * raw.n * raw.k * raw.k;
        let mut seen = vec![false; cells];
        for e in &raw.values {
            if e.i == e.j || e.i >= raw.n || e.j >= raw.n || e.a >= raw.k || e.b >= raw.k {
                return Err(Error::arg(format!(
                    "entry (i={}, j={}, a={}, b={}) out of range",
                    e.i, e.j, e.a, e.b
                )));
            }
            let x = t.idx(e.i, e.j, e.a, e.b);
            if seen[x] {
                let old = t.values[x];
                if (old - e.v).abs() > 1e-9 {
                    return Err(Error::arg(format!(
                        "inconsistent duplicate entry ({},{},{},{}): {} vs {}",
                        e.i, e.j, e.a, e.b, old, e.v
                    )));
                }
                continue;
            }
            t.values[x] = e.v;
            seen[x] = true;
            let y = t.idx(e.j, e.i, e.b, e.a);
            if seen[y] {
                let old = t.values[y];
                if (old - e.v).abs() > 1e-9 {
                    return Err(Error::arg(format!(
                        "entry ({},{},{},{}) = {} conflicts with its mirror {}",
                        e.i, e.j, e.a, e.b, e.v, old
                    )));
                }
            } else {
                t.values[y] = e.v;
                seen[y] = true;
            }
        }
        for i in 0..raw.n {
            for j in 0..raw.n {
                if i == j {
                    continue;
                }
                for a in 0..raw.k {
                    for b in 0..raw.k {
                        if !seen[t.idx(i, j, a, b)] {
                            return Err(Error::arg(format!(
                                "missing correlator entry (i={i}, j={j}, a={a}, b={b})"
                            )));
                        }
                    }
                }
            }
        }
        t.validate()?;
        Ok((t, raw.phases))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TableEntry {
    i: usize,
    j: usize,
    a: usize,
    b: usize,
    v: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableJson {
    n: usize,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases: Option<Vec<f64>>,
    values: Vec<TableEntry>,
}

// ---------------------------------------------------------------------------
// Bell value and violation deficit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BellValue {
    pub value: f64,
    pub spec: BellSpec,
}

/// Evaluates the Bell expression on correlator data.
pub fn bell_value(table: &CorrelatorTable, spec: &BellSpec) -> Result<BellValue> {
    if table.n() != spec.n() || table.k() != spec.k() {
        return Err(Error::dim(format!(
            "table is (n={}, k={}) but spec is (n={}, k={})",
            table.n(),
            table.k(),
            spec.n(),
            spec.k()
        )));
    }
    let n = spec.n();
    let k = spec.k();
    let kf = k as f64;
    let pi = std::f64::consts::PI;
    let phases = spec.phases();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let delta = phases[i] - phases[j];
            for a in 0..k {
                for b in 0..k {
                    let w = ((a as f64 - b as f64) * pi / kf + delta).cos();
                    total += table.get(i, j, a, b) * w;
                }
            }
        }
    }
    Ok(BellValue { value: 2.0 / kf * total, spec: spec.clone() })
}

/// Normalized distance to the quantum bound, ε = (B + nk)/(nk).
///
/// Values below the quantum bound beyond numerical noise are a bug in the
/// caller's pipeline and error out; small negative noise is clipped to 0.
pub fn violation_deficit(b: &BellValue) -> Result<f64> {
    let nk = (b.spec.n() * b.spec.k()) as f64;
    let raw = (b.value + nk) / nk;
    if raw < DEFICIT_NOISE_FLOOR {
        return Err(Error::invariant(format!(
            "Bell value {} is below the quantum bound {} (deficit {raw:.3e})",
            b.value,
            b.spec.quantum_bound()
        )));
    }
    Ok(raw.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bell_matrix_k3_explicit() {
        let bm = bell_matrix(3).unwrap();
        let expected = [
            [2.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0],
            [1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0],
            [-1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0],
        ];
        for a in 0..3 {
            for b in 0..3 {
                assert!(close(bm.m()[(a, b)], expected[a][b], 1e-14), "({a},{b})");
            }
        }
    }

    #[test]
    fn bell_matrix_invariants() {
        for k in 3..=10 {
            let bm = bell_matrix(k).unwrap();
            let m = bm.m();
            assert!(close(m.trace(), 2.0, 1e-12), "trace k={k}");
            let rank1 = bm.c() * bm.c().transpose() + bm.s() * bm.s().transpose();
            assert!((m - &rank1).norm() < 1e-12, "cc^T+ss^T k={k}");
            assert!((m * m - m).norm() < 1e-12, "projector k={k}");
            assert!(bm.c().dot(bm.s()).abs() < 1e-12);
            assert!(close(bm.c().norm(), 1.0, 1e-12));
            assert!(close(bm.s().norm(), 1.0, 1e-12));
        }
        assert!(bell_matrix(2).is_err());
    }

    #[test]
    fn bell_matrix_k4_eigenvalues() {
        let bm = bell_matrix(4).unwrap();
        let mut vals: Vec<f64> = bm.m().clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [0.0, 0.0, 1.0, 1.0];
        for (v, e) in vals.iter().zip(expected) {
            assert!(close(*v, e, 1e-12), "{vals:?}");
        }
    }

    #[test]
    fn bell_value_zero_table() {
        let spec = BellSpec::new(3, 4).unwrap();
        let t = CorrelatorTable::zeros(3, 4).unwrap();
        assert_eq!(bell_value(&t, &spec).unwrap().value, 0.0);
    }

    #[test]
    fn bell_value_two_qubit_singlet_table() {
        // Singlet correlators under planar measurements: ⟨σ_a σ_b⟩ = −cos[π(a−b)/3].
        let spec = BellSpec::new(2, 3).unwrap();
        let pi = std::f64::consts::PI;
        let t = CorrelatorTable::from_fn(2, 3, |_, _, a, b| {
            -((a as f64 - b as f64) * pi / 3.0).cos()
        })
        .unwrap();
        let b = bell_value(&t, &spec).unwrap();
        assert!(close(b.value, -6.0, 1e-12), "{}", b.value);
    }

    #[test]
    fn bell_value_all_plus_strategy_table() {
        let spec = BellSpec::new(2, 3).unwrap();
        let t = CorrelatorTable::from_fn(2, 3, |_, _, _, _| 1.0).unwrap();
        let b = bell_value(&t, &spec).unwrap();
        assert!(close(b.value, 16.0 / 3.0, 1e-12), "{}", b.value);
    }

    #[test]
    fn bell_value_shape_mismatch() {
        let spec = BellSpec::new(2, 3).unwrap();
        let t = CorrelatorTable::zeros(2, 4).unwrap();
        assert!(bell_value(&t, &spec).is_err());
    }

    #[test]
    fn classical_bound_values() {
        let cases = [
            (2, 3, -16.0 / 3.0),
            (4, 3, -32.0 / 3.0),
            (2, 4, -2.0 * (2.0 + 2.0_f64.sqrt())),
        ];
        for (n, k, expected) in cases {
            let spec = BellSpec::new(n, k).unwrap();
            assert!(close(spec.classical_bound().unwrap(), expected, 1e-12), "n={n} k={k}");
        }
    }

    #[test]
    fn classical_bound_rejects_odd_n_and_phases() {
        assert!(BellSpec::new(3, 3).unwrap().classical_bound().is_err());
        let spec = BellSpec::with_phases(2, 3, vec![0.1, 0.0]).unwrap();
        assert!(spec.classical_bound().is_err());
    }

    #[test]
    fn quantum_bound_values() {
        assert_eq!(BellSpec::new(2, 3).unwrap().quantum_bound(), -6.0);
        assert_eq!(BellSpec::new(4, 5).unwrap().quantum_bound(), -20.0);
        let spec = BellSpec::with_phases(4, 3, vec![0.3, 1.1, -0.4, 2.0]).unwrap();
        assert_eq!(spec.quantum_bound(), -12.0);
    }

    #[test]
    fn bounds_ordering_and_ratio_monotonicity() {
        // Classical bound sits strictly above the quantum bound, and the
        // ratio B_c/(nk) rises with k toward −8/π².
        let mut prev = f64::NEG_INFINITY;
        for k in 3..=12 {
            let spec = BellSpec::new(2, k).unwrap();
            let bc = spec.classical_bound().unwrap();
            assert!(bc > spec.quantum_bound());
            let ratio = bc / (2.0 * k as f64);
            assert!(ratio > prev, "k={k}");
            prev = ratio;
        }
        let limit = -8.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!(prev < limit && limit - prev < 0.01);
    }

    #[test]
    fn deficit_arithmetic() {
        let spec = BellSpec::new(4, 3).unwrap();
        let b = BellValue { value: spec.quantum_bound(), spec: spec.clone() };
        assert_eq!(violation_deficit(&b).unwrap(), 0.0);

        let b = BellValue { value: -10.8, spec: spec.clone() };
        assert!(close(violation_deficit(&b).unwrap(), 0.1, 1e-12));

        // At the classical bound for (2,3): ε = (−16/3 + 6)/6 = 1/9.
        let spec = BellSpec::new(2, 3).unwrap();
        let b = BellValue { value: spec.classical_bound().unwrap(), spec };
        assert!(close(violation_deficit(&b).unwrap(), 1.0 / 9.0, 1e-12));
    }

    #[test]
    fn deficit_noise_handling() {
        let spec = BellSpec::new(2, 3).unwrap();
        let b = BellValue { value: -6.0 - 1e-12, spec: spec.clone() };
        assert_eq!(violation_deficit(&b).unwrap(), 0.0);
        let b = BellValue { value: -6.1, spec };
        assert!(violation_deficit(&b).is_err());
    }

    #[test]
    fn table_json_round_trip_and_completion() {
        let pi = std::f64::consts::PI;
        let t = CorrelatorTable::from_fn(3, 3, |i, j, a, b| {
            0.3 * ((i + 2 * j + a) as f64 * 0.7 - b as f64 * pi / 5.0).sin()
        })
        .unwrap();
        let v = t.to_json_value(Some(&[0.1, 0.2, 0.3]));
        let (t2, phases) = CorrelatorTable::from_json_value(&v).unwrap();
        assert_eq!(t, t2);
        assert_eq!(phases.unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn table_json_missing_and_inconsistent() {
        let mut v = CorrelatorTable::from_fn(2, 3, |_, _, _, _| 0.5)
            .unwrap()
            .to_json_value(None);
        let removed = v["values"].as_array_mut().unwrap().pop().unwrap();
        assert!(matches!(
            CorrelatorTable::from_json_value(&v),
            Err(Error::InvalidArgument(_))
        ));

        // Re-add the cell plus a conflicting mirror.
        let arr = v["values"].as_array_mut().unwrap();
        arr.push(removed.clone());
        let mut conflict = removed;
        let (i, j) = (conflict["i"].clone(), conflict["j"].clone());
        conflict["i"] = j;
        conflict["j"] = i;
        let (a, b) = (conflict["a"].clone(), conflict["b"].clone());
        conflict["a"] = b;
        conflict["b"] = a;
        conflict["v"] = serde_json::json!(-0.75);
        v["values"].as_array_mut().unwrap().push(conflict);
        assert!(CorrelatorTable::from_json_value(&v).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = BellSpec::with_phases(3, 4, vec![0.0, 1.5, -0.2]).unwrap();
        let v = spec.to_json_value();
        assert_eq!(BellSpec::from_json_value(&v).unwrap(), spec);
        let plain = BellSpec::new(2, 3).unwrap();
        let v = plain.to_json_value();
        assert!(v.get("phases").is_none());
        assert_eq!(BellSpec::from_json_value(&v).unwrap(), plain);
    }

    #[test]
    fn bell_value_linearity_and_permutation_invariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let (n, k) = (4, 3);
        for trial in 0..20 {
            let t1 = CorrelatorTable::from_fn(n, k, |_, _, _, _| rng.gen_range(-1.0..1.0)).unwrap();
            let t2 = CorrelatorTable::from_fn(n, k, |_, _, _, _| rng.gen_range(-1.0..1.0)).unwrap();
            let phases: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let spec = BellSpec::with_phases(n, k, phases.clone()).unwrap();

            // Linearity.
            let (alpha, beta) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let combo = CorrelatorTable::from_fn(n, k, |i, j, a, b| {
                alpha * t1.get(i, j, a, b) + beta * t2.get(i, j, a, b)
            })
            .unwrap();
            let lhs = bell_value(&combo, &spec).unwrap().value;
            let rhs = alpha * bell_value(&t1, &spec).unwrap().value
                + beta * bell_value(&t2, &spec).unwrap().value;
            assert!(close(lhs, rhs, 1e-9), "trial {trial}");

            // Simultaneous permutation of parties in table and phases.
            let perm: Vec<usize> = match trial % 3 {
                0 => vec![1, 0, 3, 2],
                1 => vec![3, 2, 1, 0],
                _ => vec![2, 0, 3, 1],
            };
            let permuted =
                CorrelatorTable::from_fn(n, k, |i, j, a, b| t1.get(perm[i], perm[j], a, b)).unwrap();
            let pphases: Vec<f64> = (0..n).map(|i| phases[perm[i]]).collect();
            let pspec = BellSpec::with_phases(n, k, pphases).unwrap();
            let v1 = bell_value(&t1, &spec).unwrap().value;
            let v2 = bell_value(&permuted, &pspec).unwrap().value;
            assert!(close(v1, v2, 1e-9), "perm trial {trial}");
        }
    }
}
