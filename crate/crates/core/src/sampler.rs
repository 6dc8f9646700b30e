//! Finite-statistics layer: measurement rounds, persistence, estimation.
//!
//! Every round draws one setting per party uniformly at random and samples a
//! joint outcome from the exact Born distribution of the state, so the
//! empirical per-pair correlators converge to the exact table. The generator
//! is counter-based — round r uses an RNG stream keyed by (seed, r) — which
//! makes parallel generation reproducible and order-independent.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bellspec::{bell_value, BellSpec, CorrelatorTable};
use crate::error::{Error, Result};
use crate::hilbert::{embed_local, identity, Operator, QuantumState, StateVector};
use crate::quantum::{measurement_observable, MeasurementAngles};

// ---------------------------------------------------------------------------
// Round records
// ---------------------------------------------------------------------------

/// One measurement round: per-party setting indices and ±1 outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    #[serde(rename = "s")]
    pub settings: Vec<u8>,
    #[serde(rename = "o")]
    pub outcomes: Vec<i8>,
}

impl RoundRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.settings.len() != self.outcomes.len() {
            return Err("settings and outcomes have different lengths".into());
        }
        if self.settings.is_empty() {
            return Err("empty record".into());
        }
        if let Some(&o) = self.outcomes.iter().find(|&&o| o != 1 && o != -1) {
            return Err(format!("outcome {o} is not ±1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Simulates measurement rounds. Settings are uniform per party per round;
/// outcomes follow the exact joint distribution under the chosen product
/// measurement. Reproducible: round r depends only on (seed, r).
pub fn sample_rounds(
    state: &QuantumState,
    angles: &MeasurementAngles,
    rounds: usize,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    let dims = state.party_dims();
    if !dims.all_qubits() {
        return Err(Error::arg("sampling requires qubit parties"));
    }
    let n = dims.len();
    if angles.n() != n {
        return Err(Error::dim("angles do not cover the state's parties"));
    }
    if rounds == 0 {
        return Err(Error::arg("at least one round is required"));
    }
    let k = angles.k();

    // Mixed states walk through embedded projectors; precompute P⁺ per
    // (party, setting).
    let plus_projectors: Option<Vec<Vec<Operator>>> = if state.is_pure() {
        None
    } else {
        let mut all = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(k);
            for a in 0..k {
                let obs = measurement_observable(angles.angle(i, a));
                let p = (identity(2) + obs).scale(0.5);
                row.push(embed_local(&p, i, dims)?);
            }
            all.push(row);
        }
        Some(all)
    };

    let records: Vec<RoundRecord> = (0..rounds)
        .into_par_iter()
        .map(|round| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(round as u64);
            let settings: Vec<u8> = (0..n).map(|_| rng.gen_range(0..k) as u8).collect();
            let outcomes = match (&plus_projectors, state.pure_vector()) {
                (None, Some(psi)) => sample_pure(psi, n, angles, &settings, &mut rng),
                (Some(proj), _) => sample_mixed(&state.density(), proj, &settings, &mut rng),
                _ => unreachable!(),
            };
            RoundRecord { settings, outcomes }
        })
        .collect();
    Ok(records)
}

/// Applies a local 2×2 matrix at `party` to an n-qubit state vector.
fn apply_local_qubit(v: &StateVector, n: usize, party: usize, m: &[[Complex64; 2]; 2]) -> StateVector {
    let stride = 1usize << (n - 1 - party);
    let mut out = v.clone();
    for r in 0..v.len() {
        if r & stride == 0 {
            let (a, b) = (v[r], v[r | stride]);
            out[r] = m[0][0] * a + m[0][1] * b;
            out[r | stride] = m[1][0] * a + m[1][1] * b;
        }
    }
    out
}

fn sample_pure(
    psi: &StateVector,
    n: usize,
    angles: &MeasurementAngles,
    settings: &[u8],
    rng: &mut ChaCha8Rng,
) -> Vec<i8> {
    let mut v = psi.clone();
    let mut outcomes = Vec::with_capacity(n);
    for (i, &a) in settings.iter().enumerate() {
        let theta = angles.angle(i, a as usize);
        let (c, s) = (theta.cos(), theta.sin());
        let re = |x: f64| Complex64::new(x, 0.0);
        // P⁺ = (1 + Z cos θ + X sin θ)/2.
        let p_plus = [
            [re((1.0 + c) / 2.0), re(s / 2.0)],
            [re(s / 2.0), re((1.0 - c) / 2.0)],
        ];
        let projected = apply_local_qubit(&v, n, i, &p_plus);
        let prob_plus = projected.norm_squared();
        if rng.gen::<f64>() < prob_plus {
            outcomes.push(1);
            v = projected.unscale(prob_plus.sqrt());
        } else {
            outcomes.push(-1);
            let complement = &v - &projected;
            v = complement.clone().unscale(complement.norm());
        }
    }
    outcomes
}

fn sample_mixed(
    rho: &DMatrix<Complex64>,
    plus_projectors: &[Vec<Operator>],
    settings: &[u8],
    rng: &mut ChaCha8Rng,
) -> Vec<i8> {
    let d = rho.nrows();
    let mut current = rho.clone();
    let mut outcomes = Vec::with_capacity(settings.len());
    for (i, &a) in settings.iter().enumerate() {
        let p = &plus_projectors[i][a as usize];
        let prob_plus = (p * &current).trace().re.clamp(0.0, 1.0);
        if rng.gen::<f64>() < prob_plus {
            outcomes.push(1);
            current = p * current * p;
            current.unscale_mut(prob_plus);
        } else {
            outcomes.push(-1);
            let q = identity(d) - p;
            current = &q * current * &q;
            current.unscale_mut(1.0 - prob_plus);
        }
    }
    outcomes
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

/// Plug-in estimate of the Bell value from measurement rounds.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub table_hat: CorrelatorTable,
    /// Sample counts per (i, j, a, b), mirrored like the table.
    pub counts: Vec<u64>,
    pub bell_hat: f64,
    pub stderr: f64,
    pub rounds_used: usize,
}

impl EstimateReport {
    pub fn count(&self, n: usize, k: usize, i: usize, j: usize, a: usize, b: usize) -> u64 {
        debug_assert_eq!(self.table_hat.n(), n);
        self.counts[((i * n + j) * k + a) * k + b]
    }

    pub fn to_json_value(&self, spec: &BellSpec) -> serde_json::Value {
        serde_json::json!({
            "bell_hat": self.bell_hat,
            "stderr": self.stderr,
            "rounds_used": self.rounds_used,
            "table_hat": self.table_hat.to_json_value(if spec.has_phases() {
                Some(spec.phases())
            } else {
                None
            }),
        })
    }
}

/// Empirical means per (i, j, a, b) cell and the plug-in Bell value.
///
/// The standard error propagates the per-cell binomial variance through the
/// linear form, treating cells as independent. Cells sharing a round are in
/// fact correlated, so this is an approximation; the split-half
/// self-consistency test bounds its practical error.
pub fn estimate(records: &[RoundRecord], spec: &BellSpec) -> Result<EstimateReport> {
    let n = spec.n();
    let k = spec.k();
    if records.is_empty() {
        return Err(Error::arg("no rounds to estimate from"));
    }
    for (idx, r) in records.iter().enumerate() {
        r.validate().map_err(|msg| Error::ParseLine { line: idx + 1, msg })?;
        if r.settings.len() != n {
            return Err(Error::dim(format!(
                "round {} covers {} parties, spec has {n}",
                idx + 1,
                r.settings.len()
            )));
        }
        if let Some(&s) = r.settings.iter().find(|&&s| s as usize >= k) {
            return Err(Error::arg(format!("round {}: setting {s} out of range", idx + 1)));
        }
    }

    let cell = |i: usize, j: usize, a: usize, b: usize| ((i * n + j) * k + a) * k + b;
    let mut sums = vec![0.0f64; n * n * k * k];
    let mut counts = vec![0u64; n * n * k * k];
    for r in records {
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (r.settings[i] as usize, r.settings[j] as usize);
                let prod = (r.outcomes[i] * r.outcomes[j]) as f64;
                sums[cell(i, j, a, b)] += prod;
                counts[cell(i, j, a, b)] += 1;
                sums[cell(j, i, b, a)] += prod;
                counts[cell(j, i, b, a)] += 1;
            }
        }
    }

    let mut missing = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for a in 0..k {
                for b in 0..k {
                    if counts[cell(i, j, a, b)] == 0 {
                        missing.push(format!("(i={i}, j={j}, a={a}, b={b})"));
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        let shown = missing.iter().take(5).cloned().collect::<Vec<_>>().join(", ");
        return Err(Error::arg(format!(
            "{} empty correlator cells, e.g. {shown}; collect more rounds",
            missing.len()
        )));
    }

    let table_hat = CorrelatorTable::from_fn(n, k, |i, j, a, b| {
        sums[cell(i, j, a, b)] / counts[cell(i, j, a, b)] as f64
    })?;
    let bell_hat = bell_value(&table_hat, spec)?.value;

    let pi = std::f64::consts::PI;
    let kf = k as f64;
    let phases = spec.phases();
    let mut variance = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for a in 0..k {
                for b in 0..k {
                    let m = table_hat.get(i, j, a, b);
                    let cnt = counts[cell(i, j, a, b)] as f64;
                    // Weight of the unordered pair: both (i,j,a,b) and
                    // (j,i,b,a) carry the same cosine.
                    let w = 2.0 * (2.0 / kf)
                        * ((a as f64 - b as f64) * pi / kf + phases[i] - phases[j]).cos();
                    variance += w * w * (1.0 - m * m).max(0.0) / cnt;
                }
            }
        }
    }

    Ok(EstimateReport {
        table_hat,
        counts,
        bell_hat,
        stderr: variance.sqrt(),
        rounds_used: records.len(),
    })
}

// ---------------------------------------------------------------------------
// Persistence (line-delimited JSON)
// ---------------------------------------------------------------------------

pub fn write_rounds_to(w: impl Write, records: &[RoundRecord]) -> Result<()> {
    let mut w = BufWriter::new(w);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rounds(path: impl AsRef<Path>, records: &[RoundRecord]) -> Result<()> {
    write_rounds_to(std::fs::File::create(path)?, records)
}

pub fn read_rounds_from(r: impl std::io::Read) -> Result<Vec<RoundRecord>> {
    let reader = BufReader::new(r);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RoundRecord = serde_json::from_str(&line)
            .map_err(|e| Error::ParseLine { line: idx + 1, msg: e.to_string() })?;
        record
            .validate()
            .map_err(|msg| Error::ParseLine { line: idx + 1, msg })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_rounds(path: impl AsRef<Path>) -> Result<Vec<RoundRecord>> {
    read_rounds_from(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::PartyDims;
    use crate::lhv::{strategy_value, Strategy};
    use crate::quantum::{random_singlet_pure, uniform_singlet_mixture, NoiseModel};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn forced_setting_singlet_is_anticorrelated() {
        // A single setting per party pins every round to (0, 0); the singlet
        // then gives perfectly anticorrelated outcomes.
        let s = random_singlet_pure(2, 1).unwrap();
        let angles = MeasurementAngles::new(vec![vec![0.0], vec![0.0]]).unwrap();
        let records = sample_rounds(&s, &angles, 200, 3).unwrap();
        for r in &records {
            assert_eq!(r.outcomes[0] * r.outcomes[1], -1);
        }
    }

    #[test]
    fn maximally_mixed_outcomes_are_fair() {
        let dims = PartyDims::qubits(2).unwrap();
        let mm = QuantumState::maximally_mixed(dims);
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let records = sample_rounds(&mm, &angles, 20_000, 5).unwrap();
        let mean0: f64 =
            records.iter().map(|r| r.outcomes[0] as f64).sum::<f64>() / records.len() as f64;
        assert!(mean0.abs() < 0.03, "{mean0}");
        let report = estimate(&records, &BellSpec::new(2, 3).unwrap()).unwrap();
        assert!(report.bell_hat.abs() < 0.2, "{}", report.bell_hat);
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = random_singlet_pure(2, 2).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let a = sample_rounds(&s, &angles, 500, 42).unwrap();
        let b = sample_rounds(&s, &angles, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_rounds(&s, &angles, 500, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mixed_state_sampling_matches_pure_marginals() {
        // The singlet's outcome marginals are reproduced by its density form.
        let s = random_singlet_pure(2, 3).unwrap();
        let as_mixed = QuantumState::mixed(s.density(), s.party_dims().clone()).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let spec = BellSpec::new(2, 3).unwrap();
        let rp = estimate(&sample_rounds(&s, &angles, 30_000, 7).unwrap(), &spec).unwrap();
        let rm = estimate(&sample_rounds(&as_mixed, &angles, 30_000, 8).unwrap(), &spec).unwrap();
        assert!(
            (rp.bell_hat - rm.bell_hat).abs() <= 4.0 * (rp.stderr + rm.stderr),
            "pure {} vs mixed {}",
            rp.bell_hat,
            rm.bell_hat
        );
    }

    #[test]
    fn deterministic_rounds_reproduce_strategy_value_exactly() {
        let spec = BellSpec::new(3, 3).unwrap();
        let strat =
            Strategy::new(vec![vec![1, -1, 1], vec![-1, -1, 1], vec![1, 1, -1]]).unwrap();
        // Deterministic boxes: outcomes fixed by the strategy, settings random.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let records: Vec<RoundRecord> = (0..2000)
            .map(|_| {
                let settings: Vec<u8> = (0..3).map(|_| rng.gen_range(0..3) as u8).collect();
                let outcomes: Vec<i8> = settings
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| strat.outcome(i, a as usize))
                    .collect();
                RoundRecord { settings, outcomes }
            })
            .collect();
        let report = estimate(&records, &spec).unwrap();
        let exact = strategy_value(&strat, &spec).unwrap();
        assert!(close(report.bell_hat, exact, 1e-12));
        assert_eq!(report.stderr, 0.0);
    }

    #[test]
    fn singlet_estimate_within_statistical_error() {
        let s = random_singlet_pure(2, 4).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let records = sample_rounds(&s, &angles, 100_000, 7).unwrap();
        let report = estimate(&records, &BellSpec::new(2, 3).unwrap()).unwrap();
        assert!(
            (report.bell_hat + 6.0).abs() <= 4.0 * report.stderr,
            "bell_hat = {}, stderr = {}",
            report.bell_hat,
            report.stderr
        );
    }

    #[test]
    fn split_half_self_consistency() {
        let s = uniform_singlet_mixture(4).unwrap();
        let angles = MeasurementAngles::default_planar(4, 3).unwrap();
        let spec = BellSpec::new(4, 3).unwrap();
        let records = sample_rounds(&s, &angles, 40_000, 9).unwrap();
        let even: Vec<RoundRecord> = records.iter().step_by(2).cloned().collect();
        let odd: Vec<RoundRecord> = records.iter().skip(1).step_by(2).cloned().collect();
        let re = estimate(&even, &spec).unwrap();
        let ro = estimate(&odd, &spec).unwrap();
        let combined = (re.stderr * re.stderr + ro.stderr * ro.stderr).sqrt();
        assert!(
            (re.bell_hat - ro.bell_hat).abs() <= 6.0 * combined,
            "{} vs {}",
            re.bell_hat,
            ro.bell_hat
        );
    }

    #[test]
    fn stderr_scales_inverse_sqrt() {
        let s = random_singlet_pure(2, 5).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let spec = BellSpec::new(2, 3).unwrap();
        let r1 = estimate(&sample_rounds(&s, &angles, 10_000, 13).unwrap(), &spec).unwrap();
        let r4 = estimate(&sample_rounds(&s, &angles, 40_000, 13).unwrap(), &spec).unwrap();
        let ratio = r1.stderr / r4.stderr;
        assert!((1.6..=2.4).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn noisy_state_estimate_tracks_exact_value() {
        let s = random_singlet_pure(2, 6).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let (noisy, _) =
            NoiseModel::DepolarizingGlobal { strength: 0.2 }.apply(&s, &angles).unwrap();
        let spec = BellSpec::new(2, 3).unwrap();
        let records = sample_rounds(&noisy, &angles, 50_000, 15).unwrap();
        let report = estimate(&records, &spec).unwrap();
        // Exact value is (1 − p)(−6) = −4.8.
        assert!(
            (report.bell_hat + 4.8).abs() <= 4.0 * report.stderr,
            "bell_hat = {}",
            report.bell_hat
        );
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let s = random_singlet_pure(2, 8).unwrap();
        let angles = MeasurementAngles::default_planar(2, 3).unwrap();
        let records = sample_rounds(&s, &angles, 1000, 21).unwrap();

        let mut buf = Vec::new();
        write_rounds_to(&mut buf, &records).unwrap();
        let back = read_rounds_from(buf.as_slice()).unwrap();
        assert_eq!(records, back);

        // Outcome 0 is rejected with the offending line number.
        let bad = b"{\"s\":[0,1],\"o\":[1,-1]}\n{\"s\":[0,0],\"o\":[0,1]}\n";
        match read_rounds_from(&bad[..]) {
            Err(Error::ParseLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a line-2 parse error, got {other:?}"),
        }

        // Truncated JSON is rejected.
        let partial = b"{\"s\":[0,1],\"o\":[1,-1]}\n{\"s\":[0,";
        assert!(matches!(read_rounds_from(&partial[..]), Err(Error::ParseLine { .. })));

        // Empty file: no records, and estimation then fails.
        let empty = read_rounds_from(&b""[..]).unwrap();
        assert!(empty.is_empty());
        assert!(estimate(&empty, &BellSpec::new(2, 3).unwrap()).is_err());
    }

    #[test]
    fn estimate_rejects_sparse_cells() {
        // All rounds at setting pair (0, 0): every other cell is empty.
        let records: Vec<RoundRecord> = (0..50)
            .map(|_| RoundRecord { settings: vec![0, 0], outcomes: vec![1, -1] })
            .collect();
        let err = estimate(&records, &BellSpec::new(2, 3).unwrap()).unwrap_err();
        assert!(err.to_string().contains("empty correlator cells"), "{err}");
    }

    #[test]
    fn estimate_validates_round_shapes() {
        let spec = BellSpec::new(2, 3).unwrap();
        let bad_setting = vec![RoundRecord { settings: vec![0, 7], outcomes: vec![1, 1] }];
        assert!(estimate(&bad_setting, &spec).is_err());
        let bad_len = vec![RoundRecord { settings: vec![0], outcomes: vec![1] }];
        assert!(estimate(&bad_len, &spec).is_err());
    }
}
