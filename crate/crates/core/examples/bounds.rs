//! Classical vs quantum bounds for the permutation-invariant chained Bell
//! expression, with the brute-force search over deterministic local
//! strategies as an independent check of the closed form.
//!
//! ```bash
//! cargo run --release --example bounds
//! ```

use singlet_selftest::bellspec::BellSpec;
use singlet_selftest::lhv::{brute_force_min, enumeration_size, DEFAULT_BUDGET};

fn main() {
    println!("{:>3} {:>3} {:>14} {:>14} {:>14} {:>10}", "n", "k", "classical", "brute force", "quantum", "classes");
    for (n, k) in [(2, 3), (2, 4), (2, 5), (4, 3), (4, 4), (6, 3), (6, 4)] {
        let spec = BellSpec::new(n, k).expect("valid spec");
        let classical = spec.classical_bound().expect("even n");
        let result = brute_force_min(&spec, DEFAULT_BUDGET).expect("within budget");
        assert!(result.complete);
        println!(
            "{n:>3} {k:>3} {classical:>14.9} {:>14.9} {:>14.9} {:>10}",
            result.min_value,
            spec.quantum_bound(),
            result.enumerated,
        );
        let err = (result.min_value - classical).abs();
        assert!(err < 1e-9, "enumeration disagrees with the closed form");
    }

    // The minimizing strategy for the smallest instance: half the parties
    // play σ, the other half −σ, killing the collective term.
    let spec = BellSpec::new(2, 3).unwrap();
    let result = brute_force_min(&spec, DEFAULT_BUDGET).unwrap();
    println!("\nwitness for (n=2, k=3): {:?}", result.witness.outcomes());
    println!(
        "enumeration size grows as multisets: (n=6, k=5) has {} classes vs 2^30 ordered strategies",
        enumeration_size(&BellSpec::new(6, 5).unwrap())
    );
}
