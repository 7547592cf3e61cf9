//! The exact-arithmetic identity suite (also behind `spherebound check`):
//! trace identities of the central catalecticant, the binomial summation
//! identity, the reduction-constant curve, the condition-number table, and
//! a fixed complex-point evaluation.
//!
//! Run with: cargo run --release --example identities

use spherebound::combinat::{claim4_check, delta, delta_curve};
use spherebound::gram::kappa_n;
use spherebound::report::identity_suite;

fn main() {
    for line in identity_suite() {
        println!("{} {}: {}", if line.passed { "PASS" } else { "FAIL" }, line.name, line.detail);
    }

    println!("\nreduction constants delta(d) = 2^d / C(2d,d):");
    for d in 1..=8 {
        println!("  d = {d}: {} (curve value at t = 1/2: {:.12})", delta(d), delta_curve(d, 0.5).unwrap());
    }

    println!("\none summation identity instance (d = 4, s = 2, k = 1):");
    let (lhs, rhs) = claim4_check(4, 2, 1).unwrap();
    println!("  lhs = {lhs}, rhs = {rhs}");

    println!("\ncondition numbers of N^(d) (computed vs conjectured Gamma-binomial):");
    for (n, d) in [(2usize, 2u32), (3, 2), (2, 3), (4, 2), (3, 3), (4, 3), (5, 2)] {
        let k = kappa_n(n, d).unwrap();
        println!("  n = {n}, d = {d}: {:.10} vs {:.10}", k.computed, k.conjectured);
    }
}
