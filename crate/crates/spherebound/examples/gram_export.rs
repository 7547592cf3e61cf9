//! Assemble the pencil matrices directly, inspect their sparsity, verify
//! the Gram evaluation identity at random points, and export in coordinate
//! text format (one "row col value" per line, 1-based, upper triangle).
//!
//! Run with: cargo run --release --example gram_export

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spherebound::gram::{build_nk, build_pk, quadratic_value_real};
use spherebound::polyform::motzkin;

fn main() {
    let p = motzkin();
    let d = p.degree() / 2;
    for k in [3u32, 13, 53, 203] {
        let a = build_pk(&p, k).expect("assembly");
        let b = build_nk(3, d, k).expect("assembly");
        let dim = a.dim() as f64;
        println!(
            "k = {:>3}: dim {:>6}, nnz(P_k) {:>8} ({:.3}% dense), nnz(N_k) {:>8}",
            k,
            a.dim(),
            a.nnz_upper(),
            100.0 * a.nnz_upper() as f64 / (dim * (dim + 1.0) / 2.0),
            b.nnz_upper(),
        );
    }

    // evaluation identity: psi(x)^T P_k psi(x) = p(x) ||x||^{2(k-d)}
    let k = 13u32;
    let a = build_pk(&p, k).expect("assembly");
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = x.iter().map(|v| v * v).sum();
        let lhs = quadratic_value_real(&a, &x).expect("dimensions match");
        let rhs = p.evaluate(&x).expect("dimensions match") * n2.powi((k - d) as i32);
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-12));
    }
    println!("\nevaluation identity at k = {k}: worst relative error over 100 points = {worst:.2e}");

    let mut coo = Vec::new();
    a.write_coo(&mut coo).expect("in-memory write");
    let text = String::from_utf8(coo).expect("ascii");
    println!("\nfirst lines of the P_{k} export ({} entries):", a.nnz_upper());
    for line in text.lines().take(5) {
        println!("  {line}");
    }
}
