//! Odd-degree forms are handled by an automatic lift: one auxiliary
//! variable, one explicit scale factor, bounds reported for the original
//! problem. Shown here on x^3 (sphere minimum -1) and a random cubic.
//!
//! Run with: cargo run --release --example odd_degree

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spherebound::combinat::enumerate_basis;
use spherebound::hierarchy::{sphere_min_bound, HierarchyOptions};
use spherebound::oracle::upper_bound_sphere_single;
use spherebound::polyform::{odd_lift, HomogeneousForm, MultiForm, parse_form};

fn main() {
    let vars = vec!["x1".to_string()];
    let p = parse_form("x1^3", &vars).expect("fixed text");
    let (lifted, scale) = odd_lift(&MultiForm::from_homogeneous(&p), 0).expect("odd degree");
    println!(
        "x^3: lift multiplies by an auxiliary linear form -> degree {:?}, scale {:.10}",
        lifted.factors()[0].1,
        scale
    );

    let mut opts = HierarchyOptions::default();
    opts.solver.tol = 1e-11;
    let r = sphere_min_bound(&p, &[2, 4, 8, 16, 32], &opts).expect("hierarchy runs");
    println!("sphere minimum of x^3 on {{-1, 1}} is -1; reported bounds already include the scale:");
    for l in &r.levels {
        println!("  k = {:>2}: bound = {:.8}", l.k, l.bound.unwrap());
    }

    // a random dense cubic in 3 variables
    let mut rng = StdRng::seed_from_u64(5);
    let terms: Vec<_> = enumerate_basis(3, 3)
        .into_iter()
        .map(|mi| (mi, rng.gen_range(-1.0..1.0)))
        .collect();
    let q = HomogeneousForm::from_float_terms(3, 3, terms).expect("valid cubic");
    let oracle = upper_bound_sphere_single(&q, 64, 9).expect("oracle runs");
    let rq = sphere_min_bound(&q, &[2, 4, 8, 16], &opts).expect("hierarchy runs");
    println!("\nrandom cubic (n = 3): oracle upper bound {:.8}", oracle.value);
    for l in &rq.levels {
        println!("  k = {:>2}: bound = {:.8}", l.k, l.bound.unwrap());
    }
}
