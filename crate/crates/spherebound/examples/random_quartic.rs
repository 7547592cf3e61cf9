//! Lower bounds for a dense random quartic in six variables, sandwiched
//! against the projected-gradient oracle from above.
//!
//! Run with: cargo run --release --example random_quartic

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spherebound::combinat::enumerate_basis;
use spherebound::hierarchy::{sphere_min_bound, HierarchyOptions, SolverMode};
use spherebound::oracle::upper_bound_sphere_single;
use spherebound::polyform::HomogeneousForm;

fn main() {
    let n = 6;
    let mut rng = StdRng::seed_from_u64(17);
    let terms: Vec<_> = enumerate_basis(n, 4)
        .into_iter()
        .map(|mi| (mi, rng.gen_range(-1.0..1.0)))
        .collect();
    let p = HomogeneousForm::from_float_terms(n, 4, terms).expect("valid quartic");
    println!("dense random quartic, n = {n}, {} monomials", p.num_terms());

    let upper = upper_bound_sphere_single(&p, 64, 7).expect("oracle runs");
    println!("oracle upper bound on the minimum: {:.8}\n", upper.value);

    let mut opts = HierarchyOptions::default();
    opts.solver.tol = 1e-9;
    opts.mode = SolverMode::Sparse;
    opts.warm_points = Some(upper.points.clone());

    let levels = [2u32, 3, 4, 6, 10, 18];
    let r = sphere_min_bound(&p, &levels, &opts).expect("hierarchy runs");
    println!("{:>5} {:>8} {:>14} {:>14} {:>10}", "k", "dim", "lower bound", "gap to oracle", "seconds");
    for l in &r.levels {
        let b = l.bound.unwrap();
        println!(
            "{:>5} {:>8} {:>14.8} {:>14.8} {:>10.3}",
            l.k,
            l.dim,
            b,
            upper.value - b,
            l.wall_seconds
        );
    }
}
