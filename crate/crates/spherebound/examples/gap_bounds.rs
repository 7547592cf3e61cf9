//! The a-priori gap bound
//!
//!   p_min - eta_k <= ||P||_inf (1 + kappa(N)) 4d(n-1) / (delta(d) (k+1))
//!
//! evaluated next to the observed gaps on problems whose minimum is known
//! exactly. The condition number entering the bound is always the computed
//! one; the conjectured closed form is printed for comparison only.
//!
//! Run with: cargo run --release --example gap_bounds

use spherebound::combinat::delta;
use spherebound::gram::kappa_n;
use spherebound::hierarchy::{sphere_min_bound, HierarchyOptions, SolverMode};
use spherebound::polyform::motzkin;

fn main() {
    let p = motzkin();
    let mut opts = HierarchyOptions::default();
    opts.solver.tol = 1e-10;
    opts.mode = SolverMode::Sparse;
    opts.gap_annotations = true;

    let r = sphere_min_bound(&p, &[5, 10, 20, 40, 80], &opts).expect("hierarchy runs");
    let g = r.gap.as_ref().unwrap();
    println!("Motzkin form: p_min = 0 exactly");
    println!(
        "constants: ||P||_inf = {:.6}, kappa(N) computed = {:.6}, delta(3) = {}",
        g.norm_p_inf,
        g.kappa_computed,
        delta(3)
    );
    let kn = kappa_n(3, 3).expect("small dense");
    println!(
        "kappa(N) conjectured closed form = {:.6} (unproven; not used in the bound)\n",
        kn.conjectured
    );
    println!("{:>5} {:>14} {:>14} {:>9}", "k", "observed gap", "a-priori", "ratio");
    for (l, bound) in r.levels.iter().zip(&g.per_level) {
        let observed = 0.0 - l.bound.unwrap();
        println!("{:>5} {:>14.6} {:>14.4} {:>9.5}", l.k, observed, bound, observed / bound);
    }
    println!("\nthe envelope decays as 1/(k+1); the observed gaps track it with a small constant");
}
