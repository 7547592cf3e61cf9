//! Upper bounds on the real spectral norm of a tensor: nonincreasing in the
//! level, converging at O(1/k). For matrices the SVD gives the exact value,
//! so the convergence is visible; an order-3 example follows.
//!
//! Run with: cargo run --release --example spectral_norm

use nalgebra::DMatrix;
use spherebound::hierarchy::{spectral_norm_bound, HierarchyOptions};
use spherebound::oracle::spectral_norm_matrix;
use spherebound::polyform::Tensor;

fn main() {
    let m = DMatrix::from_fn(4, 4, |i, j| ((1 + i * 4 + j) as f64 * 0.37).sin());
    let t = Tensor::from_matrix(&m);
    let sigma = spectral_norm_matrix(&t).expect("m = 2").value;
    println!("random 4x4 matrix, sigma_max = {sigma:.8} (SVD)");

    let mut opts = HierarchyOptions::default();
    opts.solver.tol = 1e-10;
    opts.gap_annotations = true;
    let r = spectral_norm_bound(&t, &[1, 2, 3, 4, 6, 8], &opts).expect("hierarchy runs");
    println!("{:>5} {:>9} {:>14} {:>12} {:>10}", "k", "dim", "upper bound", "mu - sigma", "seconds");
    for l in &r.levels {
        let mu = l.bound.unwrap();
        println!(
            "{:>5} {:>9} {:>14.8} {:>12.2e} {:>10.3}",
            l.k,
            l.dim,
            mu,
            mu - sigma,
            l.wall_seconds
        );
    }

    // order-3: the two-basis-vector tensor has spectral norm exactly 1
    let t3 = Tensor::new(vec![2, 2, 2], vec![(vec![0, 0, 0], 1.0), (vec![1, 1, 1], 1.0)])
        .expect("valid tensor");
    let r3 = spectral_norm_bound(&t3, &[1, 2, 4, 8], &opts).expect("hierarchy runs");
    println!("\norder-3 tensor with ones at (0,0,0) and (1,1,1); spectral norm = 1");
    for l in &r3.levels {
        println!("  k = {:>2}: mu_k = {:.8}", l.k, l.bound.unwrap());
    }
}
