//! The two solver paths on one pencil: the dense reference (Cholesky +
//! symmetric eigendecomposition) and the matrix-free thick-restart Lanczos
//! in the B-inner product, with agreement and certificates printed.
//!
//! Run with: cargo run --release --example solver_paths

use std::time::Instant;

use spherebound::eigsolve::{min_gen_eig_dense, min_gen_eig_sparse, PencilProblem, SolverOptions};
use spherebound::gram::{build_nk, build_pk, sym_power_coords_real};
use spherebound::oracle::upper_bound_sphere_single;
use spherebound::polyform::motzkin;

fn main() {
    let p = motzkin();
    let k = 30u32;
    let a = build_pk(&p, k).expect("assembly");
    let b = build_nk(3, 3, k).expect("assembly");
    println!("Motzkin pencil at k = {k}: dim {}, nnz(P) {}, nnz(N) {}", a.dim(), a.nnz_upper(), b.nnz_upper());

    let opts = SolverOptions { tol: 1e-10, ..Default::default() };
    let prob = PencilProblem::new(&a, &b, opts).expect("tags match");

    let t0 = Instant::now();
    let dense = min_gen_eig_dense(&prob).expect("dense path");
    println!(
        "dense:  lambda = {:.10}  residual = {:.2e}  ({:.2}s)",
        dense.lambda_min,
        dense.residual,
        t0.elapsed().as_secs_f64()
    );

    let t1 = Instant::now();
    let sparse = min_gen_eig_sparse(&prob, None).expect("sparse path");
    println!(
        "sparse: lambda = {:.10}  residual = {:.2e}  iters = {}  ({:.2}s)",
        sparse.lambda_min,
        sparse.residual,
        sparse.iterations,
        t1.elapsed().as_secs_f64()
    );
    println!("paths agree to {:.2e}", (dense.lambda_min - sparse.lambda_min).abs());

    // warm start from the oracle point: the symmetric power of the minimizer
    // is nearly the bottom eigenvector at large k
    let oracle = upper_bound_sphere_single(&p, 64, 3).expect("oracle");
    let warm = sym_power_coords_real(&oracle.points[0], k);
    let t2 = Instant::now();
    let warmed = min_gen_eig_sparse(&prob, Some(&warm)).expect("warm start");
    println!(
        "warm:   lambda = {:.10}  iters = {} (vs {} cold)  ({:.2}s)",
        warmed.lambda_min,
        warmed.iterations,
        sparse.iterations,
        t2.elapsed().as_secs_f64()
    );

    // the returned eigenvector certifies its own eigenvalue
    let psi = &sparse.eigenvector.coords;
    let ap = a.apply(psi);
    let bp = b.apply(psi);
    let num: f64 = psi.iter().zip(&ap).map(|(x, y)| x * y).sum();
    let den: f64 = psi.iter().zip(&bp).map(|(x, y)| x * y).sum();
    println!("rayleigh quotient of the returned vector: {:.10}", num / den);
}
