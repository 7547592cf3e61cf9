//! Minimum eigenvalue of the symmetric-definite pencil `A psi = lambda B psi`.
//!
//! Two paths share one result contract:
//! - a dense reference path (Cholesky of B, symmetric eigendecomposition of
//!   `L^-1 A L^-T`, eigenvector mapped back through `L^-T`);
//! - a matrix-free path: Lanczos with full reorthogonalization and thick
//!   restarts on the operator `B^-1 A`, self-adjoint in the B-inner product.
//!   `B^-1` is applied by Jacobi-preconditioned CG, which converges in a few
//!   dozen iterations because `kappa(N_k) <= kappa(N^(d))` uniformly in k.
//!
//! Both paths return the Rayleigh quotient of the final vector, so the
//! reported eigenvalue is consistent with the eigenvector by construction.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::gram::{OrthoVec, SparseSymMatrix};

/// Which solver produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    Dense,
    Sparse,
}

impl std::fmt::Display for SolvePath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolvePath::Dense => write!(f, "dense"),
            SolvePath::Sparse => write!(f, "sparse"),
        }
    }
}

/// Solver configuration knobs.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative residual target: `||A psi - lambda B psi|| / (||A||_F ||psi||)`.
    pub tol: f64,
    /// Cap on operator applications in the iterative path.
    pub max_iter: usize,
    /// Krylov basis size before a thick restart.
    pub block_size: usize,
    /// Seed for the deterministic pseudo-random starting vector.
    pub seed: u64,
    /// Largest dimension handled by the dense path (and the auto cutover).
    pub dense_ceiling: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 50_000, block_size: 64, seed: 2024, dense_ceiling: 4000 }
    }
}

/// A symmetric-definite generalized eigenproblem plus solver configuration.
#[derive(Debug, Clone)]
pub struct PencilProblem<'a> {
    pub a: &'a SparseSymMatrix,
    pub b: &'a SparseSymMatrix,
    pub opts: SolverOptions,
}

impl<'a> PencilProblem<'a> {
    pub fn new(a: &'a SparseSymMatrix, b: &'a SparseSymMatrix, opts: SolverOptions) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        if a.tag() != b.tag() {
            return Err(Error::InvalidProblem("pencil matrices carry different basis tags".into()));
        }
        if opts.tol <= 0.0 || opts.tol.is_nan() {
            return Err(Error::InvalidProblem("solver tolerance must be positive".into()));
        }
        Ok(PencilProblem { a, b, opts })
    }
}

/// Smallest generalized eigenpair with its certificate numbers.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub lambda_min: f64,
    pub eigenvector: OrthoVec,
    /// `||A psi - lambda B psi|| / (||A||_F ||psi||)` at return.
    pub residual: f64,
    pub iterations: usize,
    pub path: SolvePath,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn rayleigh(a: &SparseSymMatrix, b: &SparseSymMatrix, psi: &[f64]) -> f64 {
    let ap = a.apply(psi);
    let bp = b.apply(psi);
    dot(psi, &ap) / dot(psi, &bp)
}

fn residual_of(a: &SparseSymMatrix, b: &SparseSymMatrix, psi: &[f64], lambda: f64, frob_a: f64) -> f64 {
    if frob_a == 0.0 {
        return 0.0;
    }
    let ap = a.apply(psi);
    let bp = b.apply(psi);
    let mut r = 0.0;
    for i in 0..psi.len() {
        let d = ap[i] - lambda * bp[i];
        r += d * d;
    }
    r.sqrt() / (frob_a * norm2(psi))
}

fn finish(
    a: &SparseSymMatrix,
    b: &SparseSymMatrix,
    mut psi: Vec<f64>,
    iterations: usize,
    path: SolvePath,
) -> EigResult {
    let n = norm2(&psi);
    if n > 0.0 {
        psi.iter_mut().for_each(|v| *v /= n);
    }
    let lambda = rayleigh(a, b, &psi);
    let residual = residual_of(a, b, &psi, lambda, a.frobenius_norm());
    EigResult {
        lambda_min: lambda,
        eigenvector: OrthoVec { tag: a.tag().clone(), coords: psi },
        residual,
        iterations,
        path,
    }
}

/// Dense reference path: Cholesky `B = L L^T`, symmetric eigendecomposition
/// of `L^-1 A L^-T`, eigenvector mapped back through `L^-T`.
pub fn min_gen_eig_dense(prob: &PencilProblem) -> Result<EigResult> {
    let dim = prob.a.dim();
    if dim > prob.opts.dense_ceiling {
        return Err(Error::SizeGuard(format!(
            "dense path limited to dim <= {} (got {dim})",
            prob.opts.dense_ceiling
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidProblem("empty pencil".into()));
    }
    let ad = prob.a.to_dense();
    let b_ident = prob.b.is_identity();
    let (c, chol) = if b_ident {
        (ad.clone(), None)
    } else {
        let chol = nalgebra::Cholesky::new(prob.b.to_dense()).ok_or_else(|| {
            Error::NotSpd("Cholesky failed on the B side; the pencil is malformed".into())
        })?;
        let l = chol.l();
        let y = l
            .solve_lower_triangular(&ad)
            .ok_or_else(|| Error::NotSpd("singular Cholesky factor".into()))?;
        let c = l
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::NotSpd("singular Cholesky factor".into()))?;
        (c, Some(chol))
    };
    let c = (&c + c.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(c);
    let mut imin = 0;
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if e < eig.eigenvalues[imin] {
            imin = i;
        }
    }
    let u = eig.eigenvectors.column(imin).into_owned();
    let psi = match &chol {
        None => u,
        Some(chol) => chol
            .l()
            .transpose()
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::NotSpd("singular Cholesky factor".into()))?,
    };
    Ok(finish(prob.a, prob.b, psi.iter().copied().collect(), 0, SolvePath::Dense))
}

/// Jacobi-preconditioned conjugate gradients for `B x = rhs`.
fn cg_solve(
    b: &SparseSymMatrix,
    inv_diag: &[f64],
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for _ in 0..max_iter {
        b.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::NotSpd(format!(
                "conjugate gradients found a direction of nonpositive curvature ({pq:.3e})"
            )));
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        if norm2(&r) <= rel_tol * rhs_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotSpd("inner B-solve did not converge; B is ill-conditioned or indefinite".into()))
}

/// Iterative path: thick-restart Lanczos on `B^-1 A` in the B-inner product.
///
/// The optional `warm_start` (e.g. the embedded symmetric power of a good
/// oracle point) replaces the seeded random starting vector.
pub fn min_gen_eig_sparse(prob: &PencilProblem, warm_start: Option<&[f64]>) -> Result<EigResult> {
    let a = prob.a;
    let b = prob.b;
    let dim = a.dim();
    if dim == 0 {
        return Err(Error::InvalidProblem("empty pencil".into()));
    }
    let frob_a = a.frobenius_norm();
    let b_ident = b.is_identity();

    let inv_diag: Vec<f64> = if b_ident {
        Vec::new()
    } else {
        let diag = b.diagonal();
        if let Some(bad) = diag.iter().find(|&&d| d <= 0.0) {
            return Err(Error::NotSpd(format!("B has a nonpositive diagonal entry {bad}")));
        }
        diag.iter().map(|d| 1.0 / d).collect()
    };
    // inner solves two orders tighter than the outer target, floored at the
    // attainable CG residual level
    let inner_tol = (prob.opts.tol * 1e-4).clamp(1e-14, 1e-12);
    let solve_b = |rhs: &[f64]| -> Result<Vec<f64>> {
        if b_ident {
            Ok(rhs.to_vec())
        } else {
            cg_solve(b, &inv_diag, rhs, inner_tol, 2000)
        }
    };
    let b_apply = |x: &[f64]| -> Vec<f64> {
        if b_ident {
            x.to_vec()
        } else {
            b.apply(x)
        }
    };

    // zero operator: lambda = 0 with any vector
    if frob_a == 0.0 {
        let mut psi = vec![0.0; dim];
        psi[0] = 1.0;
        return Ok(finish(a, b, psi, 0, SolvePath::Sparse));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(prob.opts.seed);
    let random_vec = |rng: &mut ChaCha20Rng| -> Vec<f64> {
        (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
    };

    let mmax = prob.opts.block_size.max(8).min(dim).max(1);
    let nkeep = (mmax / 4).clamp(1, 16).min(mmax.saturating_sub(1).max(1));

    let mut v_basis: Vec<Vec<f64>> = Vec::with_capacity(mmax);
    let mut av_basis: Vec<Vec<f64>> = Vec::with_capacity(mmax);
    let mut h = DMatrix::<f64>::zeros(mmax, mmax);

    // B-orthonormalize `w` against the current basis; returns its B-norm.
    let b_orthonormalize = |w: &mut Vec<f64>, basis: &[Vec<f64>], b_apply: &dyn Fn(&[f64]) -> Vec<f64>| -> f64 {
        for _pass in 0..2 {
            if !basis.is_empty() {
                let bw = b_apply(w);
                for v in basis {
                    let c = dot(v, &bw);
                    axpy(-c, v, w);
                }
            }
        }
        let bw = b_apply(w);
        let nb2 = dot(w, &bw);
        if nb2 <= 0.0 {
            return 0.0;
        }
        let nb = nb2.sqrt();
        w.iter_mut().for_each(|x| *x /= nb);
        nb
    };

    let mut next = match warm_start {
        Some(x) if x.len() == dim && norm2(x) > 0.0 => x.to_vec(),
        _ => random_vec(&mut rng),
    };
    if b_orthonormalize(&mut next, &v_basis, &b_apply) == 0.0 {
        next = random_vec(&mut rng);
        if b_orthonormalize(&mut next, &v_basis, &b_apply) == 0.0 {
            return Err(Error::NotSpd("could not B-normalize the starting vector".into()));
        }
    }

    let mut iterations = 0usize;
    let mut theta_history: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, f64)> = None; // (theta, x, residual)

    loop {
        // expand the basis
        let av = a.apply(&next);
        iterations += 1;
        let m = v_basis.len();
        for i in 0..m {
            let hij = dot(&v_basis[i], &av);
            h[(i, m)] = hij;
            h[(m, i)] = hij;
        }
        h[(m, m)] = dot(&next, &av);
        v_basis.push(next.clone());
        av_basis.push(av);
        let m = v_basis.len();

        // Rayleigh-Ritz on the projected matrix
        let hm = h.view((0, 0), (m, m)).into_owned();
        let eig = nalgebra::SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let imin = order[0];
        let theta = eig.eigenvalues[imin];
        let s = eig.eigenvectors.column(imin);

        let mut xs = vec![0.0; dim];
        let mut axs = vec![0.0; dim];
        for i in 0..m {
            axpy(s[i], &v_basis[i], &mut xs);
            axpy(s[i], &av_basis[i], &mut axs);
        }
        let bxs = b_apply(&xs);
        let mut rnorm2 = 0.0;
        for i in 0..dim {
            let d = axs[i] - theta * bxs[i];
            rnorm2 += d * d;
        }
        let residual = rnorm2.sqrt() / (frob_a * norm2(&xs));

        if best.as_ref().is_none_or(|(_, _, r)| residual < *r) {
            best = Some((theta, xs.clone(), residual));
        }
        theta_history.push(theta);
        let hist = theta_history.len();
        let stagnant = hist >= 3 && {
            let w = &theta_history[hist - 3..];
            let spread = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - w.iter().cloned().fold(f64::INFINITY, f64::min);
            spread < prob.opts.tol * theta.abs().max(1.0)
        };
        let exhausted = m == dim;
        if residual <= prob.opts.tol && (stagnant || exhausted) {
            return Ok(finish(a, b, xs, iterations, SolvePath::Sparse));
        }
        if iterations >= prob.opts.max_iter {
            let (theta, _, residual) = best.unwrap();
            return Err(Error::NonConvergence { iterations, best: theta, residual });
        }
        if exhausted {
            // full space spanned; the Ritz pair is exact up to roundoff
            return Ok(finish(a, b, xs, iterations, SolvePath::Sparse));
        }

        // next direction: w = B^-1 A v_m, B-orthogonalized against the basis
        let mut w = solve_b(av_basis.last().unwrap())?;
        let mut beta = b_orthonormalize(&mut w, &v_basis, &b_apply);
        if beta <= 1e-13 {
            // Krylov degeneration: soft restart with a fresh direction
            w = random_vec(&mut rng);
            beta = b_orthonormalize(&mut w, &v_basis, &b_apply);
            if beta <= 1e-13 {
                return Ok(finish(a, b, xs, iterations, SolvePath::Sparse));
            }
        }
        next = w;

        // thick restart: compress to the lowest Ritz vectors
        if v_basis.len() == mmax {
            let keep: Vec<usize> = order.iter().copied().take(nkeep).collect();
            let mut new_v = Vec::with_capacity(nkeep);
            let mut new_av = Vec::with_capacity(nkeep);
            for &col in &keep {
                let sc = eig.eigenvectors.column(col);
                let mut vi = vec![0.0; dim];
                let mut avi = vec![0.0; dim];
                for i in 0..mmax {
                    axpy(sc[i], &v_basis[i], &mut vi);
                    axpy(sc[i], &av_basis[i], &mut avi);
                }
                new_v.push(vi);
                new_av.push(avi);
            }
            v_basis = new_v;
            av_basis = new_av;
            h.fill(0.0);
            for (i, &col) in keep.iter().enumerate() {
                h[(i, i)] = eig.eigenvalues[col];
            }
        }
    }
}

/// Pick the dense path below the configured ceiling, otherwise the sparse one.
pub fn min_gen_eig_auto(prob: &PencilProblem, warm_start: Option<&[f64]>) -> Result<EigResult> {
    if prob.a.dim() <= prob.opts.dense_ceiling {
        min_gen_eig_dense(prob)
    } else {
        min_gen_eig_sparse(prob, warm_start)
    }
}
