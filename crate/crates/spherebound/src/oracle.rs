//! Independent reference values for testing the hierarchy from the other
//! side: multi-start projected gradient descent gives upper bounds on sphere
//! minima, a spherical grid scan covers n <= 3, and the matrix spectral norm
//! is exact via SVD. None of this shares code with the pencil pipeline.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::polyform::{HomogeneousForm, MultiForm, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Gradient,
    Grid,
    Svd,
}

/// A reference value with the points attaining it (unit norm per factor).
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    /// One point per sphere factor.
    pub points: Vec<Vec<f64>>,
    pub method: OracleMethod,
    pub restarts_used: usize,
    /// For the grid method: step * crude Lipschitz estimate (reported, not proven).
    pub error_estimate: Option<f64>,
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Projected gradient with Armijo backtracking on a product of spheres,
/// from one starting tuple. Returns (value, points, riemannian grad norm).
fn descend(p: &MultiForm, start: Vec<Vec<f64>>, max_iter: usize) -> (f64, Vec<Vec<f64>>, f64) {
    let m = p.num_factors();
    let mut x = start;
    for xj in &mut x {
        normalize(xj);
    }
    fn refs(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(|v| v.as_slice()).collect()
    }
    let mut fx = p.evaluate(&refs(&x)).expect("dimensions fixed");
    let mut grad: Vec<Vec<f64>> = p.factors().iter().map(|&(nj, _)| vec![0.0; nj]).collect();
    let mut step = 1.0f64;
    let mut rg_norm = f64::INFINITY;
    for _ in 0..max_iter {
        let pts = refs(&x);
        let mut rg2 = 0.0;
        for j in 0..m {
            p.gradient_factor(&pts, j, &mut grad[j]);
            // tangent projection: g - <g, x> x
            let gx: f64 = grad[j].iter().zip(&x[j]).map(|(g, v)| g * v).sum();
            for (g, v) in grad[j].iter_mut().zip(&x[j]) {
                *g -= gx * v;
            }
            rg2 += grad[j].iter().map(|g| g * g).sum::<f64>();
        }
        rg_norm = rg2.sqrt();
        if rg_norm <= 1e-10 {
            break;
        }
        // Armijo backtracking along the projected step
        let mut accepted = false;
        step = (step * 2.0).min(1.0 / (1.0 + rg_norm));
        for _bt in 0..60 {
            let mut cand = x.clone();
            for j in 0..m {
                for (c, g) in cand[j].iter_mut().zip(&grad[j]) {
                    *c -= step * g;
                }
                normalize(&mut cand[j]);
            }
            let fc = p.evaluate(&refs(&cand)).expect("dimensions fixed");
            if fc <= fx - 1e-4 * step * rg2 {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (fx, x, rg_norm)
}

/// Deterministic starting tuples: coordinate axes and a seeded Gaussian pool.
fn starting_points(p: &MultiForm, restarts: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let m = p.num_factors();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(restarts);
    // axis starts (low-discrepancy skeleton): +-e_i on the largest factor,
    // all-ones elsewhere
    let nmax = p.factors().iter().map(|&(nj, _)| nj).max().unwrap_or(1);
    for i in 0..(2 * nmax).min(restarts / 2) {
        let mut tuple = Vec::with_capacity(m);
        for &(nj, _) in p.factors() {
            let mut v = vec![1.0 / (nj as f64).sqrt(); nj];
            let axis = i / 2;
            if axis < nj {
                v = vec![0.0; nj];
                v[axis] = if i % 2 == 0 { 1.0 } else { -1.0 };
            }
            tuple.push(v);
        }
        starts.push(tuple);
    }
    while starts.len() < restarts {
        let tuple: Vec<Vec<f64>> = p
            .factors()
            .iter()
            .map(|&(nj, _)| {
                let mut v: Vec<f64> =
                    (0..nj).map(|_| gaussian(&mut rng)).collect();
                normalize(&mut v);
                v
            })
            .collect();
        starts.push(tuple);
    }
    starts
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller; deterministic for a fixed seed
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Best sampled minimum of a (multi-)form over the product of unit spheres:
/// projected gradient with backtracking from `restarts` deterministic starts.
/// Always an upper bound on the true minimum.
pub fn upper_bound_sphere(p: &MultiForm, restarts: usize, seed: u64) -> Result<OracleResult> {
    if p.is_zero() {
        let points = p.factors().iter().map(|&(nj, _)| {
            let mut v = vec![0.0; nj];
            v[0] = 1.0;
            v
        }).collect();
        return Ok(OracleResult {
            value: 0.0,
            points,
            method: OracleMethod::Gradient,
            restarts_used: 0,
            error_estimate: None,
        });
    }
    let restarts = restarts.max(1);
    let starts = starting_points(p, restarts, seed);
    let results: Vec<(usize, f64, Vec<Vec<f64>>)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (v, x, _) = descend(p, s, 600);
            (i, v, x)
        })
        .collect();
    let bestidx = results
        .iter()
        .min_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap())
        .expect("at least one restart");
    Ok(OracleResult {
        value: bestidx.1,
        points: bestidx.2.clone(),
        method: OracleMethod::Gradient,
        restarts_used: restarts,
        error_estimate: None,
    })
}

/// Single-factor convenience wrapper.
pub fn upper_bound_sphere_single(
    p: &HomogeneousForm,
    restarts: usize,
    seed: u64,
) -> Result<OracleResult> {
    upper_bound_sphere(&MultiForm::from_homogeneous(p), restarts, seed)
}

/// Spherical-coordinate grid scan for n <= 3; `resolution` is the number of
/// grid points per angular dimension.
pub fn grid_min_sphere(p: &HomogeneousForm, resolution: usize) -> Result<OracleResult> {
    let n = p.n();
    if n > 3 {
        return Err(Error::SizeGuard(format!("grid scan limited to n <= 3 (got {n})")));
    }
    let resolution = resolution.max(2);
    let mut best = f64::INFINITY;
    let mut best_point = vec![0.0; n];
    let consider = |x: &[f64], best: &mut f64, best_point: &mut Vec<f64>| {
        let v = p.evaluate(x).expect("dimension checked");
        if v < *best {
            *best = v;
            *best_point = x.to_vec();
        }
    };
    match n {
        1 => {
            consider(&[1.0], &mut best, &mut best_point);
            consider(&[-1.0], &mut best, &mut best_point);
        }
        2 => {
            for i in 0..resolution {
                let th = 2.0 * std::f64::consts::PI * i as f64 / resolution as f64;
                consider(&[th.cos(), th.sin()], &mut best, &mut best_point);
            }
        }
        _ => {
            let results: Vec<(f64, Vec<f64>)> = (0..resolution)
                .into_par_iter()
                .map(|i| {
                    let th = std::f64::consts::PI * i as f64 / (resolution - 1) as f64;
                    let (st, ct) = th.sin_cos();
                    let mut lbest = f64::INFINITY;
                    let mut lpoint = vec![0.0; 3];
                    for j in 0..resolution {
                        let ph = 2.0 * std::f64::consts::PI * j as f64 / resolution as f64;
                        let x = [st * ph.cos(), st * ph.sin(), ct];
                        let v = p.evaluate(&x).expect("dimension checked");
                        if v < lbest {
                            lbest = v;
                            lpoint = x.to_vec();
                        }
                    }
                    (lbest, lpoint)
                })
                .collect();
            for (v, x) in results {
                if v < best {
                    best = v;
                    best_point = x;
                }
            }
        }
    }
    // crude Lipschitz estimate: sum |c| * D on the unit ball
    let lipschitz: f64 = p
        .float_terms()
        .iter()
        .map(|(_, c)| c.abs() * p.degree() as f64)
        .sum();
    let step = std::f64::consts::PI / resolution as f64;
    Ok(OracleResult {
        value: best,
        points: vec![best_point],
        method: OracleMethod::Grid,
        restarts_used: 0,
        error_estimate: Some(step * lipschitz),
    })
}

/// Largest singular value of a 2-way tensor (exact for m = 2).
pub fn spectral_norm_matrix(t: &Tensor) -> Result<OracleResult> {
    let m = t
        .to_matrix()
        .ok_or_else(|| Error::InvalidProblem("spectral_norm_matrix expects a 2-way tensor".into()))?;
    let svd = m.clone().svd(true, true);
    let mut imax = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > svd.singular_values[imax] {
            imax = i;
        }
    }
    let sigma = svd.singular_values[imax];
    let u = svd.u.as_ref().map(|u| u.column(imax).iter().copied().collect::<Vec<f64>>());
    let v = svd
        .v_t
        .as_ref()
        .map(|vt| vt.row(imax).iter().copied().collect::<Vec<f64>>());
    Ok(OracleResult {
        value: sigma,
        points: vec![u.unwrap_or_default(), v.unwrap_or_default()],
        method: OracleMethod::Svd,
        restarts_used: 0,
        error_estimate: None,
    })
}

/// Power iteration on T^T T; used as a cross-check oracle for the SVD path.
pub fn spectral_norm_power_iteration(m: &DMatrix<f64>, iters: usize) -> f64 {
    let mut v = DMatrix::from_fn(m.ncols(), 1, |i, _| 1.0 + (i as f64 * 0.7).sin());
    for _ in 0..iters {
        let w = m.transpose() * (m * &v);
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w / n;
    }
    (m * &v).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyform::{motzkin, norm_power_form, parse_form};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn motzkin_upper_bound_near_zero() {
        let r = upper_bound_sphere_single(&motzkin(), 64, 7).unwrap();
        assert!(r.value >= -1e-12, "oracle must stay above the true min 0");
        assert!(r.value <= 1e-8, "best found {}", r.value);
        let p = &r.points[0];
        let nrm: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((nrm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_min_is_lambda_min() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 4;
        let s = DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let s = (&s + s.transpose()) * 0.5;
        let p = HomogeneousForm::from_symmetric_matrix(&s).unwrap();
        let lmin = nalgebra::SymmetricEigen::new(s.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let r = upper_bound_sphere_single(&p, 64, 3).unwrap();
        assert!((r.value - lmin).abs() < 1e-8, "{} vs {lmin}", r.value);
    }

    #[test]
    fn norm_power_is_constant_one() {
        let p = norm_power_form(3, 2);
        let r = upper_bound_sphere_single(&p, 8, 1).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_stationarity_and_determinism() {
        let p = motzkin();
        let a = upper_bound_sphere_single(&p, 32, 42).unwrap();
        let b = upper_bound_sphere_single(&p, 32, 42).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        // first-order stationarity at the returned point
        let mp = MultiForm::from_homogeneous(&p);
        let pts: Vec<&[f64]> = a.points.iter().map(|v| v.as_slice()).collect();
        let mut g = vec![0.0; 3];
        mp.gradient_factor(&pts, 0, &mut g);
        let gx: f64 = g.iter().zip(&a.points[0]).map(|(gi, xi)| gi * xi).sum();
        let rg: f64 = g
            .iter()
            .zip(&a.points[0])
            .map(|(gi, xi)| gi - gx * xi)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!(rg <= 1e-6, "riemannian gradient norm {rg}");
    }

    #[test]
    fn grid_scan_examples() {
        let m = grid_min_sphere(&motzkin(), 1000).unwrap();
        assert!(m.value.abs() < 1e-4, "grid min {}", m.value);
        let lin = parse_form("3*x1 - 4*x2", &vars(&["x1", "x2"])).unwrap();
        let r = grid_min_sphere(&lin, 4000).unwrap();
        assert!((r.value + 5.0).abs() < 1e-5);
        let z = HomogeneousForm::zero(2, 2);
        assert_eq!(grid_min_sphere(&z, 10).unwrap().value, 0.0);
        let big = HomogeneousForm::zero(4, 2);
        assert!(grid_min_sphere(&big, 10).is_err());
    }

    #[test]
    fn svd_examples() {
        let d = Tensor::from_matrix(&nalgebra::dmatrix![1.0, 0.0; 0.0, 0.5]);
        assert!((spectral_norm_matrix(&d).unwrap().value - 1.0).abs() < 1e-14);
        let a = nalgebra::dvector![0.6, 0.8];
        let b = nalgebra::dvector![0.8, 0.0, 0.6];
        let rank1 = Tensor::from_matrix(&(a * b.transpose()));
        assert!((spectral_norm_matrix(&rank1).unwrap().value - 1.0).abs() < 1e-12);
        let mut rng = StdRng::seed_from_u64(2);
        let m = DMatrix::from_fn(5, 5, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let svd_val = spectral_norm_matrix(&Tensor::from_matrix(&m)).unwrap().value;
        let power_val = spectral_norm_power_iteration(&m, 3000);
        assert!((svd_val - power_val).abs() < 1e-10);
    }

    #[test]
    fn biquadratic_orthogonal_minimum() {
        let groups = vec![vars(&["x1", "x2"]), vars(&["y1", "y2"])];
        let p = crate::polyform::parse_multi_form("(x1*y1 + x2*y2)^2", &groups).unwrap();
        let r = upper_bound_sphere(&p, 32, 11).unwrap();
        assert!(r.value.abs() < 1e-10, "min of (x.y)^2 is 0, got {}", r.value);
    }
}
