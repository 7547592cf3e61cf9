//! Cross-module invariants that pair independent routes against each other.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use spherebound::combinat::{enumerate_basis, MultiIndex};
use spherebound::hierarchy::{spectral_norm_bound, HierarchyOptions};
use spherebound::oracle::upper_bound_sphere;
use spherebound::polyform::{odd_lift, MultiForm, MultiIndexTuple, Tensor};

fn random_multiform(factors: &[(usize, u32)], rng: &mut StdRng) -> MultiForm {
    let bases: Vec<Vec<MultiIndex>> =
        factors.iter().map(|&(n, d)| enumerate_basis(n, d)).collect();
    let mut terms = Vec::new();
    let mut emit = |key: Vec<MultiIndex>, rng: &mut StdRng| {
        let c = rng.gen_range(-1.0..1.0);
        terms.push((
            MultiIndexTuple(key),
            num::rational::BigRational::from_float(c).unwrap(),
        ));
    };
    // dense over the product support
    fn product(
        bases: &[Vec<MultiIndex>],
        prefix: &mut Vec<MultiIndex>,
        f: &mut impl FnMut(Vec<MultiIndex>),
    ) {
        if prefix.len() == bases.len() {
            f(prefix.clone());
            return;
        }
        for mi in &bases[prefix.len()] {
            prefix.push(mi.clone());
            product(bases, prefix, f);
            prefix.pop();
        }
    }
    product(&bases, &mut Vec::new(), &mut |key| emit(key, rng));
    MultiForm::from_terms(factors.to_vec(), terms).unwrap()
}

/// Minimizing the original odd-degree form and the lifted even-degree form
/// by two independent oracle runs must agree through the lift scale.
#[test]
fn odd_lift_consistency_with_oracle() {
    let mut rng = StdRng::seed_from_u64(41);
    let shapes: [&[(usize, u32)]; 4] = [
        &[(1, 3)],
        &[(2, 3)],
        &[(2, 1), (2, 2)],
        &[(1, 5)],
    ];
    for trial in 0..20 {
        let shape = shapes[trial % shapes.len()];
        let p = random_multiform(shape, &mut rng);
        let j = shape.iter().position(|&(_, d)| d % 2 == 1).unwrap();
        let (lifted, scale) = odd_lift(&p, j).unwrap();
        let pmin = upper_bound_sphere(&p, 64, 1000 + trial as u64).unwrap().value;
        let lmin = upper_bound_sphere(&lifted, 64, 2000 + trial as u64).unwrap().value;
        assert!(
            (pmin - scale * lmin).abs() <= 1e-6 * pmin.abs().max(1.0),
            "trial {trial} ({shape:?}): {pmin} vs scale*{lmin} = {}",
            scale * lmin
        );
    }
}

/// The cubic x^3 on the 0-sphere has minimum -1; its lift x^3 y on the unit
/// circle has minimum -3^{3/2}/16 by one-variable calculus, and the lift
/// scale connects the two exactly.
#[test]
fn cubic_lift_matches_calculus() {
    let vars = vec!["x1".to_string()];
    let p = spherebound::polyform::parse_form("x1^3", &vars).unwrap();
    let (lifted, scale) = odd_lift(&MultiForm::from_homogeneous(&p), 0).unwrap();
    let lifted_min = upper_bound_sphere(&lifted, 32, 4).unwrap().value;
    let calculus = -(3.0f64.powf(1.5)) / 16.0;
    assert!((lifted_min - calculus).abs() <= 1e-9, "{lifted_min} vs {calculus}");
    assert!((scale * lifted_min - (-1.0)).abs() <= 1e-9);
}

/// Order-3 spectral norm: the two-basis-vector tensor has spectral norm
/// exactly 1 (attained at basis vectors); the upper bounds must respect it.
#[test]
fn order_three_tensor_upper_bounds() {
    let t = Tensor::new(
        vec![2, 2, 2],
        vec![(vec![0, 0, 0], 1.0), (vec![1, 1, 1], 1.0)],
    )
    .unwrap();
    let mut opts = HierarchyOptions::default();
    opts.solver.tol = 1e-10;
    let r = spectral_norm_bound(&t, &[1, 2, 4, 8], &opts).unwrap();
    let mus: Vec<f64> = r.levels.iter().map(|l| l.bound.unwrap()).collect();
    assert!(mus.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{mus:?}");
    for m in &mus {
        assert!(*m >= 1.0 - 1e-7, "mu {m} below the true spectral norm 1");
    }
    // brute-force cross-check over the product of circles (coarse)
    let mut best: f64 = 0.0;
    let steps = 60;
    for a in 0..steps {
        for b in 0..steps {
            for c in 0..steps {
                let ang = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
                let (x, y, z) = (ang(a), ang(b), ang(c));
                let v = x.cos() * y.cos() * z.cos() + x.sin() * y.sin() * z.sin();
                best = best.max(v.abs());
            }
        }
    }
    assert!((best - 1.0).abs() < 1e-2, "grid oracle {best}");
    assert!(mus.last().unwrap() >= &(best - 1e-2));
}
