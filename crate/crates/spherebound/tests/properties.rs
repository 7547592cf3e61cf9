//! Property tests for the structural invariants: ranking bijections,
//! parser/printer round trips, normalization inverses, curve symmetry.

use num::rational::BigRational;
use proptest::prelude::*;

use spherebound::combinat::{delta_curve, BasisIndexer, MultiIndex};
use spherebound::polyform::{parse_form, HomogeneousForm};

fn exps_strategy(n: usize, max_e: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..=max_e, n)
}

proptest! {
    #[test]
    fn rank_unrank_bijection(n in 1usize..6, exps in exps_strategy(5, 6)) {
        let exps = exps[..n].to_vec();
        let mi = MultiIndex::new(exps);
        let ix = BasisIndexer::new(n, mi.degree());
        let r = ix.rank(&mi);
        prop_assert!(r < ix.dim());
        prop_assert_eq!(ix.unrank(r as u64).unwrap(), mi);
    }

    #[test]
    fn rank_is_order_preserving(a in exps_strategy(4, 5), b in exps_strategy(4, 5)) {
        // equalize degrees by padding the first coordinate
        let (mut a, mut b) = (a, b);
        let (da, db) = (a.iter().sum::<u32>(), b.iter().sum::<u32>());
        if da < db {
            a[0] += db - da;
        } else {
            b[0] += da - db;
        }
        let (a, b) = (MultiIndex::new(a), MultiIndex::new(b));
        let ix = BasisIndexer::new(4, a.degree());
        prop_assert_eq!(a.cmp(&b), ix.rank(&a).cmp(&ix.rank(&b)));
    }

    #[test]
    fn printer_parser_roundtrip(
        coeffs in prop::collection::vec(-50i32..50, 4),
        keys in prop::collection::vec(exps_strategy(3, 3), 4),
    ) {
        // force a common degree by padding the first variable
        let maxdeg = keys.iter().map(|k| k.iter().sum::<u32>()).max().unwrap();
        let terms: Vec<(MultiIndex, BigRational)> = keys
            .iter()
            .zip(&coeffs)
            .map(|(k, &c)| {
                let mut k = k.clone();
                k[0] += maxdeg - k.iter().sum::<u32>();
                (MultiIndex::new(k), BigRational::from_integer(c.into()))
            })
            .collect();
        let p = HomogeneousForm::from_terms(3, maxdeg, terms).unwrap();
        prop_assume!(!p.is_zero());
        let vars: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
        let printed = format!("{p}");
        let q = parse_form(&printed, &vars).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn normalize_denormalize_identity(
        coeffs in prop::collection::vec(-9i32..9, 6),
        nums in prop::collection::vec(1u32..7, 6),
    ) {
        // random rational coefficients c/num on random degree-4 monomials
        let basis = spherebound::combinat::enumerate_basis(3, 4);
        let terms: Vec<(MultiIndex, BigRational)> = coeffs
            .iter()
            .zip(&nums)
            .enumerate()
            .map(|(i, (&c, &q))| {
                (basis[i % basis.len()].clone(), BigRational::new(c.into(), q.into()))
            })
            .collect();
        let p = HomogeneousForm::from_terms(3, 4, terms).unwrap();
        let back = p.normalize_coeffs().unwrap().denormalize();
        prop_assert_eq!(p, back); // exact rational round trip
    }

    #[test]
    fn delta_curve_even_about_half(d in 1u32..9, t in 0.0f64..=0.5) {
        let a = delta_curve(d, t).unwrap();
        let b = delta_curve(d, 1.0 - t).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }
}
