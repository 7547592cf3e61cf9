//! Multi-homogeneous minimization: a biquadratic form over the product of
//! two unit spheres. For (x.y)^2 the minimum is 0, attained at any
//! orthogonal pair; the bounds climb toward it from below.
//!
//! Run with: cargo run --release --example biquadratic

use spherebound::hierarchy::{multi_sphere_min_bound, HierarchyOptions};
use spherebound::oracle::upper_bound_sphere;
use spherebound::polyform::parse_multi_form;

fn main() {
    let groups = vec![
        vec!["x1".to_string(), "x2".to_string()],
        vec!["y1".to_string(), "y2".to_string()],
    ];
    let p = parse_multi_form("(x1*y1 + x2*y2)^2", &groups).expect("fixed text parses");
    println!("biquadratic (x.y)^2 on S^1 x S^1; multidegree {:?}", p.factors());

    let oracle = upper_bound_sphere(&p, 32, 3).expect("oracle runs");
    println!("oracle: min {:.2e} at x = {:?}, y = {:?}\n", oracle.value, oracle.points[0], oracle.points[1]);

    let mut opts = HierarchyOptions::default();
    opts.solver.tol = 1e-11;
    let r = multi_sphere_min_bound(&p, &[1, 2, 4, 8, 16, 32], &opts).expect("hierarchy runs");
    println!("{:>5} {:>7} {:>14} {:>10}", "k", "dim", "lower bound", "seconds");
    for l in &r.levels {
        println!("{:>5} {:>7} {:>14.8} {:>10.3}", l.k, l.dim, l.bound.unwrap(), l.wall_seconds);
    }
    println!("\nbounds are nondecreasing and never exceed the true minimum 0");
}
