//! The polynomial front end: parsing factored text into canonical monomial
//! form, exact rational coefficients, normalization, and evaluation.
//!
//! Run with: cargo run --release --example parse_and_print

use spherebound::polyform::parse_form;

fn main() {
    let vars: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();

    let text = "x1^2*x2^2*(x1^2 + x2^2 - 3*x3^2) + x3^6";
    let p = parse_form(text, &vars).expect("parses");
    println!("input:     {text}");
    println!("canonical: {p}");
    println!("degree {} in {} variables, {} monomials", p.degree(), p.n(), p.num_terms());

    let s = 1.0 / 3.0f64.sqrt();
    println!("value at (1,1,1)/sqrt(3): {:.3e} (the sphere minimum is exactly 0)", p.evaluate(&[s, s, s]).unwrap());
    println!("value at (0,0,1): {}", p.evaluate(&[0.0, 0.0, 1.0]).unwrap());

    // exact rational coefficients survive normalization round trips
    let q = parse_form("1/3*x1^4 - 0.125*x2^4 + x1^2*x2^2", &vars).expect("parses");
    let nc = q.normalize_coeffs().expect("even degree");
    println!("\nnormalized coefficients of {q}:");
    for (mi, c) in nc.map() {
        println!("  C_{mi} = {c}");
    }
    assert_eq!(nc.denormalize(), q);
    println!("denormalize(normalize(q)) == q exactly");

    // errors carry positions
    match parse_form("x1^2 + x9^2", &vars) {
        Err(e) => println!("\nerror reporting: {e}"),
        Ok(_) => unreachable!(),
    }
}
