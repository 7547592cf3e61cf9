//! Machine-readable problem and result schemas, the drivers that execute
//! them, and the fast identity suite surfaced by the CLI's `check` command.
//!
//! A problem is a JSON document (see [`ProblemSpec`]); a run returns a
//! [`ResultReport`] that echoes the problem, carries one record per level,
//! and pins the version and seed so identical invocations reproduce
//! identical bound values.

use std::io::Write;

use num::rational::BigRational;
use num::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::combinat::{binomial_big, claim4_check, delta, delta_curve, MultiIndex};
use crate::eigsolve::SolverOptions;
use crate::error::{Error, Result};
use crate::gram::{build_gram_rational, build_m, hermitian_value, kappa_n};
use crate::hierarchy::{
    sphere_min_bound, multi_sphere_min_bound, spectral_norm_bound, Direction, HierarchyOptions, HierarchyResult,
    SolverMode,
};
use crate::oracle::{spectral_norm_matrix, upper_bound_sphere, OracleMethod};
use crate::polyform::{parse_form, parse_multi_form, HomogeneousForm, MultiForm, Tensor};

pub const ENV_THREADS: &str = "SPHEREBOUND_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    #[serde(rename = "sphere-min")]
    SphereMin,
    #[serde(rename = "multi-sphere-min")]
    MultiSphereMin,
    #[serde(rename = "spectral-norm")]
    SpectralNorm,
}

/// Exponents of one structured term: flat for a single variable group,
/// one vector per group otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentSpec {
    Grouped(Vec<Vec<u32>>),
    Flat(Vec<u32>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermSpec {
    pub exponents: ExponentSpec,
    pub coeff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordEntry {
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorEntries {
    Coords(Vec<CoordEntry>),
    Nested(serde_json::Value),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorSpec {
    pub dims: Vec<usize>,
    pub entries: TensorEntries,
}

fn default_mode() -> String {
    "auto".into()
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    50_000
}

fn default_seed() -> u64 {
    2024
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSpec {
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// 0 = library default (or the SPHEREBOUND_THREADS environment variable).
    #[serde(default)]
    pub threads: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            mode: default_mode(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            seed: default_seed(),
            threads: 0,
        }
    }
}

impl SolverSpec {
    pub fn mode_enum(&self) -> Result<SolverMode> {
        match self.mode.as_str() {
            "auto" => Ok(SolverMode::Auto),
            "dense" => Ok(SolverMode::Dense),
            "sparse" => Ok(SolverMode::Sparse),
            other => Err(Error::InvalidProblem(format!(
                "unknown solver mode '{other}' (expected auto|dense|sparse)"
            ))),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }
}

/// One optimization problem, schema-validated before execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Variable names, one list per sphere factor.
    #[serde(default)]
    pub variables: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<TensorSpec>,
    pub levels: Vec<u32>,
    #[serde(default)]
    pub solver: SolverSpec,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidProblem("levels must be nonempty".into()));
        }
        match self.kind {
            ProblemKind::SphereMin | ProblemKind::MultiSphereMin => {
                if self.variables.is_empty() || self.variables.iter().any(|g| g.is_empty()) {
                    return Err(Error::InvalidProblem(
                        "variables must contain at least one nonempty group".into(),
                    ));
                }
                if self.polynomial.is_none() && self.terms.is_none() {
                    return Err(Error::InvalidProblem(
                        "provide 'polynomial' text or structured 'terms'".into(),
                    ));
                }
            }
            ProblemKind::SpectralNorm => {
                if self.tensor.is_none() {
                    return Err(Error::InvalidProblem("provide 'tensor'".into()));
                }
            }
        }
        Ok(())
    }

    pub fn build_single_form(&self) -> Result<HomogeneousForm> {
        let vars = &self.variables[0];
        if let Some(text) = &self.polynomial {
            return parse_form(text, vars);
        }
        let terms = self.terms.as_ref().expect("validated");
        let n = vars.len();
        let mut deg: Option<u32> = None;
        let mut list = Vec::with_capacity(terms.len());
        for t in terms {
            let exps = match &t.exponents {
                ExponentSpec::Flat(e) => e.clone(),
                ExponentSpec::Grouped(g) if g.len() == 1 => g[0].clone(),
                _ => {
                    return Err(Error::InvalidProblem(
                        "sphere-min terms need one flat exponent vector".into(),
                    ))
                }
            };
            if exps.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: exps.len() });
            }
            let mi = MultiIndex::new(exps);
            match deg {
                None => deg = Some(mi.degree()),
                Some(d0) => {
                    if d0 != mi.degree() {
                        return Err(Error::InvalidProblem(format!(
                            "non-homogeneous terms: degree {} mixed with {}",
                            mi.degree(),
                            d0
                        )));
                    }
                }
            }
            list.push((mi, t.coeff));
        }
        HomogeneousForm::from_float_terms(n, deg.unwrap_or(0), list)
    }

    pub fn build_multi_form(&self) -> Result<MultiForm> {
        if let Some(text) = &self.polynomial {
            return parse_multi_form(text, &self.variables);
        }
        let terms = self.terms.as_ref().expect("validated");
        let sizes: Vec<usize> = self.variables.iter().map(|g| g.len()).collect();
        let mut degs: Option<Vec<u32>> = None;
        let mut list = Vec::with_capacity(terms.len());
        for t in terms {
            let groups: Vec<Vec<u32>> = match &t.exponents {
                ExponentSpec::Grouped(g) => g.clone(),
                ExponentSpec::Flat(e) if sizes.len() == 1 => vec![e.clone()],
                _ => {
                    return Err(Error::InvalidProblem(
                        "multi-sphere-min terms need one exponent vector per group".into(),
                    ))
                }
            };
            if groups.len() != sizes.len() {
                return Err(Error::DimensionMismatch { expected: sizes.len(), found: groups.len() });
            }
            let parts: Vec<MultiIndex> = groups
                .iter()
                .zip(&sizes)
                .map(|(g, &s)| {
                    if g.len() != s {
                        Err(Error::DimensionMismatch { expected: s, found: g.len() })
                    } else {
                        Ok(MultiIndex::new(g.clone()))
                    }
                })
                .collect::<Result<_>>()?;
            let d: Vec<u32> = parts.iter().map(|p| p.degree()).collect();
            match &degs {
                None => degs = Some(d),
                Some(d0) => {
                    if *d0 != d {
                        return Err(Error::InvalidProblem(
                            "terms are not multi-homogeneous".into(),
                        ));
                    }
                }
            }
            list.push((
                crate::polyform::MultiIndexTuple(parts),
                BigRational::from_float(t.coeff)
                    .ok_or_else(|| Error::InvalidProblem("non-finite coefficient".into()))?,
            ));
        }
        let degs = degs
            .ok_or_else(|| Error::InvalidProblem("multi-sphere-min needs at least one term".into()))?;
        MultiForm::from_terms(sizes.into_iter().zip(degs).collect(), list)
    }

    pub fn build_tensor(&self) -> Result<Tensor> {
        let spec = self.tensor.as_ref().expect("validated");
        match &spec.entries {
            TensorEntries::Coords(list) => Tensor::new(
                spec.dims.clone(),
                list.iter().map(|e| (e.index.clone(), e.value)),
            ),
            TensorEntries::Nested(v) => {
                let mut entries = Vec::new();
                collect_nested(v, &spec.dims, &mut Vec::new(), &mut entries)?;
                Tensor::new(spec.dims.clone(), entries)
            }
        }
    }
}

fn collect_nested(
    v: &serde_json::Value,
    dims: &[usize],
    prefix: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, f64)>,
) -> Result<()> {
    if dims.is_empty() {
        let x = v
            .as_f64()
            .ok_or_else(|| Error::InvalidProblem(format!("expected a number, found {v}")))?;
        out.push((prefix.clone(), x));
        return Ok(());
    }
    let arr = v
        .as_array()
        .ok_or_else(|| Error::InvalidProblem(format!("expected an array of length {}", dims[0])))?;
    if arr.len() != dims[0] {
        return Err(Error::InvalidProblem(format!(
            "nested tensor shape mismatch: expected {}, found {}",
            dims[0],
            arr.len()
        )));
    }
    for (i, vi) in arr.iter().enumerate() {
        prefix.push(i);
        collect_nested(vi, &dims[1..], prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Result report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub k: u32,
    pub k_minus_d: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub wall_seconds: f64,
    pub dim: usize,
    pub iterations: usize,
    pub residual: f64,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub value: f64,
    pub method: String,
    pub restarts: usize,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub norm_p_inf: f64,
    pub kappa_computed: f64,
    pub delta: f64,
    pub per_level: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultReport {
    pub version: String,
    pub kind: ProblemKind,
    pub seed: u64,
    pub direction: String,
    /// Lift/rescale factor folded into the bounds.
    pub scale: f64,
    pub problem: ProblemSpec,
    pub levels: Vec<LevelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
}

impl ResultReport {
    pub fn any_level_failed(&self) -> bool {
        self.levels.iter().any(|l| l.error.is_some())
    }

    /// The three-column table (k, bound, seconds). Only successful levels
    /// appear; floats use the same serializer as the JSON report, so the
    /// bound column is textually identical to the JSON values.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "k,bound,seconds")?;
        for l in &self.levels {
            if let Some(b) = l.bound {
                writeln!(
                    w,
                    "{},{},{}",
                    l.k,
                    serde_json::to_string(&b)?,
                    serde_json::to_string(&l.wall_seconds)?
                )?;
            }
        }
        Ok(())
    }
}

fn to_reports(h: &HierarchyResult) -> Vec<LevelReport> {
    h.levels
        .iter()
        .map(|l| LevelReport {
            k: l.k,
            k_minus_d: l.k_minus_d,
            bound: l.bound,
            wall_seconds: l.wall_seconds,
            dim: l.dim,
            iterations: l.iterations,
            residual: l.residual,
            path: l.path.clone(),
            error: l.error.clone(),
        })
        .collect()
}

/// Initialize the global worker pool: explicit count, else the environment
/// variable, else the library default. Safe to call more than once.
pub fn init_threads(threads: usize) {
    let count = if threads > 0 {
        threads
    } else {
        std::env::var(ENV_THREADS).ok().and_then(|s| s.parse().ok()).unwrap_or(0)
    };
    if count > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
    }
}

fn hierarchy_options(spec: &ProblemSpec, gap: bool) -> Result<HierarchyOptions> {
    Ok(HierarchyOptions {
        solver: spec.solver.solver_options(),
        mode: spec.solver.mode_enum()?,
        gap_annotations: gap,
        ..HierarchyOptions::default()
    })
}

/// Execute a sphere-min / multi-sphere-min problem.
pub fn run_bound(spec: &ProblemSpec, with_oracle: bool, with_gap: bool) -> Result<ResultReport> {
    spec.validate()?;
    init_threads(spec.solver.threads);
    let opts = hierarchy_options(spec, with_gap)?;
    let (result, oracle) = match spec.kind {
        ProblemKind::SphereMin => {
            let p = spec.build_single_form()?;
            let oracle = if with_oracle {
                let r = upper_bound_sphere(&MultiForm::from_homogeneous(&p), 64, spec.solver.seed)?;
                Some(r)
            } else {
                None
            };
            let mut opts = opts;
            if let Some(o) = &oracle {
                opts.warm_points = Some(o.points.clone());
            }
            (sphere_min_bound(&p, &spec.levels, &opts)?, oracle)
        }
        ProblemKind::MultiSphereMin => {
            let p = spec.build_multi_form()?;
            let oracle = if with_oracle {
                Some(upper_bound_sphere(&p, 64, spec.solver.seed)?)
            } else {
                None
            };
            let mut opts = opts;
            if let Some(o) = &oracle {
                opts.warm_points = Some(o.points.clone());
            }
            (multi_sphere_min_bound(&p, &spec.levels, &opts)?, oracle)
        }
        ProblemKind::SpectralNorm => {
            return Err(Error::InvalidProblem(
                "use run_spectral_norm for spectral-norm problems".into(),
            ))
        }
    };
    Ok(assemble_report(spec, &result, oracle.map(|o| OracleReport {
        value: o.value,
        method: method_name(o.method),
        restarts: o.restarts_used,
        points: o.points,
    })))
}

/// Execute a spectral-norm problem; for matrices the exact SVD value is
/// attached as the oracle cross-check.
pub fn run_spectral_norm(spec: &ProblemSpec, with_gap: bool) -> Result<ResultReport> {
    spec.validate()?;
    if spec.kind != ProblemKind::SpectralNorm {
        return Err(Error::InvalidProblem("expected kind spectral-norm".into()));
    }
    init_threads(spec.solver.threads);
    let t = spec.build_tensor()?;
    let opts = hierarchy_options(spec, with_gap)?;
    let result = spectral_norm_bound(&t, &spec.levels, &opts)?;
    let oracle = if t.order() == 2 {
        let o = spectral_norm_matrix(&t)?;
        Some(OracleReport {
            value: o.value,
            method: method_name(o.method),
            restarts: 0,
            points: o.points,
        })
    } else {
        None
    };
    Ok(assemble_report(spec, &result, oracle))
}

fn method_name(m: OracleMethod) -> String {
    match m {
        OracleMethod::Gradient => "gradient".into(),
        OracleMethod::Grid => "grid".into(),
        OracleMethod::Svd => "svd".into(),
    }
}

fn assemble_report(
    spec: &ProblemSpec,
    result: &HierarchyResult,
    oracle: Option<OracleReport>,
) -> ResultReport {
    ResultReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: spec.kind,
        seed: spec.solver.seed,
        direction: match result.direction {
            Direction::Lower => "lower".into(),
            Direction::Upper => "upper".into(),
        },
        scale: result.scale,
        problem: spec.clone(),
        levels: to_reports(result),
        oracle,
        gap: result.gap.as_ref().map(|g| GapReport {
            norm_p_inf: g.norm_p_inf,
            kappa_computed: g.kappa_computed,
            delta: g.delta,
            per_level: g.per_level.clone(),
        }),
    }
}

// ---------------------------------------------------------------------------
// Fast identity suite (the CLI `check` command)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckLine {
    CheckLine { name: name.into(), passed, detail }
}

/// The exact-arithmetic identity suite: trace identities, the binomial
/// summation identity, the reduction-constant curve, the condition-number
/// table, and the fixed Hermitian evaluation. Runs in seconds.
pub fn identity_suite() -> Vec<CheckLine> {
    let mut out = Vec::new();

    // trace identities: Tr M(x1^{2j} x2^{2(d-j)}) = C(d,j)/C(2d,2j), exact
    {
        let mut ok = true;
        let mut detail = String::new();
        'outer: for d in 1..=6u32 {
            for j in 0..=d {
                let mut exps = vec![0u32; 2];
                exps[0] = 2 * j;
                exps[1] = 2 * (d - j);
                let p = HomogeneousForm::from_terms(
                    2,
                    2 * d,
                    [(MultiIndex::new(exps), BigRational::from_integer(1.into()))],
                )
                .expect("valid term");
                let tr = match build_gram_rational(&p, d) {
                    Ok(g) => g.trace_orthonormal(),
                    Err(e) => {
                        ok = false;
                        detail = format!("assembly failed at d={d}, j={j}: {e}");
                        break 'outer;
                    }
                };
                let expect = BigRational::new(
                    binomial_big(d as u64, j as u64),
                    binomial_big(2 * d as u64, 2 * j as u64),
                );
                if tr != expect {
                    ok = false;
                    detail = format!("d={d}, j={j}: trace {tr} != {expect}");
                    break 'outer;
                }
            }
        }
        if ok {
            detail = "exact for all d <= 6, 0 <= j <= d".into();
        }
        out.push(check("gram-trace-identity", ok, detail));
    }

    // binomial summation identity, exact for all d <= 10
    {
        let mut ok = true;
        let mut detail = String::new();
        'c4: for d in 0..=10u32 {
            for s in 0..=d {
                for k in 0..=s {
                    let (lhs, rhs) = claim4_check(d, s, k).expect("preconditions hold");
                    if lhs != rhs {
                        ok = false;
                        detail = format!("d={d}, s={s}, k={k}: {lhs} != {rhs}");
                        break 'c4;
                    }
                }
            }
        }
        if ok {
            detail = "exact for all d <= 10, k <= s <= d".into();
        }
        out.push(check("binomial-summation-identity", ok, detail));
    }

    // reduction-constant curve: grid minimum at t = 1/2 with value delta(d)
    {
        let mut ok = true;
        let mut detail = String::new();
        let grid = 10_000usize;
        'dc: for d in 1..=8u32 {
            let target = delta(d).to_f64().unwrap();
            let mut best = (f64::INFINITY, 0usize);
            for i in 0..=grid {
                let t = i as f64 / grid as f64;
                let v = delta_curve(d, t).expect("t in range");
                if v < best.0 {
                    best = (v, i);
                }
            }
            let argmin = best.1 as f64 / grid as f64;
            if (best.0 - target).abs() > 1e-12 {
                ok = false;
                detail = format!("d={d}: min {} vs delta(d) {target}", best.0);
                break 'dc;
            }
            if d > 1 && (argmin - 0.5).abs() > 1.0 / grid as f64 + 1e-15 {
                ok = false;
                detail = format!("d={d}: argmin {argmin} not at 1/2");
                break 'dc;
            }
        }
        if ok {
            detail = format!("minimum at t=1/2 with value 2^d/C(2d,d), d <= 8, grid {grid}");
        }
        out.push(check("delta-curve-minimum", ok, detail));
    }

    // condition-number table: computed vs conjectured closed form
    {
        let mut ok = true;
        let mut lines = Vec::new();
        for (n, d) in [(2usize, 2u32), (3, 2), (2, 3), (4, 2), (3, 3)] {
            match kappa_n(n, d) {
                Ok(k) => {
                    let agree = (k.computed - k.conjectured).abs() <= 1e-8 * k.conjectured;
                    lines.push(format!(
                        "(n={n},d={d}): computed {:.9} conjectured {:.9}{}",
                        k.computed,
                        k.conjectured,
                        if agree { "" } else { " MISMATCH" }
                    ));
                }
                Err(e) => {
                    ok = false;
                    lines.push(format!("(n={n},d={d}): {e}"));
                }
            }
        }
        out.push(check("condition-number-table", ok, lines.join("; ")));
    }

    // fixed Hermitian evaluation: psi(v)^dagger M(x1 x3) psi(v) = -1/(2 sqrt 3)
    {
        let vars: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
        let p = parse_form("x1*x3", &vars).expect("fixed text");
        let m = build_m(&p).expect("assembly");
        use num::complex::Complex64;
        let v = [
            Complex64::new(1.0 / 6.0f64.sqrt(), 0.0),
            Complex64::new(0.0, 1.0 / 3.0f64.sqrt()),
            Complex64::new(-1.0 / 2.0f64.sqrt(), 0.0),
        ];
        let val = hermitian_value(&m, &v).expect("value is real");
        let expect = -1.0 / (2.0 * 3.0f64.sqrt());
        let ok = (val - expect).abs() <= 1e-9;
        out.push(check(
            "hermitian-evaluation",
            ok,
            format!("value {val:.12} vs {expect:.12}"),
        ));
    }

    out
}
