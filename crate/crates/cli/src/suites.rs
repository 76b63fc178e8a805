//! Verification suites and the γ-gap scan.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use randbound_core::gaussian::{coord_gamma_bracket, expsup_gamma_sq_mc, sudakov_check};
use randbound_core::quadrature::scaled_gaussian_tail;
use randbound_core::summing::{cotype_ratio_bracket, pi2_search};
use randbound_core::{
    cotype2_search, diag_c0_rbound, ell2_bound_search, ell2_duality_check, ell2_product_check,
    gamma_ratio_mc, gaussian_moment_mc, komatsu_lower_tail, operator_norm, r_bound_search, rademacher_moment,
    square_function_norm, theta, theta_floor, Error, Exponent, Matrix, McConfig, OperatorFamily, SearchConfig,
    SeqSpace, Vector, Witness, K_G,
};

use crate::report::{number, Relation, Report, Row};

/// Flags shared by every command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub samples: usize,
    pub confidence: f64,
    pub budget: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 42, samples: 100_000, confidence: 0.99, budget: 64 }
    }
}

impl RunConfig {
    pub fn mc(&self) -> Result<McConfig, Error> {
        McConfig::new(self.samples, self.seed, self.confidence)
    }

    pub fn mc_with_seed(&self, seed: u64) -> Result<McConfig, Error> {
        McConfig::new(self.samples, seed, self.confidence)
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig::default().with_restarts(self.budget).with_seed(self.seed)
    }

    pub fn echo(&self) -> Value {
        json!({
            "seed": self.seed,
            "samples": self.samples,
            "confidence": self.confidence,
            "budget": self.budget,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Sudakov,
    Komatsu,
    Expsup,
    ComparisonConstants,
    DiagExact,
    Identities,
    Duality,
    Product,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Sudakov,
        Suite::Komatsu,
        Suite::Expsup,
        Suite::ComparisonConstants,
        Suite::DiagExact,
        Suite::Identities,
        Suite::Duality,
        Suite::Product,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Sudakov => "sudakov",
            Suite::Komatsu => "komatsu",
            Suite::Expsup => "expsup",
            Suite::ComparisonConstants => "comparison-constants",
            Suite::DiagExact => "diag-exact",
            Suite::Identities => "identities",
            Suite::Duality => "duality",
            Suite::Product => "product",
        }
    }

    /// Random cases drawn when `--cases` is not given.
    pub fn default_cases(self) -> usize {
        match self {
            Suite::ComparisonConstants => 200,
            Suite::Duality => 50,
            Suite::Identities | Suite::Product => 20,
            _ => 0,
        }
    }

    fn salt(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            format!("unknown suite {s:?}; expected one of {}", names.join(", "))
        })
    }
}

/// Suite-specific options.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteOptions {
    /// Dimensions for `sudakov`.
    pub n: Option<Vec<usize>>,
    /// Diagonal coefficients for `diag-exact`.
    pub a: Option<Vec<f64>>,
    /// Random cases for the randomized suites.
    pub cases: Option<usize>,
}

fn rng_for(cfg: &RunConfig, suite: Suite) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ suite.salt())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_millis() as u64)
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions, cfg: &RunConfig) -> Result<Report, Error> {
    let mut config = cfg.echo();
    let mut report = Report::new(format!("verify {suite}"), Value::Null);
    let cases = opts.cases.unwrap_or(suite.default_cases());
    report.rows = match suite {
        Suite::Sudakov => {
            let ns = opts.n.clone().unwrap_or_else(|| vec![1, 2, 10, 100, 1000, 10_000]);
            config["n"] = json!(ns);
            let mut rng = rng_for(cfg, suite);
            let mut vectors = Vec::new();
            for &n in &ns {
                if n == 0 {
                    return Err(Error::Domain("sudakov needs n >= 1".into()));
                }
                vectors.push((format!("n={n}/flat"), Vector::new(vec![1.0; n])?));
                vectors.push((format!("n={n}/gaussian"), Vector::new((0..n).map(|_| normal(&mut rng)).collect())?));
            }
            sudakov_rows(&vectors, cfg)?
        }
        Suite::Komatsu => komatsu_rows(),
        Suite::Expsup => expsup_rows(cfg)?,
        Suite::ComparisonConstants => {
            config["cases"] = json!(cases);
            comparison_rows(&random_comparison_cases(&mut rng_for(cfg, suite), cases), cfg)?
        }
        Suite::DiagExact => {
            let a = opts.a.clone().unwrap_or_else(|| vec![3.0, 4.0]);
            config["a"] = json!(a);
            vec![diag_exact_row(&a, cfg)?]
        }
        Suite::Identities => {
            config["cases"] = json!(cases);
            let mut rng = rng_for(cfg, suite);
            let families: Vec<OperatorFamily> = (0..cases).map(|_| random_functional_family(&mut rng, 3, 3)).collect();
            identity_rows(&families, cfg)?
        }
        Suite::Duality => {
            config["cases"] = json!(cases);
            let mut rng = rng_for(cfg, suite);
            let families: Vec<OperatorFamily> = (0..cases).map(|_| random_small_family(&mut rng)).collect();
            let singles: Vec<OperatorFamily> = (0..4 * cases).map(|_| random_linf_singleton(&mut rng)).collect();
            let mut rows = duality_rows(&families, cfg);
            rows.extend(singleton_rows(&singles, cfg));
            rows
        }
        Suite::Product => {
            config["cases"] = json!(cases);
            let mut rng = rng_for(cfg, suite);
            let mut pairs = fixed_product_pairs()?;
            for _ in 0..cases {
                pairs.push(random_product_pair(&mut rng));
            }
            product_rows(&pairs, cfg)?
        }
    };
    report.config = config;
    Ok(report)
}

/// One row per vector: `lhs + 3·(4·hw) ≤ 4·mean`.
pub fn sudakov_rows(vectors: &[(String, Vector)], cfg: &RunConfig) -> Result<Vec<Row>, Error> {
    let mut rows = Vec::with_capacity(vectors.len());
    for (i, (case, x)) in vectors.iter().enumerate() {
        let mc = cfg.mc_with_seed(cfg.seed.wrapping_add(i as u64))?;
        let (check, ms) = timed(|| sudakov_check(x, &mc));
        let check = check?;
        rows.push(
            Row::new(case.clone(), "gaussian.sudakov", Relation::LeMargin, check.lhs, 4.0 * check.rhs.mean)
                .ci(4.0 * check.rhs.half_width)
                .elapsed(ms)
                .detail(json!({ "n": x.len(), "esup_mean": check.rhs.mean, "esup_halfwidth": check.rhs.half_width })),
        );
    }
    Ok(rows)
}

/// Log-uniform `n ∈ [2, max_n]` with coefficient profiles from flat to
/// heavy-tailed and sparse.
pub fn random_sudakov_vectors(seed: u64, count: usize, max_n: usize) -> Vec<(String, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5d_a4a0);
    (0..count)
        .map(|i| {
            let n = (2f64 * ((max_n as f64 / 2.0).ln() * rng.random::<f64>()).exp()).round().clamp(2.0, max_n as f64) as usize;
            let kind = i % 4;
            let coords: Vec<f64> = (0..n)
                .map(|_| match kind {
                    0 => 1.0,
                    1 => normal(&mut rng),
                    2 => normal(&mut rng) / normal(&mut rng).abs().max(1e-3),
                    _ => {
                        if rng.random::<f64>() < 0.1 {
                            normal(&mut rng)
                        } else {
                            0.0
                        }
                    }
                })
                .collect();
            let name = ["flat", "gaussian", "cauchy", "sparse"][kind];
            (format!("case={i}/n={n}/{name}"), Vector::new(coords).expect("nonempty"))
        })
        .collect()
}

/// Quadrature tail against Komatsu's bound on `s ∈ {0, 0.1, …, 10}`, and
/// `Θ(y) ≥ e^{−1/y}` on a grid.
pub fn komatsu_rows() -> Vec<Row> {
    let mut rows: Vec<Row> = (0..=100)
        .map(|i| {
            let s = i as f64 / 10.0;
            let ((bound, tail), ms) = timed(|| (komatsu_lower_tail(s), scaled_gaussian_tail(s)));
            Row::new(format!("s={s:.1}"), "gaussian.komatsu", Relation::Le, bound, tail).tolerance(1e-12).elapsed(ms)
        })
        .collect();
    for i in 1..=20 {
        let y = i as f64 * 0.25;
        let lo = theta_floor(y).expect("positive");
        let hi = theta(y).expect("positive");
        rows.push(Row::new(format!("theta y={y:.2}"), "gaussian.theta-floor", Relation::Le, lo, hi));
    }
    rows
}

/// `E sup_{i≤n} γ_i² + 3·hw ≤ 2 log 2n` for `n = 1, 2, 4, …, 4096`.
pub fn expsup_rows(cfg: &RunConfig) -> Result<Vec<Row>, Error> {
    let mc = cfg.mc()?;
    let mut rows = Vec::new();
    for j in 0..=12 {
        let n = 1usize << j;
        let (est, ms) = timed(|| expsup_gamma_sq_mc(n, &mc));
        let est = est?;
        let bound = 2.0 * (2.0 * n as f64).ln();
        rows.push(
            Row::new(format!("n={n}"), "gaussian.expsup", Relation::LeMargin, est.mean, bound)
                .ci(est.half_width)
                .elapsed(ms),
        );
    }
    Ok(rows)
}

/// A space and a list of vectors in it.
pub type ComparisonCase = (SeqSpace, Vec<Vector>);

pub fn random_comparison_cases(rng: &mut ChaCha8Rng, count: usize) -> Vec<ComparisonCase> {
    let exponents = [Exponent::Finite(1.0), Exponent::Finite(1.5), Exponent::Finite(2.0), Exponent::Finite(3.0), Exponent::Infinity];
    (0..count)
        .map(|_| {
            let p = exponents[rng.random_range(0..exponents.len())];
            let dim = rng.random_range(1..=5);
            let k = rng.random_range(1..=8);
            let space = SeqSpace::new(dim, p).expect("valid space");
            let vs = (0..k).map(|_| Vector::new((0..dim).map(|_| normal(rng)).collect()).expect("nonempty")).collect();
            (space, vs)
        })
        .collect()
}


/// `E‖Σ r_n x_n‖ ≤ (π/2)^{1/2} E‖Σ γ_n x_n‖` and
/// `‖(Σ|x_n|²)^{1/2}‖ ≤ √2 E‖Σ r_n x_n‖`, first moments throughout.
pub fn comparison_rows(cases: &[ComparisonCase], cfg: &RunConfig) -> Result<Vec<Row>, Error> {
    let c = (PI / 2.0).sqrt();
    let mut rows = Vec::new();
    for (i, (space, vs)) in cases.iter().enumerate() {
        let mc = cfg.mc_with_seed(cfg.seed.wrapping_add(i as u64))?;
        let (values, ms) = timed(|| -> Result<_, Error> {
            Ok((rademacher_moment(space, vs, 1.0)?, gaussian_moment_mc(space, vs, 1.0, &mc)?, square_function_norm(space, vs)?))
        });
        let (rad, gauss, sq) = values?;
        let tag = format!("case={i}/{space}/k={}", vs.len());
        rows.push(
            Row::new(format!("{tag}/gaussian"), "facts.rademacher-gaussian", Relation::LeSlack, rad, c * gauss.mean)
                .ci(c * gauss.half_width)
                .tolerance(1e-12 * rad)
                .elapsed(ms),
        );
        rows.push(
            Row::new(format!("{tag}/square-function"), "facts.square-function", Relation::Le, sq, 2f64.sqrt() * rad)
                .tolerance(1e-12 * sq),
        );
    }
    Ok(rows)
}

/// Searched `R` of the diagonal family against `‖a‖₂`.
pub fn diag_exact_row(a: &[f64], cfg: &RunConfig) -> Result<Row, Error> {
    let family = OperatorFamily::diagonal_c0(a)?;
    let (est, ms) = timed(|| r_bound_search(&family, &cfg.search()));
    let exact = diag_c0_rbound(&Vector::new(a.to_vec())?);
    let case = format!("a={}", a.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","));
    Ok(Row::new(case, "rademacher.diag-exact", Relation::Close, est.lower, exact)
        .tolerance(1e-6)
        .elapsed(ms)
        .detail(json!({ "search_upper": number(est.upper), "upper_source": est.upper_source.tag() })))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| normal(rng)).collect()).collect();
    Matrix::from_rows(&data).expect("rectangular")
}

/// `N ≤ max_n` random functionals on `ℓ∞_M`, `M ≤ max_m`.
pub fn random_functional_family(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize) -> OperatorFamily {
    let m = rng.random_range(1..=max_m);
    let n = rng.random_range(1..=max_n);
    let members = (0..n).map(|_| random_matrix(rng, 1, m)).collect();
    OperatorFamily::new(SeqSpace::linf(m).expect("m >= 1"), SeqSpace::scalars(), members).expect("consistent shapes")
}

fn random_exponent(rng: &mut ChaCha8Rng) -> Exponent {
    [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity][rng.random_range(0..3)]
}

/// Up to three members between spaces of dimension at most three.
pub fn random_small_family(rng: &mut ChaCha8Rng) -> OperatorFamily {
    let d = rng.random_range(1..=3);
    let c = rng.random_range(1..=3);
    let k = rng.random_range(1..=3);
    let dom = SeqSpace::new(d, random_exponent(rng)).expect("valid");
    let cod = SeqSpace::new(c, random_exponent(rng)).expect("valid");
    let members = (0..k).map(|_| random_matrix(rng, c, d)).collect();
    OperatorFamily::new(dom, cod, members).expect("consistent shapes")
}

/// A random `2×2` or `3×3` matrix on `ℓ∞`.
pub fn random_linf_singleton(rng: &mut ChaCha8Rng) -> OperatorFamily {
    let n = rng.random_range(2..=3);
    let l = SeqSpace::linf(n).expect("n >= 1");
    OperatorFamily::singleton(l, l, random_matrix(rng, n, n)).expect("square")
}

/// `R(𝒯) = C₂(A)` and `R²(𝒯) = π₂(A)` for functional families, each side
/// found by its own search.
pub fn identity_rows(families: &[OperatorFamily], cfg: &RunConfig) -> Result<Vec<Row>, Error> {
    let search = cfg.search();
    let mut rows = Vec::new();
    for (i, family) in families.iter().enumerate() {
        let stacked = family.stacked()?;
        let tag = format!("case={i}/M={}/N={}", family.domain().dim(), family.len());
        let ((r, c2), ms) = timed(|| (r_bound_search(family, &search), cotype2_search(&stacked, &search)));
        let c2 = c2?;
        rows.push(
            Row::new(format!("{tag}/r-vs-cotype2"), "identities.r-cotype2", Relation::RelClose, r.lower, c2.lower)
                .tolerance(0.02)
                .elapsed(ms),
        );
        let ((l2, pi), ms) = timed(|| (ell2_bound_search(family, &search), pi2_search(&stacked, &search)));
        let pi = pi?;
        rows.push(
            Row::new(format!("{tag}/ell2-vs-pi2"), "identities.ell2-pi2", Relation::RelClose, l2.lower, pi.lower)
                .tolerance(0.02)
                .elapsed(ms),
        );
    }
    Ok(rows)
}

/// Each side's lower against the other side's upper, and agreement of the
/// two lowers within 10%.
pub fn duality_rows(families: &[OperatorFamily], cfg: &RunConfig) -> Vec<Row> {
    let search = cfg.search();
    let mut rows = Vec::new();
    for (i, family) in families.iter().enumerate() {
        let (check, ms) = timed(|| ell2_duality_check(family, &search));
        let tag = format!("case={i}/{}->{}/k={}", family.domain(), family.codomain(), family.len());
        let (p, d) = (&check.primal, &check.dual);
        rows.push(
            Row::new(format!("{tag}/primal-vs-dual-upper"), "ell2.duality", Relation::Le, p.lower, d.upper)
                .tolerance(1e-9 * d.upper.min(1e300) + 1e-12)
                .elapsed(ms),
        );
        rows.push(
            Row::new(format!("{tag}/dual-vs-primal-upper"), "ell2.duality", Relation::Le, d.lower, p.upper)
                .tolerance(1e-9 * p.upper.min(1e300) + 1e-12),
        );
        rows.push(
            Row::new(format!("{tag}/agreement"), "ell2.duality", Relation::RelClose, p.lower, d.lower)
                .tolerance(0.10)
                .detail(json!({ "consistent": check.consistent })),
        );
    }
    rows
}

/// Searched `R²({T}) ≤ K_G ‖T‖`.
pub fn singleton_rows(families: &[OperatorFamily], cfg: &RunConfig) -> Vec<Row> {
    let search = cfg.search();
    families
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let (est, ms) = timed(|| ell2_bound_search(f, &search));
            let norm = operator_norm(&f.members()[0], f.domain(), f.codomain()).expect("ℓ∞ codomain has a closed form");
            Row::new(format!("singleton={i}/n={}", f.domain().dim()), "ell2.grothendieck-singleton", Relation::Le, est.lower, K_G * norm)
                .tolerance(1e-9)
                .elapsed(ms)
        })
        .collect()
}

pub type ProductPair = (String, OperatorFamily, OperatorFamily);

fn fixed_product_pairs() -> Result<Vec<ProductPair>, Error> {
    let l2 = SeqSpace::linf(2)?;
    let id = OperatorFamily::singleton(l2, l2, Matrix::identity(2))?;
    Ok(vec![
        ("identity-identity".into(), id.clone(), id),
        ("functionals-embeddings".into(), OperatorFamily::coordinate_functionals(2)?, OperatorFamily::coordinate_embeddings(2)?),
        ("embeddings-functionals".into(), OperatorFamily::coordinate_embeddings(2)?, OperatorFamily::coordinate_functionals(2)?),
    ])
}

/// `S` after `T`, both random families on `ℓ∞` spaces of dimension ≤ 3.
pub fn random_product_pair(rng: &mut ChaCha8Rng) -> ProductPair {
    let (d, m, c) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3));
    let (ks, kt) = (rng.random_range(1..=2), rng.random_range(1..=2));
    let l = |n: usize| SeqSpace::linf(n).expect("n >= 1");
    let t = OperatorFamily::new(l(d), l(m), (0..kt).map(|_| random_matrix(rng, m, d)).collect()).expect("shapes");
    let s = OperatorFamily::new(l(m), l(c), (0..ks).map(|_| random_matrix(rng, c, m)).collect()).expect("shapes");
    (format!("random/{d}-{m}-{c}/ks={ks}/kt={kt}"), s, t)
}

/// `R²({ST}) ≤ R²(𝒮) R²(𝒯)` on the searched lower of the products.
pub fn product_rows(pairs: &[ProductPair], cfg: &RunConfig) -> Result<Vec<Row>, Error> {
    let search = cfg.search();
    let mut rows = Vec::new();
    for (i, (name, s, t)) in pairs.iter().enumerate() {
        let (check, ms) = timed(|| ell2_product_check(s, t, &search));
        let check = check?;
        let bound = check.s_upper * check.t_upper;
        rows.push(
            Row::new(format!("case={i}/{name}"), "ell2.product", Relation::Le, check.composite.lower, bound)
                .tolerance(1e-9 * bound.min(1e300) + 1e-12)
                .elapsed(ms)
                .detail(json!({ "s_upper": number(check.s_upper), "t_upper": number(check.t_upper) })),
        );
    }
    Ok(rows)
}

/// The γ-gap scan: for each `N`, the basis-witness Monte Carlo lower bound
/// for the coordinate functionals on `ℓ∞_N` against the bracket
/// `[√(N/(2 log 2N)), 4√(N/log N)]`, with `R = √N` and the ratio floor
/// `√(log N)/4` alongside.
pub fn gap_report(ns: &[usize], cfg: &RunConfig) -> Result<Report, Error> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if let Some(&n) = ns.iter().find(|&&n| n < 2) {
        return Err(Error::Domain(format!("gap scan needs N >= 2, got {n}")));
    }
    let mc = cfg.mc()?;
    let mut config = cfg.echo();
    config["n"] = json!(ns);
    let mut report = Report::new("gap", config);
    let mut floors = Vec::new();
    for &n in &ns {
        let family = OperatorFamily::coordinate_functionals(n)?;
        let w = Witness::new(&family, (0..n).collect(), (0..n).map(|i| Vector::basis(n, i)).collect())?;
        let (est, ms) = timed(|| gamma_ratio_mc(&family, &w, &mc));
        let est = est?;
        let (lo, hi) = coord_gamma_bracket(n)?;
        let (floor, _) = cotype_ratio_bracket(n)?;
        floors.push((n, floor));
        let detail = json!({
            "n": n,
            "r_lower": (n as f64).sqrt(),
            "gamma_upper": hi,
            "gamma_mc_lower": est.certified_lower,
            "gamma_mc_mean": est.ratio.mean,
            "bracket_lower": lo,
            "bracket_upper": hi,
            "ratio_floor": floor,
        });
        report.rows.push(
            Row::new(format!("N={n}/bracket-lower"), "gaussian.gamma-bracket", Relation::LeSlack, lo, est.ratio.mean)
                .ci(est.ratio.half_width)
                .elapsed(ms)
                .detail(detail.clone()),
        );
        report.rows.push(
            Row::new(format!("N={n}/bracket-upper"), "gaussian.gamma-bracket", Relation::Le, est.certified_lower, hi)
                .detail(detail),
        );
    }
    for pair in floors.windows(2) {
        let ((n0, f0), (n1, f1)) = (pair[0], pair[1]);
        report.rows.push(Row::new(format!("ratio-floor N={n0}<N={n1}"), "gaussian.ratio-floor", Relation::Lt, f0, f1));
    }
    Ok(report)
}
