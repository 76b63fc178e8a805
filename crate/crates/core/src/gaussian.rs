//! Seeded Monte Carlo for Gaussian averages, the Sudakov-type minoration with
//! constant 4, Komatsu's tail bound and the γ-bound brackets.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::family::OperatorFamily;
use crate::mc::{self, tag, PairStats};
use crate::rademacher;
use crate::search::{self, Objective, SearchConfig};
use crate::space::{SeqSpace, Vector};
use crate::upper::Upper;
use crate::witness::{BoundEstimate, ConfidenceInterval, ConstantKind, EstimateMeta, UpperSource, Witness};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_LEVEL: f64 = 0.99;

/// `K = π(1 + √(1 + 2π))/4`, the constant in the minoration proof.
pub const SUDAKOV_K: f64 = 2.904_981_815_935_267;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: DEFAULT_SAMPLES, seed: 42, level: DEFAULT_LEVEL }
    }
}

impl McConfig {
    pub fn new(samples: usize, seed: u64, level: f64) -> Result<Self> {
        if samples < 2 {
            return Err(Error::domain(format!("need at least 2 samples, got {samples}")));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::domain(format!("confidence level must lie in (0, 1), got {level}")));
        }
        Ok(McConfig { samples, seed, level })
    }

    fn z(&self) -> f64 {
        mc::z_value(self.level)
    }
}

/// A sample mean with a normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub samples: usize,
    pub seed: u64,
    pub level: f64,
}

impl McEstimate {
    fn new(mean: f64, half_width: f64, cfg: &McConfig) -> Self {
        McEstimate { mean, half_width, samples: cfg.samples, seed: cfg.seed, level: cfg.level }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Plain mean of the first observable.
    fn of_mean(stats: &PairStats, cfg: &McConfig) -> Self {
        Self::new(stats.mean_a, cfg.z() * (stats.var_a() / stats.n).sqrt(), cfg)
    }

    /// `(E X)^{1/q}` from moments of `X`, half-width by the delta method.
    fn of_root(mean: f64, var: f64, n: f64, q: f64, cfg: &McConfig) -> Self {
        if mean <= 0.0 {
            return Self::new(0.0, 0.0, cfg);
        }
        let hw = cfg.z() * (var / n).sqrt();
        let root = mean.powf(1.0 / q);
        Self::new(root, hw * root / (q * mean), cfg)
    }
}

fn sparse(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(i, &c)| (i, c)).collect()
}

fn gaussian_sum(terms: &[Vec<(usize, f64)>], g: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (t, &gn) in terms.iter().zip(g) {
        for &(i, c) in t {
            out[i] += gn * c;
        }
    }
}

/// `(E‖Σ γ_n v_n‖^q)^{1/q}` by Monte Carlo.
pub fn gaussian_moment_mc(space: &SeqSpace, vs: &[Vector], q: f64, cfg: &McConfig) -> Result<McEstimate> {
    if vs.is_empty() {
        return Err(Error::domain("Gaussian moment of an empty list"));
    }
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::domain(format!("moment exponent must be a finite q >= 1, got {q}")));
    }
    for v in vs {
        space.check(v.coords())?;
    }
    let terms: Vec<_> = vs.iter().map(|v| sparse(v.coords())).collect();
    let (k, d) = (vs.len(), space.dim());
    let stats = mc::run(cfg.samples, cfg.seed, tag::MOMENT, |rng, buf| {
        buf.resize(k + d, 0.0);
        let (g, s) = buf.split_at_mut(k);
        g.iter_mut().for_each(|x| *x = mc::normal(rng));
        gaussian_sum(&terms, g, s);
        (rademacher::pow_q(space.norm_of(s), q), 0.0)
    });
    Ok(McEstimate::of_root(stats.mean_a, stats.var_a(), stats.n, q, cfg))
}

/// Exact sampler for `max_i a_i |γ_i|`.
///
/// Weights are sorted in decreasing order. From index `i` on, with current
/// maximum `M`, only indices with `|γ_j| > M/a_i` can matter; their positions
/// form a Bernoulli process with rate `p = ℙ(|γ| > M/a_i)`, so the next one is
/// reached by a geometric jump and its value drawn from the Gaussian tail.
/// While `p` is large it is cheaper to sample indices one by one.
#[derive(Debug, Clone)]
pub(crate) struct SupSampler {
    a: Vec<f64>,
}

const DIRECT_RATE: f64 = 0.25;

impl SupSampler {
    pub fn new(x: &[f64]) -> Self {
        let mut a: Vec<f64> = x.iter().map(|c| c.abs()).filter(|&c| c > 0.0).collect();
        a.sort_by(|p, q| q.total_cmp(p));
        SupSampler { a }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let a = &self.a;
        let n = a.len();
        if n == 0 {
            return 0.0;
        }
        let mut m = a[0] * mc::normal(rng).abs();
        let mut i = 1;
        while i < n {
            let c = m / a[i];
            let p = erfc(c * std::f64::consts::FRAC_1_SQRT_2);
            if p > DIRECT_RATE {
                m = m.max(a[i] * mc::normal(rng).abs());
                i += 1;
                continue;
            }
            if p <= 0.0 {
                break;
            }
            let jump = (mc::open_uniform(rng).ln() / (-p).ln_1p()).floor();
            if jump >= (n - i) as f64 {
                break;
            }
            let j = i + jump as usize;
            m = m.max(a[j] * tail_sample(c, rng));
            i = j + 1;
        }
        m
    }
}

/// `|γ|` conditioned on `|γ| > c`.
pub(crate) fn tail_sample(c: f64, rng: &mut ChaCha8Rng) -> f64 {
    if c < 1.0 {
        loop {
            let t = mc::normal(rng).abs();
            if t > c {
                return t;
            }
        }
    }
    // Marsaglia: propose from the Rayleigh tail, accept with probability c/x.
    loop {
        let x = (c * c - 2.0 * mc::open_uniform(rng).ln()).sqrt();
        if mc::open_uniform(rng) * x <= c {
            return x;
        }
    }
}

/// `E sup_i |γ_i x_i|` by Monte Carlo.
pub fn expected_sup_mc(x: &Vector, cfg: &McConfig) -> Result<McEstimate> {
    if x.is_empty() {
        return Err(Error::domain("expected supremum over an empty vector"));
    }
    let sampler = SupSampler::new(x.coords());
    let stats = mc::run(cfg.samples, cfg.seed, tag::SUP, |rng, _| (sampler.sample(rng), 0.0));
    Ok(McEstimate::of_mean(&stats, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SudakovCheck {
    pub lhs: f64,
    pub rhs: McEstimate,
    pub holds: bool,
}

impl SudakovCheck {
    /// `lhs ≤ 4(mean − σ·hw)`: a violation would need a `σ`-half-width excursion.
    pub fn holds_with_margin(&self, sigmas: f64) -> bool {
        self.lhs <= 4.0 * (self.rhs.mean - sigmas * self.rhs.half_width)
    }
}

/// `((log n)/n Σ x_i²)^{1/2} ≤ 4 E sup_i |γ_i x_i|`.
pub fn sudakov_check(x: &Vector, cfg: &McConfig) -> Result<SudakovCheck> {
    let n = x.len();
    let rhs = expected_sup_mc(x, cfg)?;
    let ss: f64 = x.coords().iter().map(|c| c * c).sum();
    let lhs = ((n as f64).ln() / n as f64 * ss).sqrt();
    Ok(SudakovCheck { lhs, rhs, holds: lhs <= 4.0 * rhs.upper() })
}

/// Komatsu's lower bound `2/(s + √(s² + 4))·e^{−s²/2}` for `√(2π)·ℙ(γ > s)`.
pub fn komatsu_lower_tail(s: f64) -> f64 {
    let root = (s * s + 4.0).sqrt();
    // for s < 0 the denominator cancels; 2/(s + r) = (r − s)/2
    let factor = if s < 0.0 { 0.5 * (root - s) } else { 2.0 / (s + root) };
    factor * (-0.5 * s * s).exp()
}

fn positive(y: f64) -> Result<()> {
    if y.is_nan() || y <= 0.0 || !y.is_finite() {
        return Err(Error::domain(format!("argument must be a positive real, got {y}")));
    }
    Ok(())
}

/// `Θ(y) = y e^{−1/(2y)}`.
pub fn theta(y: f64) -> Result<f64> {
    positive(y)?;
    Ok(y * (-0.5 / y).exp())
}

/// `e^{−1/y}`, a lower bound for `Θ(y)`.
pub fn theta_floor(y: f64) -> Result<f64> {
    positive(y)?;
    Ok((-1.0 / y).exp())
}

/// `2 log(2n)`, an upper bound for `E sup_{i≤n} γ_i²`.
pub fn expsup_gamma_sq_bound(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    Ok(2.0 * (2.0 * n as f64).ln())
}

/// `E sup_{i≤n} γ_i²` by Monte Carlo.
pub fn expsup_gamma_sq_mc(n: usize, cfg: &McConfig) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let sampler = SupSampler::new(&vec![1.0; n]);
    let stats = mc::run(cfg.samples, cfg.seed, tag::SUP_SQ, |rng, _| {
        let s = sampler.sample(rng);
        (s * s, 0.0)
    });
    Ok(McEstimate::of_mean(&stats, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpsupCheck {
    pub bound: f64,
    pub estimate: McEstimate,
    pub holds: bool,
}

/// Compares the Monte Carlo value of `E sup γ_i²` with `2 log(2n)`.
pub fn expsup_check(n: usize, cfg: &McConfig) -> Result<ExpsupCheck> {
    let bound = expsup_gamma_sq_bound(n)?;
    let estimate = expsup_gamma_sq_mc(n, cfg)?;
    Ok(ExpsupCheck { bound, estimate, holds: estimate.lower() <= bound })
}

/// Paired estimate of a ratio of Gaussian second-moment roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: McEstimate,
    pub numerator: McEstimate,
    pub denominator: McEstimate,
    /// `(num − hw)/(den + hw)`, a lower bound at the configured confidence.
    pub certified_lower: f64,
}

/// Numerator side of a paired ratio: exact, or Gaussian sums in a space.
pub(crate) enum Numerator<'a> {
    Exact(f64),
    Sums(&'a SeqSpace, Vec<Vec<f64>>),
}

pub(crate) fn paired_ratio(num: Numerator<'_>, domain: &SeqSpace, xs: &[&[f64]], cfg: &McConfig) -> Result<RatioEstimate> {
    let k = xs.len();
    let dx = domain.dim();
    let xterms: Vec<_> = xs.iter().map(|x| sparse(x)).collect();
    let (exact, yspace, yterms) = match &num {
        Numerator::Exact(v) => (Some(v * v), None, Vec::new()),
        Numerator::Sums(space, ys) => (None, Some(*space), ys.iter().map(|y| sparse(y)).collect()),
    };
    let dy = yspace.map_or(0, SeqSpace::dim);
    let stats = mc::run(cfg.samples, cfg.seed, tag::RATIO, |rng, buf| {
        buf.resize(k + dx + dy, 0.0);
        let (g, rest) = buf.split_at_mut(k);
        let (sx, sy) = rest.split_at_mut(dx);
        g.iter_mut().for_each(|x| *x = mc::normal(rng));
        gaussian_sum(&xterms, g, sx);
        let den = domain.norm_of(sx);
        let num = match (exact, yspace) {
            (Some(v), _) => v,
            (None, Some(space)) => {
                gaussian_sum(&yterms, g, sy);
                let n = space.norm_of(sy);
                n * n
            }
            (None, None) => unreachable!(),
        };
        (num, den * den)
    });
    let numerator = McEstimate::of_root(stats.mean_a, stats.var_a(), stats.n, 2.0, cfg);
    let denominator = McEstimate::of_root(stats.mean_b, stats.var_b(), stats.n, 2.0, cfg);
    if denominator.mean < rademacher::DEGENERATE_EPS || denominator.mean <= denominator.half_width {
        return Err(Error::Degenerate(format!(
            "Gaussian denominator {:e} does not exceed its half-width {:e}",
            denominator.mean, denominator.half_width
        )));
    }
    let f = numerator.mean / denominator.mean;
    let (nm, dm) = (stats.mean_a, stats.mean_b);
    let rel_var = if nm > 0.0 {
        (stats.var_a() / (nm * nm) + stats.var_b() / (dm * dm) - 2.0 * stats.cov() / (nm * dm)).max(0.0)
    } else {
        0.0
    };
    let ratio = McEstimate::new(f, cfg.z() * 0.5 * f * (rel_var / stats.n).sqrt(), cfg);
    let certified_lower = (numerator.mean - numerator.half_width).max(0.0) / denominator.upper();
    Ok(RatioEstimate { ratio, numerator, denominator, certified_lower })
}

/// Paired Monte Carlo witness ratio for the γ-bound. A one-dimensional
/// codomain needs no sampling on the numerator: `E|Σ γ_n y_n|² = Σ y_n²`.
pub fn gamma_ratio_mc(family: &OperatorFamily, w: &Witness, cfg: &McConfig) -> Result<RatioEstimate> {
    w.validate(family)?;
    let ys = w.images(family);
    let num = if family.codomain().dim() == 1 {
        Numerator::Exact(ys.iter().map(|y| y[0] * y[0]).sum::<f64>().sqrt())
    } else {
        Numerator::Sums(family.codomain(), ys)
    };
    paired_ratio(num, family.domain(), &w.raw_vectors(), cfg)
}

/// `(√(N/(2 log 2N)), 4√(N/log N))`, the bracket for the γ-bound of the
/// first `N` coordinate functionals on `c₀`.
pub fn coord_gamma_bracket(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::domain(format!("the bracket needs N >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(((nf / (2.0 * (2.0 * nf).ln())).sqrt(), 4.0 * (nf / nf.ln()).sqrt()))
}

/// A fixed set of Gaussian draws shared by every witness during a search,
/// so ratios of different witnesses are compared on common random numbers.
pub(crate) struct Pilot {
    data: Vec<f64>,
    width: usize,
    rows: usize,
}

const PILOT_SAMPLES: usize = 2048;

impl Pilot {
    pub fn new(width: usize, mc: &McConfig) -> Self {
        let rows = mc.samples.min(PILOT_SAMPLES);
        let mut rng = mc::stream_rng(mc.seed, tag::PILOT, 0);
        let data = (0..rows * width).map(|_| mc::normal(&mut rng)).collect();
        Pilot { data, width, rows }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Average of `‖Σ_n g_n v_n‖²` over the pilot draws.
    pub fn mean_sq(&self, space: &SeqSpace, vs: &[f64], k: usize) -> f64 {
        let d = space.dim();
        let mut s = vec![0.0; d];
        let mut total = 0.0;
        for r in 0..self.rows {
            let g = &self.data[r * self.width..r * self.width + k];
            s.iter_mut().for_each(|x| *x = 0.0);
            for (n, &gn) in g.iter().enumerate() {
                for (a, b) in s.iter_mut().zip(&vs[n * d..(n + 1) * d]) {
                    *a += gn * b;
                }
            }
            let v = space.norm_of(&s);
            total += v * v;
        }
        total / self.rows as f64
    }
}

struct GammaSaa<'a> {
    family: &'a OperatorFamily,
    choices: &'a [usize],
    pilot: Pilot,
}

impl Objective for GammaSaa<'_> {
    fn dim(&self) -> usize {
        self.family.domain().dim()
    }

    fn choices(&self) -> usize {
        self.choices.len()
    }

    fn value(&self, ops: &[usize], xs: &[f64]) -> f64 {
        let k = ops.len();
        if k > self.pilot.width() {
            return 0.0;
        }
        let d = self.dim();
        let c = self.family.codomain().dim();
        let mut ys = vec![0.0; k * c];
        for (n, &o) in ops.iter().enumerate() {
            self.family.members()[self.choices[o]].apply_into(&xs[n * d..(n + 1) * d], &mut ys[n * c..(n + 1) * c]);
        }
        let num = if c == 1 { ys.iter().map(|y| y * y).sum() } else { self.pilot.mean_sq(self.family.codomain(), &ys, k) };
        let den = self.pilot.mean_sq(self.family.domain(), xs, k);
        if den < rademacher::DEGENERATE_EPS {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

/// Upper bounds for `R^γ(𝒯)`: every R-bound upper (`R^γ ≤ R`) and the
/// coordinate-functional formula.
pub(crate) fn gamma_upper(family: &OperatorFamily) -> Upper {
    let mut up = rademacher::r_upper(family);
    if let Some(c) = family.coordinate_functional_scale() {
        if let Ok((_, hi)) = coord_gamma_bracket(family.len()) {
            up.offer(c * hi, UpperSource::formula("coord-functionals"));
        }
    }
    up
}

/// Certifies each candidate with the full sample budget and keeps the best.
pub(crate) fn certify_best<F>(
    family: &OperatorFamily,
    candidates: Vec<Witness>,
    certify: F,
) -> Option<(Witness, RatioEstimate)>
where
    F: Fn(&OperatorFamily, &Witness) -> Result<RatioEstimate>,
{
    let mut best: Option<(Witness, RatioEstimate)> = None;
    for w in candidates {
        let Ok(est) = certify(family, &w) else { continue };
        if best.as_ref().is_none_or(|(_, b)| est.certified_lower > b.certified_lower) {
            best = Some((w, est));
        }
    }
    best
}

pub(crate) fn mc_estimate(
    constant: ConstantKind,
    family: &OperatorFamily,
    best: Option<(Witness, RatioEstimate)>,
    up: Upper,
    cfg: &SearchConfig,
    mc: &McConfig,
) -> BoundEstimate {
    let meta = EstimateMeta { samples: Some(mc.samples), seed: mc.seed, search_budget: cfg.restarts, exhaustive: false };
    match best {
        Some((w, est)) if est.certified_lower > 0.0 => BoundEstimate {
            constant,
            lower: est.certified_lower,
            upper: up.value,
            lower_certificate: w,
            upper_source: up.source,
            ci: Some(ConfidenceInterval { half_width: est.ratio.half_width, level: mc.level }),
            meta,
            degenerate: false,
        },
        _ => BoundEstimate {
            constant,
            lower: 0.0,
            upper: up.value,
            lower_certificate: Witness::from_parts(vec![0], vec![Vector::basis(family.domain().dim(), 0)]),
            upper_source: up.source,
            ci: Some(ConfidenceInterval { half_width: 0.0, level: mc.level }),
            meta,
            degenerate: true,
        },
    }
}

/// Converts search slots into a witness, dropping zero vectors.
pub(crate) fn candidate_witness(family: &OperatorFamily, c: &search::Candidate, choices: &[usize]) -> Option<Witness> {
    let d = family.domain().dim();
    let mut ops = Vec::new();
    let mut vectors = Vec::new();
    for (slot, &o) in c.ops.iter().enumerate() {
        let x = &c.xs[slot * d..(slot + 1) * d];
        if x.iter().any(|&v| v != 0.0) {
            ops.push(choices[o]);
            vectors.push(Vector::from_raw(x.to_vec()));
        }
    }
    (!vectors.is_empty()).then(|| Witness::from_parts(ops, vectors))
}

/// Brackets `R^γ(𝒯)`. Witnesses are searched against a fixed pilot sample
/// and the winners are re-estimated with `mc.samples` fresh draws; the
/// reported lower end is the certified `(num − hw)/(den + hw)` value.
pub fn gamma_bound_search(family: &OperatorFamily, cfg: &SearchConfig, mc: &McConfig) -> BoundEstimate {
    if let Some((unit, scale)) = family.far_scaled() {
        return gamma_bound_search(&unit, cfg, mc).rescaled(scale);
    }
    let choices = family.distinct_indices();
    let up = gamma_upper(family);
    if family.is_zero() {
        return mc_estimate(ConstantKind::Gamma, family, None, up, cfg, mc);
    }
    let seeds = rademacher::canonical_seeds(family, &choices, usize::MAX);
    let width = cfg.max_witness_len.max(choices.len());
    let obj = GammaSaa { family, choices: &choices, pilot: Pilot::new(width, mc) };
    let opts = search::Options { grid: family.domain().is_linf(), exhaustive: false, stop_at: f64::INFINITY };
    let outcome = search::maximize(&obj, cfg, seeds.clone(), opts);
    let mut candidates: Vec<Witness> = seeds
        .iter()
        .filter_map(|(ops, xs)| {
            candidate_witness(family, &search::Candidate { ops: ops.clone(), xs: xs.clone(), value: 0.0 }, &choices)
        })
        .collect();
    candidates.extend(candidate_witness(family, &outcome.best, &choices));
    let best = certify_best(family, candidates, |f, w| gamma_ratio_mc(f, w, mc));
    mc_estimate(ConstantKind::Gamma, family, best, up, cfg, mc)
}
