//! 2-summing and (2,1)-summing norms on `ℓ∞` domains, the Pietsch solver,
//! and the Gaussian cotype-2 constant of a single operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{Matrix, OperatorFamily};
use crate::gaussian::{self, McConfig, Numerator, Pilot, RatioEstimate};
use crate::power::{self, norm_gradient, Ball, Convex};
use crate::rademacher::{self, DEGENERATE_EPS};
use crate::search::{self, Objective, SearchConfig};
use crate::space::{lp_norm, Exponent, SeqSpace, Vector};
use crate::upper::Upper;
use crate::witness::{BoundEstimate, ConstantKind, EstimateMeta, UpperSource, Witness};

/// Longest witness the power method searches over.
const MAX_SLOTS: usize = 64;
const POWER_ITERATIONS: usize = 200;
const PIETSCH_GAP: f64 = 1e-12;

/// The sequence `(x_n)` in the summing-norm definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummingWitness {
    vectors: Vec<Vector>,
}

impl SummingWitness {
    pub fn new(vectors: Vec<Vector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::shape("summing witness is empty"));
        }
        if vectors.iter().all(Vector::is_zero) {
            return Err(Error::Degenerate("every witness vector is zero".into()));
        }
        Ok(SummingWitness { vectors })
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }
}

/// `max_m (Σ_n |v_{n,m}|^q)^{1/q}`, the weak `ℓq` norm on an `ℓ∞` domain.
pub fn weak_lq_norm(space: &SeqSpace, vs: &[Vector], q: f64) -> Result<f64> {
    if !space.is_linf() {
        return Err(Error::contract("weak norms are only implemented on ℓ∞ domains"));
    }
    if vs.is_empty() {
        return Err(Error::domain("weak norm of an empty list"));
    }
    if q.is_nan() || q < 1.0 {
        return Err(Error::domain(format!("weak norm exponent must be >= 1, got {q}")));
    }
    for v in vs {
        space.check(v.coords())?;
    }
    let p = if q.is_infinite() { Exponent::Infinity } else { Exponent::Finite(q) };
    let mut col = vec![0.0; vs.len()];
    let mut best: f64 = 0.0;
    for m in 0..space.dim() {
        for (c, v) in col.iter_mut().zip(vs) {
            *c = v.coords()[m];
        }
        best = best.max(lp_norm(p, &col));
    }
    Ok(best)
}

fn require_linf(family: &OperatorFamily) -> Result<()> {
    if !family.domain().is_linf() {
        return Err(Error::contract("summing norms are only estimated on ℓ∞ domains"));
    }
    Ok(())
}

/// `(Σ‖A x_n‖²)^{1/2} / weak_ℓq(x)` for the single member `A`.
pub fn pi_ratio(family: &OperatorFamily, vectors: &[Vector], q: f64) -> Result<f64> {
    rademacher::single_member(family)?;
    require_linf(family)?;
    let den = weak_lq_norm(family.domain(), vectors, q)?;
    if den < DEGENERATE_EPS {
        return Err(Error::Degenerate(format!("weak norm {den:e} of the witness vanishes")));
    }
    let a = &family.members()[0];
    let num: f64 = vectors
        .iter()
        .map(|v| {
            let y = family.codomain().norm_of(&a.apply_raw(v.coords()));
            y * y
        })
        .sum();
    Ok(num.sqrt() / den)
}

/// Result of the Pietsch iteration for `A: ℓ∞_M → ℓ∞_N`.
///
/// With `b_{nm} = a_{nm}²`, every probability `μ` on the columns gives
/// `π₂(A)² ≤ max_n Σ_m b_{nm}/μ_m`, and every probability `λ` on the rows
/// gives the witness `x_{nm} = sgn(a_{nm}) (λ_n b_{nm}/c_m)^{1/2}`,
/// `c_m = Σ_n λ_n b_{nm}`, of value at least `(Σ_m c_m^{1/2})²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PietschSolution {
    /// Certified `π₂` upper bound.
    pub upper: f64,
    /// Value certified by the witness built from `lambda`.
    pub lower: f64,
    pub lambda: Vec<f64>,
}

pub fn pietsch(a: &Matrix) -> PietschSolution {
    let (n_rows, n_cols) = (a.rows(), a.cols());
    // both bounds are homogeneous; solve for A/max|a| so squares stay in range
    let scale = (0..n_rows).flat_map(|n| a.row(n).iter()).fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let b: Vec<f64> = (0..n_rows).flat_map(|n| a.row(n).iter().map(|x| (x / scale).powi(2))).collect();
    let active: Vec<bool> = (0..n_rows).map(|n| b[n * n_cols..(n + 1) * n_cols].iter().any(|&x| x > 0.0)).collect();
    let count = active.iter().filter(|&&x| x).count();
    if count == 0 {
        return PietschSolution { upper: 0.0, lower: 0.0, lambda: vec![0.0; n_rows] };
    }
    let mut lambda: Vec<f64> = active.iter().map(|&x| if x { 1.0 / count as f64 } else { 0.0 }).collect();
    let cap = (2e8 / (n_rows * n_cols) as f64).clamp(100.0, 20_000.0) as usize;
    let (mut best_upper, mut best_dual, mut best_lambda) = (f64::INFINITY, 0.0, lambda.clone());
    let mut c = vec![0.0; n_cols];
    let mut mu = vec![0.0; n_cols];
    let mut l = vec![0.0; n_rows];
    for _ in 0..cap {
        c.iter_mut().for_each(|x| *x = 0.0);
        for n in 0..n_rows {
            for m in 0..n_cols {
                c[m] += lambda[n] * b[n * n_cols + m];
            }
        }
        let s: f64 = c.iter().map(|x| x.sqrt()).sum();
        let dual = s * s;
        for m in 0..n_cols {
            mu[m] = c[m].sqrt() / s;
        }
        for n in 0..n_rows {
            l[n] = (0..n_cols)
                .map(|m| {
                    let bm = b[n * n_cols + m];
                    if bm == 0.0 {
                        0.0
                    } else {
                        bm / mu[m]
                    }
                })
                .sum();
        }
        let upper = l.iter().cloned().fold(0.0, f64::max);
        best_upper = best_upper.min(upper);
        if dual > best_dual {
            best_dual = dual;
            best_lambda.clone_from(&lambda);
        }
        if best_upper - best_dual <= PIETSCH_GAP * best_upper {
            break;
        }
        for n in 0..n_rows {
            lambda[n] *= l[n] / dual;
        }
    }
    PietschSolution { upper: scale * best_upper.sqrt(), lower: scale * best_dual.sqrt(), lambda: best_lambda }
}

/// `π₂(A)` upper bound for `A: ℓ∞ → ℓ∞`.
pub(crate) fn pietsch_upper(a: &Matrix) -> f64 {
    pietsch(a).upper
}

/// Rows of the Pietsch witness, one per row of `A` with positive weight,
/// heaviest first, each paired with its row index.
pub(crate) fn pietsch_witness(a: &Matrix, lambda: &[f64]) -> Vec<(usize, Vec<f64>)> {
    let n_cols = a.cols();
    let c: Vec<f64> = (0..n_cols)
        .map(|m| (0..a.rows()).map(|n| lambda[n] * a.get(n, m).powi(2)).sum())
        .collect();
    let mut order: Vec<usize> = (0..a.rows()).filter(|&n| lambda[n] > 0.0).collect();
    order.sort_by(|&i, &j| lambda[j].total_cmp(&lambda[i]));
    order
        .into_iter()
        .map(|n| {
            let row = (0..n_cols)
                .map(|m| {
                    let x = a.get(n, m);
                    if c[m] > 0.0 {
                        x.signum() * (lambda[n] * x * x / c[m]).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect();
            (n, row)
        })
        .collect()
}

/// `x ↦ (Σ_n ‖A x_n‖²)^{1/2}` on `k × d` witnesses.
struct StrongNorm<'a> {
    a: &'a Matrix,
    codomain: &'a SeqSpace,
    k: usize,
}

impl Convex for StrongNorm<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.k, self.a.cols())
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.a.cols();
        let c = self.a.rows();
        let mut ys = vec![0.0; self.k * c];
        let mut norms = vec![0.0; self.k];
        for n in 0..self.k {
            let y = &mut ys[n * c..(n + 1) * c];
            self.a.apply_into(&x[n * d..(n + 1) * d], y);
            norms[n] = self.codomain.norm_of(y);
        }
        let value = norms.iter().map(|v| v * v).sum::<f64>().sqrt();
        if let Some(g) = grad {
            g.iter_mut().for_each(|o| *o = 0.0);
            if value > 0.0 {
                let mut gy = vec![0.0; c];
                for n in 0..self.k {
                    norm_gradient(self.codomain.p(), &ys[n * c..(n + 1) * c], norms[n], &mut gy);
                    gy.iter_mut().for_each(|v| *v *= norms[n] / value);
                    self.a.apply_transpose_into(&gy, &mut g[n * d..(n + 1) * d]);
                }
            }
        }
        value
    }
}

fn pad(rows: &[Vec<f64>], k: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * d];
    for (n, r) in rows.iter().take(k).enumerate() {
        out[n * d..(n + 1) * d].copy_from_slice(r);
    }
    out
}

fn nonzero_rows(x: &[f64], k: usize, d: usize) -> Vec<Vector> {
    (0..k)
        .map(|n| &x[n * d..(n + 1) * d])
        .filter(|r| r.iter().any(|&v| v != 0.0))
        .map(|r| Vector::from_raw(r.to_vec()))
        .collect()
}

/// Upper bounds for `π₂(A)` and `π₂,₁(A) ≤ π₂(A)`.
fn pi_upper(family: &OperatorFamily) -> Upper {
    let mut up = Upper::default();
    let a = &family.members()[0];
    if a.is_zero() {
        up.offer(0.0, UpperSource::formula("zero-family"));
        return up;
    }
    if family.codomain().is_linf() || family.codomain().dim() == 1 {
        up.offer(pietsch_upper(a), UpperSource::formula("pietsch-factorization"));
    }
    up
}

fn pi_search(family: &OperatorFamily, cfg: &SearchConfig, q: f64) -> Result<BoundEstimate> {
    rademacher::single_member(family)?;
    require_linf(family)?;
    let constant = if q == 2.0 { ConstantKind::Pi2 } else { ConstantKind::Pi21 };
    let up = pi_upper(family);
    let a = &family.members()[0];
    let d = family.domain().dim();
    let meta = EstimateMeta { samples: None, seed: cfg.seed, search_budget: cfg.restarts, exhaustive: false };
    let degenerate = |up: Upper| BoundEstimate {
        constant,
        lower: 0.0,
        upper: up.value,
        lower_certificate: Witness::from_parts(vec![0], vec![Vector::basis(d, 0)]),
        upper_source: up.source,
        ci: None,
        meta,
        degenerate: true,
    };
    if a.is_zero() {
        return Ok(degenerate(up));
    }
    let k = family.codomain().dim().max(d).min(MAX_SLOTS);
    let f = StrongNorm { a, codomain: family.codomain(), k };
    let ball = if q == 2.0 { Ball::Mixed(Exponent::Infinity) } else { Ball::WeakL1 };

    let mut seeds = Vec::new();
    let basis: Vec<Vec<f64>> = (0..d.min(k)).map(|j| Vector::basis(d, j).into_inner()).collect();
    seeds.push(pad(&basis, k, d));
    if family.codomain().is_linf() || family.codomain().dim() == 1 {
        let sol = pietsch(a);
        let rows: Vec<Vec<f64>> = pietsch_witness(a, &sol.lambda).into_iter().map(|(_, r)| r).collect();
        seeds.push(pad(&rows, k, d));
    }
    if let Some(x) = rademacher::norming_vector(a, family.domain(), family.codomain()) {
        seeds.push(pad(&[x], k, d));
    }
    let best = power::maximize(&f, ball, seeds, cfg.restarts, cfg.seed, POWER_ITERATIONS, up.value);
    let vectors = nonzero_rows(&best.x, k, d);
    if vectors.is_empty() {
        return Ok(degenerate(up));
    }
    let lower = pi_ratio(family, &vectors, q)?;
    Ok(BoundEstimate {
        constant,
        lower,
        upper: up.value,
        lower_certificate: Witness::from_parts(vec![0; vectors.len()], vectors),
        upper_source: up.source,
        ci: None,
        meta,
        degenerate: false,
    })
}

/// Brackets `π₂(A)` for a single operator on an `ℓ∞` domain.
///
/// The unit ball of the weak `ℓ²` norm there is a product of Euclidean
/// column balls, so the power method climbs between witnesses whose
/// coordinate columns all have norm one.
pub fn pi2_search(family: &OperatorFamily, cfg: &SearchConfig) -> Result<BoundEstimate> {
    unit_scaled(family, |f| pi_search(f, cfg, 2.0))
}

/// Brackets `π₂,₁(A)`; witnesses climb between extreme points of the
/// column-`ℓ¹` ball.
pub fn pi21_search(family: &OperatorFamily, cfg: &SearchConfig) -> Result<BoundEstimate> {
    unit_scaled(family, |f| pi_search(f, cfg, 1.0))
}

fn unit_scaled(family: &OperatorFamily, search: impl Fn(&OperatorFamily) -> Result<BoundEstimate>) -> Result<BoundEstimate> {
    match family.far_scaled() {
        Some((unit, scale)) => search(&unit).map(|e| e.rescaled(scale)),
        None => search(family),
    }
}

/// `(Σ‖A x_n‖²)^{1/2} / (E‖Σ γ_n x_n‖²)^{1/2}` with an exact numerator and
/// a Monte Carlo denominator.
pub fn gaussian_cotype2_ratio(family: &OperatorFamily, w: &Witness, mc: &McConfig) -> Result<RatioEstimate> {
    rademacher::single_member(family)?;
    w.validate(family)?;
    let num: f64 = w
        .images(family)
        .iter()
        .map(|y| {
            let v = family.codomain().norm_of(y);
            v * v
        })
        .sum();
    gaussian::paired_ratio(Numerator::Exact(num.sqrt()), family.domain(), &w.raw_vectors(), mc)
}

struct CotypeSaa<'a> {
    family: &'a OperatorFamily,
    pilot: Pilot,
}

impl Objective for CotypeSaa<'_> {
    fn dim(&self) -> usize {
        self.family.domain().dim()
    }

    fn choices(&self) -> usize {
        1
    }

    fn value(&self, ops: &[usize], xs: &[f64]) -> f64 {
        let k = ops.len();
        if k > self.pilot.width() {
            return 0.0;
        }
        let d = self.dim();
        let a = &self.family.members()[0];
        let mut y = vec![0.0; a.rows()];
        let mut num = 0.0;
        for n in 0..k {
            a.apply_into(&xs[n * d..(n + 1) * d], &mut y);
            let v = self.family.codomain().norm_of(&y);
            num += v * v;
        }
        let den = self.pilot.mean_sq(self.family.domain(), xs, k);
        if den < DEGENERATE_EPS {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

/// Brackets the Gaussian cotype-2 constant `C₂^γ(A)`. The lower end is the
/// exact numerator over the denominator's upper confidence limit.
pub fn gaussian_cotype2_search(family: &OperatorFamily, cfg: &SearchConfig, mc: &McConfig) -> Result<BoundEstimate> {
    rademacher::single_member(family)?;
    if let Some((unit, scale)) = family.far_scaled() {
        return gaussian_cotype2_search(&unit, cfg, mc).map(|e| e.rescaled(scale));
    }
    // C₂^γ ≤ C₂, so every cotype-2 upper applies
    let up = rademacher::cotype2_upper(family);
    if family.is_zero() {
        return Ok(gaussian::mc_estimate(ConstantKind::Cotype2Gamma, family, None, up, cfg, mc));
    }
    let seeds = rademacher::cotype_seeds(family);
    let width = seeds.iter().map(|(ops, _)| ops.len()).max().unwrap_or(1).max(cfg.max_witness_len);
    let obj = CotypeSaa { family, pilot: Pilot::new(width, mc) };
    let opts = search::Options { grid: family.domain().is_linf(), exhaustive: false, stop_at: f64::INFINITY };
    let outcome = search::maximize(&obj, cfg, seeds.clone(), opts);
    let mut candidates: Vec<Witness> = seeds
        .iter()
        .filter_map(|(ops, xs)| {
            gaussian::candidate_witness(family, &search::Candidate { ops: ops.clone(), xs: xs.clone(), value: 0.0 }, &[0])
        })
        .collect();
    candidates.extend(gaussian::candidate_witness(family, &outcome.best, &[0]));
    let best = gaussian::certify_best(family, candidates, |f, w| gaussian_cotype2_ratio(f, w, mc));
    Ok(gaussian::mc_estimate(ConstantKind::Cotype2Gamma, family, best, up, cfg, mc))
}

/// `(¼ (log N)^{1/2}, (2 log 2N)^{1/2})`, the bracket on `C₂(A)/C₂^γ(A)`.
pub fn cotype_ratio_bracket(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::domain(format!("the bracket needs N >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok((0.25 * nf.ln().sqrt(), (2.0 * (2.0 * nf).ln()).sqrt()))
}
