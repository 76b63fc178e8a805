//! Exact Rademacher averages and R-bound / cotype-2 searches.
//!
//! Moments are computed by enumerating every sign pattern. The first sign is
//! fixed to `+1` (norms are even), the remaining `k − 1` signs are split into
//! blocks whose sums are rebuilt from scratch and then walked in Gray-code
//! order, so each step costs one vector update and rounding cannot drift
//! across blocks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{operator_norm, Matrix, OperatorFamily};
use crate::search::{self, Objective, SearchConfig};
use crate::space::{Exponent, SeqSpace, Vector};
use crate::summing;
use crate::upper::{self, Upper};
use crate::witness::{BoundEstimate, ConstantKind, EstimateMeta, UpperSource, Witness};

/// Largest number of terms whose sign patterns are enumerated.
pub const ENUMERATION_CAP: usize = 24;

/// Ratios whose denominator falls below this are treated as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-14;

const BLOCK_BITS: usize = 10;
const PARALLEL_WORK: usize = 1 << 16;

/// A choice of signs `(ε_1, …, ε_k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignPattern {
    bits: Vec<i8>,
}

impl SignPattern {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::shape("sign pattern must have at least one sign"));
        }
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::domain("signs must be +1 or -1"));
        }
        Ok(SignPattern { bits })
    }

    /// Pattern number `index` of length `k`: bit `j` set means `ε_j = −1`.
    pub fn from_index(k: usize, index: u64) -> Result<Self> {
        Self::new((0..k).map(|j| if index >> j & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// `Σ ε_n v_n`.
    pub fn combine(&self, vs: &[Vector]) -> Result<Vector> {
        if vs.len() != self.bits.len() || vs.is_empty() {
            return Err(Error::shape("sign pattern and vector list differ in length"));
        }
        let d = vs[0].len();
        let mut out = vec![0.0; d];
        for (v, &e) in vs.iter().zip(&self.bits) {
            if v.len() != d {
                return Err(Error::shape("vectors have different lengths"));
            }
            for (o, c) in out.iter_mut().zip(v.coords()) {
                *o += f64::from(e) * c;
            }
        }
        Vector::new(out)
    }
}

#[inline]
pub(crate) fn pow_q(x: f64, q: f64) -> f64 {
    if q == 2.0 {
        x * x
    } else if q == 1.0 {
        x
    } else {
        x.powf(q)
    }
}

/// `Σ_{ε, ε_0 = +1} ‖Σ_n ε_n v_n‖^q` for `k` vectors stored row-wise in `flat`.
fn block_power_sum(space: &SeqSpace, flat: &[f64], k: usize, q: f64, block: usize, low_bits: usize) -> f64 {
    let d = space.dim();
    let v = |n: usize| &flat[n * d..(n + 1) * d];
    let mut s = v(0).to_vec();
    // free sign j multiplies vector j + 1
    let mut signs = vec![1.0; k - 1];
    for (j, sign) in signs.iter_mut().enumerate().skip(low_bits) {
        if block >> (j - low_bits) & 1 == 1 {
            *sign = -1.0;
        }
    }
    for (j, &sign) in signs.iter().enumerate() {
        for (a, b) in s.iter_mut().zip(v(j + 1)) {
            *a += sign * b;
        }
    }
    let mut total = pow_q(space.norm_of(&s), q);
    for t in 1usize..(1 << low_bits) {
        let j = t.trailing_zeros() as usize;
        signs[j] = -signs[j];
        let step = 2.0 * signs[j];
        for (a, b) in s.iter_mut().zip(v(j + 1)) {
            *a += step * b;
        }
        total += pow_q(space.norm_of(&s), q);
    }
    total
}

pub(crate) fn moment_flat(space: &SeqSpace, flat: &[f64], k: usize, q: f64) -> f64 {
    debug_assert!((1..=ENUMERATION_CAP).contains(&k));
    let free = k - 1;
    let low_bits = free.min(BLOCK_BITS);
    let blocks = 1usize << (free - low_bits);
    let work = (1usize << free) * space.dim();
    let total: f64 = if work >= PARALLEL_WORK && blocks > 1 {
        let parts: Vec<f64> = (0..blocks)
            .into_par_iter()
            .map(|b| block_power_sum(space, flat, k, q, b, low_bits))
            .collect();
        parts.iter().sum()
    } else {
        (0..blocks).map(|b| block_power_sum(space, flat, k, q, b, low_bits)).sum()
    };
    let mean = total / (1u64 << free) as f64;
    if q == 2.0 {
        mean.sqrt()
    } else if q == 1.0 {
        mean
    } else {
        mean.powf(1.0 / q)
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::domain(format!("moment exponent must be a finite q >= 1, got {q}")));
    }
    Ok(())
}

pub(crate) fn check_cap(k: usize) -> Result<()> {
    if k > ENUMERATION_CAP {
        return Err(Error::Budget { k, cap: ENUMERATION_CAP });
    }
    Ok(())
}

/// `(E‖Σ r_n v_n‖^q)^{1/q}`, computed exactly over all `2^k` sign patterns.
pub fn rademacher_moment(space: &SeqSpace, vs: &[Vector], q: f64) -> Result<f64> {
    check_q(q)?;
    if vs.is_empty() {
        return Err(Error::domain("Rademacher moment of an empty list"));
    }
    check_cap(vs.len())?;
    let mut flat = Vec::with_capacity(vs.len() * space.dim());
    for v in vs {
        space.check(v.coords())?;
        flat.extend_from_slice(v.coords());
    }
    Ok(moment_flat(space, &flat, vs.len(), q))
}

/// `(E‖Σ r_n y_n‖²)^{1/2}`, using orthogonality when the space is one-dimensional.
fn second_moment_flat(space: &SeqSpace, flat: &[f64], k: usize) -> f64 {
    if space.dim() == 1 {
        flat.iter().map(|y| y * y).sum::<f64>().sqrt()
    } else {
        moment_flat(space, flat, k, 2.0)
    }
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den < DEGENERATE_EPS {
        0.0
    } else {
        num / den
    }
}

fn degenerate_error(den: f64) -> Error {
    Error::Degenerate(format!("witness denominator {den:e} is below {DEGENERATE_EPS:e}"))
}

/// Witness ratio for the R-bound: `(E‖Σ r_n T_n x_n‖²)^{1/2} / (E‖Σ r_n x_n‖²)^{1/2}`.
pub fn r_ratio(family: &OperatorFamily, w: &Witness) -> Result<f64> {
    w.validate(family)?;
    check_cap(w.len())?;
    let flat_y: Vec<f64> = w.images(family).concat();
    let flat_x: Vec<f64> = w.raw_vectors().concat();
    let num = second_moment_flat(family.codomain(), &flat_y, w.len());
    let den = moment_flat(family.domain(), &flat_x, w.len(), 2.0);
    if den < DEGENERATE_EPS {
        return Err(degenerate_error(den));
    }
    Ok(num / den)
}

/// Cotype-2 witness ratio `(Σ‖A x_n‖²)^{1/2} / (E‖Σ r_n x_n‖²)^{1/2}`.
pub fn cotype2_ratio(family: &OperatorFamily, w: &Witness) -> Result<f64> {
    single_member(family)?;
    w.validate(family)?;
    check_cap(w.len())?;
    let a = &family.members()[0];
    let num = w
        .vectors()
        .iter()
        .map(|x| {
            let n = family.codomain().norm_of(&a.apply_raw(x.coords()));
            n * n
        })
        .sum::<f64>()
        .sqrt();
    let flat_x: Vec<f64> = w.raw_vectors().concat();
    let den = moment_flat(family.domain(), &flat_x, w.len(), 2.0);
    if den < DEGENERATE_EPS {
        return Err(degenerate_error(den));
    }
    Ok(num / den)
}

pub(crate) fn single_member(family: &OperatorFamily) -> Result<()> {
    if family.len() != 1 {
        return Err(Error::contract(format!(
            "expected a single operator, got a family of {} members",
            family.len()
        )));
    }
    Ok(())
}

/// `R(x ↦ a_n x_n) = ‖a‖₂` on `c₀`.
pub fn diag_c0_rbound(a: &Vector) -> f64 {
    crate::space::lp_norm(Exponent::Finite(2.0), a.coords())
}

struct RObjective<'a> {
    family: &'a OperatorFamily,
    choices: Vec<usize>,
}

impl Objective for RObjective<'_> {
    fn dim(&self) -> usize {
        self.family.domain().dim()
    }

    fn choices(&self) -> usize {
        self.choices.len()
    }

    fn value(&self, ops: &[usize], xs: &[f64]) -> f64 {
        let d = self.dim();
        let c = self.family.codomain().dim();
        let k = ops.len();
        let mut ys = vec![0.0; k * c];
        for (n, &o) in ops.iter().enumerate() {
            self.family.members()[self.choices[o]].apply_into(&xs[n * d..(n + 1) * d], &mut ys[n * c..(n + 1) * c]);
        }
        let num = second_moment_flat(self.family.codomain(), &ys, k);
        let den = moment_flat(self.family.domain(), xs, k, 2.0);
        ratio_or_zero(num, den)
    }
}

struct CotypeObjective<'a> {
    family: &'a OperatorFamily,
}

impl Objective for CotypeObjective<'_> {
    fn dim(&self) -> usize {
        self.family.domain().dim()
    }

    fn choices(&self) -> usize {
        1
    }

    fn value(&self, ops: &[usize], xs: &[f64]) -> f64 {
        let d = self.dim();
        let a = &self.family.members()[0];
        let mut y = vec![0.0; a.rows()];
        let mut num = 0.0;
        for n in 0..ops.len() {
            a.apply_into(&xs[n * d..(n + 1) * d], &mut y);
            let v = self.family.codomain().norm_of(&y);
            num += v * v;
        }
        let den = moment_flat(self.family.domain(), xs, ops.len(), 2.0);
        ratio_or_zero(num.sqrt(), den)
    }
}

/// Basis vector `e_j` maximizing `‖T e_j‖`.
pub(crate) fn best_basis_vector(m: &Matrix, codomain: &SeqSpace) -> usize {
    let t = m.transpose();
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..t.rows() {
        let v = codomain.norm_of(t.row(j));
        if v > best.1 {
            best = (j, v);
        }
    }
    best.0
}

/// Canonical witnesses: one norming basis vector per distinct member, and
/// each member's norming vector on its own.
pub(crate) fn canonical_seeds(family: &OperatorFamily, choices: &[usize], cap: usize) -> Vec<(Vec<usize>, Vec<f64>)> {
    let d = family.domain().dim();
    let mut seeds = Vec::new();
    if choices.len() <= cap {
        let mut xs = vec![0.0; choices.len() * d];
        for (slot, &m) in choices.iter().enumerate() {
            let j = best_basis_vector(&family.members()[m], family.codomain());
            xs[slot * d + j] = 1.0;
        }
        seeds.push(((0..choices.len()).collect(), xs));
    }
    for (slot, &m) in choices.iter().enumerate() {
        if let Some(x) = norming_vector(&family.members()[m], family.domain(), family.codomain()) {
            seeds.push((vec![slot], x));
        }
    }
    seeds
}

/// A unit vector `x` with `‖M x‖ = ‖M‖` when one is cheap to produce.
pub(crate) fn norming_vector(m: &Matrix, domain: &SeqSpace, codomain: &SeqSpace) -> Option<Vec<f64>> {
    use crate::space::{lp_norm, Exponent};
    let d = domain.dim();
    if m.is_zero() {
        return None;
    }
    if codomain.is_linf() || codomain.dim() == 1 {
        let dual = domain.dual().p();
        let r = (0..m.rows())
            .map(|r| (r, lp_norm(dual, m.row(r))))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
            .0;
        let row = m.row(r);
        let x: Vec<f64> = match domain.p() {
            Exponent::Infinity => row.iter().map(|&t| if t < 0.0 { -1.0 } else { 1.0 }).collect(),
            Exponent::Finite(1.0) => {
                let j = (0..d).fold(0, |b, j| if row[j].abs() > row[b].abs() { j } else { b });
                let mut x = vec![0.0; d];
                x[j] = row[j].signum();
                x
            }
            Exponent::Finite(p) => {
                let pd = p / (p - 1.0);
                let x: Vec<f64> = row.iter().map(|&t| t.signum() * t.abs().powf(pd - 1.0)).collect();
                let n = lp_norm(domain.p(), &x);
                x.iter().map(|c| c / n).collect()
            }
        };
        return Some(x);
    }
    if domain.p() == Exponent::Finite(1.0) || d == 1 {
        let mut x = vec![0.0; d];
        x[best_basis_vector(m, codomain)] = 1.0;
        return Some(x);
    }
    if domain.is_linf() && d <= crate::family::OPERATOR_NORM_SIGN_CAP {
        let mut best = (0u64, f64::NEG_INFINITY);
        let mut x = vec![1.0; d];
        let mut y = vec![0.0; m.rows()];
        for bits in 0..(1u64 << (d - 1)) {
            for (i, xi) in x.iter_mut().enumerate().skip(1) {
                *xi = if bits >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
            }
            m.apply_into(&x, &mut y);
            let v = codomain.norm_of(&y);
            if v > best.1 {
                best = (bits, v);
            }
        }
        for (i, xi) in x.iter_mut().enumerate().skip(1) {
            *xi = if best.0 >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
        }
        return Some(x);
    }
    None
}

/// Upper bounds for `R(𝒯)`.
pub(crate) fn r_upper(family: &OperatorFamily) -> Upper {
    let mut up = Upper::default();
    if family.is_zero() {
        up.offer(0.0, UpperSource::formula("zero-family"));
        return up;
    }
    if let Some(a) = family.diagonal_coefficients() {
        up.offer(diag_c0_rbound(&Vector::from_raw(a)), UpperSource::formula("diag-c0"));
    }
    let distinct = family.distinct_indices();
    if distinct.len() == 1 {
        // R({T}) = ‖T‖
        let m = &family.members()[distinct[0]];
        if let Some(n) = operator_norm(m, family.domain(), family.codomain()) {
            up.offer(n, upper::norm_source(family.domain(), family.codomain()));
        }
    }
    if family.domain().is_linf() && family.is_functional() {
        // R(𝒯) = C₂(A) ≤ π₂(A)
        if let Ok(stacked) = family.stacked() {
            up.offer(summing::pietsch_upper(&stacked.members()[0]), UpperSource::formula("pietsch-factorization"));
        }
    }
    up
}

/// Upper bounds for the cotype-2 constant of a single operator.
pub(crate) fn cotype2_upper(family: &OperatorFamily) -> Upper {
    let mut up = Upper::default();
    let a = &family.members()[0];
    if a.is_zero() {
        up.offer(0.0, UpperSource::formula("zero-family"));
        return up;
    }
    if family.codomain().dim() == 1 {
        // Σ|t·x_n|² = E|t·Σ r_n x_n|² ≤ ‖t‖² E‖Σ r_n x_n‖²
        if let Some(n) = operator_norm(a, family.domain(), family.codomain()) {
            up.offer(n, UpperSource::formula("functional-norm"));
        }
    }
    if family.domain().is_linf() && family.codomain().is_linf() {
        up.offer(summing::pietsch_upper(a), UpperSource::formula("pietsch-factorization"));
    }
    up
}

pub(crate) fn finish_estimate(
    constant: ConstantKind,
    family: &OperatorFamily,
    outcome: search::Outcome,
    choices: &[usize],
    up: Upper,
    cfg: &SearchConfig,
) -> BoundEstimate {
    let d = family.domain().dim();
    let best = outcome.best;
    let (degenerate, certificate) = if best.value > 0.0 {
        let mut ops = Vec::new();
        let mut vectors = Vec::new();
        for (slot, &o) in best.ops.iter().enumerate() {
            let x = &best.xs[slot * d..(slot + 1) * d];
            if x.iter().any(|&c| c != 0.0) {
                ops.push(choices[o]);
                vectors.push(Vector::from_raw(x.to_vec()));
            }
        }
        (false, Witness::from_parts(ops, vectors))
    } else {
        (true, Witness::from_parts(vec![0], vec![Vector::basis(d, 0)]))
    };
    BoundEstimate {
        constant,
        lower: if degenerate { 0.0 } else { best.value },
        upper: up.value,
        lower_certificate: certificate,
        upper_source: up.source,
        ci: None,
        meta: EstimateMeta { samples: None, seed: cfg.seed, search_budget: cfg.restarts, exhaustive: outcome.exhaustive },
        degenerate,
    }
}

/// Brackets `R(𝒯)`: canonical witnesses, the exhaustive grid on `ℓ∞`
/// domains, then seeded restarts with coordinate ascent.
pub fn r_bound_search(family: &OperatorFamily, cfg: &SearchConfig) -> BoundEstimate {
    if let Some((unit, scale)) = family.far_scaled() {
        return r_bound_search(&unit, cfg).rescaled(scale);
    }
    let choices = family.distinct_indices();
    let up = r_upper(family);
    let obj = RObjective { family, choices: choices.clone() };
    let seeds = canonical_seeds(family, &choices, ENUMERATION_CAP);
    let opts = search::Options { grid: family.domain().is_linf(), exhaustive: true, stop_at: up.value };
    let outcome = search::maximize(&obj, cfg, seeds, opts);
    finish_estimate(ConstantKind::R, family, outcome, &choices, up, cfg)
}

/// Brackets the Rademacher cotype-2 constant `C₂(A)` of a single operator.
pub fn cotype2_search(family: &OperatorFamily, cfg: &SearchConfig) -> Result<BoundEstimate> {
    single_member(family)?;
    if let Some((unit, scale)) = family.far_scaled() {
        return cotype2_search(&unit, cfg).map(|e| e.rescaled(scale));
    }
    let up = cotype2_upper(family);
    let obj = CotypeObjective { family };
    let seeds = cotype_seeds(family);
    let opts = search::Options { grid: family.domain().is_linf(), exhaustive: true, stop_at: up.value };
    let outcome = search::maximize(&obj, cfg, seeds, opts);
    Ok(finish_estimate(ConstantKind::Cotype2, family, outcome, &[0], up, cfg))
}

/// Basis witness `e_1, …, e_d` and the norming vector of a single operator.
pub(crate) fn cotype_seeds(family: &OperatorFamily) -> Vec<(Vec<usize>, Vec<f64>)> {
    let d = family.domain().dim();
    let a = &family.members()[0];
    let mut seeds = Vec::new();
    if d <= ENUMERATION_CAP {
        let mut xs = vec![0.0; d * d];
        for j in 0..d {
            xs[j * d + j] = 1.0;
        }
        seeds.push((vec![0; d], xs));
    }
    if let Some(x) = norming_vector(a, family.domain(), family.codomain()) {
        seeds.push((vec![0], x));
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    /// Independent oracle: loop over all 2^k patterns, no symmetry, no Gray code.
    fn naive_moment(space: &SeqSpace, vs: &[Vector], q: f64) -> f64 {
        let k = vs.len();
        let mut total = 0.0;
        for idx in 0..(1u64 << k) {
            let s = SignPattern::from_index(k, idx).unwrap().combine(vs).unwrap();
            total += crate::space::norm(space, &s).unwrap().powf(q);
        }
        (total / (1u64 << k) as f64).powf(1.0 / q)
    }

    #[test]
    fn moment_examples() {
        let s = SeqSpace::linf(2).unwrap();
        assert_eq!(rademacher_moment(&s, &[v(&[5.0, 0.0])], 2.0).unwrap(), 5.0);
        assert_eq!(rademacher_moment(&s, &[v(&[1.0, 0.0]), v(&[0.0, 1.0])], 2.0).unwrap(), 1.0);
        // patterns give norms 3, 1, 1, 3: mean of squares 5
        let m = rademacher_moment(&s, &[v(&[2.0, 1.0]), v(&[1.0, 2.0])], 2.0).unwrap();
        assert_relative_eq!(m, 5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn moment_errors() {
        let s = SeqSpace::linf(1).unwrap();
        let many = vec![v(&[1.0]); ENUMERATION_CAP + 1];
        assert_eq!(
            rademacher_moment(&s, &many, 2.0),
            Err(Error::Budget { k: ENUMERATION_CAP + 1, cap: ENUMERATION_CAP })
        );
        assert!(matches!(rademacher_moment(&s, &[], 2.0), Err(Error::Domain(_))));
        assert!(matches!(rademacher_moment(&s, &[v(&[1.0])], 0.5), Err(Error::Domain(_))));
        assert!(matches!(rademacher_moment(&s, &[v(&[1.0, 2.0])], 2.0), Err(Error::Shape(_))));
    }

    #[test]
    fn moment_at_the_cap_matches_closed_form() {
        // In ℓ² the second moment is (Σ‖v_n‖²)^{1/2} by orthogonality.
        let s = SeqSpace::lp(3, 2.0).unwrap();
        let vs: Vec<Vector> = (0..ENUMERATION_CAP)
            .map(|i| v(&[(i as f64).sin(), (i as f64 * 0.7).cos(), 0.1 * i as f64]))
            .collect();
        let expect = vs.iter().map(|x| x.coords().iter().map(|c| c * c).sum::<f64>()).sum::<f64>().sqrt();
        assert_relative_eq!(rademacher_moment(&s, &vs, 2.0).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn sign_pattern_validation() {
        assert!(SignPattern::new(vec![]).is_err());
        assert!(SignPattern::new(vec![1, 0]).is_err());
        assert_eq!(SignPattern::from_index(3, 0b101).unwrap().bits(), &[-1, 1, -1]);
    }

    #[test]
    fn r_ratio_examples() {
        let s2 = SeqSpace::linf(2).unwrap();
        let id = OperatorFamily::singleton(s2, s2, Matrix::identity(2)).unwrap();
        let w = Witness::new(&id, vec![0], vec![v(&[0.3, -2.0])]).unwrap();
        assert_eq!(r_ratio(&id, &w).unwrap(), 1.0);

        let diag = OperatorFamily::diagonal_c0(&[1.0, 1.0]).unwrap();
        let w = Witness::new(&diag, vec![0, 1], vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        assert_relative_eq!(r_ratio(&diag, &w).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(r_ratio(&diag.scaled(-3.0), &w).unwrap(), 3.0 * 2f64.sqrt(), max_relative = 1e-15);

        let zero = Witness::from_parts(vec![0], vec![v(&[0.0, 0.0])]);
        assert!(matches!(r_ratio(&id, &zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn diag_formula() {
        assert_eq!(diag_c0_rbound(&v(&[3.0, 4.0])), 5.0);
        assert_eq!(diag_c0_rbound(&v(&[1.0])), 1.0);
        assert_eq!(diag_c0_rbound(&v(&[1.0, 1.0, 1.0, 1.0])), 2.0);
    }

    #[test]
    fn r_search_examples() {
        let cfg = SearchConfig::default();
        let diag = OperatorFamily::diagonal_c0(&[3.0, 4.0]).unwrap();
        let est = r_bound_search(&diag, &cfg);
        assert_eq!(est.upper, 5.0);
        assert!((est.lower - 5.0).abs() < 1e-6);
        assert_eq!(est.upper_source, UpperSource::formula("diag-c0"));
        assert_relative_eq!(est.reevaluate(&diag).unwrap(), est.lower, max_relative = 1e-9);

        let s2 = SeqSpace::linf(2).unwrap();
        let zero = OperatorFamily::singleton(s2, s2, Matrix::zeros(2, 2)).unwrap();
        let est = r_bound_search(&zero, &cfg);
        assert_eq!((est.lower, est.upper), (0.0, 0.0));
        assert!(est.degenerate);

        for n in 1..=6 {
            let coords = OperatorFamily::coordinate_functionals(n).unwrap();
            let est = r_bound_search(&coords, &cfg);
            assert_relative_eq!(est.lower, (n as f64).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn cotype_examples() {
        let cfg = SearchConfig::default();
        for n in 1..=5 {
            let a = OperatorFamily::coordinate_functionals(n).unwrap().stacked().unwrap();
            let est = cotype2_search(&a, &cfg).unwrap();
            assert_relative_eq!(est.lower, (n as f64).sqrt(), max_relative = 1e-12);
            assert!(est.is_consistent());
        }
        let s2 = SeqSpace::linf(2).unwrap();
        let zero = OperatorFamily::singleton(s2, s2, Matrix::zeros(2, 2)).unwrap();
        assert_eq!(cotype2_search(&zero, &cfg).unwrap().lower, 0.0);
        let one = OperatorFamily::singleton(SeqSpace::scalars(), SeqSpace::scalars(), Matrix::identity(1)).unwrap();
        let est = cotype2_search(&one, &cfg).unwrap();
        assert_eq!((est.lower, est.upper), (1.0, 1.0));
        let two = OperatorFamily::coordinate_functionals(2).unwrap();
        assert!(matches!(cotype2_search(&two, &cfg), Err(Error::Contract(_))));
    }

    fn vectors(max_k: usize, dim: usize) -> impl Strategy<Value = Vec<Vector>> {
        prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), 1..=max_k)
            .prop_map(|vs| vs.into_iter().map(|c| Vector::new(c).unwrap()).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn agrees_with_naive_enumeration(
            vs in vectors(12, 3),
            pi in 0usize..4,
            q in prop::sample::select(vec![1.0, 2.0, 3.5]),
        ) {
            let p = [crate::space::Exponent::Infinity, crate::space::Exponent::Finite(1.0),
                     crate::space::Exponent::Finite(2.0), crate::space::Exponent::Finite(3.0)][pi];
            let s = SeqSpace::new(3, p).unwrap();
            let fast = rademacher_moment(&s, &vs, q).unwrap();
            let slow = naive_moment(&s, &vs, q);
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1e-300), "{} vs {}", fast, slow);
        }

        #[test]
        fn ratio_is_scale_invariant(
            coeffs in prop::collection::vec(-2.0..2.0f64, 3),
            vs in vectors(4, 3),
            lambda in prop::sample::select(vec![-7.5, -0.01, 0.5, 3.0, 1e3]),
        ) {
            let f = OperatorFamily::diagonal_c0(&coeffs).unwrap();
            let ops: Vec<usize> = (0..vs.len()).map(|i| i % 3).collect();
            let Ok(w) = Witness::new(&f, ops, vs) else { return Ok(()) };
            let Ok(r) = r_ratio(&f, &w) else { return Ok(()) };
            let rs = r_ratio(&f, &w.scaled(lambda)).unwrap();
            prop_assert!((r - rs).abs() <= 1e-12 * r.max(1.0));
        }

        #[test]
        fn diagonal_witnesses_never_exceed_the_formula(
            coeffs in prop::collection::vec(-2.0..2.0f64, 1..5),
            raw in prop::collection::vec((0usize..8, prop::collection::vec(-1.0..1.0f64, 4)), 1..6),
        ) {
            let f = OperatorFamily::diagonal_c0(&coeffs).unwrap();
            let n = coeffs.len();
            let ops: Vec<usize> = raw.iter().map(|(i, _)| i % n).collect();
            let vs: Vec<Vector> = raw.iter().map(|(_, x)| Vector::new(x[..n].to_vec()).unwrap()).collect();
            let Ok(w) = Witness::new(&f, ops, vs) else { return Ok(()) };
            let Ok(r) = r_ratio(&f, &w) else { return Ok(()) };
            prop_assert!(r <= diag_c0_rbound(&Vector::new(coeffs).unwrap()) + 1e-9);
        }
    }
}
