//! The square-function (ℓ²) bound: witness ratios, search, the Grothendieck
//! factor and the transpose self-duality check.
//!
//! Witnesses are searched with the power method. The denominator
//! `‖(Σ|x_n|²)^{1/2}‖_p` only sees the Euclidean norms of the coordinate
//! columns `(x_{n,m})_n`, so its unit ball is the set of witnesses whose
//! column norms lie in the unit ball of `ℓᵖ`. On `ℓ∞` domains that is a
//! product of Euclidean balls, and each climb step just renormalizes every
//! column of the numerator's gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{adjoint_family, compose, operator_norm, Matrix, OperatorFamily};
use crate::power::{self, norm_gradient, Ball, Convex};
use crate::rademacher::{self, DEGENERATE_EPS};
use crate::search::SearchConfig;
use crate::space::{square_function_norm_raw, Exponent, Vector};
use crate::summing::{pietsch, pietsch_witness};
use crate::upper::Upper;
use crate::witness::{BoundEstimate, ConstantKind, EstimateMeta, UpperSource, Witness};

/// A valid upper bound for the real Grothendieck constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrothendieckConstant {
    upper_bound: f64,
}

impl GrothendieckConstant {
    pub const UPPER_BOUND: f64 = 1.78222;

    pub fn new() -> Self {
        GrothendieckConstant { upper_bound: Self::UPPER_BOUND }
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }
}

impl Default for GrothendieckConstant {
    fn default() -> Self {
        Self::new()
    }
}

pub const K_G: f64 = GrothendieckConstant::UPPER_BOUND;

const POWER_ITERATIONS: usize = 200;
/// Cap on the slots of the unrestricted search.
const MAX_SLOTS: usize = 256;
/// Largest dimension and member count treated as tiny in the duality check.
const TINY: usize = 4;
const TINY_AGREEMENT: f64 = 0.10;

/// `‖(Σ|T_n x_n|²)^{1/2}‖ / ‖(Σ|x_n|²)^{1/2}‖`.
pub fn ell2_ratio(family: &OperatorFamily, w: &Witness) -> Result<f64> {
    w.validate(family)?;
    let ys = w.images(family);
    let num = square_function_norm_raw(family.codomain(), ys.iter().map(Vec::as_slice));
    let den = square_function_norm_raw(family.domain(), w.raw_vectors().into_iter());
    if den < DEGENERATE_EPS {
        return Err(Error::Degenerate(format!("witness square function {den:e} vanishes")));
    }
    Ok(num / den)
}

/// `x ↦ ‖(Σ_n |T_{o_n} x_n|²)^{1/2}‖` for a fixed assignment of members
/// `o_n` to slots.
struct SquareFunction<'a> {
    family: &'a OperatorFamily,
    ops: Vec<usize>,
}

impl Convex for SquareFunction<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.ops.len(), self.family.domain().dim())
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (k, d) = self.shape();
        let c = self.family.codomain().dim();
        let mut ys = vec![0.0; k * c];
        let mut s = vec![0.0; c];
        for (n, &o) in self.ops.iter().enumerate() {
            let y = &mut ys[n * c..(n + 1) * c];
            self.family.members()[o].apply_into(&x[n * d..(n + 1) * d], y);
            for (a, b) in s.iter_mut().zip(y.iter()) {
                *a += b * b;
            }
        }
        s.iter_mut().for_each(|v| *v = v.sqrt());
        let value = self.family.codomain().norm_of(&s);
        if let Some(g) = grad {
            g.iter_mut().for_each(|o| *o = 0.0);
            if value > 0.0 {
                let mut gs = vec![0.0; c];
                norm_gradient(self.family.codomain().p(), &s, value, &mut gs);
                let mut gy = vec![0.0; c];
                for (n, &o) in self.ops.iter().enumerate() {
                    for j in 0..c {
                        gy[j] = if s[j] > 0.0 { gs[j] * ys[n * c + j] / s[j] } else { 0.0 };
                    }
                    self.family.members()[o].apply_transpose_into(&gy, &mut g[n * d..(n + 1) * d]);
                }
            }
        }
        value
    }
}

/// Search result with the distinct-operator lower bound kept separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ell2Search {
    pub estimate: BoundEstimate,
    /// Best ratio over witnesses using each distinct member at most once.
    pub distinct_lower: f64,
    pub distinct_certificate: Option<Witness>,
}

fn row_matrix(family: &OperatorFamily, choices: &[usize], r: usize) -> Matrix {
    let d = family.domain().dim();
    let mut rows = Vec::with_capacity(choices.len());
    for &i in choices {
        rows.push((0..d).map(|j| family.members()[i].get(r, j)).collect());
    }
    Matrix::from_rows(&rows).expect("rows share the domain dimension")
}

/// For an `ℓ∞` domain and an `ℓ∞` (or scalar) codomain the square function
/// is `max_r (Σ_n ⟨t_{n,r}, x_n⟩²)^{1/2}`, so `R²(𝒯)` is the largest
/// Pietsch value of the row matrices `A_r = (t_{n,r})_n`.
/// Value, maximizing row, and Pietsch witness rows of that row matrix.
type RowPietsch = (f64, usize, Vec<(usize, Vec<f64>)>);

fn row_pietsch(family: &OperatorFamily, choices: &[usize]) -> Option<RowPietsch> {
    let cod = family.codomain();
    if !family.domain().is_linf() || !(cod.is_linf() || cod.dim() == 1) {
        return None;
    }
    let mut best: Option<RowPietsch> = None;
    for r in 0..cod.dim() {
        let a = row_matrix(family, choices, r);
        let sol = pietsch(&a);
        if best.as_ref().is_none_or(|b| sol.upper > b.0) {
            let rows = pietsch_witness(&a, &sol.lambda).into_iter().map(|(n, x)| (choices[n], x)).collect();
            best = Some((sol.upper, r, rows));
        }
    }
    best
}

fn direct_upper(family: &OperatorFamily) -> Upper {
    let mut up = Upper::default();
    if family.is_zero() {
        up.offer(0.0, UpperSource::formula("zero-family"));
        return up;
    }
    let choices = family.distinct_indices();
    if choices.len() == 1 {
        if let Some(n) = operator_norm(&family.members()[choices[0]], family.domain(), family.codomain()) {
            up.offer(K_G * n, UpperSource::formula("grothendieck-singleton"));
        }
        return up;
    }
    if let Some((v, _, _)) = row_pietsch(family, &choices) {
        let name = if family.is_functional() { "pietsch-factorization" } else { "row-pietsch" };
        up.offer(v, UpperSource::formula(name));
    }
    let cod = family.codomain();
    let two_convex = match cod.p() {
        Exponent::Infinity => true,
        Exponent::Finite(p) => p >= 2.0,
    };
    if family.domain().dim() == 1 && two_convex {
        // ‖(Σ a_n² u_n²)^{1/2}‖_p ≤ (Σ a_n² ‖u_n‖_p²)^{1/2} for p ≥ 2
        let v = family.members().iter().map(|m| cod.norm_of(&m.apply_raw(&[1.0]))).fold(0.0, f64::max);
        up.offer(v, UpperSource::formula("two-convex"));
    }
    up
}

/// Upper bounds for `R²(𝒯)`, including those of the adjoint family.
pub(crate) fn ell2_upper(family: &OperatorFamily) -> Upper {
    let mut up = direct_upper(family);
    let dual = direct_upper(&adjoint_family(family));
    if let UpperSource::AnalyticFormula(name) = &dual.source {
        up.offer(dual.value, UpperSource::formula(&format!("duality:{name}")));
    }
    up
}

fn seeds_for(family: &OperatorFamily, ops: &[usize], pietsch_rows: &[(usize, Vec<f64>)]) -> Vec<Vec<f64>> {
    let d = family.domain().dim();
    let k = ops.len();
    let mut seeds = Vec::new();
    // basis vectors, cycling within each member's slots
    let mut basis = vec![0.0; k * d];
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for (slot, &o) in ops.iter().enumerate() {
        let rank = seen.iter().filter(|(m, _)| *m == o).count();
        let j = if rank == 0 { rademacher::best_basis_vector(&family.members()[o], family.codomain()) } else { rank % d };
        seen.push((o, j));
        basis[slot * d + j] = 1.0;
    }
    seeds.push(basis);
    if !pietsch_rows.is_empty() {
        let mut x = vec![0.0; k * d];
        let mut used = vec![false; k];
        for (member, row) in pietsch_rows {
            if let Some(slot) = (0..k).find(|&s| !used[s] && ops[s] == *member) {
                used[slot] = true;
                x[slot * d..(slot + 1) * d].copy_from_slice(row);
            }
        }
        seeds.push(x);
    }
    let mut firsts: Vec<usize> = Vec::new();
    for (slot, &o) in ops.iter().enumerate() {
        if firsts.iter().any(|&s| ops[s] == o) {
            continue;
        }
        firsts.push(slot);
        if let Some(v) = rademacher::norming_vector(&family.members()[o], family.domain(), family.codomain()) {
            let mut x = vec![0.0; k * d];
            x[slot * d..(slot + 1) * d].copy_from_slice(&v);
            seeds.push(x);
        }
    }
    seeds
}

fn run(family: &OperatorFamily, ops: Vec<usize>, cfg: &SearchConfig, stop_at: f64, pietsch_rows: &[(usize, Vec<f64>)]) -> (f64, Option<Witness>) {
    let d = family.domain().dim();
    let seeds = seeds_for(family, &ops, pietsch_rows);
    let f = SquareFunction { family, ops };
    let ball = Ball::Mixed(family.domain().p());
    let best = power::maximize(&f, ball, seeds, cfg.restarts, cfg.seed, POWER_ITERATIONS, stop_at);
    let mut op_indices = Vec::new();
    let mut vectors = Vec::new();
    for (slot, &o) in f.ops.iter().enumerate() {
        let x = &best.x[slot * d..(slot + 1) * d];
        if x.iter().any(|&v| v != 0.0) {
            op_indices.push(o);
            vectors.push(Vector::from_raw(x.to_vec()));
        }
    }
    if vectors.is_empty() {
        return (0.0, None);
    }
    let w = Witness::from_parts(op_indices, vectors);
    match ell2_ratio(family, &w) {
        Ok(v) => (v, Some(w)),
        Err(_) => (0.0, None),
    }
}

/// Brackets `R²(𝒯)` and reports the distinct-member lower bound alongside.
pub fn ell2_search(family: &OperatorFamily, cfg: &SearchConfig) -> Ell2Search {
    if let Some((unit, scale)) = family.far_scaled() {
        let s = ell2_search(&unit, cfg);
        return Ell2Search { estimate: s.estimate.rescaled(scale), distinct_lower: s.distinct_lower * scale, ..s };
    }
    let up = ell2_upper(family);
    let d = family.domain().dim();
    let choices = family.distinct_indices();
    let meta = EstimateMeta { samples: None, seed: cfg.seed, search_budget: cfg.restarts, exhaustive: false };
    let blank = Witness::from_parts(vec![0], vec![Vector::basis(d, 0)]);
    if family.is_zero() {
        let estimate = BoundEstimate {
            constant: ConstantKind::Ell2,
            lower: 0.0,
            upper: up.value,
            lower_certificate: blank,
            upper_source: up.source,
            ci: None,
            meta,
            degenerate: true,
        };
        return Ell2Search { estimate, distinct_lower: 0.0, distinct_certificate: None };
    }
    let rows = row_pietsch(family, &choices).map(|(_, _, rows)| rows).unwrap_or_default();
    let (distinct_lower, distinct_certificate) = run(family, choices.clone(), cfg, up.value, &rows);
    let mut best = (distinct_lower, distinct_certificate.clone());
    let reps = if family.codomain().dim() == 1 { 1 } else { d.min((MAX_SLOTS / choices.len()).max(1)) };
    if reps > 1 && !(up.is_finite() && distinct_lower >= up.value * (1.0 - 1e-12)) {
        let ops: Vec<usize> = choices.iter().flat_map(|&c| std::iter::repeat_n(c, reps)).collect();
        let full = run(family, ops, cfg, up.value, &rows);
        if full.0 > best.0 {
            best = full;
        }
    }
    let estimate = match best.1 {
        Some(w) => BoundEstimate {
            constant: ConstantKind::Ell2,
            lower: best.0,
            upper: up.value,
            lower_certificate: w,
            upper_source: up.source,
            ci: None,
            meta,
            degenerate: false,
        },
        None => BoundEstimate {
            constant: ConstantKind::Ell2,
            lower: 0.0,
            upper: up.value,
            lower_certificate: blank,
            upper_source: up.source,
            ci: None,
            meta,
            degenerate: true,
        },
    };
    Ell2Search { estimate, distinct_lower, distinct_certificate }
}

/// Brackets `R²(𝒯)`.
pub fn ell2_bound_search(family: &OperatorFamily, cfg: &SearchConfig) -> BoundEstimate {
    ell2_search(family, cfg).estimate
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityCheck {
    pub primal: BoundEstimate,
    pub dual: BoundEstimate,
    pub consistent: bool,
}

fn is_tiny(family: &OperatorFamily) -> bool {
    family.domain().dim() <= TINY && family.codomain().dim() <= TINY && family.len() <= TINY
}

/// `R²(𝒯) = R²(𝒯*)`: each side's lower must respect the other side's upper,
/// and at tiny scale the two lowers must agree within 10%.
pub fn ell2_duality_check(family: &OperatorFamily, cfg: &SearchConfig) -> DualityCheck {
    let primal = ell2_bound_search(family, cfg);
    let dual = ell2_bound_search(&adjoint_family(family), cfg);
    let below = |lower: f64, upper: f64| lower <= upper * (1.0 + 1e-9) + 1e-12;
    let mut consistent = below(primal.lower, dual.upper) && below(dual.lower, primal.upper);
    if is_tiny(family) {
        let scale = primal.lower.max(dual.lower);
        consistent &= (primal.lower - dual.lower).abs() <= TINY_AGREEMENT * scale + 1e-12;
    }
    DualityCheck { primal, dual, consistent }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductCheck {
    pub composite: BoundEstimate,
    pub s_upper: f64,
    pub t_upper: f64,
    pub holds: bool,
}

/// `R²({ST}) ≤ R²(𝒮) R²(𝒯)`, checked on the searched lower of the products.
pub fn ell2_product_check(s: &OperatorFamily, t: &OperatorFamily, cfg: &SearchConfig) -> Result<ProductCheck> {
    let st = compose(s, t)?;
    let composite = ell2_bound_search(&st, cfg);
    let s_upper = ell2_bound_search(s, cfg).upper;
    let t_upper = ell2_bound_search(t, cfg).upper;
    let holds = if s_upper.is_finite() && t_upper.is_finite() {
        composite.lower <= s_upper * t_upper * (1.0 + 1e-9) + 1e-12
    } else {
        true
    };
    Ok(ProductCheck { composite, s_upper, t_upper, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SeqSpace;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linf_family(members: &[Vec<Vec<f64>>], d: usize, c: usize) -> OperatorFamily {
        let ms = members.iter().map(|m| Matrix::from_rows(m).unwrap()).collect();
        OperatorFamily::new(SeqSpace::linf(d).unwrap(), SeqSpace::linf(c).unwrap(), ms).unwrap()
    }

    #[test]
    fn grothendieck_bound_is_valid() {
        let k = GrothendieckConstant::default().upper_bound();
        assert!((1.5..=1.8).contains(&k));
        assert_eq!(k, K_G);
    }

    #[test]
    fn ratio_examples() {
        let id = OperatorFamily::singleton(SeqSpace::linf(2).unwrap(), SeqSpace::linf(2).unwrap(), Matrix::identity(2)).unwrap();
        let w = Witness::single(&id, vec![Vector::basis(2, 0)]).unwrap();
        assert_eq!(ell2_ratio(&id, &w).unwrap(), 1.0);
        let n = 5;
        let emb = OperatorFamily::coordinate_embeddings(n).unwrap();
        let w = Witness::new(&emb, (0..n).collect(), vec![Vector::new(vec![1.0]).unwrap(); n]).unwrap();
        assert_relative_eq!(ell2_ratio(&emb, &w).unwrap(), 1.0 / (n as f64).sqrt(), max_relative = 1e-15);
        let w = Witness::single(&id, vec![Vector::new(vec![0.3, -0.2]).unwrap()]).unwrap();
        let r = ell2_ratio(&id, &w).unwrap();
        assert_relative_eq!(ell2_ratio(&id.scaled(-3.0), &w).unwrap(), 3.0 * r, max_relative = 1e-15);
        let zero = Witness::single(&id, vec![Vector::zeros(2)]);
        assert!(matches!(zero, Err(Error::Degenerate(_))));
    }

    #[test]
    fn search_examples() {
        let cfg = SearchConfig::default();
        let id = OperatorFamily::singleton(SeqSpace::linf(2).unwrap(), SeqSpace::linf(2).unwrap(), Matrix::identity(2)).unwrap();
        let e = ell2_bound_search(&id, &cfg);
        assert!(e.lower >= 1.0 - 1e-12);
        assert_relative_eq!(e.upper, 1.78222, max_relative = 1e-15);
        assert_eq!(e.upper_source.tag(), "grothendieck-singleton");
        let zero = linf_family(&[vec![vec![0.0, 0.0]]], 2, 1);
        let e = ell2_bound_search(&zero, &cfg);
        assert_eq!((e.lower, e.upper), (0.0, 0.0));
        for n in 1..=4 {
            let f = OperatorFamily::coordinate_functionals(n).unwrap();
            let e = ell2_bound_search(&f, &cfg);
            if n > 1 {
                assert_relative_eq!(e.lower, (n as f64).sqrt(), max_relative = 1e-9);
                assert_relative_eq!(e.upper, (n as f64).sqrt(), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn two_convex_upper() {
        let l3 = SeqSpace::lp(2, 3.0).unwrap();
        let ms = vec![Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(), Matrix::from_rows(&[vec![0.5], vec![0.0]]).unwrap()];
        let f = OperatorFamily::new(SeqSpace::linf(1).unwrap(), l3, ms).unwrap();
        let e = ell2_bound_search(&f, &SearchConfig::default());
        assert_eq!(e.upper_source.tag(), "two-convex");
        assert!(e.lower <= e.upper + 1e-12);
    }

    #[test]
    fn duality_examples() {
        let cfg = SearchConfig::default();
        let f = linf_family(&[vec![vec![1.0, 2.0], vec![3.0, 4.0]]], 2, 2);
        assert!(ell2_duality_check(&f, &cfg).consistent);
        let f = linf_family(&[vec![vec![2.0, 0.0], vec![0.0, 3.0]]], 2, 2);
        let check = ell2_duality_check(&f, &cfg);
        assert!(check.consistent);
        assert!(check.primal.lower >= 3.0 - 1e-12 && check.dual.lower >= 3.0 - 1e-12);
        let f = linf_family(&[vec![vec![1.0, -1.0], vec![0.5, 2.0]], vec![vec![0.0, 1.0], vec![1.0, 1.0]]], 2, 2);
        let check = ell2_duality_check(&f, &cfg);
        assert!(check.consistent, "{check:?}");
        let swapped = ell2_duality_check(&adjoint_family(&f), &cfg);
        assert_eq!(swapped.primal, check.dual);
        assert_eq!(swapped.dual, check.primal);
    }

    #[test]
    fn product_examples() {
        let cfg = SearchConfig::default();
        let id = OperatorFamily::singleton(SeqSpace::linf(2).unwrap(), SeqSpace::linf(2).unwrap(), Matrix::identity(2)).unwrap();
        assert!(ell2_product_check(&id, &id, &cfg).unwrap().holds);
        let emb = OperatorFamily::coordinate_embeddings(2).unwrap();
        let fun = OperatorFamily::coordinate_functionals(2).unwrap();
        let c = ell2_product_check(&fun, &emb, &cfg).unwrap();
        assert!(c.holds, "{c:?}");
        let id3 = OperatorFamily::singleton(SeqSpace::linf(3).unwrap(), SeqSpace::linf(3).unwrap(), Matrix::identity(3)).unwrap();
        assert!(matches!(ell2_product_check(&id3, &id, &cfg), Err(Error::Shape(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn singleton_lower_below_grothendieck_bound(
            n in 2usize..4,
            entries in prop::collection::vec(-3.0f64..3.0, 9),
        ) {
            let rows: Vec<Vec<f64>> = (0..n).map(|r| entries[r * n..(r + 1) * n].to_vec()).collect();
            let f = linf_family(&[rows], n, n);
            let e = ell2_bound_search(&f, &SearchConfig::default().with_restarts(8));
            let norm = operator_norm(&f.members()[0], f.domain(), f.codomain()).unwrap();
            prop_assert!(e.lower <= K_G * norm + 1e-9);
        }

        #[test]
        fn distinct_reduction(
            entries in prop::collection::vec(-2.0f64..2.0, 8),
        ) {
            let f = linf_family(&[vec![entries[..2].to_vec(), entries[2..4].to_vec()], vec![entries[4..6].to_vec(), entries[6..].to_vec()]], 2, 2);
            let s = ell2_search(&f, &SearchConfig::default().with_restarts(8));
            prop_assert!(s.estimate.lower <= K_G * s.distinct_lower + 1e-9);
            prop_assert!(s.estimate.lower <= s.estimate.upper * (1.0 + 1e-9) + 1e-12);
        }
    }
}
