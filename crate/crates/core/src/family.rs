//! Dense matrices and finite operator families between sequence spaces.

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::space::{lp_norm, Exponent, SeqSpace, Vector};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::shape("matrix has no rows"));
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(Error::shape("matrix has no columns"));
        }
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::shape(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::domain(format!("row {i} has a non-finite entry")));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.get(r, c);
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * factor).collect() }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs.get(k, c);
                }
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    /// `out = M x`; lengths are the caller's responsibility.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub(crate) fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        out
    }

    /// `out = Mᵀ y`.
    pub(crate) fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
    }
}

/// Largest domain dimension for which an `ℓ∞`-domain operator norm is computed
/// by enumerating the sign vectors (the extreme points of the unit cube).
pub const OPERATOR_NORM_SIGN_CAP: usize = 20;

/// Exact operator norm `‖M‖_{domain → codomain}` when a finite certificate
/// exists: codomain `ℓ∞` (max dual row norm), domain `ℓ¹` (max column norm),
/// or a small `ℓ∞` domain (max over sign vectors). `None` otherwise.
pub fn operator_norm(m: &Matrix, domain: &SeqSpace, codomain: &SeqSpace) -> Option<f64> {
    if codomain.is_linf() || codomain.dim() == 1 {
        let dual = domain.dual().p();
        return Some((0..m.rows()).map(|r| lp_norm(dual, m.row(r))).fold(0.0, f64::max));
    }
    if domain.p() == Exponent::Finite(1.0) || domain.dim() == 1 {
        let t = m.transpose();
        return Some((0..t.rows()).map(|c| codomain.norm_of(t.row(c))).fold(0.0, f64::max));
    }
    if domain.is_linf() && domain.dim() <= OPERATOR_NORM_SIGN_CAP {
        let d = domain.dim();
        let mut x = vec![1.0; d];
        let mut best = 0.0_f64;
        let mut y = vec![0.0; m.rows()];
        // x_0 = +1 without loss of generality.
        for bits in 0..(1u64 << (d - 1)) {
            for (i, xi) in x.iter_mut().enumerate().skip(1) {
                *xi = if bits >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
            }
            m.apply_into(&x, &mut y);
            best = best.max(codomain.norm_of(&y));
        }
        return Some(best);
    }
    None
}

/// A finite list `T_1, …, T_N` of operators sharing a domain and a codomain.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    domain: SeqSpace,
    codomain: SeqSpace,
    members: Vec<Matrix>,
}

impl OperatorFamily {
    pub fn new(domain: SeqSpace, codomain: SeqSpace, members: Vec<Matrix>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::shape("operator family must have at least one member"));
        }
        for (i, m) in members.iter().enumerate() {
            if m.rows() != codomain.dim() || m.cols() != domain.dim() {
                return Err(Error::shape(format!(
                    "member {i} is {}x{}, expected {}x{} for {domain} -> {codomain}",
                    m.rows(),
                    m.cols(),
                    codomain.dim(),
                    domain.dim()
                )));
            }
        }
        Ok(OperatorFamily { domain, codomain, members })
    }

    pub fn singleton(domain: SeqSpace, codomain: SeqSpace, member: Matrix) -> Result<Self> {
        Self::new(domain, codomain, vec![member])
    }

    /// Functionals `x ↦ a_n x_n` on `ℓ∞_N` (a truncation of `c₀`).
    pub fn diagonal_c0(a: &[f64]) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::shape("coefficient vector is empty"));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("coefficients must be finite"));
        }
        let members = a
            .iter()
            .enumerate()
            .map(|(i, &ai)| {
                let mut row = vec![0.0; n];
                row[i] = ai;
                Matrix { rows: 1, cols: n, data: row }
            })
            .collect();
        Self::new(SeqSpace::linf(n)?, SeqSpace::scalars(), members)
    }

    /// Coordinate functionals `x ↦ x_n` on `ℓ∞_N`.
    pub fn coordinate_functionals(n: usize) -> Result<Self> {
        Self::diagonal_c0(&vec![1.0; n])
    }

    /// Coordinate embeddings `a ↦ a e_n` from the scalars into `ℓ∞_N`.
    pub fn coordinate_embeddings(n: usize) -> Result<Self> {
        let members = (0..n)
            .map(|i| {
                let mut col = vec![0.0; n];
                col[i] = 1.0;
                Matrix { rows: n, cols: 1, data: col }
            })
            .collect();
        Self::new(SeqSpace::scalars(), SeqSpace::linf(n)?, members)
    }

    pub fn domain(&self) -> &SeqSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &SeqSpace {
        &self.codomain
    }

    pub fn members(&self) -> &[Matrix] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, index: usize) -> Result<&Matrix> {
        self.members.get(index).ok_or_else(|| {
            Error::shape(format!("operator index {index} out of range for {} members", self.len()))
        })
    }

    /// `T_index v`.
    pub fn apply(&self, index: usize, v: &Vector) -> Result<Vector> {
        let m = self.member(index)?;
        self.domain.check(v.coords())?;
        Ok(Vector::from_raw(m.apply_raw(v.coords())))
    }

    pub fn scaled(&self, factor: f64) -> OperatorFamily {
        OperatorFamily {
            domain: self.domain,
            codomain: self.codomain,
            members: self.members.iter().map(|m| m.scaled(factor)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.members.iter().all(Matrix::is_zero)
    }

    /// When the largest entry is far from 1, the family divided by a nearby
    /// power of two, and that power. Every constant here is homogeneous, so
    /// searching the rescaled family keeps squared norms in range.
    pub(crate) fn far_scaled(&self) -> Option<(OperatorFamily, f64)> {
        let top = self.members.iter().flat_map(|m| m.data.iter()).fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if top == 0.0 || (1e-100..=1e100).contains(&top) {
            return None;
        }
        let scale = 2f64.powi(top.log2().round() as i32);
        Some((self.scaled(1.0 / scale), scale))
    }

    pub fn is_functional(&self) -> bool {
        self.codomain.dim() == 1
    }

    /// Indices of the first occurrence of each distinct member.
    pub fn distinct_indices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for (i, m) in self.members.iter().enumerate() {
            if !out.iter().any(|&j| self.members[j] == *m) {
                out.push(i);
            }
        }
        out
    }

    /// The stacked operator `A x = (T_n x)_n` of a functional family, as a
    /// single-member family into `ℓ∞_N`.
    pub fn stacked(&self) -> Result<OperatorFamily> {
        if !self.is_functional() {
            return Err(Error::contract("only families of functionals can be stacked"));
        }
        let rows: Vec<Vec<f64>> = self.members.iter().map(|m| m.row(0).to_vec()).collect();
        OperatorFamily::singleton(self.domain, SeqSpace::linf(self.len())?, Matrix::from_rows(&rows)?)
    }

    /// Rows of a single operator as a family of functionals (inverse of `stacked`).
    pub fn unstacked(&self) -> Result<OperatorFamily> {
        if self.len() != 1 {
            return Err(Error::contract("only a single operator can be split into row functionals"));
        }
        let a = &self.members[0];
        let members = (0..a.rows())
            .map(|r| Matrix { rows: 1, cols: a.cols(), data: a.row(r).to_vec() })
            .collect();
        OperatorFamily::new(self.domain, SeqSpace::scalars(), members)
    }

    /// Coefficients `a` when the family is `{x ↦ a_n x_{m_n}}` on an `ℓ∞`
    /// domain with pairwise distinct coordinates `m_n` (zero members allowed).
    pub fn diagonal_coefficients(&self) -> Option<Vec<f64>> {
        if !self.domain.is_linf() || !self.is_functional() {
            return None;
        }
        let mut used = vec![false; self.domain.dim()];
        let mut a = Vec::with_capacity(self.len());
        for m in &self.members {
            let mut nonzero = m.row(0).iter().enumerate().filter(|(_, &x)| x != 0.0);
            match (nonzero.next(), nonzero.next()) {
                (None, _) => a.push(0.0),
                (Some((c, &x)), None) => {
                    if used[c] {
                        return None;
                    }
                    used[c] = true;
                    a.push(x);
                }
                _ => return None,
            }
        }
        Some(a)
    }

    /// `Some(c)` when the family is `c`-scaled coordinate functionals
    /// `x ↦ ±c x_{m_n}` with distinct coordinates.
    pub fn coordinate_functional_scale(&self) -> Option<f64> {
        let a = self.diagonal_coefficients()?;
        let c = a[0].abs();
        (c > 0.0 && a.iter().all(|x| x.abs() == c)).then_some(c)
    }
}

/// Adjoint family: transposed members between the dual spaces.
pub fn adjoint_family(family: &OperatorFamily) -> OperatorFamily {
    OperatorFamily {
        domain: family.codomain.dual(),
        codomain: family.domain.dual(),
        members: family.members.iter().map(Matrix::transpose).collect(),
    }
}

/// `{S T : S ∈ 𝒮, T ∈ 𝒯}`, ordered with the `𝒮` index outermost.
pub fn compose(s: &OperatorFamily, t: &OperatorFamily) -> Result<OperatorFamily> {
    if t.codomain != s.domain {
        return Err(Error::shape(format!(
            "cannot compose: inner codomain {} differs from outer domain {}",
            t.codomain, s.domain
        )));
    }
    let mut members = Vec::with_capacity(s.len() * t.len());
    for sm in &s.members {
        for tm in &t.members {
            members.push(sm.matmul(tm)?);
        }
    }
    OperatorFamily::new(t.domain, s.codomain, members)
}

/// JSON interchange form of a family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub domain: SeqSpace,
    pub codomain: SeqSpace,
    pub members: Vec<Vec<Vec<f64>>>,
}

impl FamilyFile {
    pub fn from_family(name: Option<String>, family: &OperatorFamily) -> Self {
        FamilyFile {
            name,
            domain: family.domain,
            codomain: family.codomain,
            members: family.members.iter().map(Matrix::to_rows).collect(),
        }
    }

    pub fn into_family(self) -> Result<OperatorFamily> {
        let members = self
            .members
            .iter()
            .map(|rows| Matrix::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        OperatorFamily::new(self.domain, self.codomain, members)
    }
}

impl Serialize for OperatorFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        FamilyFile::from_family(None, self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OperatorFamily {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        FamilyFile::deserialize(deserializer)?.into_family().map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn apply_examples() {
        let s2 = SeqSpace::linf(2).unwrap();
        let id = OperatorFamily::singleton(s2, s2, Matrix::identity(2)).unwrap();
        assert_eq!(id.apply(0, &v(&[2.0, 5.0])).unwrap(), v(&[2.0, 5.0]));
        let zero = OperatorFamily::singleton(s2, s2, Matrix::zeros(2, 2)).unwrap();
        assert_eq!(zero.apply(0, &v(&[2.0, 5.0])).unwrap(), v(&[0.0, 0.0]));
        let sum = OperatorFamily::singleton(s2, SeqSpace::scalars(), m(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(sum.apply(0, &v(&[2.0, 5.0])).unwrap(), v(&[7.0]));
    }

    #[test]
    fn apply_errors() {
        let s2 = SeqSpace::linf(2).unwrap();
        let id = OperatorFamily::singleton(s2, s2, Matrix::identity(2)).unwrap();
        assert!(matches!(id.apply(1, &v(&[1.0, 1.0])), Err(Error::Shape(_))));
        assert!(matches!(id.apply(0, &v(&[1.0])), Err(Error::Shape(_))));
        assert!(OperatorFamily::new(s2, s2, vec![Matrix::identity(3)]).is_err());
        assert!(OperatorFamily::new(s2, s2, vec![]).is_err());
    }

    #[test]
    fn adjoint_example() {
        let s2 = SeqSpace::linf(2).unwrap();
        let f = OperatorFamily::singleton(s2, s2, m(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        let a = adjoint_family(&f);
        assert_eq!(a.members()[0], m(&[&[1.0, 3.0], &[2.0, 4.0]]));
        assert_eq!(a.domain().p(), Exponent::Finite(1.0));
        assert_eq!(a.codomain().p(), Exponent::Finite(1.0));
        let id = OperatorFamily::singleton(s2, s2, Matrix::identity(2)).unwrap();
        let ida = adjoint_family(&id);
        assert_eq!(ida.members()[0], Matrix::identity(2));
        assert_eq!(*ida.domain(), s2.dual());
    }

    #[test]
    fn operator_norms() {
        let s2 = SeqSpace::linf(2).unwrap();
        let a = m(&[&[1.0, -2.0], &[3.0, 4.0]]);
        assert_eq!(operator_norm(&a, &s2, &s2), Some(7.0));
        let l1 = SeqSpace::lp(2, 1.0).unwrap();
        assert_eq!(operator_norm(&a.transpose(), &l1, &l1), Some(7.0));
        // ℓ∞ → ℓ¹ goes through the sign-vector enumeration.
        assert_eq!(operator_norm(&a, &s2, &l1), Some(8.0));
        let l2 = SeqSpace::lp(2, 2.0).unwrap();
        assert_eq!(operator_norm(&a, &l2, &l2), None);
    }

    #[test]
    fn shape_detection() {
        let d = OperatorFamily::diagonal_c0(&[3.0, -4.0]).unwrap();
        assert_eq!(d.diagonal_coefficients(), Some(vec![3.0, -4.0]));
        assert_eq!(d.coordinate_functional_scale(), None);
        let c = OperatorFamily::coordinate_functionals(5).unwrap().scaled(0.5);
        assert_eq!(c.coordinate_functional_scale(), Some(0.5));
        let s3 = SeqSpace::linf(3).unwrap();
        let shared = OperatorFamily::new(
            s3,
            SeqSpace::scalars(),
            vec![m(&[&[1.0, 0.0, 0.0]]), m(&[&[2.0, 0.0, 0.0]])],
        )
        .unwrap();
        assert_eq!(shared.diagonal_coefficients(), None);
        assert_eq!(shared.stacked().unwrap().members()[0], m(&[&[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0]]));
        assert_eq!(shared.stacked().unwrap().unstacked().unwrap(), shared);
    }

    #[test]
    fn composition() {
        let s = OperatorFamily::coordinate_embeddings(2).unwrap();
        let t = OperatorFamily::coordinate_functionals(2).unwrap();
        let st = compose(&s, &t).unwrap();
        assert_eq!(st.len(), 4);
        assert_eq!(st.members()[1], m(&[&[0.0, 1.0], &[0.0, 0.0]]));
        assert!(matches!(compose(&t, &t), Err(Error::Shape(_))));
    }

    #[test]
    fn json_interchange() {
        let text = r#"{"name":"demo","domain":{"dim":2,"p":"inf"},"codomain":{"dim":1,"p":1},
                       "members":[[[1.0,0.5]],[[0.0,-2.0]]]}"#;
        let file: FamilyFile = serde_json::from_str(text).unwrap();
        assert_eq!(file.name.as_deref(), Some("demo"));
        let f = file.into_family().unwrap();
        assert_eq!(f.len(), 2);
        let bad = r#"{"domain":{"dim":2,"p":"inf"},"codomain":{"dim":1,"p":1},"members":[[[1.0]]]}"#;
        assert!(serde_json::from_str::<OperatorFamily>(bad).is_err());
    }

    fn random_family() -> impl Strategy<Value = OperatorFamily> {
        (1usize..4, 1usize..4, 1usize..4, 0usize..3, 0usize..3).prop_flat_map(|(d, c, n, pd, pc)| {
            let exps = [Exponent::Infinity, Exponent::Finite(1.0), Exponent::Finite(2.5)];
            let dom = SeqSpace::new(d, exps[pd]).unwrap();
            let cod = SeqSpace::new(c, exps[pc]).unwrap();
            prop::collection::vec(prop::collection::vec(-1e6..1e6f64, d * c), n).prop_map(move |ms| {
                let members = ms
                    .into_iter()
                    .map(|data| Matrix { rows: c, cols: d, data })
                    .collect();
                OperatorFamily::new(dom, cod, members).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn adjoint_is_an_involution(f in random_family()) {
            prop_assert_eq!(adjoint_family(&adjoint_family(&f)), f);
        }

        #[test]
        fn json_round_trip_is_bit_exact(f in random_family()) {
            let text = serde_json::to_string(&f).unwrap();
            let back: OperatorFamily = serde_json::from_str(&text).unwrap();
            for (a, b) in f.members().iter().zip(back.members()) {
                for (x, y) in a.data.iter().zip(&b.data) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(back, f);
        }

        #[test]
        fn max_row_sum_matches_transposed_max_column_sum(
            data in prop::collection::vec(-10.0..10.0f64, 12)
        ) {
            let a = Matrix { rows: 3, cols: 4, data };
            let linf4 = SeqSpace::linf(4).unwrap();
            let linf3 = SeqSpace::linf(3).unwrap();
            let n_inf = operator_norm(&a, &linf4, &linf3).unwrap();
            let n_one = operator_norm(&a.transpose(), &linf3.dual(), &linf4.dual()).unwrap();
            prop_assert!((n_inf - n_one).abs() <= 1e-12 * n_inf.max(1.0));
            // the sign-vector route agrees with the row-sum formula
            let brute = {
                let mut best = 0.0_f64;
                for bits in 0..16u32 {
                    let x: Vec<f64> = (0..4).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                    best = best.max(lp_norm(Exponent::Infinity, &a.apply_raw(&x)));
                }
                best
            };
            prop_assert!((n_inf - brute).abs() <= 1e-12 * n_inf.max(1.0));
        }
    }
}
