//! Finite-dimensional sequence spaces `ℓᵖ_d` and their (square-function) norms.
//!
//! Square functions in a sequence space are formed coordinatewise: for
//! `x_1, …, x_k ∈ ℓᵖ_d` the square function is the vector
//! `w_m = (Σ_i x_{i,m}²)^{1/2}` and its norm is `‖w‖_p`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent of an `ℓᵖ` space. Infinity is its own variant, never a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    fn validate(self) -> Result<Self> {
        match self {
            Exponent::Finite(p) if p.is_finite() && p >= 1.0 => Ok(self),
            Exponent::Finite(p) => Err(Error::domain(format!("exponent must be >= 1, got {p}"))),
            Exponent::Infinity => Ok(self),
        }
    }

    /// Conjugate exponent `p'` with `1/p + 1/p' = 1`.
    fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(2.0) => Exponent::Finite(2.0),
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ExponentVisitor;

        impl Visitor<'_> for ExponentVisitor {
            type Value = Exponent;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 1 or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
                Exponent::Finite(v).validate().map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(Exponent::Infinity),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ExponentVisitor)
    }
}

/// `ℓᵖ_d`: `d` coordinates with the `p`-norm.
///
/// The conjugate exponent is fixed at construction so that taking duals is an
/// exact involution even when `p/(p-1)` is not representable.
#[derive(Debug, Clone, Copy)]
pub struct SeqSpace {
    dim: usize,
    p: Exponent,
    dual_p: Exponent,
}

impl PartialEq for SeqSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.p == other.p
    }
}

impl SeqSpace {
    pub fn new(dim: usize, p: Exponent) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("space dimension must be at least 1"));
        }
        let p = p.validate()?;
        Ok(SeqSpace { dim, p, dual_p: p.conjugate() })
    }

    pub fn linf(dim: usize) -> Result<Self> {
        Self::new(dim, Exponent::Infinity)
    }

    pub fn lp(dim: usize, p: f64) -> Result<Self> {
        Self::new(dim, Exponent::Finite(p))
    }

    /// The scalar field as a one-dimensional space.
    pub fn scalars() -> Self {
        SeqSpace { dim: 1, p: Exponent::Infinity, dual_p: Exponent::Finite(1.0) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn is_linf(&self) -> bool {
        self.p.is_infinite()
    }

    pub fn dual(&self) -> SeqSpace {
        SeqSpace { dim: self.dim, p: self.dual_p, dual_p: self.p }
    }

    /// Norm of a raw coordinate slice; the caller guarantees the length.
    pub(crate) fn norm_of(&self, v: &[f64]) -> f64 {
        lp_norm(self.p, v)
    }

    pub(crate) fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::shape(format!(
                "vector of length {} does not belong to a space of dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

impl fmt::Display for SeqSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l^{}_{}", self.p, self.dim)
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    dim: usize,
    p: Exponent,
}

impl Serialize for SeqSpace {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SpaceRepr { dim: self.dim, p: self.p }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SeqSpace {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SpaceRepr::deserialize(deserializer)?;
        SeqSpace::new(repr.dim, repr.p).map_err(de::Error::custom)
    }
}

/// A dense vector with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::domain(format!("vector entries must be finite, got {bad}")));
        }
        Ok(Vector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Vector(v)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * factor).collect())
    }

    // Search code builds vectors from values it already knows are finite.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Vector(coords)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(deserializer)?;
        Vector::new(coords).map_err(de::Error::custom)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub(crate) fn lp_norm(p: Exponent, v: &[f64]) -> f64 {
    let p = match p {
        Exponent::Infinity => return max_abs(v),
        Exponent::Finite(1.0) => return v.iter().map(|c| c.abs()).sum(),
        Exponent::Finite(p) => p,
    };
    let direct = if p == 2.0 {
        v.iter().map(|c| c * c).sum::<f64>().sqrt()
    } else {
        v.iter().map(|c| c.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    };
    if direct.is_finite() && direct > 1e-140 {
        return direct;
    }
    // powers overflowed or underflowed: rescale by the largest entry
    let top = max_abs(v);
    if top == 0.0 || !top.is_finite() {
        return top;
    }
    top * v.iter().map(|c| (c.abs() / top).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()))
}

/// `(Σ|vᵢ|^p)^{1/p}`, or `max|vᵢ|` when `p = ∞`.
pub fn norm(space: &SeqSpace, v: &Vector) -> Result<f64> {
    space.check(v.coords())?;
    Ok(space.norm_of(v.coords()))
}

/// Norm of the coordinatewise square function `(Σ_n |v_n|²)^{1/2}`.
pub fn square_function_norm(space: &SeqSpace, vs: &[Vector]) -> Result<f64> {
    if vs.is_empty() {
        return Err(Error::domain("square function of an empty list"));
    }
    for v in vs {
        space.check(v.coords())?;
    }
    Ok(square_function_norm_raw(space, vs.iter().map(|v| v.coords())))
}

pub(crate) fn square_function_norm_raw<'a>(
    space: &SeqSpace,
    vs: impl Iterator<Item = &'a [f64]>,
) -> f64 {
    let mut acc = vec![0.0; space.dim()];
    for v in vs {
        for (a, c) in acc.iter_mut().zip(v) {
            *a += c * c;
        }
    }
    acc.iter_mut().for_each(|a| *a = a.sqrt());
    space.norm_of(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&SeqSpace::linf(2).unwrap(), &v(&[3.0, -4.0])).unwrap(), 4.0);
        assert_eq!(norm(&SeqSpace::lp(2, 2.0).unwrap(), &v(&[3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(norm(&SeqSpace::lp(3, 1.0).unwrap(), &v(&[1.0, 1.0, 1.0])).unwrap(), 3.0);
        assert_relative_eq!(
            norm(&SeqSpace::lp(2, 3.0).unwrap(), &v(&[1.0, 2.0])).unwrap(),
            9.0_f64.powf(1.0 / 3.0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn norm_rejects_wrong_dimension() {
        let err = norm(&SeqSpace::linf(3).unwrap(), &v(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn space_invariants() {
        assert!(SeqSpace::linf(0).is_err());
        assert!(SeqSpace::lp(2, 0.5).is_err());
        assert!(SeqSpace::lp(2, f64::NAN).is_err());
        assert!(Vector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn square_function_examples() {
        let s = SeqSpace::linf(2).unwrap();
        assert_eq!(square_function_norm(&s, &[v(&[1.0, 0.0])]).unwrap(), 1.0);
        assert_eq!(square_function_norm(&s, &[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap(), 1.0);
        assert_relative_eq!(
            square_function_norm(&s, &[v(&[1.0, 1.0]), v(&[1.0, 1.0])]).unwrap(),
            2.0_f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn square_function_errors() {
        let s = SeqSpace::linf(2).unwrap();
        assert!(matches!(square_function_norm(&s, &[]), Err(Error::Domain(_))));
        assert!(matches!(
            square_function_norm(&s, &[v(&[1.0, 0.0]), v(&[1.0])]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn dual_is_an_exact_involution() {
        for p in [1.0, 1.5, 2.0, 2.2, 3.0, 4.0, 7.3] {
            let s = SeqSpace::lp(3, p).unwrap();
            assert_eq!(s.dual().dual(), s);
            assert_eq!(s.dual().dual().dual(), s.dual());
        }
        assert_eq!(SeqSpace::linf(2).unwrap().dual().p(), Exponent::Finite(1.0));
        assert_eq!(SeqSpace::lp(2, 1.0).unwrap().dual().p(), Exponent::Infinity);
    }

    #[test]
    fn exponent_json() {
        let s: SeqSpace = serde_json::from_str(r#"{"dim":3,"p":"inf"}"#).unwrap();
        assert!(s.is_linf());
        let s: SeqSpace = serde_json::from_str(r#"{"dim":3,"p":2}"#).unwrap();
        assert_eq!(s.p(), Exponent::Finite(2.0));
        assert!(serde_json::from_str::<SeqSpace>(r#"{"dim":3,"p":0.5}"#).is_err());
        assert!(serde_json::from_str::<SeqSpace>(r#"{"dim":0,"p":1}"#).is_err());
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"dim":3,"p":2.0}"#);
    }

    fn exponent() -> impl Strategy<Value = Exponent> {
        prop_oneof![
            Just(Exponent::Infinity),
            Just(Exponent::Finite(1.0)),
            Just(Exponent::Finite(2.0)),
            (1.0..8.0f64).prop_map(Exponent::Finite),
        ]
    }

    proptest! {
        #[test]
        fn homogeneity(p in exponent(), xs in prop::collection::vec(-10.0..10.0f64, 1..8), lambda in -5.0..5.0f64) {
            let s = SeqSpace::new(xs.len(), p).unwrap();
            let x = v(&xs);
            let lhs = norm(&s, &x.scaled(lambda)).unwrap();
            let rhs = lambda.abs() * norm(&s, &x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn triangle_inequality(p in exponent(), pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..8)) {
            let s = SeqSpace::new(pairs.len(), p).unwrap();
            let x = v(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let y = v(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let sum = v(&pairs.iter().map(|p| p.0 + p.1).collect::<Vec<_>>());
            let lhs = norm(&s, &sum).unwrap();
            let rhs = norm(&s, &x).unwrap() + norm(&s, &y).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn square_function_grows_when_appending(
            p in exponent(),
            rows in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 1..6),
            extra in prop::collection::vec(-3.0..3.0f64, 3),
        ) {
            let s = SeqSpace::new(3, p).unwrap();
            let mut vs: Vec<Vector> = rows.iter().map(|r| v(r)).collect();
            let before = square_function_norm(&s, &vs).unwrap();
            vs.push(v(&extra));
            let after = square_function_norm(&s, &vs).unwrap();
            prop_assert!(after >= before * (1.0 - 1e-14));
        }

        #[test]
        fn square_function_of_singleton_is_norm(p in exponent(), xs in prop::collection::vec(-10.0..10.0f64, 1..8)) {
            let s = SeqSpace::new(xs.len(), p).unwrap();
            let x = v(&xs);
            let sq = square_function_norm(&s, std::slice::from_ref(&x)).unwrap();
            let n = norm(&s, &x).unwrap();
            prop_assert!((sq - n).abs() <= 1e-12 * n.max(1e-300));
        }
    }
}
