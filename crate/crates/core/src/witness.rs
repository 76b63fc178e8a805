//! Witnesses and the bracket type every search returns.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::family::OperatorFamily;
use crate::gaussian::McConfig;
use crate::space::Vector;

/// A finite choice `(T_{i_1}, x_1), …, (T_{i_k}, x_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    op_indices: Vec<usize>,
    vectors: Vec<Vector>,
}

impl Witness {
    pub fn new(family: &OperatorFamily, op_indices: Vec<usize>, vectors: Vec<Vector>) -> Result<Self> {
        let w = Witness { op_indices, vectors };
        w.validate(family)?;
        Ok(w)
    }

    /// Witness for a single-member family: every vector uses member 0.
    pub fn single(family: &OperatorFamily, vectors: Vec<Vector>) -> Result<Self> {
        let k = vectors.len();
        Self::new(family, vec![0; k], vectors)
    }

    pub(crate) fn from_parts(op_indices: Vec<usize>, vectors: Vec<Vector>) -> Self {
        Witness { op_indices, vectors }
    }

    pub fn validate(&self, family: &OperatorFamily) -> Result<()> {
        if self.vectors.is_empty() {
            return Err(Error::shape("witness is empty"));
        }
        if self.op_indices.len() != self.vectors.len() {
            return Err(Error::shape(format!(
                "witness has {} operator indices but {} vectors",
                self.op_indices.len(),
                self.vectors.len()
            )));
        }
        for &i in &self.op_indices {
            family.member(i)?;
        }
        for v in &self.vectors {
            family.domain().check(v.coords())?;
        }
        if self.vectors.iter().all(Vector::is_zero) {
            return Err(Error::Degenerate("every witness vector is zero".into()));
        }
        Ok(())
    }

    pub fn op_indices(&self) -> &[usize] {
        &self.op_indices
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Witness {
        Witness {
            op_indices: self.op_indices.clone(),
            vectors: self.vectors.iter().map(|v| v.scaled(factor)).collect(),
        }
    }

    /// Images `T_{i_n} x_n` as raw codomain coordinates.
    pub(crate) fn images(&self, family: &OperatorFamily) -> Vec<Vec<f64>> {
        self.op_indices
            .iter()
            .zip(&self.vectors)
            .map(|(&i, v)| family.members()[i].apply_raw(v.coords()))
            .collect()
    }

    pub(crate) fn raw_vectors(&self) -> Vec<&[f64]> {
        self.vectors.iter().map(Vector::coords).collect()
    }
}

/// Which constant a [`BoundEstimate`] brackets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantKind {
    /// Rademacher bound `R(𝒯)`.
    R,
    /// Gaussian bound `R^γ(𝒯)`.
    Gamma,
    /// Square-function bound `R²(𝒯)`.
    Ell2,
    Pi2,
    Pi21,
    Cotype2,
    Cotype2Gamma,
}

impl ConstantKind {
    pub const ALL: [ConstantKind; 7] = [
        ConstantKind::R,
        ConstantKind::Gamma,
        ConstantKind::Ell2,
        ConstantKind::Pi2,
        ConstantKind::Pi21,
        ConstantKind::Cotype2,
        ConstantKind::Cotype2Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstantKind::R => "r",
            ConstantKind::Gamma => "gamma",
            ConstantKind::Ell2 => "ell2",
            ConstantKind::Pi2 => "pi2",
            ConstantKind::Pi21 => "pi21",
            ConstantKind::Cotype2 => "cotype2",
            ConstantKind::Cotype2Gamma => "cotype2gamma",
        }
    }

    pub fn is_monte_carlo(self) -> bool {
        matches!(self, ConstantKind::Gamma | ConstantKind::Cotype2Gamma)
    }
}

impl fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ConstantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConstantKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown constant {s:?}")))
    }
}

/// Provenance of the upper end of a bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "kebab-case")]
pub enum UpperSource {
    AnalyticFormula(String),
    Exhaustive,
    None,
}

impl UpperSource {
    pub fn formula(name: &str) -> Self {
        UpperSource::AnalyticFormula(name.to_string())
    }

    pub fn tag(&self) -> &str {
        match self {
            UpperSource::AnalyticFormula(name) => name,
            UpperSource::Exhaustive => "exhaustive",
            UpperSource::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub half_width: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    /// Monte Carlo samples behind the certified lower value, if any.
    pub samples: Option<usize>,
    pub seed: u64,
    pub search_budget: usize,
    /// Whether a full grid enumeration was part of the search.
    pub exhaustive: bool,
}

/// A bracket `[lower, upper]` with a witness certifying the lower end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub constant: ConstantKind,
    pub lower: f64,
    #[serde(serialize_with = "serialize_upper")]
    pub upper: f64,
    pub lower_certificate: Witness,
    pub upper_source: UpperSource,
    pub ci: Option<ConfidenceInterval>,
    pub meta: EstimateMeta,
    /// Set when the best witness has a zero ratio (for example a zero family).
    pub degenerate: bool,
}

pub(crate) fn serialize_upper<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

impl BoundEstimate {
    /// The estimate for the family multiplied by `factor > 0`; witnesses
    /// carry over unchanged.
    pub(crate) fn rescaled(mut self, factor: f64) -> Self {
        self.lower *= factor;
        self.upper *= factor;
        if let Some(ci) = &mut self.ci {
            ci.half_width *= factor;
        }
        self
    }

    pub fn half_width(&self) -> f64 {
        self.ci.map_or(0.0, |c| c.half_width)
    }

    /// `lower ≤ upper (+ CI half-width)`.
    pub fn is_consistent(&self) -> bool {
        self.lower >= 0.0 && self.lower <= self.upper + self.half_width()
    }

    pub fn is_closed(&self) -> bool {
        self.upper.is_finite() && self.lower >= self.upper * (1.0 - 1e-12)
    }

    /// Recomputes the lower value from the certificate alone.
    pub fn reevaluate(&self, family: &OperatorFamily) -> Result<f64> {
        let w = &self.lower_certificate;
        if self.degenerate {
            return Ok(0.0);
        }
        let mc = || {
            McConfig::new(
                self.meta.samples.unwrap_or(crate::gaussian::DEFAULT_SAMPLES),
                self.meta.seed,
                self.ci.map_or(crate::gaussian::DEFAULT_LEVEL, |c| c.level),
            )
        };
        match self.constant {
            ConstantKind::R => crate::rademacher::r_ratio(family, w),
            ConstantKind::Cotype2 => crate::rademacher::cotype2_ratio(family, w),
            ConstantKind::Ell2 => crate::ell2::ell2_ratio(family, w),
            ConstantKind::Pi2 => crate::summing::pi_ratio(family, w.vectors(), 2.0),
            ConstantKind::Pi21 => crate::summing::pi_ratio(family, w.vectors(), 1.0),
            ConstantKind::Gamma => Ok(crate::gaussian::gamma_ratio_mc(family, w, &mc()?)?.certified_lower),
            ConstantKind::Cotype2Gamma => {
                Ok(crate::summing::gaussian_cotype2_ratio(family, w, &mc()?)?.certified_lower)
            }
        }
    }
}
