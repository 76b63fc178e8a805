//! Registry plumbing for certified upper ends of brackets.

use crate::space::{Exponent, SeqSpace};
use crate::witness::UpperSource;

/// Smallest upper bound offered so far; ties keep the earlier source.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Upper {
    pub value: f64,
    pub source: UpperSource,
}

impl Default for Upper {
    fn default() -> Self {
        Upper { value: f64::INFINITY, source: UpperSource::None }
    }
}

impl Upper {
    pub fn offer(&mut self, value: f64, source: UpperSource) {
        if value.is_finite() && value < self.value {
            self.value = value;
            self.source = source;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Tag for an exact operator norm: enumerated extreme points count as an
/// exhaustive certificate, the closed forms as formulas.
pub(crate) fn norm_source(domain: &SeqSpace, codomain: &SeqSpace) -> UpperSource {
    let closed_form = codomain.is_linf()
        || codomain.dim() == 1
        || domain.dim() == 1
        || domain.p() == Exponent::Finite(1.0);
    if closed_form {
        UpperSource::formula("singleton-operator-norm")
    } else {
        UpperSource::Exhaustive
    }
}
