//! Rademacher, Gaussian and square-function bounds of operator families
//! between finite-dimensional sequence spaces, with witness-certified lower
//! bounds and analytic upper bounds.

pub mod ell2;
pub mod error;
pub mod family;
pub mod gaussian;
mod mc;
mod power;
pub mod quadrature;
pub mod rademacher;
pub mod search;
pub mod space;
pub mod summing;
mod upper;
pub mod witness;

pub use ell2::{
    ell2_bound_search, ell2_duality_check, ell2_product_check, ell2_ratio, ell2_search, DualityCheck, Ell2Search,
    GrothendieckConstant, ProductCheck, K_G,
};
pub use error::{Error, Result};
pub use family::{adjoint_family, compose, operator_norm, FamilyFile, Matrix, OperatorFamily};
pub use gaussian::{
    coord_gamma_bracket, expected_sup_mc, expsup_check, expsup_gamma_sq_bound, expsup_gamma_sq_mc, gamma_bound_search,
    gamma_ratio_mc, gaussian_moment_mc, komatsu_lower_tail, sudakov_check, theta, theta_floor, ExpsupCheck, McConfig,
    McEstimate, RatioEstimate, SudakovCheck,
};
pub use rademacher::{
    cotype2_ratio, cotype2_search, diag_c0_rbound, r_bound_search, r_ratio, rademacher_moment, SignPattern,
};
pub use search::SearchConfig;
pub use space::{norm, square_function_norm, Exponent, SeqSpace, Vector};
pub use summing::{
    cotype_ratio_bracket, gaussian_cotype2_ratio, gaussian_cotype2_search, pi21_search, pi2_search, pi_ratio, pietsch,
    weak_lq_norm, PietschSolution, SummingWitness,
};
pub use witness::{BoundEstimate, ConfidenceInterval, ConstantKind, EstimateMeta, UpperSource, Witness};
