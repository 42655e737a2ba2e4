//! Certification and enumeration toolkit for cardinality-constrained
//! programs (CCOP) and their regularized orthogonality-constrained
//! reformulation `R(c, ε)`.
//!
//! * [`expr`]: expression parsing with exact gradients and Hessians.
//! * [`numkern`]: rank, null spaces, multiplier solves, restricted inertia.
//! * [`ccop`]: M-stationarity, CC-LICQ, NDM1–NDM4 and the M-index.
//! * [`regmpoc`]: `R(c, ε)`, MPOC-LICQ, T-stationarity, NDT1–NDT5 and the T-index.
//! * [`bridge`]: lifting M-points to T-points and projecting back.
//! * [`oracle`]: brute-force enumeration of stationary points.

pub mod bridge;
pub mod ccop;
pub mod expr;
pub mod numkern;
pub mod oracle;
pub mod regmpoc;

pub use bridge::{lift, project, verify_counts, BridgeError, LiftSet, Projection};
pub use ccop::{check_cc_licq, check_feasible, certify_m, CcopActivity, CertError, MCertificate, ModelError, Problem};
pub use expr::{parse, Expr, Jet2};
pub use numkern::{Inertia, Tolerances};
pub use oracle::{census_newton, census_newton_t, census_quadratic, census_t_quadratic, CensusReport, Grid, OracleError};
pub use regmpoc::{
    check_feasible_r, check_mpoc_licq, check_y_structure, certify_t, make_regularized, MpocActivity, RegularizedProblem,
    TCertificate,
};
