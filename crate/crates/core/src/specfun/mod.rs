//! Log-domain special functions and the tCCH distribution family.

pub mod hyper;
pub mod quad;
pub mod tcch;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecFunError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("improper prior: {0}")]
    ImproperPrior(String),
    #[error(transparent)]
    Quadrature(#[from] quad::QuadError),
}

pub use hyper::{log_appell_f1, log_hyp1f1, log_hyp2f1, log_phi1, log_phi1_tol};
pub use tcch::{
    tcch_log_pdf, tcch_moment, tcch_sample_exact, tcch_sample_slice, GPriorFamily, ResolvedGPrior,
    TcchParams,
};
