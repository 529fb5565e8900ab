//! Measurement and estimation toolkit for studying how firms' AI capability
//! interacts with the AI integration level of their technological domains.
//!
//! The pipeline runs from raw patent, financial, text, and policy corpora to
//! IPC4 co-occurrence decile scores, firm readiness variants, text-derived
//! capability measures, an assembled firm-year panel, and an estimator core
//! (fixed-effects OLS, 2SLS, Poisson pseudo-ML, production-function GMM).
//! A synthetic-corpus generator with planted coefficients provides the
//! ground-truth oracle for Monte Carlo validation.

pub mod capability;
pub mod cooccur;
pub mod corpus;
pub mod econ;
pub mod error;
pub mod panel;
pub mod readiness;
pub mod synth;

pub use error::{Error, Result};
