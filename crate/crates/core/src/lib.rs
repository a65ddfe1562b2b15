//! Phase-space tests of genuine tripartite (Svetlichny) and standard
//! (Mermin–Klyshko) nonlocality for three-mode continuous-variable states.
//!
//! The crate is organised bottom-up:
//!
//! - [`states`]: closed-form s-parameterized quasiprobability functions of
//!   the three state families and their marginals.
//! - [`fock_oracle`]: an independent truncated Fock-space backend that
//!   recomputes every quantity by trace.
//! - [`noise`]: detection inefficiency and local thermal damping expressed
//!   as per-mode changes of `s` and phase-space rescalings.
//! - [`bell`]: correlation functions, MK and Svetlichny parameters.
//! - [`optimize`]: multistart simplex search over measurement settings,
//!   efficiency thresholds and the W/GHZ crossing amplitude.
//! - [`cli`]: the `phasebell` command-line front end.

pub mod bell;
pub mod cli;
pub mod error;
pub mod fock_oracle;
pub mod noise;
pub mod optimize;
pub mod quadrature;
pub mod states;

pub use error::{Error, Result};
