//! Quantum Otto engine on a two-level working medium coupled to Markovian
//! and TCL2 non-Markovian bosonic reservoirs, with the relative-entropy
//! accounting of heat, work and the cost of preparing non-equilibrium states.

pub mod bath;
pub mod cycle;
pub mod dynamics;
pub mod error;
pub mod quadrature;
pub mod thermo;

pub use error::{QottoError, Result};
