//! Numerical oracles for tests. Nothing here shares code with the library
//! paths it checks.

pub mod quadrature;
