//! Numerics and exact simulation for the q-Hahn TASEP.
//!
//! The crate is organised bottom-up: [`qspecial`] provides q-series special
//! functions, [`scaling`] the deterministic macroscopic and KPZ quantities,
//! [`dynamics`] the particle system itself, [`asymptotics`] the steepest
//! descent toolkit, [`fredholm`] the determinant engine and Tracy-Widom
//! evaluation, and [`harness`] ensemble experiments and the verification
//! suite.

pub mod asymptotics;
pub mod dynamics;
pub mod error;
pub mod fredholm;
pub mod harness;
pub mod qspecial;
pub mod scaling;

pub use error::{Error, Result};
