//! Adaptive consensus protocols for linear multi-agent systems on directed
//! graphs: Laplacian certificates, Riccati-based gain design, six protocol
//! variants, a fixed-step simulator and the residual-set analysis.
//!
//! Start from [`scenario::Scenario`] for file-driven runs, or build a
//! [`protocols::Network`] directly and pass it to [`sim::simulate`].

#![allow(clippy::needless_range_loop)]

pub mod agents;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod gains;
pub mod graph;
pub mod keymat;
pub mod linalg;
pub mod protocols;
pub mod scenario;
pub mod sim;
