//! Desk-scale kinetic simulator for collisionless plasmas and self-gravitating
//! matter: Lagrangian particle flows for the Vlasov-Poisson system with
//! mollified interaction kernels, an independent Eulerian phase-space
//! reference solver, sphere compactification of near-escape trajectories,
//! and a diagnostics battery for every conserved or monotone quantity the
//! continuous system is supposed to honor (mass, level-set band masses,
//! energies, Casimir functionals, transport residuals, escape certificates,
//! effective-mass ledgers).
//!
//! Start from the runnable programs in `examples/`; each one exercises a
//! major capability end to end. The thin `vlasov` binary exposes the same
//! entry points as subcommands for scripted runs.

mod fft;

pub mod compactify;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod eulerian;
pub mod fields;
pub mod flow;
pub mod kernels;
pub mod numeric;
pub mod scenarios;
pub mod snapshot;

pub mod cli;

pub use error::{Result, VlasovError};
