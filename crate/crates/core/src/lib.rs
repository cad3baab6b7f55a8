//! Quantum-annealing spectra of maximum-weight independent set instances on
//! complete k-partite graphs, with non-stoquastic XX-catalysts.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod mwis;
pub mod optimize;
pub mod perturbation;
pub mod runner;
pub mod sector;
pub mod spectrum;
pub mod sweeps;
pub mod system;

pub use error::{Error, Result};
pub use hamiltonian::{CatalystSpec, DenseOperator};
pub use mwis::{BasisState, IsingEncoding, MwisInstance};
pub use sector::SectorBasis;
pub use spectrum::{FeatureKind, GapFeature, ScanOptions, SpectrumScan};
pub use system::{AnnealSystem, SpaceMode};
