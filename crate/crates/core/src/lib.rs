//! Feature selection by analog simulation of a neutral-atom array.
//!
//! Mutual-information statistics of a tabular dataset are turned into atom
//! positions (redundancy) and per-site detunings (relevance). The driven
//! Rydberg Hamiltonian is evolved on a state-vector simulator, measured
//! bitstrings are scored with a relevance/redundancy QUBO, and the low-energy
//! shots are post-processed into compact, low-redundancy subsets. A small
//! logistic-regression harness compares them with mutual-information ranking.
//!
//! Pipeline order: [`dataset`] → [`infometrics`] → [`geometry`] →
//! [`pulses`] → [`quantum_sim`] → [`selection`] → [`evalharness`].

pub mod bits;
pub mod dataset;
pub mod error;
pub mod evalharness;
pub mod geometry;
pub mod infometrics;
pub mod pairs;
pub mod pulses;
pub mod quantum_sim;
pub mod selection;

pub use dataset::{ColumnKind, ColumnRole, ColumnSpec, DiscretizedView, FeatureTable, LoadOptions, MissingPolicy};
pub use error::{Error, Result};
pub use evalharness::{ComparisonTable, MetricRecord, Method};
pub use geometry::{AtomLayout, MdsOptions, PhysicalConstants, SpacingRepair};
pub use infometrics::InfoProfile;
pub use pairs::PairMatrix;
pub use pulses::{DriveProgram, Schedule, ScheduleShape, SlewReport};
pub use quantum_sim::{RydbergSystem, SampleEnsemble, StateVector};
pub use selection::{QuboInstance, SelectionOptions, SelectionReport};
