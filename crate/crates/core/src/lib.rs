//! Exact calculus for finite random fields.
//!
//! A field `P_Λ` on the configurations of finitely many sites is represented
//! densely and converted to and from its system of one-point conditional
//! distributions, its transition energy field, one-point Hamiltonians and
//! interaction potentials. Consistency and Markov properties are checked by
//! exhaustive scans that report the worst defect with a witness.

pub mod energy;
pub mod error;
pub mod field;
pub mod io;
pub mod markov;
pub mod models;
pub mod onepoint;
pub mod potential;
pub mod reconstruct;
pub mod report;
pub mod space;

pub use energy::{Convention, Gauge, OnePointHamiltonian, TransitionEnergyField};
pub use error::{Error, Result};
pub use field::{Positivity, PositivityReport, RandomField};
pub use markov::{MarkovReport, NeighborhoodSystem};
pub use onepoint::{OnePointSystem, PositivityPointSet};
pub use potential::Potential;
pub use reconstruct::{InvarianceReport, Reconstruction};
pub use report::{ConsistencyReport, Witness};
pub use space::{ConfigSpace, Configuration, SiteSet};
