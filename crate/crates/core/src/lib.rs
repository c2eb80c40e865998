//! Frequency assignment for point-to-point radio links under
//! net-filter-discrimination (NFD) constraints.
//!
//! Pipeline: topology and plan ([`model`]), link budget ([`propagation`]),
//! NFD curve and separations ([`nfd`]), constraint graph ([`graph`]),
//! solvers ([`solvers`], [`ga`]), lower bounds ([`bounds`]) and an
//! independent checker ([`checker`]).

pub mod bench;
pub mod bounds;
pub mod checker;
pub mod error;
pub mod generator;
pub mod ga;
pub mod graph;
pub mod io;
pub mod model;
pub mod nfd;
pub mod propagation;
pub mod solvers;

pub use error::{FapError, Result};
