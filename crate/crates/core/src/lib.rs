//! Broadcasting of mixed qubits: density-operator primitives, fidelity laws,
//! cloning machines and a numerical search for universal broadcasters.

pub mod channels;
pub mod cloners;
pub mod densops;
pub mod error;
pub mod fidelity;
pub mod nutsearch;
pub mod optim;
pub mod report;

pub use error::{Error, Result};
