//! Discrete load balancing over matchings: schedules, balancing engines, and
//! checks of their concentration and smoothing behaviour.

pub mod analysis;
pub mod exact;
pub mod graph;
pub mod harness;
pub mod matrix;
pub mod process;
pub mod rng;
pub mod schedule;

pub use exact::{Dyadic, Scalar};
pub use graph::{Graph, GraphError, GraphFamily};
pub use matrix::{AveragingMatrix, DenseMatrix};
pub use process::{LoadVector, ProcessError};
pub use schedule::{Matching, ScheduleError, ScheduleModel};
