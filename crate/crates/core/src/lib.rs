//! Simulation laboratory comparing Taguchi orthogonal-array testing with an
//! elitist evolutionary optimizer on synthetic conversion-rate landscapes.

pub mod error;
pub mod evaluator;
pub mod evolution;
pub mod genome;
pub mod harness;
mod quad;
pub mod seed;
pub mod simstats;
pub mod taguchi;

pub use error::{Error, Result};
pub use evaluator::{Evaluator, Mode, WeightConfig};
pub use genome::{Candidate, SearchSpace};
pub use simstats::{BetaPosterior, CandidateStats, Interval};
pub use taguchi::OrthogonalArray;
