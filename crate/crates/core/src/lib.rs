//! Exact solver, equilibrium constructor and equilibrium verifier for
//! persuasion games where a privately informed sender can run additional
//! experiments and selectively disclose their outcomes.

pub mod concavify;
pub mod equilibrium;
pub mod error;
pub mod library;
pub mod lp;
pub mod model;
pub mod profile;
pub mod rational;
pub mod scenario;
pub mod verifier;

pub use error::{Error, Result};
pub use rational::{q, qi, ExtQ, Q};
pub use model::{Belief, Experiment, PayoffEnvironment, PosteriorDistribution, TypeDistribution};
