//! Subgoal-based Bayesian nonparametric inverse reinforcement learning on
//! finite MDPs.
//!
//! The crate infers partitions of expert demonstrations into subgoal
//! clusters with three samplers: a spatial model that links states through
//! a distance-dependent CRP under the hitting-time metric, a temporal model
//! that links demonstrations by their timestamps, and the exchangeable
//! CRP baseline. Posterior samples turn into predictive action
//! distributions, MAP policies and entropy maps; the `bench` module holds
//! the synthetic experiment harness.

pub mod bench;
pub mod cli;
pub mod ddcrp;
pub mod demos;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod mdp;
pub mod numeric;
pub mod prediction;
pub mod samplers;

pub use error::{Error, Result};
