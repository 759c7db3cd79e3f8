//! Cost-aware asynchronous multi-agent active search.
//!
//! A team of agents looks for a sparse set of targets on a grid by choosing
//! region-sensing actions whose precision trades off against travel and
//! sensing time. Each agent plans with Monte Carlo tree search over Thompson
//! samples of its posterior, scores candidate plans on Pareto fronts of
//! lower-confidence-bound reward versus accumulated cost, and shares
//! measurements over an unreliable channel. The simulation harness replays the
//! whole system on a single deterministic event queue.

pub mod baselines;
pub mod belief;
pub mod env;
pub mod error;
pub mod experiment;
pub mod pareto;
pub mod planner;
pub mod seeding;
pub mod sim;

pub use error::{CastError, Result};
