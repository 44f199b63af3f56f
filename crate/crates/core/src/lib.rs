//! Socially intelligent cooperation in repeated typed matrix games: equilibrium
//! computation, an agent zoo, imitation from population data, the imitate-then-commit
//! strategy, certification metrics, and the experiment pipeline.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod agents;
pub mod equilibrium;
pub mod experiments;
pub mod error;
pub mod game;
pub mod ic;
pub mod imitation;
pub mod metrics;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use game::{
    make_coordpref_game, make_matching_pennies_game, payoff, play_episode, Action, EpisodeRecord, GameClass,
    History, JointAction, JointType, MetaStrategy, MixedStrategy, PayoffMatrix, Seat, StrategyFactory, TypeId,
};
