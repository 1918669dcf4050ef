//! Finite-truncation equilibrium checking, exact and simulated payoffs, and
//! the quantitative deviation bounds.

pub mod bounds;
pub mod check;
pub mod game;
pub mod simulate;

pub use bounds::{
    approximation_constants, imitate_and_reveal_gain, in_uniform_neighborhood, reveal_threshold,
    ApproximationConstants, ImitationGain, RevealThreshold,
};
pub use check::{
    best_continuation, check_pebe, ex_ante_payoff, DecisionPoint, Deviation,
    EquilibriumCertificate, InitialDeviation, ReceiverMargin, SenderMargin, Verdict, SCOPE,
};
pub use game::{
    build_truncated_game, game_for_profile, path_masses, InterimSolver, Move, PathMass, TruncatedGame,
    DEFAULT_NODE_BUDGET,
};
pub use simulate::{simulate, SimulationReport};
