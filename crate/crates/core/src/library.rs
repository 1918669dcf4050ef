//! Built-in environments. Receiver payoffs are a canonical instantiation:
//! only the indifference thresholds between consecutive actions are fixed by
//! the underlying examples; payoff levels are chosen so that consecutive
//! actions tie exactly at those thresholds with increasing differences.

use crate::model::{two_state_env, GeometricTail, PayoffEnvironment, TypeDistribution};
use crate::rational::{q, qi, Q};

/// Actions `{0, 2, 3}` with sender payoff equal to the action; receiver
/// switches from 0 to 2 at `P(θ1) = 1/3` and from 2 to 3 at `2/3`.
pub fn three_action(p1: Q) -> PayoffEnvironment {
    two_state_env(vec![qi(0), qi(2), qi(3)], &[q(1, 3), q(2, 3)], qi(3), p1)
        .expect("valid built-in environment")
}

/// Actions `{0, 2, 3, 7/2}` with thresholds `1/4, 1/2, 3/4`.
pub fn four_action(p1: Q) -> PayoffEnvironment {
    two_state_env(
        vec![qi(0), qi(2), qi(3), q(7, 2)],
        &[q(1, 4), q(1, 2), q(3, 4)],
        qi(4),
        p1,
    )
    .expect("valid built-in environment")
}

/// Acquit (0) or convict (1); the receiver convicts once `P(guilty) >= 1/2`.
pub fn prosecutor() -> PayoffEnvironment {
    let mut env = two_state_env(vec![qi(0), qi(1)], &[q(1, 2)], qi(2), q(3, 10))
        .expect("valid built-in environment");
    env.states = vec!["innocent".into(), "guilty".into()];
    env.actions = vec!["acquit".into(), "convict".into()];
    env
}

pub fn prosecutor_types() -> TypeDistribution {
    TypeDistribution::finite([(0, q(1, 3)), (1, q(1, 3)), (2, q(1, 3))]).unwrap()
}

/// `three_action` at prior `1/6` with types 0 and 1 equally likely.
pub fn three_action_low_prior() -> (PayoffEnvironment, TypeDistribution) {
    (
        three_action(q(1, 6)),
        TypeDistribution::finite([(0, q(1, 2)), (1, q(1, 2))]).unwrap(),
    )
}

/// `p(0) = 1/3`, `p(t) = (1/3)(1/2)^(t-1)` for `t >= 1`.
pub fn geometric_types() -> TypeDistribution {
    TypeDistribution::with_geometric(
        [(0, q(1, 3))],
        GeometricTail {
            start: 1,
            base: q(1, 3),
            ratio: q(1, 2),
        },
    )
    .unwrap()
}

/// `four_action` at prior `3/8` with `p(0) = 1/20`, `p(3) = 19/20`.
pub fn four_action_near_commitment() -> (PayoffEnvironment, TypeDistribution) {
    (
        four_action(q(3, 8)),
        TypeDistribution::finite([(0, q(1, 20)), (3, q(19, 20))]).unwrap(),
    )
}
