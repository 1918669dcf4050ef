//! Quantitative bounds: the imitate-and-reveal deviation gain, the type
//! count beyond which a revealing state breaks near-commitment payoffs, and
//! the approximation constants around a non-credible belief.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::game::{interim_probs, InterimSolver, TruncatedGame};
use crate::concavify::{classify_credibility, two_state_breakpoints, CommitmentSolution};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Op};
use crate::model::{
    indirect_utility_max, state_payoffs, Belief, PayoffEnvironment, TypeDistribution,
};
use crate::profile::{History, PurePlan, ReceiverResolver, StrategyProfile, FULL_DISCLOSURE};
use crate::rational::{ceil_q, floor_q, serde_q, sup_distance, Q};

/// Gain of a higher type that copies a lower type but reveals `θ` wherever
/// the lower type stops at a belief in the target set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImitationGain {
    /// Ex-ante payoff of the deviation minus the lower type's payoff.
    #[serde(with = "serde_q")]
    pub gain: Q,
    /// Joint probability of state `θ` and stopping in the target set.
    #[serde(with = "serde_q")]
    pub target_mass: Q,
    /// Highest sender payoff at a targeted stopping history.
    #[serde(with = "serde_q")]
    pub target_value: Q,
    /// `target_mass · (u(θ) − target_value)`.
    #[serde(with = "serde_q")]
    pub lower_bound: Q,
}

struct Rewrite<'a> {
    game: &'a TruncatedGame,
    resolver: &'a ReceiverResolver<'a>,
    initial: String,
    interim: usize,
    theta: usize,
    target: &'a dyn Fn(&Belief) -> bool,
    full: usize,
    max_value: Option<Q>,
}

impl Rewrite<'_> {
    /// Rewritten plan and the probability, given `θ`, of a targeted stop.
    fn walk(&mut self, plan: &PurePlan, seq: &mut Vec<usize>) -> (PurePlan, Q) {
        match plan {
            PurePlan::Stop { disclose } => {
                let mut counts = vec![0u8; self.game.items.len()];
                for &pos in disclose {
                    counts[seq[pos]] += 1;
                }
                let history = History::new(
                    &self.initial,
                    self.interim,
                    self.game.disclosed_names(&counts),
                );
                let Some(r) = self.resolver.resolve(&history) else {
                    return (plan.clone(), Q::zero());
                };
                if !(self.target)(&r.belief) {
                    return (plan.clone(), Q::zero());
                }
                let v = self.game.env.sender_value(&r.action);
                if self.max_value.as_ref().is_none_or(|m| &v > m) {
                    self.max_value = Some(v);
                }
                let exp = self.game.experiment(self.full);
                let next = (0..exp.n_outcomes())
                    .map(|o| {
                        let mut d = disclose.clone();
                        if exp.likelihood[self.theta][o].is_positive() {
                            d.push(seq.len());
                        }
                        PurePlan::Stop { disclose: d }
                    })
                    .collect();
                (
                    PurePlan::Run {
                        experiment: FULL_DISCLOSURE.into(),
                        next,
                    },
                    Q::one(),
                )
            }
            PurePlan::Run { experiment, next } => {
                let e = self.game.menu_index(experiment).expect("validated plan");
                let lik = self.game.experiment(e).likelihood[self.theta].clone();
                let mut branches = Vec::new();
                let mut mass = Q::zero();
                for (o, branch) in next.iter().enumerate() {
                    seq.push(self.game.item_index(e, o));
                    let (b, m) = self.walk(branch, seq);
                    seq.pop();
                    mass += &lik[o] * m;
                    branches.push(b);
                }
                (
                    PurePlan::Run {
                        experiment: experiment.clone(),
                        next: branches,
                    },
                    mass,
                )
            }
        }
    }
}

/// Type `high` copies type `low`'s strategy, except that wherever `low`
/// stops at a receiver belief in `target` it runs one fully informative
/// experiment and additionally discloses it iff the state is `theta`.
pub fn imitate_and_reveal_gain(
    game: &TruncatedGame,
    profile: &StrategyProfile,
    low: u64,
    high: u64,
    theta: usize,
    target: &dyn Fn(&Belief) -> bool,
) -> Result<ImitationGain> {
    if high <= low {
        return Err(Error::PreconditionViolation(format!(
            "imitating type {high} must exceed imitated type {low}"
        )));
    }
    let resolver = ReceiverResolver::new(&game.env, profile, game.max_type)?;
    let initial = game
        .menu_index(&profile.initial)
        .ok_or_else(|| Error::InvalidInput("initial experiment not in menu".into()))?;
    let full = game
        .menu_index(FULL_DISCLOSURE)
        .expect("menu always has the fully informative experiment");
    let u = state_payoffs(&game.env)?;
    let probs = interim_probs(game, initial);
    let mut gain = Q::zero();
    let mut target_mass = Q::zero();
    let mut target_value: Option<Q> = None;
    for (k, pk) in probs.iter().enumerate() {
        if !pk.is_positive() {
            continue;
        }
        let mut solver = InterimSolver::new(game, &resolver, &profile.initial, k)
            .expect("positive-probability interim");
        let b = solver.belief(&solver.empty()).expect("interim belief");
        for comp in profile.plan_for(low, k) {
            let mut rw = Rewrite {
                game,
                resolver: &resolver,
                initial: profile.initial.clone(),
                interim: k,
                theta,
                target,
                full,
                max_value: None,
            };
            let (dev, m) = rw.walk(&comp.plan, &mut Vec::new());
            let base = solver.evaluate(&comp.plan).map_err(Error::InvalidInput)?;
            let alt = solver.evaluate(&dev).map_err(Error::InvalidInput)?;
            gain += pk * &comp.weight * (alt - base);
            target_mass += pk * &comp.weight * b.p(theta) * m;
            if let Some(v) = rw.max_value {
                if target_value.as_ref().is_none_or(|t| &v > t) {
                    target_value = Some(v);
                }
            }
        }
    }
    let target_value = target_value.unwrap_or_else(|| u[theta].clone());
    let lower_bound = &target_mass * (&u[theta] - &target_value);
    Ok(ImitationGain {
        gain,
        target_mass,
        target_value,
        lower_bound,
    })
}

/// Type count `n = ⌈2(v̄ − v̲)/(π₀(θ)(u(θ) − max ū(Π*_θ)))⌉ + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealThreshold {
    pub theta: usize,
    pub n: u64,
    #[serde(with = "serde_q")]
    pub v_max: Q,
    #[serde(with = "serde_q")]
    pub v_min: Q,
    /// `u(θ) − max ū` over commitment beliefs that put weight on `θ`.
    #[serde(with = "serde_q")]
    pub reveal_gap: Q,
    /// The scale constant `λ` has no closed form; it stays symbolic.
    pub lambda: String,
}

impl RevealThreshold {
    /// Ceiling on the type-mass tolerance: `min(ε, 1/(λ n))` for a given `λ`.
    pub fn eta_ceiling(&self, eps: &Q, lambda: &Q) -> Q {
        let bound = Q::one() / (lambda * Q::from_integer(BigInt::from(self.n)));
        if eps < &bound {
            eps.clone()
        } else {
            bound
        }
    }
}

pub fn reveal_threshold(
    env: &PayoffEnvironment,
    solution: &CommitmentSolution,
    theta: usize,
) -> Result<RevealThreshold> {
    if theta >= env.n_states() || !env.prior.p(theta).is_positive() {
        return Err(Error::PreconditionViolation(format!(
            "state {theta} must have positive prior probability"
        )));
    }
    let u = state_payoffs(env)?;
    let relevant: Vec<&Belief> = solution.beliefs().filter(|b| b.p(theta).is_positive()).collect();
    let violating: Vec<String> = relevant
        .iter()
        .filter(|b| indirect_utility_max(env, b) >= u[theta])
        .map(|b| b.display())
        .collect();
    if !violating.is_empty() {
        return Err(Error::HypothesisFail { violating });
    }
    let best = relevant
        .iter()
        .map(|b| indirect_utility_max(env, b))
        .max()
        .expect("some commitment belief puts weight on a state with positive prior");
    let v_max = env.sender_u.iter().max().unwrap().clone();
    let v_min = env.sender_u.iter().min().unwrap().clone();
    let reveal_gap = &u[theta] - best;
    let two = Q::from_integer(2.into());
    let raw = two * (&v_max - &v_min) / (env.prior.p(theta) * &reveal_gap);
    let n = u64::try_from(ceil_q(&raw) + 1).map_err(|_| {
        Error::InternalInvariantFailure("type count does not fit in 64 bits".into())
    })?;
    Ok(RevealThreshold {
        theta,
        n,
        v_max,
        v_min,
        reveal_gap,
        lambda: "2·λ₀ (no closed form)".into(),
    })
}

/// Constants around a non-credible commitment belief `π̲` with witness `θ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproximationConstants {
    pub theta: usize,
    /// Commitment mass on the open ball `B(π̲, r)`.
    #[serde(with = "serde_q")]
    pub m: Q,
    /// Best value with at most `m/2` mass on the ball: grid-only LP (lower)
    /// and the LP over all points where the payoff or ball membership changes
    /// (exact; equal to the supremum).
    #[serde(with = "serde_q")]
    pub constrained_lower: Q,
    #[serde(with = "serde_q")]
    pub constrained_upper: Q,
    #[serde(with = "serde_q")]
    pub eta: Q,
    #[serde(with = "serde_q")]
    pub eps: Q,
    /// Smallest integer strictly above the bound.
    pub n: u64,
    /// Whether `u(θ) > ū(π)` on the whole ball.
    pub reveal_beats_ball: bool,
}

fn ball_lp(env: &PayoffEnvironment, points: &[Q], center: &Q, r: &Q, cap: &Q) -> Q {
    let values: Vec<Q> = points
        .iter()
        .map(|p| indirect_utility_max(env, &Belief::two(p.clone())))
        .collect();
    let mut lp = LinearProgram::new(points.len(), values);
    lp.add(vec![Q::one(); points.len()], Op::Eq, Q::one());
    lp.add(points.to_vec(), Op::Eq, env.prior.p(1).clone());
    let inside = points
        .iter()
        .map(|p| if (p - center).abs() < *r { Q::one() } else { Q::zero() })
        .collect();
    lp.add(inside, Op::Le, cap.clone());
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => value,
        other => unreachable!("constrained persuasion LP is feasible: {other:?}"),
    }
}

/// `η = min(V̄ − sup_C E ū, m/2)`, `ε = π̲(θ)η/(2π₀(θ))`, and the type count
/// `N > 3(v̄ − v̲)/(2επ₀(θ)(u(θ) − ū(π̲))) + 2/ε`. Two states only.
pub fn approximation_constants(
    env: &PayoffEnvironment,
    solution: &CommitmentSolution,
    low: &Belief,
    r: &Q,
    grid: u64,
) -> Result<ApproximationConstants> {
    let breakpoints = two_state_breakpoints(env)?;
    let verdict = classify_credibility(env, low)?;
    let theta = verdict.witness.ok_or_else(|| {
        Error::PreconditionViolation(format!("{} is credible", low.display()))
    })?;
    let two = Q::from_integer(2.into());
    if !r.is_positive() || low.p(theta) - r <= low.p(theta) / &two {
        return Err(Error::BadRadius(format!(
            "need 0 < r < {} so that the ball keeps more than half of π̲(θ)",
            low.p(theta) / &two
        )));
    }
    let m: Q = solution
        .experiment
        .support
        .iter()
        .filter(|(b, _)| &sup_distance(b.probs(), low.probs()) < r)
        .map(|(_, w)| w.clone())
        .sum();
    if !m.is_positive() {
        return Err(Error::PreconditionViolation(
            "the commitment experiment puts no mass on the ball".into(),
        ));
    }
    let center = low.p(1).clone();
    let cap = &m / &two;
    let grid_points: Vec<Q> = (0..=grid.max(1))
        .map(|k| Q::new(BigInt::from(k), BigInt::from(grid.max(1))))
        .collect();
    let constrained_lower = ball_lp(env, &grid_points, &center, r, &cap);
    let mut exact_points = grid_points;
    exact_points.extend(breakpoints.iter().cloned());
    for edge in [&center - r, &center + r] {
        if !edge.is_negative() && edge <= Q::one() {
            exact_points.push(edge);
        }
    }
    exact_points.sort();
    exact_points.dedup();
    let constrained_upper = ball_lp(env, &exact_points, &center, r, &cap);
    let eta = (&solution.value - &constrained_upper).min(cap.clone());
    let pi0 = env.prior.p(theta);
    let eps = low.p(theta) / (&two * pi0) * &eta;
    let u = state_payoffs(env)?;
    let v_max = env.sender_u.iter().max().unwrap();
    let v_min = env.sender_u.iter().min().unwrap();
    let bound = Q::from_integer(3.into()) * (v_max - v_min)
        / (&two * &eps * pi0 * (&u[theta] - indirect_utility_max(env, low)))
        + &two / &eps;
    let n = u64::try_from(floor_q(&bound) + 1).map_err(|_| {
        Error::InternalInvariantFailure("type count does not fit in 64 bits".into())
    })?;
    // Sup of ū over the open ball: breakpoints inside it and points between
    // consecutive candidates.
    let mut inner: Vec<Q> = exact_points
        .iter()
        .filter(|p| (*p - &center).abs() < *r)
        .cloned()
        .collect();
    inner.push(&center - r);
    inner.push(&center + r);
    inner.sort();
    let mut probes: Vec<Q> = inner.clone();
    probes.extend(inner.windows(2).map(|w| (&w[0] + &w[1]) / &two));
    let reveal_beats_ball = probes
        .iter()
        .filter(|p| (*p - &center).abs() < *r && !p.is_negative() && *p <= &Q::one())
        .all(|p| indirect_utility_max(env, &Belief::two(p.clone())) < u[theta]);
    Ok(ApproximationConstants {
        theta,
        m,
        constrained_lower,
        constrained_upper,
        eta,
        eps,
        n,
        reveal_beats_ball,
    })
}

/// Membership in `{p : |p(t) − 1/N| < 1/(2N) for t < N, p(t ≥ N) < 1/(2N)}`.
pub fn in_uniform_neighborhood(p: &TypeDistribution, n: u64) -> bool {
    if n == 0 {
        return false;
    }
    let nq = Q::from_integer(BigInt::from(n));
    let center = Q::one() / &nq;
    let radius = Q::one() / (Q::from_integer(2.into()) * &nq);
    (0..n).all(|t| (p.prob(t) - &center).abs() < radius) && p.mass_at_least(n) < radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concavify::commitment_solve;
    use crate::equilibrium::commitment_candidates;
    use crate::library;
    use crate::rational::q;
    use crate::verifier::{game_for_profile, DEFAULT_NODE_BUDGET};

    #[test]
    fn reveal_threshold_values() {
        let env = library::three_action(q(1, 6));
        let sol = commitment_solve(&env).unwrap();
        let t = reveal_threshold(&env, &sol, 1).unwrap();
        assert_eq!(t.n, 37);
        assert_eq!(t.reveal_gap, q(1, 1));
        let env = library::four_action(q(1, 8));
        let sol = commitment_solve(&env).unwrap();
        assert_eq!(reveal_threshold(&env, &sol, 1).unwrap().n, 39);
    }

    #[test]
    fn reveal_threshold_hypothesis_failure() {
        let env = library::three_action(q(1, 2));
        let sol = commitment_solve(&env).unwrap();
        match reveal_threshold(&env, &sol, 1) {
            Err(Error::HypothesisFail { violating }) => assert_eq!(violating.len(), 1),
            other => panic!("expected hypothesis failure, got {other:?}"),
        }
    }

    #[test]
    fn approximation_constants_three_action() {
        let env = library::three_action(q(1, 2));
        let sol = commitment_solve(&env).unwrap();
        let c = approximation_constants(&env, &sol, &Belief::two(q(1, 3)), &q(1, 12), 100).unwrap();
        assert_eq!(c.m, q(1, 2));
        // A quarter of the mass may stay at 1/3; the rest splits 5/12 and 2/3.
        assert_eq!(c.constrained_upper, q(29, 12));
        assert!(c.constrained_lower <= c.constrained_upper);
        assert_eq!(c.eta, q(1, 12));
        assert!(c.eta <= q(1, 4));
        assert!(c.reveal_beats_ball);
        assert!(matches!(
            approximation_constants(&env, &sol, &Belief::two(q(1, 3)), &q(1, 5), 100),
            Err(Error::BadRadius(_))
        ));
    }

    #[test]
    fn uniform_neighborhood_membership() {
        let p = TypeDistribution::finite((0..4).map(|t| (t, q(1, 4)))).unwrap();
        assert!(in_uniform_neighborhood(&p, 4));
        assert!(!in_uniform_neighborhood(&p, 3));
        let skew = TypeDistribution::finite([(0, q(1, 2)), (1, q(1, 6)), (2, q(1, 6)), (3, q(1, 6))]).unwrap();
        assert!(!in_uniform_neighborhood(&skew, 4));
    }

    #[test]
    fn imitation_gain_on_low_prior_example() {
        let (env, p) = library::three_action_low_prior();
        let sol = commitment_solve(&env).unwrap();
        let profile = commitment_candidates(&env, &sol).unwrap().remove(0);
        let game = game_for_profile(&env, &p, &profile, 1, DEFAULT_NODE_BUDGET).unwrap();
        let at_third = |b: &Belief| b.p(1) == &q(1, 3);
        let g = imitate_and_reveal_gain(&game, &profile, 0, 1, 1, &at_third).unwrap();
        // Interim 1/3 has probability 1/2; θ1 has probability 1/3 there.
        assert_eq!(g.gain, q(1, 6));
        assert_eq!(g.target_mass, q(1, 6));
        assert!(g.gain >= g.lower_bound);
        let none = |_: &Belief| false;
        let g0 = imitate_and_reveal_gain(&game, &profile, 0, 1, 1, &none).unwrap();
        assert!(g0.gain.is_zero());
    }
}
