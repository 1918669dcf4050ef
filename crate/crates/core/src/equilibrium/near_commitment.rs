//! Near-commitment equilibrium when one type `n` carries almost all mass.
//!
//! The initial experiment is the perturbed commitment experiment. After each
//! interim belief the top type `n` has an outside option worth `u*`:
//! - when `n` is the highest type, its best plan against a receiver who is
//!   skeptical except after `n` disclosures (where beliefs are naive);
//! - otherwise, `n` uninformative experiments disclosed in full, which the
//!   receiver reads as the interim belief.
//!
//! Types below `n` and the top type then play the disclosure subgame solved
//! in [`super::threshold`]. Off path the receiver is skeptical.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::threshold::{
    classify_case, monotone_intersection, solve_low_types_mix, solve_top_type_mix, MixingCase,
    SortedInterim, SubgameConstruction,
};
use super::silence::{silence_fixed_point, SilenceFixedPoint};
use super::{attach_on_path_receiver, mixture, pure, reveal_plan, uninformative_then, SIGMA_STAR};
use crate::concavify::{classify_credibility, commitment_solve, perturb_experiment, Perturbation};
use crate::error::{Error, Result};
use crate::model::{
    sender_preferred_action, state_payoffs, Belief, Experiment, PayoffEnvironment,
    TypeDistribution,
};
use crate::profile::{
    History, NamedExperiment, OffPathBelief, OffPathPolicy, PlanEntry, PurePlan, ReceiverResolver,
    ReceiverRule, StrategyProfile, TieRule, TypeRange, WeightedPlan,
};
use crate::rational::Q;
use crate::verifier::{build_truncated_game, ex_ante_payoff, InterimSolver, DEFAULT_NODE_BUDGET};

/// How an interim belief was handled.
#[derive(Clone, Debug, PartialEq)]
pub enum InterimTreatment {
    /// Degenerate belief: nothing left to disclose.
    Degenerate,
    /// Credible belief: no additional experiments below the top type.
    Credible,
    /// Threshold disclosure with low types and the top type's outside option.
    Subgame(Box<SubgameConstruction>),
    /// Top type is the highest type: silence payoff solved as a fixed point
    /// against all of the top type's plans.
    SilenceFixedPoint(Box<SilenceFixedPoint>),
    /// Low types play a threshold rule among themselves; the top type takes
    /// its outside option (it never wants to reveal, or revealing everything
    /// beats it).
    Pooling { tau: usize, beta: Q, top_joins: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterimReport {
    pub interim: usize,
    pub belief: Belief,
    pub probability: Q,
    /// Whether the belief is a perturbed commitment belief.
    pub perturbed: bool,
    /// Top type's outside-option value `u*`.
    pub outside_value: Q,
    pub treatment: InterimTreatment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NearCommitment {
    pub profile: StrategyProfile,
    pub top_type: u64,
    /// Whether the top type is also the highest type with positive mass.
    pub top_is_highest: bool,
    pub perturbation: Perturbation,
    pub interims: Vec<InterimReport>,
    /// Type cap used to fill the receiver table and evaluate the payoff.
    pub cap: u64,
    /// Exact ex-ante sender payoff (types up to `cap`, renormalized).
    pub payoff: Q,
    pub commitment_value: Q,
    pub gap: Q,
    /// Guaranteed gap bound `(V̄ − u_min)(1 − p(n) + p(n)η)`.
    pub delta: Q,
}

fn off_path() -> OffPathPolicy {
    OffPathPolicy {
        belief: OffPathBelief::SkepticalWorst,
        ties: TieRule::SenderPreferred,
    }
}

/// Type with mass above `1 − ε` (the most likely one if several qualify).
pub fn dominant_type(p: &TypeDistribution, eps: &Q) -> Result<u64> {
    let cap = p.max_support().unwrap_or_else(|| {
        let mut t = 0;
        while p.tail_mass_above(t) >= Q::one() - eps {
            t += 1;
        }
        t
    });
    p.support_up_to(cap)
        .into_iter()
        .filter(|&t| p.prob(t) > Q::one() - eps)
        .max_by(|&a, &b| p.prob(a).cmp(&p.prob(b)).then(b.cmp(&a)))
        .ok_or_else(|| {
            Error::PreconditionViolation(format!("no type has probability above 1 - {eps}"))
        })
}

/// Builds the near-commitment profile for perturbation size `eps`.
pub fn construct_near_commitment_eq(
    env: &PayoffEnvironment,
    p: &TypeDistribution,
    eps: &Q,
) -> Result<NearCommitment> {
    env.validate()?;
    p.validate()?;
    let n = dominant_type(p, eps)?;
    let solution = commitment_solve(env)?;
    let perturbation = perturb_experiment(env, &solution, eps)?;
    let initial = Experiment::from_posteriors(&env.prior, &perturbation.experiment)?;
    let state_u = state_payoffs(env)?;
    let top_is_highest = p.max_support() == Some(n);
    let cap = p.max_support().unwrap_or(n + 1);
    let p0 = p.prob(0);
    let p_low: Q = (1..n).map(|t| p.prob(t)).sum();
    let p_top = p.prob(n);

    let base_profile = StrategyProfile {
        initial: SIGMA_STAR.into(),
        experiments: vec![NamedExperiment {
            name: SIGMA_STAR.into(),
            experiment: initial,
        }],
        plans: vec![],
        receiver: ReceiverRule {
            entries: vec![],
            off_path: off_path(),
        },
    };

    // The top type's best plan when only forced-naive and degenerate
    // disclosures are believed.
    let forced_game = if top_is_highest && n > 0 {
        Some(build_truncated_game(
            env,
            &TypeDistribution::degenerate(n),
            &base_profile.menu(env),
            n,
            DEFAULT_NODE_BUDGET,
        )?)
    } else {
        None
    };
    let forced_resolver = match &forced_game {
        Some(g) => Some(ReceiverResolver::new(env, &base_profile, g.max_type)?),
        None => None,
    };

    let perturbed_beliefs: Vec<&Belief> =
        perturbation.points.iter().map(|pt| &pt.perturbed).collect();
    let mut profile = base_profile.clone();
    let mut interims = Vec::new();
    let mut silence_actions: BTreeMap<History, Vec<(usize, Q)>> = BTreeMap::new();
    let keep_all: Vec<usize> = (0..n as usize).collect();
    let outside_nd = uninformative_then(n as usize, PurePlan::Stop { disclose: keep_all.clone() });

    for (k, (belief, prob)) in perturbation.experiment.support.iter().enumerate() {
        let perturbed = perturbed_beliefs.contains(&belief);
        let mut plans: Vec<(TypeRange, Vec<WeightedPlan>)> = Vec::new();
        let (outside_value, outside_plan) = match (&forced_game, &forced_resolver) {
            (Some(g), Some(r)) => {
                let mut solver = InterimSolver::new(g, r, SIGMA_STAR, k)
                    .ok_or_else(|| Error::InternalInvariantFailure("interim with zero mass".into()))?
                    .eager();
                let empty = solver.empty();
                let v = solver.value(&empty, n).0;
                (v, solver.optimal_plan(n))
            }
            _ => (
                env.sender_u[sender_preferred_action(env, belief)].clone(),
                outside_nd.clone(),
            ),
        };
        let sorted = SortedInterim::new(belief, &state_u);
        let ks = sorted.k();
        let low_range = (n > 1).then(|| TypeRange::between(1, n - 1));
        let treatment = if ks == 1 || n == 0 {
            InterimTreatment::Degenerate
        } else if let Some(g) = &forced_game {
            let fp = silence_fixed_point(g, &base_profile, k, belief, &state_u, &p0, &p_low, &p_top)?;
            if let Some(r) = &low_range {
                let low = fp
                    .low
                    .iter()
                    .map(|(w, flags)| (w.clone(), reveal_plan(flags, 0, &[])))
                    .collect();
                plans.push((r.clone(), mixture(low)));
            }
            plans.push((TypeRange::single(n), mixture(fp.top.clone())));
            if fp.belief.is_some() {
                silence_actions.insert(History::new(SIGMA_STAR, k, vec![]), fp.action.clone());
            }
            InterimTreatment::SilenceFixedPoint(Box::new(fp))
        } else if classify_credibility(env, belief)?.credible {
            if top_is_highest
                && outside_value > env.sender_u[sender_preferred_action(env, belief)]
            {
                plans.push((TypeRange::single(n), pure(outside_plan.clone())));
            }
            InterimTreatment::Credible
        } else if outside_value >= sorted.u[0] || outside_value <= sorted.u[ks - 1] {
            // Threshold rule among the disclosing types; the top type joins
            // only when revealing everything beats its outside option.
            let top_joins = outside_value <= sorted.u[ks - 1];
            let w_disc = if top_joins { &p_low + &p_top } else { p_low.clone() };
            let hit = monotone_intersection(env, &sorted, &p0, &w_disc, 0)?;
            let rule = threshold_mix(&sorted, hit.tau, &hit.beta);
            if let Some(r) = &low_range {
                plans.push((r.clone(), rule.clone()));
            }
            if top_joins {
                plans.push((TypeRange::single(n), rule));
            } else {
                plans.push((TypeRange::single(n), pure(outside_plan.clone())));
            }
            if hit.belief.is_some() {
                silence_actions.insert(History::new(SIGMA_STAR, k, vec![]), hit.action.clone());
            }
            InterimTreatment::Pooling {
                tau: hit.tau,
                beta: hit.beta,
                top_joins,
            }
        } else {
            let sub = subgame(env, &sorted, &outside_value, &p0, &p_low, &p_top)?;
            let top = match sub.case {
                MixingCase::TopTypeMixes => mixture(vec![
                    (sub.top_outside_weight.clone(), outside_plan.clone()),
                    (
                        Q::one() - &sub.top_outside_weight,
                        reveal_plan(&sorted.reveal_flags(sub.index), 0, &[]),
                    ),
                ]),
                MixingCase::LowTypesMix => pure(outside_plan.clone()),
            };
            if let Some(r) = &low_range {
                plans.push((r.clone(), threshold_mix(&sorted, sub.low_tau, &sub.low_beta)));
            }
            plans.push((TypeRange::single(n), top));
            if sub.silence_belief.is_some() {
                silence_actions
                    .insert(History::new(SIGMA_STAR, k, vec![]), sub.silence_action.clone());
            }
            InterimTreatment::Subgame(Box::new(sub))
        };
        if !top_is_highest && !matches!(treatment, InterimTreatment::Degenerate) {
            // Higher types follow the outside option, then run a fully
            // informative experiment and reveal states that beat `u*`.
            let flags: Vec<bool> = (0..env.n_states())
                .map(|s| state_u[s] > outside_value)
                .collect();
            plans.push((
                TypeRange::at_least(n + 1),
                pure(uninformative_then(
                    n as usize,
                    reveal_plan(&flags, n as usize, &keep_all),
                )),
            ));
        }
        for (types, components) in plans {
            profile.plans.push(PlanEntry {
                types,
                interim: k,
                components,
            });
        }
        interims.push(InterimReport {
            interim: k,
            belief: belief.clone(),
            probability: prob.clone(),
            perturbed,
            outside_value,
            treatment,
        });
    }

    attach_on_path_receiver(env, p, &mut profile, cap, |h, b| {
        silence_actions
            .get(h)
            .cloned()
            .unwrap_or_else(|| vec![(sender_preferred_action(env, b), Q::one())])
    })?;
    if p.is_bounded() {
        check_silence_beliefs(&profile, &interims)?;
    }

    let game = build_truncated_game(env, p, &profile.menu(env), cap, DEFAULT_NODE_BUDGET)?;
    let payoff = ex_ante_payoff(&game, &profile)?;
    let worst = env.sender_u.iter().min().cloned().unwrap_or_else(Q::zero);
    let eta = &perturbation.eta;
    let delta =
        (&solution.value - &worst) * (Q::one() - &p_top + &p_top * eta);
    Ok(NearCommitment {
        gap: &solution.value - &payoff,
        commitment_value: solution.value,
        profile,
        top_type: n,
        top_is_highest,
        perturbation,
        interims,
        cap,
        payoff,
        delta,
    })
}

fn subgame(
    env: &PayoffEnvironment,
    sorted: &SortedInterim,
    u_star: &Q,
    p0: &Q,
    p_low: &Q,
    p_top: &Q,
) -> Result<SubgameConstruction> {
    let thresholds = super::threshold::threshold_sequence(&sorted.pi, &sorted.u, u_star)?;
    let i = super::threshold::find_disclosure_index(&thresholds, &sorted.u)?;
    match classify_case(env, sorted, u_star, i, p0, p_low).0 {
        MixingCase::TopTypeMixes => solve_top_type_mix(env, sorted, u_star, p0, p_low, p_top),
        MixingCase::LowTypesMix => solve_low_types_mix(env, sorted, u_star, p0, p_low),
    }
}

/// Reveal the first `tau` states, and the next one with probability `beta`.
fn threshold_mix(sorted: &SortedInterim, tau: usize, beta: &Q) -> Vec<WeightedPlan> {
    let mut parts = vec![(
        Q::one() - beta,
        reveal_plan(&sorted.reveal_flags(tau), 0, &[]),
    )];
    if beta.is_positive() {
        parts.push((
            beta.clone(),
            reveal_plan(&sorted.reveal_flags(tau + 1), 0, &[]),
        ));
    }
    mixture(parts)
}

/// The Bayes belief after silence must match the one the subgame solved for.
fn check_silence_beliefs(profile: &StrategyProfile, interims: &[InterimReport]) -> Result<()> {
    for r in interims {
        let expected = match &r.treatment {
            InterimTreatment::Subgame(sub) => sub.silence_belief.clone(),
            InterimTreatment::SilenceFixedPoint(fp) => fp.belief.clone(),
            _ => continue,
        };
        let history = History::new(SIGMA_STAR, r.interim, vec![]);
        let stated = profile
            .receiver
            .entries
            .iter()
            .find(|e| e.history == history)
            .map(|e| e.belief.clone());
        if stated != expected {
            return Err(Error::InternalInvariantFailure(format!(
                "silence belief after interim {} is {:?}, subgame solved for {:?}",
                r.interim,
                stated.map(|b| b.display()),
                expected.map(|b| b.display())
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::rational::q;
    use crate::verifier::{check_pebe, game_for_profile};

    fn certified(eps: Q) -> NearCommitment {
        let (env, p) = library::four_action_near_commitment();
        let nc = construct_near_commitment_eq(&env, &p, &eps).unwrap();
        let game = game_for_profile(&env, &p, &nc.profile, nc.cap, DEFAULT_NODE_BUDGET).unwrap();
        let cert = check_pebe(&game, &nc.profile).unwrap();
        assert!(cert.passed(), "{}", cert.explain(&game));
        assert_eq!(cert.ex_ante_payoff, nc.payoff);
        assert!(nc.gap <= nc.delta);
        nc
    }

    #[test]
    fn near_commitment_passes_at_one_tenth() {
        let nc = certified(q(1, 10));
        assert_eq!(nc.top_type, 3);
        assert!(nc.top_is_highest);
        assert_eq!(nc.commitment_value, q(5, 2));
    }

    #[test]
    fn gap_shrinks_along_epsilon_ladder() {
        let gaps: Vec<Q> = [q(1, 4), q(1, 8), q(1, 16)]
            .into_iter()
            .map(|e| certified(e).gap)
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn dominant_type_needs_enough_mass() {
        let p = TypeDistribution::finite([(0, q(1, 2)), (2, q(1, 2))]).unwrap();
        assert!(dominant_type(&p, &q(1, 10)).is_err());
        assert_eq!(dominant_type(&p, &q(3, 5)).unwrap(), 0);
    }
}
