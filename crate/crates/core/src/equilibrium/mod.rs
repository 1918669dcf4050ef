//! Equilibrium constructions and the building blocks they share: plan
//! templates and the receiver table filled in by Bayes' rule along the path.

pub mod near_commitment;
pub mod silence;
pub mod threshold;

use num_traits::{One, Signed, Zero};

use crate::concavify::{classify_credibility, CommitmentSolution};
use crate::error::{Error, Result};
use crate::model::{
    full_disclosure_payoff, is_monotone, sender_preferred_action, Belief, Experiment,
    PayoffEnvironment, PosteriorDistribution, TypeDistribution,
};
use crate::profile::{
    tie_action, History, NamedExperiment, OffPathBelief, OffPathPolicy, PlanEntry, PurePlan,
    ReceiverEntry, ReceiverRule, StrategyProfile, TieRule, TypeRange, WeightedPlan,
    FULL_DISCLOSURE, UNINFORMATIVE,
};
use crate::rational::{q, Q};
use crate::verifier::{build_truncated_game, path_masses, DEFAULT_NODE_BUDGET};

pub use near_commitment::{construct_near_commitment_eq, NearCommitment};
pub use threshold::{
    classify_case, find_disclosure_index, mixed_threshold, solve_low_types_mix,
    solve_top_type_mix, threshold_sequence, MixingCase, SortedInterim, SubgameConstruction,
};

pub const SIGMA_STAR: &str = "sigma-star";

/// Run the fully informative experiment and disclose its outcome exactly in
/// the states flagged by `reveal`. `offset` is the number of experiments
/// already conducted; `keep` lists earlier positions disclosed regardless.
pub fn reveal_plan(reveal: &[bool], offset: usize, keep: &[usize]) -> PurePlan {
    PurePlan::Run {
        experiment: FULL_DISCLOSURE.into(),
        next: reveal
            .iter()
            .map(|&r| {
                let mut disclose = keep.to_vec();
                if r {
                    disclose.push(offset);
                }
                PurePlan::Stop { disclose }
            })
            .collect(),
    }
}

/// Run `n` uninformative experiments, then continue with `tail`.
pub fn uninformative_then(n: usize, tail: PurePlan) -> PurePlan {
    (0..n).fold(tail, |acc, _| PurePlan::Run {
        experiment: UNINFORMATIVE.into(),
        next: vec![acc],
    })
}

pub fn pure(plan: PurePlan) -> Vec<WeightedPlan> {
    vec![WeightedPlan {
        weight: Q::one(),
        plan,
    }]
}

/// Mixture over plans; zero-weight components are dropped.
pub fn mixture(parts: Vec<(Q, PurePlan)>) -> Vec<WeightedPlan> {
    parts
        .into_iter()
        .filter(|(w, _)| w.is_positive())
        .map(|(weight, plan)| WeightedPlan { weight, plan })
        .collect()
}

/// Replaces the receiver table by Bayes posteriors at every history the
/// profile reaches (types up to `cap`); `choose` picks the action.
pub fn attach_on_path_receiver(
    env: &PayoffEnvironment,
    p: &TypeDistribution,
    profile: &mut StrategyProfile,
    cap: u64,
    mut choose: impl FnMut(&History, &Belief) -> Vec<(usize, Q)>,
) -> Result<()> {
    let game = build_truncated_game(env, p, &profile.menu(env), cap, DEFAULT_NODE_BUDGET)?;
    let paths = path_masses(&game, profile)?;
    profile.receiver.entries = paths
        .into_iter()
        .filter(|(_, m)| m.total().is_positive())
        .map(|(history, mass)| {
            let belief = mass.belief();
            let action = choose(&history, &belief);
            ReceiverEntry {
                types: Some(mass.type_belief()),
                history,
                belief,
                action,
            }
        })
        .collect();
    Ok(())
}

/// Pure action chosen by a tie rule.
pub fn tie_choice(env: &PayoffEnvironment, ties: TieRule) -> impl Fn(&History, &Belief) -> Vec<(usize, Q)> + '_ {
    move |_, b| vec![(tie_action(env, b, ties), Q::one())]
}

fn sigma_star_experiment(env: &PayoffEnvironment, dist: &PosteriorDistribution) -> Result<NamedExperiment> {
    Ok(NamedExperiment {
        name: SIGMA_STAR.into(),
        experiment: Experiment::from_posteriors(&env.prior, dist)?,
    })
}

/// The commitment experiment as the initial experiment, no additional
/// experiments, naive beliefs everywhere and sender-preferred tie-breaking.
pub fn construct_credible_eq(
    env: &PayoffEnvironment,
    solution: &CommitmentSolution,
) -> Result<StrategyProfile> {
    let mut non_credible = Vec::new();
    for b in solution.beliefs() {
        if !classify_credibility(env, b)?.credible {
            non_credible.push(b.display());
        }
    }
    if !non_credible.is_empty() {
        return Err(Error::PreconditionViolation(format!(
            "non-credible induced beliefs: {}",
            non_credible.join(", ")
        )));
    }
    if is_monotone(env)?.is_none() {
        return Err(Error::PreconditionViolation(
            "environment is not monotone".into(),
        ));
    }
    let mut profile = StrategyProfile {
        initial: SIGMA_STAR.into(),
        experiments: vec![sigma_star_experiment(env, &solution.experiment)?],
        plans: vec![],
        receiver: ReceiverRule {
            entries: vec![],
            off_path: OffPathPolicy {
                belief: OffPathBelief::Naive,
                ties: TieRule::SenderPreferred,
            },
        },
    };
    let p = TypeDistribution::degenerate(0);
    attach_on_path_receiver(env, &p, &mut profile, 0, |_, b| {
        vec![(sender_preferred_action(env, b), Q::one())]
    })?;
    for e in &mut profile.receiver.entries {
        e.types = None;
    }
    Ok(profile)
}

/// Fully informative initial experiment with skeptical off-path beliefs.
/// Requires infinitely many types. Returns the profile and its payoff.
pub fn construct_full_disclosure_eq(
    env: &PayoffEnvironment,
    p: &TypeDistribution,
) -> Result<(StrategyProfile, Q)> {
    if p.is_bounded() {
        return Err(Error::PreconditionViolation(
            "full-disclosure construction needs a type distribution with unbounded support".into(),
        ));
    }
    let mut profile = StrategyProfile {
        initial: FULL_DISCLOSURE.into(),
        experiments: vec![],
        plans: vec![],
        receiver: ReceiverRule {
            entries: vec![],
            off_path: OffPathPolicy {
                belief: OffPathBelief::SkepticalWorst,
                ties: TieRule::SenderWorst,
            },
        },
    };
    attach_on_path_receiver(env, &TypeDistribution::degenerate(0), &mut profile, 0, |_, b| {
        vec![(sender_preferred_action(env, b), Q::one())]
    })?;
    for e in &mut profile.receiver.entries {
        e.types = None;
    }
    Ok((profile, full_disclosure_payoff(env)?))
}

pub const REPEATED_TEST: &str = "repeated-test";

/// Report of the repeated-test equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub struct RepeatedTestReport {
    pub profile: StrategyProfile,
    /// Posterior after a disclosed high outcome.
    pub disclosure_posterior: Q,
    /// Posterior when nothing is disclosed.
    pub silence_posterior: Q,
    /// `V_t` for `t = 0..=cap`.
    pub type_values: Vec<Q>,
    /// Per type `t >= 1`: on-path payoff minus the best one-test deviation.
    pub deviation_slack: Vec<Q>,
}

/// Repeated binary test on the three-action, two-state environment at prior
/// `1/2` with types `p(0) = 1/3`, `p(t) = (1/3)(1/2)^(t-1)`.
///
/// Initial experiment uninformative; type `t` runs the test `low | θ0` w.p.
/// `2/3`, `high` otherwise, up to `t` times and discloses only the first high
/// outcome. Plans are written for types up to `cap`.
pub fn repeated_test_equilibrium(
    env: &PayoffEnvironment,
    p: &TypeDistribution,
    cap: u64,
) -> Result<RepeatedTestReport> {
    let reference_env = crate::library::three_action(q(1, 2));
    if env.sender_u != reference_env.sender_u
        || env.receiver_u != reference_env.receiver_u
        || env.prior != reference_env.prior
    {
        return Err(Error::PreconditionViolation(
            "repeated-test construction needs the three-action environment at prior 1/2".into(),
        ));
    }
    let reference_p = crate::library::geometric_types();
    if (0..=cap.max(8)).any(|t| p.prob(t) != reference_p.prob(t)) || p.geometric != reference_p.geometric {
        return Err(Error::PreconditionViolation(
            "repeated-test construction needs p(0) = 1/3 and p(t) = (1/3)(1/2)^(t-1)".into(),
        ));
    }
    let two_thirds = q(2, 3);
    let test = Experiment::new(
        vec!["low".into(), "high".into()],
        vec![vec![q(2, 3), q(1, 3)], vec![Q::zero(), Q::one()]],
    )?;
    // Mass reaching silence in each state: θ1 always produces high on the
    // first run, θ0 produces t lows with probability (2/3)^t.
    let half = q(1, 2);
    let silence_0 = &half * p.power_sum(&two_thirds, 0);
    let silence_1 = &half * p.prob(0);
    let disclose_0 = &half * (p.mass_at_least(1) - p.power_sum(&two_thirds, 1));
    let disclose_1 = &half * p.mass_at_least(1);
    let silence_posterior = &silence_1 / (&silence_0 + &silence_1);
    let disclosure_posterior = &disclose_1 / (&disclose_0 + &disclose_1);

    let mut plans = Vec::new();
    for t in 1..=cap {
        plans.push(PlanEntry {
            types: TypeRange::single(t),
            interim: 0,
            components: pure(test_chain(t as usize, 0)),
        });
    }
    let silence = Belief::two(silence_posterior.clone());
    let disclosed = Belief::two(disclosure_posterior.clone());
    let silence_action = sender_preferred_action(env, &silence);
    let disclosed_action = sender_preferred_action(env, &disclosed);
    let profile = StrategyProfile {
        initial: UNINFORMATIVE.into(),
        experiments: vec![NamedExperiment {
            name: REPEATED_TEST.into(),
            experiment: test,
        }],
        plans,
        receiver: ReceiverRule {
            entries: vec![
                ReceiverEntry {
                    history: History::new(UNINFORMATIVE, 0, vec![]),
                    belief: silence,
                    types: None,
                    action: vec![(silence_action, Q::one())],
                },
                ReceiverEntry {
                    history: History::new(UNINFORMATIVE, 0, vec![(REPEATED_TEST.into(), 1)]),
                    belief: disclosed,
                    types: None,
                    action: vec![(disclosed_action, Q::one())],
                },
            ],
            off_path: OffPathPolicy {
                belief: OffPathBelief::SkepticalWorst,
                ties: TieRule::SenderPreferred,
            },
        },
    };
    let high = env.sender_u[disclosed_action].clone();
    let low = env.sender_u[silence_action].clone();
    let mut type_values = vec![low.clone()];
    let mut deviation_slack = Vec::new();
    for t in 1..=cap {
        // V_t = (1 − (2/3)^(t−1))·high + (2/3)^(t−1)·low, conditional on θ0;
        // ex ante the state is θ1 with probability 1/2.
        let stay = crate::rational::pow_q(&two_thirds, t - 1);
        let v = (Q::one() - &stay) * &high + &stay * &low;
        let prev = type_values[(t - 1) as usize].clone();
        let on_path = &two_thirds * &high + q(1, 3) * &prev;
        let deviation = &half * &high + &half * &prev;
        deviation_slack.push(on_path - deviation);
        type_values.push(v);
    }
    Ok(RepeatedTestReport {
        profile,
        disclosure_posterior,
        silence_posterior,
        type_values,
        deviation_slack,
    })
}

fn test_chain(remaining: usize, position: usize) -> PurePlan {
    if remaining == 0 {
        return PurePlan::stop();
    }
    PurePlan::Run {
        experiment: REPEATED_TEST.into(),
        next: vec![
            test_chain(remaining - 1, position + 1),
            PurePlan::Stop {
                disclose: vec![position],
            },
        ],
    }
}

/// Two-type partial-disclosure equilibrium on the four-action environment
/// at prior `3/8`: type 1 runs a test that is high for sure in θ1 and with
/// probability `3/5` in θ0, and discloses only a high outcome. Beliefs are
/// `1/2` after a disclosed high and `1/4` otherwise.
pub fn single_test_disclosure_eq(env: &PayoffEnvironment, p: &TypeDistribution) -> Result<StrategyProfile> {
    let test = Experiment::new(
        vec!["low".into(), "high".into()],
        vec![vec![q(2, 5), q(3, 5)], vec![Q::zero(), Q::one()]],
    )?;
    let mut profile = StrategyProfile {
        initial: UNINFORMATIVE.into(),
        experiments: vec![NamedExperiment {
            name: "high-test".into(),
            experiment: test,
        }],
        plans: vec![PlanEntry {
            types: TypeRange::at_least(1),
            interim: 0,
            components: pure(PurePlan::Run {
                experiment: "high-test".into(),
                next: vec![PurePlan::stop(), PurePlan::Stop { disclose: vec![0] }],
            }),
        }],
        receiver: ReceiverRule {
            entries: vec![],
            off_path: OffPathPolicy {
                belief: OffPathBelief::Naive,
                ties: TieRule::SenderPreferred,
            },
        },
    };
    let cap = p.max_support().unwrap_or(1);
    attach_on_path_receiver(env, p, &mut profile, cap, |_, b| {
        vec![(sender_preferred_action(env, b), Q::one())]
    })?;
    Ok(profile)
}

/// Profiles that induce the commitment beliefs through the initial
/// experiment and stop, under each off-path policy.
pub fn commitment_candidates(
    env: &PayoffEnvironment,
    solution: &CommitmentSolution,
) -> Result<Vec<StrategyProfile>> {
    let mut out = Vec::new();
    for belief in [OffPathBelief::Naive, OffPathBelief::SkepticalWorst] {
        for ties in [TieRule::SenderPreferred, TieRule::SenderWorst] {
            let mut profile = StrategyProfile {
                initial: SIGMA_STAR.into(),
                experiments: vec![sigma_star_experiment(env, &solution.experiment)?],
                plans: vec![],
                receiver: ReceiverRule {
                    entries: vec![],
                    off_path: OffPathPolicy { belief, ties },
                },
            };
            attach_on_path_receiver(env, &TypeDistribution::degenerate(0), &mut profile, 0, |_, b| {
                vec![(sender_preferred_action(env, b), Q::one())]
            })?;
            for e in &mut profile.receiver.entries {
                e.types = None;
            }
            out.push(profile);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concavify::commitment_solve;
    use crate::library;
    use crate::verifier::{check_pebe, ex_ante_payoff, game_for_profile};

    fn certify(env: &PayoffEnvironment, p: &TypeDistribution, profile: &StrategyProfile, cap: u64) -> crate::verifier::EquilibriumCertificate {
        let game = game_for_profile(env, p, profile, cap, DEFAULT_NODE_BUDGET).unwrap();
        let cert = check_pebe(&game, profile).unwrap();
        if !cert.passed() {
            eprintln!("{:?}\n{}", cert.violations, cert.explain(&game));
        }
        cert
    }

    #[test]
    fn prosecutor_credible_profile_passes() {
        let env = library::prosecutor();
        let sol = commitment_solve(&env).unwrap();
        assert_eq!(sol.value, q(3, 5));
        let profile = construct_credible_eq(&env, &sol).unwrap();
        let p = library::prosecutor_types();
        let cert = certify(&env, &p, &profile, 2);
        assert!(cert.passed());
        assert_eq!(cert.ex_ante_payoff, q(3, 5));
    }

    #[test]
    fn commitment_candidates_fail_on_low_prior() {
        let (env, p) = library::three_action_low_prior();
        let sol = commitment_solve(&env).unwrap();
        for profile in commitment_candidates(&env, &sol).unwrap() {
            let cert = certify(&env, &p, &profile, 1);
            assert!(!cert.passed());
            assert_eq!(cert.worst_deviation.as_ref().unwrap().gain, q(1, 3));
        }
    }

    #[test]
    fn single_test_profile_passes() {
        let env = library::four_action(q(3, 8));
        let p = TypeDistribution::finite([(0, q(1, 3)), (1, q(2, 3))]).unwrap();
        let profile = single_test_disclosure_eq(&env, &p).unwrap();
        let cert = certify(&env, &p, &profile, 1);
        assert!(cert.passed());
        assert_eq!(cert.ex_ante_payoff, q(5, 2));
    }

    #[test]
    fn repeated_test_profile_passes() {
        let env = library::three_action(q(1, 2));
        let p = library::geometric_types();
        let report = repeated_test_equilibrium(&env, &p, 6).unwrap();
        assert_eq!(report.disclosure_posterior, q(2, 3));
        assert_eq!(report.silence_posterior, q(1, 3));
        assert!(report.deviation_slack.iter().all(|s| !s.is_negative()));
        let cert = certify(&env, &p, &report.profile, 6);
        assert!(cert.passed());
    }

    #[test]
    fn full_disclosure_value() {
        let env = library::four_action(q(3, 8));
        let (profile, v) = construct_full_disclosure_eq(&env, &library::geometric_types()).unwrap();
        assert_eq!(v, q(21, 16));
        let game = game_for_profile(&env, &library::geometric_types(), &profile, 3, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(ex_ante_payoff(&game, &profile).unwrap(), q(21, 16));
        assert!(construct_full_disclosure_eq(&env, &library::prosecutor_types()).is_err());
    }
}
