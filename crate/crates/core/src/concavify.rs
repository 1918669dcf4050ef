//! Commitment payoff by linear programming, optimal-experiment extraction,
//! uniqueness, credibility classification and the strict-incentive
//! perturbation of an optimal experiment.

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Op, VertexEnumeration};
use crate::model::{
    best_responses, check_strict_optimality, indirect_utility_max, sender_preferred_action,
    state_payoffs, strict_margin, Belief, PayoffEnvironment, PosteriorDistribution,
};
use crate::rational::{serde_q, sup_distance, Q};

/// Default cap on bases visited while enumerating the optimal face.
pub const DEFAULT_VERTEX_BUDGET: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uniqueness {
    Unique,
    NonUnique,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitmentSolution {
    #[serde(with = "serde_q")]
    pub value: Q,
    /// Optimal posteriors (at most one per state) with their weights.
    pub experiment: PosteriorDistribution,
    /// Sender-preferred receiver action at each posterior, aligned with
    /// `experiment.support`.
    pub actions: Vec<usize>,
    pub uniqueness: Uniqueness,
}

impl CommitmentSolution {
    pub fn beliefs(&self) -> impl Iterator<Item = &Belief> {
        self.experiment.support.iter().map(|(b, _)| b)
    }
}

/// Lifted persuasion LP at `belief`: variable `a * n + θ` is the joint
/// probability of state `θ` and recommendation `a`.
fn persuasion_lp(env: &PayoffEnvironment, belief: &Belief) -> LinearProgram {
    let (n, m) = (env.n_states(), env.n_actions());
    let idx = |a: usize, s: usize| a * n + s;
    let mut objective = vec![Q::zero(); n * m];
    for a in 0..m {
        for s in 0..n {
            objective[idx(a, s)] = env.sender_u[a].clone();
        }
    }
    let mut lp = LinearProgram::new(n * m, objective);
    for s in 0..n {
        let mut row = vec![Q::zero(); n * m];
        for a in 0..m {
            row[idx(a, s)] = Q::one();
        }
        lp.add(row, Op::Eq, belief.p(s).clone());
    }
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let mut row = vec![Q::zero(); n * m];
            for s in 0..n {
                row[idx(a, s)] = &env.receiver_u[s][a] - &env.receiver_u[s][b];
            }
            lp.add(row, Op::Ge, Q::zero());
        }
    }
    lp
}

/// Posterior distribution induced by a lifted LP point, duplicates merged.
fn lifted_to_posteriors(env: &PayoffEnvironment, x: &[Q]) -> PosteriorDistribution {
    let n = env.n_states();
    let mut support = Vec::new();
    for a in 0..env.n_actions() {
        let joint = &x[a * n..(a + 1) * n];
        let mass: Q = joint.iter().sum();
        if mass.is_positive() {
            let b = Belief(joint.iter().map(|v| v / &mass).collect());
            support.push((b, mass));
        }
    }
    PosteriorDistribution { support }.merged()
}

/// Value of the concave closure of `ū` at `belief` (any support).
pub fn concave_closure(env: &PayoffEnvironment, belief: &Belief) -> Q {
    match persuasion_lp(env, belief).solve() {
        LpOutcome::Optimal { value, .. } => value,
        other => unreachable!("persuasion LP is feasible and bounded: {other:?}"),
    }
}

/// Whether the beliefs are affinely independent.
fn affinely_independent(beliefs: &[&Belief]) -> bool {
    if beliefs.len() <= 1 {
        return true;
    }
    // Differences from the first point must be linearly independent.
    let base = beliefs[0];
    let mut rows: Vec<Vec<Q>> = beliefs[1..]
        .iter()
        .map(|b| b.0.iter().zip(&base.0).map(|(x, y)| x - y).collect())
        .collect();
    let cols = base.len();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for r in 0..rows.len() {
            if r != rank && !rows[r][c].is_zero() {
                let f = &rows[r][c] / &pivot[c];
                for (v, pv) in rows[r].iter_mut().zip(&pivot) {
                    *v -= &f * pv;
                }
            }
        }
        rank += 1;
    }
    rank == rows.len()
}

/// Smallest (then lexicographically first) subset of `dist`'s support that
/// still represents `prior` at value `target`.
fn caratheodory(
    env: &PayoffEnvironment,
    prior: &Belief,
    dist: &PosteriorDistribution,
    target: &Q,
) -> PosteriorDistribution {
    let points: Vec<&Belief> = dist.support.iter().map(|(b, _)| b).collect();
    let values: Vec<Q> = points.iter().map(|b| indirect_utility_max(env, b)).collect();
    for size in 1..=env.n_states().min(points.len()) {
        for subset in (0..points.len()).combinations(size) {
            let objective = subset.iter().map(|&k| values[k].clone()).collect();
            let mut lp = LinearProgram::new(size, objective);
            for s in 0..env.n_states() {
                let row = subset.iter().map(|&k| points[k].p(s).clone()).collect();
                lp.add(row, Op::Eq, prior.p(s).clone());
            }
            if let LpOutcome::Optimal { x, value } = lp.solve() {
                if &value == target {
                    let support = subset
                        .iter()
                        .zip(x)
                        .filter(|(_, w)| w.is_positive())
                        .map(|(&k, w)| (points[k].clone(), w))
                        .collect();
                    return PosteriorDistribution { support }.merged();
                }
            }
        }
    }
    dist.clone()
}

/// `V̄(π₀)` and the optimal experiment, with a uniqueness verdict from
/// enumerating the optimal face.
pub fn commitment_solve(env: &PayoffEnvironment) -> Result<CommitmentSolution> {
    commitment_solve_with_budget(env, DEFAULT_VERTEX_BUDGET)
}

pub fn commitment_solve_with_budget(
    env: &PayoffEnvironment,
    budget: usize,
) -> Result<CommitmentSolution> {
    let report = check_strict_optimality(env);
    if !report.holds {
        let list = report
            .witnesses
            .iter()
            .map(|(a, s)| {
                let names = s.iter().map(|&i| env.states[i].as_str()).join(",");
                format!("action {} on {{{names}}}", env.actions[*a])
            })
            .join("; ");
        return Err(Error::AssumptionViolation(format!(
            "actions never strictly optimal: {list}"
        )));
    }
    let lp = persuasion_lp(env, &env.prior);
    let LpOutcome::Optimal { x, value } = lp.solve() else {
        return Err(Error::InternalInvariantFailure(
            "persuasion LP is not solvable".into(),
        ));
    };
    let lifted = lifted_to_posteriors(env, &x);
    let experiment = caratheodory(env, &env.prior, &lifted, &value);
    let actions = experiment
        .support
        .iter()
        .map(|(b, _)| sender_preferred_action(env, b))
        .collect();
    let mut solution = CommitmentSolution {
        value,
        experiment,
        actions,
        uniqueness: Uniqueness::Unknown,
    };
    solution.uniqueness = check_unique_optimal_with_budget(env, &solution, budget);
    Ok(solution)
}

pub fn check_unique_optimal(env: &PayoffEnvironment, solution: &CommitmentSolution) -> Uniqueness {
    check_unique_optimal_with_budget(env, solution, DEFAULT_VERTEX_BUDGET)
}

/// Unique iff every optimal vertex of the lifted LP induces the same posterior
/// distribution and that distribution's support is affinely independent
/// (otherwise the same points admit several optimal weightings).
/// `Unknown` when the face walk exceeds `budget` bases.
pub fn check_unique_optimal_with_budget(
    env: &PayoffEnvironment,
    solution: &CommitmentSolution,
    budget: usize,
) -> Uniqueness {
    let lp = persuasion_lp(env, &env.prior);
    let target = solution.experiment.merged();
    let points: Vec<&Belief> = target.support.iter().map(|(b, _)| b).collect();
    if !affinely_independent(&points) {
        return Uniqueness::NonUnique;
    }
    // Coordinate-wise extremes of the optimal face are optimal vertices; if
    // they all coincide the face is a single point.
    let mut face = lp.clone();
    face.add(lp.objective.clone(), Op::Eq, solution.value.clone());
    let mut probes = Vec::new();
    for i in 0..lp.n_vars {
        for sign in [1, -1] {
            let mut objective = vec![Q::zero(); lp.n_vars];
            objective[i] = Q::from_integer(sign.into());
            let probe = LinearProgram {
                objective,
                ..face.clone()
            };
            match probe.solve() {
                LpOutcome::Optimal { x, .. } => probes.push(x),
                _ => return Uniqueness::Unknown,
            }
        }
    }
    if probes
        .iter()
        .any(|x| lifted_to_posteriors(env, x) != target)
    {
        return Uniqueness::NonUnique;
    }
    if probes.windows(2).all(|w| w[0] == w[1]) {
        return Uniqueness::Unique;
    }
    // Several lifted optima with the same posteriors so far: walk the whole
    // optimal face.
    let vertices = match lp.optimal_vertices(budget) {
        VertexEnumeration::Complete(v) => v,
        VertexEnumeration::BudgetExhausted(_) | VertexEnumeration::NotOptimal(_) => {
            return Uniqueness::Unknown
        }
    };
    if vertices
        .iter()
        .all(|x| lifted_to_posteriors(env, x) == target)
    {
        Uniqueness::Unique
    } else {
        Uniqueness::NonUnique
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredibilityVerdict {
    pub credible: bool,
    /// State whose revelation beats the belief, with the highest `u(θ)`.
    pub witness: Option<usize>,
}

/// Credible iff `ū(π) >= u(θ)` for every state in the support.
pub fn classify_credibility(env: &PayoffEnvironment, belief: &Belief) -> Result<CredibilityVerdict> {
    let u = state_payoffs(env)?;
    let ubar = indirect_utility_max(env, belief);
    let witness = belief
        .support()
        .into_iter()
        .filter(|&s| u[s] > ubar)
        .max_by(|&a, &b| u[a].cmp(&u[b]).then(b.cmp(&a)));
    Ok(CredibilityVerdict {
        credible: witness.is_none(),
        witness,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    /// Probability of the second state.
    #[serde(with = "serde_q")]
    pub p: Q,
    pub verdict: CredibilityVerdict,
    /// True when credibility differs on one side of this interior point.
    pub boundary: bool,
}

/// Points of `[0,1]` where the receiver's best-reply set changes.
pub fn two_state_breakpoints(env: &PayoffEnvironment) -> Result<Vec<Q>> {
    if env.n_states() != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "two states required, got {}",
            env.n_states()
        )));
    }
    let u = &env.receiver_u;
    let mut points = vec![Q::zero(), Q::one()];
    for (a, b) in (0..env.n_actions()).tuple_combinations() {
        // (1-p) d0 + p d1 = 0 with d = u(., a) - u(., b).
        let d0 = &u[0][a] - &u[0][b];
        let d1 = &u[1][a] - &u[1][b];
        if d0 == d1 {
            continue;
        }
        let p = &d0 / (&d0 - &d1);
        if p.is_positive() && p < Q::one() {
            let br = best_responses(env, &Belief::two(p.clone()));
            if br.contains(&a) && br.contains(&b) {
                points.push(p);
            }
        }
    }
    points.sort();
    points.dedup();
    Ok(points)
}

/// Credibility at `grid_n + 1` evenly spaced beliefs plus every interior
/// point where credibility flips.
pub fn credibility_frontier(env: &PayoffEnvironment, grid_n: u64) -> Result<Vec<FrontierPoint>> {
    let breaks = two_state_breakpoints(env)?;
    let verdict = |p: &Q| classify_credibility(env, &Belief::two(p.clone()));
    let two = Q::from_integer(2.into());
    let mut flips = Vec::new();
    for w in breaks.windows(3) {
        let left = verdict(&((&w[0] + &w[1]) / &two))?.credible;
        let right = verdict(&((&w[1] + &w[2]) / &two))?.credible;
        let here = verdict(&w[1])?.credible;
        if left != here || right != here {
            flips.push(w[1].clone());
        }
    }
    let n = grid_n.max(1);
    let mut ps: Vec<Q> = (0..=n)
        .map(|k| Q::new((k as i64).into(), (n as i64).into()))
        .collect();
    ps.extend(flips.iter().cloned());
    ps.sort();
    ps.dedup();
    ps.into_iter()
        .map(|p| {
            Ok(FrontierPoint {
                verdict: verdict(&p)?,
                boundary: flips.contains(&p),
                p,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedPoint {
    /// Optimal posterior `π^j`.
    pub source: Belief,
    /// Nearby belief `π_ε(π^j)` where the same action is strictly optimal.
    pub perturbed: Belief,
    /// Compensating belief `ν^j`.
    pub residual: Belief,
    pub action: usize,
    #[serde(with = "serde_q")]
    pub weight: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub experiment: PosteriorDistribution,
    pub points: Vec<PerturbedPoint>,
    #[serde(with = "serde_q")]
    pub ell: Q,
    #[serde(with = "serde_q")]
    pub delta: Q,
    #[serde(with = "serde_q")]
    pub eta: Q,
}

impl Perturbation {
    /// Probability the perturbed experiment places on the beliefs `π_ε(π^j)`.
    pub fn mass_on_perturbed(&self) -> Q {
        let mut beliefs: Vec<&Belief> = self.points.iter().map(|p| &p.perturbed).collect();
        beliefs.sort();
        beliefs.dedup();
        beliefs
            .into_iter()
            .map(|b| self.experiment.weight_of(b))
            .sum()
    }

    /// The `π_ε` image of `source`, if `source` is an optimal posterior.
    pub fn image_of(&self, source: &Belief) -> Option<&Belief> {
        self.points
            .iter()
            .find(|p| &p.source == source)
            .map(|p| &p.perturbed)
    }
}

/// Replaces each optimal posterior `π^j` by a two-point split between a
/// nearby belief with strict receiver incentives (weight `1 - η`) and a
/// compensating belief `ν^j` (weight `η`), keeping the mean at the prior.
pub fn perturb_experiment(
    env: &PayoffEnvironment,
    solution: &CommitmentSolution,
    eps: &Q,
) -> Result<Perturbation> {
    if !eps.is_positive() || eps >= &Q::one() {
        return Err(Error::PreconditionViolation(format!(
            "perturbation size must lie in (0,1), got {eps}"
        )));
    }
    let two = Q::from_integer(2.into());
    let half = Q::one() / &two;
    let ell = solution
        .beliefs()
        .flat_map(|b| b.0.iter().filter(|v| v.is_positive()).cloned())
        .min()
        .expect("nonempty support");
    let delta = eps * &ell / &two;
    let eta = if eps < &half { eps.clone() } else { half };
    let mut points = Vec::new();
    let mut parts: Vec<(Belief, Q)> = Vec::new();
    for ((source, w), &action) in solution.experiment.support.iter().zip(&solution.actions) {
        let br = best_responses(env, source);
        let perturbed = if br == [action] {
            source.clone()
        } else {
            let support = source.support();
            let (m, target) = strict_margin(env, action, &support)
                .filter(|(m, _)| m.is_positive())
                .ok_or_else(|| {
                    Error::InfeasiblePerturbation(format!(
                        "action {} is never strictly optimal near {}",
                        env.actions[action],
                        source.display()
                    ))
                })?;
            debug_assert!(m.is_positive());
            let d = sup_distance(&target.0, &source.0);
            let t = (&delta / (&two * &d)).min(Q::one());
            Belief(
                source
                    .0
                    .iter()
                    .zip(&target.0)
                    .map(|(s, g)| s + &t * (g - s))
                    .collect(),
            )
        };
        let residual = Belief(
            source
                .0
                .iter()
                .zip(&perturbed.0)
                .map(|(s, p)| (s - (Q::one() - &eta) * p) / &eta)
                .collect(),
        );
        if residual.0.iter().any(|v| v.is_negative()) {
            return Err(Error::InternalInvariantFailure(
                "compensating belief has a negative entry".into(),
            ));
        }
        parts.push((perturbed.clone(), w * (Q::one() - &eta)));
        parts.push((residual.clone(), w * &eta));
        points.push(PerturbedPoint {
            source: source.clone(),
            perturbed,
            residual,
            action,
            weight: w.clone(),
        });
    }
    Ok(Perturbation {
        experiment: PosteriorDistribution { support: parts }.merged(),
        points,
        ell,
        delta,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{four_action, prosecutor, three_action};
    use crate::model::{full_disclosure_payoff, two_state_env};
    use crate::rational::{q, qi};

    fn beliefs_and_weights(s: &CommitmentSolution) -> Vec<(Q, Q)> {
        s.experiment
            .support
            .iter()
            .map(|(b, w)| (b.p(1).clone(), w.clone()))
            .collect()
    }

    #[test]
    fn commitment_examples() {
        let s = commitment_solve(&four_action(q(3, 8))).unwrap();
        assert_eq!(s.value, q(5, 2));
        assert_eq!(beliefs_and_weights(&s), vec![(q(1, 2), q(1, 2)), (q(1, 4), q(1, 2))]);
        assert_eq!(s.uniqueness, Uniqueness::Unique);

        let s = commitment_solve(&three_action(q(1, 2))).unwrap();
        assert_eq!(s.value, q(5, 2));
        assert_eq!(beliefs_and_weights(&s), vec![(q(2, 3), q(1, 2)), (q(1, 3), q(1, 2))]);
        assert_eq!(s.uniqueness, Uniqueness::Unique);

        let s = commitment_solve(&three_action(q(3, 4))).unwrap();
        assert_eq!(s.value, qi(3));
        assert_eq!(beliefs_and_weights(&s), vec![(q(3, 4), qi(1))]);

        let s = commitment_solve(&prosecutor()).unwrap();
        assert_eq!(s.value, q(3, 5));
        assert_eq!(beliefs_and_weights(&s), vec![(q(1, 2), q(3, 5)), (qi(0), q(2, 5))]);
    }

    #[test]
    fn non_unique_when_closure_is_flat() {
        let env = two_state_env(
            vec![qi(0), qi(1), qi(2)],
            &[q(1, 3), q(2, 3)],
            qi(3),
            q(1, 2),
        )
        .unwrap();
        let s = commitment_solve(&env).unwrap();
        assert_eq!(s.value, q(3, 2));
        assert_eq!(s.uniqueness, Uniqueness::NonUnique);
        assert!(s.experiment.support.len() <= 2);
    }

    #[test]
    fn value_brackets() {
        for k in 1..10 {
            let env = four_action(q(k, 10));
            let s = commitment_solve(&env).unwrap();
            assert!(s.value >= full_disclosure_payoff(&env).unwrap());
            assert!(s.value >= indirect_utility_max(&env, &env.prior));
            assert_eq!(s.experiment.mean(), env.prior);
        }
    }

    #[test]
    fn credibility_examples() {
        let env = three_action(q(1, 2));
        let v = classify_credibility(&env, &Belief::two(q(1, 2))).unwrap();
        assert_eq!(v, CredibilityVerdict { credible: false, witness: Some(1) });
        assert!(classify_credibility(&env, &Belief::two(q(3, 4))).unwrap().credible);
        assert!(classify_credibility(&env, &Belief::two(qi(0))).unwrap().credible);
        assert!(classify_credibility(&env, &Belief::two(qi(1))).unwrap().credible);
    }

    #[test]
    fn frontier_examples() {
        let f = credibility_frontier(&three_action(q(1, 2)), 3).unwrap();
        let flags: Vec<bool> = f.iter().map(|p| p.verdict.credible).collect();
        assert_eq!(flags, vec![true, false, true, true]);
        assert_eq!(
            f.iter().filter(|p| p.boundary).map(|p| p.p.clone()).collect::<Vec<_>>(),
            vec![q(2, 3)]
        );
        let f = credibility_frontier(&four_action(q(3, 8)), 4).unwrap();
        assert_eq!(
            f.iter().filter(|p| p.boundary).map(|p| p.p.clone()).collect::<Vec<_>>(),
            vec![q(3, 4)]
        );
        let mut flat = three_action(q(1, 2));
        flat.sender_u = vec![qi(1); 3];
        assert!(credibility_frontier(&flat, 10)
            .unwrap()
            .iter()
            .all(|p| p.verdict.credible));
        let mut three = three_action(q(1, 2));
        three.states.push("x".into());
        three.receiver_u.push(vec![qi(0); 3]);
        assert!(matches!(
            credibility_frontier(&three, 3),
            Err(Error::UnsupportedDimension(_))
        ));
    }

    #[test]
    fn perturbation_postconditions() {
        let env = three_action(q(1, 2));
        let s = commitment_solve(&env).unwrap();
        let eps = q(1, 10);
        let p = perturb_experiment(&env, &s, &eps).unwrap();
        assert_eq!(p.experiment.mean(), env.prior);
        assert_eq!(p.experiment.total_weight(), qi(1));
        assert!(p.mass_on_perturbed() >= qi(1) - &eps);
        for pt in &p.points {
            assert!(sup_distance(&pt.source.0, &pt.perturbed.0) < p.delta);
            assert_eq!(best_responses(&env, &pt.perturbed), vec![pt.action]);
            assert!(pt.residual.0.iter().all(|v| !v.is_negative()));
        }
    }

    #[test]
    fn perturbation_is_identity_when_strict() {
        let env = three_action(q(3, 4));
        let s = commitment_solve(&env).unwrap();
        let p = perturb_experiment(&env, &s, &q(1, 3)).unwrap();
        assert_eq!(p.experiment, s.experiment);
    }
}
