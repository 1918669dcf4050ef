//! Disclosure subgames after a non-credible interim belief.
//!
//! States in the interim support are sorted by the sender's full-information
//! payoff `u_1 >= ... >= u_k`. `u*` is the payoff the top type secures without
//! revealing, and `u_i*` is the no-disclosure payoff that makes revealing
//! exactly the first `i` states worth `u*`:
//! `u* = Σ_{j<=i} π_j u_j + (1 − Σ_{j<=i} π_j) u_i*`.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{best_responses, Belief, PayoffEnvironment};
use crate::rational::{serde_q, ExtQ, Q};

/// Interim belief restricted to its support, sorted by full-information
/// payoff (descending, ties by state index).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortedInterim {
    /// Original state index of each sorted position.
    pub states: Vec<usize>,
    #[serde(with = "serde_q::vec")]
    pub pi: Vec<Q>,
    #[serde(with = "serde_q::vec")]
    pub u: Vec<Q>,
    pub n_states: usize,
}

impl SortedInterim {
    pub fn new(belief: &Belief, state_u: &[Q]) -> Self {
        let mut states = belief.support();
        states.sort_by(|&a, &b| state_u[b].cmp(&state_u[a]).then(a.cmp(&b)));
        SortedInterim {
            pi: states.iter().map(|&s| belief.p(s).clone()).collect(),
            u: states.iter().map(|&s| state_u[s].clone()).collect(),
            states,
            n_states: belief.len(),
        }
    }

    pub fn k(&self) -> usize {
        self.states.len()
    }

    /// `Σ_{j<=tau} π_j` (1-based count).
    pub fn prefix(&self, tau: usize) -> Q {
        self.pi[..tau].iter().sum()
    }

    /// Belief over all states from unnormalized weights on sorted positions;
    /// `None` when every weight is zero.
    pub fn belief_from_weights(&self, weights: &[Q]) -> Option<Belief> {
        let total: Q = weights.iter().sum();
        if !total.is_positive() {
            return None;
        }
        let mut probs = vec![Q::zero(); self.n_states];
        for (pos, w) in weights.iter().enumerate() {
            probs[self.states[pos]] = w / &total;
        }
        Some(Belief(probs))
    }

    /// Disclosure probability per sorted position under the monotone rule with
    /// the first `tau` states disclosed and state `tau + 1` disclosed w.p. `beta`.
    pub fn monotone_rule(&self, tau: usize, beta: &Q) -> Vec<Q> {
        (0..self.k())
            .map(|pos| {
                if pos < tau {
                    Q::one()
                } else if pos == tau {
                    beta.clone()
                } else {
                    Q::zero()
                }
            })
            .collect()
    }

    /// Total disclosure probability of a monotone rule.
    pub fn rule_mass(&self, tau: usize, beta: &Q) -> Q {
        let mut q = self.prefix(tau);
        if tau < self.k() {
            q += beta * &self.pi[tau];
        }
        q
    }

    /// Posterior when nothing is disclosed: `w_all` mass never discloses,
    /// `w_disc` mass discloses position `j` with probability `rule[j]`.
    pub fn silence_posterior(&self, w_all: &Q, w_disc: &Q, rule: &[Q]) -> Option<Belief> {
        let weights: Vec<Q> = self
            .pi
            .iter()
            .zip(rule)
            .map(|(p, d)| p * (w_all + w_disc * (Q::one() - d)))
            .collect();
        self.belief_from_weights(&weights)
    }

    /// State positions revealed by the threshold rule "reveal the first `tau`".
    pub fn reveal_flags(&self, tau: usize) -> Vec<bool> {
        let mut flags = vec![false; self.n_states];
        for &s in &self.states[..tau] {
            flags[s] = true;
        }
        flags
    }
}

fn check_sorted(pi: &[Q], u: &[Q]) -> Result<()> {
    if pi.len() != u.len() || pi.is_empty() {
        return Err(Error::PreconditionViolation(
            "probabilities and payoffs must be nonempty and aligned".into(),
        ));
    }
    let total: Q = pi.iter().sum();
    if !total.is_one() || pi.iter().any(|p| !p.is_positive()) {
        return Err(Error::PreconditionViolation(
            "interim probabilities must be positive and sum to 1".into(),
        ));
    }
    if u.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::PreconditionViolation(
            "state payoffs must be sorted in descending order".into(),
        ));
    }
    Ok(())
}

/// `u_i*` for `i = 1..k`; the last entry is `+inf`.
pub fn threshold_sequence(pi: &[Q], u: &[Q], u_star: &Q) -> Result<Vec<ExtQ>> {
    check_sorted(pi, u)?;
    let k = u.len();
    if !(u[0] > *u_star && *u_star > u[k - 1]) {
        return Err(Error::PreconditionViolation(format!(
            "need u_1 > u* > u_k, got u_1 = {}, u* = {u_star}, u_k = {}",
            u[0],
            u[k - 1]
        )));
    }
    Ok((1..=k).map(|tau| mixed_threshold(pi, u, u_star, tau, &Q::zero())).collect())
}

/// `u*(tau, beta)`: the no-disclosure payoff that makes the monotone rule
/// revealing the first `tau` states and state `tau + 1` w.p. `beta` worth
/// exactly `u*`. `+inf` when nothing is left undisclosed.
pub fn mixed_threshold(pi: &[Q], u: &[Q], u_star: &Q, tau: usize, beta: &Q) -> ExtQ {
    let mut num = u_star.clone();
    let mut den = Q::one();
    for j in 0..tau {
        num -= &pi[j] * &u[j];
        den -= &pi[j];
    }
    if tau < pi.len() {
        num -= beta * &pi[tau] * &u[tau];
        den -= beta * &pi[tau];
    }
    if den.is_zero() {
        ExtQ::PosInf
    } else {
        ExtQ::Finite(num / den)
    }
}

/// Whether `u_i >= u_i* >= u_{i+1}` (1-based `i < k`).
pub fn brackets(seq: &[ExtQ], u: &[Q], i: usize) -> bool {
    seq[i - 1] <= ExtQ::Finite(u[i - 1].clone()) && seq[i - 1] >= ExtQ::Finite(u[i].clone())
}

/// Whether `u_i*` is a local minimum of the sequence, with `u_0* = u*`.
pub fn local_minimum_at(seq: &[ExtQ], u_star: &Q, i: usize) -> bool {
    let prev = if i == 1 {
        ExtQ::Finite(u_star.clone())
    } else {
        seq[i - 2].clone()
    };
    let next = seq.get(i).cloned().unwrap_or(ExtQ::PosInf);
    prev.min(next) >= seq[i - 1]
}

/// Smallest `i` with `u_i >= u_i* >= u_{i+1}`, preferring indices that end a
/// block of equal payoffs.
pub fn find_disclosure_index(seq: &[ExtQ], u: &[Q]) -> Result<usize> {
    let k = u.len();
    let candidates: Vec<usize> = (1..k).filter(|&i| brackets(seq, u, i)).collect();
    candidates
        .iter()
        .find(|&&i| u[i - 1] > u[i])
        .or_else(|| candidates.first())
        .copied()
        .ok_or_else(|| {
            Error::InternalInvariantFailure(
                "no index brackets its no-disclosure threshold".into(),
            )
        })
}

/// Lowest and highest sender payoff over receiver best replies.
pub fn payoff_interval(env: &PayoffEnvironment, belief: &Belief) -> (Q, Q) {
    let values: Vec<&Q> = best_responses(env, belief)
        .into_iter()
        .map(|a| &env.sender_u[a])
        .collect();
    (
        (*values.iter().min().unwrap()).clone(),
        (*values.iter().max().unwrap()).clone(),
    )
}

/// Best reply (possibly mixed over two pure best replies with the nearest
/// payoffs on either side) with sender payoff exactly `target`.
pub fn mix_to_value(env: &PayoffEnvironment, belief: &Belief, target: &Q) -> Option<Vec<(usize, Q)>> {
    let br = best_responses(env, belief);
    if let Some(&a) = br.iter().find(|&&a| &env.sender_u[a] == target) {
        return Some(vec![(a, Q::one())]);
    }
    let below = br
        .iter()
        .filter(|&&a| &env.sender_u[a] < target)
        .max_by(|&&a, &&b| env.sender_u[a].cmp(&env.sender_u[b]).then(b.cmp(&a)))?;
    let above = br
        .iter()
        .filter(|&&a| &env.sender_u[a] > target)
        .min_by(|&&a, &&b| env.sender_u[a].cmp(&env.sender_u[b]).then(a.cmp(&b)))?;
    let lo = &env.sender_u[*below];
    let hi = &env.sender_u[*above];
    let w = (target - lo) / (hi - lo);
    let mut mix = vec![(*below, Q::one() - &w), (*above, w)];
    mix.sort_by_key(|(a, _)| *a);
    Some(mix)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingCase {
    /// The top type mixes between revealing the first `i` states and its
    /// outside option; lower disclosing types reveal the first `i` states.
    TopTypeMixes,
    /// Lower disclosing types mix between two adjacent threshold rules; the
    /// top type takes its outside option.
    LowTypesMix,
}

/// Belief after silence when type 0 never discloses, the low disclosing
/// types reveal the first `i` states, and the top type never stays silent.
pub fn silence_belief_at_index(s: &SortedInterim, i: usize, p0: &Q, p_low: &Q) -> Option<Belief> {
    s.silence_posterior(p0, p_low, &s.monotone_rule(i, &Q::zero()))
}

/// Picks the case by the receiver's best replies at that silence belief:
/// the top type mixes when some best reply `a` gives
/// `u* <= Σ_{j<=i} π_j u_j + (1 − Σ_{j<=i} π_j) u^s(a)` (equality included).
pub fn classify_case(
    env: &PayoffEnvironment,
    s: &SortedInterim,
    u_star: &Q,
    i: usize,
    p0: &Q,
    p_low: &Q,
) -> (MixingCase, Option<Belief>) {
    let Some(belief) = silence_belief_at_index(s, i, p0, p_low) else {
        return (MixingCase::LowTypesMix, None);
    };
    let revealed: Q = (0..i).map(|j| &s.pi[j] * &s.u[j]).sum();
    let rest = Q::one() - s.prefix(i);
    let case = if best_responses(env, &belief)
        .into_iter()
        .any(|a| *u_star <= &revealed + &rest * &env.sender_u[a])
    {
        MixingCase::TopTypeMixes
    } else {
        MixingCase::LowTypesMix
    };
    (case, Some(belief))
}

/// Solved disclosure subgame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgameConstruction {
    pub interim: Belief,
    pub sorted: SortedInterim,
    #[serde(with = "serde_q")]
    pub u_star: Q,
    pub thresholds: Vec<ExtQ>,
    pub index: usize,
    pub case: MixingCase,
    /// Top type's probability on its outside option.
    #[serde(with = "serde_q")]
    pub top_outside_weight: Q,
    /// Low types reveal the first `low_tau` states, and the next one w.p. `low_beta`.
    pub low_tau: usize,
    #[serde(with = "serde_q")]
    pub low_beta: Q,
    /// Intersection of the disclosure and silence payoff graphs.
    #[serde(with = "serde_q")]
    pub q_hat: Q,
    #[serde(with = "serde_q")]
    pub v_hat: Q,
    /// Belief after silence; `None` when silence is off path.
    pub silence_belief: Option<Belief>,
    #[serde(with = "serde_q::weighted")]
    pub silence_action: Vec<(usize, Q)>,
}

impl SubgameConstruction {
    /// Expected payoff of the threshold rule (first `tau`, next w.p. `beta`)
    /// when silence pays `silence`.
    pub fn rule_payoff(&self, tau: usize, beta: &Q, silence: &Q) -> Q {
        let rule = self.sorted.monotone_rule(tau, beta);
        self.sorted
            .pi
            .iter()
            .zip(&self.sorted.u)
            .zip(&rule)
            .map(|((p, u), d)| p * (d * u + (Q::one() - d) * silence))
            .sum()
    }
}

/// Top type mixes: scans the top type's weight `x` on its outside option
/// from 1 down to 0 until the silence belief admits a best reply worth `u_i*`.
pub fn solve_top_type_mix(
    env: &PayoffEnvironment,
    s: &SortedInterim,
    u_star: &Q,
    p0: &Q,
    p_low: &Q,
    p_top: &Q,
) -> Result<SubgameConstruction> {
    let thresholds = threshold_sequence(&s.pi, &s.u, u_star)?;
    let i = find_disclosure_index(&thresholds, &s.u)?;
    let target = thresholds[i - 1]
        .finite()
        .cloned()
        .ok_or_else(|| Error::InternalInvariantFailure("index at +inf threshold".into()))?;
    let silence_at = |x: &Q| -> Option<Belief> {
        let weights: Vec<Q> = (0..s.k())
            .map(|j| {
                let mut w = p0.clone();
                if j >= i {
                    w += p_low + p_top * (Q::one() - x);
                }
                &s.pi[j] * w
            })
            .collect();
        s.belief_from_weights(&weights)
    };
    let mut candidates = vec![Q::one()];
    let mut roots = Vec::new();
    for a in 0..env.n_actions() {
        for b in (a + 1)..env.n_actions() {
            let delta: Vec<Q> = s
                .states
                .iter()
                .map(|&st| &env.receiver_u[st][a] - &env.receiver_u[st][b])
                .collect();
            let mut base = Q::zero();
            let mut slope = Q::zero();
            for j in 0..s.k() {
                let mut w = p0.clone();
                if j >= i {
                    w += p_low + p_top;
                    slope += &s.pi[j] * p_top * &delta[j];
                }
                base += &s.pi[j] * w * &delta[j];
            }
            if !slope.is_zero() {
                let x = base / slope;
                if x.is_positive() && x < Q::one() {
                    roots.push(x);
                }
            }
        }
    }
    roots.sort();
    roots.dedup();
    candidates.extend(roots.into_iter().rev());
    candidates.push(Q::zero());
    for x in candidates {
        let Some(belief) = silence_at(&x) else {
            continue;
        };
        let (lo, hi) = payoff_interval(env, &belief);
        if lo <= target && target <= hi {
            let action = mix_to_value(env, &belief, &target).ok_or_else(|| {
                Error::InternalInvariantFailure("target inside the payoff interval".into())
            })?;
            let q_hat = s.prefix(i);
            return Ok(SubgameConstruction {
                interim: interim_of(s),
                sorted: s.clone(),
                u_star: u_star.clone(),
                thresholds,
                index: i,
                case: MixingCase::TopTypeMixes,
                top_outside_weight: x,
                low_tau: i,
                low_beta: Q::zero(),
                q_hat,
                v_hat: target,
                silence_belief: Some(belief),
                silence_action: action,
            });
        }
    }
    Err(Error::NoIndifferencePoint(format!(
        "no mixing weight gives a silence payoff of {target}"
    )))
}

fn interim_of(s: &SortedInterim) -> Belief {
    let mut probs = vec![Q::zero(); s.n_states];
    for (pos, &st) in s.states.iter().enumerate() {
        probs[st] = s.pi[pos].clone();
    }
    Belief(probs)
}

/// Point where the disclosure-incentive graph and the silence-payoff graph
/// meet for monotone rules.
#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    pub tau: usize,
    pub beta: Q,
    pub q: Q,
    pub v: Q,
    pub belief: Option<Belief>,
    pub action: Vec<(usize, Q)>,
}

/// Payoffs `v` that make the monotone rule `(tau, beta)` a best response:
/// `[u_{tau+1}, u_tau]` at `beta = 0`, `{u_{tau+1}}` inside a segment.
/// Bounds are `None` for `±inf`.
pub fn incentive_interval(s: &SortedInterim, tau: usize, beta: &Q) -> (Option<Q>, Option<Q>) {
    let next = s.u.get(tau).cloned();
    if beta.is_zero() {
        let prev = if tau == 0 { None } else { Some(s.u[tau - 1].clone()) };
        (next, prev)
    } else {
        (next.clone(), next)
    }
}

/// Silence payoff interval for a monotone rule; off path the receiver is
/// skeptical and the silence payoff is the worst state's payoff.
pub fn silence_interval(
    env: &PayoffEnvironment,
    s: &SortedInterim,
    w_all: &Q,
    w_disc: &Q,
    tau: usize,
    beta: &Q,
) -> (Option<Belief>, Q, Q) {
    match s.silence_posterior(w_all, w_disc, &s.monotone_rule(tau, beta)) {
        Some(b) => {
            let (lo, hi) = payoff_interval(env, &b);
            (Some(b), lo, hi)
        }
        None => {
            let worst = s.u[s.k() - 1].clone();
            (None, worst.clone(), worst)
        }
    }
}

/// First intersection, scanning disclosure probabilities upward from the
/// rule revealing the first `start` states. Candidate points are segment
/// boundaries and the receiver-indifference points inside each segment;
/// both graphs are constant between consecutive candidates.
pub fn monotone_intersection(
    env: &PayoffEnvironment,
    s: &SortedInterim,
    w_all: &Q,
    w_disc: &Q,
    start: usize,
) -> Result<Intersection> {
    let k = s.k();
    for tau in start..=k {
        let mut betas = vec![Q::zero()];
        if tau < k && w_disc.is_positive() {
            let mut roots = Vec::new();
            for a in 0..env.n_actions() {
                for b in (a + 1)..env.n_actions() {
                    let delta: Vec<Q> = s
                        .states
                        .iter()
                        .map(|&st| &env.receiver_u[st][a] - &env.receiver_u[st][b])
                        .collect();
                    let base: Q = (0..k)
                        .map(|j| {
                            let mut w = w_all.clone();
                            if j >= tau {
                                w += w_disc;
                            }
                            &s.pi[j] * w * &delta[j]
                        })
                        .sum();
                    let slope = &s.pi[tau] * w_disc * &delta[tau];
                    if !slope.is_zero() {
                        let beta = base / slope;
                        if beta.is_positive() && beta < Q::one() {
                            roots.push(beta);
                        }
                    }
                }
            }
            roots.sort();
            roots.dedup();
            betas.extend(roots);
        }
        for beta in betas {
            let (u_lo, u_hi) = incentive_interval(s, tau, &beta);
            let (belief, v_lo, v_hi) = silence_interval(env, s, w_all, w_disc, tau, &beta);
            let lo = match &u_lo {
                Some(x) if *x > v_lo => x.clone(),
                _ => v_lo.clone(),
            };
            let hi = match &u_hi {
                Some(x) if *x < v_hi => x.clone(),
                _ => v_hi.clone(),
            };
            if lo <= hi {
                let action = match &belief {
                    Some(b) => mix_to_value(env, b, &lo).ok_or_else(|| {
                        Error::InternalInvariantFailure("intersection payoff not attainable".into())
                    })?,
                    None => vec![],
                };
                return Ok(Intersection {
                    q: s.rule_mass(tau, &beta),
                    tau,
                    beta,
                    v: lo,
                    belief,
                    action,
                });
            }
        }
    }
    Err(Error::NoIntersection(format!(
        "scan from {start} revealed states found no intersection"
    )))
}

/// Low types mix: intersection of the two graphs at or above the index
/// rule, then the check that the top type still prefers its outside option.
pub fn solve_low_types_mix(
    env: &PayoffEnvironment,
    s: &SortedInterim,
    u_star: &Q,
    p0: &Q,
    p_low: &Q,
) -> Result<SubgameConstruction> {
    let thresholds = threshold_sequence(&s.pi, &s.u, u_star)?;
    let i = find_disclosure_index(&thresholds, &s.u)?;
    let hit = monotone_intersection(env, s, p0, p_low, i)?;
    let bound = mixed_threshold(&s.pi, &s.u, u_star, hit.tau, &hit.beta);
    if bound < ExtQ::Finite(hit.v.clone()) {
        return Err(Error::SecondIcFail(format!(
            "silence payoff {} exceeds the indifference bound {bound}",
            hit.v
        )));
    }
    Ok(SubgameConstruction {
        interim: interim_of(s),
        sorted: s.clone(),
        u_star: u_star.clone(),
        thresholds,
        index: i,
        case: MixingCase::LowTypesMix,
        top_outside_weight: Q::one(),
        low_tau: hit.tau,
        low_beta: hit.beta,
        q_hat: hit.q,
        v_hat: hit.v,
        silence_belief: hit.belief,
        silence_action: hit.action,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::int_vec;
    use crate::rational::{q, qi};

    #[test]
    fn three_state_thresholds() {
        let pi = vec![q(1, 5), q(3, 10), q(1, 2)];
        let u = int_vec(&[4, 2, 0]);
        let seq = threshold_sequence(&pi, &u, &q(3, 2)).unwrap();
        assert_eq!(seq, vec![ExtQ::Finite(q(7, 8)), ExtQ::Finite(q(1, 5)), ExtQ::PosInf]);
        assert_eq!(find_disclosure_index(&seq, &u).unwrap(), 2);
        for (i, s) in seq.iter().enumerate().take(2) {
            let back: Q = pi[..=i].iter().zip(&u).map(|(p, v)| p * v).sum::<Q>()
                + (Q::one() - pi[..=i].iter().sum::<Q>()) * s.finite().unwrap();
            assert_eq!(back, q(3, 2));
        }
    }

    #[test]
    fn two_state_thresholds() {
        let pi = vec![q(1, 2), q(1, 2)];
        let u = int_vec(&[3, 0]);
        let seq = threshold_sequence(&pi, &u, &qi(2)).unwrap();
        assert_eq!(seq, vec![ExtQ::Finite(qi(1)), ExtQ::PosInf]);
        assert_eq!(find_disclosure_index(&seq, &u).unwrap(), 1);
    }

    #[test]
    fn threshold_preconditions() {
        let pi = vec![q(1, 2), q(1, 2)];
        let u = int_vec(&[3, 0]);
        assert!(matches!(
            threshold_sequence(&pi, &u, &qi(3)),
            Err(Error::PreconditionViolation(_))
        ));
        assert!(threshold_sequence(&[Q::one()], &int_vec(&[1]), &qi(1)).is_err());
    }

    #[test]
    fn mixed_threshold_identities() {
        let pi = vec![q(1, 5), q(3, 10), q(1, 2)];
        let u = int_vec(&[4, 2, 0]);
        let us = q(3, 2);
        let seq = threshold_sequence(&pi, &u, &us).unwrap();
        for tau in 1..=3 {
            assert_eq!(mixed_threshold(&pi, &u, &us, tau, &Q::zero()), seq[tau - 1]);
        }
        for tau in 0..3 {
            assert_eq!(
                mixed_threshold(&pi, &u, &us, tau, &Q::one()),
                mixed_threshold(&pi, &u, &us, tau + 1, &Q::zero())
            );
        }
    }

    #[test]
    fn top_type_mix_reproduces_two_type_example() {
        // Four-action environment at interim 3/8 with type 0 at weight 1/3 and
        // the top type at 2/3: silence belief 1/4, reveal-high belief 1/2.
        let env = crate::library::four_action(q(1, 2));
        let u = crate::model::state_payoffs(&env).unwrap();
        let s = SortedInterim::new(&Belief::two(q(1, 2)), &u);
        let sol = solve_top_type_mix(&env, &s, &qi(3), &q(1, 3), &Q::zero(), &q(2, 3)).unwrap();
        assert_eq!(sol.index, 1);
        assert_eq!(sol.v_hat, q(5, 2));
        let at_one = silence_belief_at_index(&s, 1, &q(1, 3), &Q::zero()).unwrap();
        assert_eq!(at_one, Belief::two(q(1, 2)));
    }
}
