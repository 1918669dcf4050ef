//! Beliefs, payoff environments, type distributions, experiments, Bayes
//! updating and receiver best responses.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Op};
use crate::rational::{pow_q, qi, serde_q, Q};

/// Probability vector aligned with the environment's state list.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(#[serde(with = "serde_q::vec")] pub Vec<Q>);

impl Belief {
    pub fn new(probs: Vec<Q>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("belief over no states".into()));
        }
        if probs.iter().any(|p| p.is_negative()) {
            return Err(Error::InvalidInput("negative belief entry".into()));
        }
        let total: Q = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidInput(format!("belief sums to {total}, not 1")));
        }
        Ok(Belief(probs))
    }

    /// Two-state belief with probability `p1` on the second state.
    pub fn two(p1: Q) -> Self {
        Belief(vec![Q::one() - &p1, p1])
    }

    pub fn degenerate(n: usize, state: usize) -> Self {
        let mut v = vec![Q::zero(); n];
        v[state] = Q::one();
        Belief(v)
    }

    pub fn probs(&self) -> &[Q] {
        &self.0
    }

    pub fn p(&self, state: usize) -> &Q {
        &self.0[state]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i].is_positive()).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.support().len() == 1
    }

    /// Mixture `Σ w_i · b_i`; weights are taken as given.
    pub fn mix<'a>(parts: impl IntoIterator<Item = (&'a Belief, &'a Q)>) -> Belief {
        let mut acc: Vec<Q> = Vec::new();
        for (b, w) in parts {
            if acc.is_empty() {
                acc = vec![Q::zero(); b.len()];
            }
            for (a, p) in acc.iter_mut().zip(&b.0) {
                *a += w * p;
            }
        }
        Belief(acc)
    }

    pub fn display(&self) -> String {
        format!("({})", self.0.iter().map(|p| p.to_string()).join(", "))
    }
}

/// Finite persuasion environment with state-independent sender payoffs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffEnvironment {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    #[serde(with = "serde_q::vec")]
    pub sender_u: Vec<Q>,
    /// `receiver_u[state][action]`.
    #[serde(with = "serde_q::matrix")]
    pub receiver_u: Vec<Vec<Q>>,
    pub prior: Belief,
}

impl PayoffEnvironment {
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        sender_u: Vec<Q>,
        receiver_u: Vec<Vec<Q>>,
        prior: Belief,
    ) -> Result<Self> {
        let env = PayoffEnvironment {
            states,
            actions,
            sender_u,
            receiver_u,
            prior,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.states.len(), self.actions.len());
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("states and actions must be nonempty".into()));
        }
        if self.sender_u.len() != m {
            return Err(Error::InvalidInput("sender_u length differs from actions".into()));
        }
        if self.receiver_u.len() != n || self.receiver_u.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("receiver_u must be states x actions".into()));
        }
        Belief::new(self.prior.0.clone())?;
        if self.prior.len() != n {
            return Err(Error::InvalidInput("prior length differs from states".into()));
        }
        if self.prior.support().len() != n {
            return Err(Error::InvalidInput("prior must have full support".into()));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn with_prior(&self, prior: Belief) -> Result<Self> {
        let mut env = self.clone();
        env.prior = prior;
        env.validate()?;
        Ok(env)
    }

    /// Largest and smallest sender payoff over all actions.
    pub fn sender_range(&self) -> (Q, Q) {
        let hi = self.sender_u.iter().max().cloned().unwrap_or_else(Q::zero);
        let lo = self.sender_u.iter().min().cloned().unwrap_or_else(Q::zero);
        (hi, lo)
    }

    /// Expected receiver payoff of each action at `belief`.
    pub fn receiver_values(&self, belief: &Belief) -> Vec<Q> {
        (0..self.n_actions())
            .map(|a| {
                belief
                    .0
                    .iter()
                    .zip(&self.receiver_u)
                    .filter(|(p, _)| !p.is_zero())
                    .map(|(p, row)| p * &row[a])
                    .sum()
            })
            .collect()
    }

    /// Sender payoff of a mixed receiver action given as `(action, weight)`.
    pub fn sender_value(&self, mixed: &[(usize, Q)]) -> Q {
        mixed.iter().map(|(a, w)| w * &self.sender_u[*a]).sum()
    }
}

/// Distribution over the sender's capacity (number of additional experiments).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution {
    #[serde(with = "finite_map")]
    pub finite: BTreeMap<u64, Q>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometric: Option<GeometricTail>,
}

/// `p(start + k) = base · ratio^k` for every `k >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricTail {
    pub start: u64,
    #[serde(with = "serde_q")]
    pub base: Q,
    #[serde(with = "serde_q")]
    pub ratio: Q,
}

mod finite_map {
    use std::collections::BTreeMap;

    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::{fmt_q, parse_q, Q};

    pub fn serialize<S: Serializer>(m: &BTreeMap<u64, Q>, s: S) -> Result<S::Ok, S::Error> {
        let texts: BTreeMap<String, String> =
            m.iter().map(|(k, v)| (k.to_string(), fmt_q(v))).collect();
        texts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, Q>, D::Error> {
        let texts = BTreeMap::<String, String>::deserialize(d)?;
        texts
            .iter()
            .map(|(k, v)| {
                let t = k.parse::<u64>().map_err(D::Error::custom)?;
                Ok((t, parse_q(v).map_err(D::Error::custom)?))
            })
            .collect()
    }
}

impl TypeDistribution {
    pub fn finite(weights: impl IntoIterator<Item = (u64, Q)>) -> Result<Self> {
        let td = TypeDistribution {
            finite: weights.into_iter().collect(),
            geometric: None,
        };
        td.validate()?;
        Ok(td)
    }

    pub fn with_geometric(
        weights: impl IntoIterator<Item = (u64, Q)>,
        tail: GeometricTail,
    ) -> Result<Self> {
        let td = TypeDistribution {
            finite: weights.into_iter().collect(),
            geometric: Some(tail),
        };
        td.validate()?;
        Ok(td)
    }

    pub fn degenerate(t: u64) -> Self {
        TypeDistribution {
            finite: BTreeMap::from([(t, Q::one())]),
            geometric: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.finite.values().any(|w| w.is_negative()) {
            return Err(Error::InvalidInput("negative type weight".into()));
        }
        if let Some(g) = &self.geometric {
            if g.base.is_negative() || !g.ratio.is_positive() || g.ratio >= Q::one() {
                return Err(Error::InvalidInput(
                    "geometric tail needs base >= 0 and ratio in (0,1)".into(),
                ));
            }
            if self.finite.keys().any(|&t| t >= g.start) {
                return Err(Error::InvalidInput(
                    "finite weights overlap the geometric tail".into(),
                ));
            }
        }
        let total = self.total_mass();
        if !total.is_one() {
            return Err(Error::InvalidInput(format!("type weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> Q {
        let mut total: Q = self.finite.values().sum();
        if let Some(g) = &self.geometric {
            total += &g.base / (Q::one() - &g.ratio);
        }
        total
    }

    pub fn prob(&self, t: u64) -> Q {
        if let Some(w) = self.finite.get(&t) {
            return w.clone();
        }
        match &self.geometric {
            Some(g) if t >= g.start => &g.base * pow_q(&g.ratio, t - g.start),
            _ => Q::zero(),
        }
    }

    /// Largest type with positive probability; `None` when unbounded.
    pub fn max_support(&self) -> Option<u64> {
        match &self.geometric {
            Some(g) if g.base.is_positive() => None,
            _ => self
                .finite
                .iter()
                .filter(|(_, w)| w.is_positive())
                .map(|(t, _)| *t)
                .max(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.max_support().is_some()
    }

    /// Types with positive probability up to and including `cap`.
    pub fn support_up_to(&self, cap: u64) -> Vec<u64> {
        (0..=cap).filter(|&t| self.prob(t).is_positive()).collect()
    }

    /// `P(t > cap)`.
    pub fn tail_mass_above(&self, cap: u64) -> Q {
        let mut tail: Q = self
            .finite
            .range(cap.saturating_add(1)..)
            .map(|(_, w)| w.clone())
            .sum();
        if let Some(g) = &self.geometric {
            let from = g.start.max(cap.saturating_add(1));
            tail += &g.base * pow_q(&g.ratio, from - g.start) / (Q::one() - &g.ratio);
        }
        tail
    }

    /// `P(t >= k)`.
    pub fn mass_at_least(&self, k: u64) -> Q {
        if k == 0 {
            return Q::one();
        }
        self.tail_mass_above(k - 1)
    }

    /// `Σ_{t >= from} p(t) x^t`, in closed form for the geometric tail.
    /// Requires `|ratio · x| < 1` when a tail is present.
    pub fn power_sum(&self, x: &Q, from: u64) -> Q {
        let mut acc: Q = self
            .finite
            .range(from..)
            .map(|(t, w)| w * pow_q(x, *t))
            .sum();
        if let Some(g) = &self.geometric {
            let s = g.start.max(from);
            let rx = &g.ratio * x;
            assert!(rx.abs() < Q::one(), "geometric power sum diverges");
            acc += &g.base * pow_q(&g.ratio, s - g.start) * pow_q(x, s) / (Q::one() - rx);
        }
        acc
    }
}

/// State-conditional outcome distribution with finitely many outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Experiment {
    pub outcomes: Vec<String>,
    /// `likelihood[state][outcome]`.
    #[serde(with = "serde_q::matrix")]
    pub likelihood: Vec<Vec<Q>>,
}

impl Experiment {
    pub fn new(outcomes: Vec<String>, likelihood: Vec<Vec<Q>>) -> Result<Self> {
        let e = Experiment {
            outcomes,
            likelihood,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.likelihood {
            if row.len() != self.outcomes.len() {
                return Err(Error::InvalidInput("likelihood row length mismatch".into()));
            }
            if row.iter().any(|v| v.is_negative()) {
                return Err(Error::InvalidInput("negative likelihood".into()));
            }
            let s: Q = row.iter().sum();
            if !s.is_one() {
                return Err(Error::InvalidInput(format!("likelihoods sum to {s}, not 1")));
            }
        }
        Ok(())
    }

    /// One outcome per state, revealing it.
    pub fn fully_informative(states: &[String]) -> Self {
        let n = states.len();
        Experiment {
            outcomes: states.to_vec(),
            likelihood: (0..n)
                .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
                .collect(),
        }
    }

    pub fn uninformative(n_states: usize) -> Self {
        Experiment {
            outcomes: vec!["null".into()],
            likelihood: vec![vec![Q::one()]; n_states],
        }
    }

    /// Experiment whose outcome `k` induces `beliefs[k]` with probability
    /// `weights[k]` from `prior`: `σ(k|θ) = w_k π_k(θ) / π₀(θ)`.
    pub fn from_posteriors(prior: &Belief, dist: &PosteriorDistribution) -> Result<Self> {
        let n = prior.len();
        let mut likelihood = vec![Vec::with_capacity(dist.support.len()); n];
        for (b, w) in &dist.support {
            for (s, row) in likelihood.iter_mut().enumerate() {
                if prior.p(s).is_zero() {
                    row.push(Q::zero());
                } else {
                    row.push(w * b.p(s) / prior.p(s));
                }
            }
        }
        let outcomes = (0..dist.support.len()).map(|k| format!("s{k}")).collect();
        Experiment::new(outcomes, likelihood)
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_uninformative(&self) -> bool {
        self.likelihood.windows(2).all(|w| w[0] == w[1])
    }

    /// Marginal outcome probability under `prior`.
    pub fn outcome_prob(&self, prior: &Belief, outcome: usize) -> Q {
        prior
            .0
            .iter()
            .zip(&self.likelihood)
            .map(|(p, row)| p * &row[outcome])
            .sum()
    }
}

/// Finite Bayes-plausible distribution over posteriors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDistribution {
    #[serde(with = "serde_q::weighted")]
    pub support: Vec<(Belief, Q)>,
}

impl PosteriorDistribution {
    pub fn mean(&self) -> Belief {
        Belief::mix(self.support.iter().map(|(b, w)| (b, w)))
    }

    pub fn total_weight(&self) -> Q {
        self.support.iter().map(|(_, w)| w.clone()).sum()
    }

    /// Sums weights of identical beliefs, drops zero weights and sorts.
    pub fn merged(&self) -> PosteriorDistribution {
        let mut map: BTreeMap<Belief, Q> = BTreeMap::new();
        for (b, w) in &self.support {
            if w.is_positive() {
                *map.entry(b.clone()).or_insert_with(Q::zero) += w;
            }
        }
        PosteriorDistribution {
            support: map.into_iter().collect(),
        }
    }

    pub fn weight_of(&self, belief: &Belief) -> Q {
        self.support
            .iter()
            .filter(|(b, _)| b == belief)
            .map(|(_, w)| w.clone())
            .sum()
    }
}

pub fn posterior_update(prior: &Belief, exp: &Experiment, outcome: usize) -> Result<Belief> {
    let total = exp.outcome_prob(prior, outcome);
    if total.is_zero() {
        return Err(Error::ZeroProbabilityOutcome { outcome });
    }
    Ok(Belief(
        prior
            .0
            .iter()
            .zip(&exp.likelihood)
            .map(|(p, row)| p * &row[outcome] / &total)
            .collect(),
    ))
}

pub fn experiment_to_posteriors(prior: &Belief, exp: &Experiment) -> PosteriorDistribution {
    let mut support: Vec<(Belief, Q)> = Vec::new();
    for k in 0..exp.n_outcomes() {
        let w = exp.outcome_prob(prior, k);
        if w.is_zero() {
            continue;
        }
        let b = posterior_update(prior, exp, k).expect("positive-probability outcome");
        match support.iter_mut().find(|(x, _)| *x == b) {
            Some((_, acc)) => *acc += w,
            None => support.push((b, w)),
        }
    }
    PosteriorDistribution { support }
}

/// `A*(π)`: every receiver-optimal action, ties included.
pub fn best_responses(env: &PayoffEnvironment, belief: &Belief) -> Vec<usize> {
    let values = env.receiver_values(belief);
    let best = values.iter().max().expect("nonempty action set").clone();
    (0..values.len()).filter(|&a| values[a] == best).collect()
}

/// Best response preferred by the sender (lowest index among equals).
pub fn sender_preferred_action(env: &PayoffEnvironment, belief: &Belief) -> usize {
    let br = best_responses(env, belief);
    let best = br.iter().map(|&a| &env.sender_u[a]).max().unwrap().clone();
    *br.iter().find(|&&a| env.sender_u[a] == best).unwrap()
}

/// Best response least preferred by the sender (lowest index among equals).
pub fn sender_worst_action(env: &PayoffEnvironment, belief: &Belief) -> usize {
    let br = best_responses(env, belief);
    let worst = br.iter().map(|&a| &env.sender_u[a]).min().unwrap().clone();
    *br.iter().find(|&&a| env.sender_u[a] == worst).unwrap()
}

/// `ū(π)`.
pub fn indirect_utility_max(env: &PayoffEnvironment, belief: &Belief) -> Q {
    env.sender_u[sender_preferred_action(env, belief)].clone()
}

/// `u̲(π)`.
pub fn indirect_utility_min(env: &PayoffEnvironment, belief: &Belief) -> Q {
    env.sender_u[sender_worst_action(env, belief)].clone()
}

/// Sender payoff when the state is known to be `state`; requires a unique
/// receiver best reply there.
pub fn state_payoff(env: &PayoffEnvironment, state: usize) -> Result<Q> {
    let b = Belief::degenerate(env.n_states(), state);
    let br = best_responses(env, &b);
    if br.len() != 1 {
        return Err(Error::AssumptionViolation(format!(
            "receiver is indifferent among {} actions when the state is {}",
            br.len(),
            env.states[state]
        )));
    }
    Ok(env.sender_u[br[0]].clone())
}

/// `u(θ)` for every state.
pub fn state_payoffs(env: &PayoffEnvironment) -> Result<Vec<Q>> {
    (0..env.n_states()).map(|s| state_payoff(env, s)).collect()
}

/// `V̲(π₀)`: sender payoff under full revelation.
pub fn full_disclosure_payoff(env: &PayoffEnvironment) -> Result<Q> {
    full_disclosure_value(env, &env.prior)
}

pub fn full_disclosure_value(env: &PayoffEnvironment, belief: &Belief) -> Result<Q> {
    let u = state_payoffs(env)?;
    Ok(belief.0.iter().zip(&u).map(|(p, v)| p * v).sum())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrictOptimalityReport {
    pub holds: bool,
    /// `(action, support)` pairs where the action is optimal somewhere on the
    /// support but never strictly optimal.
    pub witnesses: Vec<(usize, Vec<usize>)>,
}

/// Maximum strict margin of `action` over beliefs supported in `support`;
/// `None` when `action` is never a best reply there. Also returns the
/// maximizing belief.
pub fn strict_margin(
    env: &PayoffEnvironment,
    action: usize,
    support: &[usize],
) -> Option<(Q, Belief)> {
    let k = support.len();
    let others: Vec<usize> = (0..env.n_actions()).filter(|&b| b != action).collect();
    // Variables: π_s for s in support, then m⁺, m⁻.
    let mut objective = vec![Q::zero(); k + 2];
    objective[k] = Q::one();
    objective[k + 1] = -Q::one();
    let mut lp = LinearProgram::new(k + 2, objective);
    let mut sum = vec![Q::one(); k];
    sum.extend([Q::zero(), Q::zero()]);
    lp.add(sum, Op::Eq, Q::one());
    for &b in &others {
        let mut row: Vec<Q> = support
            .iter()
            .map(|&s| &env.receiver_u[s][action] - &env.receiver_u[s][b])
            .collect();
        row.push(-Q::one());
        row.push(Q::one());
        lp.add(row, Op::Ge, Q::zero());
    }
    if others.is_empty() {
        // A lone action is strictly optimal everywhere; cap the margin.
        let mut row = vec![Q::zero(); k];
        row.extend([Q::one(), -Q::one()]);
        lp.add(row, Op::Le, Q::one());
    }
    match lp.solve() {
        LpOutcome::Optimal { x, value } => {
            if value.is_negative() {
                return None;
            }
            let mut probs = vec![Q::zero(); env.n_states()];
            for (i, &s) in support.iter().enumerate() {
                probs[s] = x[i].clone();
            }
            Some((value, Belief(probs)))
        }
        _ => None,
    }
}

pub fn check_strict_optimality(env: &PayoffEnvironment) -> StrictOptimalityReport {
    let n = env.n_states();
    let mut witnesses = Vec::new();
    for size in 1..=n {
        for support in (0..n).combinations(size) {
            for a in 0..env.n_actions() {
                if let Some((m, _)) = strict_margin(env, a, &support) {
                    if !m.is_positive() {
                        witnesses.push((a, support.clone()));
                    }
                }
            }
        }
    }
    StrictOptimalityReport {
        holds: witnesses.is_empty(),
        witnesses,
    }
}

/// Searches state and action orders under which sender utility strictly
/// increases in the action and receiver utility has strictly increasing
/// differences. Returns `(state_order, action_order)`.
pub fn is_monotone(env: &PayoffEnvironment) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
    const CAP: u128 = 1_000_000;
    let fact = |n: usize| (1..=n as u128).product::<u128>();
    let work = fact(env.n_actions()).saturating_mul(fact(env.n_states()));
    if work > CAP {
        return Err(Error::BudgetExceeded {
            what: "monotonicity permutation search".into(),
            limit: CAP as usize,
        });
    }
    // Strictly increasing sender utility pins the action order down.
    let mut actions: Vec<usize> = (0..env.n_actions()).collect();
    actions.sort_by(|&a, &b| env.sender_u[a].cmp(&env.sender_u[b]).then(a.cmp(&b)));
    if actions
        .windows(2)
        .any(|w| env.sender_u[w[0]] == env.sender_u[w[1]])
    {
        return Ok(None);
    }
    let u = &env.receiver_u;
    for states in (0..env.n_states()).permutations(env.n_states()) {
        let ok = states.windows(2).all(|s| {
            actions.windows(2).all(|a| {
                let hi = &u[s[1]][a[1]] - &u[s[1]][a[0]];
                let lo = &u[s[0]][a[1]] - &u[s[0]][a[0]];
                hi > lo
            })
        });
        if ok {
            return Ok(Some((states, actions)));
        }
    }
    Ok(None)
}

/// Builds the two-state receiver payoffs whose consecutive actions are
/// indifferent exactly at `thresholds` (probabilities of the second state):
/// `U_k(p) - U_{k-1}(p) = slope · (p - c_k)`, with `U_0 = 0`.
pub fn two_state_receiver(thresholds: &[Q], slope: &Q) -> Vec<Vec<Q>> {
    let mut low = vec![Q::zero()];
    let mut high = vec![Q::zero()];
    for c in thresholds {
        let l = low.last().unwrap() - slope * c;
        let h = high.last().unwrap() + slope * (Q::one() - c);
        low.push(l);
        high.push(h);
    }
    vec![low, high]
}

/// Two-state environment with states `θ0`, `θ1`, given sender payoffs,
/// receiver indifference thresholds and prior probability of `θ1`.
pub fn two_state_env(sender_u: Vec<Q>, thresholds: &[Q], slope: Q, p1: Q) -> Result<PayoffEnvironment> {
    let actions = sender_u.iter().map(|u| u.to_string()).collect();
    PayoffEnvironment::new(
        vec!["theta0".into(), "theta1".into()],
        actions,
        sender_u,
        two_state_receiver(thresholds, &slope),
        Belief::two(p1),
    )
}

pub fn int_vec(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| qi(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::rational::q;

    fn binary(s_bar_given: [Q; 2]) -> Experiment {
        let [l0, l1] = s_bar_given;
        Experiment::new(
            vec!["low".into(), "high".into()],
            vec![vec![Q::one() - &l0, l0], vec![Q::one() - &l1, l1]],
        )
        .unwrap()
    }

    #[test]
    fn bayes_examples() {
        let prior = Belief(vec![q(5, 8), q(3, 8)]);
        let e = binary([q(3, 5), qi(1)]);
        assert_eq!(posterior_update(&prior, &e, 1).unwrap(), Belief::two(q(1, 2)));
        let d = experiment_to_posteriors(&prior, &e);
        assert_eq!(d.weight_of(&Belief::two(q(1, 2))), q(3, 4));
        assert_eq!(d.weight_of(&Belief::two(qi(0))), q(1, 4));
        assert_eq!(d.mean(), prior);

        let prior = Belief::two(q(1, 2));
        let e = binary([q(1, 3), qi(1)]);
        assert_eq!(posterior_update(&prior, &e, 1).unwrap(), Belief::two(q(3, 4)));
        let u = Experiment::uninformative(2);
        assert_eq!(posterior_update(&prior, &u, 0).unwrap(), prior);
        let e = binary([qi(0), qi(0)]);
        assert_eq!(
            posterior_update(&prior, &e, 1),
            Err(Error::ZeroProbabilityOutcome { outcome: 1 })
        );
    }

    #[test]
    fn best_response_examples() {
        let env1 = library::three_action(q(1, 2));
        assert_eq!(best_responses(&env1, &Belief::two(q(1, 3))), vec![0, 1]);
        assert_eq!(best_responses(&env1, &Belief::two(qi(1))), vec![2]);
        assert_eq!(indirect_utility_max(&env1, &Belief::two(q(1, 3))), qi(2));
        assert_eq!(indirect_utility_min(&env1, &Belief::two(q(1, 3))), qi(0));
        let env2 = library::four_action(q(3, 8));
        assert_eq!(best_responses(&env2, &Belief::two(q(3, 8))), vec![1]);
        assert_eq!(indirect_utility_max(&env2, &Belief::two(q(1, 2))), qi(3));
    }

    #[test]
    fn full_disclosure_examples() {
        assert_eq!(full_disclosure_payoff(&library::three_action(q(1, 2))).unwrap(), q(3, 2));
        assert_eq!(full_disclosure_payoff(&library::three_action(q(1, 6))).unwrap(), q(1, 2));
        let mut env = library::three_action(q(1, 2));
        env.receiver_u[1][1] = env.receiver_u[1][2].clone();
        assert!(matches!(
            full_disclosure_payoff(&env),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn strict_optimality_examples() {
        assert!(check_strict_optimality(&library::three_action(q(1, 2))).holds);
        assert!(check_strict_optimality(&library::four_action(q(3, 8))).holds);
        let mut env = library::three_action(q(1, 2));
        env.actions.push("dup".into());
        env.sender_u.push(qi(5));
        for row in env.receiver_u.iter_mut() {
            let v = row[1].clone();
            row.push(v);
        }
        let report = check_strict_optimality(&env);
        assert!(!report.holds);
        let flagged: Vec<usize> = report.witnesses.iter().map(|w| w.0).collect();
        assert!(flagged.contains(&1) && flagged.contains(&3));
    }

    #[test]
    fn monotone_examples() {
        let env1 = library::three_action(q(1, 2));
        assert_eq!(is_monotone(&env1).unwrap(), Some((vec![0, 1], vec![0, 1, 2])));
        assert!(is_monotone(&library::four_action(q(3, 8))).unwrap().is_some());
        let mut flat = env1.clone();
        flat.sender_u = vec![qi(1); 3];
        assert_eq!(is_monotone(&flat).unwrap(), None);
    }

    #[test]
    fn type_distribution_closed_forms() {
        let p = library::geometric_types();
        assert_eq!(p.total_mass(), qi(1));
        assert_eq!(p.prob(0), q(1, 3));
        assert_eq!(p.prob(3), q(1, 12));
        assert_eq!(p.tail_mass_above(4), q(1, 24));
        assert_eq!(p.power_sum(&q(2, 3), 1), q(1, 3));
        assert!(!p.is_bounded());
        let bounded = TypeDistribution::finite([(0, q(1, 20)), (3, q(19, 20))]).unwrap();
        assert_eq!(bounded.max_support(), Some(3));
        assert!(TypeDistribution::finite([(0, q(1, 2))]).is_err());
    }

    #[test]
    fn receiver_thresholds() {
        let u = two_state_receiver(&[q(1, 3), q(2, 3)], &qi(3));
        assert_eq!(u, vec![int_vec(&[0, -1, -3]), int_vec(&[0, 2, 3])]);
    }
}
