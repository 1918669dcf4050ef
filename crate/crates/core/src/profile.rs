//! Strategy profiles: the sender's initial experiment and per-type plans, the
//! receiver's action rule keyed by disclosure history, and the off-path policy.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    best_responses, posterior_update, state_payoffs, Belief, Experiment, PayoffEnvironment,
};
use crate::rational::{serde_q, Q};

pub const FULL_DISCLOSURE: &str = "full-disclosure";
pub const UNINFORMATIVE: &str = "uninformative";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedExperiment {
    pub name: String,
    #[serde(flatten)]
    pub experiment: Experiment,
}

/// A deterministic continuation plan after the interim outcome.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PurePlan {
    /// Stop and disclose the listed positions (0-based) of the conducted
    /// sequence.
    Stop { disclose: Vec<usize> },
    /// Conduct `experiment`, then continue with `next[outcome]`.
    Run {
        experiment: String,
        next: Vec<PurePlan>,
    },
}

impl PurePlan {
    pub fn stop() -> Self {
        PurePlan::Stop { disclose: vec![] }
    }

    /// Longest chain of experiments.
    pub fn depth(&self) -> usize {
        match self {
            PurePlan::Stop { .. } => 0,
            PurePlan::Run { next, .. } => 1 + next.iter().map(|p| p.depth()).max().unwrap_or(0),
        }
    }

    /// Human-readable rendering, one node per line.
    pub fn describe(&self, menu: &[NamedExperiment]) -> String {
        let mut out = String::new();
        self.describe_into(menu, 0, &mut out);
        out
    }

    fn describe_into(&self, menu: &[NamedExperiment], indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match self {
            PurePlan::Stop { disclose } if disclose.is_empty() => {
                out.push_str(&format!("{pad}stop, disclose nothing\n"));
            }
            PurePlan::Stop { disclose } => {
                let items: Vec<String> = disclose.iter().map(|i| format!("#{}", i + 1)).collect();
                out.push_str(&format!(
                    "{pad}stop, disclose experiment(s) {}\n",
                    items.join(", ")
                ));
            }
            PurePlan::Run { experiment, next } => {
                out.push_str(&format!("{pad}run {experiment}\n"));
                let outcomes = menu
                    .iter()
                    .find(|e| &e.name == experiment)
                    .map(|e| e.experiment.outcomes.clone())
                    .unwrap_or_default();
                for (k, plan) in next.iter().enumerate() {
                    let label = outcomes.get(k).cloned().unwrap_or_else(|| k.to_string());
                    out.push_str(&format!("{pad}  if {label}:\n"));
                    plan.describe_into(menu, indent + 2, out);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeRange {
    pub min: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u64>,
}

impl TypeRange {
    pub fn single(t: u64) -> Self {
        TypeRange {
            min: t,
            max: Some(t),
        }
    }

    pub fn between(min: u64, max: u64) -> Self {
        TypeRange {
            min,
            max: Some(max),
        }
    }

    pub fn at_least(min: u64) -> Self {
        TypeRange { min, max: None }
    }

    pub fn contains(&self, t: u64) -> bool {
        t >= self.min && self.max.is_none_or(|m| t <= m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedPlan {
    #[serde(with = "serde_q")]
    pub weight: Q,
    pub plan: PurePlan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub types: TypeRange,
    /// Outcome index of the initial experiment.
    pub interim: usize,
    pub components: Vec<WeightedPlan>,
}

/// Receiver information set: the initial experiment, its outcome, and the
/// multiset of disclosed `(experiment, outcome)` pairs in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct History {
    pub initial: String,
    pub interim: usize,
    pub disclosed: Vec<(String, usize)>,
}

impl History {
    pub fn new(initial: &str, interim: usize, mut disclosed: Vec<(String, usize)>) -> Self {
        disclosed.sort();
        History {
            initial: initial.to_string(),
            interim,
            disclosed,
        }
    }

    pub fn n_disclosed(&self) -> usize {
        self.disclosed.len()
    }

    pub fn display(&self) -> String {
        let items: Vec<String> = self
            .disclosed
            .iter()
            .map(|(e, o)| format!("{e}:{o}"))
            .collect();
        format!("{}:{} [{}]", self.initial, self.interim, items.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverEntry {
    pub history: History,
    pub belief: Belief,
    /// Optional belief about the sender's type.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "opt_type_belief"
    )]
    pub types: Option<Vec<(u64, Q)>>,
    /// Mixed action as `(action index, probability)`.
    #[serde(with = "serde_q::weighted")]
    pub action: Vec<(usize, Q)>,
}

mod opt_type_belief {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::{fmt_q, parse_q, Q};

    pub fn serialize<S: Serializer>(v: &Option<Vec<(u64, Q)>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|items| {
                items
                    .iter()
                    .map(|(t, w)| (*t, fmt_q(w)))
                    .collect::<Vec<_>>()
            })
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<(u64, Q)>>, D::Error> {
        let raw = Option::<Vec<(u64, String)>>::deserialize(d)?;
        raw.map(|items| {
            items
                .into_iter()
                .map(|(t, w)| Ok((t, parse_q(&w).map_err(serde::de::Error::custom)?)))
                .collect()
        })
        .transpose()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffPathBelief {
    /// Posterior equals the naive belief.
    Naive,
    /// Posterior concentrates on the sender-worst state in the naive support.
    SkepticalWorst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    SenderPreferred,
    SenderWorst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffPathPolicy {
    pub belief: OffPathBelief,
    pub ties: TieRule,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverRule {
    pub entries: Vec<ReceiverEntry>,
    pub off_path: OffPathPolicy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub initial: String,
    pub experiments: Vec<NamedExperiment>,
    pub plans: Vec<PlanEntry>,
    pub receiver: ReceiverRule,
}

/// Where a receiver response came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseSource {
    Explicit,
    Degenerate,
    ForcedNaive,
    Policy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Response {
    pub belief: Belief,
    pub types: Option<Vec<(u64, Q)>>,
    pub action: Vec<(usize, Q)>,
    pub source: ResponseSource,
}

impl StrategyProfile {
    /// Experiments available to the sender: the profile's own plus the
    /// fully informative and uninformative experiments.
    pub fn menu(&self, env: &PayoffEnvironment) -> Vec<NamedExperiment> {
        let mut menu = self.experiments.clone();
        if !menu.iter().any(|e| e.name == FULL_DISCLOSURE) {
            menu.push(NamedExperiment {
                name: FULL_DISCLOSURE.into(),
                experiment: Experiment::fully_informative(&env.states),
            });
        }
        if !menu.iter().any(|e| e.name == UNINFORMATIVE) {
            menu.push(NamedExperiment {
                name: UNINFORMATIVE.into(),
                experiment: Experiment::uninformative(env.n_states()),
            });
        }
        menu
    }

    /// Plan components for type `t` after interim outcome `interim`;
    /// stopping without disclosure when no entry matches.
    pub fn plan_for(&self, t: u64, interim: usize) -> Vec<WeightedPlan> {
        self.plans
            .iter()
            .find(|e| e.interim == interim && e.types.contains(t))
            .map(|e| e.components.clone())
            .unwrap_or_else(|| {
                vec![WeightedPlan {
                    weight: Q::one(),
                    plan: PurePlan::stop(),
                }]
            })
    }

    pub fn validate(&self, env: &PayoffEnvironment) -> Result<()> {
        let menu = self.menu(env);
        let find = |name: &str| {
            menu.iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown experiment {name:?}")))
        };
        for e in &self.experiments {
            e.experiment.validate()?;
            if e.experiment.likelihood.len() != env.n_states() {
                return Err(Error::InvalidInput(format!(
                    "experiment {:?} has the wrong number of states",
                    e.name
                )));
            }
        }
        let initial = find(&self.initial)?;
        for entry in &self.plans {
            if entry.interim >= initial.experiment.n_outcomes() {
                return Err(Error::InvalidInput(format!(
                    "plan for interim outcome {} out of range",
                    entry.interim
                )));
            }
            let total: Q = entry.components.iter().map(|c| c.weight.clone()).sum();
            if !total.is_one() || entry.components.iter().any(|c| c.weight.is_negative()) {
                return Err(Error::InvalidInput(format!(
                    "plan weights for types {:?} at interim {} must form a distribution",
                    entry.types, entry.interim
                )));
            }
            for c in &entry.components {
                check_plan(&c.plan, &menu, 0)?;
            }
        }
        for r in &self.receiver.entries {
            let total: Q = r.action.iter().map(|(_, w)| w.clone()).sum();
            if !total.is_one() || r.action.iter().any(|(a, w)| w.is_negative() || *a >= env.n_actions()) {
                return Err(Error::InvalidInput(format!(
                    "receiver action at {} is not a distribution over actions",
                    r.history.display()
                )));
            }
            Belief::new(r.belief.0.clone())?;
        }
        Ok(())
    }
}

fn check_plan(plan: &PurePlan, menu: &[NamedExperiment], conducted: usize) -> Result<()> {
    match plan {
        PurePlan::Stop { disclose } => {
            let mut seen = disclose.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != disclose.len() || disclose.iter().any(|&i| i >= conducted) {
                return Err(Error::InvalidInput(format!(
                    "disclosure {disclose:?} is not a subset of the {conducted} conducted experiments"
                )));
            }
            Ok(())
        }
        PurePlan::Run { experiment, next } => {
            let e = menu
                .iter()
                .find(|e| &e.name == experiment)
                .ok_or_else(|| Error::InvalidInput(format!("unknown experiment {experiment:?}")))?;
            if next.len() != e.experiment.n_outcomes() {
                return Err(Error::InvalidInput(format!(
                    "plan after {experiment:?} needs one branch per outcome"
                )));
            }
            next.iter()
                .try_for_each(|p| check_plan(p, menu, conducted + 1))
        }
    }
}

/// Naive belief: Bayes update of `interim` on every disclosed outcome.
pub fn naive_belief(
    interim: &Belief,
    menu: &[NamedExperiment],
    disclosed: &[(String, usize)],
) -> Option<Belief> {
    let mut b = interim.clone();
    for (name, o) in disclosed {
        let e = &menu.iter().find(|e| &e.name == name)?.experiment;
        b = posterior_update(&b, e, *o).ok()?;
    }
    Some(b)
}

/// Mixed action realizing the tie rule at `belief`.
pub fn tie_action(env: &PayoffEnvironment, belief: &Belief, ties: TieRule) -> usize {
    match ties {
        TieRule::SenderPreferred => crate::model::sender_preferred_action(env, belief),
        TieRule::SenderWorst => crate::model::sender_worst_action(env, belief),
    }
}

/// State in `support` with the lowest full-information sender payoff
/// (lowest index among ties).
pub fn worst_state(u: &[Q], support: &[usize]) -> usize {
    *support
        .iter()
        .min_by(|&&a, &&b| u[a].cmp(&u[b]).then(a.cmp(&b)))
        .expect("nonempty support")
}

/// Resolves receiver responses for a profile: explicit entries first, then
/// the belief rules every response must obey, then the off-path policy.
pub struct ReceiverResolver<'a> {
    pub env: &'a PayoffEnvironment,
    pub profile: &'a StrategyProfile,
    pub menu: Vec<NamedExperiment>,
    index: HashMap<History, usize>,
    state_u: Vec<Q>,
    /// Disclosure count at which the naive belief is forced (largest type).
    pub max_type: Option<u64>,
}

impl<'a> ReceiverResolver<'a> {
    pub fn new(
        env: &'a PayoffEnvironment,
        profile: &'a StrategyProfile,
        max_type: Option<u64>,
    ) -> Result<Self> {
        let index = profile
            .receiver
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.history.clone(), i))
            .collect();
        Ok(ReceiverResolver {
            env,
            profile,
            menu: profile.menu(env),
            index,
            state_u: state_payoffs(env)?,
            max_type,
        })
    }

    pub fn state_u(&self) -> &[Q] {
        &self.state_u
    }

    pub fn experiment(&self, name: &str) -> Option<&Experiment> {
        self.menu
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.experiment)
    }

    pub fn interim_belief(&self, initial: &str, interim: usize) -> Option<Belief> {
        let e = self.experiment(initial)?;
        posterior_update(&self.env.prior, e, interim).ok()
    }

    pub fn explicit(&self, history: &History) -> Option<&ReceiverEntry> {
        self.index
            .get(history)
            .map(|&i| &self.profile.receiver.entries[i])
    }

    /// `None` when the history has zero probability under every state.
    pub fn resolve(&self, history: &History) -> Option<Response> {
        let interim = self.interim_belief(&history.initial, history.interim)?;
        let naive = naive_belief(&interim, &self.menu, &history.disclosed)?;
        if let Some(e) = self.explicit(history) {
            return Some(Response {
                belief: e.belief.clone(),
                types: e.types.clone(),
                action: e.action.clone(),
                source: ResponseSource::Explicit,
            });
        }
        let ties = self.profile.receiver.off_path.ties;
        let k = history.n_disclosed() as u64;
        let (belief, source) = if naive.is_degenerate() {
            (naive, ResponseSource::Degenerate)
        } else if self.max_type.is_some_and(|n| k >= n) {
            (naive, ResponseSource::ForcedNaive)
        } else {
            match self.profile.receiver.off_path.belief {
                OffPathBelief::Naive => (naive, ResponseSource::Policy),
                OffPathBelief::SkepticalWorst => {
                    let s = worst_state(&self.state_u, &naive.support());
                    (
                        Belief::degenerate(self.env.n_states(), s),
                        ResponseSource::Policy,
                    )
                }
            }
        };
        let a = tie_action(self.env, &belief, ties);
        Some(Response {
            belief,
            types: None,
            action: vec![(a, Q::one())],
            source,
        })
    }
}

/// Sender's expected payoff from a mixed receiver action.
pub fn action_value(env: &PayoffEnvironment, action: &[(usize, Q)]) -> Q {
    env.sender_value(action)
}

/// Receiver best-response margin of a mixed action at a belief: negative when
/// some action in the support is suboptimal; otherwise the gap to the best
/// action outside the best-reply set (zero when every action is a best reply).
pub fn receiver_margin(env: &PayoffEnvironment, belief: &Belief, action: &[(usize, Q)]) -> Q {
    let values = env.receiver_values(belief);
    let best = values.iter().max().unwrap().clone();
    let used: Vec<usize> = action
        .iter()
        .filter(|(_, w)| w.is_positive())
        .map(|(a, _)| *a)
        .collect();
    let worst_used = used.iter().map(|&a| values[a].clone()).min().unwrap_or_else(|| best.clone());
    if worst_used < best {
        return worst_used - best;
    }
    let br = best_responses(env, belief);
    (0..env.n_actions())
        .filter(|a| !br.contains(a))
        .map(|a| &best - &values[a])
        .min()
        .unwrap_or_else(Q::zero)
}
