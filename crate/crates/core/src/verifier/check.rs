//! Equilibrium certificate: receiver optimality, sender optimality against
//! every menu continuation and disclosure subset, on-path Bayes consistency,
//! and the necessary belief conditions at every queried history.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::Belief;
use crate::profile::{
    receiver_margin, History, PurePlan, ReceiverResolver, Response, ResponseSource,
    StrategyProfile,
};
use crate::rational::{serde_q, sup_distance, Q};
use crate::verifier::game::{interim_probs, path_masses, InterimSolver, PathMass, TruncatedGame};

pub const SCOPE: &str = "PEBE relative to the menu and necessary belief conditions";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "at")]
pub enum DecisionPoint {
    /// Choice of the initial experiment (ex ante over all types).
    Initial,
    /// A type's continuation after an interim outcome.
    Interim { sender_type: u64, interim: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderMargin {
    pub point: DecisionPoint,
    #[serde(with = "serde_q")]
    pub optimum: Q,
    #[serde(with = "serde_q")]
    pub profile_value: Q,
    /// Negative: shortfall of the profile; otherwise the lead over the best
    /// first move the profile does not use.
    #[serde(with = "serde_q")]
    pub margin: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverMargin {
    pub history: History,
    pub source: ResponseSource,
    #[serde(with = "serde_q")]
    pub margin: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deviation {
    pub sender_type: u64,
    /// History at which the deviation starts (interim outcome, nothing
    /// disclosed yet).
    pub history: History,
    pub plan: PurePlan,
    #[serde(with = "serde_q")]
    pub gain: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialDeviation {
    pub experiment: String,
    #[serde(with = "serde_q")]
    pub gain: Q,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumCertificate {
    pub verdict: Verdict,
    pub scope: String,
    pub type_cap: u64,
    #[serde(with = "serde_q")]
    pub tail_mass: Q,
    pub node_count: usize,
    #[serde(with = "serde_q")]
    pub ex_ante_payoff: Q,
    pub sender_margins: Vec<SenderMargin>,
    pub receiver_margins: Vec<ReceiverMargin>,
    pub violations: Vec<String>,
    pub worst_deviation: Option<Deviation>,
    pub best_initial_deviation: Option<InitialDeviation>,
}

impl EquilibriumCertificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn min_sender_margin(&self) -> Option<&Q> {
        self.sender_margins.iter().map(|m| &m.margin).min()
    }

    pub fn min_receiver_margin(&self) -> Option<&Q> {
        self.receiver_margins.iter().map(|m| &m.margin).min()
    }

    /// Human-readable worst deviation.
    pub fn explain(&self, game: &TruncatedGame) -> String {
        let mut out = String::new();
        match &self.worst_deviation {
            Some(d) => {
                out.push_str(&format!(
                    "type {} at {} gains {} by deviating to:\n",
                    d.sender_type,
                    d.history.display(),
                    d.gain
                ));
                out.push_str(&d.plan.describe(&game.menu));
            }
            None => out.push_str("no profitable continuation deviation\n"),
        }
        if let Some(d) = &self.best_initial_deviation {
            if d.gain.is_positive() {
                out.push_str(&format!(
                    "initial experiment {} gains {} ex ante\n",
                    d.experiment, d.gain
                ));
            }
        }
        out
    }
}

fn stated_matches(stated: &Belief, bayes: &Belief, tol: &Q) -> bool {
    if tol.is_zero() {
        stated == bayes
    } else {
        &sup_distance(stated.probs(), bayes.probs()) <= tol
    }
}

/// Checks the profile on the truncated game. Failures are certificate content;
/// `Err` only signals a malformed profile.
pub fn check_pebe(game: &TruncatedGame, profile: &StrategyProfile) -> Result<EquilibriumCertificate> {
    profile.validate(&game.env)?;
    let resolver = ReceiverResolver::new(&game.env, profile, game.max_type)?;
    let paths = path_masses(game, profile)?;
    let mut violations = Vec::new();
    let mut sender_margins = Vec::new();
    let mut worst: Option<Deviation> = None;
    let mut checked: BTreeMap<History, Response> = BTreeMap::new();

    let initial_idx = game.menu_index(&profile.initial).expect("validated");
    let probs = interim_probs(game, initial_idx);
    let normalized = game.normalized_types();
    let mut profile_ex_ante = Q::zero();
    for (s0, ps0) in probs.iter().enumerate() {
        if ps0.is_zero() {
            continue;
        }
        let mut solver =
            InterimSolver::new(game, &resolver, &profile.initial, s0).expect("positive interim");
        for (t, pt) in &normalized {
            let components: Vec<_> = profile
                .plan_for(*t, s0)
                .into_iter()
                .filter(|c| c.weight.is_positive())
                .collect();
            let (optimum, _) = solver.value(&solver.empty(), *t);
            let mut values = Vec::new();
            let mut used_first = Vec::new();
            for c in &components {
                if c.plan.depth() as u64 > *t {
                    violations.push(format!(
                        "type {t} at interim {s0}: plan runs {} experiments, capacity {t}",
                        c.plan.depth()
                    ));
                }
                match solver.evaluate(&c.plan) {
                    Ok(v) => values.push(v),
                    Err(msg) => {
                        violations.push(format!("type {t} at interim {s0}: {msg}"));
                        values.push(Q::zero());
                    }
                }
                used_first.push(match &c.plan {
                    PurePlan::Stop { .. } => None,
                    PurePlan::Run { experiment, .. } => game.menu_index(experiment),
                });
            }
            let value: Q = components
                .iter()
                .zip(&values)
                .map(|(c, v)| &c.weight * v)
                .sum();
            profile_ex_ante += ps0 * pt * &value;
            let worst_component = values.iter().min().cloned().unwrap_or_else(Q::zero);
            let margin = if worst_component < optimum {
                let gain = &optimum - &worst_component;
                if worst.as_ref().is_none_or(|w| gain > w.gain) {
                    worst = Some(Deviation {
                        sender_type: *t,
                        history: solver.history(&solver.empty()),
                        plan: solver.optimal_plan(*t),
                        gain: gain.clone(),
                    });
                }
                -gain
            } else {
                unused_lead(&mut solver, &used_first, &optimum, *t)
            };
            sender_margins.push(SenderMargin {
                point: DecisionPoint::Interim {
                    sender_type: *t,
                    interim: s0,
                },
                optimum,
                profile_value: value,
                margin,
            });
        }
        for (h, r) in solver.queried() {
            checked.insert(h, r.clone());
        }
    }

    let mut best_initial: Option<InitialDeviation> = None;
    for (e, named) in game.menu.iter().enumerate() {
        if named.name == profile.initial {
            continue;
        }
        let mut dev = Q::zero();
        for (s0, ps0) in interim_probs(game, e).iter().enumerate() {
            if ps0.is_zero() {
                continue;
            }
            let mut solver =
                InterimSolver::new(game, &resolver, &named.name, s0).expect("positive interim");
            for (t, pt) in &normalized {
                dev += ps0 * pt * solver.value(&solver.empty(), *t).0;
            }
            for (h, r) in solver.queried() {
                checked.insert(h, r.clone());
            }
        }
        let gain = dev - &profile_ex_ante;
        if best_initial.as_ref().is_none_or(|b| gain > b.gain) {
            best_initial = Some(InitialDeviation {
                experiment: named.name.clone(),
                gain,
            });
        }
    }
    if let Some(b) = &best_initial {
        sender_margins.push(SenderMargin {
            point: DecisionPoint::Initial,
            optimum: &profile_ex_ante + q_max0(&b.gain),
            profile_value: profile_ex_ante.clone(),
            margin: -b.gain.clone(),
        });
    }

    for entry in &profile.receiver.entries {
        if let Some(r) = resolver.resolve(&entry.history) {
            checked.insert(entry.history.clone(), r);
        } else {
            violations.push(format!(
                "receiver entry at {} describes a zero-probability history",
                entry.history.display()
            ));
        }
    }

    let mut receiver_margins = Vec::new();
    for (h, r) in &checked {
        receiver_margins.push(ReceiverMargin {
            history: h.clone(),
            source: r.source,
            margin: receiver_margin(&game.env, &r.belief, &r.action),
        });
        necessary_conditions(game, &resolver, h, r, &mut violations);
    }

    for (h, mass) in &paths {
        bayes_condition(game, &resolver, h, mass, &mut violations);
    }

    let ex_ante_payoff = ex_ante_from_paths(game, &resolver, &paths);
    let margins_ok = sender_margins.iter().all(|m| !m.margin.is_negative())
        && receiver_margins.iter().all(|m| !m.margin.is_negative());
    let verdict = if margins_ok && violations.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(EquilibriumCertificate {
        verdict,
        scope: SCOPE.into(),
        type_cap: game.cap,
        tail_mass: game.tail_mass.clone(),
        node_count: game.node_count,
        ex_ante_payoff,
        sender_margins,
        receiver_margins,
        violations,
        worst_deviation: worst,
        best_initial_deviation: best_initial,
    })
}

fn q_max0(v: &Q) -> Q {
    if v.is_positive() {
        v.clone()
    } else {
        Q::zero()
    }
}

/// Lead of the optimum over the best first move the profile never uses.
fn unused_lead(
    solver: &mut InterimSolver<'_>,
    used_first: &[Option<usize>],
    optimum: &Q,
    t: u64,
) -> Q {
    let empty = solver.empty();
    let mut best_unused: Option<Q> = None;
    if !used_first.contains(&None) {
        best_unused = Some(solver.stop_value(&empty).0);
    }
    if t > 0 {
        for e in 0..solver.game.menu.len() {
            if !used_first.contains(&Some(e)) {
                let v = solver.run_value(&empty, e, t - 1);
                if best_unused.as_ref().is_none_or(|b| &v > b) {
                    best_unused = Some(v);
                }
            }
        }
    }
    best_unused.map_or_else(Q::zero, |b| optimum - b)
}

fn necessary_conditions(
    game: &TruncatedGame,
    resolver: &ReceiverResolver<'_>,
    h: &History,
    r: &Response,
    violations: &mut Vec<String>,
) {
    let k = h.n_disclosed() as u64;
    if let Some(types) = &r.types {
        if types.iter().any(|(t, w)| w.is_positive() && *t < k) {
            violations.push(format!(
                "{}: type belief puts mass on types below {k}, the number of disclosures",
                h.display()
            ));
        }
    }
    let Some(interim) = resolver.interim_belief(&h.initial, h.interim) else {
        return;
    };
    let Some(naive) = crate::profile::naive_belief(&interim, &game.menu, &h.disclosed) else {
        return;
    };
    let allowed: BTreeSet<usize> = naive.support().into_iter().collect();
    if r.belief.support().iter().any(|s| !allowed.contains(s)) {
        violations.push(format!(
            "{}: belief {} leaves the naive support",
            h.display(),
            r.belief.display()
        ));
    }
    if game.max_type.is_some_and(|n| k >= n) && r.belief != naive {
        violations.push(format!(
            "{}: belief {} differs from the naive belief {} after the maximal number of disclosures",
            h.display(),
            r.belief.display(),
            naive.display()
        ));
    }
}

fn bayes_condition(
    game: &TruncatedGame,
    resolver: &ReceiverResolver<'_>,
    h: &History,
    mass: &PathMass,
    violations: &mut Vec<String>,
) {
    let total = mass.total();
    if total.is_zero() {
        return;
    }
    let Some(entry) = resolver.explicit(h) else {
        violations.push(format!(
            "on-path history {} has no receiver entry",
            h.display()
        ));
        return;
    };
    let bayes = mass.belief();
    let tol = if game.is_truncated() {
        &game.tail_mass / &total
    } else {
        Q::zero()
    };
    if !stated_matches(&entry.belief, &bayes, &tol) {
        violations.push(format!(
            "{}: stated belief {} differs from Bayes {}",
            h.display(),
            entry.belief.display(),
            bayes.display()
        ));
    }
}

fn ex_ante_from_paths(
    game: &TruncatedGame,
    resolver: &ReceiverResolver<'_>,
    paths: &BTreeMap<History, PathMass>,
) -> Q {
    let mut total = Q::zero();
    for (h, mass) in paths {
        if let Some(r) = resolver.resolve(h) {
            total += mass.total() * game.env.sender_value(&r.action);
        }
    }
    total / &game.covered_mass
}

/// Exact ex-ante sender payoff on the truncated game (types renormalized).
pub fn ex_ante_payoff(game: &TruncatedGame, profile: &StrategyProfile) -> Result<Q> {
    let resolver = ReceiverResolver::new(&game.env, profile, game.max_type)?;
    let paths = path_masses(game, profile)?;
    Ok(ex_ante_from_paths(game, &resolver, &paths))
}

/// Optimal continuation of type `t` after interim outcome `interim`, against
/// the profile's receiver rule.
pub fn best_continuation(
    game: &TruncatedGame,
    profile: &StrategyProfile,
    t: u64,
    interim: usize,
) -> Result<Option<(Q, PurePlan)>> {
    let resolver = ReceiverResolver::new(&game.env, profile, game.max_type)?;
    let Some(mut solver) = InterimSolver::new(game, &resolver, &profile.initial, interim) else {
        return Ok(None);
    };
    let empty = solver.empty();
    let v = solver.value(&empty, t).0;
    Ok(Some((v, solver.optimal_plan(t))))
}
