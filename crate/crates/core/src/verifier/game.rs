//! Finite truncation of the disclosure game: the experiment menu, the type
//! cap, per-history path masses of a profile, and a memoized sender solver.

use std::collections::{BTreeMap, HashMap};

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::model::{posterior_update, Belief, Experiment, PayoffEnvironment, TypeDistribution};
use crate::profile::{
    History, NamedExperiment, PurePlan, ReceiverResolver, Response, StrategyProfile,
    FULL_DISCLOSURE, UNINFORMATIVE,
};
use crate::rational::Q;

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct TruncatedGame {
    pub env: PayoffEnvironment,
    pub menu: Vec<NamedExperiment>,
    pub cap: u64,
    /// Unnormalized `p(t)` for every type `t <= cap` with positive mass.
    pub types: Vec<(u64, Q)>,
    pub covered_mass: Q,
    pub tail_mass: Q,
    /// Largest type of a bounded distribution: receiver beliefs after that
    /// many disclosures must equal the naive belief.
    pub max_type: Option<u64>,
    /// Every `(menu index, outcome)` pair.
    pub items: Vec<(usize, usize)>,
    /// (state, conducted multiset) sender nodes plus receiver information sets.
    pub node_count: usize,
}

impl TruncatedGame {
    pub fn is_truncated(&self) -> bool {
        self.tail_mass.is_positive()
    }

    /// Types renormalized onto the truncation.
    pub fn normalized_types(&self) -> Vec<(u64, Q)> {
        self.types
            .iter()
            .map(|(t, w)| (*t, w / &self.covered_mass))
            .collect()
    }

    pub fn menu_index(&self, name: &str) -> Option<usize> {
        self.menu.iter().position(|e| e.name == name)
    }

    pub fn item_index(&self, exp: usize, outcome: usize) -> usize {
        self.items
            .iter()
            .position(|&(e, o)| e == exp && o == outcome)
            .expect("item in menu")
    }

    pub fn experiment(&self, idx: usize) -> &Experiment {
        &self.menu[idx].experiment
    }

    /// Sender payoff range `(v̄ − v̲)` used for truncation slack.
    pub fn tail_slack(&self) -> Q {
        let (hi, lo) = self.env.sender_range();
        &self.tail_mass * (hi - lo)
    }

    /// Disclosed `(experiment, outcome)` names for an item-count vector.
    pub fn disclosed_names(&self, counts: &[u8]) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            let (e, o) = self.items[i];
            for _ in 0..c {
                out.push((self.menu[e].name.clone(), o));
            }
        }
        out
    }
}

/// Menu with the fully informative and uninformative experiments appended
/// when missing.
pub fn complete_menu(env: &PayoffEnvironment, menu: &[NamedExperiment]) -> Vec<NamedExperiment> {
    let mut out = menu.to_vec();
    if !out.iter().any(|e| e.name == FULL_DISCLOSURE) {
        out.push(NamedExperiment {
            name: FULL_DISCLOSURE.into(),
            experiment: Experiment::fully_informative(&env.states),
        });
    }
    if !out.iter().any(|e| e.name == UNINFORMATIVE) {
        out.push(NamedExperiment {
            name: UNINFORMATIVE.into(),
            experiment: Experiment::uninformative(env.n_states()),
        });
    }
    out
}

pub fn build_truncated_game(
    env: &PayoffEnvironment,
    p: &TypeDistribution,
    menu: &[NamedExperiment],
    cap: u64,
    budget: usize,
) -> Result<TruncatedGame> {
    env.validate()?;
    p.validate()?;
    let menu = complete_menu(env, menu);
    for e in &menu {
        e.experiment.validate()?;
        if e.experiment.likelihood.len() != env.n_states() {
            return Err(Error::InvalidInput(format!(
                "experiment {:?} has the wrong number of states",
                e.name
            )));
        }
    }
    let types: Vec<(u64, Q)> = p
        .support_up_to(cap)
        .into_iter()
        .map(|t| (t, p.prob(t)))
        .collect();
    let covered_mass: Q = types.iter().map(|(_, w)| w.clone()).sum();
    if covered_mass.is_zero() {
        return Err(Error::InvalidInput(format!(
            "no type mass at or below the cap {cap}"
        )));
    }
    let tail_mass = p.tail_mass_above(cap);
    let max_type = p.max_support();
    let items: Vec<(usize, usize)> = menu
        .iter()
        .enumerate()
        .flat_map(|(e, ne)| (0..ne.experiment.n_outcomes()).map(move |o| (e, o)))
        .collect();
    let mut game = TruncatedGame {
        env: env.clone(),
        menu,
        cap,
        types,
        covered_mass,
        tail_mass,
        max_type,
        items,
        node_count: 0,
    };
    game.node_count = count_nodes(&game, budget)?;
    Ok(game)
}

/// Game for a profile: its menu, the cap `T`, and the type distribution.
pub fn game_for_profile(
    env: &PayoffEnvironment,
    p: &TypeDistribution,
    profile: &StrategyProfile,
    cap: u64,
    budget: usize,
) -> Result<TruncatedGame> {
    build_truncated_game(env, p, &profile.menu(env), cap, budget)
}

fn count_nodes(game: &TruncatedGame, budget: usize) -> Result<usize> {
    let n = game.env.n_states();
    let alive: Vec<bool> = (0..n).map(|s| game.env.prior.p(s).is_positive()).collect();
    let mut count = 0usize;
    count_from(game, 0, game.cap, &alive, &mut count, budget)?;
    Ok(count)
}

fn count_from(
    game: &TruncatedGame,
    first_item: usize,
    remaining: u64,
    alive: &[bool],
    count: &mut usize,
    budget: usize,
) -> Result<()> {
    *count += alive.iter().filter(|&&a| a).count() + 1;
    if *count > budget {
        return Err(Error::BudgetExceeded {
            what: "truncated game nodes".into(),
            limit: budget,
        });
    }
    if remaining == 0 {
        return Ok(());
    }
    for i in first_item..game.items.len() {
        let (e, o) = game.items[i];
        let lik = &game.experiment(e).likelihood;
        let next: Vec<bool> = alive
            .iter()
            .enumerate()
            .map(|(s, &a)| a && lik[s][o].is_positive())
            .collect();
        if next.iter().any(|&a| a) {
            count_from(game, i, remaining - 1, &next, count, budget)?;
        }
    }
    Ok(())
}

/// Probability mass reaching one receiver history.
#[derive(Clone, Debug, PartialEq)]
pub struct PathMass {
    /// Joint mass per state (unnormalized type weights).
    pub states: Vec<Q>,
    pub types: BTreeMap<u64, Q>,
}

impl PathMass {
    pub fn total(&self) -> Q {
        self.states.iter().sum()
    }

    pub fn belief(&self) -> Belief {
        let total = self.total();
        Belief(self.states.iter().map(|m| m / &total).collect())
    }

    pub fn type_belief(&self) -> Vec<(u64, Q)> {
        let total: Q = self.types.values().sum();
        self.types
            .iter()
            .map(|(t, m)| (*t, m / &total))
            .collect()
    }
}

/// Forward simulation of the profile on the truncated game: the mass of each
/// reached receiver history, split by state and by type.
pub fn path_masses(
    game: &TruncatedGame,
    profile: &StrategyProfile,
) -> Result<BTreeMap<History, PathMass>> {
    let initial_idx = game
        .menu_index(&profile.initial)
        .ok_or_else(|| Error::InvalidInput(format!("unknown experiment {:?}", profile.initial)))?;
    let initial = game.experiment(initial_idx);
    let n = game.env.n_states();
    let mut out: BTreeMap<History, PathMass> = BTreeMap::new();
    for s0 in 0..initial.n_outcomes() {
        let base: Vec<Q> = (0..n)
            .map(|s| game.env.prior.p(s) * &initial.likelihood[s][s0])
            .collect();
        if base.iter().all(|m| m.is_zero()) {
            continue;
        }
        for (t, pt) in &game.types {
            for comp in profile.plan_for(*t, s0) {
                let mass: Vec<Q> = base.iter().map(|m| m * pt * &comp.weight).collect();
                walk(
                    game,
                    profile,
                    s0,
                    *t,
                    &comp.plan,
                    &mut Vec::new(),
                    mass,
                    &mut out,
                )?;
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    game: &TruncatedGame,
    profile: &StrategyProfile,
    s0: usize,
    t: u64,
    plan: &PurePlan,
    seq: &mut Vec<usize>,
    mass: Vec<Q>,
    out: &mut BTreeMap<History, PathMass>,
) -> Result<()> {
    if mass.iter().all(|m| m.is_zero()) {
        return Ok(());
    }
    match plan {
        PurePlan::Stop { disclose } => {
            let mut counts = vec![0u8; game.items.len()];
            for &pos in disclose {
                let item = *seq.get(pos).ok_or_else(|| {
                    Error::InvalidInput(format!("disclosure position {pos} was never conducted"))
                })?;
                counts[item] += 1;
            }
            let history = History::new(&profile.initial, s0, game.disclosed_names(&counts));
            let total: Q = mass.iter().sum();
            let entry = out.entry(history).or_insert_with(|| PathMass {
                states: vec![Q::zero(); mass.len()],
                types: BTreeMap::new(),
            });
            for (acc, m) in entry.states.iter_mut().zip(&mass) {
                *acc += m;
            }
            *entry.types.entry(t).or_insert_with(Q::zero) += total;
            Ok(())
        }
        PurePlan::Run { experiment, next } => {
            let e = game
                .menu_index(experiment)
                .ok_or_else(|| Error::InvalidInput(format!("unknown experiment {experiment:?}")))?;
            let lik = &game.experiment(e).likelihood;
            for (o, branch) in next.iter().enumerate() {
                let m: Vec<Q> = mass
                    .iter()
                    .enumerate()
                    .map(|(s, x)| x * &lik[s][o])
                    .collect();
                seq.push(game.item_index(e, o));
                walk(game, profile, s0, t, branch, seq, m, out)?;
                seq.pop();
            }
            Ok(())
        }
    }
}

/// First move of a continuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Move {
    /// Stop and disclose this multiset (item counts).
    Stop(Vec<u8>),
    /// Run this menu experiment.
    Run(usize),
}

/// Memoized backward induction for one interim outcome of one initial
/// experiment, against a fixed receiver rule.
pub struct InterimSolver<'g> {
    pub game: &'g TruncatedGame,
    resolver: &'g ReceiverResolver<'g>,
    pub initial: String,
    pub interim: usize,
    beliefs: HashMap<Vec<u8>, Option<Belief>>,
    values: HashMap<Vec<u8>, (Q, Response)>,
    stops: HashMap<Vec<u8>, (Q, Vec<u8>)>,
    conts: HashMap<(Vec<u8>, u64), (Q, Move)>,
    eager: bool,
}

impl<'g> InterimSolver<'g> {
    /// `None` when the interim outcome has zero probability.
    pub fn new(
        game: &'g TruncatedGame,
        resolver: &'g ReceiverResolver<'g>,
        initial: &str,
        interim: usize,
    ) -> Option<Self> {
        let e = game.menu_index(initial)?;
        let b = posterior_update(&game.env.prior, game.experiment(e), interim).ok()?;
        let mut beliefs = HashMap::new();
        beliefs.insert(vec![0u8; game.items.len()], Some(b));
        Some(InterimSolver {
            game,
            resolver,
            initial: initial.to_string(),
            interim,
            beliefs,
            values: HashMap::new(),
            stops: HashMap::new(),
            conts: HashMap::new(),
            eager: false,
        })
    }

    /// Breaks payoff ties toward running another experiment and toward
    /// disclosing more, instead of stopping early and disclosing less.
    pub fn eager(mut self) -> Self {
        self.eager = true;
        self
    }

    pub fn empty(&self) -> Vec<u8> {
        vec![0u8; self.game.items.len()]
    }

    /// Sender's naive belief after conducting the multiset `counts`.
    pub fn belief(&mut self, counts: &[u8]) -> Option<Belief> {
        if let Some(b) = self.beliefs.get(counts) {
            return b.clone();
        }
        let last = counts.iter().rposition(|&c| c > 0).expect("nonempty");
        let mut parent = counts.to_vec();
        parent[last] -= 1;
        let (e, o) = self.game.items[last];
        let b = self
            .belief(&parent)
            .and_then(|pb| posterior_update(&pb, self.game.experiment(e), o).ok());
        self.beliefs.insert(counts.to_vec(), b.clone());
        b
    }

    pub fn history(&self, counts: &[u8]) -> History {
        History::new(&self.initial, self.interim, self.game.disclosed_names(counts))
    }

    /// Sender payoff when the receiver sees the disclosed multiset `counts`.
    pub fn disclosure_value(&mut self, counts: &[u8]) -> Q {
        if let Some((v, _)) = self.values.get(counts) {
            return v.clone();
        }
        let history = self.history(counts);
        let response = self
            .resolver
            .resolve(&history)
            .expect("disclosed multiset of a reachable node has positive probability");
        let v = self.game.env.sender_value(&response.action);
        self.values.insert(counts.to_vec(), (v.clone(), response));
        v
    }

    /// Best disclosure of a sub-multiset of the conducted `counts`.
    pub fn stop_value(&mut self, counts: &[u8]) -> (Q, Vec<u8>) {
        if let Some(r) = self.stops.get(counts) {
            return r.clone();
        }
        let mut best = (self.disclosure_value(counts), counts.to_vec());
        for i in 0..counts.len() {
            if counts[i] > 0 {
                let mut sub = counts.to_vec();
                sub[i] -= 1;
                let cand = self.stop_value(&sub);
                if cand.0 > best.0 || (!self.eager && cand.0 == best.0 && cand.1 < best.1) {
                    best = cand;
                }
            }
        }
        self.stops.insert(counts.to_vec(), best.clone());
        best
    }

    /// Value of running menu experiment `e` next with `remaining` capacity
    /// left afterwards.
    pub fn run_value(&mut self, counts: &[u8], e: usize, remaining: u64) -> Q {
        let b = self.belief(counts).expect("reachable node");
        let exp = self.game.experiment(e).clone();
        let mut v = Q::zero();
        for o in 0..exp.n_outcomes() {
            let prob = exp.outcome_prob(&b, o);
            if prob.is_positive() {
                let mut next = counts.to_vec();
                next[self.game.item_index(e, o)] += 1;
                v += prob * self.value(&next, remaining).0;
            }
        }
        v
    }

    /// Optimal continuation value with `remaining` experiments left.
    pub fn value(&mut self, counts: &[u8], remaining: u64) -> (Q, Move) {
        let key = (counts.to_vec(), remaining);
        if let Some(r) = self.conts.get(&key) {
            return r.clone();
        }
        let (sv, sd) = self.stop_value(counts);
        let mut best = (sv, Move::Stop(sd));
        if remaining > 0 {
            for e in 0..self.game.menu.len() {
                let v = self.run_value(counts, e, remaining - 1);
                let tie_run = self.eager && v == best.0 && matches!(best.1, Move::Stop(_));
                if v > best.0 || tie_run {
                    best = (v, Move::Run(e));
                }
            }
        }
        self.conts.insert(key, best.clone());
        best
    }

    /// Optimal plan from the root as an explicit tree.
    pub fn optimal_plan(&mut self, remaining: u64) -> PurePlan {
        let empty = self.empty();
        self.plan_from(&empty, &mut Vec::new(), remaining)
    }

    fn plan_from(&mut self, counts: &[u8], seq: &mut Vec<usize>, remaining: u64) -> PurePlan {
        match self.value(counts, remaining).1 {
            Move::Stop(d) => PurePlan::Stop {
                disclose: positions_for(&d, seq),
            },
            Move::Run(e) => self.run_plan(counts, seq, e, remaining - 1),
        }
    }

    /// Plan that runs `e` first and continues optimally.
    pub fn run_plan(
        &mut self,
        counts: &[u8],
        seq: &mut Vec<usize>,
        e: usize,
        remaining: u64,
    ) -> PurePlan {
        let b = self.belief(counts).expect("reachable node");
        let exp = self.game.experiment(e).clone();
        let mut next = Vec::new();
        for o in 0..exp.n_outcomes() {
            if exp.outcome_prob(&b, o).is_positive() {
                let item = self.game.item_index(e, o);
                let mut c = counts.to_vec();
                c[item] += 1;
                seq.push(item);
                next.push(self.plan_from(&c, seq, remaining));
                seq.pop();
            } else {
                next.push(PurePlan::stop());
            }
        }
        PurePlan::Run {
            experiment: self.game.menu[e].name.clone(),
            next,
        }
    }

    /// Expected payoff of a plan; `Err` describes a malformed plan.
    pub fn evaluate(&mut self, plan: &PurePlan) -> std::result::Result<Q, String> {
        let empty = self.empty();
        self.evaluate_from(plan, &empty, &mut Vec::new())
    }

    fn evaluate_from(
        &mut self,
        plan: &PurePlan,
        counts: &[u8],
        seq: &mut Vec<usize>,
    ) -> std::result::Result<Q, String> {
        match plan {
            PurePlan::Stop { disclose } => {
                let mut d = vec![0u8; counts.len()];
                for &pos in disclose {
                    let item = *seq
                        .get(pos)
                        .ok_or_else(|| format!("disclosure position {pos} was never conducted"))?;
                    d[item] += 1;
                }
                Ok(self.disclosure_value(&d))
            }
            PurePlan::Run { experiment, next } => {
                let e = self
                    .game
                    .menu_index(experiment)
                    .ok_or_else(|| format!("unknown experiment {experiment:?}"))?;
                let b = self.belief(counts).expect("reachable node");
                let exp = self.game.experiment(e).clone();
                if next.len() != exp.n_outcomes() {
                    return Err(format!("plan after {experiment:?} needs one branch per outcome"));
                }
                let mut v = Q::zero();
                for (o, branch) in next.iter().enumerate() {
                    let prob = exp.outcome_prob(&b, o);
                    if prob.is_positive() {
                        let item = self.game.item_index(e, o);
                        let mut c = counts.to_vec();
                        c[item] += 1;
                        seq.push(item);
                        let r = self.evaluate_from(branch, &c, seq);
                        seq.pop();
                        v += prob * r?;
                    }
                }
                Ok(v)
            }
        }
    }

    /// Every disclosed multiset the solver asked the receiver about.
    pub fn queried(&self) -> impl Iterator<Item = (History, &Response)> + '_ {
        self.values
            .iter()
            .map(move |(c, (_, r))| (self.history(c), r))
    }
}

/// Positions in the conducted sequence realizing the multiset `d`.
pub fn positions_for(d: &[u8], seq: &[usize]) -> Vec<usize> {
    let mut need = d.to_vec();
    let mut out = Vec::new();
    for (pos, &item) in seq.iter().enumerate() {
        if need[item] > 0 {
            need[item] -= 1;
            out.push(pos);
        }
    }
    out
}

/// Probability of each interim outcome of `initial` under the prior.
pub fn interim_probs(game: &TruncatedGame, initial: usize) -> Vec<Q> {
    let e = game.experiment(initial);
    (0..e.n_outcomes())
        .map(|o| e.outcome_prob(&game.env.prior, o))
        .collect()
}
