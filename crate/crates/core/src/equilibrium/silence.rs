//! Silence-payoff fixed point for one interim belief when the top type is
//! the highest type.
//!
//! Given a payoff `v` after silence, the top type's best plan value is the
//! upper envelope of lines `a_P + m_P v` (`m_P` is the plan's probability of
//! ending silent); lower types reveal exactly the states worth more than `v`.
//! Walking `v` upward, with mixing at envelope kinks and at state payoffs,
//! traces a connected path of silence beliefs. The first point where the
//! receiver has a best reply worth `v` is returned.

use num_traits::{One, Signed, Zero};

use super::threshold::{mix_to_value, payoff_interval};
use crate::error::{Error, Result};
use crate::model::{Belief, PayoffEnvironment};
use crate::profile::{
    History, NamedExperiment, PurePlan, ReceiverEntry, ReceiverResolver, StrategyProfile,
};
use crate::rational::Q;
use crate::verifier::{InterimSolver, TruncatedGame};

/// Plan optimal on a stretch of silence payoffs, with its line `a + m v`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopePiece {
    pub plan: PurePlan,
    pub intercept: Q,
    pub slope: Q,
    /// Probability of ending silent, per state.
    pub silent: Vec<Q>,
}

/// Solved silence payoff with the strategies supporting it.
#[derive(Clone, Debug, PartialEq)]
pub struct SilenceFixedPoint {
    pub value: Q,
    /// Top type's mixture over plans.
    pub top: Vec<(Q, PurePlan)>,
    /// Lower types' mixture over sets of revealed states.
    pub low: Vec<(Q, Vec<bool>)>,
    /// `None` when silence is off path.
    pub belief: Option<Belief>,
    pub action: Vec<(usize, Q)>,
    /// Kinks of the top type's envelope.
    pub kinks: Vec<Q>,
}

/// Probability that `plan` ends with nothing disclosed in `state`.
pub fn silence_probability(menu: &[NamedExperiment], plan: &PurePlan, state: usize) -> Q {
    match plan {
        PurePlan::Stop { disclose } => {
            if disclose.is_empty() {
                Q::one()
            } else {
                Q::zero()
            }
        }
        PurePlan::Run { experiment, next } => {
            let e = &menu
                .iter()
                .find(|m| &m.name == experiment)
                .expect("plan experiment is in the menu")
                .experiment;
            next.iter()
                .enumerate()
                .map(|(o, branch)| {
                    let l = &e.likelihood[state][o];
                    if l.is_zero() {
                        Q::zero()
                    } else {
                        l * silence_probability(menu, branch, state)
                    }
                })
                .sum()
        }
    }
}

/// Action mixture with sender payoff `v` (between the extreme actions).
fn action_worth(env: &PayoffEnvironment, v: &Q) -> Vec<(usize, Q)> {
    let lo = (0..env.n_actions()).min_by(|&a, &b| env.sender_u[a].cmp(&env.sender_u[b])).unwrap();
    let hi = (0..env.n_actions()).max_by(|&a, &b| env.sender_u[a].cmp(&env.sender_u[b])).unwrap();
    if env.sender_u[lo] == env.sender_u[hi] {
        return vec![(lo, Q::one())];
    }
    let w = (v - &env.sender_u[lo]) / (&env.sender_u[hi] - &env.sender_u[lo]);
    if w.is_zero() {
        vec![(lo, Q::one())]
    } else if w.is_one() {
        vec![(hi, Q::one())]
    } else {
        vec![(lo, Q::one() - &w), (hi, w)]
    }
}

struct TopSolver<'a> {
    game: &'a TruncatedGame,
    base: &'a StrategyProfile,
    interim: usize,
    belief: &'a Belief,
    capacity: u64,
}

impl TopSolver<'_> {
    fn piece_at(&self, v: &Q) -> Result<(Q, EnvelopePiece)> {
        let mut profile = self.base.clone();
        profile.receiver.entries.push(ReceiverEntry {
            history: History::new(&self.base.initial, self.interim, vec![]),
            belief: self.belief.clone(),
            types: None,
            action: action_worth(&self.game.env, v),
        });
        let resolver = ReceiverResolver::new(&self.game.env, &profile, self.game.max_type)?;
        let mut solver = InterimSolver::new(self.game, &resolver, &profile.initial, self.interim)
            .ok_or_else(|| Error::InternalInvariantFailure("interim with zero mass".into()))?
            .eager();
        let empty = solver.empty();
        let value = solver.value(&empty, self.capacity).0;
        let plan = solver.optimal_plan(self.capacity);
        let silent: Vec<Q> = (0..self.belief.len())
            .map(|s| silence_probability(&self.game.menu, &plan, s))
            .collect();
        let slope: Q = silent.iter().zip(self.belief.probs()).map(|(m, p)| m * p).sum();
        let intercept = &value - &slope * v;
        Ok((
            value,
            EnvelopePiece {
                plan,
                intercept,
                slope,
                silent,
            },
        ))
    }

    /// Kinks in `(left.v, right.v)`, pushed in increasing order with the
    /// piece optimal to their right.
    fn envelope(
        &self,
        left: &EnvelopePiece,
        right: &EnvelopePiece,
        out: &mut Vec<(Q, EnvelopePiece)>,
        depth: usize,
    ) -> Result<()> {
        if left.slope == right.slope && left.intercept == right.intercept {
            return Ok(());
        }
        if depth > 64 || left.slope >= right.slope {
            return Err(Error::InternalInvariantFailure(
                "top type's value is not convex in the silence payoff".into(),
            ));
        }
        let vx = (&left.intercept - &right.intercept) / (&right.slope - &left.slope);
        let (w, mid) = self.piece_at(&vx)?;
        if w == &left.intercept + &left.slope * &vx {
            out.push((vx, right.clone()));
            return Ok(());
        }
        self.envelope(left, &mid, out, depth + 1)?;
        self.envelope(&mid, right, out, depth + 1)
    }
}

#[derive(Clone, Debug)]
struct Config {
    top: Vec<(Q, usize)>,
    low: Vec<Q>,
}

/// Solves the silence payoff after interim `interim` of `base.initial`.
/// `game` holds the top type only (cap = its capacity); the receiver in
/// `base` must be skeptical off path.
#[allow(clippy::too_many_arguments)]
pub fn silence_fixed_point(
    game: &TruncatedGame,
    base: &StrategyProfile,
    interim: usize,
    belief: &Belief,
    state_u: &[Q],
    p0: &Q,
    p_low: &Q,
    p_top: &Q,
) -> Result<SilenceFixedPoint> {
    let env = &game.env;
    let top_solver = TopSolver {
        game,
        base,
        interim,
        belief,
        capacity: game.cap,
    };
    let v_lo = env.sender_u.iter().min().unwrap().clone();
    let v_hi = env.sender_u.iter().max().unwrap().clone();
    let (_, first) = top_solver.piece_at(&v_lo)?;
    let (_, last) = top_solver.piece_at(&v_hi)?;
    let mut kinks = Vec::new();
    top_solver.envelope(&first, &last, &mut kinks, 0)?;
    let mut pieces = vec![first];
    pieces.extend(kinks.iter().map(|(_, p)| p.clone()));

    let support = belief.support();
    let mut events: Vec<(Q, bool)> = kinks.iter().map(|(v, _)| (v.clone(), true)).collect();
    if p_low.is_positive() {
        let mut us: Vec<Q> = support.iter().map(|&s| state_u[s].clone()).collect();
        us.sort();
        us.dedup();
        events.extend(us.into_iter().map(|u| (u, false)));
    }
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let n = belief.len();
    let weights = |c: &Config| -> Vec<Q> {
        (0..n)
            .map(|s| {
                let nd_top: Q = c.top.iter().map(|(w, i)| w * &pieces[*i].silent[s]).sum();
                belief.p(s) * (p0 + p_low * (Q::one() - &c.low[s]) + p_top * nd_top)
            })
            .collect()
    };
    let to_belief = |w: &[Q]| -> Option<Belief> {
        let total: Q = w.iter().sum();
        total
            .is_positive()
            .then(|| Belief(w.iter().map(|x| x / &total).collect()))
    };
    let worst = support
        .iter()
        .map(|&s| state_u[s].clone())
        .min()
        .expect("nonempty support");
    let interval = |b: &Option<Belief>| -> (Q, Q) {
        match b {
            Some(b) => payoff_interval(env, b),
            None => (worst.clone(), worst.clone()),
        }
    };
    let finish = |c: &Config, v: Q, b: Option<Belief>| -> Result<SilenceFixedPoint> {
        let action = match &b {
            Some(b) => mix_to_value(env, b, &v).ok_or_else(|| {
                Error::InternalInvariantFailure("silence payoff not attainable".into())
            })?,
            None => vec![],
        };
        let top = c
            .top
            .iter()
            .filter(|(w, _)| w.is_positive())
            .map(|(w, i)| (w.clone(), pieces[*i].plan.clone()))
            .collect();
        let low = low_mixture(&c.low);
        Ok(SilenceFixedPoint {
            value: v,
            top,
            low,
            belief: b,
            action,
            kinks: kinks.iter().map(|(v, _)| v.clone()).collect(),
        })
    };

    let mut config = Config {
        top: vec![(Q::one(), 0)],
        low: (0..n)
            .map(|s| if state_u[s] >= v_lo { Q::one() } else { Q::zero() })
            .collect(),
    };
    let mut piece = 0usize;
    let mut v_start = v_lo.clone();
    let stretch = |c: &Config, from: &Q, to: &Q| -> Option<(Q, Option<Belief>)> {
        let b = to_belief(&weights(c));
        let (lo, hi) = interval(&b);
        let a = if &lo > from { lo } else { from.clone() };
        let z = if &hi < to { hi } else { to.clone() };
        (a <= z).then_some((a, b))
    };
    for (e, is_kink) in &events {
        if let Some((v, b)) = stretch(&config, &v_start, e) {
            return finish(&config, v, b);
        }
        // Switch at e, mixing linearly.
        let mut next = config.clone();
        if *is_kink {
            piece += 1;
            next.top = vec![(Q::one(), piece)];
        } else {
            for s in 0..n {
                if &state_u[s] == e {
                    next.low[s] = Q::zero();
                }
            }
        }
        let w0 = weights(&config);
        let w1 = weights(&next);
        let mut lambdas = vec![Q::zero()];
        let mut roots = Vec::new();
        for x in 0..env.n_actions() {
            for y in (x + 1)..env.n_actions() {
                let f = |w: &[Q]| -> Q {
                    (0..n)
                        .map(|s| &w[s] * (&env.receiver_u[s][x] - &env.receiver_u[s][y]))
                        .sum()
                };
                let (f0, f1) = (f(&w0), f(&w1));
                if f0 != f1 {
                    let l = &f0 / (&f0 - &f1);
                    if l.is_positive() && l < Q::one() {
                        roots.push(l);
                    }
                }
            }
        }
        roots.sort();
        roots.dedup();
        lambdas.extend(roots);
        lambdas.push(Q::one());
        for l in lambdas {
            let mixed: Vec<Q> = w0.iter().zip(&w1).map(|(a, b)| a + &l * (b - a)).collect();
            let b = to_belief(&mixed);
            let (lo, hi) = interval(&b);
            if &lo <= e && e <= &hi {
                let mut c = config.clone();
                if *is_kink {
                    c.top = vec![(Q::one() - &l, piece - 1), (l.clone(), piece)];
                } else {
                    for s in 0..n {
                        if &state_u[s] == e {
                            c.low[s] = Q::one() - &l;
                        }
                    }
                }
                return finish(&c, e.clone(), b);
            }
        }
        config = next;
        v_start = e.clone();
    }
    if let Some((v, b)) = stretch(&config, &v_start, &v_hi) {
        return finish(&config, v, b);
    }
    Err(Error::NoIntersection(
        "no silence payoff is consistent with the disclosure strategies".into(),
    ))
}

/// Mixture over revealed-state sets from per-state reveal probabilities
/// (at most one block is strictly mixed).
fn low_mixture(low: &[Q]) -> Vec<(Q, Vec<bool>)> {
    let frac = low
        .iter()
        .find(|x| x.is_positive() && *x < &Q::one())
        .cloned();
    match frac {
        None => vec![(Q::one(), low.iter().map(|x| x.is_one()).collect())],
        Some(beta) => {
            let with: Vec<bool> = low.iter().map(|x| x.is_positive()).collect();
            let without: Vec<bool> = low.iter().map(|x| x.is_one()).collect();
            vec![(&Q::one() - &beta, without), (beta, with)]
        }
    }
}
