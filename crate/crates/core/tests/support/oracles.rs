//! Independent oracles and random instance generators shared by the property
//! tests and the acceptance suite. Nothing here calls the code under test
//! except to obtain the value being checked.

#![allow(dead_code)]

use persuasion_core::concavify::commitment_solve;
use persuasion_core::equilibrium::threshold::{
    brackets, classify_case, find_disclosure_index, local_minimum_at, mixed_threshold,
    solve_low_types_mix, threshold_sequence, MixingCase, SortedInterim,
};
use persuasion_core::model::{check_strict_optimality, state_payoffs};
use persuasion_core::rational::{to_f64, ExtQ};
use persuasion_core::{q, qi, Belief, PayoffEnvironment, Q};
use rand::Rng;

/// A valid threshold instance: positive `pi` summing to one, `u` sorted
/// descending with `u_1 > u_k`, and `u_k < u_star < u_1`.
#[derive(Clone, Debug)]
pub struct ThresholdInstance {
    pub pi: Vec<Q>,
    pub u: Vec<Q>,
    pub u_star: Q,
}

fn random_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<Q> {
    let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=20)).collect();
    let total: i64 = raw.iter().sum();
    raw.iter().map(|&w| q(w, total)).collect()
}

/// Rational strictly between `lo` and `hi`.
fn strictly_between<R: Rng>(rng: &mut R, lo: &Q, hi: &Q) -> Q {
    let d = rng.gen_range(2..=12);
    let n = rng.gen_range(1..d);
    lo + (hi - lo) * q(n, d)
}

pub fn random_threshold_instance<R: Rng>(rng: &mut R) -> ThresholdInstance {
    let k = rng.gen_range(2..=6);
    let pi = random_weights(rng, k);
    loop {
        let mut u: Vec<Q> = (0..k).map(|_| qi(rng.gen_range(-5..=10))).collect();
        u.sort_by(|a, b| b.cmp(a));
        if u[0] > u[k - 1] {
            let u_star = strictly_between(rng, &u[k - 1], &u[0]);
            return ThresholdInstance { pi, u, u_star };
        }
    }
}

/// `u*(tau, beta)` from its defining equation; `None` is `+inf`.
pub fn threshold_oracle(pi: &[Q], u: &[Q], u_star: &Q, tau: usize, beta: &Q) -> Option<Q> {
    let disclosed = |j: usize| -> Q {
        if j < tau {
            qi(1)
        } else if j == tau {
            beta.clone()
        } else {
            qi(0)
        }
    };
    let revealed: Q = (0..pi.len()).map(|j| disclosed(j) * &pi[j] * &u[j]).sum();
    let rest: Q = (0..pi.len()).map(|j| (qi(1) - disclosed(j)) * &pi[j]).sum();
    if rest == qi(0) {
        None
    } else {
        Some((u_star - revealed) / rest)
    }
}

fn ext(v: Option<Q>) -> ExtQ {
    v.map_or(ExtQ::PosInf, ExtQ::Finite)
}

fn expected(pi: &[Q], u: &[Q]) -> Q {
    pi.iter().zip(u).map(|(p, v)| p * v).sum()
}

/// Two characterizations of the disclosure index agree at every `i < k`.
/// With the `u_k* = +inf` convention the local-minimum form at `i = k − 1`
/// drops the requirement `u* >= Σ π_j u_j`, which the bracket form keeps.
pub fn check_index_characterizations(inst: &ThresholdInstance) -> Result<(), String> {
    let ThresholdInstance { pi, u, u_star } = inst;
    let k = u.len();
    let seq: Vec<Option<Q>> = (1..=k)
        .map(|i| threshold_oracle(pi, u, u_star, i, &qi(0)))
        .collect();
    let lib = threshold_sequence(pi, u, u_star).map_err(|e| e.to_string())?;
    let mine: Vec<ExtQ> = seq.iter().cloned().map(ext).collect();
    if lib != mine {
        return Err(format!("sequence {lib:?} != oracle {mine:?}"));
    }
    let beats_full = u_star >= &expected(pi, u);
    for i in 1..k {
        let at = |j: usize| -> ExtQ {
            if j == 0 {
                ExtQ::Finite(u_star.clone())
            } else {
                ext(seq[j - 1].clone())
            }
        };
        let bracket = at(i) <= ExtQ::Finite(u[i - 1].clone()) && at(i) >= ExtQ::Finite(u[i].clone());
        let local_min = at(i) <= at(i - 1) && at(i) <= at(i + 1);
        let expected_bracket = local_min && (i < k - 1 || beats_full);
        if bracket != expected_bracket {
            return Err(format!("index {i}: bracket {bracket}, local minimum {local_min}"));
        }
        if brackets(&lib, u, i) != bracket || local_minimum_at(&lib, u_star, i) != local_min {
            return Err(format!("library characterizations disagree at index {i}"));
        }
    }
    Ok(())
}

/// An index bracketing its threshold exists whenever `u* >= Σ π_j u_j`, and
/// any index returned brackets.
pub fn check_index_exists(inst: &ThresholdInstance) -> Result<(), String> {
    let ThresholdInstance { pi, u, u_star } = inst;
    let seq = threshold_sequence(pi, u, u_star).map_err(|e| e.to_string())?;
    match find_disclosure_index(&seq, u) {
        Ok(i) => {
            let t = threshold_oracle(pi, u, u_star, i, &qi(0)).ok_or("infinite threshold")?;
            if i >= 1 && i < u.len() && u[i - 1] >= t && t >= u[i] {
                Ok(())
            } else {
                Err(format!("index {i} does not bracket {t}"))
            }
        }
        Err(e) if u_star >= &expected(pi, u) => Err(format!("no index found: {e}")),
        Err(_) => Ok(()),
    }
}

/// `u*(tau, 0) = u_tau*` and `u*(tau, 1) = u*(tau + 1, 0)`.
pub fn check_identities(inst: &ThresholdInstance) -> Result<(), String> {
    let ThresholdInstance { pi, u, u_star } = inst;
    let seq = threshold_sequence(pi, u, u_star).map_err(|e| e.to_string())?;
    for tau in 1..=u.len() {
        if mixed_threshold(pi, u, u_star, tau, &qi(0)) != seq[tau - 1] {
            return Err(format!("u*({tau}, 0) differs from u_{tau}*"));
        }
    }
    for tau in 0..u.len() {
        let one = mixed_threshold(pi, u, u_star, tau, &qi(1));
        let next = mixed_threshold(pi, u, u_star, tau + 1, &qi(0));
        if one != next {
            return Err(format!("u*({tau}, 1) = {one} but u*({}, 0) = {next}", tau + 1));
        }
        for beta in [q(1, 3), q(1, 2), q(5, 7)] {
            if mixed_threshold(pi, u, u_star, tau, &beta) != ext(threshold_oracle(pi, u, u_star, tau, &beta)) {
                return Err(format!("u*({tau}, {beta}) differs from the oracle"));
            }
        }
    }
    Ok(())
}

/// From the disclosure index upward, `u*(tau, beta)` is nondecreasing in
/// `beta` within each segment.
pub fn check_beta_monotone(inst: &ThresholdInstance) -> Result<(), String> {
    let ThresholdInstance { pi, u, u_star } = inst;
    let seq = threshold_sequence(pi, u, u_star).map_err(|e| e.to_string())?;
    let Ok(i) = find_disclosure_index(&seq, u) else {
        return Ok(());
    };
    let betas: Vec<Q> = (0..=8).map(|j| q(j, 8)).collect();
    for tau in i..u.len() {
        let values: Vec<ExtQ> = betas
            .iter()
            .map(|b| mixed_threshold(pi, u, u_star, tau, b))
            .collect();
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("u*({tau}, ·) decreases: {values:?}"));
        }
    }
    Ok(())
}

/// Random environment with `n` states and 2 to 5 actions, integer payoffs.
pub fn random_raw_env<R: Rng>(rng: &mut R, n: usize) -> PayoffEnvironment {
    let m = rng.gen_range(2..=5);
    let sender_u = (0..m).map(|_| qi(rng.gen_range(-10..=10))).collect();
    let receiver_u = (0..n)
        .map(|_| (0..m).map(|_| qi(rng.gen_range(-10..=10))).collect())
        .collect();
    let prior = Belief(random_weights(rng, n));
    PayoffEnvironment::new(
        (0..n).map(|s| format!("s{s}")).collect(),
        (0..m).map(|a| format!("a{a}")).collect(),
        sender_u,
        receiver_u,
        prior,
    )
    .expect("random environment is valid")
}

/// Random environment in which every action is strictly optimal at some
/// belief, as the commitment LP requires.
pub fn random_env<R: Rng>(rng: &mut R, n: usize) -> PayoffEnvironment {
    loop {
        let env = random_raw_env(rng, n);
        if check_strict_optimality(&env).holds {
            return env;
        }
    }
}

/// Receiver best replies at `belief`, computed directly.
pub fn best_replies(env: &PayoffEnvironment, belief: &Belief) -> Vec<usize> {
    let value = |a: usize| -> Q {
        (0..env.n_states())
            .map(|s| belief.p(s) * &env.receiver_u[s][a])
            .sum()
    };
    let values: Vec<Q> = (0..env.n_actions()).map(value).collect();
    let best = values.iter().max().unwrap().clone();
    (0..env.n_actions()).filter(|&a| values[a] == best).collect()
}

/// Sender-preferred value of the receiver's best replies.
pub fn ubar_oracle(env: &PayoffEnvironment, belief: &Belief) -> Q {
    best_replies(env, belief)
        .into_iter()
        .map(|a| env.sender_u[a].clone())
        .max()
        .unwrap()
}

/// Outcome of a low-types-mix check: whether the instance fell in that case.
pub enum CaseCheck {
    NotApplicable,
    Checked,
}

/// On a random subgame whose case is "low types mix", the solved
/// intersection lies on the disclosure-incentive graph and on the silence
/// payoff graph, and the top type still weakly prefers its outside option.
pub fn check_low_types_mix<R: Rng>(rng: &mut R) -> Result<CaseCheck, String> {
    let n = rng.gen_range(2..=4);
    // The receiver must have a unique best reply in every state.
    let (env, state_u) = loop {
        let env = random_raw_env(rng, n);
        if let Ok(u) = state_payoffs(&env) {
            break (env, u);
        }
    };
    let belief = Belief(random_weights(rng, n));
    let s = SortedInterim::new(&belief, &state_u);
    let k = s.k();
    if s.u[0] == s.u[k - 1] {
        return Ok(CaseCheck::NotApplicable);
    }
    let u_star = strictly_between(rng, &s.u[k - 1], &s.u[0]);
    let p0 = q(rng.gen_range(1..=10), 30);
    let p_low = q(rng.gen_range(1..=10), 30);
    let seq = threshold_sequence(&s.pi, &s.u, &u_star).map_err(|e| e.to_string())?;
    let Ok(i) = find_disclosure_index(&seq, &s.u) else {
        return Ok(CaseCheck::NotApplicable);
    };
    if classify_case(&env, &s, &u_star, i, &p0, &p_low).0 != MixingCase::LowTypesMix {
        return Ok(CaseCheck::NotApplicable);
    }
    let c = solve_low_types_mix(&env, &s, &u_star, &p0, &p_low).map_err(|e| e.to_string())?;
    let (tau, beta, v) = (c.low_tau, &c.low_beta, &c.v_hat);
    if tau < i {
        return Err(format!("intersection at {tau} lies below the index {i}"));
    }
    // Disclosure incentive: reveal the first tau states, mix on the next.
    let upper_ok = beta != &qi(0) || tau == 0 || v <= &s.u[tau - 1];
    let lower_ok = tau >= k || v >= &s.u[tau];
    let pinned = beta == &qi(0) || (tau < k && v == &s.u[tau]);
    if !(upper_ok && lower_ok && pinned) {
        return Err(format!("v = {v} is not a best-response payoff for rule ({tau}, {beta})"));
    }
    // Silence payoff: Bayes belief after silence and a best reply worth v.
    let weights: Vec<Q> = (0..k)
        .map(|j| {
            let d = if j < tau {
                qi(1)
            } else if j == tau {
                beta.clone()
            } else {
                qi(0)
            };
            &s.pi[j] * (&p0 + &p_low * (qi(1) - d))
        })
        .collect();
    let total: Q = weights.iter().sum();
    let mut probs = vec![qi(0); n];
    for (pos, w) in weights.iter().enumerate() {
        probs[s.states[pos]] = w / &total;
    }
    let silence = Belief(probs);
    if c.silence_belief.as_ref() != Some(&silence) {
        return Err(format!("silence belief {:?} != {}", c.silence_belief, silence.display()));
    }
    let replies = best_replies(&env, &silence);
    let weight: Q = c.silence_action.iter().map(|(_, w)| w.clone()).sum();
    let worth: Q = c.silence_action.iter().map(|(a, w)| w * &env.sender_u[*a]).sum();
    if weight != qi(1) || c.silence_action.iter().any(|(a, _)| !replies.contains(a)) || &worth != v {
        return Err(format!("silence action {:?} is not a best reply worth {v}", c.silence_action));
    }
    // The top type's outside option still beats the low types' rule.
    if let Some(bound) = threshold_oracle(&s.pi, &s.u, &u_star, tau, beta) {
        if &bound < v {
            return Err(format!("second incentive constraint: {bound} < {v}"));
        }
    }
    Ok(CaseCheck::Checked)
}

/// Beliefs (probability of the second state) where the receiver is
/// indifferent between two actions, strictly inside `(0, 1)`.
pub fn indifference_points(env: &PayoffEnvironment) -> Vec<Q> {
    let r = &env.receiver_u;
    let mut out = Vec::new();
    for a in 0..env.n_actions() {
        for b in (a + 1)..env.n_actions() {
            // (1 − p) d0 + p d1 = 0 with d_s = r[s][a] − r[s][b].
            let d0 = &r[0][a] - &r[0][b];
            let d1 = &r[1][a] - &r[1][b];
            let den = &d0 - &d1;
            if den != qi(0) {
                let p = d0 / den;
                if p > qi(0) && p < qi(1) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Best two-point split of the prior over `points` (which must include 0
/// and 1), evaluated in floating point from exact values of `ū`.
pub fn split_value(env: &PayoffEnvironment, mut points: Vec<Q>) -> f64 {
    points.push(env.prior.p(1).clone());
    points.sort();
    points.dedup();
    let values: Vec<f64> = points
        .iter()
        .map(|p| to_f64(&ubar_oracle(env, &Belief::two(p.clone()))))
        .collect();
    let xs: Vec<f64> = points.iter().map(to_f64).collect();
    let prior = env.prior.p(1);
    let at = points.iter().position(|p| p == prior).unwrap();
    let p = xs[at];
    let mut best = values[at];
    for a in 0..at {
        for b in (at + 1)..xs.len() {
            let w = (xs[b] - p) / (xs[b] - xs[a]);
            best = best.max(w * values[a] + (1.0 - w) * values[b]);
        }
    }
    best
}

/// Uniform grid `{j / grid}`.
pub fn uniform_grid(grid: i64) -> Vec<Q> {
    (0..=grid).map(|j| q(j, grid)).collect()
}

/// Exact LP value against the uniform-grid split. Returns `(lp, grid, slack)`
/// with slack `max|u^s| / 500`.
pub fn lp_against_grid(env: &PayoffEnvironment, grid: i64) -> (f64, f64, f64) {
    let lp = to_f64(&commitment_solve(env).expect("LP solves").value);
    let oracle = split_value(env, uniform_grid(grid));
    let max_abs = env.sender_u.iter().map(|v| to_f64(v).abs()).fold(0.0, f64::max);
    (lp, oracle, max_abs / 500.0)
}

/// Exact LP value against the split over a grid refined with the receiver's
/// indifference points, where `ū` changes. The two agree exactly.
pub fn lp_against_refined_grid(env: &PayoffEnvironment, grid: i64) -> (f64, f64) {
    let lp = to_f64(&commitment_solve(env).expect("LP solves").value);
    let mut points = uniform_grid(grid);
    points.extend(indifference_points(env));
    (lp, split_value(env, points))
}
