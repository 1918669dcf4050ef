//! Monte Carlo estimate of the ex-ante sender payoff, for cross-checking the
//! exact evaluation.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::game::TruncatedGame;
use crate::error::{Error, Result};
use crate::profile::{History, PurePlan, ReceiverResolver, StrategyProfile};
use crate::rational::{to_f64, Q};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_error: f64,
}

impl SimulationReport {
    /// Whether `exact` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, exact: &Q, k: f64) -> bool {
        (self.mean - to_f64(exact)).abs() <= k * self.std_error + 1e-12
    }
}

fn sampler(weights: impl IntoIterator<Item = f64>) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidInput(format!("cannot sample from weights: {e}")))
}

/// Samples state, type, initial outcome, plan component, experiment outcomes
/// and the receiver's (possibly mixed) action.
pub fn simulate(
    game: &TruncatedGame,
    profile: &StrategyProfile,
    samples: usize,
    seed: u64,
) -> Result<SimulationReport> {
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let resolver = ReceiverResolver::new(&game.env, profile, game.max_type)?;
    let initial = game
        .menu_index(&profile.initial)
        .ok_or_else(|| Error::InvalidInput("initial experiment not in menu".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = sampler(game.env.prior.probs().iter().map(to_f64))?;
    let types = sampler(game.types.iter().map(|(_, w)| to_f64(w)))?;
    let outcome_samplers: Vec<Vec<Option<WeightedIndex<f64>>>> = game
        .menu
        .iter()
        .map(|m| {
            m.experiment
                .likelihood
                .iter()
                .map(|row| sampler(row.iter().map(to_f64)).ok())
                .collect()
        })
        .collect();
    let mut actions: HashMap<History, (Vec<usize>, WeightedIndex<f64>)> = HashMap::new();
    let mut plans: HashMap<(u64, usize), (Vec<PurePlan>, WeightedIndex<f64>)> = HashMap::new();
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let state = states.sample(&mut rng);
        let t = game.types[types.sample(&mut rng)].0;
        let draw = |e: usize, rng: &mut ChaCha8Rng| -> Result<usize> {
            outcome_samplers[e][state]
                .as_ref()
                .map(|s| s.sample(rng))
                .ok_or_else(|| Error::InvalidInput("experiment row has no mass".into()))
        };
        let k = draw(initial, &mut rng)?;
        if let std::collections::hash_map::Entry::Vacant(e) = plans.entry((t, k)) {
            let comps = profile.plan_for(t, k);
            let w = sampler(comps.iter().map(|c| to_f64(&c.weight)))?;
            e.insert((comps.into_iter().map(|c| c.plan).collect(), w));
        }
        let (choices, w) = &plans[&(t, k)];
        let mut plan = &choices[w.sample(&mut rng)];
        let mut seq: Vec<usize> = Vec::new();
        let disclose = loop {
            match plan {
                PurePlan::Stop { disclose } => break disclose,
                PurePlan::Run { experiment, next } => {
                    let e = game.menu_index(experiment).ok_or_else(|| {
                        Error::InvalidInput(format!("unknown experiment {experiment:?}"))
                    })?;
                    let o = draw(e, &mut rng)?;
                    seq.push(game.item_index(e, o));
                    plan = &next[o];
                }
            }
        };
        let mut counts = vec![0u8; game.items.len()];
        for &pos in disclose {
            counts[seq[pos]] += 1;
        }
        let history = History::new(&profile.initial, k, game.disclosed_names(&counts));
        if !actions.contains_key(&history) {
            let r = resolver.resolve(&history).ok_or_else(|| {
                Error::InternalInvariantFailure("sampled history has zero probability".into())
            })?;
            let w = sampler(r.action.iter().map(|(_, p)| to_f64(p)))?;
            actions.insert(history.clone(), (r.action.iter().map(|(a, _)| *a).collect(), w));
        }
        let (acts, w) = &actions[&history];
        let v = to_f64(&game.env.sender_u[acts[w.sample(&mut rng)]]);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(SimulationReport {
        samples,
        seed,
        mean,
        std_error: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::single_test_disclosure_eq;
    use crate::library;
    use crate::model::TypeDistribution;
    use crate::rational::q;
    use crate::verifier::{game_for_profile, DEFAULT_NODE_BUDGET};

    #[test]
    fn simulation_matches_exact_payoff() {
        let env = library::four_action(q(3, 8));
        let p = TypeDistribution::finite([(0, q(1, 3)), (1, q(2, 3))]).unwrap();
        let profile = single_test_disclosure_eq(&env, &p).unwrap();
        let game = game_for_profile(&env, &p, &profile, 1, DEFAULT_NODE_BUDGET).unwrap();
        let a = simulate(&game, &profile, 20_000, 7).unwrap();
        assert!(a.agrees_with(&q(5, 2), 3.0), "{a:?}");
        let b = simulate(&game, &profile, 20_000, 7).unwrap();
        assert_eq!(a, b);
    }
}
