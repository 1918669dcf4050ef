use persuasion_core::concavify::commitment_solve;
use persuasion_core::equilibrium::{
    commitment_candidates, construct_credible_eq, construct_full_disclosure_eq,
    construct_near_commitment_eq, repeated_test_equilibrium, single_test_disclosure_eq,
};
use persuasion_core::library;
use persuasion_core::profile::{NamedExperiment, StrategyProfile};
use persuasion_core::verifier::{
    check_pebe, ex_ante_payoff, game_for_profile, imitate_and_reveal_gain, simulate,
    TruncatedGame, DEFAULT_NODE_BUDGET,
};
use persuasion_core::{q, qi, Experiment, PayoffEnvironment, TypeDistribution, Q};
use proptest::prelude::*;

struct Fixture {
    label: &'static str,
    env: PayoffEnvironment,
    types: TypeDistribution,
    profile: StrategyProfile,
    cap: u64,
}

impl Fixture {
    fn game(&self) -> TruncatedGame {
        game_for_profile(&self.env, &self.types, &self.profile, self.cap, DEFAULT_NODE_BUDGET).unwrap()
    }
}

fn passing_fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();
    let env = library::prosecutor();
    let sol = commitment_solve(&env).unwrap();
    out.push(Fixture {
        label: "credible",
        profile: construct_credible_eq(&env, &sol).unwrap(),
        env,
        types: library::prosecutor_types(),
        cap: 2,
    });
    let env = library::four_action(q(3, 8));
    let types = TypeDistribution::finite([(0, q(1, 3)), (1, q(2, 3))]).unwrap();
    out.push(Fixture {
        label: "single test",
        profile: single_test_disclosure_eq(&env, &types).unwrap(),
        env,
        types,
        cap: 1,
    });
    let env = library::three_action(q(1, 2));
    let types = library::geometric_types();
    out.push(Fixture {
        label: "repeated test",
        profile: repeated_test_equilibrium(&env, &types, 6).unwrap().profile,
        env: env.clone(),
        types: types.clone(),
        cap: 6,
    });
    out.push(Fixture {
        label: "full disclosure",
        profile: construct_full_disclosure_eq(&env, &types).unwrap().0,
        env,
        types,
        cap: 6,
    });
    let (env, types) = library::four_action_near_commitment();
    let nc = construct_near_commitment_eq(&env, &types, &q(1, 4)).unwrap();
    out.push(Fixture {
        label: "near-commitment",
        profile: nc.profile,
        env,
        types,
        cap: nc.cap,
    });
    out
}

#[test]
fn fixtures_pass_the_verifier() {
    for f in passing_fixtures() {
        let cert = check_pebe(&f.game(), &f.profile).unwrap();
        assert!(cert.passed(), "{}: {:?}", f.label, cert.violations);
    }
}

#[test]
fn simulation_reproduces_exact_payoff() {
    for (seed, f) in passing_fixtures().into_iter().enumerate() {
        let game = f.game();
        let exact = ex_ante_payoff(&game, &f.profile).unwrap();
        let report = simulate(&game, &f.profile, 100_000, seed as u64).unwrap();
        assert!(report.agrees_with(&exact, 3.0), "{}: {report:?} vs {exact}", f.label);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn imitation_gain_meets_lower_bound(
        which in 0usize..5,
        low in 0u64..3,
        step in 1u64..3,
        theta in 0usize..2,
        cut in 0i64..=10,
    ) {
        let f = passing_fixtures().swap_remove(which);
        let high = (low + step).min(f.cap);
        prop_assume!(high > low);
        let game = f.game();
        let cutoff = q(cut, 10);
        let target = |b: &persuasion_core::Belief| b.p(theta) <= &cutoff;
        let g = imitate_and_reveal_gain(&game, &f.profile, low, high, theta, &target).unwrap();
        prop_assert!(g.gain >= g.lower_bound, "{}: gain {} below {}", f.label, g.gain, g.lower_bound);
    }

    #[test]
    fn garbling_never_lowers_the_worst_gain(a in 0i64..=4, b in 0i64..=4, base in 0usize..2) {
        let (env, types) = library::three_action_low_prior();
        let sol = commitment_solve(&env).unwrap();
        let mut profile = commitment_candidates(&env, &sol).unwrap().swap_remove(base);
        let worst = |p: &StrategyProfile| -> Q {
            let game = game_for_profile(&env, &types, p, 1, DEFAULT_NODE_BUDGET).unwrap();
            check_pebe(&game, p).unwrap().worst_deviation.map_or(qi(0), |d| d.gain)
        };
        let before = worst(&profile);
        // Noisy copy of the fully informative experiment.
        let (ea, eb) = (q(a, 10), q(b, 10));
        let garbled = Experiment::new(
            vec!["lo".into(), "hi".into()],
            vec![vec![qi(1) - &ea, ea], vec![eb.clone(), qi(1) - eb]],
        )
        .unwrap();
        profile.experiments.push(NamedExperiment { name: "garbled".into(), experiment: garbled });
        prop_assert!(worst(&profile) >= before);
    }
}
