#[path = "support/oracles.rs"]
mod oracles;

use oracles::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> ThresholdInstance {
    random_threshold_instance(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bracket_and_local_minimum_agree(seed in any::<u64>()) {
        prop_assert_eq!(check_index_characterizations(&instance(seed)), Ok(()));
    }

    #[test]
    fn disclosure_index_exists(seed in any::<u64>()) {
        prop_assert_eq!(check_index_exists(&instance(seed)), Ok(()));
    }

    #[test]
    fn segment_endpoints_agree(seed in any::<u64>()) {
        prop_assert_eq!(check_identities(&instance(seed)), Ok(()));
    }

    #[test]
    fn threshold_rises_with_mixing_weight(seed in any::<u64>()) {
        prop_assert_eq!(check_beta_monotone(&instance(seed)), Ok(()));
    }

    #[test]
    fn low_types_mix_intersection_is_consistent(seed in any::<u64>()) {
        let r = check_low_types_mix(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(r.is_ok(), "{:?}", r.err());
    }
}

#[test]
fn low_types_mix_is_exercised() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let checked = (0..400)
        .filter(|_| matches!(check_low_types_mix(&mut rng), Ok(CaseCheck::Checked)))
        .count();
    assert!(checked >= 20, "only {checked} instances reached the low-types-mix case");
}
