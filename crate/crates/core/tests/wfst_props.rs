use gop_forge::selftest::{oracle, random, RELATION_TOL};
use gop_forge::wfst::{determinize, minimize, shortest_path_beam};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn determinize_is_structurally_deterministic(seed: u64, n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random::functional(&mut rng, n);
        let d = determinize(&f).unwrap();
        prop_assert!(d.is_deterministic());
        let diff = oracle::compare_relations(
            &oracle::relation(&f, 5),
            &oracle::relation(&d, 5),
            RELATION_TOL,
        );
        prop_assert!(diff.is_none(), "{:?}", diff);
    }

    #[test]
    fn minimize_is_idempotent_and_never_grows(seed: u64, n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random::deterministic(&mut rng, n);
        let m = minimize(&g).unwrap();
        prop_assert!(m.num_states() <= g.num_states());
        let again = minimize(&m).unwrap();
        prop_assert!(oracle::isomorphic(&m, &again, RELATION_TOL));
    }

    #[test]
    fn full_beam_search_is_exact_viterbi(seed: u64, n in 1usize..=6, frames in 0usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random::transducer(&mut rng, n, random::input_symbols(), random::output_symbols());
        let costs: Vec<Vec<f64>> = (0..frames)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..4.0)).collect())
            .collect();
        let expected = oracle::best_path(&g, &costs);
        match shortest_path_beam(&g, &costs, 1000) {
            Ok(p) => {
                let (w, labels) = expected.expect("search found a path the oracle did not");
                prop_assert!((p.cost - w).abs() < 1e-9, "{} vs {}", p.cost, w);
                let found: Vec<_> = p.steps.iter().map(|s| s.ilabel).collect();
                prop_assert_eq!(found, labels);
            }
            Err(_) => prop_assert!(expected.is_none()),
        }
    }
}
