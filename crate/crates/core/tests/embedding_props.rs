use num_rational::Rational64;
use proptest::prelude::*;
use schedlab::embedding::{embed_prim, replay_exchange, steiner_bruteforce, verify_embedding};
use schedlab::metric::{prim_mst, random_metric};

#[test]
fn star_total_equals_prim_total() {
    for seed in 0..50 {
        let c = 2 + (seed as usize % 7);
        let g = random_metric(c, seed, 1..=40);
        let v0 = seed as usize % c;
        let r = embed_prim(&g, v0).unwrap();
        let mst = prim_mst(&g, v0).unwrap();
        assert_eq!(
            r.star.total(),
            Rational64::from_integer(mst.total_weight as i64)
        );
        assert_eq!(r.star.weight(v0), Rational64::from_integer(0));
        for (p, u) in &r.trace {
            assert_eq!(
                r.star.weight(*u),
                Rational64::from_integer(g.weight(*p, *u) as i64)
            );
        }
    }
}

#[test]
fn dominance_exhaustive_on_random_metrics() {
    for seed in 0..100 {
        let c = 2 + (seed as usize % 6);
        let g = random_metric(c, 1000 + seed, 1..=25);
        let r = embed_prim(&g, 0).unwrap();
        let report = verify_embedding(&g, 0, &r, 0, seed).unwrap();
        assert!(report.is_ok(), "seed {seed}: {report:?}");
        assert_eq!(report.subsets_checked, 1 << (c - 1));
    }
}

#[test]
fn full_set_steiner_is_mst() {
    for seed in 0..20 {
        let g = random_metric(6, seed, 1..=30);
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(
            steiner_bruteforce(&g, &all).unwrap(),
            prim_mst(&g, 0).unwrap().total_weight
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn replay_keeps_tree_and_exchange_invariants(
        c in 2usize..=7,
        seed in any::<u64>(),
        mask in any::<u32>(),
        hi in 1u64..=20,
    ) {
        let g = random_metric(c, seed, 1..=hi);
        let mut subset = vec![0];
        subset.extend((1..c).filter(|v| mask & (1 << v) != 0));
        let report = replay_exchange(&g, 0, &subset).unwrap();
        prop_assert!(report.ends_at_prim_tree);
        for step in &report.steps {
            prop_assert!(step.tree_ok, "{:?}", step);
            prop_assert!(step.exchange_ok(), "{:?}", step);
        }
        prop_assert!(report.charged_total() <= report.steiner_weight);
        let star = embed_prim(&g, 0).unwrap().star;
        prop_assert!(Rational64::from_integer(report.steiner_weight as i64) >= star.subset_weight(&subset));
    }

    #[test]
    fn embed_prim_is_deterministic(c in 1usize..=8, seed in any::<u64>()) {
        let g = random_metric(c, seed, 0..=10);
        prop_assert_eq!(embed_prim(&g, 0).unwrap(), embed_prim(&g, 0).unwrap());
    }
}
