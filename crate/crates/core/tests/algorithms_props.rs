mod common;

use proptest::prelude::*;

use schedlab::algorithms::{align_sigma_tilde, recolor_sigma_prime, EdfPolicy, TspEdfPolicy};
use schedlab::metric::{random_directed_metric, random_metric, uniform_metric};
use schedlab::oracle::offline_opt;
use schedlab::sched::{simulate, Instance, StaticSource};

use common::{brute_tsp, instance, matching_opt, random_packets, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Each phase of K slots spends at most one tour weight on transitions.
    #[test]
    fn per_phase_transitions_within_tour_weight(
        c in 2usize..=6,
        seed in any::<u64>(),
        directed in any::<bool>(),
        n in 1usize..=60,
        scale in 2u64..=40,
    ) {
        let g = if directed { random_directed_metric(c, seed, 1..=5) } else { random_metric(c, seed, 1..=5) };
        let mut r = rng(seed);
        let tsp = brute_tsp(&g);
        let laxity = tsp * scale;
        let inst = instance(&g, random_packets(&mut r, n, laxity, 2 * laxity, c));
        let mut policy = TspEdfPolicy::new(&g, laxity, None, inst.horizon).unwrap();
        let run = simulate(&mut StaticSource::new(&inst), &mut policy).unwrap();
        let k = policy.k();
        prop_assert_eq!(policy.tour().weight, tsp);
        let mut start = 1;
        while start <= run.schedule.len() {
            let ticks = run.schedule.counts_in(start, start + k - 1).transition;
            prop_assert!(ticks <= tsp, "phase at {} used {} ticks, tour {}", start, ticks, tsp);
            start += k;
        }
    }

    /// `ALG >= (1 - 3 sqrt(TSP/L)) OPT` on small instances, in exact integers.
    #[test]
    fn tsp_edf_meets_guarantee(
        c in 2usize..=4,
        seed in any::<u64>(),
        n in 1usize..=12,
        scale in 1u64..=80,
    ) {
        let g = random_metric(c, seed, 1..=6);
        let tsp = brute_tsp(&g);
        let laxity = tsp + scale * tsp / 2 + 1;
        let mut r = rng(seed ^ 0x5eed);
        let inst = instance(&g, random_packets(&mut r, n, laxity, laxity, c));
        let opt = offline_opt(&inst).unwrap().opt;
        let mut policy = TspEdfPolicy::new(&g, laxity, None, inst.horizon).unwrap();
        let alg = simulate(&mut StaticSource::new(&inst), &mut policy).unwrap().schedule.throughput();
        let gap = opt.saturating_sub(alg) as u128;
        prop_assert!(gap * gap * laxity as u128 <= 9 * (opt as u128).pow(2) * tsp as u128);
    }

    #[test]
    fn edf_is_optimal_with_one_color(seed in any::<u64>(), n in 1usize..=40, laxity in 0u64..=8) {
        let g = uniform_metric(1, 0);
        let mut r = rng(seed);
        let inst = instance(&g, random_packets(&mut r, n, laxity, 20, 1));
        let alg = simulate(&mut StaticSource::new(&inst), &mut EdfPolicy::new(&g)).unwrap().schedule.throughput();
        prop_assert_eq!(alg, matching_opt(&inst.packets));
    }

    /// Recoloring to one color can only help the offline optimum.
    #[test]
    fn recoloring_never_lowers_opt(c in 2usize..=4, seed in any::<u64>(), n in 1usize..=10) {
        let g = random_metric(c, seed, 1..=6);
        let mut r = rng(seed);
        let inst = instance(&g, random_packets(&mut r, n, 3, 10, c));
        let one = uniform_metric(c, 0);
        let recolored = Instance::new(one, recolor_sigma_prime(&inst.packets, 0), None).unwrap();
        prop_assert!(offline_opt(&recolored).unwrap().opt >= offline_opt(&inst).unwrap().opt);
    }

    #[test]
    fn alignment_shrinks_spans_to_multiples(seed in any::<u64>(), n in 1usize..=30, k in 1u64..=7) {
        let mut r = rng(seed);
        let packets = random_packets(&mut r, n, 4, 30, 3);
        let aligned = align_sigma_tilde(&packets, k, 0);
        prop_assert_eq!(aligned.packets.len() + aligned.dropped, n);
        for p in &aligned.packets {
            let orig = packets.iter().find(|q| q.id == p.id).unwrap();
            prop_assert!(p.r >= orig.r && p.d <= orig.d && p.r % k == 0 && p.d % k == 0 && p.c == 0);
        }
    }
}
