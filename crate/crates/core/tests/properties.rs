use fpolicy::capacity::stability_lp_feasible;
use fpolicy::cones::{lyapunov_gradient, lyapunov_star, lyapunov_value, resolve_cone, resolve_cone_pc};
use fpolicy::policies::{rank_backpressure, rank_orcd, select_forwarder, Policy, PolicySpec, RankTable, TieRule};
use fpolicy::ranking::{is_refinement, less_penalizes, mismatch, RankOrdering};
use fpolicy::sim::{self, ArrivalProcess, SimConfig};
use fpolicy::verify::random_rank_ordering;
use fpolicy::{topologies, NodeId, NodeSet, WeightTable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn relays_and_backlog() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=6).prop_flat_map(|n| prop::collection::vec(0.01f64..10.0, n))
}

fn base() -> impl Strategy<Value = f64> {
    prop_oneof![Just(2.0), Just(3.0), Just(10.0), 2.0f64..12.0]
}

fn permute(r: &RankOrdering, perm: &[usize]) -> RankOrdering {
    let classes = r.classes().iter().map(|c| NodeSet::from_nodes(c.iter().map(|k| perm[k - 1]))).collect();
    RankOrdering::new(classes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn json_round_trip_and_merge_split(n in 1usize..=7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_rank_ordering(n, &mut rng);
        prop_assert_eq!(RankOrdering::from_json(&r.to_json()).unwrap(), r.clone());
        for i in 0..r.num_classes().saturating_sub(1) {
            let merged = r.merge_at(i);
            prop_assert_eq!(merged.split_at(i, r.classes()[i]), r.clone());
            prop_assert!(is_refinement(&r, &merged));
            prop_assert_eq!(mismatch(&r, &merged).unwrap(), i + 1);
        }
    }

    #[test]
    fn penalty_order_is_asymmetric(q in relays_and_backlog(), k in base(), seed in any::<u64>()) {
        let n = q.len();
        let f = WeightTable::geometric(k, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_rank_ordering(n, &mut rng), random_rank_ordering(n, &mut rng));
        prop_assume!(a != b);
        let ab = less_penalizes(&a, &b, &q, &f).unwrap();
        let ba = less_penalizes(&b, &a, &q, &f).unwrap();
        prop_assert!(!(ab && ba));
    }

    #[test]
    fn cone_is_scale_invariant(q in relays_and_backlog(), k in base(), c in 0.01f64..100.0) {
        let f = WeightTable::geometric(k, q.len()).unwrap();
        let scaled: Vec<f64> = q.iter().map(|x| x * c).collect();
        prop_assert_eq!(resolve_cone(&q, &f).unwrap().ordering, resolve_cone(&scaled, &f).unwrap().ordering);
    }

    #[test]
    fn cone_follows_relabelling(q in relays_and_backlog(), k in base(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = q.len();
        let f = WeightTable::geometric(k, n).unwrap();
        let mut perm: Vec<usize> = (1..=n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        // node k of the original becomes node perm[k-1]
        let mut moved = vec![0.0; n];
        for (k, &x) in q.iter().enumerate() {
            moved[perm[k] - 1] = x;
        }
        let r = resolve_cone(&q, &f).unwrap().ordering;
        prop_assert_eq!(resolve_cone(&moved, &f).unwrap().ordering, permute(&r, &perm));
    }

    #[test]
    fn lyapunov_is_homogeneous_of_degree_two(q in relays_and_backlog(), k in base()) {
        let f = WeightTable::geometric(k, q.len()).unwrap();
        let r = resolve_cone(&q, &f).unwrap().ordering;
        let l = lyapunov_star(&q, &f);
        prop_assert!((l - lyapunov_value(&q, &f, &r)).abs() <= 1e-12 * l.max(1.0));
        let euler: f64 = lyapunov_gradient(&q, &f, &r).iter().zip(&q).map(|(g, x)| g * x).sum();
        prop_assert!((euler - 2.0 * l).abs() <= 1e-9 * l.max(1.0));
        let doubled: Vec<f64> = q.iter().map(|x| 2.0 * x).collect();
        prop_assert!((lyapunov_star(&doubled, &f) - 4.0 * l).abs() <= 1e-9 * l.max(1.0));
    }

    #[test]
    fn backpressure_refines_fpolicy(q in relays_and_backlog(), k in base()) {
        let f = WeightTable::geometric(k, q.len()).unwrap();
        let r = resolve_cone(&q, &f).unwrap().ordering;
        prop_assert!(is_refinement(&rank_backpressure(&q), &r));
    }

    #[test]
    fn orcd_refines_pc_fpolicy(n in 2usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = topologies::random_connected(n, &mut rng);
        let f = WeightTable::geometric(WeightTable::orcd_base(m.p_min().unwrap()), n).unwrap();
        let q = fpolicy::verify::random_backlog(n, &mut rng);
        let pc = resolve_cone_pc(&q, &f, &m).unwrap().ordering;
        prop_assert!(is_refinement(&rank_orcd(&q, &m).unwrap(), &pc));
    }

    #[test]
    fn forwarder_never_ranks_higher(n in 1usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_rank_ordering(n, &mut rng);
        let table = RankTable::new(&r);
        let m = topologies::random_connected(n, &mut rng);
        for i in 1..=n {
            let s = m.sample_forwarder_set(NodeId(i), &mut rng);
            for tie in [TieRule::LowestIndex, TieRule::UniformRandom] {
                let j = select_forwarder(&r, NodeId(i), s, tie, &mut rng).0;
                prop_assert!(s.contains(j));
                if s.contains(0) {
                    prop_assert_eq!(j, 0);
                } else {
                    prop_assert!(table.rank(j) <= table.rank(i));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stability_region_is_monotone(n in 1usize..=4, seed in any::<u64>(), shrink in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = topologies::random_connected(n, &mut rng);
        let hi: Vec<f64> = (0..n).map(|k| 0.05 + 0.1 * ((seed >> (8 * k)) & 0xff) as f64 / 255.0).collect();
        let lo: Vec<f64> = hi.iter().map(|x| x * shrink).collect();
        let (a, b) = (stability_lp_feasible(&m, &lo).unwrap(), stability_lp_feasible(&m, &hi).unwrap());
        prop_assert!(a.slack >= b.slack - 1e-9);
        prop_assert!(!b.feasible || a.feasible);
    }

    #[test]
    fn simulation_conserves_packets(seed in any::<u64>(), which in 0usize..4, load in 0.0f64..0.5) {
        let spec = [PolicySpec::FPolicy, PolicySpec::PcFPolicy, PolicySpec::Backpressure, PolicySpec::Orcd][which].clone();
        let m = topologies::four_node_example();
        let policy = Policy::new(spec, WeightTable::geometric(3.0, 3).unwrap(), TieRule::UniformRandom);
        let cfg = SimConfig::new(m, policy, ArrivalProcess::batch_uniform(vec![load; 3], 2), 400, seed);
        let s = sim::run(&cfg).unwrap();
        prop_assert_eq!(s.arrived, s.delivered + s.final_total_backlog());
        prop_assert!(s.max_total_backlog >= s.final_total_backlog());
    }
}
