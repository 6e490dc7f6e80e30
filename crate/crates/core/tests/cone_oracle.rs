use fpolicy::cones::{resolve_cone, resolve_cone_pc, ConeOracle};
use fpolicy::topologies;
use fpolicy::WeightTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn constructive_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=6 {
        let oracle = ConeOracle::general(n).unwrap();
        for k in [2.0, 3.0, 10.0] {
            let f = WeightTable::geometric(k, n).unwrap();
            for _ in 0..300 {
                let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
                let want = oracle.resolve(&q, &f).unwrap();
                let got = resolve_cone(&q, &f).unwrap();
                assert_eq!(got.ordering, want.ordering, "n={n} K={k} q={q:?}");
            }
        }
    }
}

#[test]
fn constructive_pc_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 2..=6 {
        for _ in 0..5 {
            let m = topologies::random_connected(n, &mut rng);
            let oracle = ConeOracle::path_connected(&m).unwrap();
            for k in [2.0, 3.0, 10.0] {
                let f = WeightTable::geometric(k, n).unwrap();
                for _ in 0..100 {
                    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
                    let want = oracle.resolve(&q, &f).unwrap();
                    let got = resolve_cone_pc(&q, &f, &m).unwrap();
                    assert_eq!(got.ordering, want.ordering, "n={n} K={k} q={q:?}");
                }
            }
        }
    }
}
