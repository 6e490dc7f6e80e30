//! Simulator against closed forms for small queueing models.

use fpolicy::policies::{Policy, PolicySpec, TieRule};
use fpolicy::sim::{self, ArrivalProcess, SimConfig};
use fpolicy::{topologies, WeightTable};

fn single_relay(lambda: f64, horizon: u64, seed: u64) -> sim::SimStats {
    let policy = Policy::new(PolicySpec::FPolicy, WeightTable::geometric(3.0, 1).unwrap(), TieRule::LowestIndex);
    let cfg = SimConfig::new(topologies::single_relay(0.5), policy, ArrivalProcess::bernoulli(vec![lambda]), horizon, seed);
    sim::run(&cfg).unwrap()
}

// Q(t+1) = (Q(t) - S(t))^+ + A(t) with S ~ Bernoulli(p), A ~ Bernoulli(λ):
// a birth-death chain with π_1/π_0 = λ/(p(1-λ)) and ratio ρ = λ(1-p)/(p(1-λ))
// beyond. At λ = 0.25, p = 0.5: π_0 = 1/2, E[Q] = π_1/(1-ρ)^2 = 3/4, and
// Little's law over slot-start counts gives a mean delay of 3 slots.
#[test]
fn single_relay_matches_birth_death_chain() {
    let s = single_relay(0.25, 1_000_000, 3);
    assert!((s.avg_total_backlog - 0.75).abs() < 0.02, "{}", s.avg_total_backlog);
    assert!((s.mean_delay - 3.0).abs() < 0.08, "{}", s.mean_delay);
    let throughput = s.delivered as f64 / 1e6;
    assert!((throughput - 0.25).abs() < 0.003);
}

#[test]
fn overloaded_single_relay_grows_linearly() {
    let horizon = 200_000;
    let s = single_relay(0.75, horizon, 4);
    let floor = 0.2 * (0.75 - 0.5) * horizon as f64;
    assert!(s.final_total_backlog() as f64 > floor);
    // growth rate (λ - p)·T within a few percent
    let rate = s.final_total_backlog() as f64 / horizon as f64;
    assert!((rate - 0.25).abs() < 0.01, "{rate}");
}

// Batch arrivals uniform on {0..a_max} thinned to mean λ: the long-run
// arrival rate matches λ whatever the batch size.
#[test]
fn batch_arrivals_average_to_the_rate() {
    for (a_max, lambda) in [(1, 0.3), (3, 0.3), (5, 0.9)] {
        let policy = Policy::new(PolicySpec::Backpressure, WeightTable::geometric(3.0, 2).unwrap(), TieRule::LowestIndex);
        let cfg = SimConfig::new(
            topologies::chain(2, 0.9),
            policy,
            ArrivalProcess::batch_uniform(vec![lambda, 0.0], a_max),
            200_000,
            a_max as u64,
        );
        let s = sim::run(&cfg).unwrap();
        let rate = s.arrived as f64 / 200_000.0;
        assert!((rate - lambda).abs() < 0.01 * lambda.max(0.1) * 3.0, "a_max={a_max}: {rate}");
    }
}
