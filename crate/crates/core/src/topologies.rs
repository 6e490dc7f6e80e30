//! Small reference networks used by tests, the acceptance suite and the CLI.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::NetworkModel;
use crate::nodeset::NodeSet;

/// One relay delivering with probability `p`, retaining otherwise.
pub fn single_relay(p: f64) -> NetworkModel {
    NetworkModel::from_link_probabilities(1, &[(1, 0, p)]).expect("valid single relay")
}

/// `n -> n-1 -> ... -> 1 -> 0`, each hop succeeding with probability `p`.
pub fn chain(n: usize, p: f64) -> NetworkModel {
    let links: Vec<_> = (1..=n).map(|i| (i, i - 1, p)).collect();
    NetworkModel::from_link_probabilities(n, &links).expect("valid chain")
}

/// Three relays: 1 and 3 reach the destination, 2 reaches only 1 and 3.
/// Every link succeeds independently with probability 1/2.
pub fn four_node_example() -> NetworkModel {
    NetworkModel::from_link_probabilities(
        3,
        &[(1, 0, 0.5), (1, 2, 0.5), (2, 1, 0.5), (2, 3, 0.5), (3, 0, 0.5), (3, 2, 0.5)],
    )
    .expect("valid example network")
}

/// Two relays with identical channels to the destination and to each other.
pub fn symmetric_pair(p_dest: f64, p_cross: f64) -> NetworkModel {
    NetworkModel::from_link_probabilities(2, &[(1, 0, p_dest), (1, 2, p_cross), (2, 0, p_dest), (2, 1, p_cross)])
        .expect("valid symmetric pair")
}

/// Line `hops -> ... -> 1 -> 0` with forward, backward and two-hop skip links.
pub fn line(hops: usize, forward: f64, backward: f64, skip: f64) -> NetworkModel {
    let mut links = Vec::new();
    for i in 1..=hops {
        links.push((i, i - 1, forward));
        if i < hops && backward > 0.0 {
            links.push((i, i + 1, backward));
        }
        if i >= 2 && skip > 0.0 {
            links.push((i, i - 2, skip));
        }
    }
    NetworkModel::from_link_probabilities(hops, &links).expect("valid line")
}

/// Random connected model with explicit (non-product) broadcast lists.
///
/// Each relay gets two or three outcomes; one of them always contains a
/// parent that is closer to the destination, so the model is connected.
/// Outcome weights are drawn from `[0.2, 1]` before normalisation, which
/// keeps `p_min` above roughly 0.07.
pub fn random_connected<R: Rng + ?Sized>(n: usize, rng: &mut R) -> NetworkModel {
    let mut labels: Vec<usize> = (1..=n).collect();
    labels.shuffle(rng);
    let mut entries = Vec::with_capacity(n);
    for (pos, &i) in labels.iter().enumerate() {
        let parent = if pos == 0 { 0 } else { labels[rng.gen_range(0..=pos)] };
        let parent = if parent == i { 0 } else { parent };
        let k = rng.gen_range(2..=3);
        let mut outcomes = Vec::with_capacity(k);
        for o in 0..k {
            let mut s = NodeSet::singleton(i);
            if o == 0 {
                s = s.with(parent);
            }
            for j in 0..=n {
                if j != i && rng.gen_bool(0.35) {
                    s = s.with(j);
                }
            }
            outcomes.push((s, rng.gen_range(0.2..1.0)));
        }
        let total: f64 = outcomes.iter().map(|o| o.1).sum();
        for o in &mut outcomes {
            o.1 /= total;
        }
        entries.push((i, outcomes));
    }
    let m = NetworkModel::new(n, &entries).expect("valid random model");
    debug_assert!(m.is_connected());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodeset::NodeId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_network_shape() {
        let m = four_node_example();
        assert!(m.is_connected());
        assert!(m.reaches(NodeId(1), NodeId(0)));
        assert!(m.reaches(NodeId(3), NodeId(0)));
        assert!(!m.reaches(NodeId(2), NodeId(0)));
        assert!(m.reaches(NodeId(2), NodeId(1)) && m.reaches(NodeId(2), NodeId(3)));
        assert_eq!(m.p_min().unwrap(), 0.25);
    }

    #[test]
    fn random_models_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            for _ in 0..20 {
                let m = random_connected(n, &mut rng);
                assert!(m.is_connected());
                assert!(m.p_min().unwrap() > 0.05);
            }
        }
    }

    #[test]
    fn line_reaches() {
        let m = line(4, 0.6, 0.2, 0.1);
        assert!(m.is_connected());
        assert!(m.reaches(NodeId(4), NodeId(2)));
        assert!(!m.reaches(NodeId(1), NodeId(3)));
    }
}
