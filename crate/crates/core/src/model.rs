//! Network topology and the probabilistic local broadcast channel.
//!
//! Each relay `i` owns a distribution `P(S|i)` over the set of nodes that
//! receive its transmission. The transmitter always belongs to `S` (it keeps
//! its own copy), so a distribution putting all mass on `{i}` models a dead
//! link rather than an invalid one.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::nodeset::{NodeId, NodeSet, MAX_NODE};

/// Per-node probability sums must be within this of 1.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;
/// Out-degree limit for the product-form constructor.
pub const MAX_LINK_DEGREE: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("broadcast distribution of node {node} sums to {sum}, expected 1")]
    ProbSumError { node: usize, sum: f64 },
    #[error("support set {set:?} of node {node} does not contain the transmitter")]
    SelfNotInSet { node: usize, set: NodeSet },
    #[error("bad subset for node {node}: {reason}")]
    BadSubset { node: usize, reason: String },
    #[error("node {node} has no positive broadcast entry")]
    NoPositiveEntry { node: usize },
    #[error("node {node} has out-degree {degree}, limit is {limit}")]
    DegreeTooLarge {
        node: usize,
        degree: usize,
        limit: usize,
    },
    #[error("network must have between 1 and {max} relays, got {n}")]
    BadRelayCount { n: usize, max: usize },
    #[error("invalid link ({from} -> {to}, q = {q})")]
    BadLink { from: usize, to: usize, q: f64 },
}

/// One outcome of a local broadcast: the receiving set and its probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub set: NodeSet,
    pub prob: f64,
}

/// Outcomes of one transmitter as `(forwarder set, probability)` pairs.
pub type OutcomeLists = Vec<(Vec<usize>, f64)>;

/// Immutable description of the network and its broadcast channel.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    n_relays: usize,
    // index = node id; entry 0 (the destination) is always empty
    broadcast: Vec<Vec<Outcome>>,
    reach: Vec<NodeSet>,
}

impl NetworkModel {
    /// Builds a model without validating it. Zero-probability outcomes are
    /// dropped and duplicate subsets are merged, in first-seen order.
    ///
    /// `entries` holds `(node, [(set, p), ...])` blocks.
    pub fn unchecked(n_relays: usize, entries: &[(usize, Vec<(NodeSet, f64)>)]) -> Self {
        let mut broadcast = vec![Vec::new(); n_relays + 1];
        for (node, outcomes) in entries {
            // out-of-range transmitters are kept so validation can report them
            if *node >= broadcast.len() {
                broadcast.resize(node + 1, Vec::new());
            }
            let slot = &mut broadcast[*node];
            for &(set, prob) in outcomes {
                if prob == 0.0 {
                    continue;
                }
                if let Some(o) = slot.iter_mut().find(|o: &&mut Outcome| o.set == set) {
                    o.prob += prob;
                } else {
                    slot.push(Outcome { set, prob });
                }
            }
        }
        let reach = broadcast
            .iter()
            .enumerate()
            .map(|(i, outs)| {
                outs.iter()
                    .filter(|o| o.prob > 0.0)
                    .fold(NodeSet::EMPTY, |acc, o| acc.union(o.set))
                    .without(i)
            })
            .collect();
        NetworkModel {
            n_relays,
            broadcast,
            reach,
        }
    }

    /// Builds, validates and renormalizes a model.
    pub fn new(n_relays: usize, entries: &[(usize, Vec<(NodeSet, f64)>)]) -> Result<Self, ModelError> {
        let mut m = Self::unchecked(n_relays, entries);
        validate_model(&m)?;
        for outs in m.broadcast.iter_mut().skip(1) {
            let sum: f64 = outs.iter().map(|o| o.prob).sum();
            for o in outs.iter_mut() {
                o.prob /= sum;
            }
        }
        Ok(m)
    }

    /// Convenience wrapper over [`NetworkModel::new`] taking node lists.
    pub fn from_lists(n_relays: usize, entries: &[(usize, OutcomeLists)]) -> Result<Self, ModelError> {
        let converted: Vec<_> = entries
            .iter()
            .map(|(node, outs)| {
                (
                    *node,
                    outs.iter()
                        .map(|(set, p)| (NodeSet::from_nodes(set.iter().copied()), *p))
                        .collect(),
                )
            })
            .collect();
        Self::new(n_relays, &converted)
    }

    /// Independent per-link successes: link `(i, j, q)` delivers to `j` with
    /// probability `q`, independently of the other links of `i`. Every outcome
    /// subset of the out-links is enumerated with its product probability and
    /// the transmitter is added to every subset.
    pub fn from_link_probabilities(n_relays: usize, links: &[(usize, usize, f64)]) -> Result<Self, ModelError> {
        check_relay_count(n_relays)?;
        let mut per_node: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for &(from, to, q) in links {
            if from == 0 || from > n_relays || to > n_relays || to == from || !(0.0..=1.0).contains(&q) {
                return Err(ModelError::BadLink { from, to, q });
            }
            let out = per_node.entry(from).or_default();
            if out.iter().any(|&(t, _)| t == to) {
                return Err(ModelError::BadLink { from, to, q });
            }
            out.push((to, q));
        }
        let mut entries = Vec::with_capacity(n_relays);
        for node in 1..=n_relays {
            let out = per_node.remove(&node).unwrap_or_default();
            if out.len() > MAX_LINK_DEGREE {
                return Err(ModelError::DegreeTooLarge {
                    node,
                    degree: out.len(),
                    limit: MAX_LINK_DEGREE,
                });
            }
            let mut outcomes = Vec::with_capacity(1 << out.len());
            for pattern in 0u32..(1u32 << out.len()) {
                let mut set = NodeSet::singleton(node);
                let mut p = 1.0;
                for (bit, &(to, q)) in out.iter().enumerate() {
                    if pattern & (1 << bit) != 0 {
                        set = set.with(to);
                        p *= q;
                    } else {
                        p *= 1.0 - q;
                    }
                }
                outcomes.push((set, p));
            }
            entries.push((node, outcomes));
        }
        Self::new(n_relays, &entries)
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    /// Relay set `{1, ..., N}`.
    pub fn relays(&self) -> NodeSet {
        NodeSet::relays(self.n_relays)
    }

    /// Broadcast outcomes of relay `i`.
    pub fn outcomes(&self, i: usize) -> &[Outcome] {
        &self.broadcast[i]
    }

    /// Nodes `j != i` that `i` reaches.
    pub fn reach_set(&self, i: usize) -> NodeSet {
        self.reach[i]
    }

    pub fn reaches(&self, i: NodeId, j: NodeId) -> bool {
        i.0 != j.0 && i.0 < self.reach.len() && self.reach[i.0].contains(j.0)
    }

    /// Relays with a directed reaches-path to the destination.
    pub fn connected_relays(&self) -> NodeSet {
        reach_destination_within(self, self.relays())
    }

    pub fn is_connected(&self) -> bool {
        self.connected_relays() == self.relays()
    }

    /// Smallest strictly positive `P(S|i)` over all relays.
    pub fn p_min(&self) -> Result<f64, ModelError> {
        let mut best = f64::INFINITY;
        for node in 1..=self.n_relays {
            let node_min = self.broadcast[node]
                .iter()
                .map(|o| o.prob)
                .filter(|&p| p > 0.0)
                .fold(f64::INFINITY, f64::min);
            if node_min.is_infinite() {
                return Err(ModelError::NoPositiveEntry { node });
            }
            best = best.min(node_min);
        }
        Ok(best)
    }

    /// Draws `S_i(t)` from `P(·|i)`.
    pub fn sample_forwarder_set<R: Rng + ?Sized>(&self, i: NodeId, rng: &mut R) -> NodeSet {
        let outs = &self.broadcast[i.0];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for o in outs {
            acc += o.prob;
            if u < acc {
                return o.set;
            }
        }
        // rounding slack in the cumulative sum
        outs.last().map(|o| o.set).unwrap_or(NodeSet::singleton(i.0))
    }

    /// Probability that relay `i`'s transmission is received by some node of `targets`.
    pub fn hit_probability(&self, i: usize, targets: NodeSet) -> f64 {
        self.broadcast[i]
            .iter()
            .filter(|o| o.set.intersects(targets))
            .map(|o| o.prob)
            .sum()
    }
}

fn check_relay_count(n: usize) -> Result<(), ModelError> {
    if n == 0 || n > MAX_NODE {
        return Err(ModelError::BadRelayCount { n, max: MAX_NODE });
    }
    Ok(())
}

/// Checks the model invariants: every relay's distribution sums to one, every
/// support set contains its transmitter and only valid node labels, and the
/// destination has no broadcast entries.
pub fn validate_model(m: &NetworkModel) -> Result<(), ModelError> {
    check_relay_count(m.n_relays)?;
    if m.broadcast.len() > m.n_relays + 1 {
        if let Some(node) = (m.n_relays + 1..m.broadcast.len()).find(|&n| !m.broadcast[n].is_empty()) {
            return Err(ModelError::BadSubset {
                node,
                reason: format!("transmitter index exceeds N = {}", m.n_relays),
            });
        }
    }
    if !m.broadcast[0].is_empty() {
        return Err(ModelError::BadSubset {
            node: 0,
            reason: "the destination never transmits".into(),
        });
    }
    let all = NodeSet::relays(m.n_relays).with(0);
    for node in 1..=m.n_relays {
        let outs = &m.broadcast[node];
        let mut sum = 0.0;
        for o in outs {
            if !o.set.is_subset(all) {
                return Err(ModelError::BadSubset {
                    node,
                    reason: format!("set {:?} contains an index > {}", o.set, m.n_relays),
                });
            }
            if !(o.prob.is_finite() && o.prob >= 0.0) {
                return Err(ModelError::ProbSumError { node, sum: o.prob });
            }
            if !o.set.contains(node) {
                return Err(ModelError::SelfNotInSet { node, set: o.set });
            }
            sum += o.prob;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(ModelError::ProbSumError { node, sum });
        }
    }
    Ok(())
}

/// Nodes of `allowed` that reach the destination through nodes of `allowed` only.
pub fn reach_destination_within(m: &NetworkModel, allowed: NodeSet) -> NodeSet {
    let mut good = NodeSet::singleton(0);
    loop {
        let mut grew = false;
        for i in allowed.difference(good).iter() {
            if m.reach[i].intersects(good) {
                good = good.with(i);
                grew = true;
            }
        }
        if !grew {
            return good.without(0);
        }
    }
}
