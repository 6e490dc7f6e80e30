//! Priority-based routing policies and the forwarder-selection rule.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::cones::{construct, construct_pc, resolve_cone, resolve_cone_pc, ConeError};
use crate::model::NetworkModel;
use crate::nodeset::{NodeId, NodeSet};
use crate::ranking::{is_refinement, validate_rank_ordering, RankOrdering, RankingError};
use crate::scalar::Scalar;
use crate::weights::WeightTable;

/// Relative tolerance for grouping equal congestion costs.
pub const ORCD_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("network is not connected")]
    NotConnected,
    #[error("no unfinalized node reaches the finalized set")]
    NoProgress,
    #[error("streams have different lengths: {fine} vs {coarse}")]
    LengthMismatch { fine: usize, coarse: usize },
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
}

/// How a transmitter picks among several lowest-rank forwarders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieRule {
    #[default]
    LowestIndex,
    UniformRandom,
}

impl FromStr for TieRule {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest-index" => Ok(TieRule::LowestIndex),
            "uniform-random" => Ok(TieRule::UniformRandom),
            other => Err(PolicyError::UnknownPolicy(format!("tie rule {other}"))),
        }
    }
}

/// Per-node rank lookup built once per slot.
#[derive(Clone, Debug)]
pub struct RankTable(Vec<usize>);

impl RankTable {
    pub fn new(r: &RankOrdering) -> Self {
        RankTable(r.rank_table())
    }

    #[inline]
    pub fn rank(&self, node: usize) -> usize {
        self.0[node]
    }
}

/// The lowest-rank member of `s`, retaining when `i` itself is lowest.
/// A set containing the destination always delivers.
pub fn select_forwarder<R: Rng + ?Sized>(r: &RankOrdering, i: NodeId, s: NodeSet, tie: TieRule, rng: &mut R) -> NodeId {
    select_with_table(&RankTable::new(r), i, s, tie, rng)
}

pub fn select_with_table<R: Rng + ?Sized>(
    ranks: &RankTable,
    i: NodeId,
    s: NodeSet,
    tie: TieRule,
    rng: &mut R,
) -> NodeId {
    if s.contains(0) {
        return NodeId::DESTINATION;
    }
    let best = s.iter().map(|k| ranks.rank(k)).min().expect("s contains the transmitter");
    if ranks.rank(i.0) == best {
        return i;
    }
    let lowest = NodeSet::from_nodes(s.iter().filter(|&k| ranks.rank(k) == best));
    match tie {
        TieRule::LowestIndex => NodeId(lowest.iter().next().expect("nonempty")),
        TieRule::UniformRandom => {
            let pick = rng.gen_range(0..lowest.len());
            NodeId(lowest.iter().nth(pick).expect("in range"))
        }
    }
}

/// Classes ordered by increasing `key`, equal keys (per `same`) sharing a class.
fn group_by_key(keys: &[f64], same: impl Fn(f64, f64) -> bool) -> RankOrdering {
    let mut order: Vec<usize> = (1..=keys.len()).collect();
    order.sort_by(|&a, &b| keys[a - 1].total_cmp(&keys[b - 1]).then(a.cmp(&b)));
    let mut classes: Vec<NodeSet> = Vec::new();
    let mut anchor = f64::NAN;
    for k in order {
        let v = keys[k - 1];
        match classes.last_mut() {
            Some(last) if same(anchor, v) => *last = last.with(k),
            _ => {
                classes.push(NodeSet::singleton(k));
                anchor = v;
            }
        }
    }
    RankOrdering::from_classes_unchecked(classes)
}

/// Smaller backlog means lower rank; equal backlogs share a class.
pub fn rank_backpressure(q: &[f64]) -> RankOrdering {
    group_by_key(q, |a, b| a == b)
}

/// Congestion costs `V` indexed by node label, `V_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrcdCosts {
    pub v: Vec<f64>,
    /// Relays in the order they were finalized.
    pub order: Vec<usize>,
}

/// Least fixed point of `V_i = Q_i + Σ_S P(S|i) min_{j ∈ S} V_j` by
/// finalizing nodes in increasing cost order.
pub fn orcd_costs(q: &[f64], m: &NetworkModel) -> Result<OrcdCosts, PolicyError> {
    let n = m.n_relays();
    if q.len() != n {
        return Err(PolicyError::LengthMismatch { fine: q.len(), coarse: n });
    }
    if !m.is_connected() {
        return Err(PolicyError::NotConnected);
    }
    let mut v = vec![f64::INFINITY; n + 1];
    v[0] = 0.0;
    let mut done = NodeSet::singleton(0);
    let mut order = Vec::with_capacity(n);
    let mut pending = m.relays();
    while !pending.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for i in pending.iter() {
            let mut mass = 0.0;
            let mut acc = q[i - 1];
            for o in m.outcomes(i) {
                let hit = o.set.intersection(done);
                if hit.is_empty() {
                    continue;
                }
                let low = hit.iter().map(|j| v[j]).fold(f64::INFINITY, f64::min);
                mass += o.prob;
                acc += o.prob * low;
            }
            if mass > 0.0 {
                let cand = acc / mass;
                if best.is_none_or(|(b, _)| cand < b) {
                    best = Some((cand, i));
                }
            }
        }
        let Some((cost, i)) = best else {
            return Err(PolicyError::NoProgress);
        };
        v[i] = cost;
        done = done.with(i);
        pending = pending.without(i);
        order.push(i);
    }
    Ok(OrcdCosts { v, order })
}

/// Value iteration from `V = 0` (Gauss-Seidel sweeps) until the largest
/// update falls below `tol` relative to the largest cost. Starting from
/// zero matters: every node recalls its own packet, so `V = ∞` is also a
/// fixed point of the map.
pub fn orcd_costs_value_iteration(q: &[f64], m: &NetworkModel, tol: f64, max_sweeps: usize) -> Result<Vec<f64>, PolicyError> {
    if !m.is_connected() {
        return Err(PolicyError::NotConnected);
    }
    let n = m.n_relays();
    let mut v = vec![0.0; n + 1];
    for _ in 0..max_sweeps {
        let mut change: f64 = 0.0;
        for i in 1..=n {
            let next = q[i - 1] + m
                .outcomes(i)
                .iter()
                .map(|o| o.prob * o.set.iter().map(|j| v[j]).fold(f64::INFINITY, f64::min))
                .sum::<f64>();
            change = change.max((next - v[i]).abs());
            v[i] = next;
        }
        let scale = v.iter().fold(1.0f64, |a, &b| a.max(b));
        if change <= tol * scale {
            return Ok(v);
        }
    }
    Err(PolicyError::NoProgress)
}

/// `max_i |V_i - Q_i - Σ_S P(S|i) min_{j ∈ S} V_j|`.
pub fn orcd_residual(q: &[f64], m: &NetworkModel, v: &[f64]) -> f64 {
    (1..=m.n_relays())
        .map(|i| {
            let rhs = q[i - 1]
                + m.outcomes(i)
                    .iter()
                    .map(|o| o.prob * o.set.iter().map(|j| v[j]).fold(f64::INFINITY, f64::min))
                    .sum::<f64>();
            (v[i] - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Relays sorted by congestion cost, near-equal costs sharing a class.
pub fn rank_orcd(q: &[f64], m: &NetworkModel) -> Result<RankOrdering, PolicyError> {
    let costs = orcd_costs(q, m)?;
    Ok(group_by_key(&costs.v[1..], |a, b| f64::nearly_eq(&a, &b, ORCD_TIE_TOLERANCE)))
}

pub fn rank_fpolicy<T: Scalar>(q: &[T], f: &WeightTable<T>) -> Result<RankOrdering, PolicyError> {
    Ok(resolve_cone(q, f)?.ordering)
}

pub fn rank_pc_fpolicy<T: Scalar>(q: &[T], f: &WeightTable<T>, m: &NetworkModel) -> Result<RankOrdering, PolicyError> {
    Ok(resolve_cone_pc(q, f, m)?.ordering)
}

/// True iff every `fine[t]` refines `coarse[t]`.
pub fn respects_check(fine: &[RankOrdering], coarse: &[RankOrdering]) -> Result<bool, PolicyError> {
    first_disrespect(fine, coarse).map(|x| x.is_none())
}

/// Index of the first slot where `fine` fails to refine `coarse`.
pub fn first_disrespect(fine: &[RankOrdering], coarse: &[RankOrdering]) -> Result<Option<usize>, PolicyError> {
    if fine.len() != coarse.len() {
        return Err(PolicyError::LengthMismatch {
            fine: fine.len(),
            coarse: coarse.len(),
        });
    }
    Ok(fine.iter().zip(coarse).position(|(a, b)| !is_refinement(a, b)))
}

/// Which rank ordering a priority policy uses at each slot.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Backpressure,
    Orcd,
    FPolicy,
    PcFPolicy,
    StaticPriority(RankOrdering),
}

impl PolicySpec {
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Backpressure => write!(f, "backpressure"),
            PolicySpec::Orcd => write!(f, "orcd"),
            PolicySpec::FPolicy => write!(f, "fpolicy"),
            PolicySpec::PcFPolicy => write!(f, "pc-fpolicy"),
            PolicySpec::StaticPriority(r) => write!(f, "static-priority:{}", r.to_json()),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "backpressure" => Ok(PolicySpec::Backpressure),
            "orcd" => Ok(PolicySpec::Orcd),
            "fpolicy" => Ok(PolicySpec::FPolicy),
            "pc-fpolicy" => Ok(PolicySpec::PcFPolicy),
            other => match other.strip_prefix("static-priority:") {
                Some(json) => Ok(PolicySpec::StaticPriority(RankOrdering::from_json(json)?)),
                None => Err(PolicyError::UnknownPolicy(other.to_string())),
            },
        }
    }
}

/// A policy bound to its weight table and network, ready for the slot loop.
#[derive(Clone, Debug)]
pub struct Policy {
    pub spec: PolicySpec,
    pub weights: WeightTable<f64>,
    pub tie: TieRule,
}

impl Policy {
    pub fn new(spec: PolicySpec, weights: WeightTable<f64>, tie: TieRule) -> Self {
        Policy { spec, weights, tie }
    }

    /// Checks the combination once so [`Policy::rank`] can skip verification.
    pub fn validate(&self, m: &NetworkModel) -> Result<(), PolicyError> {
        let n = m.n_relays();
        match &self.spec {
            PolicySpec::FPolicy | PolicySpec::PcFPolicy if self.weights.n_max() < n => {
                Err(ConeError::WeightTooSmall {
                    n,
                    n_max: self.weights.n_max(),
                }
                .into())
            }
            PolicySpec::FPolicy if n > crate::cones::RESOLVE_LIMIT => Err(ConeError::TooLarge {
                n,
                limit: crate::cones::RESOLVE_LIMIT,
            }
            .into()),
            PolicySpec::PcFPolicy | PolicySpec::Orcd if !m.is_connected() => Err(PolicyError::NotConnected),
            PolicySpec::StaticPriority(r) => Ok(validate_rank_ordering(r, n)?),
            _ => Ok(()),
        }
    }

    /// Rank ordering at backlog `q`.
    pub fn rank(&self, q: &[f64], m: &NetworkModel) -> Result<RankOrdering, PolicyError> {
        Ok(match &self.spec {
            PolicySpec::Backpressure => rank_backpressure(q),
            PolicySpec::Orcd => rank_orcd(q, m)?,
            PolicySpec::FPolicy => construct(q, &self.weights),
            PolicySpec::PcFPolicy => construct_pc(q, &self.weights, m),
            PolicySpec::StaticPriority(r) => r.clone(),
        })
    }
}

/// `Σ_i f(|C^{i-1}|, |C_i|) Q_{C_i} (μ_{C_i,out} - μ_{C_i,in})` for the
/// decisions `(transmitter, forwarder)`; retention contributes nothing.
pub fn weighted_flow(q: &[f64], f: &WeightTable<f64>, r: &RankOrdering, decisions: &[(usize, usize)]) -> f64 {
    let ranks = r.rank_table();
    let mut below = 0;
    let weight: Vec<f64> = r
        .classes()
        .iter()
        .map(|c| {
            let w = f.get(below, c.len()) * crate::ranking::class_backlog(q, *c);
            below += c.len();
            w
        })
        .collect();
    decisions
        .iter()
        .map(|&(k, l)| match l {
            0 => weight[ranks[k]],
            l if l == k => 0.0,
            l => weight[ranks[k]] - weight[ranks[l]],
        })
        .sum()
}
