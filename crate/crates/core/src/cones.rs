//! Cone resolution and the piecewise-quadratic Lyapunov function.
//!
//! The production resolver follows the constructive existence argument: find
//! the smallest `l` for which splitting the current universe into
//! `(Ĉ1, Ĉ2)` with `|Ĉ2| = l` penalizes less than keeping it whole, resolve
//! `Ĉ1` recursively, append `Ĉ2`, then merge suffix classes while merging
//! penalizes less. The oracles scan every ordering and check the cone
//! definition directly.

use thiserror::Error;

use crate::model::{reach_destination_within, NetworkModel};
use crate::nodeset::NodeSet;
use crate::ranking::{
    adjacency, class_backlog, classes_path_connected, compare_at, is_one_step_refinement, mismatch,
    path_connected_adjacency, RankOrdering,
};
use crate::scalar::Scalar;
use crate::weights::WeightTable;

/// Largest relay count accepted by the enumeration oracles.
pub const ORACLE_LIMIT: usize = 8;
/// Largest relay count accepted by the constructive resolvers.
pub const RESOLVE_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("no ordering satisfies the cone condition at q = {q:?}")]
    NoCone { q: Vec<f64> },
    #[error("{} orderings satisfy the cone condition at q = {q:?}: {orderings:?}", orderings.len())]
    MultipleCones { q: Vec<f64>, orderings: Vec<RankOrdering> },
    #[error("network is not connected")]
    NotConnected,
    #[error("{n} relays exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("backlog vector has {got} entries, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("backlog entry {index} is negative or not finite")]
    BadBacklog { index: usize },
    #[error("weight table covers m + n <= {n_max}, need {n}")]
    WeightTooSmall { n: usize, n_max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeResolution {
    pub ordering: RankOrdering,
    /// Some adjacency comparison was decided by the tie clause.
    pub on_boundary: bool,
    pub checked_adjacency_count: usize,
}

fn lossy<T: Scalar>(q: &[T]) -> Vec<f64> {
    q.iter().map(|x| x.to_f64_lossy()).collect()
}

fn check_inputs<T: Scalar>(q: &[T], f: &WeightTable<T>, limit: usize) -> Result<(), ConeError> {
    let n = q.len();
    if n == 0 {
        return Err(ConeError::LengthMismatch { got: 0, expected: 1 });
    }
    if n > limit {
        return Err(ConeError::TooLarge { n, limit });
    }
    if f.n_max() < n {
        return Err(ConeError::WeightTooSmall { n, n_max: f.n_max() });
    }
    for (index, x) in q.iter().enumerate() {
        if *x < T::zero() || !x.to_f64_lossy().is_finite() {
            return Err(ConeError::BadBacklog { index });
        }
    }
    Ok(())
}

/// `a <= b`, ties within tolerance included.
#[inline]
fn at_most<T: Scalar>(a: &T, b: &T) -> bool {
    a <= b || T::nearly_eq(a, b, T::TIE_TOLERANCE)
}

/// `a < b` beyond tolerance.
#[inline]
fn strictly_below<T: Scalar>(a: &T, b: &T) -> bool {
    T::definitely_less(a, b, T::TIE_TOLERANCE)
}

/// All ordered set partitions of `{1, ..., n}`: first class by increasing
/// bitmask, remaining classes recursively.
pub fn enumerate_rank_orderings(n_relays: usize) -> Result<Vec<RankOrdering>, ConeError> {
    if n_relays > ORACLE_LIMIT {
        return Err(ConeError::TooLarge {
            n: n_relays,
            limit: ORACLE_LIMIT,
        });
    }
    let mut out = Vec::new();
    let mut stack = Vec::new();
    enumerate_into(NodeSet::relays(n_relays), &mut stack, &mut out);
    Ok(out)
}

fn enumerate_into(rest: NodeSet, stack: &mut Vec<NodeSet>, out: &mut Vec<RankOrdering>) {
    if rest.is_empty() {
        if !stack.is_empty() {
            out.push(RankOrdering::from_classes_unchecked(stack.clone()));
        }
        return;
    }
    for first in rest.subsets().skip(1) {
        stack.push(first);
        enumerate_into(rest.difference(first), stack, out);
        stack.pop();
    }
}

struct Neighbour {
    index: usize,
    /// 1-based mismatch index.
    at: usize,
    /// The owner is a one-step refinement of this neighbour.
    owner_refines: bool,
}

/// Brute-force cone oracle over a fixed relay count, with the adjacency
/// structure precomputed once.
pub struct ConeOracle {
    n_relays: usize,
    orderings: Vec<RankOrdering>,
    neighbours: Vec<Vec<Neighbour>>,
}

impl ConeOracle {
    /// Oracle over every rank ordering of `{1, ..., n}`.
    pub fn general(n_relays: usize) -> Result<Self, ConeError> {
        let orderings = enumerate_rank_orderings(n_relays)?;
        Ok(Self::build(n_relays, orderings, adjacency))
    }

    /// Oracle over path-connected orderings with path-connected adjacency.
    pub fn path_connected(m: &NetworkModel) -> Result<Self, ConeError> {
        if !m.is_connected() {
            return Err(ConeError::NotConnected);
        }
        let orderings: Vec<_> = enumerate_rank_orderings(m.n_relays())?
            .into_iter()
            .filter(|r| classes_path_connected(r.classes(), m))
            .collect();
        Ok(Self::build(m.n_relays(), orderings, |r| {
            path_connected_adjacency(r, m).expect("filtered to path-connected")
        }))
    }

    fn build(n_relays: usize, orderings: Vec<RankOrdering>, adj: impl Fn(&RankOrdering) -> Vec<RankOrdering>) -> Self {
        let index: std::collections::HashMap<&RankOrdering, usize> =
            orderings.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let neighbours = orderings
            .iter()
            .map(|r| {
                adj(r)
                    .iter()
                    .map(|x| Neighbour {
                        index: index[x],
                        at: mismatch(r, x).expect("neighbours differ"),
                        owner_refines: is_one_step_refinement(r, x),
                    })
                    .collect()
            })
            .collect();
        ConeOracle {
            n_relays,
            orderings,
            neighbours,
        }
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    pub fn orderings(&self) -> &[RankOrdering] {
        &self.orderings
    }

    /// Every ordering satisfying the cone condition at `q`, each with its
    /// boundary flag.
    pub fn satisfiers<T: Scalar>(&self, q: &[T], f: &WeightTable<T>) -> Result<Vec<ConeResolution>, ConeError> {
        if q.len() != self.n_relays {
            return Err(ConeError::LengthMismatch {
                got: q.len(),
                expected: self.n_relays,
            });
        }
        check_inputs(q, f, ORACLE_LIMIT)?;
        // prefix penalties of every ordering, so each comparison is a lookup
        let prefix: Vec<Vec<T>> = self
            .orderings
            .iter()
            .map(|r| {
                let mut below = 0;
                let mut acc = T::zero();
                r.classes()
                    .iter()
                    .map(|c| {
                        acc = acc.clone() + f.get(below, c.len()).clone() * class_backlog(q, *c);
                        below += c.len();
                        acc.clone()
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        'outer: for (i, nbrs) in self.neighbours.iter().enumerate() {
            let mut on_boundary = false;
            for nb in nbrs {
                let a = &prefix[i][nb.at - 1];
                let b = &prefix[nb.index][nb.at - 1];
                let tie = T::nearly_eq(a, b, T::TIE_TOLERANCE);
                let less = if tie { nb.owner_refines } else { a < b };
                if !less {
                    continue 'outer;
                }
                on_boundary |= tie;
            }
            out.push(ConeResolution {
                ordering: self.orderings[i].clone(),
                on_boundary,
                checked_adjacency_count: nbrs.len(),
            });
        }
        Ok(out)
    }

    /// The unique satisfier at `q`.
    pub fn resolve<T: Scalar>(&self, q: &[T], f: &WeightTable<T>) -> Result<ConeResolution, ConeError> {
        let mut found = self.satisfiers(q, f)?;
        match found.len() {
            0 => Err(ConeError::NoCone { q: lossy(q) }),
            1 => Ok(found.pop().expect("one element")),
            _ => Err(ConeError::MultipleCones {
                q: lossy(q),
                orderings: found.into_iter().map(|c| c.ordering).collect(),
            }),
        }
    }
}

/// Definition-checking oracle over all orderings of `{1, ..., q.len()}`.
pub fn resolve_cone_oracle<T: Scalar>(q: &[T], f: &WeightTable<T>) -> Result<ConeResolution, ConeError> {
    check_inputs(q, f, ORACLE_LIMIT)?;
    ConeOracle::general(q.len())?.resolve(q, f)
}

/// Definition-checking oracle over path-connected orderings of `m`.
pub fn resolve_cone_pc_oracle<T: Scalar>(
    q: &[T],
    f: &WeightTable<T>,
    m: &NetworkModel,
) -> Result<ConeResolution, ConeError> {
    check_len(q, m)?;
    check_inputs(q, f, ORACLE_LIMIT)?;
    ConeOracle::path_connected(m)?.resolve(q, f)
}

fn check_len<T>(q: &[T], m: &NetworkModel) -> Result<(), ConeError> {
    if q.len() != m.n_relays() {
        return Err(ConeError::LengthMismatch {
            got: q.len(),
            expected: m.n_relays(),
        });
    }
    Ok(())
}

/// Compares the result against its adjacency set, filling in the boundary
/// flag; a failed comparison means the weight table broke the construction.
fn verify<T: Scalar>(
    q: &[T],
    f: &WeightTable<T>,
    r: RankOrdering,
    adj: &[RankOrdering],
) -> Result<ConeResolution, ConeError> {
    let mut on_boundary = false;
    for x in adj {
        let at = mismatch(&r, x).expect("neighbours differ");
        let c = compare_at(r.classes(), x.classes(), at, q, f, || is_one_step_refinement(&r, x));
        if !c.less {
            return Err(ConeError::NoCone { q: lossy(q) });
        }
        on_boundary |= c.tie;
    }
    Ok(ConeResolution {
        ordering: r,
        on_boundary,
        checked_adjacency_count: adj.len(),
    })
}

/// Constructive resolution of the cone containing `q`, verified against
/// the full adjacency set.
pub fn resolve_cone<T: Scalar>(q: &[T], f: &WeightTable<T>) -> Result<ConeResolution, ConeError> {
    check_inputs(q, f, RESOLVE_LIMIT)?;
    let r = construct(q, f);
    let adj = adjacency(&r);
    verify(q, f, r, &adj)
}

/// Constructive resolution over path-connected orderings of `m`.
pub fn resolve_cone_pc<T: Scalar>(q: &[T], f: &WeightTable<T>, m: &NetworkModel) -> Result<ConeResolution, ConeError> {
    check_len(q, m)?;
    check_inputs(q, f, RESOLVE_LIMIT)?;
    if !m.is_connected() {
        return Err(ConeError::NotConnected);
    }
    let r = construct_pc(q, f, m);
    let adj = path_connected_adjacency(&r, m).map_err(|_| ConeError::NoCone { q: lossy(q) })?;
    verify(q, f, r, &adj)
}

/// Unverified constructive resolution for hot loops; inputs are assumed valid.
pub fn construct<T: Scalar>(q: &[T], f: &WeightTable<T>) -> RankOrdering {
    let n = q.len();
    // The split minimising Q_{Ĉ1} for a given l puts the l largest backlogs
    // on top, so every universe in the recursion is a prefix of this order.
    let mut order: Vec<usize> = (1..=n).collect();
    order.sort_by(|&a, &b| {
        q[a - 1]
            .partial_cmp(&q[b - 1])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(T::zero());
    for &k in &order {
        let next = prefix.last().expect("nonempty").clone() + q[k - 1].clone();
        prefix.push(next);
    }
    let bounds = construct_prefix(n, &prefix, f);
    let mut classes = Vec::with_capacity(bounds.len());
    let mut start = 0;
    for end in bounds {
        classes.push(NodeSet::from_nodes(order[start..end].iter().copied()));
        start = end;
    }
    RankOrdering::from_classes_unchecked(classes)
}

/// Class end positions for the universe made of the first `n` sorted nodes.
fn construct_prefix<T: Scalar>(n: usize, prefix: &[T], f: &WeightTable<T>) -> Vec<usize> {
    if n == 1 {
        return vec![1];
    }
    let whole = f.get(0, n).clone() * prefix[n].clone();
    let Some(l) = (1..n).find(|&l| at_most(&(f.get(0, n - l).clone() * prefix[n - l].clone()), &whole)) else {
        return vec![n];
    };
    let mut ends = construct_prefix(n - l, prefix, f);
    ends.push(n);
    // merge the top two classes while the merged ordering penalizes less
    while ends.len() >= 2 {
        let k = ends.len();
        let start = if k >= 3 { ends[k - 3] } else { 0 };
        let mid = ends[k - 2];
        let end = ends[k - 1];
        let split = f.get(start, mid - start).clone() * (prefix[mid].clone() - prefix[start].clone());
        let merged = f.get(start, end - start).clone() * (prefix[end].clone() - prefix[start].clone());
        if strictly_below(&merged, &split) {
            ends.remove(k - 2);
        } else {
            break;
        }
    }
    ends
}

/// Unverified path-connected resolution; inputs are assumed valid and `m` connected.
pub fn construct_pc<T: Scalar>(q: &[T], f: &WeightTable<T>, m: &NetworkModel) -> RankOrdering {
    let classes = construct_pc_set(NodeSet::relays(q.len()), q, f, m);
    RankOrdering::from_classes_unchecked(classes)
}

fn construct_pc_set<T: Scalar>(u: NodeSet, q: &[T], f: &WeightTable<T>, m: &NetworkModel) -> Vec<NodeSet> {
    let n = u.len();
    if n == 1 {
        return vec![u];
    }
    // For each size of Ĉ1, the self-reaching Ĉ1 with the smallest backlog
    // (ties to the smaller mask, i.e. the larger Ĉ2 mask).
    let mut best: Vec<Option<(T, NodeSet)>> = vec![None; n];
    for low in u.subsets() {
        if low.is_empty() || low == u || reach_destination_within(m, low) != low {
            continue;
        }
        let b = class_backlog(q, low);
        let slot = &mut best[low.len()];
        let better = match slot {
            None => true,
            Some((cur, _)) => b < *cur,
        };
        if better {
            *slot = Some((b, low));
        }
    }
    let whole = f.get(0, n).clone() * class_backlog(q, u);
    let split = (1..n).find_map(|l| {
        let (b, low) = best[n - l].as_ref()?;
        at_most(&(f.get(0, n - l).clone() * b.clone()), &whole).then_some(*low)
    });
    let Some(low) = split else {
        return vec![u];
    };
    let mut classes = construct_pc_set(low, q, f, m);
    classes.push(u.difference(low));
    while classes.len() >= 2 {
        let k = classes.len();
        let below: usize = classes[..k - 2].iter().map(|c| c.len()).sum();
        let (a, b) = (classes[k - 2], classes[k - 1]);
        let split = f.get(below, a.len()).clone() * class_backlog(q, a);
        let merged = f.get(below, a.len() + b.len()).clone() * class_backlog(q, a.union(b));
        if strictly_below(&merged, &split) {
            classes.pop();
            classes[k - 2] = a.union(b);
        } else {
            break;
        }
    }
    classes
}

/// `L_f(Q, R) = Σ_i f(|C^{i-1}|, |C_i|) Q_{C_i}^2`.
pub fn lyapunov_value<T: Scalar>(q: &[T], f: &WeightTable<T>, r: &RankOrdering) -> T {
    let mut below = 0;
    let mut acc = T::zero();
    for c in r.classes() {
        let s = class_backlog(q, *c);
        acc = acc + f.get(below, c.len()).clone() * s.clone() * s;
        below += c.len();
    }
    acc
}

/// Component `k ∈ C_j` is `2 f(|C^{j-1}|, |C_j|) Q_{C_j}`.
pub fn lyapunov_gradient<T: Scalar>(q: &[T], f: &WeightTable<T>, r: &RankOrdering) -> Vec<T> {
    let mut grad = vec![T::zero(); q.len()];
    let mut below = 0;
    let two = T::one() + T::one();
    for c in r.classes() {
        let g = two.clone() * f.get(below, c.len()).clone() * class_backlog(q, *c);
        for k in c.iter() {
            grad[k - 1] = g.clone();
        }
        below += c.len();
    }
    grad
}

/// `L*_f(q)` through the fast constructive resolver.
pub fn lyapunov_star<T: Scalar>(q: &[T], f: &WeightTable<T>) -> T {
    lyapunov_value(q, f, &construct(q, f))
}

/// `L*_f` for the path-connected family.
pub fn lyapunov_star_pc<T: Scalar>(q: &[T], f: &WeightTable<T>, m: &NetworkModel) -> T {
    lyapunov_value(q, f, &construct_pc(q, f, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use crate::topologies;

    fn ro(classes: &[&[usize]]) -> RankOrdering {
        RankOrdering::from_lists(classes).unwrap()
    }

    fn k3(n: usize) -> WeightTable<f64> {
        WeightTable::geometric(3.0, n).unwrap()
    }

    #[test]
    fn ordered_bell_counts() {
        let counts: Vec<usize> = (1..=5).map(|n| enumerate_rank_orderings(n).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 3, 13, 75, 541]);
        let two = enumerate_rank_orderings(2).unwrap();
        assert!(two.contains(&ro(&[&[1, 2]])));
        assert!(two.contains(&ro(&[&[1], &[2]])));
        assert!(two.contains(&ro(&[&[2], &[1]])));
        assert!(matches!(enumerate_rank_orderings(9), Err(ConeError::TooLarge { .. })));
    }

    #[test]
    fn oracle_examples() {
        let f = k3(2);
        assert_eq!(resolve_cone_oracle(&[1.0, 1.0], &f).unwrap().ordering, ro(&[&[1, 2]]));
        let tie = resolve_cone_oracle(&[1.0, 3.0], &f).unwrap();
        assert_eq!(tie.ordering, ro(&[&[1], &[2]]));
        assert!(tie.on_boundary);
        assert_eq!(resolve_cone_oracle(&[3.0, 1.0], &f).unwrap().ordering, ro(&[&[2], &[1]]));
    }

    #[test]
    fn constructive_examples() {
        let f = k3(6);
        assert_eq!(resolve_cone(&[1.0, 1.0], &f).unwrap().ordering, ro(&[&[1, 2]]));
        let r = resolve_cone(&[0.2, 1.0], &f).unwrap();
        assert_eq!(r.ordering, ro(&[&[1], &[2]]));
        assert!(!r.on_boundary);
        assert!(resolve_cone(&[1.0, 3.0], &f).unwrap().on_boundary);
        for n in 1..=6 {
            let q = vec![2.5; n];
            assert_eq!(resolve_cone(&q, &f).unwrap().ordering, RankOrdering::single_class(n));
        }
    }

    #[test]
    fn exact_boundary_agrees_with_oracle() {
        let f = WeightTable::geometric(ratio(3, 1), 2).unwrap();
        let q = [ratio(1, 1), ratio(3, 1)];
        let a = resolve_cone(&q, &f).unwrap();
        let b = resolve_cone_oracle(&q, &f).unwrap();
        assert_eq!(a.ordering, b.ordering);
        assert!(a.on_boundary && b.on_boundary);
    }

    #[test]
    fn path_connected_examples() {
        let f = k3(2);
        let chain = topologies::chain(2, 0.5);
        for (q, want) in [([1.0, 100.0], ro(&[&[1], &[2]])), ([100.0, 1.0], ro(&[&[1, 2]]))] {
            assert_eq!(resolve_cone_pc(&q, &f, &chain).unwrap().ordering, want);
            assert_eq!(resolve_cone_pc_oracle(&q, &f, &chain).unwrap().ordering, want);
        }
        let lonely = NetworkModel::from_link_probabilities(2, &[(1, 0, 0.5)]).unwrap();
        assert_eq!(resolve_cone_pc(&[1.0, 1.0], &f, &lonely), Err(ConeError::NotConnected));
    }

    #[test]
    fn input_guards() {
        let f = k3(3);
        assert!(matches!(resolve_cone(&[1.0, -1.0], &f), Err(ConeError::BadBacklog { index: 1 })));
        assert!(matches!(resolve_cone(&[1.0; 4], &f), Err(ConeError::WeightTooSmall { .. })));
        let big = WeightTable::geometric(3.0, 13).unwrap();
        assert!(matches!(resolve_cone(&[1.0; 13], &big), Err(ConeError::TooLarge { .. })));
    }

    #[test]
    fn broken_weights_are_detected() {
        let f = WeightTable::from_fn("constant", 3, |_, _| 1.0);
        let q = [1.0, 2.0, 4.0];
        assert!(resolve_cone_oracle(&q, &f).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let f = k3(3);
        let q = [1.0, 3.0];
        assert!((lyapunov_value(&q, &f, &ro(&[&[1], &[2]])) - 2.0).abs() < 1e-14);
        assert!((lyapunov_value(&q, &f, &ro(&[&[1, 2]])) - 2.0).abs() < 1e-14);
        assert!((lyapunov_value(&[1.0; 3], &f, &ro(&[&[1, 2, 3]])) - 9.0 / 26.0).abs() < 1e-15);

        for r in [ro(&[&[1], &[2]]), ro(&[&[1, 2]])] {
            let g = lyapunov_gradient(&q, &f, &r);
            assert!((g[0] - 1.0).abs() < 1e-14 && (g[1] - 1.0).abs() < 1e-14);
        }
        assert_eq!(lyapunov_gradient(&[0.0; 3], &f, &ro(&[&[2], &[1, 3]])), vec![0.0; 3]);
    }
}
