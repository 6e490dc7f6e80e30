//! Rank orderings: ordered partitions `(C_1, ..., C_M)` of the relays.
//!
//! Lower class index means lower rank, i.e. higher routing priority. Classes
//! are stored as bitmasks, so equality of orderings is structural.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{reach_destination_within, NetworkModel};
use crate::nodeset::NodeSet;
use crate::scalar::Scalar;
use crate::weights::WeightTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("not a partition of the relays: {0}")]
    NotAPartition(String),
    #[error("rank ordering contains an empty class")]
    EmptyClass,
    #[error("orderings are identical")]
    IdenticalOrderings,
    #[error("prefix length {n} outside 1..={m}")]
    BadPrefixLength { n: usize, m: usize },
    #[error("rank ordering is not path-connected")]
    NotPathConnected,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankOrdering {
    classes: Vec<NodeSet>,
}

impl RankOrdering {
    /// Builds an ordering from disjoint, nonempty classes of relay labels.
    pub fn new(classes: Vec<NodeSet>) -> Result<Self, RankingError> {
        let mut seen = NodeSet::EMPTY;
        for c in &classes {
            if c.is_empty() {
                return Err(RankingError::EmptyClass);
            }
            if c.contains(0) {
                return Err(RankingError::NotAPartition("the destination cannot be ranked".into()));
            }
            if c.intersects(seen) {
                return Err(RankingError::NotAPartition(format!(
                    "node(s) {:?} appear in more than one class",
                    c.intersection(seen)
                )));
            }
            seen = seen.union(*c);
        }
        if classes.is_empty() {
            return Err(RankingError::NotAPartition("no classes".into()));
        }
        Ok(RankOrdering { classes })
    }

    pub fn from_lists<C: AsRef<[usize]>>(classes: &[C]) -> Result<Self, RankingError> {
        Self::new(
            classes
                .iter()
                .map(|c| NodeSet::from_nodes(c.as_ref().iter().copied()))
                .collect(),
        )
    }

    /// `({1, ..., n})`.
    pub fn single_class(n: usize) -> Self {
        RankOrdering {
            classes: vec![NodeSet::relays(n)],
        }
    }

    pub(crate) fn from_classes_unchecked(classes: Vec<NodeSet>) -> Self {
        debug_assert!(Self::new(classes.clone()).is_ok());
        RankOrdering { classes }
    }

    pub fn classes(&self) -> &[NodeSet] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn nodes(&self) -> NodeSet {
        self.classes.iter().fold(NodeSet::EMPTY, |a, c| a.union(*c))
    }

    /// 0-based class index of `node`.
    pub fn class_of(&self, node: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(node))
    }

    /// Per-node class index, indexed by node label (entry 0 unused).
    pub fn rank_table(&self) -> Vec<usize> {
        let max = self.nodes().max_node().unwrap_or(0);
        let mut table = vec![usize::MAX; max + 1];
        for (idx, c) in self.classes.iter().enumerate() {
            for k in c.iter() {
                table[k] = idx;
            }
        }
        table
    }

    /// Nested lists, e.g. `[[2], [1, 3]]`.
    pub fn to_lists(&self) -> Vec<Vec<usize>> {
        self.classes.iter().map(|c| c.iter().collect()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, RankingError> {
        let lists: Vec<Vec<usize>> =
            serde_json::from_str(s).map_err(|e| RankingError::NotAPartition(format!("bad JSON: {e}")))?;
        Self::from_lists(&lists)
    }

    /// `C^i`, the union of the first `i` classes.
    pub fn prefix_union(&self, i: usize) -> NodeSet {
        self.classes[..i].iter().fold(NodeSet::EMPTY, |a, c| a.union(*c))
    }

    /// `|C^i|`.
    pub fn prefix_size(&self, i: usize) -> usize {
        self.classes[..i].iter().map(|c| c.len()).sum()
    }

    /// Merges classes `i` and `i + 1` (0-based).
    pub fn merge_at(&self, i: usize) -> RankOrdering {
        let mut classes = self.classes.clone();
        let upper = classes.remove(i + 1);
        classes[i] = classes[i].union(upper);
        RankOrdering { classes }
    }

    /// Splits class `i` into `(low, C_i \ low)`; `low` must be a nonempty proper subset.
    pub fn split_at(&self, i: usize, low: NodeSet) -> RankOrdering {
        let c = self.classes[i];
        debug_assert!(!low.is_empty() && low.is_subset(c) && low != c);
        let mut classes = self.classes.clone();
        classes[i] = low;
        classes.insert(i + 1, c.difference(low));
        RankOrdering { classes }
    }
}

impl fmt::Debug for RankOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.classes.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c:?}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for RankOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl Serialize for RankOrdering {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_lists().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RankOrdering {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let lists = Vec::<Vec<usize>>::deserialize(d)?;
        RankOrdering::from_lists(&lists).map_err(serde::de::Error::custom)
    }
}

/// Succeeds iff `r` partitions `{1, ..., n_relays}` into nonempty classes.
pub fn validate_rank_ordering(r: &RankOrdering, n_relays: usize) -> Result<(), RankingError> {
    RankOrdering::new(r.classes.clone())?;
    let nodes = r.nodes();
    let all = NodeSet::relays(n_relays);
    if nodes != all {
        let missing = all.difference(nodes);
        let extra = nodes.difference(all);
        return Err(RankingError::NotAPartition(format!("missing {missing:?}, unexpected {extra:?}")));
    }
    Ok(())
}

/// 1-based index of the first class in which the orderings differ.
pub fn mismatch(r: &RankOrdering, r2: &RankOrdering) -> Result<usize, RankingError> {
    let common = r.classes.len().min(r2.classes.len());
    match (0..common).find(|&i| r.classes[i] != r2.classes[i]) {
        Some(i) => Ok(i + 1),
        None if r.classes.len() != r2.classes.len() => Ok(common + 1),
        None => Err(RankingError::IdenticalOrderings),
    }
}

/// True iff `a ≺ b` under `coarse` implies `a ≺ b` under `fine`. Reflexive.
pub fn is_refinement(fine: &RankOrdering, coarse: &RankOrdering) -> bool {
    if fine.nodes() != coarse.nodes() {
        return false;
    }
    let fr = fine.rank_table();
    let cr = coarse.rank_table();
    let nodes: Vec<usize> = coarse.nodes().iter().collect();
    for &a in &nodes {
        for &b in &nodes {
            if cr[a] < cr[b] && fr[a] >= fr[b] {
                return false;
            }
        }
    }
    true
}

/// True iff `fine` splits exactly one class of `coarse` into two consecutive classes.
pub fn is_one_step_refinement(fine: &RankOrdering, coarse: &RankOrdering) -> bool {
    if fine.classes.len() != coarse.classes.len() + 1 {
        return false;
    }
    let Some(i) = (0..coarse.classes.len()).find(|&i| fine.classes[i] != coarse.classes[i]) else {
        return false;
    };
    fine.classes[i].union(fine.classes[i + 1]) == coarse.classes[i] && fine.classes[i + 2..] == coarse.classes[i + 1..]
}

/// All orderings obtained by splitting one class into an ordered nonempty pair.
pub fn one_step_refinements(r: &RankOrdering) -> Vec<RankOrdering> {
    let mut out = Vec::new();
    for (i, c) in r.classes.iter().enumerate() {
        if c.len() < 2 {
            continue;
        }
        for low in c.subsets() {
            if low.is_empty() || low == *c {
                continue;
            }
            out.push(r.split_at(i, low));
        }
    }
    out
}

/// All `M - 1` orderings obtained by merging two adjacent classes.
pub fn one_step_confinements(r: &RankOrdering) -> Vec<RankOrdering> {
    (0..r.classes.len().saturating_sub(1)).map(|i| r.merge_at(i)).collect()
}

/// One-step refinements followed by one-step confinements.
pub fn adjacency(r: &RankOrdering) -> Vec<RankOrdering> {
    let mut out = one_step_refinements(r);
    out.extend(one_step_confinements(r));
    out
}

/// Path-connectivity of a class list that may cover only part of the relays:
/// every node of class `c` must reach the destination through nodes of
/// classes `0..=c`.
pub fn classes_path_connected(classes: &[NodeSet], m: &NetworkModel) -> bool {
    let mut allowed = NodeSet::EMPTY;
    for c in classes {
        allowed = allowed.union(*c);
        if !c.is_subset(reach_destination_within(m, allowed)) {
            return false;
        }
    }
    true
}

pub fn is_path_connected(r: &RankOrdering, m: &NetworkModel) -> bool {
    classes_path_connected(&r.classes, m)
}

/// Path-connected members of [`adjacency`]; `r` itself must be path-connected.
pub fn path_connected_adjacency(r: &RankOrdering, m: &NetworkModel) -> Result<Vec<RankOrdering>, RankingError> {
    if !is_path_connected(r, m) {
        return Err(RankingError::NotPathConnected);
    }
    let mut out: Vec<_> = one_step_refinements(r)
        .into_iter()
        .filter(|x| is_path_connected(x, m))
        .collect();
    // merging never breaks path-connectivity
    out.extend(one_step_confinements(r));
    Ok(out)
}

/// `Q_C = Σ_{k ∈ C} Q_k`; `q[k - 1]` holds relay `k`'s backlog.
#[inline]
pub fn class_backlog<T: Scalar>(q: &[T], set: NodeSet) -> T {
    set.iter().fold(T::zero(), |acc, k| acc + q[k - 1].clone())
}

/// `Λ_f(Q, R, n) = Σ_{i=1}^{n} f(|C^{i-1}|, |C_i|) Q_{C_i}`.
pub fn penalty<T: Scalar>(q: &[T], r: &RankOrdering, n: usize, f: &WeightTable<T>) -> Result<T, RankingError> {
    if n == 0 || n > r.classes.len() {
        return Err(RankingError::BadPrefixLength { n, m: r.classes.len() });
    }
    Ok(penalty_unchecked(q, &r.classes, n, f))
}

#[inline]
pub(crate) fn penalty_unchecked<T: Scalar>(q: &[T], classes: &[NodeSet], n: usize, f: &WeightTable<T>) -> T {
    let mut below = 0;
    let mut acc = T::zero();
    for c in &classes[..n] {
        let size = c.len();
        acc = acc + f.get(below, size).clone() * class_backlog(q, *c);
        below += size;
    }
    acc
}

/// Outcome of comparing two orderings at a backlog vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PenaltyComparison {
    /// `R <_Q R'`.
    pub less: bool,
    /// The two penalties were equal within tolerance.
    pub tie: bool,
}

/// Compares `Λ_f` of both orderings at their mismatch index; an equal
/// penalty is decided in favour of `r` only when `r` is a one-step
/// refinement of `r2`.
pub fn compare_penalties<T: Scalar>(
    r: &RankOrdering,
    r2: &RankOrdering,
    q: &[T],
    f: &WeightTable<T>,
) -> Result<PenaltyComparison, RankingError> {
    let n = mismatch(r, r2)?;
    Ok(compare_at(&r.classes, &r2.classes, n, q, f, || is_one_step_refinement(r, r2)))
}

#[inline]
pub(crate) fn compare_at<T: Scalar>(
    a: &[NodeSet],
    b: &[NodeSet],
    n: usize,
    q: &[T],
    f: &WeightTable<T>,
    a_refines_b: impl FnOnce() -> bool,
) -> PenaltyComparison {
    let pa = penalty_unchecked(q, a, n, f);
    let pb = penalty_unchecked(q, b, n, f);
    if T::nearly_eq(&pa, &pb, T::TIE_TOLERANCE) {
        PenaltyComparison {
            less: a_refines_b(),
            tie: true,
        }
    } else {
        PenaltyComparison {
            less: pa < pb,
            tie: false,
        }
    }
}

/// `R <_Q R'`: "R penalizes Q less than R'".
pub fn less_penalizes<T: Scalar>(
    r: &RankOrdering,
    r2: &RankOrdering,
    q: &[T],
    f: &WeightTable<T>,
) -> Result<bool, RankingError> {
    compare_penalties(r, r2, q, f).map(|c| c.less)
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
    fn validation() {
        assert!(validate_rank_ordering(&ro(&[&[1], &[2]]), 2).is_ok());
        assert!(matches!(
            RankOrdering::from_lists(&[vec![1], vec![1, 2]]),
            Err(RankingError::NotAPartition(_))
        ));
        assert!(matches!(
            validate_rank_ordering(&ro(&[&[1, 2]]), 3),
            Err(RankingError::NotAPartition(_))
        ));
        assert!(matches!(
            RankOrdering::from_lists(&[vec![1], vec![]]),
            Err(RankingError::EmptyClass)
        ));
    }

    #[test]
    fn mismatch_examples() {
        assert_eq!(mismatch(&ro(&[&[1], &[2], &[3]]), &ro(&[&[1], &[2, 3]])).unwrap(), 2);
        assert_eq!(mismatch(&ro(&[&[1, 2], &[3]]), &ro(&[&[1], &[2], &[3]])).unwrap(), 1);
        assert_eq!(
            mismatch(&ro(&[&[2], &[1], &[3]]), &ro(&[&[2], &[1], &[3]])),
            Err(RankingError::IdenticalOrderings)
        );
    }

    #[test]
    fn refinement_examples() {
        let coarse = ro(&[&[1], &[2, 3]]);
        assert!(is_refinement(&ro(&[&[1], &[2], &[3]]), &coarse));
        assert!(!is_refinement(&ro(&[&[2], &[1], &[3]]), &coarse));
        assert!(is_refinement(&coarse, &coarse));
        assert!(is_one_step_refinement(&ro(&[&[1], &[2], &[3]]), &coarse));
        assert!(!is_one_step_refinement(&coarse, &coarse));
        assert!(!is_one_step_refinement(&ro(&[&[1], &[3], &[2]]), &ro(&[&[1, 2], &[3]])));
    }

    #[test]
    fn refinements_and_confinements() {
        let r = ro(&[&[1, 2]]);
        assert_eq!(one_step_refinements(&r), vec![ro(&[&[1], &[2]]), ro(&[&[2], &[1]])]);
        assert!(one_step_refinements(&ro(&[&[1], &[2]])).is_empty());
        assert_eq!(one_step_refinements(&ro(&[&[1, 2, 3]])).len(), 6);

        assert_eq!(one_step_confinements(&ro(&[&[1], &[2]])), vec![ro(&[&[1, 2]])]);
        assert!(one_step_confinements(&ro(&[&[1, 2, 3]])).is_empty());
        assert_eq!(
            one_step_confinements(&ro(&[&[1], &[2], &[3]])),
            vec![ro(&[&[1, 2], &[3]]), ro(&[&[1], &[2, 3]])]
        );
    }

    #[test]
    fn adjacency_examples() {
        assert_eq!(adjacency(&ro(&[&[1, 2]])), vec![ro(&[&[1], &[2]]), ro(&[&[2], &[1]])]);
        assert_eq!(adjacency(&ro(&[&[1], &[2]])), vec![ro(&[&[1, 2]])]);
        assert_eq!(adjacency(&ro(&[&[1], &[2], &[3]])).len(), 2);
    }

    #[test]
    fn path_connectivity_on_example_network() {
        let m = topologies::four_node_example();
        assert!(!is_path_connected(&ro(&[&[2], &[1], &[3]]), &m));
        assert!(!is_path_connected(&ro(&[&[2], &[3], &[1]]), &m));
        assert!(!is_path_connected(&ro(&[&[2], &[1, 3]]), &m));
        assert!(is_path_connected(&ro(&[&[1, 2, 3]]), &m));
        assert!(is_path_connected(&ro(&[&[1], &[2], &[3]]), &m));

        let adj = path_connected_adjacency(&ro(&[&[1, 2, 3]]), &m).unwrap();
        assert!(!adj.contains(&ro(&[&[2], &[1, 3]])));
        assert!(adj.contains(&ro(&[&[1, 3], &[2]])));
    }

    #[test]
    fn path_connected_adjacency_on_chain() {
        let m = topologies::chain(2, 0.5);
        let adj = path_connected_adjacency(&ro(&[&[1, 2]]), &m).unwrap();
        assert_eq!(adj, vec![ro(&[&[1], &[2]])]);
        assert_eq!(
            path_connected_adjacency(&ro(&[&[2], &[1]]), &m),
            Err(RankingError::NotPathConnected)
        );
    }

    #[test]
    fn penalty_examples() {
        let f = k3(2);
        let q = [1.0, 3.0];
        assert!((penalty(&q, &ro(&[&[1], &[2]]), 2, &f).unwrap() - 1.0).abs() < 1e-15);
        assert!((penalty(&q, &ro(&[&[1, 2]]), 1, &f).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(penalty(&[0.0, 0.0], &ro(&[&[2], &[1]]), 2, &f).unwrap(), 0.0);
        assert!(matches!(
            penalty(&q, &ro(&[&[1, 2]]), 2, &f),
            Err(RankingError::BadPrefixLength { n: 2, m: 1 })
        ));
    }

    #[test]
    fn less_penalizes_examples() {
        let f = k3(2);
        let split = ro(&[&[1], &[2]]);
        let whole = ro(&[&[1, 2]]);
        let c = compare_penalties(&split, &whole, &[1.0, 3.0], &f).unwrap();
        assert!(c.less && c.tie);
        assert!(less_penalizes(&whole, &split, &[1.0, 1.0], &f).unwrap());
        assert!(!less_penalizes(&split, &whole, &[1.0, 1.0], &f).unwrap());
        assert_eq!(
            less_penalizes(&split, &split, &[1.0, 1.0], &f),
            Err(RankingError::IdenticalOrderings)
        );
    }

    #[test]
    fn exact_tie_is_decided_by_refinement() {
        let f = WeightTable::geometric(ratio(3, 1), 2).unwrap();
        let q = [ratio(1, 1), ratio(3, 1)];
        let split = ro(&[&[1], &[2]]);
        let whole = ro(&[&[1, 2]]);
        let a = compare_penalties(&split, &whole, &q, &f).unwrap();
        let b = compare_penalties(&whole, &split, &q, &f).unwrap();
        assert!(a.tie && a.less);
        assert!(b.tie && !b.less);
    }

    #[test]
    fn json_round_trip() {
        let r = ro(&[&[2], &[1, 3]]);
        assert_eq!(r.to_json(), "[[2],[1,3]]");
        assert_eq!(RankOrdering::from_json("[[2],[1,3]]").unwrap(), r);
        assert!(RankOrdering::from_json("[[2],[2,3]]").is_err());
    }
}
