use std::fmt;

/// Maximum node index representable in a [`NodeSet`].
pub const MAX_NODE: usize = 63;

/// Node label in `{0, ..., N}`; node 0 is the destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const DESTINATION: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_destination(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bitmask over `Ω = {0, ..., N}`; bit `i` set means node `i` is present.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet(pub u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn singleton(node: usize) -> Self {
        debug_assert!(node <= MAX_NODE);
        NodeSet(1 << node)
    }

    /// `{1, ..., n}`.
    pub fn relays(n: usize) -> Self {
        debug_assert!(n <= MAX_NODE);
        NodeSet(((1u64 << n) - 1) << 1)
    }

    pub fn from_nodes<I: IntoIterator<Item = usize>>(nodes: I) -> Self {
        nodes.into_iter().fold(NodeSet::EMPTY, |s, n| s.with(n))
    }

    #[inline]
    pub fn contains(self, node: usize) -> bool {
        node < 64 && self.0 & (1 << node) != 0
    }

    #[inline]
    pub fn with(self, node: usize) -> Self {
        NodeSet(self.0 | (1 << node))
    }

    #[inline]
    pub fn without(self, node: usize) -> Self {
        NodeSet(self.0 & !(1 << node))
    }

    #[inline]
    pub fn union(self, other: NodeSet) -> Self {
        NodeSet(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: NodeSet) -> Self {
        NodeSet(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: NodeSet) -> Self {
        NodeSet(self.0 & !other.0)
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn intersects(self, other: NodeSet) -> bool {
        self.0 & other.0 != 0
    }

    #[inline]
    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Largest node index present, if any.
    pub fn max_node(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(63 - self.0.leading_zeros() as usize)
        }
    }

    /// Nodes in increasing index order.
    pub fn iter(self) -> NodeIter {
        NodeIter(self.0)
    }

    /// All subsets of `self` (including empty and full), in increasing
    /// bitmask order.
    pub fn subsets(self) -> impl Iterator<Item = NodeSet> {
        let full = self.0;
        let mut sub = 0u64;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = NodeSet(sub);
            if sub == full {
                done = true;
            } else {
                sub = (sub.wrapping_sub(full)) & full;
            }
            Some(out)
        })
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        NodeSet::from_nodes(iter)
    }
}

pub struct NodeIter(u64);

impl Iterator for NodeIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let tz = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(tz)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for NodeIter {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relays_excludes_destination() {
        let r = NodeSet::relays(3);
        assert_eq!(r.iter().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(!r.contains(0));
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let s = NodeSet::from_nodes([1, 3, 4]);
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert_eq!(subs[0], NodeSet::EMPTY);
        assert_eq!(*subs.last().unwrap(), s);
        assert!(subs.iter().all(|x| x.is_subset(s)));
    }

    #[test]
    fn max_node() {
        assert_eq!(NodeSet::EMPTY.max_node(), None);
        assert_eq!(NodeSet::from_nodes([0, 5, 2]).max_node(), Some(5));
    }
}
