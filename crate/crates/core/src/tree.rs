//! Partition trees: rooted trees whose leaves are the singletons `{0}, .., {J-1}`
//! and whose sibling subsets partition their parent.
//!
//! Leaf indices are 0-based here. Nodes are stored in preorder, so the root is
//! always [`NodeId::ROOT`] and child order is kept exactly as given.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result, TreeViolation, ViolationKind};

/// Index into a tree's node table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

/// Unvalidated node record: the leaf subset and child indices into the table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawNode {
    pub subset: Vec<usize>,
    pub children: Vec<usize>,
}

/// Nested description of a tree, the usual way to build one by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Node(Vec<Shape>),
}

impl Shape {
    pub fn leaf(j: usize) -> Shape {
        Shape::Leaf(j)
    }

    pub fn node(children: impl IntoIterator<Item = Shape>) -> Shape {
        Shape::Node(children.into_iter().collect())
    }

    /// Sorted leaves below this shape.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out.sort_unstable();
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Shape::Leaf(j) => out.push(*j),
            Shape::Node(ch) => ch.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    fn push_raw(&self, table: &mut Vec<RawNode>) -> usize {
        let idx = table.len();
        table.push(RawNode { subset: self.leaves(), children: Vec::new() });
        if let Shape::Node(ch) = self {
            let kids: Vec<usize> = ch.iter().map(|c| c.push_raw(table)).collect();
            table[idx].children = kids;
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    subset: Vec<usize>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    depth: usize,
}

/// A validated partition tree. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTree {
    leaf_count: usize,
    nodes: Vec<Node>,
    leaf_nodes: Vec<NodeId>,
    internal: Vec<NodeId>,
    internal_pos: Vec<Option<usize>>,
}

/// Validate a raw node table rooted at `root` over `leaf_count` leaves.
///
/// Every violation found is reported, each naming the raw node index.
pub fn validate_partition_tree(leaf_count: usize, root: usize, raw: &[RawNode]) -> Result<PartitionTree> {
    if leaf_count < 2 {
        return Err(Error::usage("a partition tree needs at least two leaves"));
    }
    if root >= raw.len() {
        return Err(Error::usage(format!("root index {root} outside a table of {} nodes", raw.len())));
    }
    let mut violations = Vec::new();
    let mut sets: Vec<BTreeSet<usize>> = Vec::with_capacity(raw.len());
    for (i, node) in raw.iter().enumerate() {
        let mut set = BTreeSet::new();
        for &j in &node.subset {
            if j >= leaf_count {
                violations.push(TreeViolation { node: i, kind: ViolationKind::OutOfRange { leaf: j } });
            } else {
                set.insert(j);
            }
        }
        sets.push(set);
    }

    // Preorder walk; each node may be reached once.
    let mut seen = vec![false; raw.len()];
    let mut order: Vec<(usize, Option<usize>)> = Vec::new();
    let mut stack = vec![(root, None)];
    while let Some((i, parent)) = stack.pop() {
        if seen[i] {
            violations.push(TreeViolation { node: i, kind: ViolationKind::MultipleParents });
            continue;
        }
        seen[i] = true;
        order.push((i, parent));
        for &c in raw[i].children.iter().rev() {
            if c >= raw.len() {
                violations.push(TreeViolation { node: i, kind: ViolationKind::DanglingChild { child: c } });
            } else {
                stack.push((c, Some(i)));
            }
        }
    }
    for (i, s) in seen.iter().enumerate() {
        if !s {
            violations.push(TreeViolation { node: i, kind: ViolationKind::Unreachable });
        }
    }

    if sets[root].len() != leaf_count {
        violations.push(TreeViolation { node: root, kind: ViolationKind::BadRoot });
    }
    let mut leaf_seen = vec![false; leaf_count];
    for &(i, _) in &order {
        let kids: Vec<usize> = raw[i].children.iter().copied().filter(|&c| c < raw.len()).collect();
        if raw[i].children.is_empty() {
            if sets[i].len() == 1 {
                leaf_seen[*sets[i].iter().next().unwrap()] = true;
            } else {
                violations.push(TreeViolation { node: i, kind: ViolationKind::NonSingletonLeaf });
            }
            continue;
        }
        if raw[i].children.len() < 2 {
            violations.push(TreeViolation { node: i, kind: ViolationKind::TrivialPartition });
        }
        let mut covered = BTreeSet::new();
        for &c in &kids {
            for &j in &sets[c] {
                if !covered.insert(j) {
                    violations.push(TreeViolation { node: i, kind: ViolationKind::Overlap { leaf: j } });
                }
                if !sets[i].contains(&j) {
                    violations.push(TreeViolation { node: i, kind: ViolationKind::Foreign { leaf: j } });
                }
            }
        }
        for &j in sets[i].difference(&covered) {
            violations.push(TreeViolation { node: i, kind: ViolationKind::Uncovered { leaf: j } });
        }
    }
    for (j, s) in leaf_seen.iter().enumerate() {
        if !s {
            violations.push(TreeViolation { node: root, kind: ViolationKind::MissingLeaf { leaf: j } });
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidTree(violations));
    }

    let mut new_id = vec![usize::MAX; raw.len()];
    for (pos, &(i, _)) in order.iter().enumerate() {
        new_id[i] = pos;
    }
    let mut nodes: Vec<Node> = Vec::with_capacity(order.len());
    for &(i, parent) in &order {
        let parent = parent.map(|p| NodeId(new_id[p]));
        let depth = parent.map_or(0, |p| nodes[p.0].depth + 1);
        nodes.push(Node {
            subset: sets[i].iter().copied().collect(),
            parent,
            children: raw[i].children.iter().map(|&c| NodeId(new_id[c])).collect(),
            depth,
        });
    }
    Ok(PartitionTree::from_nodes(leaf_count, nodes))
}

impl PartitionTree {
    fn from_nodes(leaf_count: usize, nodes: Vec<Node>) -> Self {
        let mut leaf_nodes = vec![NodeId::ROOT; leaf_count];
        let mut internal = Vec::new();
        let mut internal_pos = vec![None; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if n.children.is_empty() {
                leaf_nodes[n.subset[0]] = NodeId(i);
            } else {
                internal_pos[i] = Some(internal.len());
                internal.push(NodeId(i));
            }
        }
        PartitionTree { leaf_count, nodes, leaf_nodes, internal, internal_pos }
    }

    /// Build from a nested shape over `leaf_count` leaves.
    pub fn from_shape(leaf_count: usize, shape: &Shape) -> Result<Self> {
        let mut table = Vec::new();
        shape.push_raw(&mut table);
        validate_partition_tree(leaf_count, 0, &table)
    }

    /// Root with every leaf as a direct child.
    pub fn flat(leaf_count: usize) -> Result<Self> {
        Self::from_shape(leaf_count, &Shape::node((0..leaf_count).map(Shape::leaf)))
    }

    /// Binary cascade over `order`: the root splits off `order[0]`, its other
    /// child splits off `order[1]`, and so on.
    pub fn cascade(order: &[usize]) -> Result<Self> {
        let n = order.len();
        if n < 2 {
            return Err(Error::usage("a cascade needs at least two leaves"));
        }
        let mut shape = Shape::node([Shape::leaf(order[n - 2]), Shape::leaf(order[n - 1])]);
        for &j in order[..n - 2].iter().rev() {
            shape = Shape::node([Shape::leaf(j), shape]);
        }
        Self::from_shape(n, &shape)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    /// All node ids in preorder.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Internal nodes in preorder. Model splits are aligned with this list.
    pub fn internal_nodes(&self) -> &[NodeId] {
        &self.internal
    }

    /// Position of `node` in [`Self::internal_nodes`], `None` for leaves.
    pub fn internal_index(&self, node: NodeId) -> Option<usize> {
        self.internal_pos.get(node.0).copied().flatten()
    }

    /// Node holding the singleton `{j}`.
    pub fn leaf(&self, j: usize) -> NodeId {
        self.leaf_nodes[j]
    }

    /// Leaf index if `node` is a leaf.
    pub fn leaf_index(&self, node: NodeId) -> Option<usize> {
        let n = &self.nodes[node.0];
        n.children.is_empty().then(|| n.subset[0])
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.nodes[node.0].children.is_empty()
    }

    pub fn subset(&self, node: NodeId) -> &[usize] {
        &self.nodes[node.0].subset
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.nodes[node.0].children
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.nodes[node.0].parent
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.nodes[node.0].depth
    }

    /// Position of `node` among its parent's children.
    pub fn child_position(&self, node: NodeId) -> Option<usize> {
        let p = self.parent(node)?;
        self.children(p).iter().position(|&c| c == node)
    }

    /// Node whose subset is exactly `subset` (sorted), if any.
    pub fn find(&self, subset: &[usize]) -> Option<NodeId> {
        self.node_ids().find(|&id| self.subset(id) == subset)
    }

    pub fn contains(&self, ancestor: NodeId, node: NodeId) -> bool {
        let mut cur = Some(node);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.parent(c);
        }
        false
    }

    /// Path `(node, parent, .., ancestor)`. A node is its own length-0 path.
    pub fn path_to(&self, node: NodeId, ancestor: NodeId) -> Result<Vec<NodeId>> {
        self.check(node)?;
        self.check(ancestor)?;
        let mut path = vec![node];
        let mut cur = node;
        while cur != ancestor {
            cur = self.parent(cur).ok_or_else(|| {
                Error::Relationship(format!("node {} is not an ancestor of node {}", ancestor.0, node.0))
            })?;
            path.push(cur);
        }
        Ok(path)
    }

    pub fn path_to_root(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path
    }

    /// Subtree rooted at the internal `node`, leaves renumbered in increasing
    /// order. The returned map sends new leaf indices to old ones.
    pub fn prune_at(&self, node: NodeId) -> Result<(PartitionTree, Vec<usize>)> {
        self.check(node)?;
        if self.is_leaf(node) {
            return Err(Error::usage("cannot prune at a leaf"));
        }
        let leaf_map: Vec<usize> = self.subset(node).to_vec();
        let mut old_to_new = vec![usize::MAX; self.leaf_count];
        for (new, &old) in leaf_map.iter().enumerate() {
            old_to_new[old] = new;
        }
        let shape = self.shape_at(node, &|j| old_to_new[j]);
        let tree = PartitionTree::from_shape(leaf_map.len(), &shape)?;
        Ok((tree, leaf_map))
    }

    /// Deepest node containing both `a` and `b`, plus its children holding each.
    /// Works for any two nodes with disjoint subsets.
    pub fn common_ancestor(&self, a: NodeId, b: NodeId) -> Result<(NodeId, NodeId, NodeId)> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(Error::usage("common ancestor needs two distinct nodes"));
        }
        if self.contains(a, b) || self.contains(b, a) {
            return Err(Error::Relationship("nodes are nested, not disjoint".into()));
        }
        let pa = self.path_to_root(a);
        let pb = self.path_to_root(b);
        // Walk down from the root while the paths agree.
        let (mut ia, mut ib) = (pa.len() - 1, pb.len() - 1);
        while pa[ia - 1] == pb[ib - 1] {
            ia -= 1;
            ib -= 1;
        }
        Ok((pa[ia], pa[ia - 1], pb[ib - 1]))
    }

    /// Nested shape of the whole tree.
    pub fn to_shape(&self) -> Shape {
        self.shape_at(NodeId::ROOT, &|j| j)
    }

    fn shape_at(&self, node: NodeId, map: &dyn Fn(usize) -> usize) -> Shape {
        match self.leaf_index(node) {
            Some(j) => Shape::Leaf(map(j)),
            None => Shape::Node(self.children(node).iter().map(|&c| self.shape_at(c, map)).collect()),
        }
    }

    fn check(&self, node: NodeId) -> Result<()> {
        if node.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::usage(format!("node id {} outside a tree of {} nodes", node.0, self.nodes.len())))
        }
    }
}

/// The 10-leaf tree used throughout the worked example, 0-based:
/// `{0,1}`, `{2}`, `{3..9}` under the root; `{3,4}`, `{5,6}`, `{7,8,9}` under
/// `{3..9}`; `{7}`, `{8,9}` under `{7,8,9}`.
pub fn example_shape() -> Shape {
    use Shape as S;
    S::node([
        S::node([S::leaf(0), S::leaf(1)]),
        S::leaf(2),
        S::node([
            S::node([S::leaf(3), S::leaf(4)]),
            S::node([S::leaf(5), S::leaf(6)]),
            S::node([S::leaf(7), S::node([S::leaf(8), S::leaf(9)])]),
        ]),
    ])
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> PartitionTree {
        PartitionTree::from_shape(10, &example_shape()).unwrap()
    }

    fn ids(t: &PartitionTree, sets: &[&[usize]]) -> Vec<NodeId> {
        sets.iter().map(|s| t.find(s).unwrap()).collect()
    }

    #[test]
    fn flat_tree_is_valid() {
        let t = PartitionTree::flat(3).unwrap();
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.internal_nodes(), &[NodeId::ROOT]);
    }

    #[test]
    fn example_tree_has_seven_internal_nodes() {
        let t = example();
        assert_eq!(t.internal_nodes().len(), 7);
        assert_eq!(t.node_count(), 17);
        assert_eq!(t.subset(t.root()), &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn trivial_partition_rejected() {
        let raw = [
            RawNode { subset: vec![0, 1], children: vec![1] },
            RawNode { subset: vec![0, 1], children: vec![2, 3] },
            RawNode { subset: vec![0], children: vec![] },
            RawNode { subset: vec![1], children: vec![] },
        ];
        match validate_partition_tree(2, 0, &raw).unwrap_err() {
            Error::InvalidTree(v) => {
                assert!(v.contains(&TreeViolation { node: 0, kind: ViolationKind::TrivialPartition }))
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn violations_are_reported() {
        let raw = [
            RawNode { subset: vec![0, 1, 2], children: vec![1, 2] },
            RawNode { subset: vec![0, 1], children: vec![] },
            RawNode { subset: vec![1], children: vec![] },
            RawNode { subset: vec![2], children: vec![] },
        ];
        let Error::InvalidTree(v) = validate_partition_tree(3, 0, &raw).unwrap_err() else { panic!() };
        let kinds: Vec<_> = v.iter().map(|x| x.kind.clone()).collect();
        assert!(kinds.contains(&ViolationKind::NonSingletonLeaf));
        assert!(kinds.contains(&ViolationKind::Overlap { leaf: 1 }));
        assert!(kinds.contains(&ViolationKind::Uncovered { leaf: 2 }));
        assert!(kinds.contains(&ViolationKind::MissingLeaf { leaf: 0 }));
        assert!(kinds.contains(&ViolationKind::Unreachable));

        let raw = [
            RawNode { subset: vec![0, 1], children: vec![1, 2] },
            RawNode { subset: vec![0], children: vec![] },
            RawNode { subset: vec![1], children: vec![] },
        ];
        let Error::InvalidTree(v) = validate_partition_tree(3, 0, &raw).unwrap_err() else { panic!() };
        assert!(v.iter().any(|x| x.kind == ViolationKind::BadRoot));
    }

    #[test]
    fn path_from_leaf_to_ancestor() {
        let t = example();
        let path = t.path_to(t.leaf(8), t.find(&[3, 4, 5, 6, 7, 8, 9]).unwrap()).unwrap();
        assert_eq!(path, ids(&t, &[&[8], &[8, 9], &[7, 8, 9], &[3, 4, 5, 6, 7, 8, 9]]));
        assert_eq!(t.path_to(t.root(), t.root()).unwrap(), vec![t.root()]);
        let err = t.path_to(t.leaf(0), t.find(&[3, 4]).unwrap()).unwrap_err();
        assert_eq!(err.category(), "relationship");
        for j in 0..10 {
            let leaf = t.leaf(j);
            assert_eq!(t.path_to(leaf, t.root()).unwrap().len() - 1, t.depth(leaf));
        }
    }

    #[test]
    fn pruning() {
        let t = example();
        let (p, map) = t.prune_at(t.find(&[3, 4, 5, 6, 7, 8, 9]).unwrap()).unwrap();
        assert_eq!(p.leaf_count(), 7);
        assert_eq!(map, vec![3, 4, 5, 6, 7, 8, 9]);
        let internal: Vec<Vec<usize>> =
            p.internal_nodes().iter().map(|&n| p.subset(n).iter().map(|&j| map[j]).collect()).collect();
        assert_eq!(internal, vec![vec![3, 4, 5, 6, 7, 8, 9], vec![3, 4], vec![5, 6], vec![7, 8, 9], vec![8, 9]]);

        let (same, map) = t.prune_at(t.root()).unwrap();
        assert_eq!(same, t);
        assert_eq!(map, (0..10).collect::<Vec<_>>());

        let (two, map) = t.prune_at(t.find(&[8, 9]).unwrap()).unwrap();
        assert_eq!(two, PartitionTree::flat(2).unwrap());
        assert_eq!(map, vec![8, 9]);

        assert_eq!(t.prune_at(t.leaf(0)).unwrap_err().category(), "usage");
    }

    #[test]
    fn common_ancestors() {
        let t = example();
        let (s, ci, cj) = t.common_ancestor(t.leaf(5), t.leaf(8)).unwrap();
        assert_eq!(vec![s, ci, cj], ids(&t, &[&[3, 4, 5, 6, 7, 8, 9], &[5, 6], &[7, 8, 9]]));
        let (s, ci, cj) = t.common_ancestor(t.leaf(0), t.leaf(1)).unwrap();
        assert_eq!((s, ci, cj), (t.find(&[0, 1]).unwrap(), t.leaf(0), t.leaf(1)));
        let (s, _, _) = t.common_ancestor(t.leaf(0), t.leaf(2)).unwrap();
        assert_eq!(s, t.root());
    }

    #[test]
    fn cascade_shape() {
        let t = PartitionTree::cascade(&[2, 0, 1]).unwrap();
        assert_eq!(t.to_shape(), Shape::node([Shape::leaf(2), Shape::node([Shape::leaf(0), Shape::leaf(1)])]));
        let t = PartitionTree::cascade(&(0..17).collect::<Vec<_>>()).unwrap();
        assert_eq!(t.internal_nodes().len(), 16);
    }

    pub(crate) fn arb_shape(leaves: Vec<usize>) -> BoxedStrategy<Shape> {
        if leaves.len() == 1 {
            return Just(Shape::Leaf(leaves[0])).boxed();
        }
        let n = leaves.len();
        // Random cut points give a partition into 2..=n contiguous groups.
        proptest::collection::vec(any::<bool>(), n - 1)
            .prop_flat_map(move |cuts| {
                let mut groups: Vec<Vec<usize>> = vec![vec![leaves[0]]];
                for (i, &cut) in cuts.iter().enumerate() {
                    if cut {
                        groups.push(Vec::new());
                    }
                    groups.last_mut().unwrap().push(leaves[i + 1]);
                }
                if groups.len() == 1 {
                    groups = leaves.iter().map(|&j| vec![j]).collect();
                }
                groups.into_iter().map(arb_shape).collect::<Vec<_>>().prop_map(Shape::Node)
            })
            .boxed()
    }

    pub(crate) fn arb_tree(max_leaves: usize) -> impl Strategy<Value = PartitionTree> {
        (2..=max_leaves)
            .prop_flat_map(|j| Just((0..j).collect::<Vec<_>>()).prop_shuffle())
            .prop_flat_map(|order| {
                let j = order.len();
                arb_shape(order).prop_map(move |s| PartitionTree::from_shape(j, &s).unwrap())
            })
    }

    proptest! {
        #[test]
        fn structural_invariants(t in arb_tree(9)) {
            let j = t.leaf_count();
            prop_assert!(t.node_count() > j && t.node_count() < 2 * j);
            for &a in t.internal_nodes() {
                let mut union: Vec<usize> = t.children(a).iter().flat_map(|&c| t.subset(c).to_vec()).collect();
                let len = union.len();
                union.sort_unstable();
                union.dedup();
                prop_assert_eq!(len, union.len());
                prop_assert_eq!(&union[..], t.subset(a));
            }
            for &a in t.internal_nodes() {
                let (p, _) = t.prune_at(a).unwrap();
                prop_assert_eq!(p.leaf_count(), t.subset(a).len());
            }
            for x in 0..j {
                for y in 0..j {
                    if x != y {
                        let (s, ci, cj) = t.common_ancestor(t.leaf(x), t.leaf(y)).unwrap();
                        let (s2, cj2, ci2) = t.common_ancestor(t.leaf(y), t.leaf(x)).unwrap();
                        prop_assert_eq!((s, ci, cj), (s2, ci2, cj2));
                        prop_assert!(ci != cj);
                        prop_assert_eq!(t.parent(ci), Some(s));
                    }
                }
            }
            prop_assert_eq!(PartitionTree::from_shape(j, &t.to_shape()).unwrap(), t);
        }
    }
}
