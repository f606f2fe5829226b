//! Binary decision trees stored in a slot arena.

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        parent: usize,
        depth: usize,
    },
    Split {
        parent: usize,
        depth: usize,
        feature: usize,
        cut: f64,
        left: usize,
        right: usize,
    },
    Vacant,
}

impl Node {
    pub fn depth(&self) -> usize {
        match *self {
            Node::Leaf { depth, .. } | Node::Split { depth, .. } => depth,
            Node::Vacant => 0,
        }
    }

    pub fn parent(&self) -> Option<usize> {
        match *self {
            Node::Leaf { parent, .. } | Node::Split { parent, .. } if parent != NO_PARENT => Some(parent),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    pub fn is_split(&self) -> bool {
        matches!(self, Node::Split { .. })
    }
}

/// A decision tree with `k`-dimensional leaf values. Observations go left
/// iff `x[feature] <= cut`. Node 0 is the root; slots freed by pruning are
/// reused.
#[derive(Debug, Clone)]
pub struct Tree {
    k: usize,
    nodes: Vec<Node>,
    values: Vec<f64>,
    free: Vec<usize>,
}

impl Tree {
    /// Single-leaf tree returning zero.
    pub fn stump(k: usize) -> Self {
        Tree {
            k,
            nodes: vec![Node::Leaf { parent: NO_PARENT, depth: 0 }],
            values: vec![0.0; k],
            free: Vec::new(),
        }
    }

    pub fn leaf_dim(&self) -> usize {
        self.k
    }

    /// Number of arena slots, including vacant ones. Node ids are below this.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    #[inline]
    pub fn route(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, cut, left, right, .. } => {
                    i = if x[feature] <= cut { left } else { right };
                }
                _ => return i,
            }
        }
    }

    #[inline]
    pub fn leaf_value(&self, id: usize) -> &[f64] {
        &self.values[id * self.k..(id + 1) * self.k]
    }

    pub fn leaf_value_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.values[id * self.k..(id + 1) * self.k]
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        self.leaf_value(self.route(x))
    }

    pub fn is_stump(&self) -> bool {
        self.nodes[0].is_leaf()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    pub fn splits(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_split()).collect()
    }

    /// Split nodes whose children are both leaves.
    pub fn prunable(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| match self.nodes[i] {
                Node::Split { left, right, .. } => self.nodes[left].is_leaf() && self.nodes[right].is_leaf(),
                _ => false,
            })
            .collect()
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.depth()).max().unwrap_or(0)
    }

    fn alloc(&mut self, node: Node) -> usize {
        if let Some(id) = self.free.pop() {
            self.nodes[id] = node;
            id
        } else {
            self.nodes.push(node);
            self.values.extend(std::iter::repeat_n(0.0, self.k));
            self.nodes.len() - 1
        }
    }

    /// Turns a leaf into a split; both children inherit the leaf value.
    pub fn grow(&mut self, leaf: usize, feature: usize, cut: f64) -> (usize, usize) {
        let (parent, depth) = match self.nodes[leaf] {
            Node::Leaf { parent, depth } => (parent, depth),
            _ => panic!("grow on a non-leaf node"),
        };
        let child = Node::Leaf { parent: leaf, depth: depth + 1 };
        let left = self.alloc(child);
        let right = self.alloc(child);
        let value = self.leaf_value(leaf).to_vec();
        self.leaf_value_mut(left).copy_from_slice(&value);
        self.leaf_value_mut(right).copy_from_slice(&value);
        self.nodes[leaf] = Node::Split { parent, depth, feature, cut, left, right };
        (left, right)
    }

    /// Collapses a split whose children are leaves; the new leaf takes the
    /// left child's value.
    pub fn prune(&mut self, id: usize) {
        let (parent, depth, left, right) = match self.nodes[id] {
            Node::Split { parent, depth, left, right, .. } => (parent, depth, left, right),
            _ => panic!("prune on a non-split node"),
        };
        assert!(self.nodes[left].is_leaf() && self.nodes[right].is_leaf(), "prune needs leaf children");
        let value = self.leaf_value(left).to_vec();
        self.leaf_value_mut(id).copy_from_slice(&value);
        self.nodes[left] = Node::Vacant;
        self.nodes[right] = Node::Vacant;
        self.free.push(right);
        self.free.push(left);
        self.nodes[id] = Node::Leaf { parent, depth };
    }

    pub fn set_rule(&mut self, id: usize, new_feature: usize, new_cut: f64) {
        match &mut self.nodes[id] {
            Node::Split { feature, cut, .. } => {
                *feature = new_feature;
                *cut = new_cut;
            }
            _ => panic!("set_rule on a non-split node"),
        }
    }

    /// Adds one to `counts[j]` for every split on feature j.
    pub fn count_splits(&self, counts: &mut [usize]) {
        for n in &self.nodes {
            if let Node::Split { feature, .. } = *n {
                counts[feature] += 1;
            }
        }
    }

    /// Visits nodes in preorder (node, then left subtree, then right subtree).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Topology and decision rules in preorder, ignoring leaf values and
    /// arena layout.
    pub fn topology_key(&self) -> String {
        let mut s = String::new();
        for i in self.preorder() {
            match self.nodes[i] {
                Node::Split { feature, cut, .. } => s.push_str(&format!("[{feature},{cut}]")),
                _ => s.push('L'),
            }
        }
        s
    }

    /// Rebuilds a tree from a preorder description. `None` marks a leaf with
    /// the given values; `Some((j, c))` a split.
    pub fn from_preorder(k: usize, items: &[(Option<(usize, f64)>, Vec<f64>)]) -> Option<Tree> {
        let mut tree = Tree { k, nodes: Vec::new(), values: Vec::new(), free: Vec::new() };
        let mut pos = 0;
        build(&mut tree, items, &mut pos, NO_PARENT, 0)?;
        if pos != items.len() {
            return None;
        }
        Some(tree)
    }
}

fn build(
    tree: &mut Tree,
    items: &[(Option<(usize, f64)>, Vec<f64>)],
    pos: &mut usize,
    parent: usize,
    depth: usize,
) -> Option<usize> {
    let (rule, value) = items.get(*pos)?;
    *pos += 1;
    let id = tree.alloc(Node::Leaf { parent, depth });
    match rule {
        None => {
            if value.len() != tree.k {
                return None;
            }
            tree.leaf_value_mut(id).copy_from_slice(value);
        }
        Some((feature, cut)) => {
            let left = build(tree, items, pos, id, depth + 1)?;
            let right = build(tree, items, pos, id, depth + 1)?;
            tree.nodes[id] = Node::Split { parent, depth, feature: *feature, cut: *cut, left, right };
        }
    }
    Some(id)
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        if self.k != other.k {
            return false;
        }
        let (a, b) = (self.preorder(), other.preorder());
        a.len() == b.len()
            && a.iter().zip(&b).all(|(&i, &j)| match (self.nodes[i], other.nodes[j]) {
                (Node::Split { feature: f1, cut: c1, .. }, Node::Split { feature: f2, cut: c2, .. }) => {
                    f1 == f2 && c1 == c2
                }
                (Node::Leaf { .. }, Node::Leaf { .. }) => self.leaf_value(i) == other.leaf_value(j),
                _ => false,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The two-split example tree on [0, 1]²: x1 ≤ 0.6 gives λ1, otherwise
    /// split on x2 ≤ 0.4.
    fn example() -> Tree {
        let mut t = Tree::stump(1);
        let (l, r) = t.grow(0, 0, 0.6);
        t.leaf_value_mut(l)[0] = 1.0;
        let (rl, rr) = t.grow(r, 1, 0.4);
        t.leaf_value_mut(rl)[0] = 2.0;
        t.leaf_value_mut(rr)[0] = 3.0;
        t
    }

    #[test]
    fn routing_follows_rules() {
        let t = example();
        assert_eq!(t.predict(&[0.3, 0.9]), &[1.0]);
        assert_eq!(t.predict(&[0.6, 0.0]), &[1.0]);
        assert_eq!(t.predict(&[0.7, 0.4]), &[2.0]);
        assert_eq!(t.predict(&[0.7, 0.41]), &[3.0]);
    }

    #[test]
    fn grow_prune_round_trip() {
        let mut t = example();
        let before = t.clone();
        let (l, _) = t.grow(1, 1, 0.2);
        assert_eq!(t.node(l).depth(), 2);
        assert_eq!(t.num_leaves(), 4);
        t.prune(1);
        assert_eq!(t, before);
        assert_eq!(t.prunable().len(), 1);
        let (a, b) = t.grow(1, 0, 0.1);
        assert!(t.capacity() == 7 && a < 7 && b < 7);
    }

    #[test]
    fn preorder_rebuild() {
        let t = example();
        let items: Vec<_> = t
            .preorder()
            .into_iter()
            .map(|i| match *t.node(i) {
                Node::Split { feature, cut, .. } => (Some((feature, cut)), vec![]),
                _ => (None, t.leaf_value(i).to_vec()),
            })
            .collect();
        let u = Tree::from_preorder(1, &items).unwrap();
        assert_eq!(u, t);
        assert_eq!(u.topology_key(), "[0,0.6]L[1,0.4]LL");
        assert!(Tree::from_preorder(1, &items[..3]).is_none());
    }

    #[test]
    fn split_counts() {
        let mut c = vec![0; 2];
        example().count_splits(&mut c);
        assert_eq!(c, vec![1, 1]);
    }
}
