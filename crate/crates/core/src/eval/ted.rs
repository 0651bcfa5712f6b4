//! Ordered tree edit distance with unit costs (insert, delete, relabel),
//! computed by the classic keyroot/forest-distance dynamic program.
//!
//! Node labels are the `(edge key, value)` pairs of canonical JSON trees;
//! relabeling costs 1 whenever the pairs differ. The distance is symmetric
//! and zero exactly on equal trees.

use crate::eval::tree::{EdgeKey, JsonNode, JsonTree, NodeValue};

/// Postorder-flattened tree: `labels[i]` is node `i+1` in 1-based postorder,
/// `lml[i]` the postorder number of its leftmost leaf descendant.
struct PostOrder<'a> {
    labels: Vec<(&'a EdgeKey, &'a NodeValue)>,
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> PostOrder<'a> {
    fn build(tree: &'a JsonTree) -> Self {
        let mut labels = Vec::new();
        let mut lml = Vec::new();
        fn walk<'a>(
            node: &'a JsonNode,
            labels: &mut Vec<(&'a EdgeKey, &'a NodeValue)>,
            lml: &mut Vec<usize>,
        ) -> usize {
            let mut leftmost = 0;
            for (i, child) in node.children.iter().enumerate() {
                let child_leftmost = walk(child, labels, lml);
                if i == 0 {
                    leftmost = child_leftmost;
                }
            }
            labels.push((&node.key, &node.value));
            let own = labels.len(); // 1-based postorder number
            if node.children.is_empty() {
                leftmost = own;
            }
            lml.push(leftmost);
            leftmost
        }
        walk(&tree.root, &mut labels, &mut lml);

        // Keyroots: nodes with no properly-larger node sharing their
        // leftmost leaf (roots of distinct left paths), ascending.
        let n = labels.len();
        let mut keyroots = Vec::new();
        for i in 1..=n {
            if !(i + 1..=n).any(|j| lml[j - 1] == lml[i - 1]) {
                keyroots.push(i);
            }
        }
        Self {
            labels,
            lml,
            keyroots,
        }
    }

    fn n(&self) -> usize {
        self.labels.len()
    }
}

fn relabel_cost(a: (&EdgeKey, &NodeValue), b: (&EdgeKey, &NodeValue)) -> usize {
    usize::from(a != b)
}

/// Minimum number of unit-cost node insertions, deletions, and relabels
/// turning `a` into `b`, preserving order and ancestry.
pub fn tree_edit_distance(a: &JsonTree, b: &JsonTree) -> usize {
    let ta = PostOrder::build(a);
    let tb = PostOrder::build(b);
    let (n1, n2) = (ta.n(), tb.n());

    // treedist[i][j]: distance between subtrees rooted at postorder i+1 / j+1.
    let mut treedist = vec![vec![0usize; n2]; n1];

    for &kr1 in &ta.keyroots {
        for &kr2 in &tb.keyroots {
            // Forest-distance table over the left-path forests of the two
            // keyroots; index 0 is the empty forest.
            let off1 = ta.lml[kr1 - 1]; // first postorder number in forest 1
            let off2 = tb.lml[kr2 - 1];
            let m = kr1 - off1 + 2;
            let n = kr2 - off2 + 2;
            let mut fd = vec![vec![0usize; n]; m];
            for i in 1..m {
                fd[i][0] = fd[i - 1][0] + 1;
            }
            for j in 1..n {
                fd[0][j] = fd[0][j - 1] + 1;
            }
            for i in 1..m {
                let node1 = off1 + i - 1;
                for j in 1..n {
                    let node2 = off2 + j - 1;
                    let del = fd[i - 1][j] + 1;
                    let ins = fd[i][j - 1] + 1;
                    if ta.lml[node1 - 1] == off1 && tb.lml[node2 - 1] == off2 {
                        // Both prefixes are whole subtrees: the match case
                        // is a relabel, and this entry is their tree
                        // distance.
                        let sub = fd[i - 1][j - 1]
                            + relabel_cost(ta.labels[node1 - 1], tb.labels[node2 - 1]);
                        fd[i][j] = del.min(ins).min(sub);
                        treedist[node1 - 1][node2 - 1] = fd[i][j];
                    } else {
                        let sub = fd[ta.lml[node1 - 1] - off1][tb.lml[node2 - 1] - off2]
                            + treedist[node1 - 1][node2 - 1];
                        fd[i][j] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    treedist[n1 - 1][n2 - 1]
}
