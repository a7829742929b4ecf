//! Per-EDU discourse salience features.
//!
//! Levels count edges from the root (root = 0) and the tree depth is
//! `D = 1 + deepest leaf level`. For an EDU `e`:
//!
//! * Ono penalty: satellite nodes on the path from the root to `e`'s leaf,
//!   the leaf included and the root excluded.
//! * Highest promotion: the node closest to the root whose promotion set
//!   contains `e`. A node's promotion set is the union of the sets of its
//!   nucleus children; a leaf's set is its own EDU.
//! * Depth score: `D - level(highest promotion)`.
//! * Promotion score: `level(leaf) - level(highest promotion)`.
//!
//! Normalized variants divide each raw value by `D`. Sentence features take
//! the maximum over the sentence's EDUs.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rst::{DiscourseTree, NodeId, Nuclearity};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FeatureValues {
    pub ono: u32,
    pub depth: u32,
    pub promo: u32,
    pub ono_norm: f64,
    pub depth_norm: f64,
    pub promo_norm: f64,
}

impl FeatureValues {
    fn from_raw(ono: u32, depth: u32, promo: u32, tree_depth: u32) -> Self {
        let d = f64::from(tree_depth);
        FeatureValues {
            ono,
            depth,
            promo,
            ono_norm: f64::from(ono) / d,
            depth_norm: f64::from(depth) / d,
            promo_norm: f64::from(promo) / d,
        }
    }

    fn max(self, other: Self) -> Self {
        FeatureValues {
            ono: self.ono.max(other.ono),
            depth: self.depth.max(other.depth),
            promo: self.promo.max(other.promo),
            ono_norm: self.ono_norm.max(other.ono_norm),
            depth_norm: self.depth_norm.max(other.depth_norm),
            promo_norm: self.promo_norm.max(other.promo_norm),
        }
    }

    /// Named values in a fixed order, used by the analysis report.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("ono_penalty", f64::from(self.ono)),
            ("depth_score", f64::from(self.depth)),
            ("promotion_score", f64::from(self.promo)),
            ("ono_norm", self.ono_norm),
            ("depth_norm", self.depth_norm),
            ("promo_norm", self.promo_norm),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EduFeatureTable {
    tree_depth: u32,
    values: Vec<FeatureValues>,
}

impl EduFeatureTable {
    pub fn tree_depth(&self) -> u32 {
        self.tree_depth
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Features of EDU `index` (1-based).
    pub fn get(&self, index: usize) -> Option<&FeatureValues> {
        index.checked_sub(1).and_then(|i| self.values.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &FeatureValues)> {
        self.values.iter().enumerate().map(|(i, v)| (i + 1, v))
    }

    pub fn ono(&self) -> Vec<u32> {
        self.values.iter().map(|v| v.ono).collect()
    }

    pub fn depth(&self) -> Vec<u32> {
        self.values.iter().map(|v| v.depth).collect()
    }

    pub fn promotion(&self) -> Vec<u32> {
        self.values.iter().map(|v| v.promo).collect()
    }
}

/// Salient EDUs of every node, indexed by [`NodeId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromotionSets(Vec<BTreeSet<usize>>);

impl PromotionSets {
    pub fn get(&self, node: NodeId) -> &BTreeSet<usize> {
        &self.0[node]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn compute_promotion_sets(tree: &DiscourseTree) -> PromotionSets {
    let nodes = tree.nodes();
    let mut sets = vec![BTreeSet::new(); nodes.len()];
    // preorder ids: children always have larger ids than their parent
    for id in (0..nodes.len()).rev() {
        let node = &nodes[id];
        if node.is_leaf() {
            sets[id].insert(node.lo);
        } else {
            let mut set = BTreeSet::new();
            for &c in &node.children {
                if nodes[c].nuclearity == Nuclearity::Nucleus {
                    set.extend(sets[c].iter().copied());
                }
            }
            sets[id] = set;
        }
    }
    PromotionSets(sets)
}

/// Computes the feature table by walking up from each leaf.
///
/// An EDU belongs to its parent's promotion set exactly when the node it is
/// currently promoted to is a nucleus child, so the highest promotion is
/// reached by climbing while the current node is a nucleus.
pub fn compute_edu_features(tree: &DiscourseTree) -> EduFeatureTable {
    let nodes = tree.nodes();
    let tree_depth = tree.depth();
    let values = (1..=tree.edu_count())
        .map(|edu| {
            let leaf = tree.leaf(edu);
            let mut top = leaf;
            while nodes[top].nuclearity == Nuclearity::Nucleus {
                match nodes[top].parent {
                    Some(p) => top = p,
                    None => break,
                }
            }
            let mut ono = 0;
            let mut cur = leaf;
            while let Some(p) = nodes[cur].parent {
                if nodes[cur].nuclearity == Nuclearity::Satellite {
                    ono += 1;
                }
                cur = p;
            }
            let depth = tree_depth - nodes[top].level;
            let promo = nodes[leaf].level - nodes[top].level;
            FeatureValues::from_raw(ono, depth, promo, tree_depth)
        })
        .collect();
    EduFeatureTable { tree_depth, values }
}

/// Maximum of every feature over EDUs `lo..=hi`.
pub fn sentence_features(table: &EduFeatureTable, lo: usize, hi: usize) -> Result<FeatureValues> {
    if lo == 0 || lo > hi || hi > table.len() {
        return Err(Error::invalid(format!(
            "EDU range [{lo}, {hi}] is outside [1, {}]",
            table.len()
        )));
    }
    Ok(table.values[lo - 1..hi].iter().copied().reduce(FeatureValues::max).expect("range is non-empty"))
}

/// One line of the `features` dump.
#[derive(Debug, Clone, Serialize)]
pub struct FeatureRecord<'a> {
    pub source_id: &'a str,
    pub edu_index: usize,
    pub ono: u32,
    pub depth: u32,
    pub promo: u32,
    pub ono_norm: f64,
    pub depth_norm: f64,
    pub promo_norm: f64,
    #[serde(rename = "D")]
    pub tree_depth: u32,
}

pub fn feature_records<'a>(tree: &'a DiscourseTree, table: &EduFeatureTable) -> Vec<FeatureRecord<'a>> {
    table
        .iter()
        .map(|(edu_index, v)| FeatureRecord {
            source_id: tree.source_id(),
            edu_index,
            ono: v.ono,
            depth: v.depth,
            promo: v.promo,
            ono_norm: v.ono_norm,
            depth_norm: v.depth_norm,
            promo_norm: v.promo_norm,
            tree_depth: table.tree_depth,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rst::{TreeNode, Nuclearity::*};
    use crate::samples::{four_edu_tree, random_tree};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Oracle: levels and highest promotion found by scanning the root-to-leaf
    /// path top-down against explicit promotion sets.
    fn brute_force(tree: &DiscourseTree) -> Vec<(u32, u32, u32)> {
        let sets = compute_promotion_sets(tree);
        let nodes = tree.nodes();
        let max_leaf_level = nodes.iter().filter(|n| n.is_leaf()).map(|n| n.level).max().unwrap();
        let d = max_leaf_level + 1;
        (1..=tree.edu_count())
            .map(|e| {
                let mut path = vec![tree.leaf(e)];
                while let Some(p) = nodes[*path.last().unwrap()].parent {
                    path.push(p);
                }
                path.reverse();
                let ono = path[1..].iter().filter(|&&n| nodes[n].nuclearity == Satellite).count() as u32;
                let top = *path.iter().find(|&&n| sets.get(n).contains(&e)).unwrap();
                let leaf_level = (path.len() - 1) as u32;
                (ono, d - nodes[top].level, leaf_level - nodes[top].level)
            })
            .collect()
    }

    #[test]
    fn four_edu_promotion_sets() {
        let tree = four_edu_tree();
        let sets = compute_promotion_sets(&tree);
        let set = |lo, hi| sets.get(tree.node_with_span(lo, hi).unwrap()).iter().copied().collect::<Vec<_>>();
        assert_eq!(set(2, 3), vec![2, 3]);
        assert_eq!(set(2, 4), vec![2, 3, 4]);
        assert_eq!(set(1, 4), vec![2, 3, 4]);
        assert_eq!(set(1, 1), vec![1]);
    }

    #[test]
    fn four_edu_golden_vectors() {
        let table = compute_edu_features(&four_edu_tree());
        assert_eq!(table.tree_depth(), 4);
        assert_eq!(table.ono(), vec![1, 0, 0, 0]);
        assert_eq!(table.depth(), vec![3, 4, 4, 4]);
        assert_eq!(table.promotion(), vec![0, 3, 3, 2]);
        let norms: Vec<f64> = table.iter().map(|(_, v)| v.depth_norm).collect();
        assert_eq!(norms, vec![0.75, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_edu_features() {
        let tree = DiscourseTree::from_edu_texts("s", &["alone"], TreeNode::leaf(1, Root, "")).unwrap();
        let table = compute_edu_features(&tree);
        let v = table.get(1).unwrap();
        assert_eq!((v.ono, v.depth, v.promo, table.tree_depth()), (0, 1, 0, 1));
        assert_eq!(v.depth_norm, 1.0);
        assert_eq!(compute_promotion_sets(&tree).get(0).iter().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn mononuclear_node_takes_nucleus_set() {
        let root = TreeNode::internal(
            Root,
            "",
            vec![TreeNode::leaf(1, Nucleus, "span"), TreeNode::leaf(2, Satellite, "Elaboration")],
        );
        let tree = DiscourseTree::from_edu_texts("m", &["a", "b"], root).unwrap();
        let sets = compute_promotion_sets(&tree);
        assert_eq!(sets.get(0).iter().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn sentence_maxima() {
        let table = compute_edu_features(&four_edu_tree());
        let all = sentence_features(&table, 1, 4).unwrap();
        assert_eq!(all.depth_norm, 1.0);
        assert_eq!(all.ono, 1);
        assert_eq!(sentence_features(&table, 1, 1).unwrap(), *table.get(1).unwrap());
        let mid = sentence_features(&table, 2, 3).unwrap();
        assert_eq!((mid.depth, mid.promo, mid.ono), (4, 3, 0));
        assert!(sentence_features(&table, 0, 2).is_err());
        assert!(sentence_features(&table, 3, 5).is_err());
        assert!(sentence_features(&table, 3, 2).is_err());
    }

    #[test]
    fn feature_dump_lines() {
        let tree = four_edu_tree();
        let table = compute_edu_features(&tree);
        let recs = feature_records(&tree, &table);
        let line = serde_json::to_string(&recs[0]).unwrap();
        assert_eq!(
            line,
            r#"{"source_id":"four-edu-example","edu_index":1,"ono":1,"depth":3,"promo":0,"ono_norm":0.25,"depth_norm":0.75,"promo_norm":0.0,"D":4}"#
        );
    }

    fn words(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("e{i}")).collect()
    }

    proptest! {
        #[test]
        fn climbing_matches_promotion_set_oracle(seed in any::<u64>(), n in 1usize..40, k in 2usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let texts = words(n);
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let tree = random_tree(&mut rng, &refs, k);
            let table = compute_edu_features(&tree);
            let d = table.tree_depth();
            for (i, (ono, depth, promo)) in brute_force(&tree).into_iter().enumerate() {
                let v = table.get(i + 1).unwrap();
                prop_assert_eq!((v.ono, v.depth, v.promo), (ono, depth, promo));
                let leaf_level = tree.node(tree.leaf(i + 1)).level;
                prop_assert_eq!(v.depth - v.promo, d - leaf_level);
                prop_assert!(v.depth >= 1 && v.depth <= d);
                prop_assert!(v.promo < d && v.ono < d);
                prop_assert_eq!(v.depth_norm, f64::from(v.depth) / f64::from(d));
                prop_assert!(v.depth_norm > 0.0 && v.depth_norm <= 1.0);
                prop_assert!(v.promo_norm >= 0.0 && v.promo_norm < 1.0);
                prop_assert!(v.ono_norm >= 0.0 && v.ono_norm < 1.0);
            }
        }

        #[test]
        fn all_nucleus_path_gets_full_depth(seed in any::<u64>(), n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let texts = words(n);
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let tree = random_tree(&mut rng, &refs, 3);
            let table = compute_edu_features(&tree);
            for e in 1..=n {
                let mut cur = tree.leaf(e);
                let mut all_nucleus = true;
                while let Some(p) = tree.node(cur).parent {
                    all_nucleus &= tree.node(cur).nuclearity == Nucleus;
                    cur = p;
                }
                if all_nucleus {
                    let v = table.get(e).unwrap();
                    prop_assert_eq!(v.ono, 0);
                    prop_assert_eq!(v.depth, table.tree_depth());
                }
            }
        }

        #[test]
        fn promoting_a_satellite_never_lowers_depth(seed in any::<u64>(), n in 2usize..30, pick in any::<usize>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let texts = words(n);
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let tree = random_tree(&mut rng, &refs, 3);
            let satellites: Vec<(usize, usize)> = tree.nodes().iter()
                .filter(|n| n.nuclearity == Satellite).map(|n| n.span()).collect();
            prop_assume!(!satellites.is_empty());
            let target = satellites[pick % satellites.len()];
            let mut root = tree.root().clone();
            flip(&mut root, target);
            let promoted = DiscourseTree::from_edu_texts("p", &refs, root).unwrap();
            let before = compute_edu_features(&tree);
            let after = compute_edu_features(&promoted);
            for e in 1..=n {
                prop_assert!(after.get(e).unwrap().depth >= before.get(e).unwrap().depth);
            }
        }
    }

    fn flip(node: &mut TreeNode, span: (usize, usize)) {
        if node.span() == span {
            node.nuclearity = Nucleus;
            return;
        }
        for c in &mut node.children {
            if c.lo <= span.0 && span.1 <= c.hi {
                flip(c, span);
            }
        }
    }
}
