use discofact::eval::{aspl, NodeSet};
use discofact::features::compute_edu_features;
use discofact::rst::{parse_tree_file, DiscourseTree, Nuclearity, TreeNode};
use discofact::samples::{four_edu_tree, random_root};
use discofact::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn edu_texts(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("edu number {i}")).collect()
}

fn build(root: TreeNode, n: usize) -> discofact::Result<DiscourseTree> {
    let texts = edu_texts(n);
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    DiscourseTree::from_edu_texts("t", &refs, root)
}

/// Paths (child index sequences) of every internal node below the root.
fn internal_paths(node: &TreeNode, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    for (i, c) in node.children.iter().enumerate() {
        path.push(i);
        if !c.is_leaf() {
            out.push(path.clone());
        }
        internal_paths(c, path, out);
        path.pop();
    }
}

fn at<'a>(node: &'a mut TreeNode, path: &[usize]) -> &'a mut TreeNode {
    path.iter().fold(node, |n, &i| &mut n.children[i])
}

fn permute_children(node: &mut TreeNode, rng: &mut ChaCha8Rng) {
    use rand::seq::SliceRandom;
    node.children.shuffle(rng);
    for c in &mut node.children {
        permute_children(c, rng);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn json_round_trip(seed in any::<u64>(), n in 1usize..40, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = build(random_root(&mut rng, n, k), n).unwrap();
        let back = DiscourseTree::from_json(&tree.to_json()).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert_eq!(DiscourseTree::from_json(&tree.to_json_pretty()).unwrap(), tree);
    }

    #[test]
    fn structural_mutations_are_rejected(seed in any::<u64>(), n in 3usize..30, k in 2usize..5, kind in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut root = random_root(&mut rng, n, k);
        let mut paths = Vec::new();
        internal_paths(&root, &mut vec![], &mut paths);
        let target: Vec<usize> = if paths.is_empty() { vec![] } else { paths[(seed as usize) % paths.len()].clone() };
        let mut edus = n;
        match kind {
            0 => at(&mut root, &target).children.iter_mut().for_each(|c| c.nuclearity = Nuclearity::Satellite),
            1 => {
                let node = at(&mut root, &target);
                if target.is_empty() { node.children[0].nuclearity = Nuclearity::Root } else { node.nuclearity = Nuclearity::Root }
            }
            2 => {
                // widen the first child by one EDU so it overlaps its sibling
                let node = at(&mut root, &target);
                node.children[0].hi += 1;
            }
            3 => {
                let node = at(&mut root, &target);
                node.children.truncate(1);
            }
            4 => root.nuclearity = Nuclearity::Nucleus,
            _ => edus += 1,
        }
        let err = build(root, edus).unwrap_err();
        prop_assert!(matches!(err, Error::Validation { .. }), "{:?}", err);
    }

    #[test]
    fn aspl_and_depth_ignore_child_order(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let root = random_root(&mut rng, n, 4);
        let tree = build(root.clone(), n).unwrap();
        let mut shuffled = root;
        permute_children(&mut shuffled, &mut rng);
        // relabel leaves so spans stay in order after the shuffle
        fn relabel(node: &mut TreeNode, next: &mut usize) {
            if node.is_leaf() {
                node.lo = *next;
                node.hi = *next;
                *next += 1;
            } else {
                for c in &mut node.children { relabel(c, next); }
                node.lo = node.children[0].lo;
                node.hi = node.children.last().unwrap().hi;
            }
        }
        relabel(&mut shuffled, &mut 1);
        let other = build(shuffled, n).unwrap();
        prop_assert!((aspl(&tree, NodeSet::AllNodes).unwrap() - aspl(&other, NodeSet::AllNodes).unwrap()).abs() < 1e-12);
        prop_assert_eq!(tree.depth(), other.depth());
        let mut a = compute_edu_features(&tree).depth();
        let mut b = compute_edu_features(&other).depth();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn absent_marker_and_golden_file() {
    assert!(parse_tree_file(r#"{"source_id":"d","tree_absent":true}"#).unwrap().is_none());
    let tree = four_edu_tree();
    let parsed = parse_tree_file(&tree.to_json()).unwrap().unwrap();
    assert_eq!(compute_edu_features(&parsed).ono(), vec![1, 0, 0, 0]);
}

#[test]
fn deep_chain_parses_without_recursion_limit() {
    // a right-branching chain 5000 levels deep
    let n = 5000;
    let json = serde_json::json!({
        "source_id": "chain",
        "text": edu_texts(n).join(" "),
        "edus": (0..n).map(|i| {
            let start: usize = edu_texts(i).iter().map(|t| t.len() + 1).sum();
            serde_json::json!({"index": i + 1, "char_start": start, "char_end": start + format!("edu number {}", i + 1).len()})
        }).collect::<Vec<_>>(),
    });
    let mut text = json.to_string();
    text.pop();
    let mut root = String::new();
    for i in 1..n {
        let nuc = if i == 1 { "ROOT" } else { "N" };
        root.push_str(&format!(
            "{{\"lo\":{i},\"hi\":{n},\"nuclearity\":\"{nuc}\",\"children\":[{{\"lo\":{i},\"hi\":{i},\"nuclearity\":\"S\"}},"
        ));
    }
    root.push_str(&format!("{{\"lo\":{n},\"hi\":{n},\"nuclearity\":\"N\"}}"));
    root.push_str(&"]}".repeat(n - 1));
    text.push_str(&format!(",\"root\":{root}}}"));
    let handle = std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(move || {
            let tree = DiscourseTree::from_json(&text).unwrap();
            (tree.depth(), compute_edu_features(&tree).ono()[n - 1])
        })
        .unwrap();
    let (depth, ono_last) = handle.join().unwrap();
    assert_eq!(depth as usize, n);
    assert_eq!(ono_last, 0);
}
