//! Sample trees and synthetic document/tree generators for tests, benchmarks
//! and the FFI smoke checks.

use rand::seq::index::sample;
use rand::Rng;

use crate::rst::{DiscourseTree, Nuclearity, TreeNode};
use crate::text::Document;

/// EDU texts of the four-unit example sentence.
pub const FOUR_EDU_TEXTS: [&str; 4] = [
    "Mr. Watkins said",
    "volume on Interprovincial's system is down about 2% since January",
    "and is expected to fall further,",
    "making expansion unnecessary until perhaps the mid-1990s.",
];

/// Root of the four-EDU example: an Attribution satellite (EDU 1) attached to
/// a nucleus spanning 2-4, in which EDUs 2 and 3 form a List.
pub fn four_edu_root() -> TreeNode {
    use Nuclearity::*;
    TreeNode::internal(
        Root,
        "",
        vec![
            TreeNode::leaf(1, Satellite, "Attribution"),
            TreeNode::internal(
                Nucleus,
                "span",
                vec![
                    TreeNode::internal(
                        Nucleus,
                        "List",
                        vec![TreeNode::leaf(2, Nucleus, "List"), TreeNode::leaf(3, Nucleus, "List")],
                    ),
                    TreeNode::leaf(4, Nucleus, "span"),
                ],
            ),
        ],
    )
}

pub fn four_edu_tree() -> DiscourseTree {
    DiscourseTree::from_edu_texts("four-edu-example", &FOUR_EDU_TEXTS, four_edu_root())
        .expect("sample tree is valid")
}

/// A random n-ary tree over EDUs `1..=n_edus` with the root marked `Root`.
/// Every internal node has between 2 and `max_children` children and at
/// least one nucleus.
pub fn random_root<R: Rng + ?Sized>(rng: &mut R, n_edus: usize, max_children: usize) -> TreeNode {
    assert!(n_edus >= 1 && max_children >= 2);
    let mut root = random_subtree(rng, 1, n_edus, Nuclearity::Root, max_children);
    root.nuclearity = Nuclearity::Root;
    root
}

fn random_subtree<R: Rng + ?Sized>(
    rng: &mut R,
    lo: usize,
    hi: usize,
    nuclearity: Nuclearity,
    max_children: usize,
) -> TreeNode {
    if lo == hi {
        return TreeNode::leaf(lo, nuclearity, "span");
    }
    let width = hi - lo + 1;
    let k = rng.random_range(2..=max_children.min(width));
    // k-1 cut points chosen from the width-1 gaps between EDUs
    let mut cuts: Vec<usize> = sample(rng, width - 1, k - 1).into_iter().map(|c| lo + c + 1).collect();
    cuts.sort_unstable();
    let mut nuclearities: Vec<Nuclearity> = (0..k)
        .map(|_| if rng.random_bool(0.5) { Nuclearity::Nucleus } else { Nuclearity::Satellite })
        .collect();
    if !nuclearities.contains(&Nuclearity::Nucleus) {
        let i = rng.random_range(0..k);
        nuclearities[i] = Nuclearity::Nucleus;
    }
    let relation = if nuclearities.iter().all(|n| *n == Nuclearity::Nucleus) { "List" } else { "Elaboration" };
    let mut children = Vec::with_capacity(k);
    let mut start = lo;
    for (i, nuc) in nuclearities.into_iter().enumerate() {
        let end = if i < cuts.len() { cuts[i] - 1 } else { hi };
        children.push(random_subtree(rng, start, end, nuc, max_children));
        start = end + 1;
    }
    TreeNode::internal(nuclearity, relation, children)
}

/// A random tree over `edu_texts` joined with spaces.
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, edu_texts: &[&str], max_children: usize) -> DiscourseTree {
    let root = random_root(rng, edu_texts.len(), max_children);
    DiscourseTree::from_edu_texts("random", edu_texts, root).expect("generated tree is valid")
}

/// A document of `n_sentences` sentences with word counts drawn from
/// `min_words..=max_words`. Each word is `w<sentence>x<word>`.
pub fn random_document<R: Rng + ?Sized>(
    rng: &mut R,
    n_sentences: usize,
    min_words: usize,
    max_words: usize,
) -> Document {
    let sentences: Vec<String> = (1..=n_sentences)
        .map(|s| {
            let n = rng.random_range(min_words..=max_words);
            (1..=n).map(|w| format!("w{s}x{w}")).collect::<Vec<_>>().join(" ")
        })
        .collect();
    Document::from_sentences(&sentences).expect("generated document is valid")
}

/// A random tree over `doc`'s text whose EDUs are runs of 1..=`max_edu_words`
/// consecutive words. EDU boundaries ignore sentence boundaries, so EDUs may
/// straddle sentences.
pub fn random_tree_over<R: Rng + ?Sized>(
    rng: &mut R,
    doc: &Document,
    max_edu_words: usize,
    max_children: usize,
) -> DiscourseTree {
    // char spans of every word in the document text
    let mut words = Vec::new();
    let mut start = None;
    let mut pos = 0;
    for c in doc.text().chars() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(pos),
            (true, Some(s)) => {
                words.push((s, pos));
                start = None;
            }
            _ => {}
        }
        pos += 1;
    }
    if let Some(s) = start {
        words.push((s, pos));
    }
    let mut spans = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let take = rng.random_range(1..=max_edu_words).min(words.len() - i);
        spans.push((words[i].0, words[i + take - 1].1));
        i += take;
    }
    let root = random_root(rng, spans.len(), max_children);
    DiscourseTree::new("random", doc.text(), &spans, root).expect("generated tree is valid")
}
