use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rst::DiscourseTree;

/// Which tree nodes take part in the average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSet {
    /// Internal nodes and leaves.
    #[default]
    AllNodes,
    /// Only the EDU leaves; paths still run through internal nodes.
    Leaves,
}

/// Undirected parent-child adjacency of the tree, indexed by node id.
pub fn tree_adjacency(tree: &DiscourseTree) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); tree.nodes().len()];
    for (id, node) in tree.nodes().iter().enumerate() {
        if let Some(p) = node.parent {
            adj[id].push(p);
            adj[p].push(id);
        }
    }
    adj
}

/// Average shortest path length of the tree viewed as an undirected graph.
pub fn aspl(tree: &DiscourseTree, nodes: NodeSet) -> Result<f64> {
    let adj = tree_adjacency(tree);
    let targets: Vec<usize> = match nodes {
        NodeSet::AllNodes => (0..adj.len()).collect(),
        NodeSet::Leaves => (1..=tree.edu_count()).map(|e| tree.leaf(e)).collect(),
    };
    mean_distance(&adj, &targets)
}

/// Average shortest path length over all unordered pairs of distinct nodes.
pub fn aspl_of_graph(adjacency: &[Vec<usize>]) -> Result<f64> {
    let all: Vec<usize> = (0..adjacency.len()).collect();
    mean_distance(adjacency, &all)
}

fn mean_distance(adj: &[Vec<usize>], targets: &[usize]) -> Result<f64> {
    if targets.len() < 2 {
        return Err(Error::invalid("average shortest path length needs at least two nodes"));
    }
    let mut is_target = vec![false; adj.len()];
    for &t in targets {
        is_target[t] = true;
    }
    let mut total: u64 = 0;
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = VecDeque::new();
    for &src in targets {
        dist.fill(u32::MAX);
        dist[src] = 0;
        queue.push_back(src);
        let mut reached = 0;
        while let Some(u) = queue.pop_front() {
            if is_target[u] {
                total += u64::from(dist[u]);
                reached += 1;
            }
            for &v in &adj[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if reached != targets.len() {
            return Err(Error::invalid("graph is disconnected"));
        }
    }
    let pairs = targets.len() as u64 * (targets.len() as u64 - 1);
    // every unordered pair was counted from both ends
    Ok(total as f64 / pairs as f64)
}
