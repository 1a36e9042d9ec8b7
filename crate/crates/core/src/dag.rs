//! Node-weighted DAG helpers: topological order and longest path.

use std::collections::VecDeque;
use std::ops::Add;

use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("precedence graph contains a cycle")]
    Cycle,
    #[error("edge ({0}, {1}) references a node out of range")]
    NodeOutOfRange(usize, usize),
}

/// Kahn order over `n` nodes. Ties resolved by node index.
pub fn topological_order(n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>, DagError> {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(DagError::NodeOutOfRange(a, b));
        }
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err(DagError::Cycle)
    }
}

/// Heaviest path through a node-weighted DAG, restricted to the nodes where
/// `include` is true (all nodes when `None`). Edges touching an excluded node
/// are dropped. An empty selection has length zero.
pub fn longest_path<W>(
    weights: &[W],
    edges: &[(usize, usize)],
    include: Option<&[bool]>,
) -> Result<W, DagError>
where
    W: Copy + Zero + Add<Output = W> + PartialOrd,
{
    let n = weights.len();
    let keep = |i: usize| include.map(|m| m[i]).unwrap_or(true);
    let order = topological_order(n, edges)?;
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        if keep(a) && keep(b) {
            preds[b].push(a);
        }
    }
    let mut finish: Vec<W> = vec![W::zero(); n];
    let mut best = W::zero();
    for v in order {
        if !keep(v) {
            continue;
        }
        let mut start = W::zero();
        for &p in &preds[v] {
            if finish[p] > start {
                start = finish[p];
            }
        }
        finish[v] = start + weights[v];
        if finish[v] > best {
            best = finish[v];
        }
    }
    Ok(best)
}
