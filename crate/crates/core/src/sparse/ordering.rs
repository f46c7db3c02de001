use std::collections::BTreeSet;

use super::{Permutation, PermutationRole, SparseSymmetric};

/// Minimum degree ordering on the explicit elimination graph.
///
/// Nodes are eliminated in order of current degree, ties broken first by
/// the degree in the original graph and then by index, so the result
/// depends only on the pattern. Each elimination turns the eliminated node's
/// neighbourhood into a clique.
pub fn compute_ordering(pattern: &SparseSymmetric) -> Permutation {
    let n = pattern.n();
    let mut adj = pattern.adjacency();
    let initial: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut queue: BTreeSet<(usize, usize, usize)> =
        (0..n).map(|i| (initial[i], initial[i], i)).collect();
    let mut order = Vec::with_capacity(n);

    while let Some((_, _, v)) = queue.pop_first() {
        order.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &u in &clique {
            let old_degree = adj[u].len();
            let merged = merge_excluding(&adj[u], &clique, u, v);
            queue.remove(&(old_degree, initial[u], u));
            queue.insert((merged.len(), initial[u], u));
            adj[u] = merged;
        }
    }
    Permutation::new(order, PermutationRole::FillReducing).expect("every node eliminated once")
}

/// Sorted union of `a` and `b` without `skip1` and `skip2`.
fn merge_excluding(a: &[usize], b: &[usize], skip1: usize, skip2: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if next != skip1 && next != skip2 {
            out.push(next);
        }
    }
    out
}
