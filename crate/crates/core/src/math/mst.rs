use crate::scalar::Real;

/// Edge of a spanning tree, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge<T> {
    pub a: usize,
    pub b: usize,
    pub weight: T,
}

/// Minimum spanning tree of the complete graph on `n` nodes (Prim, O(n^2)).
///
/// Starts from node 0. Among equal keys the lowest node index is attached
/// first, and a node keeps the lowest-index parent offering its key, so the
/// output is fully determined under ties.
pub fn minimum_spanning_tree<T, F>(n: usize, mut distance: F) -> Vec<MstEdge<T>>
where
    T: Real,
    F: FnMut(usize, usize) -> T,
{
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut key = vec![T::infinity(); n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);

    in_tree[0] = true;
    for v in 1..n {
        key[v] = distance(0, v);
        parent[v] = 0;
    }
    for _ in 1..n {
        let mut best = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (best == usize::MAX || key[v] < key[best]) {
                best = v;
            }
        }
        in_tree[best] = true;
        let p = parent[best];
        edges.push(MstEdge {
            a: p.min(best),
            b: p.max(best),
            weight: key[best],
        });
        for v in 0..n {
            if !in_tree[v] {
                let d = distance(best, v);
                if d < key[v] {
                    key[v] = d;
                    parent[v] = best;
                }
            }
        }
    }
    edges
}
