//! Fill-reducing orderings for the direct solver.

use std::collections::VecDeque;

use super::SparseMatrix;
use crate::scalar::Scalar;

const LEAF_SIZE: usize = 48;

/// Adjacency lists of the pattern of `A + Aᵀ` without the diagonal.
pub(crate) fn symmetric_pattern<T: Scalar>(a: &SparseMatrix<T>) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Nested-dissection permutation: `perm[k]` is the original index eliminated `k`-th.
///
/// Nodes of unusually high degree (dense constraint rows) are moved to the end.
pub fn nested_dissection<T: Scalar>(a: &SparseMatrix<T>) -> Vec<usize> {
    let adj = symmetric_pattern(a);
    let n = adj.len();
    let dense_cut = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let (dense, sparse): (Vec<usize>, Vec<usize>) = (0..n).partition(|&v| adj[v].len() > dense_cut);
    let mut region = vec![usize::MAX; n];
    for &v in &sparse {
        region[v] = 0;
    }
    let mut state = Dissection { adj: &adj, region, next_region: 1, order: Vec::with_capacity(n) };
    state.dissect(sparse, 0);
    let mut order = state.order;
    order.extend(dense);
    order
}

struct Dissection<'a> {
    adj: &'a [Vec<usize>],
    /// Region label per node; `usize::MAX` marks nodes already ordered or excluded.
    region: Vec<usize>,
    next_region: usize,
    order: Vec<usize>,
}

impl Dissection<'_> {
    fn fresh_region(&mut self, nodes: &[usize]) -> usize {
        let r = self.next_region;
        self.next_region += 1;
        for &v in nodes {
            self.region[v] = r;
        }
        r
    }

    fn bfs_levels(&self, start: usize, label: usize) -> Vec<Vec<usize>> {
        let mut levels = vec![vec![start]];
        let mut dist = std::collections::HashMap::new();
        dist.insert(start, 0usize);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            for &w in &self.adj[v] {
                if self.region[w] == label && !dist.contains_key(&w) {
                    dist.insert(w, d + 1);
                    if levels.len() <= d + 1 {
                        levels.push(Vec::new());
                    }
                    levels[d + 1].push(w);
                    queue.push_back(w);
                }
            }
        }
        levels
    }

    fn dissect(&mut self, nodes: Vec<usize>, label: usize) {
        if nodes.len() <= LEAF_SIZE {
            for &v in &nodes {
                self.region[v] = usize::MAX;
            }
            self.order.extend(nodes);
            return;
        }
        // pseudo-peripheral start node
        let start = *nodes.iter().min_by_key(|&&v| self.adj[v].len()).unwrap();
        let mut levels = self.bfs_levels(start, label);
        for _ in 0..4 {
            let far = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| self.adj[v].len())
                .unwrap();
            let candidate = self.bfs_levels(far, label);
            if candidate.len() <= levels.len() {
                break;
            }
            levels = candidate;
        }
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < nodes.len() {
            let component: Vec<usize> = levels.concat();
            let r1 = self.fresh_region(&component);
            let rest: Vec<usize> = nodes.into_iter().filter(|&v| self.region[v] == label).collect();
            let r2 = self.fresh_region(&rest);
            self.dissect(component, r1);
            self.dissect(rest, r2);
            return;
        }
        if levels.len() < 3 {
            for &v in &nodes {
                self.region[v] = usize::MAX;
            }
            self.order.extend(nodes);
            return;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (k, lvl) in levels.iter().enumerate() {
            acc += lvl.len();
            if acc >= half {
                mid = k.clamp(1, levels.len() - 2);
                break;
            }
        }
        let upper: std::collections::HashSet<usize> = levels[mid + 1].iter().copied().collect();
        let (separator, lower_extra): (Vec<usize>, Vec<usize>) = levels[mid]
            .iter()
            .partition(|&&v| self.adj[v].iter().any(|w| upper.contains(w)));
        let mut lower: Vec<usize> = levels[..mid].concat();
        lower.extend(lower_extra);
        let higher: Vec<usize> = levels[mid + 1..].concat();
        for &v in &separator {
            self.region[v] = usize::MAX;
        }
        let r1 = self.fresh_region(&lower);
        let r2 = self.fresh_region(&higher);
        self.dissect(lower, r1);
        self.dissect(higher, r2);
        self.order.extend(separator);
    }
}
