use std::collections::{BTreeMap, BTreeSet};

use super::newick::{RootedNode, RootedTree};
use super::DistanceMatrix;
use crate::error::{Error, Result};

/// One agglomeration step: `left` and `right` become children of `node`.
#[derive(Clone, Debug, PartialEq)]
pub struct Join {
    pub left: usize,
    pub right: usize,
    pub node: usize,
    pub left_length: f64,
    pub right_length: f64,
}

/// Unrooted tree: nodes `0..n` are the leaves in label order, internal nodes
/// follow in the order they were created.
#[derive(Clone, Debug, PartialEq)]
pub struct PhyloTree {
    labels: Vec<String>,
    node_count: usize,
    edges: Vec<(usize, usize, f64)>,
    joins: Vec<Join>,
    /// The edge joining the last two clusters.
    last: (usize, usize, f64),
}

pub type Split = BTreeSet<String>;

pub fn neighbor_joining(m: &DistanceMatrix) -> Result<PhyloTree> {
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidMatrix(
            "neighbor joining needs at least two labels".into(),
        ));
    }
    let total = 2 * n - 2;
    let mut d = vec![vec![0.0f64; total]; total];
    for (i, row) in d.iter_mut().enumerate().take(n) {
        for (j, v) in row.iter_mut().enumerate().take(n) {
            *v = m.get(i, j);
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut edges = Vec::with_capacity(total);
    let mut joins = Vec::with_capacity(n.saturating_sub(2));
    let mut next = n;
    while active.len() > 2 {
        let r = active.len();
        let sums: Vec<f64> = active
            .iter()
            .map(|&i| active.iter().map(|&k| d[i][k]).sum())
            .collect();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..r {
            for b in a + 1..r {
                let (i, j) = (active[a], active[b]);
                let q = (r as f64 - 2.0) * d[i][j] - sums[a] - sums[b];
                if q < best.0 {
                    best = (q, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let (i, j) = (active[a], active[b]);
        let dij = d[i][j];
        let mut li = 0.5 * dij + (sums[a] - sums[b]) / (2.0 * (r as f64 - 2.0));
        let mut lj = dij - li;
        if li < 0.0 {
            li = 0.0;
            lj = dij;
        } else if lj < 0.0 {
            lj = 0.0;
            li = dij;
        }
        let u = next;
        next += 1;
        for &k in &active {
            if k != i && k != j {
                let v = 0.5 * (d[i][k] + d[j][k] - dij);
                d[u][k] = v;
                d[k][u] = v;
            }
        }
        edges.push((u, i, li));
        edges.push((u, j, lj));
        joins.push(Join {
            left: i,
            right: j,
            node: u,
            left_length: li,
            right_length: lj,
        });
        active.remove(b);
        active.remove(a);
        active.push(u);
    }
    let (a, b) = (active[0], active[1]);
    let last = (a, b, d[a][b].max(0.0));
    edges.push(last);
    Ok(PhyloTree {
        labels: m.labels().to_vec(),
        node_count: next,
        edges,
        joins,
        last,
    })
}

impl PhyloTree {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `(a, b, length)` for every edge.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn joins(&self) -> &[Join] {
        &self.joins
    }

    pub fn final_edge(&self) -> (usize, usize, f64) {
        self.last
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b, l) in &self.edges {
            adj[a].push((b, l));
            adj[b].push((a, l));
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.0 == node || e.1 == node)
            .count()
    }

    /// Distances and predecessors from `from` to every node.
    fn distances_from(&self, adj: &[Vec<(usize, f64)>], from: usize) -> (Vec<f64>, Vec<usize>) {
        let mut dist = vec![f64::NAN; self.node_count];
        let mut prev = vec![usize::MAX; self.node_count];
        dist[from] = 0.0;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for &(v, l) in &adj[u] {
                if dist[v].is_nan() {
                    dist[v] = dist[u] + l;
                    prev[v] = u;
                    stack.push(v);
                }
            }
        }
        (dist, prev)
    }

    /// Path length between two leaves.
    pub fn leaf_distance(&self, a: usize, b: usize) -> f64 {
        self.distances_from(&self.adjacency(), a).0[b]
    }

    /// Roots the tree at the midpoint of its longest leaf-to-leaf path (the
    /// lowest leaf pair on ties).
    pub fn midpoint_root(&self) -> RootedTree {
        let adj = self.adjacency();
        let n = self.labels.len();
        let mut best = (-1.0, 0, 0, Vec::new(), Vec::new());
        for a in 0..n {
            let (dist, prev) = self.distances_from(&adj, a);
            for b in a + 1..n {
                if dist[b] > best.0 {
                    best = (dist[b], a, b, dist.clone(), prev.clone());
                }
            }
        }
        let (longest, _, b, dist, prev) = best;
        let half = 0.5 * longest;
        // Walk back from b towards a until the midpoint edge is found.
        let mut v = b;
        let mut u = prev[v];
        while dist[u] > half {
            v = u;
            u = prev[v];
        }
        let mut builder = Builder {
            adj: &adj,
            labels: &self.labels,
            nodes: Vec::new(),
        };
        let root = if dist[u] == half && u >= n {
            builder.build(u, usize::MAX, None)
        } else {
            let to_u = half - dist[u];
            let to_v = dist[v] - half;
            let mut children = vec![
                (builder.build(u, v, Some(to_u)), builder.min_leaf(u, v)),
                (builder.build(v, u, Some(to_v)), builder.min_leaf(v, u)),
            ];
            children.sort_by_key(|c| c.1);
            builder.nodes.push(RootedNode {
                label: None,
                length: None,
                children: children.into_iter().map(|c| c.0).collect(),
            });
            builder.nodes.len() - 1
        };
        RootedTree::new(builder.nodes, root)
    }

    pub fn to_newick(&self) -> String {
        self.midpoint_root().to_newick()
    }

    /// Leaf bipartition of every edge, keyed by the side that does not hold
    /// the smallest label, with the edge lengths of equal splits summed.
    pub fn split_lengths(&self) -> BTreeMap<Split, f64> {
        let adj = self.adjacency();
        let smallest = self.labels.iter().min().cloned().unwrap_or_default();
        let all: Split = self.labels.iter().cloned().collect();
        let mut out = BTreeMap::new();
        for &(a, b, l) in &self.edges {
            let side: Split = leaves_beyond(&adj, self.labels.len(), b, a)
                .into_iter()
                .map(|k| self.labels[k].clone())
                .collect();
            let key = normalize_split(side, &all, &smallest);
            *out.entry(key).or_insert(0.0) += l;
        }
        out
    }

    /// Non-trivial splits (both sides hold at least two leaves).
    pub fn splits(&self) -> BTreeSet<Split> {
        nontrivial(self.split_lengths().into_keys(), self.labels.len())
    }
}

pub(super) fn normalize_split(side: Split, all: &Split, smallest: &String) -> Split {
    if side.contains(smallest) {
        all.difference(&side).cloned().collect()
    } else {
        side
    }
}

pub(super) fn nontrivial(splits: impl Iterator<Item = Split>, n: usize) -> BTreeSet<Split> {
    splits
        .filter(|s| s.len() >= 2 && s.len() + 2 <= n)
        .collect()
}

fn leaves_beyond(
    adj: &[Vec<(usize, f64)>],
    leaf_count: usize,
    start: usize,
    from: usize,
) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![(start, from)];
    while let Some((u, p)) = stack.pop() {
        if u < leaf_count {
            out.push(u);
        }
        for &(v, _) in &adj[u] {
            if v != p {
                stack.push((v, u));
            }
        }
    }
    out
}

struct Builder<'a> {
    adj: &'a [Vec<(usize, f64)>],
    labels: &'a [String],
    nodes: Vec<RootedNode>,
}

impl Builder<'_> {
    fn is_leaf(&self, u: usize) -> bool {
        u < self.labels.len()
    }

    fn min_leaf(&self, u: usize, parent: usize) -> usize {
        if self.is_leaf(u) {
            return u;
        }
        self.adj[u]
            .iter()
            .filter(|(v, _)| *v != parent)
            .map(|&(v, _)| self.min_leaf(v, u))
            .min()
            .unwrap_or(usize::MAX)
    }

    fn build(&mut self, u: usize, parent: usize, length: Option<f64>) -> usize {
        if self.is_leaf(u) {
            self.nodes.push(RootedNode {
                label: Some(self.labels[u].clone()),
                length,
                children: Vec::new(),
            });
            return self.nodes.len() - 1;
        }
        let mut kids: Vec<(usize, f64, usize)> = self.adj[u]
            .iter()
            .filter(|(v, _)| *v != parent)
            .map(|&(v, l)| (v, l, self.min_leaf(v, u)))
            .collect();
        kids.sort_by_key(|k| k.2);
        let children = kids
            .into_iter()
            .map(|(v, l, _)| self.build(v, u, Some(l)))
            .collect();
        self.nodes.push(RootedNode {
            label: None,
            length,
            children,
        });
        self.nodes.len() - 1
    }
}
