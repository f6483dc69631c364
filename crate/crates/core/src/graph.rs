//! Directed-graph substrate: wirings, hop distances, reach, strongly
//! connected components and diameter.
//!
//! Everything in this module is penalty-agnostic. An unreachable node is
//! reported as `None` (or [`UNREACHABLE`] in raw rows); the disconnection
//! penalty is applied by the game layer only.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// Node identifier, 0-based.
pub type NodeId = usize;

/// Raw marker stored in distance rows for unreachable nodes.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("node {node} links to itself")]
    SelfLoop { node: NodeId },
    #[error("node {node} lists target {target} more than once")]
    DuplicateTarget { node: NodeId, target: NodeId },
    #[error("node {node} has {degree} targets but the link budget is {k}")]
    DegreeOverflow { node: NodeId, degree: usize, k: usize },
    #[error("adjacency has {got} rows, expected {expected}")]
    RowCount { expected: usize, got: usize },
}

/// A global wiring: every node's ordered list of out-neighbors.
///
/// Invariants (checked on construction and on every mutation): targets are
/// in range, no self-loops, no duplicates, and no node exceeds the budget `k`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Wiring {
    k: usize,
    out: Vec<Vec<NodeId>>,
}

impl Wiring {
    /// The wiring with no edges at all.
    pub fn empty(n: usize, k: usize) -> Self {
        Wiring {
            k,
            out: vec![Vec::new(); n],
        }
    }

    pub fn from_adjacency(k: usize, out: Vec<Vec<NodeId>>) -> Result<Self, GraphError> {
        let n = out.len();
        for (v, targets) in out.iter().enumerate() {
            validate_targets(n, k, v, targets)?;
        }
        Ok(Wiring { k, out })
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.out.len()
    }

    /// Link budget (maximum out-degree).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn targets(&self, v: NodeId) -> &[NodeId] {
        &self.out[v]
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out[v].len()
    }

    pub fn adjacency(&self) -> &[Vec<NodeId>] {
        &self.out
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, ts)| ts.iter().map(move |&t| (u, t)))
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.out[u].contains(&v)
    }

    /// Replace the out-links of `v`.
    pub fn set_targets(&mut self, v: NodeId, targets: Vec<NodeId>) -> Result<(), GraphError> {
        self.check_node(v)?;
        validate_targets(self.n(), self.k, v, &targets)?;
        self.out[v] = targets;
        Ok(())
    }

    pub fn with_targets(&self, v: NodeId, targets: Vec<NodeId>) -> Result<Wiring, GraphError> {
        let mut w = self.clone();
        w.set_targets(v, targets)?;
        Ok(w)
    }

    /// Adjacency with every target list sorted; two wirings with the same
    /// edge set produce the same key.
    pub fn canonical_key(&self) -> Vec<Vec<NodeId>> {
        self.out
            .iter()
            .map(|ts| {
                let mut s = ts.clone();
                s.sort_unstable();
                s
            })
            .collect()
    }

    pub fn same_edges(&self, other: &Wiring) -> bool {
        self.n() == other.n() && self.canonical_key() == other.canonical_key()
    }

    pub(crate) fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if v >= self.n() {
            Err(GraphError::NodeOutOfRange { node: v, n: self.n() })
        } else {
            Ok(())
        }
    }
}

impl fmt::Debug for Wiring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Wiring(n={}, k={}) {{", self.n(), self.k)?;
        for (v, ts) in self.out.iter().enumerate() {
            write!(f, " {v}->{ts:?}")?;
        }
        write!(f, " }}")
    }
}

fn validate_targets(n: usize, k: usize, v: NodeId, targets: &[NodeId]) -> Result<(), GraphError> {
    if targets.len() > k {
        return Err(GraphError::DegreeOverflow {
            node: v,
            degree: targets.len(),
            k,
        });
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(GraphError::NodeOutOfRange { node: t, n });
        }
        if t == v {
            return Err(GraphError::SelfLoop { node: v });
        }
        if targets[..i].contains(&t) {
            return Err(GraphError::DuplicateTarget { node: v, target: t });
        }
    }
    Ok(())
}

/// Hop distances from one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceRow {
    pub source: NodeId,
    dist: Vec<u32>,
}

impl DistanceRow {
    pub fn get(&self, j: NodeId) -> Option<u32> {
        match self.dist[j] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    pub fn raw(&self) -> &[u32] {
        &self.dist
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// Nodes other than the source with a finite distance.
    pub fn reached(&self) -> usize {
        self.dist
            .iter()
            .enumerate()
            .filter(|&(j, &d)| j != self.source && d != UNREACHABLE)
            .count()
    }

    /// Largest finite distance.
    pub fn max_finite(&self) -> u32 {
        self.dist
            .iter()
            .copied()
            .filter(|&d| d != UNREACHABLE)
            .max()
            .unwrap_or(0)
    }
}

/// Reusable BFS scratch space.
#[derive(Debug, Default)]
pub(crate) struct Bfs {
    queue: VecDeque<NodeId>,
}

impl Bfs {
    /// Breadth-first search from `src` over `adj`, writing into `dist`.
    /// When `cut` is set, the out-edges of that node are ignored (the
    /// residual wiring of that node).
    pub(crate) fn run(&mut self, adj: &[Vec<NodeId>], src: NodeId, cut: Option<NodeId>, dist: &mut [u32]) {
        dist.fill(UNREACHABLE);
        dist[src] = 0;
        self.queue.clear();
        self.queue.push_back(src);
        while let Some(u) = self.queue.pop_front() {
            if Some(u) == cut {
                continue;
            }
            let du = dist[u] + 1;
            for &t in &adj[u] {
                if dist[t] == UNREACHABLE {
                    dist[t] = du;
                    self.queue.push_back(t);
                }
            }
        }
    }
}

pub fn single_source_distances(w: &Wiring, v: NodeId) -> Result<DistanceRow, GraphError> {
    w.check_node(v)?;
    let mut dist = vec![UNREACHABLE; w.n()];
    Bfs::default().run(w.adjacency(), v, None, &mut dist);
    Ok(DistanceRow { source: v, dist })
}

/// Dense n x n hop-distance matrix, row-major, [`UNREACHABLE`] for missing paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u32>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: NodeId, to: NodeId) -> Option<u32> {
        match self.data[from * self.n + to] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    pub fn row(&self, from: NodeId) -> &[u32] {
        &self.data[from * self.n..(from + 1) * self.n]
    }
}

pub fn all_pairs_distances(w: &Wiring) -> DistanceMatrix {
    all_pairs_with_cut(w.adjacency(), None)
}

pub(crate) fn all_pairs_with_cut(adj: &[Vec<NodeId>], cut: Option<NodeId>) -> DistanceMatrix {
    let n = adj.len();
    let mut data = vec![UNREACHABLE; n * n];
    let mut bfs = Bfs::default();
    for (s, row) in data.chunks_mut(n.max(1)).enumerate().take(n) {
        bfs.run(adj, s, cut, row);
    }
    DistanceMatrix { n, data }
}

/// Number of nodes other than `v` that `v` can reach.
pub fn reach(w: &Wiring, v: NodeId) -> Result<usize, GraphError> {
    Ok(single_source_distances(w, v)?.reached())
}

/// Reach of every node.
pub fn reach_all(w: &Wiring) -> Vec<usize> {
    let n = w.n();
    let mut dist = vec![UNREACHABLE; n];
    let mut bfs = Bfs::default();
    (0..n)
        .map(|v| {
            bfs.run(w.adjacency(), v, None, &mut dist);
            dist.iter().filter(|&&d| d != UNREACHABLE).count() - 1
        })
        .collect()
}

/// Partition into strongly connected components plus the component DAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condensation {
    /// Component index of every node.
    pub component_of: Vec<usize>,
    /// Members of each component, ascending.
    pub components: Vec<Vec<NodeId>>,
    /// Sorted, deduplicated successor components of each component.
    pub dag: Vec<Vec<usize>>,
}

impl Condensation {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Components with no outgoing DAG edge.
    pub fn sinks(&self) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.dag[c].is_empty()).collect()
    }
}

/// Tarjan's algorithm, iterative so deep paths do not overflow the stack.
pub fn strongly_connected_components(w: &Wiring) -> Condensation {
    let n = w.n();
    let adj = w.adjacency();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<NodeId> = Vec::new();
    let mut component_of = vec![UNSEEN; n];
    let mut components: Vec<Vec<NodeId>> = Vec::new();
    let mut next_index = 0;
    // (node, position in its adjacency list)
    let mut call: Vec<(NodeId, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (u, ref mut pos)) = call.last_mut() {
            if *pos < adj[u].len() {
                let t = adj[u][*pos];
                *pos += 1;
                if index[t] == UNSEEN {
                    index[t] = next_index;
                    low[t] = next_index;
                    next_index += 1;
                    stack.push(t);
                    on_stack[t] = true;
                    call.push((t, 0));
                } else if on_stack[t] {
                    low[u] = low[u].min(index[t]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[u]);
            }
            if low[u] == index[u] {
                let c = components.len();
                let mut members = Vec::new();
                loop {
                    let x = stack.pop().expect("tarjan stack underflow");
                    on_stack[x] = false;
                    component_of[x] = c;
                    members.push(x);
                    if x == u {
                        break;
                    }
                }
                members.sort_unstable();
                components.push(members);
            }
        }
    }

    let mut dag = vec![Vec::new(); components.len()];
    for (u, t) in w.edges() {
        let (cu, ct) = (component_of[u], component_of[t]);
        if cu != ct {
            dag[cu].push(ct);
        }
    }
    for succ in &mut dag {
        succ.sort_unstable();
        succ.dedup();
    }
    Condensation {
        component_of,
        components,
        dag,
    }
}

pub fn is_strongly_connected(w: &Wiring) -> bool {
    let n = w.n();
    if n <= 1 {
        return true;
    }
    let mut dist = vec![UNREACHABLE; n];
    let mut bfs = Bfs::default();
    bfs.run(w.adjacency(), 0, None, &mut dist);
    if dist.contains(&UNREACHABLE) {
        return false;
    }
    let mut rev = vec![Vec::new(); n];
    for (u, t) in w.edges() {
        rev[t].push(u);
    }
    bfs.run(&rev, 0, None, &mut dist);
    !dist.contains(&UNREACHABLE)
}

/// Maximum distance from `v`, or `None` if some node is unreachable.
pub fn eccentricity(w: &Wiring, v: NodeId) -> Result<Option<u32>, GraphError> {
    let row = single_source_distances(w, v)?;
    if row.reached() + 1 < w.n() {
        Ok(None)
    } else {
        Ok(Some(row.max_finite()))
    }
}

/// Maximum hop distance over ordered pairs, or `None` when the wiring is not
/// strongly connected.
pub fn diameter(w: &Wiring) -> Option<u32> {
    let n = w.n();
    let mut dist = vec![UNREACHABLE; n];
    let mut bfs = Bfs::default();
    let mut best = 0;
    for v in 0..n {
        bfs.run(w.adjacency(), v, None, &mut dist);
        for &d in &dist {
            if d == UNREACHABLE {
                return None;
            }
            best = best.max(d);
        }
    }
    Some(best)
}

/// Directed cycle 0 -> 1 -> ... -> n-1 -> 0 with budget `k`.
pub fn hamiltonian_cycle(n: usize, k: usize) -> Wiring {
    let out = (0..n)
        .map(|v| if n > 1 { vec![(v + 1) % n] } else { Vec::new() })
        .collect();
    Wiring { k, out }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(k: usize, adj: &[&[NodeId]]) -> Wiring {
        Wiring::from_adjacency(k, adj.iter().map(|a| a.to_vec()).collect()).unwrap()
    }

    /// Ring of `r` nodes 0..r plus a path r..r+p feeding node 0 of the ring.
    fn ring_and_tail(r: usize, p: usize) -> Wiring {
        let mut adj: Vec<Vec<NodeId>> = (0..r).map(|v| vec![(v + 1) % r]).collect();
        for i in 0..p {
            let v = r + i;
            adj.push(vec![if i + 1 < p { v + 1 } else { 0 }]);
        }
        Wiring::from_adjacency(1, adj).unwrap()
    }

    #[test]
    fn bfs_examples() {
        let c3 = hamiltonian_cycle(3, 1);
        assert_eq!(single_source_distances(&c3, 0).unwrap().raw(), &[0, 1, 2]);

        let e = Wiring::empty(3, 2);
        let row = single_source_distances(&e, 0).unwrap();
        assert_eq!(row.get(0), Some(0));
        assert_eq!(row.get(1), None);
        assert_eq!(row.get(2), None);

        let path = w(1, &[&[1], &[2], &[]]);
        let row = single_source_distances(&path, 2).unwrap();
        assert_eq!((row.get(0), row.get(1), row.get(2)), (None, None, Some(0)));

        assert!(matches!(
            single_source_distances(&path, 3),
            Err(GraphError::NodeOutOfRange { node: 3, n: 3 })
        ));
    }

    #[test]
    fn wiring_validation() {
        assert_eq!(
            Wiring::from_adjacency(1, vec![vec![0]]),
            Err(GraphError::SelfLoop { node: 0 })
        );
        assert_eq!(
            Wiring::from_adjacency(2, vec![vec![1, 1], vec![]]),
            Err(GraphError::DuplicateTarget { node: 0, target: 1 })
        );
        assert_eq!(
            Wiring::from_adjacency(1, vec![vec![1, 2], vec![], vec![]]),
            Err(GraphError::DegreeOverflow { node: 0, degree: 2, k: 1 })
        );
        assert_eq!(
            Wiring::from_adjacency(1, vec![vec![5], vec![]]),
            Err(GraphError::NodeOutOfRange { node: 5, n: 2 })
        );
        let mut c = hamiltonian_cycle(4, 1);
        assert!(c.set_targets(0, vec![0]).is_err());
        assert_eq!(c.targets(0), &[1]);
    }

    #[test]
    fn reach_examples() {
        let c6 = hamiltonian_cycle(6, 1);
        for v in 0..6 {
            assert_eq!(reach(&c6, v).unwrap(), 5);
        }
        let e = Wiring::empty(5, 2);
        assert!(reach_all(&e).iter().all(|&r| r == 0));

        let g = ring_and_tail(4, 2);
        // tail head is node 4: reaches 5 -> ring
        assert_eq!(reach(&g, 4).unwrap(), 5);
        assert_eq!(reach(&g, 5).unwrap(), 4);
        assert_eq!(reach(&g, 0).unwrap(), 3);
    }

    #[test]
    fn scc_examples() {
        let c5 = hamiltonian_cycle(5, 1);
        let cond = strongly_connected_components(&c5);
        assert_eq!(cond.len(), 1);
        assert!(cond.dag[0].is_empty());

        let two = w(1, &[&[1], &[2], &[0], &[4], &[5], &[3]]);
        let cond = strongly_connected_components(&two);
        assert_eq!(cond.len(), 2);
        assert_eq!(cond.sinks().len(), 2);

        // ring(4) + path(2): 3 components, the ring is the unique sink
        let g = ring_and_tail(4, 2);
        let cond = strongly_connected_components(&g);
        assert_eq!(cond.len(), 3);
        let sinks = cond.sinks();
        assert_eq!(sinks.len(), 1);
        assert_eq!(cond.components[sinks[0]], vec![0, 1, 2, 3]);
        assert_eq!(cond.dag[cond.component_of[5]], vec![cond.component_of[0]]);
        assert_eq!(cond.dag[cond.component_of[4]], vec![cond.component_of[5]]);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(diameter(&hamiltonian_cycle(7, 1)), Some(6));
        let complete = Wiring::from_adjacency(
            3,
            (0..4).map(|v| (0..4).filter(|&u| u != v).collect()).collect(),
        )
        .unwrap();
        assert_eq!(diameter(&complete), Some(1));
        // 1->{2,3}, 2->{4,5}, 3->{6,7}, 4->{1,3}, 5,6,7->{2,3} in 1-based labels;
        // the longest shortest path is 3->6->2->4->1
        let s72 = w(
            2,
            &[&[1, 2], &[3, 4], &[5, 6], &[0, 2], &[1, 2], &[1, 2], &[1, 2]],
        );
        assert_eq!(diameter(&s72), Some(4));
        assert_eq!(diameter(&Wiring::empty(3, 1)), None);
        assert!(!is_strongly_connected(&ring_and_tail(4, 2)));
        assert!(is_strongly_connected(&s72));
    }

    #[test]
    fn deep_path_scc_does_not_overflow() {
        let n = 200_000;
        let adj = (0..n).map(|v| if v + 1 < n { vec![v + 1] } else { vec![] }).collect();
        let g = Wiring::from_adjacency(1, adj).unwrap();
        assert_eq!(strongly_connected_components(&g).len(), n);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        pub(super) fn arb_wiring(max_n: usize, max_k: usize) -> impl Strategy<Value = Wiring> {
            (2..=max_n, 1..=max_k).prop_flat_map(|(n, k)| {
                let k = k.min(n - 1);
                proptest::collection::vec(
                    proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=k),
                    n,
                )
                .prop_map(move |rows| {
                    let adj = rows
                        .into_iter()
                        .enumerate()
                        .map(|(v, mut ts)| {
                            ts.retain(|&t| t != v);
                            ts
                        })
                        .collect();
                    Wiring::from_adjacency(k, adj).unwrap()
                })
            })
        }

        fn floyd_warshall(w: &Wiring) -> Vec<Vec<u64>> {
            const INF: u64 = u64::MAX / 4;
            let n = w.n();
            let mut d = vec![vec![INF; n]; n];
            for v in 0..n {
                d[v][v] = 0;
            }
            for (u, t) in w.edges() {
                d[u][t] = 1;
            }
            for m in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if d[i][m] + d[m][j] < d[i][j] {
                            d[i][j] = d[i][m] + d[m][j];
                        }
                    }
                }
            }
            d
        }

        proptest! {
            #[test]
            fn bfs_matches_floyd_warshall(w in arb_wiring(12, 3)) {
                let fw = floyd_warshall(&w);
                for v in 0..w.n() {
                    let row = single_source_distances(&w, v).unwrap();
                    for j in 0..w.n() {
                        let expect = if fw[v][j] > 1_000_000 { None } else { Some(fw[v][j] as u32) };
                        prop_assert_eq!(row.get(j), expect);
                    }
                }
            }

            #[test]
            fn triangle_and_edge_relaxation(w in arb_wiring(12, 3)) {
                let d = all_pairs_distances(&w);
                let n = w.n();
                for u in 0..n {
                    prop_assert_eq!(d.get(u, u), Some(0));
                    for v in 0..n {
                        if let Some(duv) = d.get(u, v) {
                            prop_assert!(duv as usize <= n - 1);
                            for x in 0..n {
                                if let (Some(dvx), Some(dux)) = (d.get(v, x), d.get(u, x)) {
                                    prop_assert!(dux <= duv + dvx);
                                }
                            }
                        }
                    }
                }
                for (u, t) in w.edges() {
                    for s in 0..n {
                        if let Some(dsu) = d.get(s, u) {
                            prop_assert!(d.get(s, t).unwrap() <= dsu + 1);
                        }
                    }
                }
            }

            #[test]
            fn full_reach_iff_strongly_connected(w in arb_wiring(10, 2)) {
                let n = w.n();
                let all_full = reach_all(&w).iter().all(|&r| r == n - 1);
                prop_assert_eq!(all_full, is_strongly_connected(&w));
                let cond = strongly_connected_components(&w);
                prop_assert_eq!(cond.len() == 1, all_full);
                match diameter(&w) {
                    Some(diam) => {
                        let d = all_pairs_distances(&w);
                        let m = (0..n).flat_map(|u| (0..n).map(move |v| (u, v)))
                            .filter_map(|(u, v)| d.get(u, v)).max().unwrap();
                        prop_assert_eq!(diam, m);
                    }
                    None => prop_assert!(!all_full),
                }
            }

            #[test]
            fn scc_members_mutually_reachable(w in arb_wiring(10, 2)) {
                let d = all_pairs_distances(&w);
                let cond = strongly_connected_components(&w);
                for u in 0..w.n() {
                    for v in 0..w.n() {
                        let same = cond.component_of[u] == cond.component_of[v];
                        let mutual = d.get(u, v).is_some() && d.get(v, u).is_some();
                        prop_assert_eq!(same, mutual);
                    }
                }
            }
        }
    }
}
