//! Game semantics: weighted distance costs with a disconnection penalty,
//! exact best responses and pure-Nash stability checks.
//!
//! A node's best response against the residual wiring (its own out-links
//! removed) is a k-median problem: choosing target set `S` makes the node's
//! distance to `j` equal to `min_{t in S} 1 + d_res(t, j)`. The solver
//! enumerates target sets in lexicographic order with a suffix-minimum lower
//! bound, so the answer is always exact.

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{all_pairs_with_cut, Bfs, DistanceMatrix, GraphError, NodeId, Wiring, UNREACHABLE};

/// Default disconnection penalty is `PENALTY_FACTOR * n`.
pub const PENALTY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("wiring has {wiring} nodes but the game has {game}")]
    DimensionMismatch { game: usize, wiring: usize },
    #[error("invalid game instance: {0}")]
    Invalid(String),
    #[error("utopian cost is only defined for uniform games")]
    NotUniform,
    #[error("node {0} has no legal target")]
    NoLegalTarget(NodeId),
}

/// A BDNF game: budgets, preference weights, allowed targets and penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    n: usize,
    budgets: Vec<usize>,
    weights: Vec<f64>,
    allowed: Vec<Vec<NodeId>>,
    penalty: f64,
    uniform_k: Option<usize>,
}

impl GameInstance {
    /// The uniform `(n, k)` game: all weights 1, every target allowed.
    pub fn uniform(n: usize, k: usize) -> Result<Self, GameError> {
        Self::uniform_with_penalty(n, k, PENALTY_FACTOR * n as f64)
    }

    pub fn uniform_with_penalty(n: usize, k: usize, penalty: f64) -> Result<Self, GameError> {
        if n < 2 || k == 0 || k >= n {
            return Err(GameError::Invalid(format!(
                "uniform game needs n >= 2 and 1 <= k < n, got n={n} k={k}"
            )));
        }
        let mut weights = vec![1.0; n * n];
        for v in 0..n {
            weights[v * n + v] = 0.0;
        }
        let g = GameInstance {
            n,
            budgets: vec![k; n],
            weights,
            allowed: full_targets(n),
            penalty,
            uniform_k: Some(k),
        };
        g.validate()?;
        Ok(g)
    }

    /// General instance. `allowed = None` means every other node is allowed
    /// (a symmetric game).
    pub fn new(
        budgets: Vec<usize>,
        weights: Vec<Vec<f64>>,
        allowed: Option<Vec<Vec<NodeId>>>,
        penalty: f64,
    ) -> Result<Self, GameError> {
        let n = budgets.len();
        if weights.len() != n || weights.iter().any(|r| r.len() != n) {
            return Err(GameError::Invalid(format!("weights must be {n} x {n}")));
        }
        let allowed = match allowed {
            Some(mut a) => {
                if a.len() != n {
                    return Err(GameError::Invalid(format!("allowed sets must have {n} rows")));
                }
                for row in &mut a {
                    row.sort_unstable();
                    row.dedup();
                }
                a
            }
            None => full_targets(n),
        };
        let mut g = GameInstance {
            n,
            budgets,
            weights: weights.into_iter().flatten().collect(),
            allowed,
            penalty,
            uniform_k: None,
        };
        g.validate()?;
        g.uniform_k = g.detect_uniform();
        Ok(g)
    }

    pub fn with_penalty(mut self, penalty: f64) -> Result<Self, GameError> {
        self.penalty = penalty;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), GameError> {
        let n = self.n;
        if !(self.penalty.is_finite() && self.penalty > n as f64) {
            return Err(GameError::Invalid(format!(
                "penalty must be finite and exceed n={n}, got {}",
                self.penalty
            )));
        }
        for v in 0..n {
            if self.budgets[v] == 0 {
                return Err(GameError::Invalid(format!("node {v} has zero budget")));
            }
            for u in 0..n {
                let x = self.weights[v * n + u];
                if !(x.is_finite() && x >= 0.0) {
                    return Err(GameError::Invalid(format!("weight w[{v}][{u}] = {x} is not a finite non-negative number")));
                }
            }
            if self.weights[v * n + v] != 0.0 {
                return Err(GameError::Invalid(format!("w[{v}][{v}] must be 0")));
            }
            let a = &self.allowed[v];
            if let Some(&bad) = a.iter().find(|&&u| u >= n || u == v) {
                return Err(GameError::Invalid(format!("node {v} allows illegal target {bad}")));
            }
            if a.len() < self.budgets[v] {
                return Err(GameError::Invalid(format!(
                    "node {v} allows {} targets but has budget {}",
                    a.len(),
                    self.budgets[v]
                )));
            }
        }
        Ok(())
    }

    fn detect_uniform(&self) -> Option<usize> {
        let k = self.budgets[0];
        let n = self.n;
        let uniform = self.budgets.iter().all(|&b| b == k)
            && (0..n).all(|v| {
                self.allowed[v].len() == n - 1
                    && (0..n).all(|u| u == v || self.weights[v * n + u] == 1.0)
            });
        uniform.then_some(k)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn budget(&self, v: NodeId) -> usize {
        self.budgets[v]
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    /// Largest budget; the `k` used for wirings of this game.
    pub fn max_budget(&self) -> usize {
        self.budgets.iter().copied().max().unwrap_or(0)
    }

    pub fn weight(&self, v: NodeId, u: NodeId) -> f64 {
        self.weights[v * self.n + u]
    }

    pub fn weight_row(&self, v: NodeId) -> &[f64] {
        &self.weights[v * self.n..(v + 1) * self.n]
    }

    pub fn allowed(&self, v: NodeId) -> &[NodeId] {
        &self.allowed[v]
    }

    pub fn is_symmetric(&self) -> bool {
        self.allowed.iter().all(|a| a.len() + 1 == self.n)
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// `Some(k)` for the uniform `(n, k)` game.
    pub fn uniform_k(&self) -> Option<usize> {
        self.uniform_k
    }

    /// Number of links a full-budget strategy of `v` uses.
    pub fn required_degree(&self, v: NodeId) -> usize {
        self.budgets[v].min(self.allowed[v].len())
    }

    /// True when `targets` is a full-budget legal strategy for `v`.
    pub fn is_legal_strategy(&self, v: NodeId, targets: &[NodeId]) -> bool {
        targets.len() == self.required_degree(v)
            && targets.iter().enumerate().all(|(i, t)| {
                self.allowed[v].binary_search(t).is_ok() && !targets[..i].contains(t)
            })
    }

    pub(crate) fn check_wiring(&self, w: &Wiring) -> Result<(), GameError> {
        if w.n() != self.n {
            return Err(GameError::DimensionMismatch {
                game: self.n,
                wiring: w.n(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_node(&self, v: NodeId) -> Result<(), GameError> {
        if v >= self.n {
            return Err(GraphError::NodeOutOfRange { node: v, n: self.n }.into());
        }
        Ok(())
    }
}

fn full_targets(n: usize) -> Vec<Vec<NodeId>> {
    (0..n).map(|v| (0..n).filter(|&u| u != v).collect()).collect()
}

/// Tolerance used for every "strictly better" comparison on costs.
pub(crate) fn improves(new: f64, old: f64) -> bool {
    new < old - tolerance(old)
}

fn tolerance(x: f64) -> f64 {
    if x.is_finite() {
        1e-9 * x.abs().max(1.0)
    } else {
        0.0
    }
}

/// `c_v(s) = sum_j w_vj * d_s(v, j)`, with the penalty for unreachable `j`.
pub fn node_cost(g: &GameInstance, w: &Wiring, v: NodeId) -> Result<f64, GameError> {
    g.check_wiring(w)?;
    g.check_node(v)?;
    let mut dist = vec![UNREACHABLE; g.n];
    Bfs::default().run(w.adjacency(), v, None, &mut dist);
    Ok(cost_from_row(g, v, &dist))
}

fn cost_from_row(g: &GameInstance, v: NodeId, dist: &[u32]) -> f64 {
    let mut total = 0.0;
    for (j, &wt) in g.weight_row(v).iter().enumerate() {
        if wt == 0.0 || j == v {
            continue;
        }
        let d = if dist[j] == UNREACHABLE { g.penalty } else { dist[j] as f64 };
        total += wt * d;
    }
    total
}

/// Cost of every node.
pub fn cost_vector(g: &GameInstance, w: &Wiring) -> Result<Vec<f64>, GameError> {
    g.check_wiring(w)?;
    let mut dist = vec![UNREACHABLE; g.n];
    let mut bfs = Bfs::default();
    Ok((0..g.n)
        .map(|v| {
            bfs.run(w.adjacency(), v, None, &mut dist);
            cost_from_row(g, v, &dist)
        })
        .collect())
}

pub fn social_cost(g: &GameInstance, w: &Wiring) -> Result<f64, GameError> {
    Ok(cost_vector(g, w)?.iter().sum())
}

/// Layered lower bound on the total distance of a node with budget `k` in
/// an `n`-node uniform game: `k` nodes at distance 1, `k^2` at 2, and so on.
pub fn utopian_cost_nk(n: usize, k: usize) -> u64 {
    let mut left = n.saturating_sub(1) as u64;
    let mut layer = k as u64;
    let mut depth = 1u64;
    let mut total = 0u64;
    while left > 0 && layer > 0 {
        let take = layer.min(left);
        total += take * depth;
        left -= take;
        depth += 1;
        layer = layer.saturating_mul(k as u64);
    }
    total
}

pub fn utopian_cost(g: &GameInstance, v: NodeId) -> Result<f64, GameError> {
    g.check_node(v)?;
    let k = g.uniform_k.ok_or(GameError::NotUniform)?;
    Ok(utopian_cost_nk(g.n, k) as f64)
}

/// All-pairs distances in the wiring with `v`'s out-edges deleted.
pub fn residual_distances(g: &GameInstance, w: &Wiring, v: NodeId) -> Result<DistanceMatrix, GameError> {
    g.check_wiring(w)?;
    g.check_node(v)?;
    Ok(all_pairs_with_cut(w.adjacency(), Some(v)))
}

/// Outcome of a best-response computation for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub node: NodeId,
    /// Sorted target set of size `required_degree(node)`.
    pub targets: Vec<NodeId>,
    pub cost: f64,
    /// Cost under the wiring the response was computed against.
    pub current_cost: f64,
    /// True iff `cost` is strictly below `current_cost`.
    pub improved: bool,
}

/// Exact best response of `v`.
///
/// Ties prefer the node's current target set when it is a legal full-budget
/// strategy attaining the optimum; otherwise the lexicographically smallest
/// optimal set wins.
pub fn best_response(g: &GameInstance, w: &Wiring, v: NodeId) -> Result<BestResponse, GameError> {
    g.check_wiring(w)?;
    g.check_node(v)?;
    let mut scratch = Scratch::default();
    best_response_with(g, w, v, &mut scratch)
}

#[derive(Default)]
pub(crate) struct Scratch {
    bfs: Bfs,
    dist: Vec<u32>,
    cols: Vec<f64>,
    dests: Vec<(usize, f64)>,
}

pub(crate) fn best_response_with(
    g: &GameInstance,
    w: &Wiring,
    v: NodeId,
    s: &mut Scratch,
) -> Result<BestResponse, GameError> {
    let cands = g.allowed(v);
    if cands.is_empty() {
        return Err(GameError::NoLegalTarget(v));
    }
    let size = g.required_degree(v);
    let n = g.n;
    let m = g.penalty;

    s.dests.clear();
    s.dests.extend(
        g.weight_row(v)
            .iter()
            .enumerate()
            .filter(|&(j, &wt)| j != v && wt > 0.0)
            .map(|(j, &wt)| (j, wt)),
    );
    let dn = s.dests.len();
    s.cols.clear();
    s.cols.resize(cands.len() * dn, 0.0);
    s.dist.resize(n, UNREACHABLE);
    if dn > 0 {
        for (ci, &t) in cands.iter().enumerate() {
            s.bfs.run(w.adjacency(), t, Some(v), &mut s.dist);
            let col = &mut s.cols[ci * dn..(ci + 1) * dn];
            for (slot, &(j, wt)) in col.iter_mut().zip(s.dests.iter()) {
                let d = s.dist[j];
                *slot = if d == UNREACHABLE { wt * m } else { wt * (d as f64 + 1.0) };
            }
        }
    }
    let problem = MedianProblem::new(&s.cols, cands.len(), dn, size);

    // Candidate indices of the current strategy, when it is legal.
    let mut current_idx: Option<Vec<usize>> = None;
    if g.is_legal_strategy(v, w.targets(v)) {
        let mut idx: Vec<usize> = w
            .targets(v)
            .iter()
            .map(|t| cands.binary_search(t).expect("legal target"))
            .collect();
        idx.sort_unstable();
        current_idx = Some(idx);
    }

    let (targets, cost, current_cost, improved) = match current_idx {
        Some(idx) => {
            let current = problem.cost_of(&idx);
            match problem.solve(Some(current)) {
                Some((best, c)) => (best, c, current, true),
                None => (idx, current, current, false),
            }
        }
        None => {
            let (best, c) = problem.solve(None).expect("unbounded search always yields a set");
            s.bfs.run(w.adjacency(), v, None, &mut s.dist);
            let current = cost_from_row(g, v, &s.dist);
            (best, c, current, improves(c, current))
        }
    };
    Ok(BestResponse {
        node: v,
        targets: targets.into_iter().map(|i| cands[i]).collect(),
        cost,
        current_cost,
        improved,
    })
}

/// Exact min-sum k-median over precomputed assignment costs.
struct MedianProblem<'a> {
    cols: &'a [f64],
    cands: usize,
    dests: usize,
    size: usize,
    /// `suffix[i * dests + j]` = min over candidates `>= i` of column `j`.
    suffix: Vec<f64>,
}

impl<'a> MedianProblem<'a> {
    fn new(cols: &'a [f64], cands: usize, dests: usize, size: usize) -> Self {
        let mut suffix = vec![f64::INFINITY; (cands + 1) * dests];
        for i in (0..cands).rev() {
            for j in 0..dests {
                suffix[i * dests + j] = suffix[(i + 1) * dests + j].min(cols[i * dests + j]);
            }
        }
        MedianProblem {
            cols,
            cands,
            dests,
            size,
            suffix,
        }
    }

    fn col(&self, i: usize) -> &[f64] {
        &self.cols[i * self.dests..(i + 1) * self.dests]
    }

    fn cost_of(&self, idx: &[usize]) -> f64 {
        (0..self.dests)
            .map(|j| idx.iter().map(|&i| self.cols[i * self.dests + j]).fold(f64::INFINITY, f64::min))
            .fold(0.0, |acc, x| acc + if x.is_finite() { x } else { 0.0 })
    }

    /// Lexicographically first set whose cost is strictly below `incumbent`
    /// and minimal; `None` if no set beats the incumbent.
    fn solve(&self, incumbent: Option<f64>) -> Option<(Vec<usize>, f64)> {
        let mut st = SearchState {
            best: incumbent.unwrap_or(f64::INFINITY),
            best_set: None,
            chosen: Vec::with_capacity(self.size),
            levels: vec![vec![f64::INFINITY; self.dests]; self.size + 1],
        };
        if self.dests == 0 {
            // every set costs 0
            return match incumbent {
                Some(_) => None,
                None => Some(((0..self.size).collect(), 0.0)),
            };
        }
        self.dfs(0, 0, &mut st);
        st.best_set.map(|s| (s, st.best))
    }

    fn dfs(&self, start: usize, depth: usize, st: &mut SearchState) {
        let need = self.size - depth;
        if start + need > self.cands {
            return;
        }
        let last = self.cands - need;
        for i in start..=last {
            let threshold = st.best - tolerance(st.best);
            let (cur, rest) = st.levels.split_at_mut(depth + 1);
            let cur = &cur[depth];
            let suffix = &self.suffix[i * self.dests..(i + 1) * self.dests];
            let bound: f64 = cur.iter().zip(suffix).map(|(a, b)| a.min(*b)).sum();
            // the bound only grows with i
            if !(bound < threshold) {
                break;
            }
            let col = self.col(i);
            if need == 1 {
                let cost: f64 = cur.iter().zip(col).map(|(a, b)| a.min(*b)).sum();
                if cost < threshold {
                    st.best = cost;
                    let mut set = st.chosen.clone();
                    set.push(i);
                    st.best_set = Some(set);
                }
            } else {
                let next = &mut rest[0];
                for ((nx, a), b) in next.iter_mut().zip(cur).zip(col) {
                    *nx = a.min(*b);
                }
                st.chosen.push(i);
                self.dfs(i + 1, depth + 1, st);
                st.chosen.pop();
            }
        }
    }
}

struct SearchState {
    best: f64,
    best_set: Option<Vec<usize>>,
    chosen: Vec<usize>,
    levels: Vec<Vec<f64>>,
}

/// A unilateral rewiring that strictly lowers the deviator's cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub node: NodeId,
    pub from: Vec<NodeId>,
    pub to: Vec<NodeId>,
    pub old_cost: f64,
    pub new_cost: f64,
}

impl Deviation {
    /// Re-applies the deviation to `w` and recomputes both costs by plain
    /// BFS. True iff the replay confirms a strict improvement.
    pub fn replay(&self, g: &GameInstance, w: &Wiring) -> Result<bool, GameError> {
        let before = node_cost(g, w, self.node)?;
        let after_w = w.with_targets(self.node, self.to.clone())?;
        let after = node_cost(g, &after_w, self.node)?;
        Ok(g.is_legal_strategy(self.node, &self.to) && improves(after, before))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stability {
    Stable,
    Unstable(Deviation),
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }

    pub fn witness(&self) -> Option<&Deviation> {
        match self {
            Stability::Stable => None,
            Stability::Unstable(d) => Some(d),
        }
    }
}

/// Pure-Nash check. On failure the witness is the improving best response
/// of the lowest-numbered unstable node, independent of thread scheduling.
pub fn check_stability(g: &GameInstance, w: &Wiring) -> Result<Stability, GameError> {
    g.check_wiring(w)?;
    let found = (0..g.n).into_par_iter().find_map_first(|v| {
        let mut s = Scratch::default();
        let br = best_response_with(g, w, v, &mut s).ok()?;
        br.improved.then(|| Deviation {
            node: v,
            from: w.targets(v).to_vec(),
            to: br.targets,
            old_cost: br.current_cost,
            new_cost: br.cost,
        })
    });
    Ok(match found {
        Some(d) => Stability::Unstable(d),
        None => Stability::Stable,
    })
}

pub fn is_stable(g: &GameInstance, w: &Wiring) -> Result<bool, GameError> {
    Ok(check_stability(g, w)?.is_stable())
}

/// Nodes whose best response strictly improves on their current cost.
pub fn unstable_nodes(g: &GameInstance, w: &Wiring) -> Result<Vec<NodeId>, GameError> {
    g.check_wiring(w)?;
    let flags: Vec<bool> = (0..g.n)
        .into_par_iter()
        .map(|v| {
            let mut s = Scratch::default();
            best_response_with(g, w, v, &mut s).map(|b| b.improved).unwrap_or(false)
        })
        .collect();
    Ok(flags.iter().enumerate().filter(|(_, &f)| f).map(|(v, _)| v).collect())
}
