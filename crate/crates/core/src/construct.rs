//! Stable wirings for uniform games.
//!
//! The recipe takes the largest full k-ary tree that fits, treats the
//! leftover nodes as extra roots wired to the hubs (the root's children),
//! and spends leaf links on k-tuples of roots. A bridge leaf closes the
//! cycle back to the untupled roots. Labels are 1-based in level order:
//! the children of `x` are `k(x-1)+2 ..= k(x-1)+k+1`.
//!
//! Every wiring handed out by [`build_stable`] has passed the exact
//! stability check. When the plain recipe is not stable (tiny trees, and
//! the three-root corner) the constructor repairs it by a bounded search.

use itertools::Itertools;
use thiserror::Error;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{run_walk, DynamicsError, Scheduler, Termination};
use crate::game::{best_response, check_stability, unstable_nodes, GameError, GameInstance};
use crate::graph::{hamiltonian_cycle, GraphError, NodeId, Wiring};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructError {
    #[error("need 1 <= k < n, got n={n} k={k}")]
    BadParameters { n: usize, k: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("no stable ({n},{k}) wiring found within the search budget")]
    NotFound { n: usize, k: usize },
}

/// Shape of the tree part of the construction, in 1-based labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeLayout {
    pub n: usize,
    pub k: usize,
    /// Depth of the full tree (root at depth 0).
    pub h: usize,
    pub n_tree: usize,
    /// Nodes outside the tree.
    pub t: usize,
    /// Complete k-tuples formed from all `t + 1` roots (label 1 included).
    pub tau: usize,
    /// Roots left over after tupling.
    pub t1: usize,
}

impl TreeLayout {
    pub fn new(n: usize, k: usize) -> Result<Self, ConstructError> {
        if k == 0 || k >= n {
            return Err(ConstructError::BadParameters { n, k });
        }
        let (mut h, mut n_tree, mut level) = (0usize, 1usize, 1usize);
        loop {
            let next_level = level * k;
            if k == 1 || n_tree + next_level > n {
                break;
            }
            level = next_level;
            n_tree += level;
            h += 1;
        }
        let t = n - n_tree;
        let roots = t + 1;
        Ok(TreeLayout {
            n,
            k,
            h,
            n_tree,
            t,
            tau: roots / k,
            t1: roots % k,
        })
    }

    pub fn children(&self, x: usize) -> std::ops::RangeInclusive<usize> {
        let first = self.k * (x - 1) + 2;
        first..=first + self.k - 1
    }

    pub fn depth(&self, x: usize) -> usize {
        let (mut d, mut end, mut level) = (0, 1, 1);
        while x > end {
            level *= self.k;
            end += level;
            d += 1;
        }
        d
    }

    pub fn is_tree_node(&self, x: usize) -> bool {
        (1..=self.n_tree).contains(&x)
    }

    pub fn is_leaf(&self, x: usize) -> bool {
        self.is_tree_node(x) && self.depth(x) == self.h
    }

    pub fn hubs(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.k + 1
    }

    /// Label 1 followed by the extra roots.
    pub fn roots(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.n_tree + 1..=self.n).collect()
    }

    /// Leaves below `x`, left to right.
    pub fn leaves_under(&self, x: usize) -> std::ops::RangeInclusive<usize> {
        let (mut lo, mut hi) = (x, x);
        for _ in self.depth(x)..self.h {
            lo = *self.children(lo).start();
            hi = *self.children(hi).end();
        }
        lo..=hi
    }

    pub fn leaves(&self) -> std::ops::RangeInclusive<usize> {
        self.leaves_under(1)
    }

    /// The leaf that links back to the untupled roots, if any are left.
    pub fn bridge(&self) -> Option<usize> {
        if self.t1 == 0 {
            None
        } else if self.t == 0 {
            Some(*self.leaves().start())
        } else {
            Some(self.n_tree)
        }
    }
}

/// Which leaf feeds which root tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packing {
    /// `(leaf, tuple)` pairs in packing order.
    pub tuples: Vec<(usize, Vec<usize>)>,
    /// Roots the bridge must reach.
    pub untupled: Vec<usize>,
    /// Leaves (bridge excluded) that link to the hubs.
    pub hub_leaves: Vec<usize>,
}

/// Distributes the root k-tuples over the leaves.
///
/// Under each hub the first two child subtrees are filled alternately;
/// an odd tuple goes to the third child subtree (for k = 2, the first free
/// leaf under the next hub). Once both are full, the rest of the hub's
/// subtree is used left to right before moving to the next hub.
pub fn pack_tuples(layout: &TreeLayout) -> Packing {
    let k = layout.k;
    let bridge = layout.bridge();
    let mut used = vec![false; layout.n_tree + 1];
    if let Some(b) = bridge {
        used[b] = true;
    }
    let mut order: Vec<usize> = Vec::with_capacity(layout.tau);
    let take = |leaf: usize, used: &mut Vec<bool>, order: &mut Vec<usize>| {
        if !used[leaf] {
            used[leaf] = true;
            order.push(leaf);
            true
        } else {
            false
        }
    };
    let mut remaining = layout.tau;
    let hubs: Vec<usize> = layout.hubs().collect();
    for (hi, &x) in hubs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if layout.h < 2 {
            if take(x, &mut used, &mut order) {
                remaining -= 1;
            }
            continue;
        }
        let mut kids = layout.children(x);
        let a: Vec<usize> = layout.leaves_under(kids.next().unwrap()).filter(|&l| !used[l]).collect();
        let b: Vec<usize> = layout.leaves_under(kids.next().unwrap()).filter(|&l| !used[l]).collect();
        let cap = a.len() + b.len();
        if remaining < cap {
            let half = remaining / 2;
            // when one side is short the other absorbs the difference
            let from_a = half.max(remaining.saturating_sub(b.len())).min(a.len());
            let from_b = (remaining - remaining % 2).saturating_sub(from_a).min(b.len());
            for i in 0..from_a.max(from_b) {
                if i < from_a {
                    take(a[i], &mut used, &mut order);
                }
                if i < from_b {
                    take(b[i], &mut used, &mut order);
                }
            }
            remaining -= from_a + from_b;
            if remaining > 0 {
                let extra = odd_slot(layout, x, hubs.get(hi + 1).copied(), &used)
                    .or_else(|| layout.leaves_under(x).find(|&l| !used[l]));
                if let Some(l) = extra {
                    take(l, &mut used, &mut order);
                    remaining -= 1;
                }
            }
            // anything still left spills below
            let rest: Vec<usize> = layout.leaves_under(x).filter(|&l| !used[l]).collect();
            for l in rest.into_iter().take(remaining) {
                take(l, &mut used, &mut order);
                remaining -= 1;
            }
        } else {
            for (i, j) in a.iter().zip_longest(b.iter()).map(|p| p.left_and_right()) {
                if let Some(&l) = i {
                    take(l, &mut used, &mut order);
                }
                if let Some(&l) = j {
                    take(l, &mut used, &mut order);
                }
            }
            remaining -= cap;
            let rest: Vec<usize> = layout.leaves_under(x).filter(|&l| !used[l]).collect();
            for l in rest.into_iter().take(remaining) {
                take(l, &mut used, &mut order);
                remaining -= 1;
            }
        }
    }
    assert_eq!(remaining, 0, "more root tuples than free leaves");

    let roots = layout.roots();
    let tupled = layout.tau * k;
    let tuples: Vec<(usize, Vec<usize>)> = order
        .into_iter()
        .zip(roots[..tupled].chunks(k))
        .map(|(l, c)| (l, c.to_vec()))
        .collect();
    let hub_leaves = layout.leaves().filter(|&l| !used[l]).collect();
    Packing {
        tuples,
        untupled: roots[tupled..].to_vec(),
        hub_leaves,
    }
}

fn odd_slot(layout: &TreeLayout, x: usize, next_hub: Option<usize>, used: &[bool]) -> Option<usize> {
    if layout.k >= 3 {
        let third = layout.children(x).nth(2)?;
        layout.leaves_under(third).find(|&l| !used[l])
    } else {
        layout.leaves_under(next_hub?).find(|&l| !used[l])
    }
}

/// Number of roots fed from leaves under each hub, minus one for the hub
/// holding the bridge.
pub fn hub_weights(layout: &TreeLayout, packing: &Packing) -> Vec<(usize, i64)> {
    let bridge = layout.bridge();
    layout
        .hubs()
        .map(|x| {
            let under = layout.leaves_under(x);
            let fed = packing.tuples.iter().filter(|(l, _)| under.contains(l)).count() * layout.k;
            let minus = bridge.is_some_and(|b| under.contains(&b)) as i64;
            (x, fed as i64 - minus)
        })
        .collect()
}

/// Targets of the bridge: the untupled roots plus the heaviest hubs
/// (smaller label first on ties). `None` when every root is tupled.
pub fn bridge_wiring(layout: &TreeLayout) -> Option<(usize, Vec<usize>)> {
    let packing = pack_tuples(layout);
    bridge_targets(layout, &packing)
}

fn bridge_targets(layout: &TreeLayout, packing: &Packing) -> Option<(usize, Vec<usize>)> {
    let b = layout.bridge()?;
    let mut weights = hub_weights(layout, packing);
    weights.retain(|&(x, _)| x != b);
    weights.sort_by(|p, q| q.1.cmp(&p.1).then(p.0.cmp(&q.0)));
    let mut targets = packing.untupled.clone();
    targets.extend(weights.iter().take(layout.k - layout.t1).map(|&(x, _)| x));
    targets.sort_unstable();
    Some((b, targets))
}

/// The unverified recipe output (0-based node ids).
pub fn recipe_wiring(layout: &TreeLayout) -> Wiring {
    let k = layout.k;
    if k == 1 {
        return hamiltonian_cycle(layout.n, 1);
    }
    let packing = pack_tuples(layout);
    let hubs: Vec<usize> = layout.hubs().collect();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); layout.n + 1];
    for x in 1..=layout.n_tree {
        if !layout.is_leaf(x) {
            out[x] = layout.children(x).collect();
        }
    }
    for r in layout.roots() {
        out[r] = hubs.clone();
    }
    for (l, tuple) in &packing.tuples {
        out[*l] = tuple.clone();
    }
    for &l in &packing.hub_leaves {
        // at depth 1 a hub is its own leaf and takes root 1 instead of itself
        out[l] = hubs.iter().map(|&x| if x == l { 1 } else { x }).collect();
    }
    if let Some((b, ts)) = bridge_targets(layout, &packing) {
        out[b] = ts;
    }
    let adj = out[1..].iter().map(|ts| ts.iter().map(|&x| x - 1).collect()).collect();
    Wiring::from_adjacency(k, adj).expect("recipe produces a valid wiring")
}

/// How a stable wiring was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Recipe,
    BridgeSearch,
    Circulant,
    Walk,
    Perturb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub wiring: Wiring,
    pub method: Method,
}

/// A verified stable wiring for the uniform `(n, k)` game.
pub fn build_stable(n: usize, k: usize) -> Result<Wiring, ConstructError> {
    construct(n, k).map(|c| c.wiring)
}

pub fn construct(n: usize, k: usize) -> Result<Construction, ConstructError> {
    let layout = TreeLayout::new(n, k)?;
    let game = GameInstance::uniform(n, k)?;
    let recipe = recipe_wiring(&layout);
    let found = |wiring: Wiring, method: Method| Ok(Construction { wiring, method });
    if check_stability(&game, &recipe)?.is_stable() {
        return found(recipe, Method::Recipe);
    }
    let schedules = repair_schedules(n);
    for sched in &schedules[..3] {
        if let Some(w) = settle(&game, &recipe, sched)? {
            return found(w, Method::Walk);
        }
    }
    let jumped = joint_best_response(&game, &recipe)?;
    for sched in &schedules {
        if let Some(w) = settle(&game, &jumped, sched)? {
            return found(w, Method::Walk);
        }
    }
    if let Some(w) = settle(&game, &Wiring::empty(n, k), &Scheduler::MaxCostFirst)? {
        return found(w, Method::Walk);
    }
    if let Some(w) = perturb_search(&game, &recipe)? {
        return found(w, Method::Perturb);
    }
    if n <= CIRCULANT_SEARCH_MAX_N {
        if let Some(w) = circulant_search(&game)? {
            return found(w, Method::Circulant);
        }
    }
    if let Some(w) = bridge_search(&game, &layout, &recipe)? {
        return found(w, Method::BridgeSearch);
    }
    for sched in repair_schedules(n) {
        if let Some(w) = settle(&game, &Wiring::empty(n, k), &sched)? {
            return found(w, Method::Walk);
        }
    }
    Err(ConstructError::NotFound { n, k })
}

const CIRCULANT_SEARCH_MAX_N: usize = 16;
/// Rounds a repair walk may take before it is abandoned.
const WALK_ROUNDS: usize = 15;
/// Seeded round orders tried after the plain ones.
const SHUFFLED_ORDERS: u64 = 12;
const PERTURB_SEED: u64 = 0x5eed;
const PERTURB_TRIALS: usize = 4000;
const PERTURB_ROUNDS: usize = 30;
/// Cap on bridge candidate sets tried per leaf.
const BRIDGE_SETS: usize = 512;

/// Forward, reverse and max-cost-first walks, then seeded fixed orders.
fn repair_schedules(n: usize) -> Vec<Scheduler> {
    let mut out = vec![
        Scheduler::round_robin(n),
        Scheduler::RoundRobin((0..n).rev().collect()),
        Scheduler::MaxCostFirst,
    ];
    for seed in 0..SHUFFLED_ORDERS {
        let mut order: Vec<NodeId> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        out.push(Scheduler::RoundRobin(order));
    }
    out
}

/// Every unstable node switches to its best response at once.
fn joint_best_response(game: &GameInstance, w: &Wiring) -> Result<Wiring, ConstructError> {
    let mut out = w.clone();
    for v in unstable_nodes(game, w)? {
        out.set_targets(v, best_response(game, w, v)?.targets)?;
    }
    Ok(out)
}

/// Random rewiring of up to three nodes followed by a short round-robin
/// walk, repeated with a fixed seed.
fn perturb_search(game: &GameInstance, base: &Wiring) -> Result<Option<Wiring>, ConstructError> {
    let n = game.n();
    let k = game.max_budget();
    let mut rng = ChaCha8Rng::seed_from_u64(PERTURB_SEED);
    let sched = Scheduler::round_robin(n);
    for _ in 0..PERTURB_TRIALS {
        let mut w = base.clone();
        for _ in 0..rng.gen_range(1..=3) {
            let v = rng.gen_range(0..n);
            let mut ts: Vec<NodeId> = (0..n).filter(|&x| x != v).choose_multiple(&mut rng, k);
            ts.sort_unstable();
            w.set_targets(v, ts)?;
        }
        let trace = run_walk(game, &w, &sched, PERTURB_ROUNDS * n)?;
        if matches!(trace.termination, Termination::Stable { .. }) && check_stability(game, &trace.final_wiring)?.is_stable() {
            return Ok(Some(trace.final_wiring));
        }
    }
    Ok(None)
}

/// Runs a best-response walk and keeps its end point if it is stable.
fn settle(game: &GameInstance, start: &Wiring, sched: &Scheduler) -> Result<Option<Wiring>, ConstructError> {
    let trace = run_walk(game, start, sched, WALK_ROUNDS * game.n())?;
    if matches!(trace.termination, Termination::Stable { .. }) && check_stability(game, &trace.final_wiring)?.is_stable() {
        Ok(Some(trace.final_wiring))
    } else {
        Ok(None)
    }
}

/// Rewires the leaves that touch roots (the bridge and tuple leaves near
/// it) over targets among roots, hubs and hub children, one leaf at a time
/// and then jointly for pairs of leaves with few options.
fn bridge_search(game: &GameInstance, layout: &TreeLayout, base: &Wiring) -> Result<Option<Wiring>, ConstructError> {
    let k = layout.k;
    let mut pool: Vec<usize> = layout.roots();
    pool.extend(layout.hubs());
    if layout.h >= 2 {
        for x in layout.hubs() {
            pool.extend(layout.children(x));
        }
    }
    pool.sort_unstable();
    pool.dedup();
    let leaves: Vec<usize> = candidate_leaves(layout);
    // single leaf
    for &l in &leaves {
        let opts: Vec<Vec<usize>> = pool
            .iter()
            .copied()
            .filter(|&x| x != l)
            .combinations(k)
            .take(BRIDGE_SETS)
            .collect();
        for ts in &opts {
            let w = base.with_targets(l - 1, ts.iter().map(|&x| x - 1).collect())?;
            if check_stability(game, &w)?.is_stable() {
                return Ok(Some(w));
            }
        }
    }
    // pairs: the first leaf takes its best response after the second moved
    for (&l1, &l2) in leaves.iter().tuple_combinations() {
        for ts in pool.iter().copied().filter(|&x| x != l2).combinations(k).take(BRIDGE_SETS) {
            let w = base.with_targets(l2 - 1, ts.iter().map(|&x| x - 1).collect())?;
            let br = best_response(game, &w, l1 - 1)?;
            let w = w.with_targets(l1 - 1, br.targets)?;
            if check_stability(game, &w)?.is_stable() {
                return Ok(Some(w));
            }
        }
    }
    Ok(None)
}

/// Bridge first, then the leaves feeding root tuples, then the first and
/// last leaf under each hub.
fn candidate_leaves(layout: &TreeLayout) -> Vec<usize> {
    let packing = pack_tuples(layout);
    let mut out = Vec::new();
    out.extend(layout.bridge());
    out.extend(packing.tuples.iter().map(|(l, _)| *l));
    for x in layout.hubs() {
        let r = layout.leaves_under(x);
        out.push(*r.start());
        out.push(*r.end());
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|l| seen.insert(*l));
    out.truncate(8);
    out
}

/// Searches vertex-transitive wirings `v -> v + g` over generator sets.
fn circulant_search(game: &GameInstance) -> Result<Option<Wiring>, ConstructError> {
    let n = game.n();
    let k = game.max_budget();
    for gens in (1..n).combinations(k) {
        let adj = (0..n).map(|v| gens.iter().map(|g| (v + g) % n).collect()).collect();
        let w = Wiring::from_adjacency(k, adj)?;
        if check_stability(game, &w)?.is_stable() {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{node_cost, utopian_cost_nk};
    use crate::graph::is_strongly_connected;

    fn label(v: NodeId) -> usize {
        v + 1
    }

    #[test]
    fn layout_examples() {
        let l = TreeLayout::new(7, 2).unwrap();
        assert_eq!((l.h, l.n_tree, l.t, l.tau, l.t1), (2, 7, 0, 0, 1));
        assert_eq!(l.bridge(), Some(4));
        let l = TreeLayout::new(9, 2).unwrap();
        assert_eq!((l.h, l.n_tree, l.t), (2, 7, 2));
        assert_eq!(l.roots(), vec![1, 8, 9]);
        let l = TreeLayout::new(13, 3).unwrap();
        assert_eq!((l.h, l.n_tree, l.t, l.tau, l.t1), (2, 13, 0, 0, 1));
        assert_eq!(l.children(2).collect::<Vec<_>>(), vec![5, 6, 7]);
        assert_eq!(l.leaves_under(3).collect::<Vec<_>>(), vec![8, 9, 10]);
        for n in 2..200 {
            for k in 1..n.min(6) {
                let l = TreeLayout::new(n, k).unwrap();
                assert!(l.n_tree <= n);
                if k > 1 {
                    assert!(n < l.n_tree + k.pow(l.h as u32 + 1));
                }
                assert_eq!(l.tau * k + l.t1, l.t + 1);
                assert!(l.t1 < k);
            }
        }
    }

    #[test]
    fn seven_two_matches_reference() {
        let w = build_stable(7, 2).unwrap();
        let expect = [vec![2, 3], vec![4, 5], vec![6, 7], vec![1, 3], vec![2, 3], vec![2, 3], vec![2, 3]];
        for (v, ts) in expect.iter().enumerate() {
            let got: Vec<usize> = w.targets(v).iter().map(|&x| label(x)).collect();
            assert_eq!(&got, ts, "node {}", v + 1);
        }
        let g = GameInstance::uniform(7, 2).unwrap();
        assert_eq!(node_cost(&g, &w, 0).unwrap(), 10.0);
        for leaf in 3..7 {
            assert_eq!(node_cost(&g, &w, leaf).unwrap(), 11.0);
        }
    }

    #[test]
    fn k_one_is_the_cycle() {
        for n in 2..40 {
            assert_eq!(build_stable(n, 1).unwrap(), hamiltonian_cycle(n, 1));
        }
    }

    #[test]
    fn bad_parameters() {
        assert_eq!(build_stable(3, 3), Err(ConstructError::BadParameters { n: 3, k: 3 }));
        assert!(build_stable(5, 0).is_err());
    }

    #[test]
    fn packing_examples() {
        // no tuples: every non-bridge leaf goes to the hubs
        let l = TreeLayout::new(7, 2).unwrap();
        let p = pack_tuples(&l);
        assert!(p.tuples.is_empty());
        assert_eq!(p.hub_leaves, vec![5, 6, 7]);

        // k = 2, h = 4 (31 tree nodes), five roots: two pairs, one under
        // each child of hub 2
        let l = TreeLayout::new(35, 2).unwrap();
        assert_eq!((l.h, l.tau, l.t1), (4, 2, 1));
        let p = pack_tuples(&l);
        let sides: Vec<bool> = p.tuples.iter().map(|(x, _)| l.leaves_under(4).contains(x)).collect();
        assert_eq!(sides, vec![true, false]);
        assert!(p.tuples.iter().all(|(x, _)| l.leaves_under(2).contains(x)));

        // k = 3, three tuples: two split under hub 2's first two children,
        // the odd one under its third child
        let l = TreeLayout::new(13 + 8, 3).unwrap();
        assert_eq!(l.tau, 3);
        let p = pack_tuples(&l);
        let homes: Vec<usize> = p
            .tuples
            .iter()
            .map(|(x, _)| l.children(2).find(|&c| l.leaves_under(c).contains(x)).unwrap())
            .collect();
        assert_eq!(homes, vec![5, 6, 7]);
    }

    #[test]
    fn bridge_examples() {
        let l = TreeLayout::new(7, 2).unwrap();
        assert_eq!(bridge_wiring(&l), Some((4, vec![1, 3])));
        // t1 = 1, k = 3: one root and two hubs
        let l = TreeLayout::new(16, 3).unwrap();
        assert_eq!(l.t1, 1);
        let (b, ts) = bridge_wiring(&l).unwrap();
        assert_eq!(b, l.n_tree);
        assert_eq!(ts.iter().filter(|&&x| x == 1 || x > l.n_tree).count(), 1);
        assert_eq!(ts.iter().filter(|&&x| l.hubs().contains(&x)).count(), 2);
        // all roots tupled: no bridge
        let l = TreeLayout::new(8, 2).unwrap();
        assert_eq!(l.t1, 0);
        assert_eq!(bridge_wiring(&l), None);
    }

    #[test]
    fn nine_two_is_stable() {
        let g = GameInstance::uniform(9, 2).unwrap();
        let w = build_stable(9, 2).unwrap();
        assert!(check_stability(&g, &w).unwrap().is_stable());
    }

    #[test]
    fn structure_on_small_grid() {
        for k in 2..=3 {
            for n in k + 1..=24 {
                let w = build_stable(n, k).unwrap();
                assert!(is_strongly_connected(&w), "({n},{k})");
                assert!((0..n).all(|v| w.out_degree(v) == k.min(n - 1)));
                let l = TreeLayout::new(n, k).unwrap();
                if l.t == 0 {
                    let g = GameInstance::uniform(n, k).unwrap();
                    assert_eq!(node_cost(&g, &w, 0).unwrap(), utopian_cost_nk(n, k) as f64);
                }
            }
        }
    }

    #[test]
    #[ignore]
    fn recipe_report() {
        for (k, hi) in [(2usize, 120usize), (3, 50), (4, 30), (5, 30)] {
            let mut bad = Vec::new();
            for n in k + 1..=hi {
                let l = TreeLayout::new(n, k).unwrap();
                let g = GameInstance::uniform(n, k).unwrap();
                if !check_stability(&g, &recipe_wiring(&l)).unwrap().is_stable() {
                    bad.push(n);
                }
            }
            println!("k={k} recipe unstable at {bad:?}");
        }
    }
}
