//! Best-response walks.
//!
//! A step is one node's turn: it computes its exact best response and
//! rewires only if that strictly lowers its cost. Round-based schedulers
//! give every node exactly one turn per round of `n` steps.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::game::{best_response, cost_vector, unstable_nodes, GameError, GameInstance};
use crate::graph::{is_strongly_connected, reach_all, GraphError, NodeId, Wiring};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("round order must be a permutation of 0..{n}")]
    BadOrder { n: usize },
    #[error("ring of {r} nodes must be longer than the path of {p} nodes (and p >= 1)")]
    BadRingPath { r: usize, p: usize },
    #[error("not strongly connected after {steps} steps")]
    NotConnected { steps: usize },
}

/// Who moves next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheduler {
    /// Fixed permutation, repeated every round.
    RoundRobin(Vec<NodeId>),
    /// Fresh seeded permutation every round.
    RoundRobinShuffled(u64),
    /// The costliest node with an improving move; highest id on ties.
    MaxCostFirst,
    /// Uniformly random node each step.
    Random(u64),
    /// Each round starts at a node nobody links to and follows out-links
    /// from there, then visits the remaining nodes in id order. On a ring
    /// with a tail this is the slow order for reaching strong connectivity.
    FollowPath,
}

impl Scheduler {
    pub fn round_robin(n: usize) -> Self {
        Scheduler::RoundRobin((0..n).collect())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheduler::RoundRobin(_) => "round-robin",
            Scheduler::RoundRobinShuffled(_) => "round-robin-shuffled",
            Scheduler::MaxCostFirst => "max-cost-first",
            Scheduler::Random(_) => "random",
            Scheduler::FollowPath => "follow-path",
        }
    }

    fn round_based(&self) -> bool {
        !matches!(self, Scheduler::MaxCostFirst | Scheduler::Random(_))
    }

    /// Shuffled, random and path-following schedules carry state beyond
    /// (wiring, position), so repeated wirings do not imply a cycle.
    fn detects_loops(&self) -> bool {
        matches!(self, Scheduler::RoundRobin(_) | Scheduler::MaxCostFirst)
    }
}

/// One strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub node: NodeId,
    pub old_targets: Vec<NodeId>,
    pub new_targets: Vec<NodeId>,
    pub old_cost: f64,
    pub new_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Every node had a turn without improving; `at_step` turns were taken.
    Stable { at_step: usize },
    /// The state after step `first_repeat_step` recurred `period` steps
    /// later.
    LoopDetected {
        first_repeat_step: usize,
        period: usize,
        deviations_per_period: usize,
    },
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Some other node's reach dropped below the deviator's new reach.
    Reach,
    /// The deviator's reach went down.
    SelfReach,
    /// A round ended without raising the minimum reach.
    RoundProgress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub node: Option<NodeId>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrace {
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    /// Turns taken in total.
    pub steps: usize,
    /// Turns taken when the wiring first became strongly connected.
    pub connectivity_step: Option<usize>,
    /// Minimum reach at the end of every `n` steps.
    pub reach_history: Vec<usize>,
    pub violations: Vec<Violation>,
    pub final_wiring: Wiring,
}

impl WalkTrace {
    pub fn deviations(&self) -> usize {
        self.records.len()
    }

    /// `step,node,old|new,old_cost,new_cost` per deviation, then one
    /// summary line starting with `#`.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        let join = |ts: &[NodeId]| ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{}|{},{},{}",
                r.step,
                r.node,
                join(&r.old_targets),
                join(&r.new_targets),
                r.old_cost,
                r.new_cost
            );
        }
        let _ = match self.termination {
            Termination::Stable { at_step } => writeln!(s, "# stable at_step={at_step}"),
            Termination::LoopDetected {
                first_repeat_step,
                period,
                deviations_per_period,
            } => writeln!(
                s,
                "# loop first_repeat_step={first_repeat_step} period={period} deviations={deviations_per_period}"
            ),
            Termination::StepLimit => writeln!(s, "# step-limit steps={}", self.steps),
        };
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkOptions {
    pub max_steps: usize,
    /// Check the reach lemmas on every step taken while disconnected.
    pub check_lemmas: bool,
    /// End the walk as soon as the wiring is strongly connected.
    pub stop_when_connected: bool,
}

impl WalkOptions {
    pub fn new(max_steps: usize) -> Self {
        WalkOptions {
            max_steps,
            check_lemmas: false,
            stop_when_connected: false,
        }
    }
}

/// One turn for `v`: the new wiring and whether `v` moved.
pub fn step(g: &GameInstance, w: &Wiring, v: NodeId) -> Result<(Wiring, bool), DynamicsError> {
    let br = best_response(g, w, v)?;
    if br.improved {
        Ok((w.with_targets(v, br.targets)?, true))
    } else {
        Ok((w.clone(), false))
    }
}

pub fn run_walk(g: &GameInstance, w0: &Wiring, sched: &Scheduler, max_steps: usize) -> Result<WalkTrace, DynamicsError> {
    run_walk_with(g, w0, sched, WalkOptions::new(max_steps))
}

pub fn run_walk_with(
    g: &GameInstance,
    w0: &Wiring,
    sched: &Scheduler,
    opts: WalkOptions,
) -> Result<WalkTrace, DynamicsError> {
    let n = g.n();
    if w0.n() != n {
        return Err(GameError::DimensionMismatch { game: n, wiring: w0.n() }.into());
    }
    if let Scheduler::RoundRobin(order) = sched {
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
            return Err(DynamicsError::BadOrder { n });
        }
    }

    let mut w = w0.clone();
    let mut rng = match sched {
        Scheduler::RoundRobinShuffled(s) | Scheduler::Random(s) => ChaCha8Rng::seed_from_u64(*s),
        _ => ChaCha8Rng::seed_from_u64(0),
    };
    let mut order: Vec<NodeId> = match sched {
        Scheduler::RoundRobin(o) => o.clone(),
        _ => (0..n).collect(),
    };
    let mut pos = 0usize;
    let mut checked = vec![false; n];
    let mut n_checked = 0usize;
    let mut records = Vec::new();
    let mut violations = Vec::new();
    let mut reach_history = Vec::new();
    let mut seen: HashMap<(Vec<Vec<NodeId>>, usize), (usize, usize)> = HashMap::new();
    let mut connected = is_strongly_connected(&w);
    let mut connectivity_step = connected.then_some(0);
    let mut round_min_reach: Option<usize> = None;
    let mut steps = 0usize;

    let termination = loop {
        if connected && opts.stop_when_connected {
            break Termination::StepLimit;
        }
        if steps >= opts.max_steps {
            break Termination::StepLimit;
        }
        if sched.round_based() && pos == 0 {
            match sched {
                Scheduler::RoundRobinShuffled(_) => order.shuffle(&mut rng),
                Scheduler::FollowPath => order = follow_path_order(&w),
                _ => {}
            }
            round_min_reach = (opts.check_lemmas && !connected && (0..n).all(|v| w.out_degree(v) > 0))
                .then(|| reach_all(&w).into_iter().min().unwrap_or(0));
        }
        let v = match sched {
            Scheduler::MaxCostFirst => {
                let unstable = unstable_nodes(g, &w)?;
                if unstable.is_empty() {
                    break Termination::Stable { at_step: steps };
                }
                let costs = cost_vector(g, &w)?;
                let mut best = unstable[0];
                for &u in &unstable[1..] {
                    if costs[u] >= costs[best] {
                        best = u;
                    }
                }
                best
            }
            Scheduler::Random(_) => rng.gen_range(0..n),
            _ => {
                let v = order[pos];
                pos = (pos + 1) % n;
                v
            }
        };

        let br = best_response(g, &w, v)?;
        if br.improved {
            let before = (opts.check_lemmas && !connected).then(|| reach_all(&w));
            let old_targets = w.targets(v).to_vec();
            w.set_targets(v, br.targets.clone())?;
            if let Some(before) = before {
                let after = reach_all(&w);
                if after[v] < before[v] {
                    violations.push(Violation { step: steps, node: Some(v), kind: ViolationKind::SelfReach });
                }
                if (0..n).any(|x| x != v && after[x] != before[x] && after[x] < after[v]) {
                    violations.push(Violation { step: steps, node: Some(v), kind: ViolationKind::Reach });
                }
            }
            records.push(StepRecord {
                step: steps,
                node: v,
                old_targets,
                new_targets: br.targets,
                old_cost: br.current_cost,
                new_cost: br.cost,
            });
            checked.iter_mut().for_each(|c| *c = false);
            n_checked = 0;
            if !connected && is_strongly_connected(&w) {
                connected = true;
                connectivity_step = Some(steps + 1);
            }
        } else if !std::mem::replace(&mut checked[v], true) {
            n_checked += 1;
        }
        steps += 1;

        if steps % n == 0 {
            let reach = reach_all(&w);
            let min = reach.iter().copied().min().unwrap_or(0);
            reach_history.push(min);
            if sched.round_based() {
                if let Some(start) = round_min_reach.take() {
                    if min < start + 1 {
                        violations.push(Violation { step: steps, node: None, kind: ViolationKind::RoundProgress });
                    }
                }
            }
        }
        if n_checked == n {
            break Termination::Stable { at_step: steps };
        }
        if br.improved && sched.detects_loops() {
            let phase = if sched.round_based() { pos } else { 0 };
            let key = (w.canonical_key(), phase);
            if let Some(&(first, devs)) = seen.get(&key) {
                break Termination::LoopDetected {
                    first_repeat_step: first,
                    period: steps - first,
                    deviations_per_period: records.len() - devs,
                };
            }
            seen.insert(key, (steps, records.len()));
        }
    };

    Ok(WalkTrace {
        records,
        termination,
        steps,
        connectivity_step,
        reach_history,
        violations,
        final_wiring: w,
    })
}

fn follow_path_order(w: &Wiring) -> Vec<NodeId> {
    let n = w.n();
    let mut indeg = vec![0usize; n];
    for (_, t) in w.edges() {
        indeg[t] += 1;
    }
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut cur = (0..n).find(|&v| indeg[v] == 0);
    while let Some(v) = cur {
        if placed[v] {
            break;
        }
        placed[v] = true;
        order.push(v);
        cur = w.targets(v).first().copied();
    }
    order.extend((0..n).filter(|&v| !placed[v]));
    order
}

/// Steps until the walk first makes the wiring strongly connected.
pub fn connectivity_convergence(
    g: &GameInstance,
    w0: &Wiring,
    sched: &Scheduler,
    max_steps: usize,
) -> Result<usize, DynamicsError> {
    let opts = WalkOptions {
        max_steps,
        check_lemmas: false,
        stop_when_connected: true,
    };
    let trace = run_walk_with(g, w0, sched, opts)?;
    trace.connectivity_step.ok_or(DynamicsError::NotConnected { steps: trace.steps })
}

/// Ring `0 -> 1 -> .. -> r-1 -> 0` plus a path `r -> r+1 -> .. -> r+p-1`
/// whose last node links into the ring at node 0.
pub fn ring_path(r: usize, p: usize) -> Result<Wiring, DynamicsError> {
    if p == 0 || r <= p {
        return Err(DynamicsError::BadRingPath { r, p });
    }
    let n = r + p;
    let adj = (0..n)
        .map(|v| match v {
            v if v < r => vec![(v + 1) % r],
            v if v + 1 < n => vec![v + 1],
            _ => vec![0],
        })
        .collect();
    Ok(Wiring::from_adjacency(1, adj)?)
}

/// Every node picks `k` distinct random targets.
pub fn random_wiring(n: usize, k: usize, seed: u64) -> Wiring {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adj = (0..n)
        .map(|v| {
            let mut others: Vec<NodeId> = (0..n).filter(|&u| u != v).collect();
            others.shuffle(&mut rng);
            others.truncate(k.min(n - 1));
            others
        })
        .collect();
    Wiring::from_adjacency(k, adj).expect("random targets are distinct")
}

/// Hamiltonian cycle `v -> v+1` plus `k - 1` random extra links per node.
pub fn cycle_plus_random(n: usize, k: usize, seed: u64) -> Wiring {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adj = (0..n)
        .map(|v| {
            let next = (v + 1) % n;
            let mut others: Vec<NodeId> = (0..n).filter(|&u| u != v && u != next).collect();
            others.shuffle(&mut rng);
            others.truncate(k.min(n - 1) - 1);
            std::iter::once(next).chain(others).collect()
        })
        .collect();
    Wiring::from_adjacency(k, adj).expect("cycle plus distinct extras")
}

/// A start wiring and round-robin order whose walk cycles forever.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopingConfig {
    pub wiring: Wiring,
    pub order: Vec<NodeId>,
    pub trace: WalkTrace,
    /// Random starts tried, this one included.
    pub attempts: usize,
}

/// Seeded search over random start wirings and round orders on the
/// uniform `(n, k)` game.
pub fn find_looping_config(n: usize, k: usize, seed: u64, budget: usize) -> Result<Option<LoopingConfig>, DynamicsError> {
    let g = GameInstance::uniform(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=budget {
        let w = random_wiring(n, k, rng.gen());
        let mut order: Vec<NodeId> = (0..n).collect();
        order.shuffle(&mut rng);
        let trace = run_walk(&g, &w, &Scheduler::RoundRobin(order.clone()), 200 * n)?;
        if matches!(trace.termination, Termination::LoopDetected { .. }) {
            return Ok(Some(LoopingConfig {
                wiring: w,
                order,
                trace,
                attempts: attempt,
            }));
        }
    }
    Ok(None)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::is_stable;
    use crate::graph::reach;

    #[test]
    fn step_examples() {
        let g = GameInstance::uniform(4, 2).unwrap();
        let (w, moved) = step(&g, &Wiring::empty(4, 2), 0).unwrap();
        assert!(moved);
        assert_eq!(w.targets(0), &[1, 2]);

        let g = GameInstance::uniform(5, 1).unwrap();
        let c = crate::graph::hamiltonian_cycle(5, 1);
        let (w, moved) = step(&g, &c, 3).unwrap();
        assert!(!moved);
        assert_eq!(w, c);
    }

    #[test]
    fn ring_path_examples() {
        let w = ring_path(4, 2).unwrap();
        assert_eq!(w.n(), 6);
        assert_eq!(reach(&w, 4).unwrap(), 5);
        for v in 0..4 {
            assert_eq!(reach(&w, v).unwrap(), 3);
        }
        assert!(ring_path(4, 4).is_err());
        assert!(ring_path(8, 8).is_err());
        assert_eq!(ring_path(9, 7).unwrap().n(), 16);
        assert!(ring_path(5, 0).is_err());
    }

    #[test]
    fn first_improving_ring_node_links_to_tail() {
        let g = GameInstance::uniform(6, 1).unwrap();
        let w = ring_path(4, 2).unwrap();
        let trace = run_walk(&g, &w, &Scheduler::FollowPath, 6).unwrap();
        let first = &trace.records[0];
        assert_eq!(first.new_targets, vec![4]);
        assert!(w.targets(first.node)[0] < 4);
    }

    #[test]
    fn stable_start_stays_put() {
        let g = GameInstance::uniform(10, 2).unwrap();
        let w = crate::construct::build_stable(10, 2).unwrap();
        let t = run_walk(&g, &w, &Scheduler::round_robin(10), 1000).unwrap();
        assert_eq!(t.termination, Termination::Stable { at_step: 10 });
        assert!(t.records.is_empty());
        assert_eq!(t.connectivity_step, Some(0));
    }

    #[test]
    fn empty_start_max_cost_first_converges() {
        let g = GameInstance::uniform(20, 2).unwrap();
        let t = run_walk(&g, &Wiring::empty(20, 2), &Scheduler::MaxCostFirst, 20_000).unwrap();
        assert!(matches!(t.termination, Termination::Stable { .. }), "{:?}", t.termination);
        assert!(is_stable(&g, &t.final_wiring).unwrap());
        assert!(t.records.iter().all(|r| r.new_cost < r.old_cost));
    }

    #[test]
    fn connectivity_from_empty_within_bound() {
        let g = GameInstance::uniform(10, 2).unwrap();
        let s = connectivity_convergence(&g, &Wiring::empty(10, 2), &Scheduler::round_robin(10), 10_000).unwrap();
        assert!(s <= 100, "{s}");
        let c = crate::graph::hamiltonian_cycle(10, 2);
        assert_eq!(connectivity_convergence(&g, &c, &Scheduler::round_robin(10), 10).unwrap(), 0);
    }

    #[test]
    fn loop_trace_replays() {
        let found = find_looping_config(7, 2, 1, 5000).unwrap().expect("a (7,2) loop");
        let Termination::LoopDetected { first_repeat_step, period, deviations_per_period } = found.trace.termination else {
            unreachable!()
        };
        assert!(deviations_per_period >= 1);
        // replay the walk and compare the wiring at both ends of the period
        let g = GameInstance::uniform(7, 2).unwrap();
        let sched = Scheduler::RoundRobin(found.order.clone());
        let a = run_walk(&g, &found.wiring, &sched, first_repeat_step).unwrap().final_wiring;
        let b = run_walk(&g, &found.wiring, &sched, first_repeat_step + period).unwrap().final_wiring;
        assert!(a.same_edges(&b));
        assert_eq!(period % 7, 0);
    }

    #[test]
    fn walks_are_deterministic() {
        let g = GameInstance::uniform(12, 2).unwrap();
        let w = random_wiring(12, 2, 9);
        for s in [Scheduler::RoundRobinShuffled(4), Scheduler::Random(4), Scheduler::MaxCostFirst] {
            let a = run_walk(&g, &w, &s, 3000).unwrap();
            let b = run_walk(&g, &w, &s, 3000).unwrap();
            assert_eq!(a.to_lines(), b.to_lines());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bad_order_rejected() {
        let g = GameInstance::uniform(4, 1).unwrap();
        let w = Wiring::empty(4, 1);
        assert!(run_walk(&g, &w, &Scheduler::RoundRobin(vec![0, 1, 1, 2]), 5).is_err());
    }

    #[test]
    fn families_have_full_degree() {
        for seed in 0..5 {
            let w = random_wiring(9, 3, seed);
            assert!((0..9).all(|v| w.out_degree(v) == 3));
            let c = cycle_plus_random(9, 3, seed);
            assert!((0..9).all(|v| c.out_degree(v) == 3 && c.targets(v)[0] == (v + 1) % 9));
        }
    }

    #[test]
    fn exponent_fit() {
        let pts: Vec<(f64, f64)> = [2.0f64, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x * x)).collect();
        assert!((fit_exponent(&pts) - 2.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn lemmas_hold_on_random_walks(n in 4usize..12, k in 1usize..3, seed in any::<u64>()) {
                let g = GameInstance::uniform(n, k).unwrap();
                let w = random_wiring(n, k, seed);
                let opts = WalkOptions { max_steps: n * n, check_lemmas: true, stop_when_connected: true };
                let t = run_walk_with(&g, &w, &Scheduler::RoundRobinShuffled(seed), opts).unwrap();
                prop_assert!(t.violations.is_empty(), "{:?}", t.violations);
                prop_assert!(t.connectivity_step.is_some());
                for r in &t.records {
                    prop_assert!(r.new_cost < r.old_cost);
                }
            }
        }
    }
}
