//! Non-uniform instances without pure equilibria, the 3-CNF reduction, and
//! exhaustive equilibrium search over small profile spaces.
//!
//! Two sub-gadgets (0 and 1) each have a central node C, two tops LT/RT
//! and two bottoms LB/RB, plus one shared extra node. Tops are wired
//! across (0LT->1RB, 0RT->1LB, 1LT->0LB, 1RT->0RB), centrals pick one of
//! their own tops, bottoms pick their own central or the extra node. The
//! centrals end up playing matching pennies: whichever central can reach
//! the other one is the one that wants to flip.

use std::fmt;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::game::{best_response_with, GameError, GameInstance, Scratch};
use crate::graph::{Bfs, GraphError, NodeId, Wiring, UNREACHABLE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GadgetError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("profile space has {profiles} profiles, budget is {budget}")]
    BudgetExceeded { profiles: u128, budget: u128 },
    #[error("malformed formula: {0}")]
    Formula(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Position of a node inside a gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    C0,
    LT0,
    RT0,
    LB0,
    RB0,
    C1,
    LT1,
    RT1,
    LB1,
    RB1,
    Extra,
    /// Absorbs the extra links of the k = 2 lift.
    Sink,
}

impl Role {
    /// The eleven gadget roles in node-id order.
    pub const GADGET: [Role; 11] = [
        Role::C0,
        Role::LT0,
        Role::RT0,
        Role::LB0,
        Role::RB0,
        Role::C1,
        Role::LT1,
        Role::RT1,
        Role::LB1,
        Role::RB1,
        Role::Extra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::C0 => "0C",
            Role::LT0 => "0LT",
            Role::RT0 => "0RT",
            Role::LB0 => "0LB",
            Role::RB0 => "0RB",
            Role::C1 => "1C",
            Role::LT1 => "1LT",
            Role::RT1 => "1RT",
            Role::LB1 => "1LB",
            Role::RB1 => "1RB",
            Role::Extra => "X",
            Role::Sink => "S",
        }
    }

    /// Node id inside an 11-node gadget starting at id 0.
    pub fn id(self) -> NodeId {
        Role::GADGET.iter().position(|&r| r == self).expect("gadget role")
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the extra node's single link goes. Through a central or a top the
/// extra node gives bottoms a second way to reach what they want, which
/// creates equilibria. 0LB is the first target in id order that keeps the
/// restricted gadget equilibrium-free.
pub const EXTRA_TARGET: Role = Role::LB0;

const TOP_LINKS: [(Role, Role); 4] = [
    (Role::LT0, Role::RB1),
    (Role::RT0, Role::LB1),
    (Role::LT1, Role::LB0),
    (Role::RT1, Role::RB0),
];

/// (bottom, own central, cross-over top)
const BOTTOMS: [(Role, Role, Role); 4] = [
    (Role::LB0, Role::C0, Role::RT0),
    (Role::RB0, Role::C0, Role::LT0),
    (Role::LB1, Role::C1, Role::RT1),
    (Role::RB1, Role::C1, Role::LT1),
];

/// Gadget weights and disconnection penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GadgetParams {
    pub delta: f64,
    pub zeta: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub penalty: f64,
}

impl GadgetParams {
    /// `beta = gamma + eps`, `alpha = beta + gamma (M-2)/(M-1) - eps`,
    /// with `delta = 1`, `zeta = 2`, `xi = 1`.
    pub fn new(penalty: f64, gamma: f64, eps: f64) -> Result<Self, GadgetError> {
        if !(penalty.is_finite() && penalty > 2.0) {
            return Err(GadgetError::Params(format!("penalty must exceed 2, got {penalty}")));
        }
        let ratio = (penalty - 2.0) / (penalty - 1.0);
        if !(gamma > 0.0 && eps > 0.0 && eps < ratio * gamma) {
            return Err(GadgetError::Params(format!(
                "need gamma > 0 and 0 < eps < gamma (M-2)/(M-1) = {}, got gamma={gamma} eps={eps}",
                ratio * gamma
            )));
        }
        let beta = gamma + eps;
        let p = GadgetParams {
            delta: 1.0,
            zeta: 2.0,
            xi: 1.0,
            alpha: beta + ratio * gamma - eps,
            beta,
            gamma,
            penalty,
        };
        p.check()?;
        Ok(p)
    }

    pub fn with_penalty(penalty: f64) -> Result<Self, GadgetError> {
        Self::new(penalty, 1.0, 0.5)
    }

    /// The weight inequalities every gadget relies on.
    pub fn check(&self) -> Result<(), GadgetError> {
        let m = self.penalty;
        let ok = [
            (self.xi < self.zeta, "xi < zeta"),
            (self.alpha > self.gamma, "alpha > gamma"),
            (self.alpha > self.beta, "alpha > beta"),
            (
                self.alpha * (m - 1.0) < self.beta * (m - 1.0) + self.gamma * (m - 2.0),
                "alpha (M-1) < beta (M-1) + gamma (M-2)",
            ),
            (self.delta > 0.0 && self.xi > 0.0, "delta, xi > 0"),
        ];
        match ok.iter().find(|(holds, _)| !holds) {
            Some((_, what)) => Err(GadgetError::Params(format!("violated: {what}"))),
            None => Ok(()),
        }
    }
}

/// A gadget game together with the role of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct GadgetInstance {
    pub game: GameInstance,
    pub roles: Vec<Role>,
    pub params: GadgetParams,
    /// Target of the extra node.
    pub extra: Role,
}

impl GadgetInstance {
    pub fn node(&self, role: Role) -> NodeId {
        self.roles.iter().position(|&r| r == role).expect("role present")
    }

    /// Every node's strategies inside the gadget wiring rules: tops and
    /// the extra node fixed, centrals over own tops, bottoms over own
    /// central and the extra node. Lifted gadgets add the sink to each.
    pub fn natural_space(&self) -> Vec<Vec<Strategy>> {
        let sink = self.roles.iter().position(|&r| r == Role::Sink);
        let with_sink = |mut s: Strategy| {
            if let Some(x) = sink {
                s.push(x);
                s.sort_unstable();
            }
            s
        };
        self.roles
            .iter()
            .enumerate()
            .map(|(v, &r)| match r {
                Role::Sink => vec![self.game.allowed(v).to_vec()],
                _ => natural_targets(r, self.extra).into_iter().map(|t| with_sink(vec![t.id()])).collect(),
            })
            .collect()
    }

    /// 0C on 0LT, 1C on 1RT, bottoms settled against that.
    pub fn start_profile(&self) -> Wiring {
        let space = self.natural_space();
        let adj = self
            .roles
            .iter()
            .enumerate()
            .map(|(v, &r)| {
                let pick = match r {
                    Role::C0 => Role::LT0,
                    Role::C1 => Role::RT1,
                    Role::RB0 => Role::C0,
                    Role::LB1 => Role::C1,
                    Role::LB0 | Role::RB1 => Role::Extra,
                    _ => return space[v][0].clone(),
                };
                space[v].iter().find(|s| s.contains(&pick.id())).expect("pick is natural").clone()
            })
            .collect();
        Wiring::from_adjacency(self.game.max_budget(), adj).expect("start profile is a valid wiring")
    }
}

fn natural_targets(r: Role, extra: Role) -> Vec<Role> {
    match r {
        Role::C0 => vec![Role::LT0, Role::RT0],
        Role::C1 => vec![Role::LT1, Role::RT1],
        Role::Extra => vec![extra],
        Role::Sink => vec![],
        _ => {
            if let Some(&(_, t)) = TOP_LINKS.iter().find(|(s, _)| *s == r) {
                vec![t]
            } else {
                let &(_, c, _) = BOTTOMS.iter().find(|(b, _, _)| *b == r).expect("bottom role");
                vec![c, Role::Extra]
            }
        }
    }
}

/// Weight rows for the 11 gadget nodes, sized `n`.
fn gadget_weights(p: &GadgetParams, n: usize, extra: Role, pin_extra: bool) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for (top, target) in TOP_LINKS {
        w[top.id()][target.id()] = p.delta;
    }
    for (c, tops, other) in [
        (Role::C0, [Role::LT0, Role::RT0], Role::C1),
        (Role::C1, [Role::LT1, Role::RT1], Role::C0),
    ] {
        for t in tops {
            w[c.id()][t.id()] = p.zeta;
        }
        w[c.id()][other.id()] = p.xi;
    }
    for (b, c, cross) in BOTTOMS {
        w[b.id()][Role::Extra.id()] = p.alpha;
        w[b.id()][c.id()] = p.beta;
        w[b.id()][cross.id()] = p.gamma;
    }
    if pin_extra {
        w[Role::Extra.id()][extra.id()] = p.delta;
    }
    w
}

fn gadget_allowed(extra: Role) -> Vec<Vec<NodeId>> {
    Role::GADGET.iter().map(|&r| natural_targets(r, extra).iter().map(|t| t.id()).collect()).collect()
}

/// The 11-node, k = 1 gadget with restricted strategy sets. `m` is the
/// disconnection penalty.
pub fn asymmetric_gadget(m: f64) -> Result<GadgetInstance, GadgetError> {
    asymmetric_with_extra(m, EXTRA_TARGET)
}

fn asymmetric_with_extra(m: f64, extra: Role) -> Result<GadgetInstance, GadgetError> {
    if !(m > 11.0) {
        return Err(GadgetError::Params(format!("penalty must exceed 11, got {m}")));
    }
    let params = GadgetParams::with_penalty(m)?;
    let game =
        GameInstance::new(vec![1; 11], gadget_weights(&params, 11, extra, false), Some(gadget_allowed(extra)), m)?;
    Ok(GadgetInstance { game, roles: Role::GADGET.to_vec(), params, extra })
}

/// The same gadget with every target allowed; the wiring rules are
/// carried by the weights alone. The extra node is pinned by a weight on
/// its target.
pub fn symmetric_gadget(m: f64, gamma: f64, eps: f64) -> Result<GadgetInstance, GadgetError> {
    symmetric_with_extra(m, gamma, eps, EXTRA_TARGET)
}

fn symmetric_with_extra(m: f64, gamma: f64, eps: f64, extra: Role) -> Result<GadgetInstance, GadgetError> {
    if !(m > 11.0) {
        return Err(GadgetError::Params(format!("penalty must exceed 11, got {m}")));
    }
    let params = GadgetParams::new(m, gamma, eps)?;
    let game = GameInstance::new(vec![1; 11], gadget_weights(&params, 11, extra, true), None, m)?;
    Ok(GadgetInstance { game, roles: Role::GADGET.to_vec(), params, extra })
}

/// k = 2 version on 13 nodes: every gadget node must also spend a link on
/// sink S1, which sits on a two-cycle with S2 and leads nowhere else.
pub fn lifted_gadget(m: f64) -> Result<GadgetInstance, GadgetError> {
    let base = asymmetric_gadget(m)?;
    let n = 13;
    let (s1, s2) = (11, 12);
    let mut weights = gadget_weights(&base.params, n, base.extra, false);
    // far above anything the gadget weights can add up to
    let pin = 1e3 * m;
    let mut allowed = gadget_allowed(base.extra);
    for (v, row) in allowed.iter_mut().enumerate() {
        row.push(s1);
        weights[v][s1] = pin;
    }
    allowed.push(vec![s2]);
    allowed.push(vec![s1]);
    let mut budgets = vec![2; 11];
    budgets.extend([1, 1]);
    let game = GameInstance::new(budgets, weights, Some(allowed), m)?;
    let mut roles = Role::GADGET.to_vec();
    roles.extend([Role::Sink, Role::Sink]);
    Ok(GadgetInstance { game, roles, params: base.params, extra: base.extra })
}

/// One node's strategy: a sorted target set.
pub type Strategy = Vec<NodeId>;

/// All legal strategies of `v`: subsets of its allowed targets of the
/// required size.
pub fn legal_strategies(g: &GameInstance, v: NodeId) -> Vec<Strategy> {
    g.allowed(v).iter().copied().combinations(g.required_degree(v)).collect()
}

pub fn full_space(g: &GameInstance) -> Vec<Vec<Strategy>> {
    (0..g.n()).map(|v| legal_strategies(g, v)).collect()
}

/// Number of profiles in a product space (saturating).
pub fn space_size(space: &[Vec<Strategy>]) -> u128 {
    space.iter().fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
}

/// Mixed-radix decoding, node 0 most significant.
fn decode(space: &[Vec<Strategy>], k: usize, mut idx: u128) -> Wiring {
    let mut adj = vec![Vec::new(); space.len()];
    for v in (0..space.len()).rev() {
        let r = space[v].len() as u128;
        adj[v] = space[v][(idx % r) as usize].clone();
        idx /= r;
    }
    Wiring::from_adjacency(k, adj).expect("strategies are legal")
}

/// Sequential pure-Nash check over each node's full legal strategy set.
fn is_pure_ne(g: &GameInstance, w: &Wiring, s: &mut Scratch) -> bool {
    (0..g.n()).all(|v| best_response_with(g, w, v, s).map(|b| !b.improved).unwrap_or(false))
}

fn search_space(
    g: &GameInstance,
    restriction: Option<&[Vec<Strategy>]>,
    budget: u128,
) -> Result<Vec<Vec<Strategy>>, GadgetError> {
    let space = match restriction {
        Some(r) => {
            if r.len() != g.n() {
                return Err(GadgetError::Params(format!("restriction has {} rows, game has {} nodes", r.len(), g.n())));
            }
            for (v, opts) in r.iter().enumerate() {
                if let Some(bad) = opts.iter().find(|s| !g.is_legal_strategy(v, s)) {
                    return Err(GadgetError::Params(format!("node {v}: {bad:?} is not a legal strategy")));
                }
            }
            r.to_vec()
        }
        None => full_space(g),
    };
    let profiles = space_size(&space);
    if profiles > budget {
        return Err(GadgetError::BudgetExceeded { profiles, budget });
    }
    Ok(space)
}

/// First pure Nash equilibrium (in mixed-radix order) among the profiles
/// where every node plays inside its candidate set. Deviations are
/// checked against the full legal strategy set, so `None` certifies that
/// no profile in the space is an equilibrium.
pub fn exhaustive_ne_search(
    g: &GameInstance,
    restriction: Option<&[Vec<Strategy>]>,
    budget: u128,
) -> Result<Option<Wiring>, GadgetError> {
    let space = search_space(g, restriction, budget)?;
    let total = space_size(&space);
    let k = g.max_budget();
    let hit = (0..total as u64).into_par_iter().find_first(|&i| {
        let w = decode(&space, k, i as u128);
        is_pure_ne(g, &w, &mut Scratch::default())
    });
    Ok(hit.map(|i| decode(&space, k, i as u128)))
}

/// Number of pure equilibria in the space.
pub fn count_pure_ne(
    g: &GameInstance,
    restriction: Option<&[Vec<Strategy>]>,
    budget: u128,
) -> Result<usize, GadgetError> {
    let space = search_space(g, restriction, budget)?;
    let k = g.max_budget();
    Ok((0..space_size(&space) as u64)
        .into_par_iter()
        .filter(|&i| is_pure_ne(g, &decode(&space, k, i as u128), &mut Scratch::default()))
        .count())
}

/// A strategy removed by [`dominance_prune`]: whatever the others play in
/// the space of `round`, `strategy` costs at least `lower` while
/// `dominated_by` costs at most `upper < lower`.
#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    pub round: usize,
    pub node: NodeId,
    pub strategy: Strategy,
    pub dominated_by: Strategy,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pruning {
    /// The space at the start of each round.
    pub rounds: Vec<Vec<Vec<Strategy>>>,
    pub survivors: Vec<Vec<Strategy>>,
    pub eliminated: Vec<Elimination>,
}

/// Cost of `v` when it plays `s` and every other node `u` plays all of
/// `others[u]` at once.
fn bound_cost(g: &GameInstance, v: NodeId, s: &[NodeId], others: &[Vec<NodeId>], bfs: &mut Bfs, dist: &mut [u32]) -> f64 {
    let mut adj = others.to_vec();
    adj[v] = s.to_vec();
    bfs.run(&adj, v, None, dist);
    g.weight_row(v)
        .iter()
        .enumerate()
        .filter(|&(j, &wt)| j != v && wt > 0.0)
        .map(|(j, &wt)| if dist[j] == UNREACHABLE { wt * g.penalty() } else { wt * dist[j] as f64 })
        .sum()
}

/// Iterated elimination of strictly dominated strategies.
///
/// Distances only shrink when edges are added. A strategy's cost is
/// therefore bounded below by evaluating it against the union of every
/// other node's remaining targets, and bounded above by evaluating it
/// against only the targets common to all of a node's remaining
/// strategies. `s` is removed when its lower bound exceeds some other
/// strategy's upper bound. Rounds repeat until nothing changes.
pub fn dominance_prune(g: &GameInstance, start: Vec<Vec<Strategy>>) -> Pruning {
    let n = g.n();
    let mut space = start;
    let mut rounds = Vec::new();
    let mut eliminated = Vec::new();
    let mut bfs = Bfs::default();
    let mut dist = vec![UNREACHABLE; n];
    loop {
        let union: Vec<Vec<NodeId>> = space
            .iter()
            .map(|opts| opts.iter().flatten().copied().sorted_unstable().dedup().collect())
            .collect();
        let forced: Vec<Vec<NodeId>> = space
            .iter()
            .map(|opts| match opts.split_first() {
                Some((first, rest)) => first.iter().copied().filter(|t| rest.iter().all(|s| s.contains(t))).collect(),
                None => Vec::new(),
            })
            .collect();
        let round = rounds.len();
        let mut next = space.clone();
        let mut changed = false;
        for v in 0..n {
            if space[v].len() < 2 {
                continue;
            }
            let uppers: Vec<f64> = space[v].iter().map(|s| bound_cost(g, v, s, &forced, &mut bfs, &mut dist)).collect();
            let (best, &upper) = uppers
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty");
            let mut keep = Vec::new();
            for s in &space[v] {
                let lower = bound_cost(g, v, s, &union, &mut bfs, &mut dist);
                if lower > upper + 1e-9 * upper.abs().max(1.0) {
                    eliminated.push(Elimination {
                        round,
                        node: v,
                        strategy: s.clone(),
                        dominated_by: space[v][best].clone(),
                        lower,
                        upper,
                    });
                    changed = true;
                } else {
                    keep.push(s.clone());
                }
            }
            next[v] = keep;
        }
        rounds.push(space);
        space = next;
        if !changed {
            break;
        }
    }
    Pruning { rounds, survivors: space, eliminated }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedSearch {
    pub pruning: Pruning,
    pub profiles: u128,
    pub equilibrium: Option<Wiring>,
}

/// Dominance pruning from the full strategy space, then exhaustive search
/// over the survivors. Pruning only removes strategies no equilibrium can
/// use, so `equilibrium == None` means the game has no pure equilibrium.
pub fn pruned_ne_search(g: &GameInstance, budget: u128) -> Result<PrunedSearch, GadgetError> {
    let pruning = dominance_prune(g, full_space(g));
    let profiles = space_size(&pruning.survivors);
    let equilibrium = exhaustive_ne_search(g, Some(&pruning.survivors), budget)?;
    Ok(PrunedSearch { pruning, profiles, equilibrium })
}

/// A 3-CNF formula. Literals use DIMACS numbering: `+i` is variable `i`
/// (1-based), `-i` its negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<[i32; 3]>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<[i32; 3]>) -> Result<Self, GadgetError> {
        for (c, clause) in clauses.iter().enumerate() {
            for &lit in clause {
                if lit == 0 || lit.unsigned_abs() as usize > num_vars {
                    return Err(GadgetError::Formula(format!(
                        "clause {c}: literal {lit} out of range for {num_vars} variables"
                    )));
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[[i32; 3]] {
        &self.clauses
    }

    /// `assignment[i]` is the value of variable `i + 1`.
    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0)))
    }

    /// Brute force over all assignments; meant for tiny formulas.
    pub fn satisfying_assignment(&self) -> Option<Vec<bool>> {
        assert!(self.num_vars <= 24, "brute force is limited to 24 variables");
        (0u32..1 << self.num_vars)
            .map(|bits| (0..self.num_vars).map(|i| bits >> i & 1 == 1).collect::<Vec<_>>())
            .find(|a| self.evaluate(a))
    }

    /// Reads DIMACS CNF. Clauses may span lines and must have exactly
    /// three literals.
    pub fn parse_dimacs(text: &str) -> Result<Self, GadgetError> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current: Vec<i32> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            let err = |msg: String| GadgetError::Parse { line: line_no, msg };
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if header.is_some() {
                    return Err(err("duplicate header".into()));
                }
                if parts.len() != 4 || parts[1] != "cnf" {
                    return Err(err(format!("expected `p cnf <vars> <clauses>`, got `{line}`")));
                }
                let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad number `{s}`")));
                header = Some((num(parts[2])?, num(parts[3])?));
                continue;
            }
            if header.is_none() {
                return Err(err("clause before header".into()));
            }
            for tok in line.split_whitespace() {
                let lit: i32 = tok.parse().map_err(|_| err(format!("bad literal `{tok}`")))?;
                if lit == 0 {
                    let c: [i32; 3] = current
                        .as_slice()
                        .try_into()
                        .map_err(|_| err(format!("clause has {} literals, expected 3", current.len())))?;
                    clauses.push(c);
                    current.clear();
                } else {
                    current.push(lit);
                }
            }
        }
        let (vars, count) = header.ok_or(GadgetError::Parse { line: 0, msg: "missing header".into() })?;
        if !current.is_empty() {
            return Err(GadgetError::Formula("last clause is not terminated by 0".into()));
        }
        if clauses.len() != count {
            return Err(GadgetError::Formula(format!("header says {count} clauses, found {}", clauses.len())));
        }
        Self::new(vars, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            out.push_str(&format!("{} {} {} 0\n", c[0], c[1], c[2]));
        }
        out
    }
}

/// Node count of a reduced instance: `VAR_NODES * vars + CLAUSE_NODES *
/// clauses + FIXED_NODES`.
pub const VAR_NODES: usize = 3;
pub const CLAUSE_NODES: usize = 7;
pub const FIXED_NODES: usize = 14;

/// Node layout of a reduced formula.
#[derive(Debug, Clone, PartialEq)]
pub struct SatReduction {
    pub game: GameInstance,
    pub params: GadgetParams,
    /// Weight of 0C on its own tops.
    pub zeta_top: f64,
    /// Weight of 0C on every literal endpoint.
    pub rho: f64,
    pub gate: NodeId,
    pub drain: NodeId,
    /// (variable node, true top, false top) per variable.
    pub variables: Vec<(NodeId, NodeId, NodeId)>,
    /// Clause node per clause.
    pub clause_nodes: Vec<NodeId>,
    /// (intermediary, endpoint, active) per literal slot.
    pub literals: Vec<[(NodeId, NodeId, bool); 3]>,
}

impl SatReduction {
    pub fn n(&self) -> usize {
        self.game.n()
    }
}

/// Builds the reduction of a 3-CNF formula.
///
/// Layout: the final gadget on ids 0..=10, gate G, drain D and its
/// partner, then per variable a node V choosing between tops T (true) and
/// F (false), then per clause a clause node Q and three (intermediary I,
/// endpoint X) pairs. T, F, X and the drain all lead into the D cycle.
///
/// An intermediary for literal `l` of variable `i` wants X (weight
/// alpha), V (beta) and the top of the opposite value (gamma); by the
/// bottom-node inequalities it links to V exactly when V points at that
/// opposite top, so it reaches X iff `l` is true. A repeated literal in
/// a clause gets an inactive intermediary that can only link to V. Q
/// picks among the active intermediaries and wants their endpoints, G
/// links to every Q, and 0C may link to G instead of a top. `rho` is
/// chosen so that 0C prefers G iff every clause reaches an endpoint:
/// then 0C rests on G and the gadget settles, otherwise it toggles.
pub fn sat_reduction(f: &CnfFormula, m: Option<f64>) -> Result<SatReduction, GadgetError> {
    let vars = f.num_vars();
    let clauses = f.clauses();
    let mc = clauses.len();
    if mc == 0 {
        return Err(GadgetError::Formula("formula has no clauses".into()));
    }
    let n = VAR_NODES * vars + CLAUSE_NODES * mc + FIXED_NODES;
    let m = m.unwrap_or(10.0 * n as f64);
    if !(m > n as f64 && m > 11.0) {
        return Err(GadgetError::Params(format!("penalty must exceed n={n}, got {m}")));
    }
    let params = GadgetParams::with_penalty(m)?;
    let (gate, drain, drain2) = (11, 12, 13);
    let variables: Vec<(NodeId, NodeId, NodeId)> =
        (0..vars).map(|i| (14 + 3 * i, 15 + 3 * i, 16 + 3 * i)).collect();
    let base = 14 + 3 * vars;
    let clause_nodes: Vec<NodeId> = (0..mc).map(|c| base + 7 * c).collect();
    let literals: Vec<[(NodeId, NodeId, bool); 3]> = clauses
        .iter()
        .enumerate()
        .map(|(c, lits)| {
            std::array::from_fn(|j| {
                let active = !lits[..j].contains(&lits[j]);
                (base + 7 * c + 1 + 2 * j, base + 7 * c + 2 + 2 * j, active)
            })
        })
        .collect();

    let mut weights = gadget_weights(&params, n, EXTRA_TARGET, false);
    let mut allowed = gadget_allowed(EXTRA_TARGET);
    allowed.resize(n, Vec::new());
    let mut budgets = vec![1; n];

    // 0C: own tops at zeta_top, 1C at xi, every endpoint at rho
    let xi = params.xi;
    let zeta_top = xi * mc as f64;
    let lo = (zeta_top * (m - 1.0) + xi * (m - 3.0)) / mc as f64;
    let hi = if mc > 1 { zeta_top * (m - 1.0) / (mc - 1) as f64 } else { 2.0 * lo };
    let rho = (lo + hi) / 2.0 / (m - 4.0);
    let c0 = Role::C0.id();
    weights[c0][Role::LT0.id()] = zeta_top;
    weights[c0][Role::RT0.id()] = zeta_top;
    allowed[c0].push(gate);
    budgets[gate] = mc;
    allowed[gate] = clause_nodes.clone();
    allowed[drain] = vec![drain2];
    allowed[drain2] = vec![drain];
    for &(v, t, fl) in &variables {
        allowed[v] = vec![t, fl];
        allowed[t] = vec![drain];
        allowed[fl] = vec![drain];
    }
    for (c, lits) in clauses.iter().enumerate() {
        let q = clause_nodes[c];
        for (j, &(i_node, x, active)) in literals[c].iter().enumerate() {
            let (v, t, fl) = variables[lits[j].unsigned_abs() as usize - 1];
            let opposite = if lits[j] > 0 { fl } else { t };
            allowed[x] = vec![drain];
            weights[c0][x] = rho;
            weights[q][x] = 1.0;
            if active {
                allowed[i_node] = vec![v, x];
                weights[i_node][x] = params.alpha;
                weights[i_node][v] = params.beta;
                weights[i_node][opposite] = params.gamma;
                allowed[q].push(i_node);
            } else {
                allowed[i_node] = vec![v];
            }
        }
    }
    let game = GameInstance::new(budgets, weights, Some(allowed), m)?;
    Ok(SatReduction { game, params, zeta_top, rho, gate, drain, variables, clause_nodes, literals })
}

/// A lone variable: V chooses between T and F, both feed a two-cycle.
/// Nodes are V, T, F, D, D2.
pub fn variable_gadget() -> Result<GameInstance, GadgetError> {
    let allowed = vec![vec![1, 2], vec![3], vec![3], vec![4], vec![3]];
    Ok(GameInstance::new(vec![1; 5], vec![vec![0.0; 5]; 5], Some(allowed), 50.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_walk, Scheduler, Termination};
    use crate::game::{check_stability, is_stable, node_cost};
    use crate::graph::hamiltonian_cycle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BUDGET: u128 = 5_000_000;

    fn unsat_formulas() -> Vec<CnfFormula> {
        vec![
            CnfFormula::new(1, vec![[1, 1, 1], [-1, -1, -1]]).unwrap(),
            CnfFormula::new(2, vec![[1, 1, 1], [-1, -1, -1], [2, 2, 2]]).unwrap(),
            CnfFormula::new(2, vec![[1, 1, 1], [-1, -1, 2], [-2, -2, -2]]).unwrap(),
        ]
    }

    #[test]
    fn params_defaults() {
        let p = GadgetParams::new(100.0, 1.0, 0.5).unwrap();
        assert_eq!(p.beta, 1.5);
        assert!((p.alpha - (1.5 + 98.0 / 99.0 - 0.5)).abs() < 1e-12);
        assert!((p.alpha - 1.98990).abs() < 1e-5);
        assert!(p.alpha * 99.0 < 246.5);
        let boundary = 98.0 / 99.0;
        assert!(matches!(GadgetParams::new(100.0, 1.0, boundary), Err(GadgetError::Params(_))));
        assert!(symmetric_gadget(100.0, 1.0, boundary).is_err());
        assert!(asymmetric_gadget(11.0).is_err());
    }

    #[test]
    fn asymmetric_has_no_equilibrium() {
        let gd = asymmetric_gadget(100.0).unwrap();
        let space = gd.natural_space();
        assert_eq!(space_size(&space), 64);
        assert_eq!(space, full_space(&gd.game));
        assert_eq!(exhaustive_ne_search(&gd.game, Some(&space), BUDGET).unwrap(), None);
    }

    #[test]
    fn asymmetric_walks_loop() {
        let gd = asymmetric_gadget(100.0).unwrap();
        let space = gd.natural_space();
        for i in 0..space_size(&space) {
            let w = decode(&space, 1, i);
            let t = run_walk(&gd.game, &w, &Scheduler::round_robin(11), 10_000).unwrap();
            assert!(matches!(t.termination, Termination::LoopDetected { .. }), "profile {i}");
        }
    }

    #[test]
    fn start_profile_cycles_through_the_narrative() {
        let gd = asymmetric_gadget(100.0).unwrap();
        let w = gd.start_profile();
        assert_eq!(w.targets(Role::C0.id()), &[Role::LT0.id()]);
        assert_eq!(w.targets(Role::LB0.id()), &[Role::Extra.id()]);
        let t = run_walk(&gd.game, &w, &Scheduler::round_robin(11), 10_000).unwrap();
        let Termination::LoopDetected { deviations_per_period, .. } = t.termination else {
            panic!("expected a loop, got {:?}", t.termination);
        };
        assert!(deviations_per_period > 0);
        // 0C moves first
        assert_eq!(t.records.iter().find(|r| r.old_targets != r.new_targets).unwrap().node, Role::C0.id());
        let movers: std::collections::HashSet<_> = t.records.iter().map(|r| r.node).collect();
        for r in [Role::C0, Role::C1, Role::LB0, Role::RB0, Role::LB1, Role::RB1] {
            assert!(movers.contains(&r.id()));
        }
    }

    #[test]
    fn extra_target_choice() {
        for r in &Role::GADGET[..EXTRA_TARGET.id()] {
            let g = asymmetric_with_extra(100.0, *r).unwrap();
            assert!(count_pure_ne(&g.game, None, BUDGET).unwrap() > 0, "{r}");
        }
        for r in [Role::LB0, Role::RB0, Role::LB1, Role::RB1] {
            let g = asymmetric_with_extra(100.0, r).unwrap();
            assert_eq!(count_pure_ne(&g.game, None, BUDGET).unwrap(), 0, "{r}");
        }
    }

    #[test]
    fn lifted_has_no_equilibrium() {
        let gd = lifted_gadget(100.0).unwrap();
        assert_eq!(gd.game.n(), 13);
        assert_eq!(gd.game.max_budget(), 2);
        assert_eq!(space_size(&full_space(&gd.game)), 729);
        assert_eq!(exhaustive_ne_search(&gd.game, None, BUDGET).unwrap(), None);
        let t = run_walk(&gd.game, &gd.start_profile(), &Scheduler::round_robin(13), 10_000).unwrap();
        assert!(matches!(t.termination, Termination::LoopDetected { .. }));
    }

    /// With every target allowed a bottom can link its cross-over top
    /// directly and still reach its central the long way round, which the
    /// bottom inequalities do not rule out. The pruned search finds such an
    /// equilibrium.
    #[test]
    fn symmetric_weights_admit_cross_links() {
        let gd = symmetric_gadget(100.0, 1.0, 0.5).unwrap();
        let r = pruned_ne_search(&gd.game, BUDGET).unwrap();
        assert!(r.profiles < space_size(&full_space(&gd.game)));
        for (top, target) in TOP_LINKS {
            assert_eq!(r.pruning.survivors[top.id()], vec![vec![target.id()]]);
        }
        assert_eq!(r.pruning.survivors[Role::Extra.id()], vec![vec![EXTRA_TARGET.id()]]);
        let w = r.equilibrium.expect("equilibrium");
        assert!(is_stable(&gd.game, &w).unwrap());
        assert!(BOTTOMS.iter().any(|&(b, _, cross)| w.targets(b.id()) == [cross.id()]));
    }

    /// Every recorded elimination holds against random profiles drawn from
    /// the space it was made in.
    #[test]
    fn eliminations_are_dominated() {
        let gd = symmetric_gadget(100.0, 1.0, 0.5).unwrap();
        let pr = dominance_prune(&gd.game, full_space(&gd.game));
        assert!(!pr.eliminated.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for e in &pr.eliminated {
            let space = &pr.rounds[e.round];
            for _ in 0..50 {
                let adj: Vec<super::Strategy> = space.iter().map(|o| o[rng.gen_range(0..o.len())].clone()).collect();
                let w = Wiring::from_adjacency(1, adj).unwrap();
                let bad = node_cost(&gd.game, &w.with_targets(e.node, e.strategy.clone()).unwrap(), e.node).unwrap();
                let good = node_cost(&gd.game, &w.with_targets(e.node, e.dominated_by.clone()).unwrap(), e.node).unwrap();
                assert!(bad >= e.lower - 1e-9 && good <= e.upper + 1e-9 && bad > good);
            }
        }
    }

    #[test]
    fn uniform_searches() {
        let g = GameInstance::uniform(4, 1).unwrap();
        let cycle = hamiltonian_cycle(4, 1);
        let only: Vec<Vec<super::Strategy>> = (0..4).map(|v| vec![cycle.targets(v).to_vec()]).collect();
        assert_eq!(exhaustive_ne_search(&g, Some(&only), 10).unwrap(), Some(cycle));
        let g = GameInstance::uniform(5, 2).unwrap();
        assert_eq!(space_size(&full_space(&g)), 7776);
        let w = exhaustive_ne_search(&g, None, BUDGET).unwrap().unwrap();
        assert!(is_stable(&g, &w).unwrap());
        assert!(matches!(
            exhaustive_ne_search(&g, None, 100),
            Err(GadgetError::BudgetExceeded { profiles: 7776, budget: 100 })
        ));
    }

    #[test]
    fn variable_gadget_has_two_orientations() {
        let g = variable_gadget().unwrap();
        assert_eq!(space_size(&full_space(&g)), 2);
        assert_eq!(count_pure_ne(&g, None, 10).unwrap(), 2);
    }

    #[test]
    fn dimacs_round_trip() {
        let f = CnfFormula::parse_dimacs("c tiny\np cnf 3 2\n1 2 -3 0\n-1\n-2 -3 0\n").unwrap();
        assert_eq!(f.clauses(), &[[1, 2, -3], [-1, -2, -3]]);
        assert_eq!(CnfFormula::parse_dimacs(&f.to_dimacs()).unwrap(), f);
        assert!(CnfFormula::parse_dimacs("p cnf 2 1\n1 2 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("p cnf 2 1\n1 2 3 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("1 2 -1 0\n").is_err());
        assert!(CnfFormula::parse_dimacs("p cnf 2 2\n1 2 -1 0\n").is_err());
    }

    #[test]
    fn reduction_size_is_linear() {
        for f in unsat_formulas() {
            let r = sat_reduction(&f, None).unwrap();
            assert_eq!(r.n(), VAR_NODES * f.num_vars() + CLAUSE_NODES * f.clauses().len() + FIXED_NODES);
        }
    }

    #[test]
    fn reduction_weights_separate() {
        let f = CnfFormula::new(2, vec![[1, 2, 2], [-1, 2, 1], [1, -2, 2]]).unwrap();
        let r = sat_reduction(&f, None).unwrap();
        let (m, xi, mc) = (r.params.penalty, r.params.xi, 3.0);
        // all clauses reached beats a top even when 1C is three hops away
        assert!(r.rho * mc * (m - 4.0) > r.zeta_top * (m - 1.0) + xi * (m - 3.0));
        // one clause short loses even when 1C is unreachable
        assert!(r.rho * (mc - 1.0) * (m - 4.0) < r.zeta_top * (m - 1.0));
    }

    #[test]
    fn reduction_tracks_satisfiability() {
        let sat = [
            CnfFormula::new(3, vec![[1, 2, -3]]).unwrap(),
            CnfFormula::new(1, vec![[1, 1, 1]]).unwrap(),
            CnfFormula::new(2, vec![[1, 2, 2], [-1, -1, -2]]).unwrap(),
        ];
        for f in &sat {
            assert!(f.satisfying_assignment().is_some());
            let r = sat_reduction(f, None).unwrap();
            let w = exhaustive_ne_search(&r.game, None, BUDGET).unwrap().expect("equilibrium");
            assert!(check_stability(&r.game, &w).unwrap().is_stable());
            assert_eq!(w.targets(Role::C0.id()), &[r.gate]);
            // the orientation read off the variables satisfies the formula
            let a: Vec<bool> = r.variables.iter().map(|&(v, t, _)| w.targets(v) == [t]).collect();
            assert!(f.evaluate(&a));
        }
        for f in unsat_formulas() {
            assert!(f.satisfying_assignment().is_none());
            let r = sat_reduction(&f, None).unwrap();
            assert_eq!(exhaustive_ne_search(&r.game, None, BUDGET).unwrap(), None);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn search_agrees_with_is_stable(seed in any::<u64>()) {
            let gd = asymmetric_gadget(100.0).unwrap();
            let g = GameInstance::uniform(5, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for game in [&gd.game, &g] {
                let space = full_space(game);
                let i = rng.gen_range(0..space_size(&space));
                let w = decode(&space, game.max_budget(), i);
                prop_assert_eq!(is_pure_ne(game, &w, &mut Scratch::default()), is_stable(game, &w).unwrap());
            }
        }
    }
}
