//! Abelian Cayley wirings: circulants, tori, hypercubes.
//!
//! Group elements of `Z_{m_1} x .. x Z_{m_r}` are indexed mixed-radix with
//! the last factor varying fastest. Node `u` links to `u + a_i` for every
//! generator `a_i`.

use std::collections::BTreeSet;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::game::{check_stability, node_cost, Deviation, GameError, GameInstance, Stability};
use crate::graph::{diameter, single_source_distances, GraphError, NodeId, Wiring};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CayleyError {
    #[error("group factors must all be at least 2")]
    BadFactor,
    #[error("generator {0} has the wrong number of coordinates")]
    Arity(usize),
    #[error("generator {0} is the identity")]
    Identity(usize),
    #[error("generators {0} and {1} coincide")]
    Duplicate(usize, usize),
    #[error("generator index {index} out of range for {k} generators")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("wiring is not strongly connected")]
    Disconnected,
    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// A finite Abelian group given by cyclic factors, plus a generator set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CayleySpec {
    factors: Vec<usize>,
    generators: Vec<Vec<usize>>,
}

impl CayleySpec {
    /// Generators are reduced modulo the factors before validation.
    pub fn new(factors: Vec<usize>, generators: Vec<Vec<usize>>) -> Result<Self, CayleyError> {
        if factors.is_empty() || factors.iter().any(|&m| m < 2) {
            return Err(CayleyError::BadFactor);
        }
        let mut reduced = Vec::with_capacity(generators.len());
        for (i, g) in generators.into_iter().enumerate() {
            if g.len() != factors.len() {
                return Err(CayleyError::Arity(i));
            }
            let g: Vec<usize> = g.iter().zip(&factors).map(|(x, m)| x % m).collect();
            if g.iter().all(|&x| x == 0) {
                return Err(CayleyError::Identity(i));
            }
            if let Some(j) = reduced.iter().position(|h: &Vec<usize>| *h == g) {
                return Err(CayleyError::Duplicate(j, i));
            }
            reduced.push(g);
        }
        Ok(CayleySpec {
            factors,
            generators: reduced,
        })
    }

    /// Cyclic group `Z_n` with integer offsets.
    pub fn circulant(n: usize, offsets: &[usize]) -> Result<Self, CayleyError> {
        Self::new(vec![n], offsets.iter().map(|&a| vec![a]).collect())
    }

    /// `Z_2^d` with the unit vectors.
    pub fn hypercube(d: usize) -> Self {
        let gens = (0..d).map(|i| (0..d).map(|j| (i == j) as usize).collect()).collect();
        Self::new(vec![2; d], gens).expect("unit vectors are valid generators")
    }

    /// Text form: factors as `"2,2,2"`, generators as `"1,0,0;0,1,0;0,0,1"`.
    pub fn parse(factors: &str, generators: &str) -> Result<Self, CayleyError> {
        let nums = |s: &str, what: &'static str| -> Result<Vec<usize>, CayleyError> {
            s.split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| CayleyError::Parse { what, input: s.to_string() })
        };
        let f = nums(factors, "factors")?;
        let g = generators
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| nums(s, "generator"))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(f, g)
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn generators(&self) -> &[Vec<usize>] {
        &self.generators
    }

    pub fn n(&self) -> usize {
        self.factors.iter().product()
    }

    pub fn k(&self) -> usize {
        self.generators.len()
    }

    pub fn encode(&self, elem: &[usize]) -> NodeId {
        elem.iter().zip(&self.factors).fold(0, |acc, (x, m)| acc * m + x % m)
    }

    pub fn decode(&self, mut idx: NodeId) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, m) in out.iter_mut().zip(&self.factors).rev() {
            *slot = idx % m;
            idx /= m;
        }
        out
    }

    pub fn add(&self, a: &[usize], b: &[usize]) -> Vec<usize> {
        a.iter().zip(b).zip(&self.factors).map(|((x, y), m)| (x + y) % m).collect()
    }

    /// `u + sum_i label[i] * a_i`.
    pub fn walk_label(&self, u: NodeId, label: &[u32]) -> NodeId {
        let mut e = self.decode(u);
        for (a, &c) in self.generators.iter().zip(label) {
            for (x, (g, m)) in e.iter_mut().zip(a.iter().zip(&self.factors)) {
                *x = (*x + g * c as usize) % m;
            }
        }
        self.encode(&e)
    }
}

pub fn generate_cayley(spec: &CayleySpec) -> Wiring {
    let n = spec.n();
    let adj = (0..n)
        .map(|u| {
            let e = spec.decode(u);
            spec.generators.iter().map(|a| spec.encode(&spec.add(&e, a))).collect()
        })
        .collect();
    Wiring::from_adjacency(spec.k(), adj).expect("distinct non-identity generators give a valid wiring")
}

/// Circulant `x -> x + a_i mod n`.
pub fn regular_wiring(n: usize, offsets: &[usize]) -> Result<Wiring, CayleyError> {
    Ok(generate_cayley(&CayleySpec::circulant(n, offsets)?))
}

/// Accounting for the root swap `r -> a_i` replaced by `r -> 2 a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootDeviation {
    pub generator: usize,
    /// `|S_i| - (diameter + 2)`.
    pub gain_lower_bound: i64,
    /// Root cost before minus after the swap; `None` when `2 a_i` is the
    /// identity or already a neighbour, so the swap is not a legal move.
    pub exact_delta: Option<f64>,
    pub s_i: usize,
}

pub fn root_deviation_gain(spec: &CayleySpec, w: &Wiring, i: usize) -> Result<RootDeviation, CayleyError> {
    let k = spec.k();
    if i >= k {
        return Err(CayleyError::IndexOutOfRange { index: i, k });
    }
    let labels = label_sets(spec, w)?;
    let delta = diameter(w).ok_or(CayleyError::Disconnected)?;
    let s_i = labels.s_sets[i].len();
    let a = &spec.generators[i];
    let target = spec.encode(&spec.add(a, a));
    let game = GameInstance::uniform(spec.n(), k)?;
    let exact_delta = if target == 0 || w.targets(0).contains(&target) {
        None
    } else {
        let mut ts = w.targets(0).to_vec();
        ts[i] = target;
        let before = node_cost(&game, w, 0)?;
        let after = node_cost(&game, &w.with_targets(0, ts)?, 0)?;
        Some(before - after)
    };
    Ok(RootDeviation {
        generator: i,
        gain_lower_bound: s_i as i64 - (delta as i64 + 2),
        exact_delta,
        s_i,
    })
}

/// Shortest-path labels from the root (node 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSets {
    /// Every minimal-length label of every node, sorted.
    pub labels: Vec<Vec<Vec<u32>>>,
    /// `s_sets[i]`: nodes with some label whose `i`-th count is at least 2.
    pub s_sets: Vec<Vec<NodeId>>,
}

pub fn label_sets(spec: &CayleySpec, w: &Wiring) -> Result<LabelSets, CayleyError> {
    let n = spec.n();
    let k = spec.k();
    let dist = single_source_distances(w, 0)?;
    if dist.reached() + 1 != n {
        return Err(CayleyError::Disconnected);
    }
    let mut by_level: Vec<Vec<NodeId>> = Vec::new();
    for v in 0..n {
        let d = dist.get(v).expect("reached") as usize;
        if by_level.len() <= d {
            by_level.resize(d + 1, Vec::new());
        }
        by_level[d].push(v);
    }
    let mut sets: Vec<BTreeSet<Vec<u32>>> = vec![BTreeSet::new(); n];
    sets[0].insert(vec![0; k]);
    for level in by_level.iter().skip(1) {
        for &v in level {
            let dv = dist.get(v).unwrap();
            let ev = spec.decode(v);
            let mut acc = BTreeSet::new();
            for (i, a) in spec.generators.iter().enumerate() {
                let prev: Vec<usize> = ev.iter().zip(a).zip(&spec.factors).map(|((x, g), m)| (x + m - g) % m).collect();
                let u = spec.encode(&prev);
                if dist.get(u) == Some(dv - 1) {
                    for l in &sets[u] {
                        let mut l = l.clone();
                        l[i] += 1;
                        acc.insert(l);
                    }
                }
            }
            sets[v] = acc;
        }
    }
    let labels: Vec<Vec<Vec<u32>>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
    let s_sets = (0..k)
        .map(|i| (0..n).filter(|&v| labels[v].iter().any(|l| l[i] >= 2)).collect())
        .collect();
    Ok(LabelSets { labels, s_sets })
}

/// Verdict on one Cayley wiring plus the root-swap accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityProbe {
    pub spec: CayleySpec,
    pub witness: Option<Deviation>,
    /// The exact checker's witness replays on the wiring.
    pub witness_replays: bool,
    pub root_swaps: Vec<RootDeviation>,
}

impl InstabilityProbe {
    pub fn is_stable(&self) -> bool {
        self.witness.is_none()
    }
}

pub fn instability_probe(spec: &CayleySpec) -> Result<InstabilityProbe, CayleyError> {
    let w = generate_cayley(spec);
    let game = GameInstance::uniform(spec.n(), spec.k())?;
    let witness = match check_stability(&game, &w)? {
        Stability::Stable => None,
        Stability::Unstable(d) => Some(d),
    };
    let witness_replays = match &witness {
        Some(d) => d.replay(&game, &w)?,
        None => false,
    };
    let root_swaps = if diameter(&w).is_some() {
        (0..spec.k()).map(|i| root_deviation_gain(spec, &w, i)).collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    Ok(InstabilityProbe {
        spec: spec.clone(),
        witness,
        witness_replays,
        root_swaps,
    })
}

/// All Abelian groups of order `n`, each as prime-power cyclic factors.
pub fn abelian_groups(n: usize) -> Vec<Vec<usize>> {
    let mut per_prime: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut m = n;
    let mut p = 2;
    while m > 1 {
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            per_prime.push(
                partitions(e)
                    .into_iter()
                    .map(|parts| parts.into_iter().map(|x| p.pow(x as u32)).collect())
                    .collect(),
            );
        }
        p += 1;
    }
    if per_prime.is_empty() {
        return Vec::new();
    }
    per_prime
        .into_iter()
        .multi_cartesian_product()
        .map(|choice| {
            let mut f: Vec<usize> = choice.into_iter().flatten().collect();
            f.sort_unstable();
            f
        })
        .collect()
}

fn partitions(e: usize) -> Vec<Vec<usize>> {
    fn go(left: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for x in (1..=left.min(max)).rev() {
            cur.push(x);
            go(left - x, x, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(e, e, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanEntry {
    pub factors: Vec<usize>,
    pub generators: Vec<Vec<usize>>,
    pub stable: bool,
    /// `k` is the smallest degree the scan covers for this `n`.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanReport {
    pub n: usize,
    pub entries: Vec<ScanEntry>,
}

impl ScanReport {
    pub fn counterexamples(&self) -> impl Iterator<Item = &ScanEntry> {
        self.entries.iter().filter(|e| !e.stable)
    }
}

/// Largest `n` accepted by [`dense_cayley_stability_scan`].
pub const DENSE_SCAN_MAX_N: usize = 16;

/// Every generator set of every Abelian group of order `n` with degree
/// `k > (n - 2) / 2`, checked exactly. Entries come in group order, then
/// by `k`, then by generator set.
pub fn dense_cayley_stability_scan(n: usize) -> Result<ScanReport, CayleyError> {
    if !(2..=DENSE_SCAN_MAX_N).contains(&n) {
        return Err(CayleyError::Parse {
            what: "scan size",
            input: n.to_string(),
        });
    }
    let k_min = (n - 2) / 2 + 1;
    let mut jobs = Vec::new();
    for factors in abelian_groups(n) {
        let probe = CayleySpec {
            factors: factors.clone(),
            generators: Vec::new(),
        };
        let elems: Vec<Vec<usize>> = (1..n).map(|i| probe.decode(i)).collect();
        for k in k_min..n {
            for gens in elems.iter().cloned().combinations(k) {
                jobs.push((factors.clone(), gens, k == k_min));
            }
        }
    }
    let entries = jobs
        .into_par_iter()
        .map(|(factors, gens, boundary)| {
            let spec = CayleySpec::new(factors.clone(), gens.clone())?;
            let g = GameInstance::uniform(n, spec.k())?;
            let stable = check_stability(&g, &generate_cayley(&spec))?.is_stable();
            Ok(ScanEntry {
                factors,
                generators: gens,
                stable,
                boundary,
            })
        })
        .collect::<Result<Vec<_>, CayleyError>>()?;
    Ok(ScanReport { n, entries })
}
