//! Convergence experiments over (n, k) grids, CSV output and the size caps
//! for exact stability checks.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::cayley::{regular_wiring, CayleyError};
use crate::dynamics::{cycle_plus_random, random_wiring, run_walk_with, DynamicsError, Scheduler, Termination, WalkOptions};
use crate::game::{social_cost, GameError, GameInstance};
use crate::graph::{hamiltonian_cycle, Wiring};

pub const CSV_HEADER: [&str; 11] = [
    "n",
    "k",
    "trial",
    "seed",
    "family",
    "scheduler",
    "steps",
    "deviations",
    "termination",
    "connectivity_step",
    "social_cost",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("(n={n}, k={k}) is beyond the exact-check caps (k=1: n<=300, k=2: n<=120, k=3: n<=50, k=4,5: n<=30)")]
    OverCap { n: usize, k: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Cayley(#[from] CayleyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Largest `n` for which exact stability checks are run at budget `k`.
pub fn stability_cap(k: usize) -> Option<usize> {
    match k {
        1 => Some(300),
        2 => Some(120),
        3 => Some(50),
        4 | 5 => Some(30),
        _ => None,
    }
}

pub fn check_caps(n: usize, k: usize) -> Result<(), ExperimentError> {
    match stability_cap(k) {
        Some(cap) if n <= cap => Ok(()),
        _ => Err(ExperimentError::OverCap { n, k }),
    }
}

/// Start wirings.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Circulant with offsets 1..=k.
    Regular,
    /// Hamiltonian cycle plus k-1 random links per node.
    CyclePlusRandom,
    /// k random links per node.
    Random,
    Empty,
    File(Wiring),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Regular => "regular",
            Family::CyclePlusRandom => "cycle-plus-random",
            Family::Random => "random",
            Family::Empty => "empty",
            Family::File(_) => "file",
        }
    }

    pub fn start(&self, n: usize, k: usize, seed: u64) -> Result<Wiring, ExperimentError> {
        Ok(match self {
            Family::Regular if k == 1 => hamiltonian_cycle(n, 1),
            Family::Regular => regular_wiring(n, &(1..=k).collect::<Vec<_>>())?,
            Family::CyclePlusRandom => cycle_plus_random(n, k, seed),
            Family::Random => random_wiring(n, k, seed),
            Family::Empty => Wiring::empty(n, k),
            Family::File(w) => {
                if w.n() != n || w.k() != k {
                    return Err(ExperimentError::Config(format!(
                        "file wiring is ({}, {}), cell is ({n}, {k})",
                        w.n(),
                        w.k()
                    )));
                }
                w.clone()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    RoundRobin,
    RoundRobinShuffled,
    MaxCostFirst,
    Random,
    FollowPath,
}

impl SchedulerKind {
    /// The scheduler for one trial; randomized kinds take the trial seed.
    pub fn build(self, n: usize, seed: u64) -> Scheduler {
        match self {
            SchedulerKind::RoundRobin => Scheduler::round_robin(n),
            SchedulerKind::RoundRobinShuffled => Scheduler::RoundRobinShuffled(seed),
            SchedulerKind::MaxCostFirst => Scheduler::MaxCostFirst,
            SchedulerKind::Random => Scheduler::Random(seed),
            SchedulerKind::FollowPath => Scheduler::FollowPath,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub family: Family,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    /// Per-walk step cap; defaults to `50 n^2`.
    pub step_cap: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.n_values.is_empty() || self.k_values.is_empty() {
            return bad("n and k ranges must be non-empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for &n in &self.n_values {
            for &k in &self.k_values {
                if k == 0 || k >= n {
                    return bad(format!("need 1 <= k < n, got n={n} k={k}"));
                }
                check_caps(n, k)?;
                if let Some(cap) = self.step_cap {
                    if cap < n * n {
                        return bad(format!("step cap {cap} is below n^2 = {} for n={n}", n * n));
                    }
                }
            }
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &k in &self.k_values {
                out.extend((0..self.trials).map(|t| (n, k, t)));
            }
        }
        out
    }
}

/// Seed of one trial, mixed from the base seed and the cell coordinates.
pub fn trial_seed(seed: u64, n: usize, k: usize, trial: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ ((n as u64) << 40) ^ ((k as u64) << 32) ^ trial as u64;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub family: String,
    pub scheduler: String,
    pub steps: usize,
    pub deviations: usize,
    pub termination: Termination,
    pub connectivity_step: Option<usize>,
    pub social_cost: f64,
    pub final_wiring: Wiring,
}

impl ConvergenceRow {
    pub fn is_stable(&self) -> bool {
        matches!(self.termination, Termination::Stable { .. })
    }

    fn record(&self) -> [String; 11] {
        let term = match self.termination {
            Termination::Stable { .. } => "stable",
            Termination::LoopDetected { .. } => "loop",
            Termination::StepLimit => "step-limit",
        };
        [
            self.n.to_string(),
            self.k.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.family.clone(),
            self.scheduler.clone(),
            self.steps.to_string(),
            self.deviations.to_string(),
            term.to_string(),
            self.connectivity_step.map(|s| s.to_string()).unwrap_or_default(),
            self.social_cost.to_string(),
        ]
    }
}

/// One row per (n, k, trial), in that order whatever the completion order.
pub fn run_convergence_experiment(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>, ExperimentError> {
    cfg.validate()?;
    cfg.cells()
        .into_par_iter()
        .map(|(n, k, trial)| {
            let seed = trial_seed(cfg.seed, n, k, trial);
            let g = GameInstance::uniform(n, k)?;
            let w0 = cfg.family.start(n, k, seed)?;
            let sched = cfg.scheduler.build(n, seed);
            let cap = cfg.step_cap.unwrap_or(50 * n * n);
            let trace = run_walk_with(&g, &w0, &sched, WalkOptions::new(cap))?;
            Ok(ConvergenceRow {
                n,
                k,
                trial,
                seed,
                family: cfg.family.name().to_string(),
                scheduler: sched.name().to_string(),
                steps: trace.steps,
                deviations: trace.deviations(),
                termination: trace.termination,
                connectivity_step: trace.connectivity_step,
                social_cost: social_cost(&g, &trace.final_wiring)?,
                final_wiring: trace.final_wiring,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ConvergenceRow]) -> Result<String, ExperimentError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Walk-length statistics of one (n, k) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub all_stable: bool,
    pub mean_steps: f64,
    /// Sample variance (n - 1 denominator), 0 for a single trial.
    pub var_steps: f64,
}

pub fn summarize(rows: &[ConvergenceRow]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    for chunk in rows.chunk_by(|a, b| (a.n, a.k) == (b.n, b.k)) {
        let xs: Vec<f64> = chunk.iter().map(|r| r.steps as f64).collect();
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        out.push(CellSummary {
            n: chunk[0].n,
            k: chunk[0].k,
            trials: chunk.len(),
            all_stable: chunk.iter().all(ConvergenceRow::is_stable),
            mean_steps: mean,
            var_steps: var,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(family: Family, scheduler: SchedulerKind) -> ExperimentConfig {
        ExperimentConfig {
            n_values: vec![8, 12],
            k_values: vec![2],
            trials: 3,
            family,
            scheduler,
            seed: 42,
            step_cap: None,
        }
    }

    #[test]
    fn caps() {
        assert!(check_caps(300, 1).is_ok());
        assert!(check_caps(301, 1).is_err());
        assert!(check_caps(120, 2).is_ok());
        assert!(check_caps(51, 3).is_err());
        assert!(check_caps(30, 5).is_ok());
        assert!(check_caps(10, 6).is_err());
    }

    #[test]
    fn validation() {
        let mut c = cfg(Family::Regular, SchedulerKind::RoundRobin);
        c.step_cap = Some(100);
        assert!(c.validate().is_err());
        c.step_cap = Some(144);
        assert!(c.validate().is_ok());
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(Family::Regular, SchedulerKind::RoundRobin);
        c.n_values.clear();
        assert!(c.validate().is_err());
        c.n_values = vec![400];
        c.k_values = vec![1];
        assert!(matches!(c.validate(), Err(ExperimentError::OverCap { .. })));
    }

    #[test]
    fn rows_in_grid_order_and_deterministic() {
        let c = cfg(Family::CyclePlusRandom, SchedulerKind::RoundRobinShuffled);
        let rows = run_convergence_experiment(&c).unwrap();
        assert_eq!(rows.len(), 2 * 3);
        let coords: Vec<_> = rows.iter().map(|r| (r.n, r.k, r.trial)).collect();
        assert_eq!(coords, vec![(8, 2, 0), (8, 2, 1), (8, 2, 2), (12, 2, 0), (12, 2, 1), (12, 2, 2)]);
        let a = to_csv_string(&rows).unwrap();
        let b = to_csv_string(&run_convergence_experiment(&c).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("n,k,trial,seed,family,scheduler,steps,deviations,termination,connectivity_step,social_cost\n"));
        assert_eq!(summarize(&rows).len(), 2);
    }

    fn is_loop(r: &ConvergenceRow) -> bool {
        matches!(r.termination, Termination::LoopDetected { .. })
    }

    #[test]
    fn regular_round_robin_walks() {
        let mut c = cfg(Family::Regular, SchedulerKind::RoundRobin);
        c.n_values = (8..=32).step_by(4).collect();
        c.trials = 1;
        let rows = run_convergence_experiment(&c).unwrap();
        let stable: Vec<usize> = rows.iter().filter(|r| r.is_stable()).map(|r| r.n).collect();
        assert_eq!(stable, vec![12, 16, 20, 24, 28]);
        // the other two cycle under lexicographic tie-breaking
        assert!(is_loop(&rows[0]) && is_loop(&rows[6]));
    }

    #[test]
    fn empty_max_cost_first_small() {
        let mut c = cfg(Family::Empty, SchedulerKind::MaxCostFirst);
        c.n_values = (4..=20).collect();
        c.k_values = vec![1];
        c.trials = 1;
        assert!(run_convergence_experiment(&c).unwrap().iter().all(ConvergenceRow::is_stable));
        c.n_values = (4..=7).collect();
        c.k_values = vec![2, 3];
        assert!(run_convergence_experiment(&c).unwrap().iter().all(ConvergenceRow::is_stable));
        c.n_values = vec![8];
        c.k_values = vec![2];
        assert!(is_loop(&run_convergence_experiment(&c).unwrap()[0]));
    }

    #[test]
    fn file_family_checks_shape() {
        let f = Family::File(hamiltonian_cycle(5, 1));
        assert!(f.start(5, 1, 0).is_ok());
        assert!(f.start(6, 1, 0).is_err());
    }
}
