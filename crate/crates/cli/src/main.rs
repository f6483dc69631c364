use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bdnf_core::cayley::{dense_cayley_stability_scan, instability_probe, CayleySpec};
use bdnf_core::construct::construct;
use bdnf_core::dynamics::{find_looping_config, run_walk_with, Scheduler, Termination, WalkOptions};
use bdnf_core::experiment::{check_caps, run_convergence_experiment, write_csv, ExperimentConfig, Family, SchedulerKind};
use bdnf_core::formats::{parse_game, parse_wiring, serialize_game, serialize_wiring};
use bdnf_core::gadgets::{
    asymmetric_gadget, exhaustive_ne_search, pruned_ne_search, sat_reduction, symmetric_gadget, CnfFormula,
    GadgetInstance,
};
use bdnf_core::{best_response, check_stability, Deviation, GameInstance, Stability, Wiring};

const CAYLEY_CHECK_MAX_N: usize = 64;

#[derive(Parser)]
#[command(name = "bdnf", version, about = "Bounded-degree network formation games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a verified stable wiring for the uniform (n, k) game.
    Construct {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Write the wiring here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact stability check of a wiring.
    Check {
        #[arg(long)]
        wiring: PathBuf,
        #[command(flatten)]
        game: GameArgs,
    },
    /// Exact best response of one node.
    BestResponse {
        #[arg(long)]
        wiring: PathBuf,
        #[arg(long)]
        node: usize,
        #[command(flatten)]
        game: GameArgs,
    },
    /// Best-response walk from a wiring.
    Walk {
        #[arg(long)]
        wiring: PathBuf,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum, default_value_t = SchedArg::RoundRobin)]
        scheduler: SchedArg,
        /// Comma-separated turn order for round-robin.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        /// Write the deviation trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the final wiring here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cayley wirings of Abelian groups.
    Cayley(CayleyArgs),
    /// Equilibrium search on the 11-node gadgets.
    Gadget {
        #[arg(value_enum)]
        kind: GadgetKind,
        /// Unreachability penalty M.
        #[arg(long, default_value_t = 100.0)]
        penalty: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Largest number of profiles to enumerate.
        #[arg(long, default_value_t = 50_000_000)]
        budget: u128,
    },
    /// Reduce a DIMACS 3-CNF formula to a game.
    ReduceSat {
        #[arg(long)]
        cnf: PathBuf,
        /// Write the game here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also search the reduced game for a pure equilibrium.
        #[arg(long)]
        search: bool,
        #[arg(long, default_value_t = 50_000_000)]
        budget: u128,
    },
    /// Experiment drivers.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentCmd,
    },
    /// Search random starts for a looping round-robin walk.
    FindLoop {
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random starts to try.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Write the looping start wiring here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Walk lengths over an (n, k) grid, one CSV row per trial.
    Convergence {
        /// Sizes, as a comma list or `lo..hi` (inclusive).
        #[arg(long)]
        n: String,
        #[arg(long)]
        k: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = FamilyArg::Regular)]
        family: FamilyArg,
        /// Start wiring for `--family file`.
        #[arg(long)]
        wiring: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SchedArg::RoundRobin)]
        scheduler: SchedArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-walk step cap; at least n^2.
        #[arg(long)]
        step_cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GameArgs {
    /// Game file; mutually exclusive with --uniform.
    #[arg(long, conflicts_with = "uniform")]
    game: Option<PathBuf>,
    /// Uniform game sized by the wiring.
    #[arg(long)]
    uniform: bool,
}

#[derive(Args)]
struct CayleyArgs {
    /// Cyclic factors, e.g. `2,2,2`.
    #[arg(long, required_unless_present = "scan")]
    factors: Option<String>,
    /// Generators as `1,0,0;0,1,0;0,0,1`, or `e1..eD` for unit vectors.
    #[arg(long, required_unless_present = "scan")]
    gens: Option<String>,
    #[arg(long)]
    check_stability: bool,
    /// Write the wiring here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check every dense Cayley wiring of order n instead.
    #[arg(long, conflicts_with_all = ["factors", "gens"])]
    scan: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GadgetKind {
    Asymmetric,
    Symmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedArg {
    RoundRobin,
    Shuffled,
    MaxCostFirst,
    Random,
    FollowPath,
}

impl From<SchedArg> for SchedulerKind {
    fn from(s: SchedArg) -> Self {
        match s {
            SchedArg::RoundRobin => SchedulerKind::RoundRobin,
            SchedArg::Shuffled => SchedulerKind::RoundRobinShuffled,
            SchedArg::MaxCostFirst => SchedulerKind::MaxCostFirst,
            SchedArg::Random => SchedulerKind::Random,
            SchedArg::FollowPath => SchedulerKind::FollowPath,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Regular,
    CyclePlusRandom,
    Random,
    Empty,
    File,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    match run(cli.cmd, &mut io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BDNF_THREADS") {
        let t: usize = v.parse().with_context(|| format!("BDNF_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: &mut impl Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn load_game(args: &GameArgs, w: &Wiring) -> Result<GameInstance> {
    match &args.game {
        Some(p) => Ok(parse_game(&read(p)?)?),
        None => Ok(GameInstance::uniform(w.n(), w.k())?),
    }
}

/// Exact checks on uniform games are only run inside the enumeration caps.
fn enforce_caps(g: &GameInstance) -> Result<()> {
    if let Some(k) = g.uniform_k() {
        check_caps(g.n(), k)?;
    }
    Ok(())
}

fn write_deviation(out: &mut impl Write, d: &Deviation) -> Result<()> {
    writeln!(
        out,
        "witness: node {} {:?} -> {:?}, cost {} -> {}",
        d.node, d.from, d.to, d.old_cost, d.new_cost
    )?;
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().context("range start")?;
        let hi: usize = hi.trim().parse().context("range end")?;
        if lo > hi {
            bail!("empty range {s}");
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<usize>().with_context(|| format!("bad number {x:?}")))
        .collect()
}

/// `e1..eD` expands to the D unit vectors.
fn expand_gens(gens: &str, dims: usize) -> Result<String> {
    let Some(rest) = gens.strip_prefix("e1..e") else {
        return Ok(gens.to_string());
    };
    let d: usize = rest.parse().with_context(|| format!("bad generator shorthand {gens:?}"))?;
    if d != dims {
        bail!("{gens} names {d} unit vectors but the group has {dims} factors");
    }
    Ok((0..d)
        .map(|i| (0..d).map(|j| if i == j { "1" } else { "0" }).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";"))
}

fn report_gadget(out: &mut impl Write, inst: &GadgetInstance, kind: GadgetKind, budget: u128) -> Result<()> {
    let g = &inst.game;
    let found = match kind {
        GadgetKind::Asymmetric => {
            let eq = exhaustive_ne_search(g, None, budget)?;
            writeln!(out, "profiles searched: full space")?;
            eq
        }
        GadgetKind::Symmetric => {
            let p = pruned_ne_search(g, budget)?;
            writeln!(
                out,
                "pruning: {} rounds, {} strategies eliminated, {} profiles left",
                p.pruning.rounds.len(),
                p.pruning.eliminated.len(),
                p.profiles
            )?;
            p.equilibrium
        }
    };
    match found {
        Some(w) => {
            writeln!(out, "pure equilibrium found")?;
            out.write_all(serialize_wiring(&w).as_bytes())?;
        }
        None => writeln!(out, "no pure equilibrium")?,
    }
    Ok(())
}

fn run(cmd: Cmd, out: &mut impl Write) -> Result<()> {
    match cmd {
        Cmd::Construct { n, k, out: path } => {
            check_caps(n, k)?;
            let c = construct(n, k)?;
            eprintln!("method: {:?}", c.method);
            emit(out, path.as_deref(), &serialize_wiring(&c.wiring))?;
        }
        Cmd::Check { wiring, game } => {
            let w = parse_wiring(&read(&wiring)?)?;
            let g = load_game(&game, &w)?;
            enforce_caps(&g)?;
            match check_stability(&g, &w)? {
                Stability::Stable => writeln!(out, "stable")?,
                Stability::Unstable(d) => {
                    writeln!(out, "unstable")?;
                    write_deviation(out, &d)?;
                }
            }
        }
        Cmd::BestResponse { wiring, node, game } => {
            let w = parse_wiring(&read(&wiring)?)?;
            let g = load_game(&game, &w)?;
            enforce_caps(&g)?;
            let br = best_response(&g, &w, node)?;
            writeln!(out, "node {}: {:?}", br.node, br.targets)?;
            writeln!(out, "cost {} (current {})", br.cost, br.current_cost)?;
            writeln!(out, "improved: {}", br.improved)?;
        }
        Cmd::Walk {
            wiring,
            game,
            scheduler,
            order,
            seed,
            max_steps,
            trace,
            out: final_path,
        } => {
            let w = parse_wiring(&read(&wiring)?)?;
            let g = load_game(&game, &w)?;
            enforce_caps(&g)?;
            let sched = match (scheduler, order) {
                (SchedArg::RoundRobin, Some(o)) => Scheduler::RoundRobin(o),
                (_, Some(_)) => bail!("--order only applies to the round-robin scheduler"),
                (s, None) => SchedulerKind::from(s).build(g.n(), seed),
            };
            let t = run_walk_with(&g, &w, &sched, WalkOptions::new(max_steps))?;
            match t.termination {
                Termination::Stable { at_step } => writeln!(out, "Stable after {at_step} steps")?,
                Termination::LoopDetected {
                    first_repeat_step,
                    period,
                    deviations_per_period,
                } => writeln!(
                    out,
                    "LoopDetected first_repeat_step={first_repeat_step} period={period} deviations_per_period={deviations_per_period}"
                )?,
                Termination::StepLimit => writeln!(out, "StepLimit after {} steps", t.steps)?,
            }
            writeln!(out, "deviations: {}", t.deviations())?;
            if let Some(c) = t.connectivity_step {
                writeln!(out, "strongly connected at step {c}")?;
            }
            if let Some(p) = trace {
                fs::write(&p, t.to_lines()).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = final_path {
                fs::write(&p, serialize_wiring(&t.final_wiring)).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Cmd::Cayley(a) => {
            if let Some(n) = a.scan {
                let r = dense_cayley_stability_scan(n)?;
                let bad = r.counterexamples().count();
                writeln!(out, "n={n}: {} dense Cayley wirings, {bad} unstable", r.entries.len())?;
                for e in r.counterexamples() {
                    writeln!(out, "unstable: factors {:?} generators {:?}", e.factors, e.generators)?;
                }
                return Ok(());
            }
            let factors = a.factors.expect("clap requires factors");
            let gens = expand_gens(&a.gens.expect("clap requires gens"), factors.split(',').count())?;
            let spec = CayleySpec::parse(&factors, &gens)?;
            if let Some(p) = &a.out {
                fs::write(p, serialize_wiring(&bdnf_core::cayley::generate_cayley(&spec)))?;
            }
            if a.check_stability {
                // The 5-cube, (32, 5), is just past the uniform cap but its
                // exact check takes milliseconds.
                if check_caps(spec.n(), spec.k()).is_err() && (spec.n() > CAYLEY_CHECK_MAX_N || spec.k() > 5) {
                    check_caps(spec.n(), spec.k())?;
                }
                let probe = instability_probe(&spec)?;
                match &probe.witness {
                    None => writeln!(out, "stable")?,
                    Some(d) => {
                        writeln!(out, "unstable")?;
                        write_deviation(out, d)?;
                        writeln!(out, "witness replays: {}", probe.witness_replays)?;
                    }
                }
            } else if a.out.is_none() {
                out.write_all(serialize_wiring(&bdnf_core::cayley::generate_cayley(&spec)).as_bytes())?;
            }
        }
        Cmd::Gadget {
            kind,
            penalty,
            gamma,
            eps,
            budget,
        } => {
            let inst = match kind {
                GadgetKind::Asymmetric => asymmetric_gadget(penalty)?,
                GadgetKind::Symmetric => {
                    let inst = symmetric_gadget(penalty, gamma, eps)?;
                    let p = &inst.params;
                    writeln!(
                        out,
                        "alpha={} beta={} gamma={}: alpha>gamma {} alpha>beta {} alpha(M-1)<beta(M-1)+gamma(M-2) {}",
                        p.alpha,
                        p.beta,
                        p.gamma,
                        p.alpha > p.gamma,
                        p.alpha > p.beta,
                        p.alpha * (penalty - 1.0) < p.beta * (penalty - 1.0) + p.gamma * (penalty - 2.0)
                    )?;
                    inst
                }
            };
            report_gadget(out, &inst, kind, budget)?;
        }
        Cmd::ReduceSat {
            cnf,
            out: path,
            search,
            budget,
        } => {
            let f = CnfFormula::parse_dimacs(&read(&cnf)?)?;
            let red = sat_reduction(&f, None)?;
            eprintln!("{} variables, {} clauses -> {} nodes", f.num_vars(), f.clauses().len(), red.n());
            emit(out, path.as_deref(), &serialize_game(&red.game))?;
            if search {
                let eq = exhaustive_ne_search(&red.game, None, budget)?;
                let verdict = if eq.is_some() { "pure equilibrium found" } else { "no pure equilibrium" };
                if path.is_some() {
                    writeln!(out, "{verdict}")?;
                } else {
                    eprintln!("{verdict}");
                }
            }
        }
        Cmd::Experiment {
            kind:
                ExperimentCmd::Convergence {
                    n,
                    k,
                    trials,
                    family,
                    wiring,
                    scheduler,
                    seed,
                    step_cap,
                    out: path,
                },
        } => {
            let family = match (family, wiring) {
                (FamilyArg::File, Some(p)) => Family::File(parse_wiring(&read(&p)?)?),
                (FamilyArg::File, None) => bail!("--family file needs --wiring"),
                (_, Some(_)) => bail!("--wiring only applies to --family file"),
                (FamilyArg::Regular, None) => Family::Regular,
                (FamilyArg::CyclePlusRandom, None) => Family::CyclePlusRandom,
                (FamilyArg::Random, None) => Family::Random,
                (FamilyArg::Empty, None) => Family::Empty,
            };
            let cfg = ExperimentConfig {
                n_values: parse_list(&n)?,
                k_values: parse_list(&k)?,
                trials,
                family,
                scheduler: scheduler.into(),
                seed,
                step_cap,
            };
            let rows = run_convergence_experiment(&cfg)?;
            match path {
                Some(p) => {
                    let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                    write_csv(&rows, io::BufWriter::new(f))?;
                }
                None => write_csv(&rows, &mut *out)?,
            }
        }
        Cmd::FindLoop {
            n,
            k,
            seed,
            budget,
            out: path,
        } => {
            check_caps(n, k)?;
            match find_looping_config(n, k, seed, budget)? {
                Some(c) => {
                    let Termination::LoopDetected {
                        period,
                        deviations_per_period,
                        ..
                    } = c.trace.termination
                    else {
                        unreachable!("find_looping_config only returns loops")
                    };
                    writeln!(out, "loop found after {} attempts", c.attempts)?;
                    writeln!(out, "period={period} deviations_per_period={deviations_per_period}")?;
                    writeln!(
                        out,
                        "order: {}",
                        c.order.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
                    )?;
                    emit(out, path.as_deref(), &serialize_wiring(&c.wiring))?;
                }
                None => bail!("no looping start found within {budget} attempts"),
            }
        }
    }
    Ok(())
}
