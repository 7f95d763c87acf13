//! `shortpath`: command-line front end for the short-path laboratory.

mod output;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shortpath_core::eigensolve::{self, SolverConfig};
use shortpath_core::hilbert::{k_from_c, HsParams};
use shortpath_core::instance::random_instance;
use shortpath_core::shortpath::{Degree, RunConfig, Strength};
use shortpath_core::{bw, entropy, localize, reduce, shortpath, verify, walk};
use shortpath_core::{BasisMode, Caps, Error, Instance, Result};

#[derive(Parser)]
#[command(name = "shortpath", version, about = "Desk-scale laboratory for short-path Hamiltonians")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random choice of this invocation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (`-` for stdout).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest spin count for exhaustive enumeration.
    #[arg(long, global = true, env = shortpath_core::config::CAP_ENV)]
    cap_n: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Full,
    Even,
    Auto,
}

#[derive(Args, Clone)]
struct HamArgs {
    /// Relative strength: `B = -b E_0`.
    #[arg(long, default_value_t = 0.2, conflicts_with = "big_b")]
    b: f64,
    /// Absolute strength `B`.
    #[arg(long = "big-b")]
    big_b: Option<f64>,
    /// Odd exponent `K`.
    #[arg(long, default_value_t = 3, conflicts_with = "c")]
    k: u32,
    /// `K` = smallest odd integer `>= C log2 N`.
    #[arg(long)]
    c: Option<f64>,
}

impl HamArgs {
    fn strength(&self) -> Strength {
        match self.big_b {
            Some(b) => Strength::Absolute(b),
            None => Strength::Relative(self.b),
        }
    }

    fn degree(&self) -> Degree {
        match self.c {
            Some(c) => Degree::Log(c),
            None => Degree::Fixed(self.k),
        }
    }

    fn params(&self, inst: &Instance, mode: BasisMode, s: f64) -> Result<HsParams<f64>> {
        let k = match self.c {
            Some(c) => k_from_c(c, inst.n()),
            None => self.k,
        };
        let big_b = match self.big_b {
            Some(b) => b,
            None => {
                if !(0.0..1.0).contains(&self.b) {
                    return Err(Error::Input(format!("b = {} must lie in [0, 1)", self.b)));
                }
                let skip = eigensolve::ground_index(inst, mode)?;
                -self.b * inst.energy_bits(mode.config_of(skip)) as f64
            }
        };
        HsParams::new(s, big_b, k)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        terms: usize,
        /// `pm1`, `m1`, `p1`, or a comma-separated list of weights.
        #[arg(long, default_value = "pm1")]
        weights: String,
    },
    /// Ground energy, gap and `E^Q` of `H_s`.
    Spectrum {
        instance: PathBuf,
        #[command(flatten)]
        ham: HamArgs,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Include the ground vector.
        #[arg(long)]
        vector: bool,
    },
    /// Spectral data along a uniform `s` grid.
    Pathscan {
        instance: PathBuf,
        #[command(flatten)]
        ham: HamArgs,
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
    /// Self-consistent perturbative ground state and its bounds.
    Bw {
        instance: PathBuf,
        #[command(flatten)]
        ham: HamArgs,
        /// Also report the first `t` series terms at `E_{0,1}`.
        #[arg(long, default_value_t = 0)]
        series: u32,
    },
    /// Moments and return probabilities of the `K`-flip walk, or energy
    /// decay along the walk when an instance is given.
    Walk {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long, default_value_t = 8)]
        t_max: u32,
        #[arg(long, default_value_t = 100_000)]
        walks: u64,
    },
    /// Entropy/energy certificate for a low-energy state of `H_1`.
    Entropy {
        instance: PathBuf,
        #[command(flatten)]
        ham: HamArgs,
        #[arg(long, value_enum, default_value_t = StateArg::LargeX)]
        state: StateArg,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
    },
    /// Simulate the single-measurement algorithm.
    Shortpath {
        instance: PathBuf,
        #[command(flatten)]
        ham: HamArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0.5)]
        p_succ: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Approximate/exact hybrid driver.
    Hybrid {
        instance: PathBuf,
        #[command(flatten)]
        ham: HamArgs,
        #[arg(long)]
        n_samp: Option<u64>,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
    },
    /// Field sequence that makes the ground state unique, and its degree lift.
    Reduce {
        instance: PathBuf,
        /// Brute-force check of the lifted instance.
        #[arg(long)]
        lift: bool,
    },
    /// Gapped-path versus localized-state dichotomy.
    Dichotomy {
        instance: PathBuf,
        #[command(flatten)]
        ham: HamArgs,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
    },
    /// Invariant suite over a seeded instance battery.
    Verify {
        #[arg(long, value_enum, default_value_t = BatteryArg::Small)]
        battery: BatteryArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StateArg {
    Ground,
    LargeX,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BatteryArg {
    Small,
    Full,
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path)?
    };
    Ok(serde_json::from_str(&text)?)
}

fn parse_weights(spec: &str) -> Result<Vec<i64>> {
    match spec {
        "pm1" => Ok(vec![-1, 1]),
        "m1" => Ok(vec![-1]),
        "p1" => Ok(vec![1]),
        list => list
            .split(',')
            .map(|w| w.trim().parse().map_err(|_| Error::Input(format!("invalid weight {w:?}"))))
            .collect(),
    }
}

fn resolve_mode(arg: ModeArg, inst: &Instance) -> Result<BasisMode> {
    let mode = match arg {
        ModeArg::Full => BasisMode::Full,
        ModeArg::Even => BasisMode::Even,
        ModeArg::Auto => BasisMode::auto(inst),
    };
    mode.check(inst)?;
    Ok(mode)
}

#[derive(Serialize)]
struct ScanRow {
    s: f64,
    e_ground: f64,
    gap: f64,
    eq_ground: f64,
    eq_minus_e0: f64,
    gap_lemma_ok: bool,
}

#[derive(Serialize)]
struct MomentRow {
    l: u32,
    exact: String,
    value: f64,
}

#[derive(Serialize)]
struct WalkReport {
    n: usize,
    k: u32,
    mode: BasisMode,
    moments: Vec<MomentRow>,
    returns: Vec<walk::ReturnRow>,
}

#[derive(Serialize)]
struct ReduceReport {
    trace: reduce::ReductionTrace,
    choice_count: reduce::ChoiceCount,
    crossover: reduce::CrossoverAccounting,
    #[serde(skip_serializing_if = "Option::is_none")]
    lift: Option<reduce::LiftCheck>,
}

#[derive(Serialize)]
struct BwOutput {
    #[serde(flatten)]
    report: shortpath_core::BwReport64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    series: Vec<f64>,
}

enum Rendered {
    Done(String),
    Failed(String),
}

fn json_or_csv<T: Serialize, R: Serialize>(format: Format, value: &T, rows: impl FnOnce() -> Vec<R>) -> Result<String> {
    match format {
        Format::Json => output::to_json(value),
        Format::Csv => output::to_csv(&rows()),
    }
}

fn json_only<T: Serialize>(format: Format, value: &T) -> Result<String> {
    if format == Format::Csv {
        return Err(Error::Input("this command only emits JSON".into()));
    }
    output::to_json(value)
}

fn run(cli: Cli) -> Result<Rendered> {
    let g = &cli.global;
    let mut caps = Caps::default();
    if let Some(n) = g.cap_n {
        caps.exhaustive_n = n;
    }
    let solver = SolverConfig::<f64>::with_caps(caps);
    let run_cfg = |ham: &HamArgs| RunConfig {
        strength: ham.strength(),
        degree: ham.degree(),
        seed: g.seed,
        caps,
        ..RunConfig::default()
    };

    let text = match &cli.command {
        Command::Gen { n, d, terms, weights } => {
            let inst = random_instance(*n, *d, *terms, &parse_weights(weights)?, g.seed)?;
            json_only(g.format, &inst)?
        }
        Command::Spectrum {
            instance,
            ham,
            s,
            vector,
        } => {
            let inst = read_instance(instance)?;
            let mode = resolve_mode(g.mode, &inst)?;
            let p = ham.params(&inst, mode, *s)?;
            let mut report = eigensolve::spectral_report(&inst, &p, mode, &solver)?;
            if !vector {
                report.ground_vec = None;
            }
            json_only(g.format, &report)?
        }
        Command::Pathscan { instance, ham, grid } => {
            let inst = read_instance(instance)?;
            let mode = resolve_mode(g.mode, &inst)?;
            let p = ham.params(&inst, mode, 1.0)?;
            let grid = eigensolve::uniform_grid::<f64>(*grid);
            let scan = eigensolve::path_scan(&inst, p.big_b, p.k, &grid, mode, &solver)?;
            json_or_csv(g.format, &scan, || {
                scan.reports
                    .iter()
                    .enumerate()
                    .map(|(i, r)| ScanRow {
                        s: scan.grid[i],
                        e_ground: r.e_ground,
                        gap: r.gap,
                        eq_ground: r.eq_ground,
                        eq_minus_e0: r.eq_ground - r.e0 as f64,
                        gap_lemma_ok: !scan.gap_violations.contains(&i),
                    })
                    .collect()
            })?
        }
        Command::Bw { instance, ham, series } => {
            let inst = read_instance(instance)?;
            let mode = resolve_mode(g.mode, &inst)?;
            let p = ham.params(&inst, mode, 1.0)?;
            let report = bw::bw_report(&inst, &p, mode, &solver)?;
            let series = if *series > 0 {
                bw::series_terms(&inst, &p, mode, report.e01, *series)?
            } else {
                Vec::new()
            };
            json_only(g.format, &BwOutput { report, series })?
        }
        Command::Walk {
            n,
            instance,
            k,
            t_max,
            walks,
        } => match (instance, n) {
            (Some(path), _) => {
                let inst = read_instance(path)?;
                let (_, set) = inst.ground_set(&caps)?;
                let start = set.first().copied().unwrap_or(0);
                let rows = walk::mean_energy_decay(&inst, *k, *t_max, *walks, g.seed, start)?;
                json_or_csv(g.format, &rows, || rows.clone())?
            }
            (None, Some(n)) => {
                let mode = match g.mode {
                    ModeArg::Even => BasisMode::Even,
                    _ => BasisMode::Full,
                };
                let table = walk::MomentTable::new(*n, 2 * k * t_max, mode);
                let moments = table
                    .exact
                    .iter()
                    .zip(&table.values)
                    .enumerate()
                    .map(|(l, (e, v))| MomentRow {
                        l: l as u32,
                        exact: e.clone(),
                        value: *v,
                    })
                    .collect();
                let returns = walk::return_probabilities(*n, *k, *t_max, mode, *walks, g.seed)?;
                let report = WalkReport {
                    n: *n,
                    k: *k,
                    mode,
                    moments,
                    returns,
                };
                json_or_csv(g.format, &report, || report.returns.clone())?
            }
            (None, None) => return Err(Error::Input("walk needs --n or --instance".into())),
        },
        Command::Entropy {
            instance,
            ham,
            state,
            eta,
        } => {
            let inst = read_instance(instance)?;
            let mode = resolve_mode(g.mode, &inst)?;
            let p = ham.params(&inst, mode, 1.0)?;
            let cert = match state {
                StateArg::Ground => {
                    let (_, v) = eigensolve::ground(&inst, &p, mode, &solver)?;
                    entropy::qbad_certificate(&inst, &p, &v.to_full(), *eta, "ground", &caps)?
                }
                StateArg::LargeX => {
                    let cfg = run_cfg(ham);
                    let found = localize::find_psi(&inst, &p, mode, &solver)?;
                    let ls = localize::large_x_state(&inst, &p, &found.psi, cfg.regime(), None)?;
                    entropy::qbad_certificate(&inst, &p, &ls.xi, *eta, "large-x", &caps)?
                }
            };
            json_only(g.format, &cert)?
        }
        Command::Shortpath {
            instance,
            ham,
            trials,
            p_succ,
            epsilon,
        } => {
            let inst = read_instance(instance)?;
            let mode = resolve_mode(g.mode, &inst)?;
            let cfg = RunConfig {
                trials: *trials,
                p_succ_target: *p_succ,
                epsilon_model: *epsilon,
                ..run_cfg(ham)
            };
            json_only(g.format, &shortpath::simulate_unamplified::<f64>(&inst, &cfg, mode)?)?
        }
        Command::Hybrid {
            instance,
            ham,
            n_samp,
            eta,
        } => {
            let inst = read_instance(instance)?;
            let mode = resolve_mode(g.mode, &inst)?;
            let cfg = RunConfig {
                n_samp: *n_samp,
                eta: *eta,
                ..run_cfg(ham)
            };
            json_only(g.format, &shortpath::hybrid_run::<f64>(&inst, &cfg, mode)?)?
        }
        Command::Reduce { instance, lift } => {
            let inst = read_instance(instance)?;
            let trace = reduce::degeneracy_sequence(&inst, &caps)?;
            let lift = if *lift {
                Some(reduce::verify_lift(&inst, &trace, &caps)?)
            } else {
                None
            };
            let report = ReduceReport {
                choice_count: reduce::choice_count_bound(inst.n(), trace.n_gs_initial)?,
                crossover: reduce::crossover_accounting(inst.n(), trace.n_gs_initial)?,
                trace,
                lift,
            };
            json_or_csv(g.format, &report, || report.trace.steps.clone())?
        }
        Command::Dichotomy { instance, ham, eta } => {
            let inst = read_instance(instance)?;
            let mode = resolve_mode(g.mode, &inst)?;
            let cfg = RunConfig { eta: *eta, ..run_cfg(ham) };
            json_only(g.format, &shortpath::dichotomy_report(&inst, &cfg, mode)?)?
        }
        Command::Verify { battery } => {
            let (count, n_max, grid) = match battery {
                BatteryArg::Small => (10, 9, 11),
                BatteryArg::Full => (50, 12, 21),
            };
            let entries = verify::battery(count, g.seed, n_max)?;
            let report = verify::run_suite(&entries, grid, &caps);
            let text = json_only(g.format, &report)?;
            if !report.passed() {
                return Ok(Rendered::Failed(text));
            }
            text
        }
    };
    Ok(Rendered::Done(text))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Io(_) | Error::Json(_) => 2,
        Error::Numerical { .. } => 3,
        Error::Precondition(_) | Error::NotApplicable(_) => 4,
        Error::Resource { .. } => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let out = cli.global.output.clone();
    let result = run(cli).and_then(|r| match r {
        Rendered::Done(text) => output::emit(out.as_deref(), &text).map(|_| ExitCode::SUCCESS),
        Rendered::Failed(text) => output::emit(out.as_deref(), &text).map(|_| ExitCode::FAILURE),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
