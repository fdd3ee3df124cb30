//! Command-line pipelines for the twin spin-maser analysis.
//!
//! A run is fully described by a [`RunConfig`]: flags on the command line
//! are folded into an optional JSON config file, the command executes, and
//! the output directory receives the data files plus `manifest.json`, which
//! carries the resolved config and can be fed back with `--config`.

pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use twinmaser::classify::RouteAxis;

pub use commands::{execute, RunOutput};
pub use config::RunConfig;
pub use error::CliError;

use config::*;

pub const WORKERS_ENV: &str = "TWINMASER_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "twinmaser",
    version,
    about = "Bifurcation analysis of coupled twin spin masers"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run config, or a manifest from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: runs/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Feedback amplification as alpha/alpha_c.
    #[arg(long, global = true)]
    pub alpha_ratio: Option<f64>,
    /// Detuning as eps*T2.
    #[arg(long, global = true)]
    pub eps_t2: Option<f64>,
    #[arg(long, global = true)]
    pub p0: Option<f64>,
    #[arg(long, global = true)]
    pub t1: Option<f64>,
    #[arg(long, global = true)]
    pub t2: Option<f64>,
    #[arg(long, global = true)]
    pub g: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Re-run the command stored in --config.
    Run,
    /// Integrate one trajectory to CSV.
    Simulate {
        #[arg(long, value_parser = parse_triple)]
        x0: Option<[f64; 3]>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Write the lifted two-cell trajectory.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        omega_c: Option<f64>,
        #[arg(long)]
        phi: Option<f64>,
    },
    /// Equilibria and their eigenvalues.
    FixedPoints,
    /// Analytic stability boundaries.
    Boundaries {
        #[arg(long)]
        eps_t2_max: Option<f64>,
        #[arg(long)]
        alpha_ratio_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Find, refine or continue a limit cycle.
    Cycle {
        mode: ModeArg,
        #[command(flatten)]
        args: CycleArgs,
    },
    /// Scan one of the five routes for its bifurcation.
    Route {
        route: u8,
        #[arg(long)]
        fixed: Option<f64>,
        #[arg(long, value_parser = parse_pair)]
        range: Option<(f64, f64)>,
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Attractor labels over the (eps T2, alpha/alpha_c) plane.
    Diagram {
        /// Cells as <n_eps>x<n_alpha>.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(usize, usize)>,
        #[arg(long, value_parser = parse_pair)]
        eps_range: Option<(f64, f64)>,
        #[arg(long, value_parser = parse_pair)]
        alpha_range: Option<(f64, f64)>,
        #[arg(long)]
        subsamples: Option<usize>,
        #[arg(long)]
        random_seeds: Option<usize>,
    },
    /// Harmonic-balance amplitude near the supercritical Hopf point.
    Perturb {
        #[arg(long, value_parser = parse_pair)]
        range: Option<(f64, f64)>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Lift a reduced solution to both cells and check it.
    Correspond {
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        #[arg(long, value_parser = parse_triple)]
        x0: Option<[f64; 3]>,
        #[arg(long)]
        omega_c: Option<f64>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long)]
        periods: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Largest Lyapunov exponent with its running average.
    Lyapunov {
        #[arg(long, value_parser = parse_triple)]
        x0: Option<[f64; 3]>,
        #[arg(long)]
        t_transient: Option<f64>,
        #[arg(long)]
        t_horizon: Option<f64>,
        #[arg(long)]
        renorm_interval: Option<f64>,
        #[arg(long)]
        full: bool,
        #[arg(long)]
        omega_c: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Find,
    Refine,
    Continue,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Tfp,
    Cycle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    AlphaRatio,
    EpsT2,
}

#[derive(Debug, Args)]
pub struct CycleArgs {
    #[arg(long, value_parser = parse_triple)]
    pub x0: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_triple)]
    pub anchor: Option<[f64; 3]>,
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub t_settle: Option<f64>,
    #[arg(long)]
    pub t_observe: Option<f64>,
    #[arg(long, value_enum)]
    pub axis: Option<AxisArg>,
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub initial_step: Option<f64>,
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long)]
    pub tau_cap: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list::<3>(s)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    parse_list::<2>(s).map(|[a, b]| (a, b))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or("expected <n_eps>x<n_alpha>")?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((n(a)?, n(b)?))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// Options of the base config when it ran the same command, else defaults.
macro_rules! base {
    ($cfg:expr, $variant:ident) => {
        match &$cfg.command {
            Command::$variant(o) => o.clone(),
            _ => Default::default(),
        }
    };
}

/// Folds the command line into the config loaded from `--config`.
pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let g = cli.global;
    let mut cfg = match &g.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None if matches!(cli.command, CliCommand::Run) => {
            return Err(CliError::Validation("run needs --config".into()))
        }
        None => RunConfig::default(),
    };
    set(&mut cfg.params.alpha_ratio, g.alpha_ratio);
    set(&mut cfg.params.eps_t2, g.eps_t2);
    set(&mut cfg.params.p0, g.p0);
    set(&mut cfg.params.t1, g.t1);
    set(&mut cfg.params.t2, g.t2);
    set(&mut cfg.params.g, g.g);
    set(&mut cfg.tolerances.rel_tol, g.rel_tol);
    set(&mut cfg.tolerances.abs_tol, g.abs_tol);
    set(&mut cfg.seed, g.seed);
    set_opt(&mut cfg.output_dir, g.out);

    cfg.command = match cli.command {
        CliCommand::Run => cfg.command.clone(),
        CliCommand::Simulate {
            x0,
            t_end,
            samples,
            full,
            omega_c,
            phi,
        } => {
            let mut o: SimulateOptions = base!(cfg, Simulate);
            set_opt(&mut o.x0, x0);
            set(&mut o.t_end, t_end);
            set_opt(&mut o.samples, samples);
            o.full |= full;
            set(&mut o.omega_c, omega_c);
            set(&mut o.phi, phi);
            Command::Simulate(o)
        }
        CliCommand::FixedPoints => Command::FixedPoints,
        CliCommand::Boundaries {
            eps_t2_max,
            alpha_ratio_max,
            points,
        } => {
            let mut o: BoundaryOptions = base!(cfg, Boundaries);
            set(&mut o.eps_t2_max, eps_t2_max);
            set(&mut o.alpha_ratio_max, alpha_ratio_max);
            set(&mut o.points, points);
            Command::Boundaries(o)
        }
        CliCommand::Cycle { mode, args: a } => {
            let mut o: CycleOptions = base!(cfg, Cycle);
            o.mode = match mode {
                ModeArg::Find => CycleMode::Find,
                ModeArg::Refine => CycleMode::Refine,
                ModeArg::Continue => CycleMode::Continue,
            };
            set_opt(&mut o.x0, a.x0);
            set_opt(&mut o.anchor, a.anchor);
            set_opt(&mut o.period, a.period);
            set(&mut o.t_settle, a.t_settle);
            set(&mut o.t_observe, a.t_observe);
            set(
                &mut o.axis,
                a.axis.map(|x| match x {
                    AxisArg::AlphaRatio => RouteAxis::AlphaRatio,
                    AxisArg::EpsT2 => RouteAxis::EpsT2,
                }),
            );
            set_opt(&mut o.target, a.target);
            set(&mut o.initial_step, a.initial_step);
            set(&mut o.max_points, a.max_points);
            set(&mut o.tau_cap, a.tau_cap);
            set(&mut o.samples, a.samples);
            Command::Cycle(o)
        }
        CliCommand::Route {
            route,
            fixed,
            range,
            resolution,
        } => {
            let mut o: RouteOptions = base!(cfg, Route);
            if o.route != route {
                o = RouteOptions {
                    route,
                    ..Default::default()
                };
            }
            set_opt(&mut o.fixed, fixed);
            set_opt(&mut o.range, range);
            set_opt(&mut o.resolution, resolution);
            Command::Route(o)
        }
        CliCommand::Diagram {
            grid,
            eps_range,
            alpha_range,
            subsamples,
            random_seeds,
        } => {
            let mut o: DiagramOptions = base!(cfg, Diagram);
            if let Some((ne, na)) = grid {
                o.n_eps = ne;
                o.n_alpha = na;
            }
            set(&mut o.eps_t2, eps_range);
            set(&mut o.alpha_ratio, alpha_range);
            set(&mut o.subsamples, subsamples);
            set(&mut o.random_seeds, random_seeds);
            Command::Diagram(o)
        }
        CliCommand::Perturb {
            range,
            points,
            samples,
        } => {
            let mut o: PerturbOptions = base!(cfg, Perturb);
            set(&mut o.range, range);
            set(&mut o.points, points);
            set(&mut o.samples, samples);
            Command::Perturb(o)
        }
        CliCommand::Correspond {
            source,
            x0,
            omega_c,
            phi,
            periods,
            samples,
        } => {
            let mut o: CorrespondOptions = base!(cfg, Correspond);
            set(
                &mut o.source,
                source.map(|s| match s {
                    SourceArg::Tfp => LiftSource::Tfp,
                    SourceArg::Cycle => LiftSource::Cycle,
                }),
            );
            set_opt(&mut o.x0, x0);
            set(&mut o.omega_c, omega_c);
            set(&mut o.phi, phi);
            set(&mut o.periods, periods);
            set(&mut o.samples, samples);
            Command::Correspond(o)
        }
        CliCommand::Lyapunov {
            x0,
            t_transient,
            t_horizon,
            renorm_interval,
            full,
            omega_c,
        } => {
            let mut o: LyapunovRunOptions = base!(cfg, Lyapunov);
            set_opt(&mut o.x0, x0);
            set(&mut o.t_transient, t_transient);
            set(&mut o.t_horizon, t_horizon);
            set(&mut o.renorm_interval, renorm_interval);
            o.full |= full;
            set(&mut o.omega_c, omega_c);
            Command::Lyapunov(o)
        }
    };
    Ok(cfg)
}

/// Output directory of a resolved config.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(cfg.command.name()))
}

/// Executes `cfg` and writes its files and manifest; returns the summary.
pub fn run_and_write(
    cfg: &RunConfig,
    workers: Option<usize>,
) -> Result<serde_json::Value, CliError> {
    if workers == Some(0) {
        return Err(CliError::Validation("workers must be at least 1".into()));
    }
    let start = Instant::now();
    let out = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(|| execute(cfg, workers))?,
        None => execute(cfg, None)?,
    };
    let dir = output_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    for (name, contents) in &out.files {
        std::fs::write(dir.join(name), contents)?;
    }
    let manifest = json!({
        "config": cfg,
        "outputs": out.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "versions": { "twinmaser": twinmaser::VERSION, "twinmaser-cli": env!("CARGO_PKG_VERSION") },
        "workers": workers.unwrap_or_else(rayon::current_num_threads),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "summary": out.summary,
    });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(json!({ "output_dir": dir, "summary": out.summary }))
}
