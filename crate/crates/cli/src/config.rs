//! Run configuration: the complete, serializable description of one run.
//!
//! ```json
//! {
//!   "params": { "alpha_ratio": 2.2, "eps_t2": 2.5 },
//!   "tolerances": { "rel_tol": 1e-10, "abs_tol": 1e-12 },
//!   "seed": 8798280375339745281,
//!   "output_dir": "runs/route1",
//!   "command": { "name": "route", "route": 1 }
//! }
//! ```
//!
//! Every field has a default. `alpha` is given only as `alpha/alpha_c` and
//! the detuning only as `eps T2`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use twinmaser::analytic::ns_pz;
use twinmaser::classify::{ClassifyOptions, GridSpec, RouteAxis, RouteSpec, DEFAULT_DIAGRAM_SEED};
use twinmaser::cycles::{ContinuationOptions, SettleOptions, ShootingOptions};
use twinmaser::integrate::{IntegratorOptions, LyapunovOptions};
use twinmaser::model::{DEFAULT_G, DEFAULT_P0, DEFAULT_T1, DEFAULT_T2};
use twinmaser::{Params, ReducedState};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub p0: f64,
    pub t1: f64,
    pub t2: f64,
    pub g: f64,
    pub alpha_ratio: f64,
    pub eps_t2: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            p0: DEFAULT_P0,
            t1: DEFAULT_T1,
            t2: DEFAULT_T2,
            g: DEFAULT_G,
            alpha_ratio: 2.2,
            eps_t2: 2.5,
        }
    }
}

impl PhysicalParams {
    pub fn to_params(&self) -> Result<Params, CliError> {
        if !(self.alpha_ratio.is_finite() && self.alpha_ratio >= 0.0) {
            return Err(CliError::Validation(format!(
                "alpha_ratio must be finite and non-negative (got {})",
                self.alpha_ratio
            )));
        }
        if !self.eps_t2.is_finite() {
            return Err(CliError::Validation("eps_t2 must be finite".into()));
        }
        let p = Params::new(self.p0, self.t1, self.t2, self.g, 0.0, 0.0)?
            .with_alpha_ratio(self.alpha_ratio)
            .with_eps_t2(self.eps_t2);
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = IntegratorOptions::default();
        Tolerances {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
        }
    }
}

impl Tolerances {
    pub fn integrator(&self) -> Result<IntegratorOptions, CliError> {
        let o = IntegratorOptions::with_tolerances(self.rel_tol, self.abs_tol);
        o.validate()?;
        Ok(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub command: Command,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: PhysicalParams::default(),
            tolerances: Tolerances::default(),
            seed: DEFAULT_DIAGRAM_SEED,
            output_dir: None,
            command: Command::FixedPoints,
        }
    }
}

impl RunConfig {
    /// Parses either a bare config or a manifest carrying one under `config`.
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let inner = match value.get("config") {
            Some(c) => c.clone(),
            None => value,
        };
        Ok(serde_json::from_value(inner)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Simulate(SimulateOptions),
    FixedPoints,
    Boundaries(BoundaryOptions),
    Cycle(CycleOptions),
    Route(RouteOptions),
    Diagram(DiagramOptions),
    Perturb(PerturbOptions),
    Correspond(CorrespondOptions),
    Lyapunov(LyapunovRunOptions),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FixedPoints => "fixed-points",
            Command::Boundaries(_) => "boundaries",
            Command::Cycle(_) => "cycle",
            Command::Route(_) => "route",
            Command::Diagram(_) => "diagram",
            Command::Perturb(_) => "perturb",
            Command::Correspond(_) => "correspond",
            Command::Lyapunov(_) => "lyapunov",
        }
    }
}

/// `x0` or the default start just off the no-signal point.
pub fn initial_state(x0: Option<[f64; 3]>, p: &Params) -> Result<ReducedState, CliError> {
    let x = x0
        .map(ReducedState::from_array)
        .unwrap_or(ReducedState::new(0.01, 0.0, ns_pz(p)));
    if !x.is_finite() {
        return Err(CliError::Validation("initial state must be finite".into()));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub x0: Option<[f64; 3]>,
    pub t_end: f64,
    /// Evenly spaced output rows; `None` writes one row per integrator step.
    pub samples: Option<usize>,
    /// Lift to the two-cell system before writing.
    pub full: bool,
    pub omega_c: f64,
    pub phi: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            x0: None,
            t_end: 2000.0,
            samples: None,
            full: false,
            omega_c: 1.0,
            phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryOptions {
    pub eps_t2_max: f64,
    pub alpha_ratio_max: f64,
    pub points: usize,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            eps_t2_max: 4.0,
            alpha_ratio_max: 12.0,
            points: 401,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleMode {
    Find,
    Refine,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleOptions {
    pub mode: CycleMode,
    /// Start of the settling run (`find`, and `continue` without a guess).
    pub x0: Option<[f64; 3]>,
    /// Guess for `refine`; also the start for `continue` when given.
    pub anchor: Option<[f64; 3]>,
    pub period: Option<f64>,
    pub t_settle: f64,
    pub t_observe: f64,
    pub axis: RouteAxis,
    pub target: Option<f64>,
    pub initial_step: f64,
    pub max_points: usize,
    pub tau_cap: f64,
    /// Rows in the one-period orbit CSV.
    pub samples: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        let s = SettleOptions::default();
        let c = ContinuationOptions::default();
        CycleOptions {
            mode: CycleMode::Find,
            x0: None,
            anchor: None,
            period: None,
            t_settle: s.t_settle,
            t_observe: s.t_observe,
            axis: RouteAxis::AlphaRatio,
            target: None,
            initial_step: c.initial_step,
            max_points: c.max_points,
            tau_cap: c.tau_cap,
            samples: 1000,
        }
    }
}

impl CycleOptions {
    pub fn settle(&self, integrator: IntegratorOptions) -> SettleOptions {
        SettleOptions {
            t_settle: self.t_settle,
            t_observe: self.t_observe,
            integrator,
            ..SettleOptions::default()
        }
    }

    pub fn shooting(&self, integrator: IntegratorOptions) -> ShootingOptions {
        ShootingOptions {
            integrator,
            ..ShootingOptions::default()
        }
    }

    pub fn continuation(&self, integrator: IntegratorOptions) -> ContinuationOptions {
        ContinuationOptions {
            initial_step: self.initial_step,
            max_points: self.max_points,
            tau_cap: self.tau_cap,
            shooting: self.shooting(integrator),
            ..ContinuationOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteOptions {
    pub route: u8,
    /// Overrides of the built-in route definition.
    pub fixed: Option<f64>,
    pub range: Option<(f64, f64)>,
    pub resolution: Option<f64>,
}

impl Default for RouteOptions {
    fn default() -> Self {
        RouteOptions {
            route: 1,
            fixed: None,
            range: None,
            resolution: None,
        }
    }
}

impl RouteOptions {
    pub fn spec(&self) -> Result<RouteSpec, CliError> {
        let mut s = RouteSpec::default_for(self.route)?;
        if let Some(f) = self.fixed {
            s.fixed = f;
        }
        if let Some(r) = self.range {
            s.range = r;
        }
        if let Some(r) = self.resolution {
            s.resolution = r;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagramOptions {
    pub eps_t2: (f64, f64),
    pub alpha_ratio: (f64, f64),
    pub n_eps: usize,
    pub n_alpha: usize,
    pub subsamples: usize,
    pub random_seeds: usize,
}

impl Default for DiagramOptions {
    fn default() -> Self {
        let g = GridSpec::default();
        DiagramOptions {
            eps_t2: g.eps_t2,
            alpha_ratio: g.alpha_ratio,
            n_eps: g.n_eps,
            n_alpha: g.n_alpha,
            subsamples: g.subsamples,
            random_seeds: g.random_seeds,
        }
    }
}

impl DiagramOptions {
    pub fn grid(&self, seed: u64) -> GridSpec {
        GridSpec {
            eps_t2: self.eps_t2,
            alpha_ratio: self.alpha_ratio,
            n_eps: self.n_eps,
            n_alpha: self.n_alpha,
            subsamples: self.subsamples,
            random_seeds: self.random_seeds,
            seed,
        }
    }

    pub fn classify(&self, integrator: IntegratorOptions) -> ClassifyOptions {
        ClassifyOptions {
            integrator,
            ..ClassifyOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbOptions {
    /// `alpha/alpha_c` range of the amplitude table.
    pub range: (f64, f64),
    pub points: usize,
    /// Rows of the waveform table at the configured parameters.
    pub samples: usize,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        PerturbOptions {
            range: (2.0, 2.5),
            points: 51,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftSource {
    /// The `+` twin fixed point.
    Tfp,
    /// The cycle reached from `x0`.
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrespondOptions {
    pub source: LiftSource,
    pub x0: Option<[f64; 3]>,
    pub omega_c: f64,
    pub phi: f64,
    /// Cycle periods to lift.
    pub periods: f64,
    pub samples: usize,
}

impl Default for CorrespondOptions {
    fn default() -> Self {
        CorrespondOptions {
            source: LiftSource::Cycle,
            x0: None,
            omega_c: 1.0,
            phi: 0.0,
            periods: 1.0,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovRunOptions {
    pub x0: Option<[f64; 3]>,
    pub t_transient: f64,
    pub t_horizon: f64,
    pub renorm_interval: f64,
    /// Evaluate in the two-cell system on the lifted start.
    pub full: bool,
    pub omega_c: f64,
}

impl Default for LyapunovRunOptions {
    fn default() -> Self {
        let l = LyapunovOptions::default();
        LyapunovRunOptions {
            x0: None,
            t_transient: l.t_transient,
            t_horizon: l.t_horizon,
            renorm_interval: l.renorm_interval,
            full: false,
            omega_c: 1.0,
        }
    }
}

impl LyapunovRunOptions {
    pub fn lyapunov(&self, integrator: IntegratorOptions) -> LyapunovOptions {
        LyapunovOptions {
            t_transient: self.t_transient,
            t_horizon: self.t_horizon,
            renorm_interval: self.renorm_interval,
            integrator,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = RunConfig::from_json(
            r#"{"params":{"alpha_ratio":3},"command":{"name":"route","route":4}}"#,
        )
        .unwrap();
        assert_eq!(c.params.alpha_ratio, 3.0);
        assert_eq!(c.params.t1, DEFAULT_T1);
        match c.command {
            Command::Route(r) => assert_eq!(r.route, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"parms":{}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command":{"name":"route","rout":1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command":{"name":"plot"}}"#).is_err());
    }

    #[test]
    fn manifest_wrapper_is_unwrapped() {
        let c = RunConfig::default();
        let m = serde_json::json!({ "config": c, "wall_time_s": 0.1 });
        assert_eq!(RunConfig::from_json(&m.to_string()).unwrap(), c);
    }

    #[test]
    fn alpha_is_given_as_a_ratio() {
        let p = PhysicalParams {
            alpha_ratio: 2.0,
            ..Default::default()
        }
        .to_params()
        .unwrap();
        assert!((p.alpha_ratio() - 2.0).abs() < 1e-15);
        assert!(PhysicalParams {
            alpha_ratio: -1.0,
            ..Default::default()
        }
        .to_params()
        .is_err());
    }
}
