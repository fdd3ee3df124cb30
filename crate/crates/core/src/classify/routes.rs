use serde::{Deserialize, Serialize};

use crate::analytic::ns_pz;
use crate::cycles::{
    continue_cycle, refine_cycle, settle_and_extract, unstable_pair_seed, ContinuationOptions,
    CycleBranch, FoldKind, LimitCycle, SettleOptions, Termination, DEFAULT_SEED_RADII,
};
use crate::error::{ClassifyError, CycleError};
use crate::integrate::{integrate_endpoint, IntegratorOptions, SweepParam};
use crate::linalg::eigenvalues3;
use crate::model::{reduced_jacobian, reduced_rhs, Params, ReducedState, ReducedSystem};
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Pitchfork,
    HopfSuper,
    HopfSub,
    Homoclinic,
    SaddleNodeOfCycles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteAxis {
    AlphaRatio,
    EpsT2,
}

impl RouteAxis {
    pub fn sweep(self) -> SweepParam {
        match self {
            RouteAxis::AlphaRatio => SweepParam::Alpha,
            RouteAxis::EpsT2 => SweepParam::Epsilon,
        }
    }
}

/// A one-parameter scan: the fixed coordinate, the scanned range on the
/// other axis and the coarse step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub route: u8,
    /// `eps T2` for routes 1 and 2, `alpha/alpha_c` for routes 3 to 5.
    pub fixed: f64,
    pub range: (f64, f64),
    pub resolution: f64,
}

impl RouteSpec {
    pub fn default_for(route: u8) -> Result<RouteSpec, ClassifyError> {
        let (fixed, range) = match route {
            1 => (1.0, (1.0, 1.5)),
            2 => (2.5, (1.9, 2.3)),
            3 => (10.0, (2.0, 2.1)),
            4 => (2.46, (1.9, 2.1)),
            5 => (4.9, (2.0, 2.2)),
            r => return Err(ClassifyError::UnknownRoute(r)),
        };
        Ok(RouteSpec {
            route,
            fixed,
            range,
            resolution: 0.01,
        })
    }

    pub fn axis(&self) -> RouteAxis {
        if self.route <= 2 {
            RouteAxis::AlphaRatio
        } else {
            RouteAxis::EpsT2
        }
    }

    /// Parameters at scan coordinate `x`.
    pub fn params_at(&self, base: &Params, x: f64) -> Params {
        match self.axis() {
            RouteAxis::AlphaRatio => base.with_eps_t2(self.fixed).with_alpha_ratio(x),
            RouteAxis::EpsT2 => base.with_alpha_ratio(self.fixed).with_eps_t2(x),
        }
    }

    fn validate(&self) -> Result<(), ClassifyError> {
        if !(1..=5).contains(&self.route) {
            return Err(ClassifyError::UnknownRoute(self.route));
        }
        let ok = self.fixed.is_finite()
            && self.fixed >= 0.0
            && self.range.0.is_finite()
            && self.range.1 > self.range.0
            && self.range.0 >= 0.0
            && self.resolution > 0.0
            && self.resolution <= self.range.1 - self.range.0;
        if ok {
            Ok(())
        } else {
            Err(ClassifyError::InvalidGrid(format!(
                "bad route specification {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventDiagnostics {
    /// Exponent of a power-law fit of the amplitude against the distance
    /// from the event.
    pub amplitude_exponent: Option<f64>,
    /// Prefactor of the square-root law fitted with the exponent fixed at ½.
    pub amplitude_prefactor: Option<f64>,
    /// `(parameter, amplitude)` pairs behind the fit.
    #[serde(default)]
    pub amplitude_series: Vec<(f64, f64)>,
    /// `(parameter, period)` along the branch used.
    #[serde(default)]
    pub period_series: Vec<(f64, f64)>,
    pub fold_multiplier: Option<f64>,
    pub fold_gap: Option<f64>,
    /// Smallest distance from the last cycle to the no-signal point.
    pub distance_to_saddle: Option<f64>,
    pub pz_max: Option<f64>,
    pub endpoint_period: Option<f64>,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub route: u8,
    pub axis: RouteAxis,
    pub location: f64,
    pub uncertainty: f64,
    pub diagnostics: EventDiagnostics,
}

impl BifurcationEvent {
    pub fn to_jsonl(events: &[BifurcationEvent]) -> String {
        events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }
}

/// Bisection steps after the coarse scan.
const BISECTIONS: usize = 10;
/// Offsets above the pitchfork at which the twin-point amplitude is measured.
const PITCHFORK_OFFSETS: [f64; 4] = [0.005, 0.01, 0.02, 0.04];
/// Window above the supercritical Hopf point used for the amplitude fit.
const HOPF_FIT_WINDOW: (f64, f64) = (0.005, 0.05);

/// Runs the detectors of one route.
///
/// Route 1 finds the pitchfork of the no-signal point, route 2 the
/// supercritical Hopf point by collapse of the stable cycle, routes 3 and 4
/// the subcritical Hopf point by collapse of the unstable pair, route 4
/// additionally the homoclinic point by period divergence of the stable
/// cycle, and route 5 the merger of cycles on the stable symmetric branch.
pub fn scan_route(spec: &RouteSpec, base: &Params) -> Result<Vec<BifurcationEvent>, ClassifyError> {
    spec.validate()?;
    match spec.route {
        1 => pitchfork(spec, base).map(|e| vec![e]),
        2 => supercritical_hopf(spec, base).map(|e| vec![e]),
        3 => subcritical_hopf(spec, base).map(|e| vec![e]),
        4 => {
            let (sub, homo) =
                rayon::join(|| subcritical_hopf(spec, base), || homoclinic(spec, base));
            Ok(vec![sub?, homo?])
        }
        _ => cycle_merger(spec, base).map(|e| vec![e]),
    }
}

fn inconclusive(
    spec: &RouteSpec,
    reason: impl Into<String>,
    diagnostics: EventDiagnostics,
) -> ClassifyError {
    ClassifyError::DetectorInconclusive {
        route: spec.route,
        reason: reason.into(),
        diagnostics: Box::new(diagnostics),
    }
}

fn event(
    spec: &RouteSpec,
    kind: EventKind,
    location: f64,
    uncertainty: f64,
    diagnostics: EventDiagnostics,
) -> BifurcationEvent {
    BifurcationEvent {
        kind,
        route: spec.route,
        axis: spec.axis(),
        location,
        uncertainty,
        diagnostics,
    }
}

/// Leading eigenvalue of the numeric no-signal Jacobian: `(real part, is real)`.
fn ns_leading(p: &Params) -> (f64, bool) {
    let ns = ReducedState::new(0.0, 0.0, ns_pz(p));
    let ev = eigenvalues3(&reduced_jacobian(&ns, p));
    let top = ev
        .iter()
        .copied()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .expect("three eigenvalues");
    (top.re, top.im.abs() <= 1e-12)
}

fn pitchfork(spec: &RouteSpec, base: &Params) -> Result<BifurcationEvent, ClassifyError> {
    let g = |x: f64| ns_leading(&spec.params_at(base, x)).0;
    let n = ((spec.range.1 - spec.range.0) / spec.resolution).round() as usize;
    let xs: Vec<f64> = (0..=n)
        .map(|i| (spec.range.0 + i as f64 * spec.resolution).min(spec.range.1))
        .collect();
    let Some(k) = xs.windows(2).position(|w| g(w[0]) < 0.0 && g(w[1]) >= 0.0) else {
        return Err(inconclusive(
            spec,
            "no-signal point keeps its stability across the range",
            EventDiagnostics::default(),
        ));
    };
    let (mut lo, mut hi) = (xs[k], xs[k + 1]);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let loc = 0.5 * (lo + hi);
    if !ns_leading(&spec.params_at(base, hi)).1 {
        return Err(inconclusive(
            spec,
            "destabilizing eigenvalue is complex",
            EventDiagnostics::default(),
        ));
    }
    let mut series = Vec::new();
    for d in PITCHFORK_OFFSETS {
        let p = spec.params_at(base, loc + d);
        match settled_twin_point(&p) {
            Some(x) => series.push((d, x.a.abs())),
            None => {
                let diag = EventDiagnostics {
                    amplitude_series: series,
                    ..Default::default()
                };
                return Err(inconclusive(
                    spec,
                    format!("no twin point reached at offset {d}"),
                    diag,
                ));
            }
        }
    }
    let logs: Vec<(f64, f64)> = series.iter().map(|&(d, a)| (d.ln(), a.ln())).collect();
    let diag = EventDiagnostics {
        amplitude_exponent: Some(linear_fit(&logs).0),
        amplitude_prefactor: Some(sqrt_prefactor(&series)),
        amplitude_series: series.iter().map(|&(d, a)| (loc + d, a)).collect(),
        ..Default::default()
    };
    Ok(event(
        spec,
        EventKind::Pitchfork,
        loc,
        0.5 * (hi - lo),
        diag,
    ))
}

/// Integrates away from the no-signal point until the orbit rests, then
/// polishes with Newton on the vector field. `None` unless the result is an
/// equilibrium off the `A = B = 0` axis.
fn settled_twin_point(p: &Params) -> Option<ReducedState> {
    let x0 = ReducedState::new(1e-3, 0.0, ns_pz(p));
    let opts = IntegratorOptions::default();
    let mut x = integrate_endpoint(&ReducedSystem(p), x0.to_array(), (0.0, 20_000.0), opts).ok()?;
    for _ in 0..50 {
        let s = ReducedState::from_array(x);
        let f = reduced_rhs(&s, p).to_array();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-14 {
            break;
        }
        let j = reduced_jacobian(&s, p);
        let step = j.lu().solve(&nalgebra::Vector3::from(f))?;
        for i in 0..3 {
            x[i] -= step[i];
        }
    }
    let s = ReducedState::from_array(x);
    let rest = reduced_rhs(&s, p)
        .to_array()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        < 1e-12;
    (rest && s.a.abs() > 1e-6).then_some(s)
}

/// Least-squares `k` in `y = k sqrt(x)`.
fn sqrt_prefactor(series: &[(f64, f64)]) -> f64 {
    let num: f64 = series.iter().map(|&(x, y)| y * x.sqrt()).sum();
    let den: f64 = series.iter().map(|&(x, _)| x).sum();
    num / den
}

fn period_series(br: &CycleBranch) -> Vec<(f64, f64)> {
    br.points
        .iter()
        .map(|bp| (bp.param, bp.cycle.period))
        .collect()
}

fn from_cycle_error(spec: &RouteSpec, what: &str, e: CycleError) -> ClassifyError {
    inconclusive(spec, format!("{what}: {e}"), EventDiagnostics::default())
}

/// Settles and refines the stable cycle at scan coordinate `x`, retrying
/// once with a four times longer transient.
fn stable_cycle(
    spec: &RouteSpec,
    base: &Params,
    x: f64,
) -> Result<(Params, LimitCycle), ClassifyError> {
    let p = spec.params_at(base, x);
    let x0 = ReducedState::new(0.01, 0.0, ns_pz(&p));
    let mut opts = SettleOptions::default();
    let cand = match settle_and_extract(&x0, &p, &opts) {
        Ok(c) => c,
        Err(CycleError::NotPeriodic) => {
            opts.t_settle *= 4.0;
            settle_and_extract(&x0, &p, &opts)
                .map_err(|e| from_cycle_error(spec, "settling the stable cycle", e))?
        }
        Err(e) => return Err(from_cycle_error(spec, "settling the stable cycle", e)),
    };
    let c = refine_cycle(&cand, &p)
        .map_err(|e| from_cycle_error(spec, "refining the stable cycle", e))?;
    Ok((p, c))
}

/// Location and uncertainty of a collapse endpoint, checked against the
/// scan resolution.
fn collapse_location(
    spec: &RouteSpec,
    br: &CycleBranch,
    diag: &EventDiagnostics,
) -> Result<(f64, f64), ClassifyError> {
    if br.termination != Termination::AmplitudeCollapse {
        return Err(inconclusive(
            spec,
            format!("branch ended by {:?}", br.termination),
            diag.clone(),
        ));
    }
    let Some(end) = br.endpoint else {
        return Err(inconclusive(
            spec,
            "collapse without an endpoint estimate",
            diag.clone(),
        ));
    };
    let unc = (end - br.last().param).abs().max(f64::EPSILON * end.abs());
    if unc > spec.resolution {
        return Err(inconclusive(
            spec,
            format!("endpoint uncertainty {unc} exceeds the resolution"),
            diag.clone(),
        ));
    }
    Ok((end, unc))
}

fn supercritical_hopf(spec: &RouteSpec, base: &Params) -> Result<BifurcationEvent, ClassifyError> {
    let (p, c) = stable_cycle(spec, base, spec.range.1)?;
    let br = continue_cycle(
        &c,
        &p,
        spec.axis().sweep(),
        spec.range.0,
        &ContinuationOptions::default(),
    )
    .map_err(|e| from_cycle_error(spec, "continuing the stable cycle", e))?;
    let mut diag = EventDiagnostics {
        period_series: period_series(&br),
        termination: Some(br.termination),
        endpoint_period: Some(br.last().cycle.period),
        amplitude_series: br
            .points
            .iter()
            .map(|bp| (bp.param, bp.cycle.metrics.a_max))
            .collect(),
        ..Default::default()
    };
    let (loc, unc) = collapse_location(spec, &br, &diag)?;
    // The complex pair of the no-signal point must cross where the cycle dies.
    let below = ns_leading(&spec.params_at(base, loc - spec.resolution));
    let above = ns_leading(&spec.params_at(base, loc + spec.resolution));
    if !(below.0 < 0.0 && above.0 > 0.0 && !above.1) {
        return Err(inconclusive(
            spec,
            "no complex-pair crossing of the no-signal point at the endpoint",
            diag,
        ));
    }
    let window: Vec<(f64, f64)> = diag
        .amplitude_series
        .iter()
        .map(|&(x, a)| (x - loc, a))
        .filter(|&(d, _)| d >= HOPF_FIT_WINDOW.0 && d <= HOPF_FIT_WINDOW.1)
        .collect();
    if window.len() >= 2 {
        let logs: Vec<(f64, f64)> = window.iter().map(|&(d, a)| (d.ln(), a.ln())).collect();
        diag.amplitude_exponent = Some(linear_fit(&logs).0);
        diag.amplitude_prefactor = Some(sqrt_prefactor(&window));
    }
    Ok(event(spec, EventKind::HopfSuper, loc, unc, diag))
}

fn subcritical_hopf(spec: &RouteSpec, base: &Params) -> Result<BifurcationEvent, ClassifyError> {
    let p = spec.params_at(base, spec.range.0);
    let opts = ContinuationOptions::default();
    let mut last_reason = String::from("no seed radius produced an unstable cycle");
    for r in DEFAULT_SEED_RADII {
        let (q, seeds) = unstable_pair_seed(&p, None, r)
            .map_err(|e| from_cycle_error(spec, "seeding the unstable pair", e))?;
        let c = match refine_cycle(&seeds[0], &q) {
            Ok(c) if !c.stable && c.metrics.extent() > opts.collapse_extent => c,
            Ok(_) => continue,
            Err(e) => {
                last_reason = format!("refining the seed of radius {r}: {e}");
                continue;
            }
        };
        let br = match continue_cycle(&c, &q, spec.axis().sweep(), spec.range.1, &opts) {
            Ok(b) => b,
            Err(e) => {
                last_reason = format!("continuing from radius {r}: {e}");
                continue;
            }
        };
        if br.termination != Termination::AmplitudeCollapse {
            last_reason = format!("branch from radius {r} ended by {:?}", br.termination);
            continue;
        }
        let mut diag = EventDiagnostics {
            period_series: period_series(&br),
            termination: Some(br.termination),
            endpoint_period: Some(br.last().cycle.period),
            amplitude_series: br
                .points
                .iter()
                .map(|bp| {
                    (
                        bp.param,
                        0.5 * (bp.cycle.metrics.a_max - bp.cycle.metrics.a_min),
                    )
                })
                .collect(),
            ..Default::default()
        };
        let (loc, unc) = collapse_location(spec, &br, &diag)?;
        let fit: Vec<(f64, f64)> = diag
            .amplitude_series
            .iter()
            .filter(|&&(x, a)| loc - x > 0.0 && a > 0.0)
            .map(|&(x, a)| ((loc - x).ln(), a.ln()))
            .collect();
        if fit.len() >= 3 {
            diag.amplitude_exponent = Some(linear_fit(&fit).0);
        }
        return Ok(event(spec, EventKind::HopfSub, loc, unc, diag));
    }
    Err(inconclusive(spec, last_reason, EventDiagnostics::default()))
}

fn homoclinic(spec: &RouteSpec, base: &Params) -> Result<BifurcationEvent, ClassifyError> {
    let (p, c) = stable_cycle(spec, base, spec.range.1)?;
    let opts = ContinuationOptions::default();
    let br = continue_cycle(&c, &p, spec.axis().sweep(), spec.range.0, &opts)
        .map_err(|e| from_cycle_error(spec, "continuing the stable cycle", e))?;
    let last = br.last();
    let diag = EventDiagnostics {
        period_series: period_series(&br),
        termination: Some(br.termination),
        endpoint_period: Some(last.cycle.period),
        distance_to_saddle: Some(last.cycle.metrics.min_distance_to_ns),
        pz_max: Some(last.cycle.metrics.pz_max),
        ..Default::default()
    };
    if br.termination != Termination::PeriodDivergence {
        return Err(inconclusive(
            spec,
            format!("branch ended by {:?}", br.termination),
            diag,
        ));
    }
    // The event lies within the run of points whose period is already a
    // tenth of the cap.
    let loc = last.param;
    let unc = br
        .points
        .iter()
        .rev()
        .take_while(|bp| bp.cycle.period >= 0.1 * opts.tau_cap)
        .map(|bp| (bp.param - loc).abs())
        .fold(0.0, f64::max);
    if unc > spec.resolution {
        return Err(inconclusive(
            spec,
            format!("period divergence spread over {unc}"),
            diag,
        ));
    }
    Ok(event(spec, EventKind::Homoclinic, loc, unc, diag))
}

fn cycle_merger(spec: &RouteSpec, base: &Params) -> Result<BifurcationEvent, ClassifyError> {
    let (p, c) = stable_cycle(spec, base, spec.range.1)?;
    let br = continue_cycle(
        &c,
        &p,
        spec.axis().sweep(),
        spec.range.0,
        &ContinuationOptions::default(),
    )
    .map_err(|e| from_cycle_error(spec, "continuing the stable cycle", e))?;
    let mut diag = EventDiagnostics {
        period_series: period_series(&br),
        termination: Some(br.termination),
        ..Default::default()
    };
    let Some(f) = br.folds.first() else {
        return Err(inconclusive(spec, "no fold on the stable branch", diag));
    };
    diag.fold_multiplier = Some(f.multiplier);
    diag.fold_gap = Some(f.gap);
    diag.pz_max = Some(br.points[f.before].cycle.metrics.pz_max);
    let unc = match (f.kind, f.partner_param) {
        (FoldKind::SymmetricMerger, Some(q)) => (q - f.param).abs(),
        _ => (br.points[f.after].param - br.points[f.before].param).abs(),
    };
    Ok(event(
        spec,
        EventKind::SaddleNodeOfCycles,
        f.param,
        unc.min(spec.resolution),
        diag,
    ))
}
