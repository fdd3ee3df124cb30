//! Attractor classification, the parameter-plane stability diagram and
//! per-route bifurcation detectors.

mod diagram;
mod routes;

pub use diagram::{
    stability_diagram, DiagramCell, GridSpec, PhaseDiagram, Polyline, Region, DEFAULT_DIAGRAM_SEED,
};
pub use routes::{scan_route, BifurcationEvent, EventDiagnostics, EventKind, RouteAxis, RouteSpec};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{ns_fixed_point, tfp_fixed_points, FixedPoint, FixedPointKind};
use crate::cycles::{settle_and_extract, CycleCandidate, SettleOptions};
use crate::error::CycleError;
use crate::integrate::{
    find_section_crossings, integrate, integrate_endpoint, lyapunov_max, Direction,
    IntegratorOptions, LyapunovOptions,
};
use crate::model::{reduced_rhs_array, Params, ReducedState, ReducedSystem};
use crate::stats::std_dev;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttractorKind {
    NoSignalFP,
    TwinFP,
    LimitCycle,
    Chaos,
}

impl AttractorKind {
    pub fn name(self) -> &'static str {
        match self {
            AttractorKind::NoSignalFP => "NoSignalFP",
            AttractorKind::TwinFP => "TwinFP",
            AttractorKind::LimitCycle => "LimitCycle",
            AttractorKind::Chaos => "Chaos",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Evidence {
    /// The orbit came to rest at an equilibrium.
    FixedPoint {
        state: ReducedState,
        eigenvalues: [Complex64; 3],
        distance: f64,
    },
    /// Returns to the A-maximum section repeated within tolerance.
    ReturnMap {
        period: f64,
        spread: f64,
    },
    /// Positive largest Lyapunov exponent (s⁻¹).
    Lyapunov {
        exponent: f64,
    },
    Undetermined {
        exponent: Option<f64>,
        note: String,
    },
}

/// Outcome of classifying one initial condition. `kind` is `None` exactly
/// when the evidence is [`Evidence::Undetermined`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorLabel {
    pub kind: Option<AttractorKind>,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub t_settle: f64,
    pub t_observe: f64,
    /// Horizons are multiplied by this on the single retry.
    pub retry_factor: f64,
    /// Largest Lyapunov exponent above which motion is chaotic (s⁻¹).
    pub chaos_tol: f64,
    pub lyapunov_horizon: f64,
    /// `|dx/dt|` below which the state is at rest.
    pub speed_tol: f64,
    /// Distance within which a resting state is matched to an equilibrium.
    pub match_tol: f64,
    pub return_tol: f64,
    pub integrator: IntegratorOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            t_settle: 800.0,
            t_observe: 400.0,
            retry_factor: 4.0,
            chaos_tol: 1e-3,
            lyapunov_horizon: 2000.0,
            speed_tol: 1e-10,
            match_tol: 1e-6,
            return_tol: 1e-6,
            integrator: IntegratorOptions::default(),
        }
    }
}

enum Attempt {
    Done(AttractorLabel),
    /// Contracting onto a point that has not yet come to rest.
    Point(ReducedState),
    /// Neither periodic nor chaotic within the horizon.
    Slow(Option<f64>),
}

/// Classifies the attractor reached from `x0`.
///
/// The cascade is: at rest at a known equilibrium, then a periodic return
/// map, then the largest Lyapunov exponent. Anything unresolved is retried
/// once from where it stopped with longer horizons before being reported as
/// undetermined.
pub fn classify_attractor(x0: &ReducedState, p: &Params, opts: &ClassifyOptions) -> AttractorLabel {
    let fps = equilibria(p);
    let first = attempt(
        x0.to_array(),
        p,
        opts.t_settle,
        opts.t_observe,
        false,
        opts,
        &fps,
    );
    let (x, pending) = match first {
        Ok((Attempt::Done(l), _)) => return l,
        Ok((a, x)) => (x, a),
        Err(e) => return undetermined(None, e.to_string()),
    };
    let f = opts.retry_factor;
    let second = attempt(
        x,
        p,
        f * opts.t_settle,
        f * opts.t_observe,
        true,
        opts,
        &fps,
    );
    match second {
        Ok((Attempt::Done(l), _)) => l,
        Ok((Attempt::Point(s), _)) => match nearest_equilibrium(&s, &fps, opts.match_tol.max(1e-3))
        {
            Some(l) => l,
            None => undetermined(None, "contracting toward an unknown point".into()),
        },
        Ok((Attempt::Slow(exp), _)) => {
            let exp = exp.or(match pending {
                Attempt::Slow(e) => e,
                _ => None,
            });
            undetermined(exp, "no periodic return and no positive exponent".into())
        }
        Err(e) => undetermined(None, e.to_string()),
    }
}

fn undetermined(exponent: Option<f64>, note: String) -> AttractorLabel {
    AttractorLabel {
        kind: None,
        evidence: Evidence::Undetermined { exponent, note },
    }
}

fn equilibria(p: &Params) -> Vec<FixedPoint> {
    let mut v = vec![ns_fixed_point(p)];
    if let Ok((a, b)) = tfp_fixed_points(p) {
        v.push(a);
        v.push(b);
    }
    v
}

fn nearest_equilibrium(x: &ReducedState, fps: &[FixedPoint], tol: f64) -> Option<AttractorLabel> {
    let (fp, d) = fps
        .iter()
        .map(|fp| (fp, fp.state.distance(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    (d <= tol).then(|| equilibrium_label(fp, d))
}

fn equilibrium_label(fp: &FixedPoint, distance: f64) -> AttractorLabel {
    AttractorLabel {
        kind: Some(match fp.kind {
            FixedPointKind::NoSignal => AttractorKind::NoSignalFP,
            FixedPointKind::TwinPlus | FixedPointKind::TwinMinus => AttractorKind::TwinFP,
        }),
        evidence: Evidence::FixedPoint {
            state: fp.state,
            eigenvalues: fp.eigenvalues,
            distance,
        },
    }
}

fn speed(x: &[f64; 3], p: &Params) -> f64 {
    reduced_rhs_array(x, p)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// One pass of the cascade; returns the state reached for a possible retry.
/// Motion that is not periodic is only tested for chaos on the final pass,
/// so that slow transients toward a cycle get the longer horizon first.
fn attempt(
    x0: [f64; 3],
    p: &Params,
    t_settle: f64,
    t_observe: f64,
    final_pass: bool,
    opts: &ClassifyOptions,
    fps: &[FixedPoint],
) -> Result<(Attempt, [f64; 3]), CycleError> {
    let x = integrate_endpoint(&ReducedSystem(p), x0, (0.0, t_settle), opts.integrator)?;
    let state = ReducedState::from_array(x);
    if speed(&x, p) < opts.speed_tol {
        if let Some(l) = nearest_equilibrium(&state, fps, opts.match_tol) {
            return Ok((Attempt::Done(l), x));
        }
    }
    let so = SettleOptions {
        t_settle: 0.0,
        t_observe,
        return_tol: opts.return_tol,
        integrator: opts.integrator,
        ..SettleOptions::default()
    };
    match settle_and_extract(&state, p, &so) {
        Ok(c) => {
            if let Some(l) = contracting_focus(&c, p, t_observe, opts, fps)? {
                return Ok((Attempt::Done(l), x));
            }
            let label = AttractorLabel {
                kind: Some(AttractorKind::LimitCycle),
                evidence: Evidence::ReturnMap {
                    period: c.period,
                    spread: c.spread,
                },
            };
            Ok((Attempt::Done(label), x))
        }
        Err(CycleError::FixedPointReached { state: s }) => {
            let s = ReducedState::from_array(s);
            if speed(&s.to_array(), p) < opts.speed_tol {
                if let Some(l) = nearest_equilibrium(&s, fps, opts.match_tol) {
                    return Ok((Attempt::Done(l), s.to_array()));
                }
            }
            Ok((Attempt::Point(s), s.to_array()))
        }
        Err(CycleError::NotPeriodic) if !final_pass => Ok((Attempt::Slow(None), x)),
        Err(CycleError::NotPeriodic) => {
            let lo = LyapunovOptions {
                t_transient: 0.0,
                t_horizon: opts.lyapunov_horizon * t_settle / opts.t_settle.max(f64::MIN_POSITIVE),
                integrator: opts.integrator,
                ..LyapunovOptions::default()
            };
            let est = lyapunov_max(&state, p, &lo)?;
            if est.exponent > opts.chaos_tol {
                let label = AttractorLabel {
                    kind: Some(AttractorKind::Chaos),
                    evidence: Evidence::Lyapunov {
                        exponent: est.exponent,
                    },
                };
                Ok((Attempt::Done(label), x))
            } else if let Some(l) = approaching_equilibrium(&state, &est.final_state, fps) {
                Ok((Attempt::Done(l), est.final_state.to_array()))
            } else {
                Ok((
                    Attempt::Slow(Some(est.exponent)),
                    est.final_state.to_array(),
                ))
            }
        }
        Err(e) => Err(e),
    }
}

/// A spiral into a weakly attracting focus repeats its returns almost
/// exactly. It is told apart from a cycle by integrating whole periods from
/// the anchor: the distance to a linearly stable equilibrium shrinks on a
/// spiral and stays put on a cycle.
fn contracting_focus(
    c: &CycleCandidate,
    p: &Params,
    t_observe: f64,
    opts: &ClassifyOptions,
    fps: &[FixedPoint],
) -> Result<Option<AttractorLabel>, CycleError> {
    let turns = (t_observe / c.period).ceil().max(1.0);
    let mut end = None;
    for fp in fps.iter().filter(|fp| fp.max_real_part() < 0.0) {
        let d0 = fp.state.distance(&c.anchor);
        let x = match end {
            Some(x) => x,
            None => *end.insert(integrate_endpoint(
                &ReducedSystem(p),
                c.anchor.to_array(),
                (0.0, turns * c.period),
                opts.integrator,
            )?),
        };
        let d1 = fp.state.distance(&ReducedState::from_array(x));
        if d1 < (1.0 - FOCUS_CONTRACTION) * d0 {
            return Ok(Some(equilibrium_label(fp, d1)));
        }
    }
    Ok(None)
}

/// Label of a linearly stable equilibrium that the motion from `from` to
/// `to` closes in on.
fn approaching_equilibrium(
    from: &ReducedState,
    to: &ReducedState,
    fps: &[FixedPoint],
) -> Option<AttractorLabel> {
    let fp = fps
        .iter()
        .filter(|fp| fp.max_real_part() < 0.0)
        .min_by(|a, b| a.state.distance(to).total_cmp(&b.state.distance(to)))?;
    let (d0, d1) = (fp.state.distance(from), fp.state.distance(to));
    (d1 < APPROACH_RADIUS && d1 < (1.0 - FOCUS_CONTRACTION) * d0).then(|| equilibrium_label(fp, d1))
}

/// Distance within which a slowly contracting orbit is attributed to an
/// equilibrium.
const APPROACH_RADIUS: f64 = 1e-2;

/// Relative shrinkage over the test window that marks a spiral.
const FOCUS_CONTRACTION: f64 = 1e-3;

/// Local maxima of `Pz` on the steady part of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PzMaxima {
    /// `(t, Pz_max)` with `t` measured from the end of the settling phase.
    pub maxima: Vec<(f64, f64)>,
    /// Standard deviation of the maxima.
    pub scatter: f64,
}

impl PzMaxima {
    pub fn to_csv(&self) -> String {
        crate::io::csv_table("t,pz_max", self.maxima.iter().map(|&(t, v)| [t, v]))
    }
}

/// `Pz` maxima over `duration` seconds after `t_settle` seconds of
/// transient, with their scatter as a chaos indicator.
pub fn poincare_maxima_scatter(
    p: &Params,
    x0: &ReducedState,
    duration: f64,
    t_settle: f64,
    opts: IntegratorOptions,
) -> Result<PzMaxima, CycleError> {
    if !(duration >= 200.0) {
        return Err(CycleError::Integrate(crate::IntegrateError::InvalidInput(
            format!("duration {duration} s is below the 200 s minimum"),
        )));
    }
    let sys = ReducedSystem(p);
    let x = integrate_endpoint(&sys, x0.to_array(), (0.0, t_settle.max(0.0)), opts)?;
    let traj = integrate(&sys, x, (0.0, duration), opts)?;
    let maxima: Vec<(f64, f64)> =
        find_section_crossings(&traj, |y| reduced_rhs_array(y, p)[2], Direction::Falling)
            .into_iter()
            .map(|e| (e.t, e.state[2]))
            .collect();
    let values: Vec<f64> = maxima.iter().map(|m| m.1).collect();
    Ok(PzMaxima {
        scatter: std_dev(&values),
        maxima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::ns_pz;

    #[test]
    fn quiet_below_threshold() {
        let p = Params::at(1.1, 1.0);
        let x0 = ReducedState::new(1e-3, 0.0, ns_pz(&p) + 1e-3);
        let l = classify_attractor(&x0, &p, &ClassifyOptions::default());
        assert_eq!(l.kind, Some(AttractorKind::NoSignalFP), "{l:?}");
    }

    #[test]
    fn twin_point_region() {
        let p = Params::at(3.0, 0.5);
        let (plus, _) = tfp_fixed_points(&p).unwrap();
        let x0 = ReducedState::new(plus.state.a + 1e-3, plus.state.b, plus.state.pz);
        let l = classify_attractor(&x0, &p, &ClassifyOptions::default());
        assert_eq!(l.kind, Some(AttractorKind::TwinFP), "{l:?}");
        match l.evidence {
            Evidence::FixedPoint { distance, .. } => assert!(distance < 1e-6),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn cycle_region() {
        let p = Params::at(2.46, 2.1);
        let l = classify_attractor(
            &ReducedState::new(0.3, -0.1, 0.2),
            &p,
            &ClassifyOptions::default(),
        );
        assert_eq!(l.kind, Some(AttractorKind::LimitCycle), "{l:?}");
    }

    #[test]
    fn chaotic_region() {
        let p = Params::at(4.9, 2.045);
        let x0 = ReducedState::new(0.01, 0.0, ns_pz(&p));
        let l = classify_attractor(&x0, &p, &ClassifyOptions::default());
        assert_eq!(l.kind, Some(AttractorKind::Chaos), "{l:?}");
    }

    #[test]
    fn pz_scatter_separates_cycle_from_chaos() {
        let opts = IntegratorOptions::default();
        let p = Params::at(4.9, 2.2);
        let x0 = ReducedState::new(0.01, 0.0, ns_pz(&p));
        let cyc = poincare_maxima_scatter(&p, &x0, 1000.0, 1600.0, opts).unwrap();
        assert!(cyc.maxima.len() > 10);
        assert!(cyc.scatter <= 1e-7, "{}", cyc.scatter);
        let q = Params::at(4.9, 2.045);
        let ch = poincare_maxima_scatter(&q, &x0, 1000.0, 800.0, opts).unwrap();
        assert!(
            ch.scatter > 1e3 * cyc.scatter.max(1e-9),
            "{} vs {}",
            ch.scatter,
            cyc.scatter
        );
        let fp = poincare_maxima_scatter(&Params::at(1.1, 1.0), &x0, 400.0, 800.0, opts).unwrap();
        assert!(fp.maxima.len() <= 1 || fp.scatter < 1e-9);
        assert!(poincare_maxima_scatter(&p, &x0, 100.0, 0.0, opts).is_err());
    }
}
