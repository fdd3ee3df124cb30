//! Periodic orbits of the reduced system: detection from forward
//! integration, Newton shooting for stable and unstable cycles, Floquet
//! stability, and one-parameter continuation with fold, Hopf-collapse and
//! period-divergence handling.

mod continuation;
mod merger;
mod shooting;

pub use continuation::{
    continue_cycle, parse_branch_jsonl, BranchFlag, BranchParseError, BranchPoint, BranchRecord,
    ContinuationOptions, CycleBranch, FlagKind, FoldKind, FoldRecord, Termination,
};
pub use shooting::{
    refine_cycle, refine_cycle_with, refine_symmetric_cycle, unstable_pair_seed, ShootingOptions,
    DEFAULT_SEED_RADII,
};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::ns_pz;
use crate::error::CycleError;
use crate::integrate::{
    find_section_crossings, integrate, integrate_endpoint, Direction, IntegratorOptions,
};
use crate::linalg::eigenvalues3;
use crate::model::{reduced_rhs_array, Params, ReducedState, ReducedSystem};

/// Samples per orbit used when comparing orbits by Hausdorff distance.
pub const COMPARE_SAMPLES: usize = 4000;

/// Modulus margin separating stable from marginal multipliers.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Extrema of one period and the closest approach to the no-signal point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    pub a_max: f64,
    pub a_min: f64,
    pub b_max: f64,
    pub b_min: f64,
    pub pz_max: f64,
    pub pz_min: f64,
    pub min_distance_to_ns: f64,
}

impl CycleMetrics {
    /// Metrics of a single point (a fixed point viewed as a degenerate cycle).
    pub fn of_point(x: &ReducedState, p: &Params) -> Self {
        CycleMetrics {
            a_max: x.a,
            a_min: x.a,
            b_max: x.b,
            b_min: x.b,
            pz_max: x.pz,
            pz_min: x.pz,
            min_distance_to_ns: x.distance(&ReducedState::new(0.0, 0.0, ns_pz(p))),
        }
    }

    /// Largest coordinate range over the orbit.
    pub fn extent(&self) -> f64 {
        (self.a_max - self.a_min)
            .max(self.b_max - self.b_min)
            .max(self.pz_max - self.pz_min)
    }

    fn include(&mut self, x: &[f64; 3], ns: &[f64; 3]) {
        self.a_max = self.a_max.max(x[0]);
        self.a_min = self.a_min.min(x[0]);
        self.b_max = self.b_max.max(x[1]);
        self.b_min = self.b_min.min(x[1]);
        self.pz_max = self.pz_max.max(x[2]);
        self.pz_min = self.pz_min.min(x[2]);
        let d = ((x[0] - ns[0]).powi(2) + (x[1] - ns[1]).powi(2) + (x[2] - ns[2]).powi(2)).sqrt();
        self.min_distance_to_ns = self.min_distance_to_ns.min(d);
    }
}

/// A converged periodic orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    /// Point on the orbit where `dA/dt = 0`.
    pub anchor: ReducedState,
    /// Period (s).
    pub period: f64,
    /// Floquet multipliers, sorted by decreasing real part.
    pub multipliers: [Complex64; 3],
    pub stable: bool,
    pub metrics: CycleMetrics,
    /// Largest shooting residual at convergence.
    pub residual: f64,
    /// Shooting nodes at equal time spacing `period / nodes.len()`;
    /// `nodes[0] == anchor`.
    pub nodes: Vec<ReducedState>,
}

impl LimitCycle {
    /// Index of the multiplier closest to 1 (the one along the flow).
    pub fn trivial_index(&self) -> usize {
        let mut best = 0;
        for i in 1..3 {
            if (self.multipliers[i] - 1.0).norm() < (self.multipliers[best] - 1.0).norm() {
                best = i;
            }
        }
        best
    }

    pub fn trivial_multiplier(&self) -> Complex64 {
        self.multipliers[self.trivial_index()]
    }

    pub fn nontrivial_multipliers(&self) -> [Complex64; 2] {
        let k = self.trivial_index();
        let mut out = [Complex64::new(0.0, 0.0); 2];
        let mut j = 0;
        for (i, m) in self.multipliers.iter().enumerate() {
            if i != k {
                out[j] = *m;
                j += 1;
            }
        }
        out
    }

    /// The real nontrivial multiplier closest to +1, if one is real.
    pub fn critical_real_multiplier(&self) -> Option<f64> {
        self.nontrivial_multipliers()
            .iter()
            .filter(|m| m.im.abs() <= 1e-9 * m.norm().max(1.0))
            .map(|m| m.re)
            .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
    }

    pub fn as_candidate(&self) -> CycleCandidate {
        CycleCandidate {
            anchor: self.anchor,
            period: self.period,
            spread: self.residual,
            nodes: self.nodes.clone(),
        }
    }

    /// Image of the orbit under `(A, B) -> (-A, -B)`, as a refinement guess.
    pub fn mirror(&self) -> CycleCandidate {
        CycleCandidate {
            anchor: self.anchor.mirror(),
            period: self.period,
            spread: self.residual,
            nodes: self.nodes.iter().map(|x| x.mirror()).collect(),
        }
    }

    /// About `points` samples of one period at equal time spacing, plus the
    /// integrator step starts, integrated segment-wise from the nodes.
    pub fn sample(
        &self,
        p: &Params,
        points: usize,
        opts: IntegratorOptions,
    ) -> Result<Vec<[f64; 3]>, CycleError> {
        let dt = self.period / self.nodes.len() as f64;
        let per_segment = points.div_ceil(self.nodes.len()).max(1);
        let mut out = Vec::new();
        for node in &self.nodes {
            let tr = integrate(&ReducedSystem(p), node.to_array(), (0.0, dt), opts)?;
            for k in 0..per_segment {
                out.push(tr.eval(dt * k as f64 / per_segment as f64));
            }
            for seg in tr.segments() {
                out.push(seg.start());
            }
        }
        Ok(out)
    }
}

/// A periodic-orbit guess: anchor point and period, optionally with
/// intermediate shooting nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCandidate {
    pub anchor: ReducedState,
    pub period: f64,
    /// Largest mismatch between successive returns (state units).
    pub spread: f64,
    #[serde(default)]
    pub nodes: Vec<ReducedState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleOptions {
    pub t_settle: f64,
    pub t_observe: f64,
    /// Agreement required between returns of a periodic orbit.
    pub return_tol: f64,
    /// Highest return order (period-k) accepted as periodic.
    pub max_order: usize,
    /// Trajectories whose coordinate ranges stay below this are fixed points.
    pub point_extent: f64,
    pub integrator: IntegratorOptions,
}

impl Default for SettleOptions {
    fn default() -> Self {
        SettleOptions {
            t_settle: 800.0,
            t_observe: 400.0,
            return_tol: 1e-6,
            max_order: 8,
            point_extent: 1e-6,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// Integrates past the transient and reads the return map on the section
/// of A-maxima.
pub fn settle_and_extract(
    x0: &ReducedState,
    p: &Params,
    opts: &SettleOptions,
) -> Result<CycleCandidate, CycleError> {
    if !(opts.t_settle >= 0.0 && opts.t_observe > 0.0) {
        return Err(CycleError::Integrate(crate::IntegrateError::InvalidInput(
            "horizons must be positive".into(),
        )));
    }
    let sys = ReducedSystem(p);
    let settled = integrate_endpoint(&sys, x0.to_array(), (0.0, opts.t_settle), opts.integrator)?;
    let tr = integrate(&sys, settled, (0.0, opts.t_observe), opts.integrator)?;

    let mut lo = tr.states[0];
    let mut hi = tr.states[0];
    for x in &tr.states {
        for i in 0..3 {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    let extent = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    if extent < opts.point_extent {
        return Err(CycleError::FixedPointReached {
            state: tr.last_state(),
        });
    }

    let returns = find_section_crossings(&tr, |x| reduced_rhs_array(x, p)[0], Direction::Falling);
    let n = returns.len();
    if n < 3 {
        // Too few maxima in the window: either a slow spiral into a point
        // or a period longer than the window.
        let end = tr.last_state();
        let speed = reduced_rhs_array(&end, p)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        if speed < 1e-10 || n == 0 {
            return Err(CycleError::FixedPointReached { state: end });
        }
        return Err(CycleError::NotPeriodic);
    }

    let dist = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
    for k in 1..=opts.max_order.min(n - 1) {
        let spread = dist(&returns[n - 1].state, &returns[n - 1 - k].state);
        if spread <= opts.return_tol {
            let last = &returns[n - 1];
            let first = &returns[(n - 1) % k];
            let period = k as f64 * (last.t - first.t) / (n - 1 - (n - 1) % k) as f64;
            return Ok(CycleCandidate {
                anchor: ReducedState::from_array(last.state),
                period,
                spread,
                nodes: Vec::new(),
            });
        }
    }

    // A spiral into a fixed point has returns that keep contracting while
    // the excursion between returns shrinks with them.
    let window_extent = |t0: f64, t1: f64| {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (t, x) in tr.times.iter().zip(&tr.states) {
            if *t >= t0 && *t <= t1 {
                for i in 0..3 {
                    lo[i] = lo[i].min(x[i]);
                    hi[i] = hi[i].max(x[i]);
                }
            }
        }
        (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max)
    };
    let diffs: Vec<f64> = (1..n)
        .map(|j| dist(&returns[j].state, &returns[j - 1].state))
        .collect();
    let contracting = diffs.windows(2).all(|w| w[1] < w[0]);
    let e_first = window_extent(returns[0].t, returns[1].t);
    let e_last = window_extent(returns[n - 2].t, returns[n - 1].t);
    if contracting && e_last < 0.5 * e_first {
        return Err(CycleError::FixedPointReached {
            state: tr.last_state(),
        });
    }
    Err(CycleError::NotPeriodic)
}

/// Extrema, closest approach to the no-signal point, and the orbit extent,
/// evaluated on the dense output of each shooting segment.
pub fn cycle_metrics(
    nodes: &[ReducedState],
    period: f64,
    p: &Params,
    opts: IntegratorOptions,
) -> Result<CycleMetrics, CycleError> {
    let ns = [0.0, 0.0, ns_pz(p)];
    let mut m = CycleMetrics::of_point(&nodes[0], p);
    let dt = period / nodes.len() as f64;
    let sys = ReducedSystem(p);
    for node in nodes {
        let tr = integrate(&sys, node.to_array(), (0.0, dt), opts)?;
        for x in &tr.states {
            m.include(x, &ns);
        }
        for comp in 0..3 {
            for ev in
                find_section_crossings(&tr, |x| reduced_rhs_array(x, p)[comp], Direction::Either)
            {
                m.include(&ev.state, &ns);
            }
        }
        let approach = |x: &[f64; 3]| {
            let f = reduced_rhs_array(x, p);
            (0..3).map(|i| (x[i] - ns[i]) * f[i]).sum::<f64>()
        };
        for ev in find_section_crossings(&tr, approach, Direction::Rising) {
            m.include(&ev.state, &ns);
        }
    }
    Ok(m)
}

/// Floquet multipliers of the product of segment transition matrices.
pub(crate) fn multipliers_of(phis: &[Matrix3<f64>]) -> [Complex64; 3] {
    let mut m = Matrix3::identity();
    for phi in phis {
        m = phi * m;
    }
    eigenvalues3(&m)
}

pub(crate) fn is_stable(multipliers: &[Complex64; 3]) -> bool {
    let mut trivial = 0;
    for i in 1..3 {
        if (multipliers[i] - 1.0).norm() < (multipliers[trivial] - 1.0).norm() {
            trivial = i;
        }
    }
    (0..3)
        .filter(|&i| i != trivial)
        .all(|i| multipliers[i].norm() < 1.0 - STABILITY_MARGIN)
}

/// Symmetric Hausdorff distance between two sampled curves (Euclidean).
pub fn hausdorff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    fn directed(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
        a.iter()
            .map(|x| {
                b.windows(2)
                    .map(|w| point_segment_distance(x, &w[0], &w[1]))
                    .fold(f64::INFINITY, f64::min)
                    .min(b.last().map(|y| dist3(x, y)).unwrap_or(f64::INFINITY))
            })
            .fold(0.0, f64::max)
    }
    directed(a, b).max(directed(b, a))
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn point_segment_distance(x: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ax = [x[0] - a[0], x[1] - a[1], x[2] - a[2]];
    let len2 = ab.iter().map(|v| v * v).sum::<f64>();
    let s = if len2 > 0.0 {
        ((0..3).map(|i| ab[i] * ax[i]).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist3(x, &[a[0] + s * ab[0], a[1] + s * ab[1], a[2] + s * ab[2]])
}
