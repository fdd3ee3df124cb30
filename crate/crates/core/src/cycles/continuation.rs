use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::merger::{locate_merger, symmetric_pair};
use super::shooting::{finish, initial_nodes, segments_for, shoot, ArcConstraint, Shot};
use super::{hausdorff, CycleMetrics, LimitCycle, ShootingOptions, COMPARE_SAMPLES};
use crate::error::CycleError;
use crate::integrate::SweepParam;
use crate::model::{Params, ReducedState};
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    ConvergedToTarget,
    FoldRounded,
    NewtonFailure,
    PeriodDivergence,
    AmplitudeCollapse,
    PointBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    /// First parameter step (dimensionless axis units).
    pub initial_step: f64,
    /// Largest step, in parameter units before the switch to arclength
    /// and in scaled arclength units after it.
    pub max_step: f64,
    pub min_step: f64,
    /// Period beyond which the branch is declared divergent (s).
    pub tau_cap: f64,
    /// Orbit extent below which the branch has collapsed onto a point.
    pub collapse_extent: f64,
    /// Distance of the critical multiplier from +1 that marks a fold region.
    pub fold_window: f64,
    /// Arclength step cap inside the fold region.
    pub fold_step: f64,
    /// Points computed after the first fold before stopping; `None`
    /// continues to the other termination conditions.
    pub post_fold_points: Option<usize>,
    pub max_points: usize,
    /// Longest shooting segment (s) in arclength mode, where orbits may
    /// linger near saddles.
    pub arc_segment_time: f64,
    pub shooting: ShootingOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            initial_step: 0.01,
            max_step: 0.05,
            min_step: 1e-9,
            tau_cap: 5000.0,
            collapse_extent: 1e-4,
            fold_window: 0.2,
            fold_step: 2e-4,
            post_fold_points: None,
            max_points: 3000,
            arc_segment_time: 40.0,
            shooting: ShootingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Sweep parameter on its dimensionless axis.
    pub param: f64,
    pub cycle: LimitCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldKind {
    /// The branch turns back in the sweep parameter.
    Turn,
    /// A mirror pair of cycles merges with a mirror-symmetric cycle of the
    /// branch, which passes through without turning.
    SymmetricMerger,
}

/// A point where a cycle of the branch meets another cycle and exchanges
/// stability with it; the critical multiplier is +1 there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub kind: FoldKind,
    /// Parameter of the event. For a turn, the vertex of a quadratic fit in
    /// arclength; for a merger, the located multiplier crossing.
    pub param: f64,
    /// Real nontrivial multiplier closest to +1 at the event.
    pub multiplier: f64,
    /// Indices of the branch points on either side of the event.
    pub before: usize,
    pub after: usize,
    /// Hausdorff distance between the two meeting orbits: the points
    /// `before` and `after` for a turn, the branch cycle and its partner at
    /// `partner_param` for a merger.
    pub gap: f64,
    #[serde(default)]
    pub partner_param: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlagKind {
    /// A real nontrivial multiplier passed through -1.
    PeriodDoubling,
    /// A real nontrivial multiplier passed through +1 without a turn.
    MultiplierCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFlag {
    pub kind: FlagKind,
    pub param: f64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleBranch {
    pub sweep: SweepParam,
    pub points: Vec<BranchPoint>,
    pub folds: Vec<FoldRecord>,
    pub flags: Vec<BranchFlag>,
    pub termination: Termination,
    /// Extrapolated parameter where the orbit extent reaches zero, when the
    /// branch ended by amplitude collapse.
    pub endpoint: Option<f64>,
}

/// One line of the JSON-lines branch export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub param: f64,
    pub anchor: ReducedState,
    pub tau: f64,
    pub multipliers: [Complex64; 3],
    pub metrics: CycleMetrics,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BranchParseError {
    #[error("line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error("line {line}: non-finite or non-positive period")]
    BadPeriod { line: usize },
}

impl CycleBranch {
    pub fn records(&self) -> Vec<BranchRecord> {
        self.points
            .iter()
            .map(|bp| BranchRecord {
                param: bp.param,
                anchor: bp.cycle.anchor,
                tau: bp.cycle.period,
                multipliers: bp.cycle.multipliers,
                metrics: bp.cycle.metrics,
                stable: bp.cycle.stable,
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            out.push_str(&serde_json::to_string(&r).expect("branch records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> &BranchPoint {
        self.points
            .last()
            .expect("branches hold at least the start point")
    }
}

/// Parses a JSON-lines branch export; blank lines are skipped.
pub fn parse_branch_jsonl(text: &str) -> Result<Vec<BranchRecord>, BranchParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: BranchRecord =
            serde_json::from_str(line).map_err(|e| BranchParseError::BadRecord {
                line: i + 1,
                msg: e.to_string(),
            })?;
        if !(r.tau > 0.0 && r.tau.is_finite()) {
            return Err(BranchParseError::BadPeriod { line: i + 1 });
        }
        out.push(r);
    }
    Ok(out)
}

/// Continues a converged cycle in one parameter toward `target`.
///
/// Natural-parameter steps with a secant predictor are used first. Two
/// consecutive corrector failures switch to pseudo-arclength in the
/// coordinates `(anchor, ln tau, param)`, which rounds folds and follows
/// branches whose period grows without bound at nearly fixed parameter.
///
/// A `+1` multiplier crossing on a run of mirror-symmetric cycles is
/// located and reported as a [`FoldKind::SymmetricMerger`] fold, with the
/// merging mirror pair computed next to it.
pub fn continue_cycle(
    start: &LimitCycle,
    p: &Params,
    sweep: SweepParam,
    target: f64,
    opts: &ContinuationOptions,
) -> Result<CycleBranch, CycleError> {
    let mut br = continue_raw(start, p, sweep, target, opts)?;
    let candidates: Vec<usize> = br
        .flags
        .iter()
        .filter(|f| f.kind == FlagKind::MultiplierCrossing && symmetric_pair(&br.points, f.index))
        .map(|f| f.index)
        .collect();
    for i in candidates {
        if let Some(fold) = locate_merger(&br, i, p, opts)? {
            br.folds.push(fold);
            br.flags
                .retain(|f| !(f.kind == FlagKind::MultiplierCrossing && f.index == i));
        }
    }
    br.folds.sort_by_key(|f| f.before);
    Ok(br)
}

fn continue_raw(
    start: &LimitCycle,
    p: &Params,
    sweep: SweepParam,
    target: f64,
    opts: &ContinuationOptions,
) -> Result<CycleBranch, CycleError> {
    let lam0 = sweep.value(p);
    let mut br = CycleBranch {
        sweep,
        points: vec![BranchPoint {
            param: lam0,
            cycle: start.clone(),
        }],
        folds: Vec::new(),
        flags: Vec::new(),
        termination: Termination::ConvergedToTarget,
        endpoint: None,
    };
    let dir = (target - lam0).signum();
    if dir == 0.0 || !target.is_finite() {
        return Ok(br);
    }
    let mut h = opts.initial_step.min(opts.max_step);
    let mut fails = 0usize;
    loop {
        if br.points.len() >= opts.max_points {
            br.termination = Termination::PointBudget;
            return Ok(br);
        }
        let lam = br.last().param;
        let remaining = (target - lam) * dir;
        if remaining <= 1e-12 * target.abs().max(1.0) {
            br.termination = Termination::ConvergedToTarget;
            return Ok(br);
        }
        let mut step = h.min(remaining);
        if let Some(lh) = collapse_estimate(&br.points) {
            let dist = (lh - lam) * dir;
            if dist > 0.0 && step > 0.5 * dist {
                step = 0.5 * dist;
            }
        }
        let lam_new = if step == remaining {
            target
        } else {
            lam + dir * step
        };
        let q = sweep.set(p, lam_new);
        let attempt = predict_natural(&br.points, lam_new, &q, &opts.shooting)
            .and_then(|(nodes, tau)| {
                shoot(nodes, tau, &q, sweep, lam_new, None, false, &opts.shooting)
            })
            .and_then(|shot| finish(&shot, &q, &opts.shooting).map(|c| (c, shot.iterations)));
        match attempt {
            Ok((cycle, iters)) => {
                fails = 0;
                br.points.push(BranchPoint {
                    param: lam_new,
                    cycle,
                });
                flag_crossings(&mut br);
                if let Some(t) = terminal_state(&mut br, opts) {
                    br.termination = t;
                    return Ok(br);
                }
                if iters <= 4 {
                    h = (step * 1.5).min(opts.max_step);
                } else {
                    h = step;
                }
            }
            Err(e) => {
                if matches!(e, CycleError::Integrate(_) | CycleError::Analytic(_)) {
                    return Err(e);
                }
                fails += 1;
                h = step * 0.5;
                if fails >= 2 && br.points.len() >= 2 && !approaching_collapse(&br.points, h, dir) {
                    return arclength(br, p, sweep, target, dir, opts);
                }
                if h < opts.min_step {
                    br.termination = stalled_termination(&mut br, opts);
                    return Ok(br);
                }
            }
        }
    }
}

fn arclength(
    mut br: CycleBranch,
    p: &Params,
    sweep: SweepParam,
    target: f64,
    dir: f64,
    opts: &ContinuationOptions,
) -> Result<CycleBranch, CycleError> {
    let n = br.points.len();
    let mut u1 = coords(&br.points[n - 1]);
    let u0 = coords(&br.points[n - 2]);
    let (mut tangent, chord) = unit(&sub(&u1, &u0));
    let mut prev_nodes: Vec<[f64; 3]> = node_arrays(&br.points[n - 2].cycle);
    let mut prev_chord = chord;
    let mut ds = (0.5 * chord).clamp(opts.min_step, opts.max_step);
    let mut after_fold: Option<usize> = None;
    loop {
        if br.points.len() >= opts.max_points {
            br.termination = Termination::PointBudget;
            return Ok(br);
        }
        let lc = &br.last().cycle;
        if let (Some(c), true) = (
            lc.critical_real_multiplier(),
            (lc.trivial_multiplier() - 1.0).norm() < 1e-4,
        ) {
            if (c - 1.0).abs() < opts.fold_window {
                ds = ds.min(opts.fold_step);
            }
        }
        let last = br.last().clone();
        let u_pred: [f64; 5] = std::array::from_fn(|i| u1[i] + ds * tangent[i]);
        let tau_pred = u_pred[3].exp();
        let lam_pred = u_pred[4];
        let q_pred = sweep.set(p, lam_pred);
        let last_nodes = node_arrays(&last.cycle);
        let seg_opts = ShootingOptions {
            max_segment_time: opts.shooting.max_segment_time.min(opts.arc_segment_time),
            ..opts.shooting
        };
        let m = segments_for(tau_pred, &seg_opts).max(last_nodes.len());
        let nodes = if m == last_nodes.len() && prev_nodes.len() == m && prev_chord > 0.0 {
            let s = ds / prev_chord;
            last_nodes
                .iter()
                .zip(&prev_nodes)
                .map(|(a, b)| std::array::from_fn(|c| a[c] + s * (a[c] - b[c])))
                .collect()
        } else {
            let mut cand = last.cycle.as_candidate();
            cand.period = tau_pred;
            initial_nodes(&cand, m, &q_pred, &opts.shooting.integrator)?
        };
        let arc = ArcConstraint {
            anchor: [u_pred[0], u_pred[1], u_pred[2]],
            ln_tau: u_pred[3],
            lambda: lam_pred,
            tangent,
        };
        let attempt = shoot(
            nodes,
            tau_pred,
            p,
            sweep,
            lam_pred,
            Some(&arc),
            false,
            &opts.shooting,
        )
        .and_then(|shot: Shot| {
            let q = sweep.set(p, shot.lambda);
            finish(&shot, &q, &opts.shooting).map(|c| (c, shot.lambda, shot.iterations))
        });
        match attempt {
            Ok((cycle, lam, iters)) => {
                let point = BranchPoint { param: lam, cycle };
                let u2 = coords(&point);
                let d_old = u1[4] - br.points[br.points.len() - 2].param;
                let d_new = u2[4] - u1[4];
                prev_nodes = last_nodes;
                br.points.push(point);
                flag_crossings(&mut br);
                let noise = 1e-12 * lam.abs().max(1.0);
                if d_old * d_new < 0.0 && d_old.abs() > noise && d_new.abs() > noise {
                    let k = br.points.len();
                    br.folds
                        .push(fold_record(&br, k - 3, k - 2, k - 1, p, opts)?);
                    // The multiplier passing +1 at a turn is the fold itself.
                    br.flags
                        .retain(|f| !(f.kind == FlagKind::MultiplierCrossing && f.index + 2 >= k));
                    after_fold.get_or_insert(0);
                }
                if let Some(t) = terminal_state(&mut br, opts) {
                    br.termination = t;
                    return Ok(br);
                }
                if after_fold.is_none() && (target - lam) * dir <= 0.0 {
                    br.termination = Termination::ConvergedToTarget;
                    return Ok(br);
                }
                if let (Some(c), Some(limit)) = (after_fold.as_mut(), opts.post_fold_points) {
                    *c += 1;
                    if *c >= limit {
                        br.termination = Termination::FoldRounded;
                        return Ok(br);
                    }
                }
                let (t, chord) = unit(&sub(&u2, &u1));
                tangent = t;
                prev_chord = chord;
                u1 = u2;
                if iters <= 3 {
                    ds = (ds * 1.3).min(opts.max_step);
                }
            }
            Err(e) => {
                if matches!(e, CycleError::Analytic(_)) {
                    return Err(e);
                }
                ds *= 0.5;
                if ds < opts.min_step {
                    br.termination = stalled_termination(&mut br, opts);
                    return Ok(br);
                }
            }
        }
    }
}

fn coords(bp: &BranchPoint) -> [f64; 5] {
    let a = bp.cycle.anchor;
    [a.a, a.b, a.pz, bp.cycle.period.ln(), bp.param]
}

fn node_arrays(c: &LimitCycle) -> Vec<[f64; 3]> {
    c.nodes.iter().map(|x| x.to_array()).collect()
}

fn sub(a: &[f64; 5], b: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|i| a[i] - b[i])
}

fn unit(v: &[f64; 5]) -> ([f64; 5], f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (std::array::from_fn(|i| v[i] / n), n)
}

/// Secant prediction of nodes and period at `lam_new`.
fn predict_natural(
    points: &[BranchPoint],
    lam_new: f64,
    q: &Params,
    opts: &ShootingOptions,
) -> Result<(Vec<[f64; 3]>, f64), CycleError> {
    let n = points.len();
    let b = &points[n - 1];
    let (mut nodes, mut tau) = (node_arrays(&b.cycle), b.cycle.period);
    if n >= 2 {
        let a = &points[n - 2];
        let s = (lam_new - b.param) / (b.param - a.param);
        if s.is_finite() {
            let t_lin = b.cycle.period + s * (b.cycle.period - a.cycle.period);
            if t_lin > 0.0 {
                tau = t_lin;
            }
            if a.cycle.nodes.len() == nodes.len() {
                for (x, y) in nodes.iter_mut().zip(&a.cycle.nodes) {
                    let y = y.to_array();
                    for c in 0..3 {
                        x[c] += s * (x[c] - y[c]);
                    }
                }
            }
        }
    }
    let m = segments_for(tau, opts);
    if m > nodes.len() {
        let mut cand = b.cycle.as_candidate();
        cand.nodes = nodes.iter().map(|x| ReducedState::from_array(*x)).collect();
        cand.period = tau;
        nodes = initial_nodes(&cand, m, q, &opts.integrator)?;
    }
    Ok((nodes, tau))
}

/// Parameter where the squared extent extrapolates to zero, from the last
/// two points, when the extent is shrinking.
fn collapse_estimate(points: &[BranchPoint]) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let (a, b) = (&points[n - 2], &points[n - 1]);
    let (ea, eb) = (
        a.cycle.metrics.extent().powi(2),
        b.cycle.metrics.extent().powi(2),
    );
    if !(eb < ea) || b.param == a.param {
        return None;
    }
    Some(b.param - eb * (b.param - a.param) / (eb - ea))
}

fn approaching_collapse(points: &[BranchPoint], h: f64, dir: f64) -> bool {
    let lam = points[points.len() - 1].param;
    collapse_estimate(points).is_some_and(|lh| {
        let d = (lh - lam) * dir;
        d > 0.0 && d < 8.0 * h.max(1e-6)
    })
}

/// Extrapolated zero of the squared extent over the last few points.
fn collapse_endpoint(points: &[BranchPoint]) -> Option<f64> {
    let k = points.len().min(4);
    if k < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = points[points.len() - k..]
        .iter()
        .map(|bp| (bp.param, bp.cycle.metrics.extent().powi(2)))
        .collect();
    let (slope, intercept) = linear_fit(&pts);
    (slope != 0.0).then(|| -intercept / slope)
}

fn terminal_state(br: &mut CycleBranch, opts: &ContinuationOptions) -> Option<Termination> {
    let c = &br.last().cycle;
    if c.period > opts.tau_cap {
        return Some(Termination::PeriodDivergence);
    }
    if c.metrics.extent() < opts.collapse_extent {
        br.endpoint = collapse_endpoint(&br.points);
        // Multipliers of nearly collapsed orbits are not resolved.
        let n = br.points.len();
        br.flags.retain(|f| f.index + 3 < n);
        return Some(Termination::AmplitudeCollapse);
    }
    None
}

/// Termination reason when the step size underflows.
fn stalled_termination(br: &mut CycleBranch, opts: &ContinuationOptions) -> Termination {
    let first = br.points[0].cycle.metrics.extent();
    let last = br.last().cycle.metrics.extent();
    if br.points.len() >= 3 && last < 0.1 * first && last < 100.0 * opts.collapse_extent.max(1e-3) {
        br.endpoint = collapse_endpoint(&br.points);
        let n = br.points.len();
        br.flags.retain(|f| f.index + 3 < n);
        return Termination::AmplitudeCollapse;
    }
    Termination::NewtonFailure
}

fn flag_crossings(br: &mut CycleBranch) {
    let n = br.points.len();
    if n < 2 {
        return;
    }
    let (a, b) = (&br.points[n - 2], &br.points[n - 1]);
    let crossing = |level: f64| -> Option<f64> {
        let ma = nearest_real(&a.cycle, level)?;
        let mb = nearest_real(&b.cycle, level)?;
        if (ma - level) * (mb - level) < 0.0 {
            let s = (level - ma) / (mb - ma);
            Some(a.param + s * (b.param - a.param))
        } else {
            None
        }
    };
    if let Some(param) = crossing(-1.0) {
        br.flags.push(BranchFlag {
            kind: FlagKind::PeriodDoubling,
            param,
            index: n - 1,
        });
    }
    let turned =
        n >= 3 && (br.points[n - 2].param - br.points[n - 3].param) * (b.param - a.param) < 0.0;
    if !turned {
        if let Some(param) = crossing(1.0) {
            br.flags.push(BranchFlag {
                kind: FlagKind::MultiplierCrossing,
                param,
                index: n - 1,
            });
        }
    }
}

pub(super) fn nearest_real(c: &LimitCycle, level: f64) -> Option<f64> {
    c.nontrivial_multipliers()
        .iter()
        .filter(|m| m.im.abs() <= 1e-9 * m.norm().max(1.0))
        .map(|m| m.re)
        .min_by(|x, y| (x - level).abs().total_cmp(&(y - level).abs()))
}

fn fold_record(
    br: &CycleBranch,
    i0: usize,
    i1: usize,
    i2: usize,
    p: &Params,
    opts: &ContinuationOptions,
) -> Result<FoldRecord, CycleError> {
    let pts = [&br.points[i0], &br.points[i1], &br.points[i2]];
    // Quadratic through (s, param) with s the cumulative chord length.
    let u: Vec<[f64; 5]> = pts.iter().map(|bp| coords(bp)).collect();
    let s1 = unit(&sub(&u[1], &u[0])).1;
    let s2 = s1 + unit(&sub(&u[2], &u[1])).1;
    let (l0, l1, l2) = (pts[0].param, pts[1].param, pts[2].param);
    let d1 = (l1 - l0) / s1;
    let d2 = (l2 - l1) / (s2 - s1);
    let curv = (d2 - d1) / s2;
    let param = if curv != 0.0 {
        // Vertex of l0 + d1 s + curv s (s - s1).
        let s_star = (curv * s1 - d1) / (2.0 * curv);
        l0 + d1 * s_star + curv * s_star * (s_star - s1)
    } else {
        l1
    };
    let mult = pts
        .iter()
        .filter_map(|bp| nearest_real(&bp.cycle, 1.0))
        .min_by(|x, y| (x - 1.0).abs().total_cmp(&(y - 1.0).abs()))
        .unwrap_or(f64::NAN);
    let (before, after) = (i1, i2);
    let qa = br.sweep.set(p, br.points[before].param);
    let qb = br.sweep.set(p, br.points[after].param);
    let sa = br.points[before]
        .cycle
        .sample(&qa, COMPARE_SAMPLES, opts.shooting.integrator)?;
    let sb = br.points[after]
        .cycle
        .sample(&qb, COMPARE_SAMPLES, opts.shooting.integrator)?;
    Ok(FoldRecord {
        kind: FoldKind::Turn,
        param,
        multiplier: mult,
        before,
        after,
        gap: hausdorff(&sa, &sb),
        partner_param: None,
    })
}
