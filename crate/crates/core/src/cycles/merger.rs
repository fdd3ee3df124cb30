//! Mergers of a mirror pair of cycles with a mirror-symmetric cycle.
//!
//! Where a symmetric cycle's critical multiplier passes through +1 while
//! the branch keeps going, the two mirror-image cycles that meet it there
//! are found by perturbing along the critical Floquet direction and then
//! tracked toward the crossing with a square-root predictor.

use super::continuation::{
    nearest_real, BranchPoint, ContinuationOptions, CycleBranch, FoldKind, FoldRecord,
};
use super::{
    hausdorff, refine_cycle_with, refine_symmetric_cycle, CycleCandidate, LimitCycle,
    COMPARE_SAMPLES,
};
use crate::error::CycleError;
use crate::integrate::monodromy;
use crate::linalg::eigenvector3;
use crate::model::{reduced_rhs, Params, ReducedState};

/// Relative asymmetry below which a cycle counts as mirror-symmetric.
const SYMMETRY_TOL: f64 = 1e-6;
/// Offsets from the crossing at which the partner is computed, largest first.
const FIRST_OFFSET: f64 = 1e-3;
const LAST_OFFSET: f64 = 1e-8;
/// Gap below which shrinking the offset further stops.
const GAP_GOAL: f64 = 1e-4;

pub(crate) fn is_symmetric(c: &LimitCycle) -> bool {
    let m = &c.metrics;
    let tol = SYMMETRY_TOL * m.extent();
    (m.a_max + m.a_min).abs() <= tol && (m.b_max + m.b_min).abs() <= tol
}

/// Whether the points on both sides of index `i` are symmetric cycles.
pub(crate) fn symmetric_pair(points: &[BranchPoint], i: usize) -> bool {
    i >= 1
        && i < points.len()
        && is_symmetric(&points[i - 1].cycle)
        && is_symmetric(&points[i].cycle)
}

/// Locates the +1 crossing between points `i - 1` and `i` and measures the
/// distance to the merging pair. `None` when the crossing cannot be
/// bracketed or no partner cycle is found.
pub(crate) fn locate_merger(
    br: &CycleBranch,
    i: usize,
    p: &Params,
    opts: &ContinuationOptions,
) -> Result<Option<FoldRecord>, CycleError> {
    let g = |c: &LimitCycle| nearest_real(c, 1.0).map(|m| m - 1.0);
    let (a, b) = (&br.points[i - 1], &br.points[i]);
    let (Some(ga), Some(gb)) = (g(&a.cycle), g(&b.cycle)) else {
        return Ok(None);
    };
    if ga * gb >= 0.0 {
        return Ok(None);
    }
    let stable_side = if ga < 0.0 {
        (a.param - b.param).signum()
    } else {
        (b.param - a.param).signum()
    };

    // Illinois false position on the critical multiplier.
    let (mut l0, mut c0, mut g0) = (a.param, a.cycle.clone(), ga);
    let (mut l1, mut c1, mut g1) = (b.param, b.cycle.clone(), gb);
    for _ in 0..60 {
        if (l1 - l0).abs() <= 1e-11 * l1.abs().max(1.0) || g1.abs() < 1e-9 {
            break;
        }
        let mut lm = l1 - g1 * (l1 - l0) / (g1 - g0);
        if !lm.is_finite() || (lm - l0) * (lm - l1) >= 0.0 {
            lm = 0.5 * (l0 + l1);
        }
        let q = br.sweep.set(p, lm);
        let guess = interpolate(&c0, &c1, (lm - l0) / (l1 - l0));
        let cm = match refine_symmetric_cycle(&guess, &q, &opts.shooting) {
            Ok(c) => c,
            Err(CycleError::Integrate(e)) => return Err(e.into()),
            Err(_) => break,
        };
        let Some(gm) = g(&cm) else { return Ok(None) };
        if gm * g1 < 0.0 {
            (l0, c0, g0) = (l1, c1, g1);
        } else {
            g0 *= 0.5;
        }
        (l1, c1, g1) = (lm, cm, gm);
    }
    let (lc, cc, gc) = if g0.abs() < g1.abs() {
        (l0, c0, g0)
    } else {
        (l1, c1, g1)
    };

    for side in [stable_side, -stable_side] {
        if let Some((lam, gap)) = track_partner(&cc, lc, side, br, p, opts)? {
            return Ok(Some(FoldRecord {
                kind: FoldKind::SymmetricMerger,
                param: lc,
                multiplier: 1.0 + gc,
                before: i - 1,
                after: i,
                gap,
                partner_param: Some(lam),
            }));
        }
    }
    Ok(None)
}

/// Follows the asymmetric partner toward the crossing on one side; returns
/// the closest parameter reached and the gap there.
fn track_partner(
    cc: &LimitCycle,
    lc: f64,
    side: f64,
    br: &CycleBranch,
    p: &Params,
    opts: &ContinuationOptions,
) -> Result<Option<(f64, f64)>, CycleError> {
    let integ = opts.shooting.integrator;
    let mut prev: Option<(f64, LimitCycle, LimitCycle)> = None;
    let mut best = None;
    let mut delta = FIRST_OFFSET;
    while delta >= LAST_OFFSET {
        let lam = lc + side * delta;
        let q = br.sweep.set(p, lam);
        let Ok(sym) = refine_symmetric_cycle(&cc.as_candidate(), &q, &opts.shooting) else {
            break;
        };
        let bound = 5.0 * delta.sqrt();
        let accept = |c: &LimitCycle| -> Result<Option<f64>, CycleError> {
            if is_symmetric(c) {
                return Ok(None);
            }
            let gap = hausdorff(
                &sym.sample(&q, COMPARE_SAMPLES, integ)?,
                &c.sample(&q, COMPARE_SAMPLES, integ)?,
            );
            Ok((gap > 0.0 && gap < bound).then_some(gap))
        };
        let mut found = None;
        if let Some((d_prev, s_prev, a_prev)) = &prev {
            let guess = scaled_offset(&sym, s_prev, a_prev, (delta / d_prev).sqrt());
            if let Ok(c) = refine_cycle_with(&guess, &q, &opts.shooting) {
                if let Some(gap) = accept(&c)? {
                    found = Some((c, gap));
                }
            }
        }
        if found.is_none() {
            for guess in floquet_seeds(&sym, &q, delta, opts)? {
                if let Ok(c) = refine_cycle_with(&guess, &q, &opts.shooting) {
                    if let Some(gap) = accept(&c)? {
                        found = Some((c, gap));
                        break;
                    }
                }
            }
        }
        let Some((partner, gap)) = found else { break };
        best = Some((lam, gap));
        if gap < GAP_GOAL {
            break;
        }
        prev = Some((delta, sym, partner));
        delta *= 0.25;
    }
    Ok(best)
}

/// Linear blend `a + s (b - a)` of two nearby cycles.
fn interpolate(a: &LimitCycle, b: &LimitCycle, s: f64) -> CycleCandidate {
    let mix = |x: &ReducedState, y: &ReducedState| {
        ReducedState::new(
            x.a + s * (y.a - x.a),
            x.b + s * (y.b - x.b),
            x.pz + s * (y.pz - x.pz),
        )
    };
    let nodes = if a.nodes.len() == b.nodes.len() {
        a.nodes
            .iter()
            .zip(&b.nodes)
            .map(|(x, y)| mix(x, y))
            .collect()
    } else {
        Vec::new()
    };
    CycleCandidate {
        anchor: mix(&a.anchor, &b.anchor),
        period: a.period + s * (b.period - a.period),
        spread: f64::NAN,
        nodes,
    }
}

/// `sym + s (partner - sym_prev)`, node by node when the counts agree.
fn scaled_offset(
    sym: &LimitCycle,
    sym_prev: &LimitCycle,
    partner_prev: &LimitCycle,
    s: f64,
) -> CycleCandidate {
    let shift = |x: &ReducedState, a: &ReducedState, b: &ReducedState| {
        ReducedState::new(
            x.a + s * (b.a - a.a),
            x.b + s * (b.b - a.b),
            x.pz + s * (b.pz - a.pz),
        )
    };
    let nodes =
        if sym.nodes.len() == sym_prev.nodes.len() && sym.nodes.len() == partner_prev.nodes.len() {
            sym.nodes
                .iter()
                .zip(&sym_prev.nodes)
                .zip(&partner_prev.nodes)
                .map(|((x, a), b)| shift(x, a, b))
                .collect()
        } else {
            Vec::new()
        };
    CycleCandidate {
        anchor: shift(&sym.anchor, &sym_prev.anchor, &partner_prev.anchor),
        period: sym.period + s * (partner_prev.period - sym_prev.period),
        spread: f64::NAN,
        nodes,
    }
}

/// Guesses displaced from the anchor along the real Floquet direction with
/// multiplier nearest +1 that is not the flow direction.
fn floquet_seeds(
    sym: &LimitCycle,
    q: &Params,
    delta: f64,
    opts: &ContinuationOptions,
) -> Result<Vec<CycleCandidate>, CycleError> {
    let m = monodromy(&sym.anchor, sym.period, q, opts.shooting.integrator)?.matrix;
    let f = reduced_rhs(&sym.anchor, q).to_array();
    let f_norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut reals: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < 1e-9)
        .map(|z| z.re)
        .collect();
    reals.sort_by(|x, y| (x - 1.0).abs().total_cmp(&(y - 1.0).abs()));
    let mut dir = None;
    for mu in reals {
        let v = eigenvector3(&m, mu.into());
        let v = [v[0].re, v[1].re, v[2].re];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos = (v[0] * f[0] + v[1] * f[1] + v[2] * f[2]).abs() / (n * f_norm);
        if n > 0.0 && cos < 0.9 {
            dir = Some(v.map(|x| x / n));
            break;
        }
    }
    let Some(v) = dir else { return Ok(Vec::new()) };
    let r = delta.sqrt();
    let mut out = Vec::new();
    for k in [0.5, 1.0, 0.25, 2.0] {
        for sign in [1.0, -1.0] {
            let d = sign * k * r;
            let x = sym.anchor;
            out.push(CycleCandidate {
                anchor: ReducedState::new(x.a + d * v[0], x.b + d * v[1], x.pz + d * v[2]),
                period: sym.period,
                spread: f64::NAN,
                nodes: Vec::new(),
            });
        }
    }
    Ok(out)
}
