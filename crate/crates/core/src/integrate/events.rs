use serde::{Deserialize, Serialize};

use super::dopri::DenseSegment;
use super::trajectory::Trajectory;

/// Which sign changes of the event function to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `g` goes from negative to positive.
    Rising,
    /// `g` goes from positive to negative (a maximum when `g` is a derivative).
    Falling,
    Either,
}

impl Direction {
    fn accepts(self, g0: f64, g1: f64) -> bool {
        match self {
            Direction::Rising => g0 < 0.0 && g1 >= 0.0,
            Direction::Falling => g0 > 0.0 && g1 <= 0.0,
            Direction::Either => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord<const N: usize> {
    pub t: f64,
    pub state: [f64; N],
    /// Sign of the event function's slope at the crossing.
    pub direction: f64,
}

const EVENT_TOL: f64 = 1e-10;
const SUBSAMPLES: usize = 4;

/// All crossings of `event_fn = 0` along `traj`, each polished on the dense
/// interpolant until `|event_fn| <= 1e-10`.
pub fn find_section_crossings<const N: usize, G>(
    traj: &Trajectory<N>,
    event_fn: G,
    direction: Direction,
) -> Vec<EventRecord<N>>
where
    G: Fn(&[f64; N]) -> f64,
{
    let mut out = Vec::new();
    for seg in traj.segments() {
        scan_segment(seg, &event_fn, direction, &mut out);
    }
    out
}

pub(crate) fn scan_segment<const N: usize, G>(
    seg: &DenseSegment<N>,
    event_fn: &G,
    direction: Direction,
    out: &mut Vec<EventRecord<N>>,
) where
    G: Fn(&[f64; N]) -> f64,
{
    let mut th0 = 0.0;
    let mut g0 = event_fn(&seg.eval_theta(0.0));
    for k in 1..=SUBSAMPLES {
        let th1 = k as f64 / SUBSAMPLES as f64;
        let g1 = event_fn(&seg.eval_theta(th1));
        if direction.accepts(g0, g1) {
            // A zero exactly at the left node was already reported by the
            // previous interval.
            let th = polish(seg, event_fn, th0, th1, g0, g1);
            let x = seg.eval_theta(th);
            out.push(EventRecord {
                t: seg.t0 + th * seg.h,
                state: x,
                direction: (g1 - g0).signum(),
            });
        }
        th0 = th1;
        g0 = g1;
    }
}

/// Illinois-modified regula falsi on the interpolant, falling back to
/// bisection when the secant stalls.
fn polish<const N: usize, G>(
    seg: &DenseSegment<N>,
    g: &G,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
    mut gb: f64,
) -> f64
where
    G: Fn(&[f64; N]) -> f64,
{
    if gb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    let mut best = if ga.abs() < gb.abs() { a } else { b };
    for _ in 0..200 {
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(&seg.eval_theta(c));
        best = c;
        if gc.abs() <= EVENT_TOL && (b - a) < 1e-6 {
            break;
        }
        if gc == 0.0 || (b - a) <= 4.0 * f64::EPSILON {
            break;
        }
        if (gc > 0.0) == (gb > 0.0) {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
        if gc.abs() <= EVENT_TOL * 1e-3 {
            break;
        }
    }
    best
}
