//! Lift of reduced solutions to the two cell polarizations.
//!
//! With carrier `w_c = (w1 + w2)/2` and an arbitrary phase `phi`,
//!
//! ```text
//! P_jx =  A/2 cos(w_c t - phi) - (-1)^j B/2 sin(w_c t - phi)
//! P_jy = -A/2 sin(w_c t - phi) - (-1)^j B/2 cos(w_c t - phi)
//! P_jz = Pz
//! ```
//!
//! maps every solution of the reduced system onto a solution of the full
//! Bloch equations with `w1 - w2 = eps`.

use serde::{Deserialize, Serialize};

use crate::analytic::FixedPoint;
use crate::cycles::LimitCycle;
use crate::error::IntegrateError;
use crate::integrate::{
    integrate, integrate_endpoint, Dopri5, IntegratorOptions, LyapunovOptions, OdeSystem,
    Trajectory,
};
use crate::io::push_row;
use crate::model::{
    full_rhs_array, FullParams, FullState, FullSystem, Params, ReducedState, ReducedSystem,
};

pub const FULL_CSV_HEADER: &str = "t,P1x,P1y,P1z,P2x,P2y,P2z";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftContext {
    pub omega_c: f64,
    pub phi: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl LiftContext {
    /// Splits the detuning of `p` symmetrically about `omega_c`.
    pub fn new(p: &Params, omega_c: f64, phi: f64) -> Self {
        let fp = FullParams::from_carrier(*p, omega_c);
        LiftContext {
            omega_c,
            phi,
            omega1: fp.omega1,
            omega2: fp.omega2,
        }
    }

    pub fn full_params(&self, p: &Params) -> FullParams {
        FullParams {
            params: *p,
            omega1: self.omega1,
            omega2: self.omega2,
        }
    }

    fn angle(&self, t: f64) -> f64 {
        self.omega_c * t - self.phi
    }
}

/// Lifts one reduced state at time `t`.
pub fn lift_state(x: &ReducedState, t: f64, ctx: &LiftContext) -> FullState {
    let (s, c) = ctx.angle(t).sin_cos();
    let cell = |sign: f64| {
        [
            0.5 * x.a * c - sign * 0.5 * x.b * s,
            -0.5 * x.a * s - sign * 0.5 * x.b * c,
            x.pz,
        ]
    };
    // (-1)^j with j = 1, 2.
    FullState {
        p1: cell(-1.0),
        p2: cell(1.0),
    }
}

/// A twin point seen in the full system: both cells rotate rigidly at the
/// carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedFixedPoint {
    pub radius_a: f64,
    pub eps_t2: f64,
    pub pz: f64,
    pub ctx: LiftContext,
}

impl LiftedFixedPoint {
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.ctx.omega_c
    }

    pub fn eval(&self, t: f64) -> FullState {
        let (s, c) = self.ctx.angle(t).sin_cos();
        let h = 0.5 * self.radius_a;
        let e = 0.5 * self.eps_t2;
        let cell = |sign: f64| [h * (sign * e * s + c), h * (sign * e * c - s), self.pz];
        FullState {
            p1: cell(-1.0),
            p2: cell(1.0),
        }
    }

    /// Residual of the full equations over one carrier period.
    pub fn max_residual(&self, p: &Params, n: usize) -> f64 {
        max_residual(
            |t| self.eval(t),
            &self.ctx.full_params(p),
            (0.0, self.period()),
            n,
        )
    }

    /// Largest deviation between `t` and `t + 2 pi / w_c` over `n` samples.
    pub fn periodicity_error(&self, n: usize) -> f64 {
        (0..n)
            .map(|i| {
                let t = self.period() * i as f64 / n as f64;
                let (a, b) = (
                    self.eval(t).to_array(),
                    self.eval(t + self.period()).to_array(),
                );
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self, samples: usize) -> String {
        let n = samples.max(2);
        let mut out = format!("{FULL_CSV_HEADER}\n");
        for i in 0..n {
            let t = self.period() * i as f64 / (n - 1) as f64;
            push_row(&mut out, std::iter::once(t).chain(self.eval(t).to_array()));
        }
        out
    }
}

pub fn lift_fixed_point(fp: &FixedPoint, p: &Params, ctx: &LiftContext) -> LiftedFixedPoint {
    LiftedFixedPoint {
        radius_a: fp.state.a.abs(),
        eps_t2: p.eps_t2(),
        pz: fp.state.pz,
        ctx: *ctx,
    }
}

/// A reduced trajectory viewed in the full system.
#[derive(Debug, Clone)]
pub struct LiftedTrajectory {
    pub reduced: Trajectory<3>,
    pub ctx: LiftContext,
}

impl LiftedTrajectory {
    pub fn t0(&self) -> f64 {
        self.reduced.t0()
    }

    pub fn tf(&self) -> f64 {
        self.reduced.tf()
    }

    pub fn eval(&self, t: f64) -> FullState {
        lift_state(
            &ReducedState::from_array(self.reduced.eval(t)),
            t,
            &self.ctx,
        )
    }

    /// `n` evenly spaced `(t, state)` samples over the span, ends included.
    pub fn sample(&self, n: usize) -> Vec<(f64, FullState)> {
        let (a, b) = (self.t0(), self.tf());
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = a + (b - a) * i as f64 / (n - 1) as f64;
                (t, self.eval(t))
            })
            .collect()
    }

    pub fn to_csv(&self, samples: usize) -> String {
        let mut out = String::from(FULL_CSV_HEADER);
        out.push('\n');
        for (t, s) in self.sample(samples) {
            push_row(&mut out, std::iter::once(t).chain(s.to_array()));
        }
        out
    }

    /// Largest componentwise residual of the full equations at `n` samples
    /// strictly inside the span.
    pub fn max_residual(&self, p: &Params, n: usize) -> f64 {
        max_residual(
            |t| self.eval(t),
            &self.ctx.full_params(p),
            (self.t0(), self.tf()),
            n,
        )
    }
}

/// Time derivatives come from fourth-order central differences of `eval`,
/// with the stencil kept inside `span`.
fn max_residual(
    eval: impl Fn(f64) -> FullState,
    fp: &FullParams,
    span: (f64, f64),
    n: usize,
) -> f64 {
    let h = 1e-2 * (span.1 - span.0).min(1.0);
    let (a, b) = (span.0 + 2.0 * h, span.1 - 2.0 * h);
    let mut worst = 0.0f64;
    for i in 0..n {
        let t = a + (b - a) * (i as f64 + 0.5) / n as f64;
        let at = |dt: f64| eval(t + dt).to_array();
        let (m2, m1, p1, p2) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
        let f = full_rhs_array(&eval(t).to_array(), fp);
        for k in 0..6 {
            let d = (m2[k] - 8.0 * m1[k] + 8.0 * p1[k] - p2[k]) / (12.0 * h);
            worst = worst.max((d - f[k]).abs());
        }
    }
    worst
}

pub fn lift_trajectory(reduced: &Trajectory<3>, ctx: &LiftContext) -> LiftedTrajectory {
    LiftedTrajectory {
        reduced: reduced.clone(),
        ctx: *ctx,
    }
}

/// Integrates `periods` periods of a cycle from its anchor and lifts them.
pub fn lift_cycle(
    c: &LimitCycle,
    p: &Params,
    ctx: &LiftContext,
    periods: f64,
    opts: IntegratorOptions,
) -> Result<LiftedTrajectory, IntegrateError> {
    let tr = integrate(
        &ReducedSystem(p),
        c.anchor.to_array(),
        (0.0, periods * c.period),
        opts,
    )?;
    Ok(LiftedTrajectory {
        reduced: tr,
        ctx: *ctx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quasiperiodicity {
    /// `w_c tau / 2 pi`.
    pub ratio: f64,
    pub commensurate: bool,
}

pub const COMMENSURATE_TOL: f64 = 1e-6;

/// Winding ratio of carrier and cycle; a non-integer ratio makes the lift
/// quasi-periodic.
pub fn quasiperiodicity_check(period: f64, ctx: &LiftContext, tol: f64) -> Quasiperiodicity {
    let ratio = ctx.omega_c * period / std::f64::consts::TAU;
    Quasiperiodicity {
        ratio,
        commensurate: (ratio - ratio.round()).abs() <= tol,
    }
}

/// Full state (6) + tangent vector (6).
struct FullTangent<'a>(&'a FullParams);

impl OdeSystem<12> for FullTangent<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 12]) -> [f64; 12] {
        let fp = self.0;
        let (alpha, t1, t2, g) = (fp.params.alpha, fp.params.t1, fp.params.t2, fp.params.g);
        let mut x = [0.0; 6];
        x.copy_from_slice(&y[..6]);
        let f = full_rhs_array(&x, fp);
        let d = &y[6..];
        let (mx, my) = (0.5 * (x[0] + x[3]), 0.5 * (x[1] + x[4]));
        let (dmx, dmy) = (0.5 * (d[0] + d[3]), 0.5 * (d[1] + d[4]));
        let mut out = [0.0; 12];
        out[..6].copy_from_slice(&f);
        for (j, omega) in [fp.omega1, fp.omega2].into_iter().enumerate() {
            let (px, py, pz) = (x[3 * j], x[3 * j + 1], x[3 * j + 2]);
            let (dpx, dpy, dpz) = (d[3 * j], d[3 * j + 1], d[3 * j + 2]);
            out[6 + 3 * j] = omega * dpy + alpha * (dmx * pz + mx * dpz) - dpx / t2;
            out[7 + 3 * j] = -omega * dpx + alpha * (dmy * pz + my * dpz) - dpy / t2;
            out[8 + 3 * j] =
                -alpha * (dmx * px + mx * dpx + dmy * py + my * dpy) - dpz / t1 - g * dpz;
        }
        out
    }

    fn guarded_dims(&self) -> usize {
        6
    }
}

/// Largest Lyapunov exponent of the full system, `(exponent, running averages)`.
pub fn full_lyapunov_max(
    x0: &FullState,
    fp: &FullParams,
    opts: &LyapunovOptions,
) -> Result<(f64, Vec<(f64, f64)>), IntegrateError> {
    if !(opts.t_horizon > 0.0 && opts.renorm_interval > 0.0 && opts.t_transient >= 0.0) {
        return Err(IntegrateError::InvalidInput(
            "Lyapunov horizons must be positive".into(),
        ));
    }
    let settled = integrate_endpoint(
        &FullSystem(fp),
        x0.to_array(),
        (0.0, opts.t_transient),
        opts.integrator,
    )?;
    let mut y = [0.0; 12];
    y[..6].copy_from_slice(&settled);
    y[6..].fill(1.0 / 6f64.sqrt());
    let sys = FullTangent(fp);
    let n = (opts.t_horizon / opts.renorm_interval).ceil() as usize;
    let (mut log_sum, mut elapsed) = (0.0, 0.0);
    let mut series = Vec::with_capacity(n);
    for k in 0..n {
        let t_next = ((k + 1) as f64 * opts.renorm_interval).min(opts.t_horizon);
        let mut stepper = Dopri5::new(&sys, elapsed, y, opts.integrator)?;
        stepper.run(t_next, |_| true)?;
        y = *stepper.state();
        let norm = y[6..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(IntegrateError::NonFiniteState { t: t_next });
        }
        log_sum += norm.ln();
        elapsed = t_next;
        for v in &mut y[6..] {
            *v /= norm;
        }
        series.push((elapsed, log_sum / elapsed));
    }
    Ok((log_sum / elapsed, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::tfp_fixed_points;
    use crate::model::full_rhs;

    fn transverse(p: [f64; 3]) -> f64 {
        p[0].hypot(p[1])
    }

    #[test]
    fn twin_point_lift_at_zero_detuning_is_a_rigid_rotation() {
        let p = Params::at(3.0, 0.0);
        let (plus, _) = tfp_fixed_points(&p).unwrap();
        let ctx = LiftContext::new(&p, 1.0, 0.3);
        let l = lift_fixed_point(&plus, &p, &ctx);
        let r = plus.state.a.abs() / 2.0;
        assert!((r - 0.188_893_756).abs() < 1e-8, "{r}");
        for i in 0..20 {
            let t = i as f64 * 0.37;
            let s = l.eval(t);
            assert_eq!(s.p1, s.p2);
            assert!((transverse(s.p1) - r).abs() < 1e-15);
            assert_eq!(s.p1[2], plus.state.pz);
        }
    }

    #[test]
    fn twin_point_lift_solves_full_equations_and_is_carrier_periodic() {
        let p = Params::at(4.0, 1.5);
        let ctx = LiftContext::new(&p, 1.0, 0.0);
        let fp = ctx.full_params(&p);
        for tfp in <[_; 2]>::from(tfp_fixed_points(&p).unwrap()) {
            let l = lift_fixed_point(&tfp, &p, &ctx);
            let h = 1e-3;
            for i in 0..50 {
                let t = l.period() * i as f64 / 50.0;
                let s = l.eval(t);
                let d: Vec<f64> = (0..6)
                    .map(|k| {
                        let at = |dt: f64| l.eval(t + dt).to_array()[k];
                        (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
                    })
                    .collect();
                let f = full_rhs(&s, &fp).to_array();
                for k in 0..6 {
                    assert!((d[k] - f[k]).abs() < 1e-10, "{k}: {} vs {}", d[k], f[k]);
                }
                let later = l.eval(t + l.period()).to_array();
                for (a, b) in later.iter().zip(s.to_array()) {
                    assert!((a - b).abs() < 1e-13);
                }
                assert_eq!(s.p1[2], s.p2[2]);
            }
        }
    }

    #[test]
    fn lift_maps_vector_fields() {
        // The chain-rule derivative of the lift equals the full field exactly.
        let p = Params::at(3.3, 2.2);
        let ctx = LiftContext::new(&p, 0.7, 1.1);
        let fp = ctx.full_params(&p);
        let x = ReducedState::new(0.31, -0.12, 0.2);
        let dx = crate::model::reduced_rhs(&x, &p);
        let t = 2.5;
        let (s, c) = ctx.angle(t).sin_cos();
        let w = ctx.omega_c;
        let full = full_rhs(&lift_state(&x, t, &ctx), &fp);
        for (sign, cell) in [(-1.0, full.p1), (1.0, full.p2)] {
            let dpx = 0.5 * dx.a * c - 0.5 * x.a * w * s - sign * 0.5 * (dx.b * s + x.b * w * c);
            let dpy = -0.5 * dx.a * s - 0.5 * x.a * w * c - sign * 0.5 * (dx.b * c - x.b * w * s);
            assert!(
                (dpx - cell[0]).abs() < 1e-15
                    && (dpy - cell[1]).abs() < 1e-15
                    && (dx.pz - cell[2]).abs() < 1e-15
            );
        }
    }

    #[test]
    fn phase_shift_is_a_rotation_about_z() {
        let p = Params::at(2.2, 2.5);
        let x = ReducedState::new(0.2, 0.05, 0.38);
        let (a, b) = (
            LiftContext::new(&p, 1.0, 0.0),
            LiftContext::new(&p, 1.0, 0.8),
        );
        for i in 0..10 {
            let t = i as f64;
            let (u, v) = (lift_state(&x, t, &a), lift_state(&x, t, &b));
            let (s, c) = 0.8f64.sin_cos();
            for (pu, pv) in [(u.p1, v.p1), (u.p2, v.p2)] {
                assert!((c * pu[0] - s * pu[1] - pv[0]).abs() < 1e-15);
                assert!((s * pu[0] + c * pu[1] - pv[1]).abs() < 1e-15);
                assert_eq!(pu[2], pv[2]);
            }
        }
    }

    #[test]
    fn winding_ratio() {
        let p = Params::at(2.0, 2.5);
        let q = quasiperiodicity_check(114.35, &LiftContext::new(&p, 1.0, 0.0), COMMENSURATE_TOL);
        assert!((q.ratio - 18.199).abs() < 1e-3 && !q.commensurate);
        let tau = 114.35;
        let q = quasiperiodicity_check(
            tau,
            &LiftContext::new(&p, std::f64::consts::TAU / tau, 0.0),
            COMMENSURATE_TOL,
        );
        assert!(q.commensurate);
        for w in [0.5, 1.0, 2.0] {
            let r =
                quasiperiodicity_check(tau, &LiftContext::new(&p, w, 0.0), COMMENSURATE_TOL).ratio;
            assert!((r / w - tau / std::f64::consts::TAU).abs() < 1e-12);
        }
    }

    #[test]
    fn lifted_cycle_solves_full_equations() {
        use crate::cycles::{refine_cycle, settle_and_extract, SettleOptions};
        let p = Params::at(2.2, 2.5);
        let x0 = ReducedState::new(0.01, 0.0, 0.392);
        let cand = settle_and_extract(&x0, &p, &SettleOptions::default()).unwrap();
        let c = refine_cycle(&cand, &p).unwrap();
        let ctx = LiftContext::new(&p, 1.0, 0.0);
        let l = lift_cycle(&c, &p, &ctx, 1.0, IntegratorOptions::default()).unwrap();
        let r = l.max_residual(&p, 1000);
        assert!(r < 1e-8, "{r}");
        for (_, s) in l.sample(200) {
            assert!((transverse(s.p1) - transverse(s.p2)).abs() < 1e-15);
        }
        assert!(!quasiperiodicity_check(c.period, &ctx, COMMENSURATE_TOL).commensurate);
        let csv = l.to_csv(5);
        assert!(csv.starts_with(FULL_CSV_HEADER));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn chaos_stays_chaotic_in_the_full_system() {
        let p = Params::at(4.9, 2.045);
        let ctx = LiftContext::new(&p, 1.0, 0.0);
        let x0 = lift_state(&ReducedState::new(0.01, 0.0, 0.39), 0.0, &ctx);
        let opts = LyapunovOptions {
            t_transient: 1000.0,
            t_horizon: 4000.0,
            ..Default::default()
        };
        let (lam, series) = full_lyapunov_max(&x0, &ctx.full_params(&p), &opts).unwrap();
        assert!(lam > 1e-3, "{lam}");
        assert_eq!(series.len(), 4000);
    }
}
