//! Dormand–Prince 5(4) pair with PI step-size control and the
//! fourth-order continuous extension of Hairer, Nørsett & Wanner.

use serde::{Deserialize, Serialize};

use super::OdeSystem;
use crate::error::IntegrateError;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Abort when a guarded component exceeds this magnitude.
    pub state_bound: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            state_bound: Some(10.0),
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorOptions {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let ok = |v: f64| (1e-14..=1e-3).contains(&v);
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(IntegrateError::InvalidInput(format!(
                "tolerances must lie in [1e-14, 1e-3], got rel={} abs={}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.h_max > 0.0) {
            return Err(IntegrateError::InvalidInput(
                "h_max must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Continuous extension over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, Copy)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.rcont[0]
    }

    /// Interpolated state at `t`; exact at both step ends.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        self.eval_theta(theta)
    }

    pub fn eval_theta(&self, theta: f64) -> [f64; N] {
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = r[0][i]
                + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
        out
    }
}

/// Stateful stepper. Integrates forward in time only.
pub struct Dopri5<'s, S, const N: usize> {
    sys: &'s S,
    opts: IntegratorOptions,
    t: f64,
    x: [f64; N],
    k1: [f64; N],
    h: f64,
    err_old: f64,
    stats: StepStats,
}

impl<'s, S: OdeSystem<N>, const N: usize> Dopri5<'s, S, N> {
    pub fn new(
        sys: &'s S,
        t0: f64,
        x0: [f64; N],
        opts: IntegratorOptions,
    ) -> Result<Self, IntegrateError> {
        opts.validate()?;
        if !x0.iter().all(|v| v.is_finite()) || !t0.is_finite() {
            return Err(IntegrateError::NonFiniteState { t: t0 });
        }
        let k1 = sys.rhs(t0, &x0);
        Ok(Dopri5 {
            sys,
            opts,
            t: t0,
            x: x0,
            k1,
            h: opts.h_init.unwrap_or(0.0),
            err_old: 1e-4,
            stats: StepStats {
                rhs_evals: 1,
                ..Default::default()
            },
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.x
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    fn scale(&self, x0: &[f64; N], x1: &[f64; N], i: usize) -> f64 {
        self.opts.abs_tol + self.opts.rel_tol * x0[i].abs().max(x1[i].abs())
    }

    /// Initial step heuristic (Hairer, Nørsett & Wanner, II.4).
    fn initial_step(&mut self, t_end: f64) -> f64 {
        let span = t_end - self.t;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sk = self.opts.abs_tol + self.opts.rel_tol * self.x[i].abs();
            d0 += (self.x[i] / sk).powi(2);
            d1 += (self.k1[i] / sk).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.opts.h_max).min(span);
        let x1: [f64; N] = std::array::from_fn(|i| self.x[i] + h0 * self.k1[i]);
        let f1 = self.sys.rhs(self.t + h0, &x1);
        self.stats.rhs_evals += 1;
        let mut d2: f64 = (0..N)
            .map(|i| {
                let sk = self.opts.abs_tol + self.opts.rel_tol * self.x[i].abs();
                ((f1[i] - self.k1[i]) / sk).powi(2)
            })
            .sum();
        d2 = (d2 / N as f64).sqrt() / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.h_max).min(span)
    }

    /// Advances one accepted step without passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<DenseSegment<N>, IntegrateError> {
        if self.h <= 0.0 {
            self.h = self.initial_step(t_end);
        }
        let mut reject = false;
        loop {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(IntegrateError::TooManySteps(self.opts.max_steps));
            }
            let remaining = t_end - self.t;
            let h_try = self.h.min(self.opts.h_max);
            let last = h_try >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { h_try };
            if h.abs() <= 1e-13 * self.t.abs().max(1.0) && !last {
                return Err(IntegrateError::StepSizeUnderflow { t: self.t });
            }
            let (t, x, k1) = (self.t, self.x, self.k1);
            let mut y = [0.0; N];

            for i in 0..N {
                y[i] = x[i] + h * A21 * k1[i];
            }
            let k2 = self.sys.rhs(t + C2 * h, &y);
            for i in 0..N {
                y[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = self.sys.rhs(t + C3 * h, &y);
            for i in 0..N {
                y[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = self.sys.rhs(t + C4 * h, &y);
            for i in 0..N {
                y[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = self.sys.rhs(t + C5 * h, &y);
            for i in 0..N {
                y[i] = x[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let k6 = self.sys.rhs(t + h, &y);
            let mut x_new = [0.0; N];
            for i in 0..N {
                x_new[i] = x[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            let t_new = if last { t_end } else { t + h };
            let k7 = self.sys.rhs(t_new, &x_new);
            self.stats.rhs_evals += 6;

            let mut err = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.scale(&x, &x_new, i);
                err += (e / sk).powi(2);
            }
            err = (err / N as f64).sqrt();

            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = h * FAC_MIN;
                reject = true;
                continue;
            }

            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                let fac =
                    (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_next = h / fac;
                if reject {
                    h_next = h_next.min(h);
                }
                self.err_old = err.max(1e-4);

                if !x_new.iter().all(|v| v.is_finite()) {
                    return Err(IntegrateError::NonFiniteState { t: t_new });
                }
                if let Some(bound) = self.opts.state_bound {
                    let g = self.sys.guarded_dims().min(N);
                    if x_new[..g].iter().any(|v| v.abs() > bound) {
                        return Err(IntegrateError::NonFiniteState { t: t_new });
                    }
                }

                let mut rcont = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = x_new[i] - x[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = x[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let seg = DenseSegment {
                    t0: t,
                    h: t_new - t,
                    rcont,
                };

                self.stats.accepted += 1;
                self.t = t_new;
                self.x = x_new;
                self.k1 = k7;
                if !last {
                    self.h = h_next;
                }
                return Ok(seg);
            } else {
                self.stats.rejected += 1;
                self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
                reject = true;
            }
        }
    }

    /// Integrates to `t_end`, handing every accepted segment to `visit`.
    /// Stops early (returning `Ok(false)`) when `visit` returns `false`.
    pub fn run<F>(&mut self, t_end: f64, mut visit: F) -> Result<bool, IntegrateError>
    where
        F: FnMut(&DenseSegment<N>) -> bool,
    {
        if !(t_end >= self.t) {
            return Err(IntegrateError::InvalidInput(format!(
                "t_end {} precedes current time {}",
                t_end, self.t
            )));
        }
        while self.t < t_end {
            let seg = self.step(t_end)?;
            if !visit(&seg) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
