use serde::{Deserialize, Serialize};

use super::dopri::{Dopri5, IntegratorOptions};
use super::trajectory::integrate_endpoint;
use super::OdeSystem;
use crate::error::IntegrateError;
use crate::model::{
    reduced_jacobian_array, reduced_rhs_array, Params, ReducedState, ReducedSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    pub t_transient: f64,
    pub t_horizon: f64,
    pub renorm_interval: f64,
    pub integrator: IntegratorOptions,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions {
            t_transient: 500.0,
            t_horizon: 2000.0,
            renorm_interval: 1.0,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Largest exponent (s⁻¹).
    pub exponent: f64,
    /// `(time since transient, running average)` after every renormalization.
    pub series: Vec<(f64, f64)>,
    pub final_state: ReducedState,
}

/// State (3) + tangent vector (3).
struct Tangent<'a>(&'a Params);

impl OdeSystem<6> for Tangent<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 6]) -> [f64; 6] {
        let x = [y[0], y[1], y[2]];
        let f = reduced_rhs_array(&x, self.0);
        let j = reduced_jacobian_array(&x, self.0);
        let mut out = [0.0; 6];
        out[..3].copy_from_slice(&f);
        for r in 0..3 {
            out[3 + r] = j[(r, 0)] * y[3] + j[(r, 1)] * y[4] + j[(r, 2)] * y[5];
        }
        out
    }

    fn guarded_dims(&self) -> usize {
        3
    }
}

/// Largest Lyapunov exponent by tangent-vector renormalization (Benettin).
pub fn lyapunov_max(
    x0: &ReducedState,
    p: &Params,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate, IntegrateError> {
    if !(opts.t_horizon > 0.0 && opts.renorm_interval > 0.0 && opts.t_transient >= 0.0) {
        return Err(IntegrateError::InvalidInput(
            "Lyapunov horizons must be positive".into(),
        ));
    }
    let settled = integrate_endpoint(
        &ReducedSystem(p),
        x0.to_array(),
        (0.0, opts.t_transient),
        opts.integrator,
    )?;
    let v0 = 1.0 / 3f64.sqrt();
    let mut y = [settled[0], settled[1], settled[2], v0, v0, v0];
    let sys = Tangent(p);
    let n = (opts.t_horizon / opts.renorm_interval).ceil() as usize;
    let mut log_sum = 0.0;
    let mut series = Vec::with_capacity(n);
    let mut elapsed = 0.0;
    let mut stepper = Dopri5::new(&sys, 0.0, y, opts.integrator)?;
    for k in 0..n {
        let t_next = ((k + 1) as f64 * opts.renorm_interval).min(opts.t_horizon);
        stepper.run(t_next, |_| true)?;
        y = *stepper.state();
        let norm = (y[3] * y[3] + y[4] * y[4] + y[5] * y[5]).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(IntegrateError::NonFiniteState { t: t_next });
        }
        log_sum += norm.ln();
        elapsed = t_next;
        for v in &mut y[3..] {
            *v /= norm;
        }
        series.push((elapsed, log_sum / elapsed));
        stepper = Dopri5::new(&sys, t_next, y, opts.integrator)?;
    }
    Ok(LyapunovEstimate {
        exponent: log_sum / elapsed,
        series,
        final_state: ReducedState::new(y[0], y[1], y[2]),
    })
}
