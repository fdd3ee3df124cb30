//! Flow of the reduced system together with its state-transition matrix and,
//! optionally, the derivative of the flow with respect to one parameter.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::dopri::IntegratorOptions;
use super::trajectory::integrate_endpoint;
use super::OdeSystem;
use crate::error::IntegrateError;
use crate::model::{reduced_jacobian_array, reduced_rhs_array, Params, ReducedState};

/// Parameter swept by continuation, in the dimensionless axes
/// `alpha / alpha_c` and `epsilon * T2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Epsilon,
}

impl SweepParam {
    /// Current value on the dimensionless axis.
    pub fn value(self, p: &Params) -> f64 {
        match self {
            SweepParam::Alpha => p.alpha_ratio(),
            SweepParam::Epsilon => p.eps_t2(),
        }
    }

    pub fn set(self, p: &Params, value: f64) -> Params {
        match self {
            SweepParam::Alpha => p.with_alpha_ratio(value),
            SweepParam::Epsilon => p.with_eps_t2(value),
        }
    }

    /// Derivative of the reduced vector field with respect to the
    /// dimensionless parameter.
    fn field_derivative(self, x: &[f64; 3], p: &Params) -> [f64; 3] {
        let [a, b, pz] = *x;
        match self {
            SweepParam::Alpha => {
                let s = p.alpha_c();
                [s * pz * a, 0.0, -0.25 * s * a * a]
            }
            SweepParam::Epsilon => {
                let s = 1.0 / p.t2;
                [0.5 * s * b, -0.5 * s * a, 0.0]
            }
        }
    }
}

/// State (3) + row-major Φ (9) + parameter sensitivity (3).
struct Variational<'a> {
    p: &'a Params,
    sweep: Option<SweepParam>,
}

impl OdeSystem<15> for Variational<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 15]) -> [f64; 15] {
        let x = [y[0], y[1], y[2]];
        let f = reduced_rhs_array(&x, self.p);
        let j = reduced_jacobian_array(&x, self.p);
        let mut out = [0.0; 15];
        out[..3].copy_from_slice(&f);
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += j[(r, k)] * y[3 + 3 * k + c];
                }
                out[3 + 3 * r + c] = acc;
            }
        }
        if let Some(sw) = self.sweep {
            let df = sw.field_derivative(&x, self.p);
            for r in 0..3 {
                let mut acc = df[r];
                for k in 0..3 {
                    acc += j[(r, k)] * y[12 + k];
                }
                out[12 + r] = acc;
            }
        }
        out
    }

    fn guarded_dims(&self) -> usize {
        3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    pub matrix: Matrix3<f64>,
    pub end: ReducedState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSensitivity {
    pub end: [f64; 3],
    /// ∂φ/∂x0.
    pub phi: Matrix3<f64>,
    /// ∂φ/∂p for the requested sweep parameter (zero when none).
    pub dparam: Vector3<f64>,
}

pub fn flow_with_sensitivity(
    x0: &[f64; 3],
    duration: f64,
    p: &Params,
    sweep: Option<SweepParam>,
    opts: IntegratorOptions,
) -> Result<FlowSensitivity, IntegrateError> {
    let mut y0 = [0.0; 15];
    y0[..3].copy_from_slice(x0);
    y0[3] = 1.0;
    y0[7] = 1.0;
    y0[11] = 1.0;
    let sys = Variational { p, sweep };
    let y = integrate_endpoint(&sys, y0, (0.0, duration), opts)?;
    Ok(FlowSensitivity {
        end: [y[0], y[1], y[2]],
        phi: Matrix3::from_row_slice(&y[3..12]),
        dparam: Vector3::new(y[12], y[13], y[14]),
    })
}

/// State-transition matrix Φ(T) of the variational equation along the
/// orbit through `x0`.
pub fn monodromy(
    x0: &ReducedState,
    period: f64,
    p: &Params,
    opts: IntegratorOptions,
) -> Result<Monodromy, IntegrateError> {
    let fs = flow_with_sensitivity(&x0.to_array(), period, p, None, opts)?;
    Ok(Monodromy {
        matrix: fs.phi,
        end: ReducedState::from_array(fs.end),
    })
}
