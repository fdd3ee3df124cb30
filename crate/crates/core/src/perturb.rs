//! Harmonic-balance description of the cycle born at `alpha = 2 alpha_c`.
//!
//! With `A = l sin(wt)` the linear `B` equation and the `Pz` equation are
//! solved exactly at first and second harmonic order; balancing the
//! `sin(wt)` and `cos(wt)` terms of the `A` equation then fixes `l` and `w`.

use serde::{Deserialize, Serialize};

use crate::analytic::ns_eigenvalues;
use crate::error::PerturbError;
use crate::model::{Params, ReducedState};

/// Upper end of the range of `alpha/alpha_c` where the expansion is trusted.
pub const VALIDITY_LIMIT: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeCycle {
    pub l: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// `B = b_cos cos(wt) + b_sin sin(wt)`.
    pub b_cos: f64,
    pub b_sin: f64,
    /// `dPz = dpz_const + dpz_cos2 cos(2wt) + dpz_sin2 sin(2wt)`.
    pub dpz_const: f64,
    pub dpz_cos2: f64,
    pub dpz_sin2: f64,
    /// Residuals of the two balance equations.
    pub residuals: [f64; 2],
    /// Solved outside `(2, VALIDITY_LIMIT]`.
    pub extrapolated: bool,
}

impl PerturbativeCycle {
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }
}

/// Coefficients of the balance equations at fixed parameters.
struct Balance {
    r: f64,
    e2: f64,
    g2: f64,
    c1: f64,
    c2: f64,
}

impl Balance {
    fn new(p: &Params) -> Self {
        let gamma = p.gamma_z();
        let gp = p.g * p.p0;
        Balance {
            r: p.alpha_ratio(),
            e2: p.eps_t2().powi(2),
            g2: (gamma * p.t2).powi(2),
            c1: gamma / (16.0 * gp * gp * p.t2),
            c2: gamma * gamma / (8.0 * gp * gp),
        }
    }

    /// Residuals in `u = l^2`, `v = (w T2)^2` and their Jacobian.
    fn eval(&self, u: f64, v: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let Balance { r, e2, g2, c1, c2 } = *self;
        let r2 = r * r;
        let d = g2 + 4.0 * v;
        let q = (3.0 * g2 + 8.0 * v) / d;
        let dq = (8.0 * d - 4.0 * (3.0 * g2 + 8.0 * v)) / (d * d);
        let s = e2 / (4.0 * (1.0 + v));
        let ds = -e2 / (4.0 * (1.0 + v).powi(2));
        let f1 = r - c1 * u * r2 * q - s - 1.0;
        let f2 = c2 * u * r2 / d + s - 1.0;
        let j = [
            [-c1 * r2 * q, -c1 * u * r2 * dq - ds],
            [c2 * r2 / d, -4.0 * c2 * u * r2 / (d * d) + ds],
        ];
        ([f1, f2], j)
    }
}

/// Amplitude coefficient `k` of `l = k sqrt(alpha/alpha_c - 2)` in closed
/// form.
pub fn hopf_amplitude_coefficient(p: &Params) -> Result<f64, PerturbError> {
    let e = p.eps_t2();
    if !(e > 2.0) {
        return Err(PerturbError::NotSupercritical(e));
    }
    let (g, p0, t1, t2) = (p.g, p.p0, p.t1, p.t2);
    let eps = p.epsilon;
    let num = 4.0
        * g
        * g
        * p0
        * p0
        * t1
        * t2
        * (t2 * t2
            + 2.0 * g * t1 * t2 * t2
            + t1 * t1 * (-4.0 + g * g * t2 * t2 + eps * eps * t2 * t2));
    let den = (1.0 + g * t1)
        * (3.0 * t2 * t2
            + 2.0 * t1 * t2 * (-1.0 + 3.0 * g * t2)
            + t1 * t1 * (g * t2 * (-2.0 + 3.0 * g * t2) + 2.0 * (-4.0 + eps * eps * t2 * t2)));
    let k2 = num / den;
    if !(k2 > 0.0) {
        return Err(PerturbError::NoSolution);
    }
    Ok(k2.sqrt())
}

/// Solves the balance equations by Newton iteration from the asymptotic
/// amplitude and the no-signal oscillation frequency.
pub fn solve_harmonic_balance(p: &Params) -> Result<PerturbativeCycle, PerturbError> {
    let k = hopf_amplitude_coefficient(p)?;
    let r = p.alpha_ratio();
    let bal = Balance::new(p);
    let w0 = ns_eigenvalues(p).1.im.abs() * p.t2;
    let (mut u, mut v) = (k * k * (r - 2.0).max(0.0), w0 * w0);
    let mut res = bal.eval(u, v).0;
    for _ in 0..50 {
        let (f, j) = bal.eval(u, v);
        res = f;
        if f[0].abs().max(f[1].abs()) <= 1e-14 {
            break;
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(PerturbError::NoSolution);
        }
        u -= (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        v -= (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        if !(u.is_finite() && v > 0.0) {
            return Err(PerturbError::NoSolution);
        }
    }
    if !(res[0].abs().max(res[1].abs()) <= 1e-12 && u >= 0.0) {
        return Err(PerturbError::NoSolution);
    }
    Ok(assemble(p, u.sqrt(), v.sqrt() / p.t2, res))
}

fn assemble(p: &Params, l: f64, omega: f64, residuals: [f64; 2]) -> PerturbativeCycle {
    let wt = omega * p.t2;
    let scale = -l * p.eps_t2() / (2.0 * (wt * wt + 1.0));
    let gamma = p.gamma_z();
    let pre = -p.alpha * l * l / 8.0;
    let den = gamma * gamma + 4.0 * omega * omega;
    let r = p.alpha_ratio();
    PerturbativeCycle {
        l,
        omega,
        b_cos: -scale * wt,
        b_sin: scale,
        dpz_const: pre / gamma,
        dpz_cos2: -pre * gamma / den,
        dpz_sin2: -pre * 2.0 * omega / den,
        residuals,
        extrapolated: !(r > 2.0 && r <= VALIDITY_LIMIT),
    }
}

/// Time-domain waveforms of a perturbative cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waveforms {
    pub cycle: PerturbativeCycle,
    pub pz_ns: f64,
}

impl Waveforms {
    pub fn a(&self, t: f64) -> f64 {
        self.cycle.l * (self.cycle.omega * t).sin()
    }

    pub fn b(&self, t: f64) -> f64 {
        let (s, c) = (self.cycle.omega * t).sin_cos();
        self.cycle.b_cos * c + self.cycle.b_sin * s
    }

    pub fn delta_pz(&self, t: f64) -> f64 {
        let (s, c) = (2.0 * self.cycle.omega * t).sin_cos();
        self.cycle.dpz_const + self.cycle.dpz_cos2 * c + self.cycle.dpz_sin2 * s
    }

    pub fn state(&self, t: f64) -> ReducedState {
        ReducedState::new(self.a(t), self.b(t), self.pz_ns + self.delta_pz(t))
    }

    /// `n` states evenly spaced over one period.
    pub fn sample(&self, n: usize) -> Vec<[f64; 3]> {
        let tau = self.cycle.period();
        (0..n)
            .map(|i| self.state(tau * i as f64 / n as f64).to_array())
            .collect()
    }
}

pub fn reconstruct_waveforms(pc: &PerturbativeCycle, p: &Params) -> Waveforms {
    Waveforms {
        cycle: *pc,
        pz_ns: crate::analytic::ns_pz(p),
    }
}
