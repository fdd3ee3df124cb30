//! Physical parameters and vector fields of the twin spin-maser equations.
//!
//! Two systems live here: the reduced three-dimensional system in
//! `(A, B, Pz)` and the full six-dimensional Bloch system for the two cell
//! polarizations. Times are seconds, rates are s⁻¹, frequencies rad/s.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::integrate::OdeSystem;

/// Physical parameters shared by both cells.
///
/// `alpha` is stored in absolute units (s⁻¹ per unit polarization); the
/// dimensionless ratio `alpha / alpha_c` is available through
/// [`Params::alpha_ratio`] and [`Params::at`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Pump polarization, dimensionless, in (0, 1].
    pub p0: f64,
    /// Longitudinal relaxation time (s).
    pub t1: f64,
    /// Transverse relaxation time (s).
    pub t2: f64,
    /// Spin-exchange pumping rate (s⁻¹).
    pub g: f64,
    /// Feedback amplification factor (s⁻¹).
    pub alpha: f64,
    /// Detuning `omega1 - omega2` (rad/s).
    pub epsilon: f64,
}

/// Constants derived from [`Params`] that set the axes of every diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Critical amplification factor at zero detuning (s⁻¹).
    pub alpha_c: f64,
    /// `T2 (G + 1/T1)`, dimensionless.
    pub d: f64,
}

impl DerivedConstants {
    /// `f(x) = 1 + (x/2)^2`.
    pub fn f_of_x(x: f64) -> f64 {
        1.0 + 0.25 * x * x
    }
}

pub const DEFAULT_P0: f64 = 1.0;
pub const DEFAULT_T1: f64 = 21.5;
pub const DEFAULT_T2: f64 = 13.65;
pub const DEFAULT_G: f64 = 0.03;

impl Default for Params {
    fn default() -> Self {
        Params {
            p0: DEFAULT_P0,
            t1: DEFAULT_T1,
            t2: DEFAULT_T2,
            g: DEFAULT_G,
            alpha: 0.0,
            epsilon: 0.0,
        }
    }
}

impl Params {
    pub fn new(
        p0: f64,
        t1: f64,
        t2: f64,
        g: f64,
        alpha: f64,
        epsilon: f64,
    ) -> Result<Self, ParamError> {
        let p = Params {
            p0,
            t1,
            t2,
            g,
            alpha,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Default cell parameters at the given dimensionless coordinates
    /// `alpha / alpha_c` and `epsilon * T2`.
    pub fn at(alpha_ratio: f64, eps_t2: f64) -> Self {
        Params::default()
            .with_alpha_ratio(alpha_ratio)
            .with_eps_t2(eps_t2)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let finite = [self.p0, self.t1, self.t2, self.g, self.alpha, self.epsilon]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(ParamError::NonFinite);
        }
        if !(self.p0 > 0.0 && self.p0 <= 1.0) {
            return Err(ParamError::OutOfRange {
                name: "P0",
                value: self.p0,
            });
        }
        if self.t1 <= 0.0 {
            return Err(ParamError::OutOfRange {
                name: "T1",
                value: self.t1,
            });
        }
        if self.t2 <= 0.0 {
            return Err(ParamError::OutOfRange {
                name: "T2",
                value: self.t2,
            });
        }
        if self.g <= 0.0 {
            return Err(ParamError::OutOfRange {
                name: "G",
                value: self.g,
            });
        }
        if self.alpha < 0.0 {
            return Err(ParamError::OutOfRange {
                name: "alpha",
                value: self.alpha,
            });
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedConstants {
        derived_constants(self)
    }

    pub fn alpha_c(&self) -> f64 {
        (1.0 + 1.0 / (self.g * self.t1)) / (self.t2 * self.p0)
    }

    pub fn alpha_ratio(&self) -> f64 {
        self.alpha / self.alpha_c()
    }

    pub fn eps_t2(&self) -> f64 {
        self.epsilon * self.t2
    }

    /// Longitudinal recovery rate `G + 1/T1`.
    pub fn gamma_z(&self) -> f64 {
        self.g + 1.0 / self.t1
    }

    pub fn with_alpha_ratio(mut self, alpha_ratio: f64) -> Self {
        self.alpha = alpha_ratio * self.alpha_c();
        self
    }

    pub fn with_eps_t2(mut self, eps_t2: f64) -> Self {
        self.epsilon = eps_t2 / self.t2;
        self
    }
}

pub fn derived_constants(params: &Params) -> DerivedConstants {
    DerivedConstants {
        alpha_c: params.alpha_c(),
        d: params.t2 * params.gamma_z(),
    }
}

/// A point `(A, B, Pz)` of the reduced phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState {
    pub a: f64,
    pub b: f64,
    pub pz: f64,
}

impl ReducedState {
    pub const fn new(a: f64, b: f64, pz: f64) -> Self {
        ReducedState { a, b, pz }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.pz]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        ReducedState {
            a: x[0],
            b: x[1],
            pz: x[2],
        }
    }

    /// Image under the symmetry `(A, B) -> (-A, -B)`.
    pub fn mirror(self) -> Self {
        ReducedState {
            a: -self.a,
            b: -self.b,
            pz: self.pz,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.pz.is_finite()
    }

    pub fn distance(&self, other: &ReducedState) -> f64 {
        let (da, db, dp) = (self.a - other.a, self.b - other.b, self.pz - other.pz);
        (da * da + db * db + dp * dp).sqrt()
    }
}

/// The two cell polarizations `P1, P2` of the full Bloch system.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FullState {
    pub p1: [f64; 3],
    pub p2: [f64; 3],
}

impl FullState {
    pub fn to_array(self) -> [f64; 6] {
        [
            self.p1[0], self.p1[1], self.p1[2], self.p2[0], self.p2[1], self.p2[2],
        ]
    }

    pub fn from_array(x: [f64; 6]) -> Self {
        FullState {
            p1: [x[0], x[1], x[2]],
            p2: [x[3], x[4], x[5]],
        }
    }

    /// Mean polarization of the two cells.
    pub fn mean(&self) -> [f64; 3] {
        [
            0.5 * (self.p1[0] + self.p2[0]),
            0.5 * (self.p1[1] + self.p2[1]),
            0.5 * (self.p1[2] + self.p2[2]),
        ]
    }
}

/// Right-hand side of the reduced system (per second).
pub fn reduced_rhs(s: &ReducedState, p: &Params) -> ReducedState {
    ReducedState::from_array(reduced_rhs_array(&s.to_array(), p))
}

#[inline]
pub(crate) fn reduced_rhs_array(x: &[f64; 3], p: &Params) -> [f64; 3] {
    let [a, b, pz] = *x;
    [
        p.alpha * pz * a + 0.5 * p.epsilon * b - a / p.t2,
        -0.5 * p.epsilon * a - b / p.t2,
        -0.25 * p.alpha * a * a - pz / p.t1 + p.g * (p.p0 - pz),
    ]
}

/// Analytic Jacobian of [`reduced_rhs`], rows indexed by equation.
pub fn reduced_jacobian(s: &ReducedState, p: &Params) -> Matrix3<f64> {
    reduced_jacobian_array(&s.to_array(), p)
}

#[inline]
pub(crate) fn reduced_jacobian_array(x: &[f64; 3], p: &Params) -> Matrix3<f64> {
    let [a, _, pz] = *x;
    Matrix3::new(
        p.alpha * pz - 1.0 / p.t2,
        0.5 * p.epsilon,
        p.alpha * a,
        -0.5 * p.epsilon,
        -1.0 / p.t2,
        0.0,
        -0.5 * p.alpha * a,
        0.0,
        -1.0 / p.t1 - p.g,
    )
}

/// Closed-form trace of the reduced Jacobian, `alpha Pz - 2/T2 - 1/T1 - G`.
pub fn jacobian_trace(s: &ReducedState, p: &Params) -> f64 {
    p.alpha * s.pz - 2.0 / p.t2 - 1.0 / p.t1 - p.g
}

/// Larmor frequencies of the two cells. Only their difference enters the
/// reduced dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullParams {
    pub params: Params,
    pub omega1: f64,
    pub omega2: f64,
}

impl FullParams {
    /// Splits `params.epsilon` symmetrically around the carrier `omega_c`.
    pub fn from_carrier(params: Params, omega_c: f64) -> Self {
        FullParams {
            params,
            omega1: omega_c + 0.5 * params.epsilon,
            omega2: omega_c - 0.5 * params.epsilon,
        }
    }
}

/// Right-hand side of the full six-dimensional Bloch system.
pub fn full_rhs(s: &FullState, fp: &FullParams) -> FullState {
    FullState::from_array(full_rhs_array(&s.to_array(), fp))
}

pub(crate) fn full_rhs_array(x: &[f64; 6], fp: &FullParams) -> [f64; 6] {
    let p = &fp.params;
    let mx = 0.5 * (x[0] + x[3]);
    let my = 0.5 * (x[1] + x[4]);
    let mut out = [0.0; 6];
    for (j, omega) in [fp.omega1, fp.omega2].into_iter().enumerate() {
        let (px, py, pz) = (x[3 * j], x[3 * j + 1], x[3 * j + 2]);
        out[3 * j] = omega * py + p.alpha * mx * pz - px / p.t2;
        out[3 * j + 1] = -omega * px + p.alpha * my * pz - py / p.t2;
        out[3 * j + 2] = -p.alpha * (mx * px + my * py) - pz / p.t1 + p.g * (p.p0 - pz);
    }
    out
}

/// The reduced system as an integrable vector field.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSystem<'a>(pub &'a Params);

impl OdeSystem<3> for ReducedSystem<'_> {
    #[inline]
    fn rhs(&self, _t: f64, x: &[f64; 3]) -> [f64; 3] {
        reduced_rhs_array(x, self.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FullSystem<'a>(pub &'a FullParams);

impl OdeSystem<6> for FullSystem<'_> {
    #[inline]
    fn rhs(&self, _t: f64, x: &[f64; 6]) -> [f64; 6] {
        full_rhs_array(x, self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn defaults() -> Params {
        Params::default()
    }

    #[test]
    fn derived_constants_for_default_cells() {
        let dc = derived_constants(&defaults());
        assert!((dc.alpha_c - 0.186_842).abs() < 5e-7, "{}", dc.alpha_c);
        assert!((dc.d - 1.044_384).abs() < 5e-7, "{}", dc.d);
        assert_eq!(DerivedConstants::f_of_x(2.0), 2.0);
    }

    #[test]
    fn alpha_c_tends_to_one_over_t2p0_when_pumping_dominates() {
        let p = Params {
            t1: 1e12,
            g: 1.0,
            t2: 1.0,
            ..defaults()
        };
        assert!((p.alpha_c() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Params::new(0.0, 1.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(Params::new(1.5, 1.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(Params::new(1.0, -1.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(Params::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(Params::new(1.0, 1.0, 1.0, 1.0, -0.1, 0.0).is_err());
        assert!(Params::new(1.0, 1.0, f64::NAN, 1.0, 0.0, 0.0).is_err());
        assert!(Params::new(1.0, 1.0, 1.0, 1.0, 0.5, -3.0).is_ok());
    }

    #[test]
    fn no_signal_state_is_stationary() {
        for (r, e) in [(0.5, 0.0), (3.0, 1.0), (10.0, 2.5)] {
            let p = Params::at(r, e);
            let pz = p.p0 / (1.0 + 1.0 / (p.g * p.t1));
            let d = reduced_rhs(&ReducedState::new(0.0, 0.0, pz), &p);
            assert_eq!(d.a, 0.0);
            assert_eq!(d.b, 0.0);
            assert!(d.pz.abs() < 1e-17);
        }
    }

    #[test]
    fn jacobian_is_block_diagonal_at_no_signal_point() {
        let p = Params::at(2.3, 1.7);
        let pz = p.p0 / (1.0 + 1.0 / (p.g * p.t1));
        let j = reduced_jacobian(&ReducedState::new(0.0, 0.0, pz), &p);
        assert_eq!(j[(0, 2)], 0.0);
        assert_eq!(j[(1, 2)], 0.0);
        assert_eq!(j[(2, 0)], 0.0);
        assert_eq!(j[(2, 1)], 0.0);
        assert!((j[(2, 2)] + p.gamma_z()).abs() < 1e-17);
    }

    #[test]
    fn decoupled_cells_rotate_and_decay() {
        // alpha = 0: transverse components follow exp((-1/T2 - i omega) t).
        let params = Params {
            alpha: 0.0,
            epsilon: 0.2,
            ..defaults()
        };
        let fp = FullParams::from_carrier(params, 1.0);
        let s = FullState {
            p1: [0.3, 0.1, 0.2],
            p2: [-0.2, 0.4, 0.1],
        };
        let d = full_rhs(&s, &fp);
        let w1 = fp.omega1;
        assert!((d.p1[0] - (w1 * 0.1 - 0.3 / params.t2)).abs() < 1e-15);
        assert!((d.p1[1] - (-w1 * 0.3 - 0.1 / params.t2)).abs() < 1e-15);
        let w2 = fp.omega2;
        assert!((d.p2[0] - (w2 * 0.4 + 0.2 / params.t2)).abs() < 1e-15);
    }

    #[test]
    fn full_no_signal_is_stationary() {
        let params = Params::at(4.0, 2.0);
        let pz = params.p0 / (1.0 + 1.0 / (params.g * params.t1));
        let fp = FullParams::from_carrier(params, 3.0);
        let d = full_rhs(
            &FullState {
                p1: [0.0, 0.0, pz],
                p2: [0.0, 0.0, pz],
            },
            &fp,
        );
        assert!(d.to_array().iter().all(|v| v.abs() < 1e-16));
    }

    fn fd_jacobian(x: &ReducedState, p: &Params, h: f64) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for j in 0..3 {
            let mut xp = x.to_array();
            let mut xm = x.to_array();
            xp[j] += h;
            xm[j] -= h;
            let fp = reduced_rhs_array(&xp, p);
            let fm = reduced_rhs_array(&xm, p);
            for i in 0..3 {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        m
    }

    proptest! {
        #[test]
        fn jacobian_matches_central_differences(
            a in -1.0..1.0f64, b in -1.0..1.0f64, pz in -1.0..1.0f64,
            r in 0.0..12.0f64, e in -4.0..4.0f64,
        ) {
            let p = Params::at(r, e);
            let x = ReducedState::new(a, b, pz);
            let j = reduced_jacobian(&x, &p);
            let fd = fd_jacobian(&x, &p, 1e-6);
            let scale = j.abs().max().max(1e-3);
            prop_assert!((j - fd).abs().max() <= 1e-6 * scale);
            let tr = j.trace();
            prop_assert!((tr - jacobian_trace(&x, &p)).abs() <= 1e-15);
        }

        #[test]
        fn mirror_symmetry_is_exact(
            a in -1.0..1.0f64, b in -1.0..1.0f64, pz in -1.0..1.0f64,
            r in 0.0..12.0f64, e in -4.0..4.0f64,
        ) {
            let p = Params::at(r, e);
            let x = ReducedState::new(a, b, pz);
            let f = reduced_rhs(&x, &p);
            let g = reduced_rhs(&x.mirror(), &p);
            prop_assert_eq!(g.a, -f.a);
            prop_assert_eq!(g.b, -f.b);
            prop_assert_eq!(g.pz, f.pz);
        }

        #[test]
        fn detuning_reversal_maps_field_to_field(
            a in -1.0..1.0f64, b in -1.0..1.0f64, pz in -1.0..1.0f64,
            r in 0.0..12.0f64, e in -4.0..4.0f64,
        ) {
            // (eps, A, B) -> (-eps, A, -B)
            let p = Params::at(r, e);
            let q = Params::at(r, -e);
            let f = reduced_rhs(&ReducedState::new(a, b, pz), &p);
            let g = reduced_rhs(&ReducedState::new(a, -b, pz), &q);
            prop_assert_eq!(g.a, f.a);
            prop_assert_eq!(g.b, -f.b);
            prop_assert_eq!(g.pz, f.pz);
        }
    }
}
