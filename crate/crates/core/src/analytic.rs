//! Closed-form equilibria, their spectra, and the analytic stability
//! boundaries of the reduced system.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::AnalyticError;
use crate::linalg::{eigenvalues3, max_real_part};
use crate::model::{reduced_jacobian, DerivedConstants, Params, ReducedState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    NoSignal,
    TwinPlus,
    TwinMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: ReducedState,
    pub kind: FixedPointKind,
    /// Sorted by decreasing real part (s⁻¹).
    pub eigenvalues: [Complex64; 3],
    pub stable: bool,
}

impl FixedPoint {
    fn new(state: ReducedState, kind: FixedPointKind, eigenvalues: [Complex64; 3]) -> Self {
        FixedPoint {
            state,
            kind,
            eigenvalues,
            stable: max_real_part(&eigenvalues) < 0.0,
        }
    }

    pub fn max_real_part(&self) -> f64 {
        max_real_part(&self.eigenvalues)
    }
}

/// `Pz` of the no-signal equilibrium, `P0 / (1 + 1/(G T1))`.
pub fn ns_pz(p: &Params) -> f64 {
    p.p0 / (1.0 + 1.0 / (p.g * p.t1))
}

pub fn ns_fixed_point(p: &Params) -> FixedPoint {
    let state = ReducedState::new(0.0, 0.0, ns_pz(p));
    let (lp, lm, l3) = ns_eigenvalues(p);
    let mut ev = [lp, lm, l3];
    crate::linalg::sort_by_real_desc(&mut ev);
    FixedPoint::new(state, FixedPointKind::NoSignal, ev)
}

/// `(λ+, λ-, λ3)` at the no-signal point. `λ±` is the closed form for the
/// transverse block; `λ3 = -(G + 1/T1)` is the decoupled `Pz` direction.
pub fn ns_eigenvalues(p: &Params) -> (Complex64, Complex64, Complex64) {
    let r = p.alpha_ratio();
    let e = p.eps_t2();
    let root = Complex64::new(r * r - e * e, 0.0).sqrt();
    let scale = 1.0 / (2.0 * p.t2);
    let base = Complex64::new(r - 2.0, 0.0);
    (
        (base + root) * scale,
        (base - root) * scale,
        Complex64::new(-p.gamma_z(), 0.0),
    )
}

/// The mirror pair of twin equilibria `(TFP+, TFP-)`.
pub fn tfp_fixed_points(p: &Params) -> Result<(FixedPoint, FixedPoint), AnalyticError> {
    let dc = p.derived();
    let e = p.eps_t2();
    let f = DerivedConstants::f_of_x(e);
    let threshold = dc.alpha_c * f;
    if !(p.alpha >= threshold * (1.0 - 1e-12)) || p.alpha <= 0.0 {
        return Err(AnalyticError::NonExistent {
            alpha_ratio: p.alpha_ratio(),
            threshold: f,
        });
    }
    let radicand = (p.g * p.p0 * (p.alpha - threshold)).max(0.0);
    let a = 2.0 * radicand.sqrt() / p.alpha;
    let b = -e * a / 2.0;
    let pz = f / (p.alpha * p.t2);
    let plus = ReducedState::new(a, b, pz);
    let minus = plus.mirror();
    let ev_plus = eigenvalues3(&reduced_jacobian(&plus, p));
    let ev_minus = eigenvalues3(&reduced_jacobian(&minus, p));
    Ok((
        FixedPoint::new(plus, FixedPointKind::TwinPlus, ev_plus),
        FixedPoint::new(minus, FixedPointKind::TwinMinus, ev_minus),
    ))
}

/// Upper boundary of the no-signal stability region, as `alpha / alpha_c`.
pub fn ns_boundary_alpha(eps_t2: f64) -> f64 {
    if eps_t2 < 2.0 {
        DerivedConstants::f_of_x(eps_t2)
    } else {
        2.0
    }
}

/// Same as [`ns_boundary_alpha`] with `epsilon` in rad/s.
pub fn ns_boundary_alpha_at(epsilon: f64, p: &Params) -> f64 {
    ns_boundary_alpha(epsilon * p.t2)
}

fn tfp_bracket(p: &Params) -> (f64, f64, f64) {
    let d = p.derived().d;
    (1f64.min(d), 1f64.max(d), d)
}

/// Right boundary of the twin-fixed-point stability region in terms of
/// `y = (eps T2 / 2)^2`, as `alpha / alpha_c`.
pub fn tfp_boundary_alpha_y(y: f64, p: &Params) -> Result<f64, AnalyticError> {
    let (lo, hi, d) = tfp_bracket(p);
    if !(y > lo && y < hi) {
        return Err(AnalyticError::OutOfDomain { y, lo, hi });
    }
    Ok(1.5 * y + (1.0 - d) / (2.0 * (y - d)))
}

/// [`tfp_boundary_alpha_y`] with `epsilon` in rad/s.
pub fn tfp_boundary_alpha(epsilon: f64, p: &Params) -> Result<f64, AnalyticError> {
    let x = 0.5 * epsilon * p.t2;
    tfp_boundary_alpha_y(x * x, p)
}

const Y_TOL: f64 = 1e-12;

/// Detuning (rad/s) at which the twin fixed points lose stability for the
/// given `alpha / alpha_c`, by bisection on the boundary curve.
pub fn tfp_hopf_epsilon(alpha_ratio: f64, p: &Params) -> Result<f64, AnalyticError> {
    let (lo, hi, d) = tfp_bracket(p);
    if !(alpha_ratio > 2.0) || !alpha_ratio.is_finite() || lo == hi {
        return Err(AnalyticError::NoRoot { alpha_ratio });
    }
    let g = |y: f64| 1.5 * y + (1.0 - d) / (2.0 * (y - d));
    // Convex on the bracket with a pole at y = d: golden-section for the
    // minimum, then bisect on the branch running up to the pole.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    while b - a > Y_TOL {
        let c = b - inv_phi * (b - a);
        let e = a + inv_phi * (b - a);
        if g(c) < g(e) {
            b = e;
        } else {
            a = c;
        }
    }
    let y_min = 0.5 * (a + b);
    if alpha_ratio <= g(y_min) {
        return Err(AnalyticError::NoRoot { alpha_ratio });
    }
    let (mut below, mut above) = (y_min, d);
    while (above - below).abs() > Y_TOL {
        let mid = 0.5 * (below + above);
        if g(mid) < alpha_ratio {
            below = mid;
        } else {
            above = mid;
        }
    }
    let y = 0.5 * (below + above);
    Ok(2.0 * y.sqrt() / p.t2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StabilityClass {
    Stable,
    SaddleOrUnstable,
    Marginal { tol: f64 },
}

/// Default margin for calling an equilibrium marginal (s⁻¹).
pub const MARGINAL_TOL: f64 = 1e-9;

pub fn classify_fixed_point(fp: &FixedPoint) -> StabilityClass {
    classify_fixed_point_with(fp, MARGINAL_TOL)
}

pub fn classify_fixed_point_with(fp: &FixedPoint, tol: f64) -> StabilityClass {
    let m = fp.max_real_part();
    if m.abs() <= tol {
        StabilityClass::Marginal { tol }
    } else if m < 0.0 {
        StabilityClass::Stable
    } else {
        StabilityClass::SaddleOrUnstable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reduced_rhs;
    use proptest::prelude::*;

    #[test]
    fn ns_pz_default() {
        let fp = ns_fixed_point(&Params::default());
        assert!((fp.state.pz - 0.392_097).abs() < 5e-7);
        let d = reduced_rhs(&fp.state, &Params::at(3.0, 1.0));
        assert_eq!((d.a, d.b), (0.0, 0.0));
        assert!(d.pz.abs() < 1e-17);
        let strong = Params {
            g: 1e9,
            ..Params::default()
        };
        assert!((ns_pz(&strong) - strong.p0).abs() < 1e-9);
    }

    #[test]
    fn ns_eigenvalues_at_hopf_threshold() {
        let p = Params::at(2.0, 2.5);
        let (lp, lm, l3) = ns_eigenvalues(&p);
        assert!(lp.re.abs() < 1e-15 && lm.re.abs() < 1e-15);
        assert!((lp.im - 0.054_945_1).abs() < 5e-8, "{lp}");
        assert!((lm.im + 0.054_945_1).abs() < 5e-8);
        assert!((l3.re + 0.076_511_6).abs() < 5e-8);
    }

    #[test]
    fn ns_marginal_at_critical_alpha_without_detuning() {
        let p = Params::at(1.0, 0.0);
        let (lp, lm, _) = ns_eigenvalues(&p);
        assert!(lp.norm() < 1e-15);
        assert!((lm.re + 1.0 / p.t2).abs() < 1e-15);
        // alpha = 0, eps = 0: double eigenvalue -1/T2.
        let (lp, lm, _) = ns_eigenvalues(&Params::at(0.0, 0.0));
        assert!((lp.re + 1.0 / 13.65).abs() < 1e-15 && (lm.re + 1.0 / 13.65).abs() < 1e-15);
    }

    #[test]
    fn transverse_pair_crosses_together_beyond_eps_t2_two() {
        for e in [2.2, 2.5, 3.0, 3.7] {
            let below = ns_eigenvalues(&Params::at(2.0 - 1e-6, e));
            let above = ns_eigenvalues(&Params::at(2.0 + 1e-6, e));
            assert!(below.0.re < 0.0 && below.1.re < 0.0);
            assert!(above.0.re > 0.0 && above.1.re > 0.0);
        }
    }

    #[test]
    fn tfp_values_at_zero_detuning() {
        let (plus, minus) = tfp_fixed_points(&Params::at(3.0, 0.0)).unwrap();
        assert!(
            (plus.state.a - 0.377_787_512_042_575_5).abs() < 1e-12,
            "{}",
            plus.state.a
        );
        assert_eq!(plus.state.b, 0.0);
        assert!(
            (plus.state.pz - 0.130_699_088_145_896).abs() < 1e-12,
            "{}",
            plus.state.pz
        );
        assert_eq!(minus.state, plus.state.mirror());
    }

    #[test]
    fn tfp_coincide_with_ns_on_pitchfork_line() {
        let e = 1.3;
        let p = Params::at(DerivedConstants::f_of_x(e), e);
        let (plus, minus) = tfp_fixed_points(&p).unwrap();
        let ns = ns_fixed_point(&p);
        assert!(plus.state.distance(&ns.state) < 1e-7);
        assert!(minus.state.distance(&ns.state) < 1e-7);
        assert!(tfp_fixed_points(&Params::at(DerivedConstants::f_of_x(e) * 0.99, e)).is_err());
    }

    #[test]
    fn ns_boundary_piecewise() {
        assert_eq!(ns_boundary_alpha(1.0), 1.25);
        assert_eq!(ns_boundary_alpha(3.0), 2.0);
        assert_eq!(ns_boundary_alpha(2.0), 2.0);
        assert!((DerivedConstants::f_of_x(2.0 - 1e-12) - 2.0).abs() < 1e-11);
    }

    #[test]
    fn tfp_boundary_values_and_domain() {
        let p = Params::default();
        let v = tfp_boundary_alpha_y(1.02, &p).unwrap();
        assert!((v - 2.4401).abs() < 5e-5, "{v}");
        assert!(matches!(
            tfp_boundary_alpha_y(0.9, &p),
            Err(AnalyticError::OutOfDomain { .. })
        ));
        assert!(tfp_boundary_alpha_y(1.05, &p).is_err());
        let d = p.derived().d;
        // monotone blow-up towards the pole
        let mut last = 0.0;
        for k in 1..=40 {
            let y = d - (d - 1.0) * 0.5f64.powi(k);
            let v = tfp_boundary_alpha_y(y, &p).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(last > 1e9);
        // continuity near y = 1
        let mut prev = tfp_boundary_alpha_y(1.0 + 1e-9, &p).unwrap();
        assert!((prev - 2.0).abs() < 1e-6);
        for k in 1..1000 {
            let y = 1.0 + (d - 1.0) * 0.9 * k as f64 / 1000.0;
            let v = tfp_boundary_alpha_y(y, &p).unwrap();
            assert!((v - prev).abs() < 0.05);
            prev = v;
        }
    }

    #[test]
    fn hopf_epsilon_roots() {
        let p = Params::default();
        for (r, expect) in [(10.0, 2.0413), (2.46, 2.0204), (4.9, 2.0374)] {
            let e = tfp_hopf_epsilon(r, &p).unwrap() * p.t2;
            assert!((e - expect).abs() < 5e-5, "{r}: {e}");
            let back = tfp_boundary_alpha(e / p.t2, &p).unwrap();
            assert!((back - r).abs() < 1e-6 * r);
        }
        assert!(matches!(
            tfp_hopf_epsilon(1.9, &p),
            Err(AnalyticError::NoRoot { .. })
        ));
    }

    #[test]
    fn hopf_epsilon_when_d_below_one() {
        let p = Params {
            g: 0.01,
            t2: 13.65,
            t1: 200.0,
            ..Params::default()
        };
        assert!(p.derived().d < 1.0);
        if let Ok(e) = tfp_hopf_epsilon(5.0, &p) {
            let back = tfp_boundary_alpha(e, &p).unwrap();
            assert!((back - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn stability_labels() {
        let ns = ns_fixed_point(&Params::at(1.2, 1.0));
        assert_eq!(classify_fixed_point(&ns), StabilityClass::Stable);
        let ns = ns_fixed_point(&Params::at(1.3, 1.0));
        assert_eq!(classify_fixed_point(&ns), StabilityClass::SaddleOrUnstable);
        let (tfp, _) = tfp_fixed_points(&Params::at(10.0, 1.9)).unwrap();
        assert_eq!(classify_fixed_point(&tfp), StabilityClass::Stable);
        let ns = ns_fixed_point(&Params::at(1.0, 0.0));
        assert!(matches!(
            classify_fixed_point(&ns),
            StabilityClass::Marginal { .. }
        ));
    }

    fn numeric_ns(p: &Params) -> [Complex64; 3] {
        eigenvalues3(&reduced_jacobian(&ns_fixed_point(p).state, p))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn closed_form_ns_spectrum_matches_numeric(r in 0.0..12.0f64, e in 0.0..4.0f64) {
            let p = Params::at(r, e);
            let closed = ns_fixed_point(&p).eigenvalues;
            let num = numeric_ns(&p);
            for z in num {
                let nearest = closed.iter().map(|c| (c - z).norm()).fold(f64::INFINITY, f64::min);
                let scale = z.norm().max(1.0 / p.t2);
                prop_assert!(nearest <= 1e-9 * scale, "{} {:?}", z, closed);
            }
        }

        #[test]
        fn tfp_residual_and_ratio(r in 2.0..12.0f64, e in 0.0..2.0f64) {
            let p = Params::at(r, e);
            let (plus, minus) = tfp_fixed_points(&p).unwrap();
            for fp in [plus, minus] {
                let d = reduced_rhs(&fp.state, &p);
                prop_assert!(d.a.abs() <= 1e-12 && d.b.abs() <= 1e-12 && d.pz.abs() <= 1e-12);
                prop_assert!((fp.state.b / fp.state.a + e / 2.0).abs() < 1e-12);
            }
        }
    }

    fn bisect_sign_change<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        let flo = f(lo);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn numeric_ns_destabilization_matches_boundary() {
        for e in [0.5, 1.0, 1.5, 2.5, 3.0] {
            let crit = bisect_sign_change(
                |r| max_real_part(&numeric_ns(&Params::at(r, e))),
                0.2,
                6.0,
                1e-10,
            );
            assert!((crit - ns_boundary_alpha(e)).abs() < 1e-8, "{e}: {crit}");
        }
    }

    #[test]
    fn numeric_tfp_destabilization_matches_hopf_root() {
        let p = Params::default();
        for r in [2.46, 4.9, 10.0] {
            let f = |e: f64| {
                let (tfp, _) = tfp_fixed_points(&Params::at(r, e)).unwrap();
                max_real_part(&eigenvalues3(&reduced_jacobian(
                    &tfp.state,
                    &Params::at(r, e),
                )))
            };
            let crit = bisect_sign_change(f, 1.9, 2.1, 1e-12);
            let eh = tfp_hopf_epsilon(r, &p).unwrap() * p.t2;
            assert!(((crit - eh) / eh).abs() < 1e-6, "{r}: {crit} vs {eh}");
        }
    }

    #[test]
    fn pitchfork_amplitude_scales_as_square_root() {
        let e = 1.0;
        let crit = ns_boundary_alpha(e);
        let pts: Vec<(f64, f64)> = (0..=20)
            .map(|k| {
                let delta = 1e-4 * 10f64.powf(k as f64 / 10.0);
                let (tfp, _) = tfp_fixed_points(&Params::at(crit + delta, e)).unwrap();
                (delta.ln(), tfp.state.a.abs().ln())
            })
            .collect();
        let slope = crate::stats::linear_fit(&pts).0;
        assert!((slope - 0.5).abs() < 0.02, "{slope}");
    }
}
