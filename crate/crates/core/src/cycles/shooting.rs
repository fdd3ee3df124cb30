use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cycle_metrics, is_stable, multipliers_of, CycleCandidate, LimitCycle};
use crate::analytic::{tfp_fixed_points, tfp_hopf_epsilon};
use crate::error::CycleError;
use crate::integrate::{
    flow_with_sensitivity, integrate_endpoint, FlowSensitivity, IntegratorOptions, SweepParam,
};
use crate::linalg::{eigenvalues3, eigenvector3};
use crate::model::{
    reduced_jacobian_array, reduced_rhs_array, Params, ReducedState, ReducedSystem,
};

/// Seed radii tried in order by [`unstable_pair_seed`] callers.
pub const DEFAULT_SEED_RADII: [f64; 6] = [1e-2, 3e-3, 3e-2, 1e-3, 6e-2, 1e-1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    pub integrator: IntegratorOptions,
    /// Convergence threshold on the largest residual component.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest scaled Newton update accepted before declaring divergence.
    pub max_step: f64,
    /// Segments longer than this (s) are split into several shooting
    /// segments; single shooting is used for shorter periods.
    pub max_segment_time: f64,
    /// Largest guess residual accepted by [`refine_cycle`].
    pub max_guess_residual: f64,
    /// Converged orbits smaller than this are the fixed point itself.
    pub min_extent: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            integrator: IntegratorOptions::default(),
            tol: 1e-10,
            max_iter: 25,
            max_step: 1.0,
            max_segment_time: 200.0,
            max_guess_residual: 0.1,
            min_extent: 1e-6,
        }
    }
}

/// Pseudo-arclength constraint on `(anchor, ln tau, lambda)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ArcConstraint {
    pub anchor: [f64; 3],
    pub ln_tau: f64,
    pub lambda: f64,
    pub tangent: [f64; 5],
}

/// Solution of the shooting equations with the data needed afterwards.
pub(crate) struct Shot {
    pub nodes: Vec<[f64; 3]>,
    pub tau: f64,
    pub lambda: f64,
    pub phis: Vec<Matrix3<f64>>,
    pub residual: f64,
    pub iterations: usize,
}

/// Newton iteration on the multiple-shooting system
/// `phi(x_i, tau/m) - x_{i+1} = 0`, `dA/dt(x_0) = 0`, optionally with the
/// sweep parameter free and an arclength condition closing the system.
///
/// With `half` set the nodes cover half a period and the last segment
/// closes onto the mirror image of `x_0`, which restricts the solution to
/// mirror-symmetric cycles; the returned shot is expanded to the full
/// period.
#[allow(clippy::too_many_arguments)]
pub(crate) fn shoot(
    mut nodes: Vec<[f64; 3]>,
    mut tau: f64,
    base: &Params,
    sweep: SweepParam,
    mut lambda: f64,
    arc: Option<&ArcConstraint>,
    half: bool,
    opts: &ShootingOptions,
) -> Result<Shot, CycleError> {
    let m = nodes.len();
    let spans = if half { 2 * m } else { m };
    let close = |i: usize| -> f64 {
        if half && i + 1 == m {
            -1.0
        } else {
            1.0
        }
    };
    let free = arc.is_some();
    let n = 3 * m + 1 + usize::from(free);
    let mut last_residual = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CycleError::NewtonDiverged {
                iterations: iter,
                residual: last_residual,
            });
        }
        let p = if free { sweep.set(base, lambda) } else { *base };
        p.validate().map_err(|_| CycleError::NewtonDiverged {
            iterations: iter,
            residual: last_residual,
        })?;
        let dt = tau / spans as f64;
        let flows: Vec<Result<FlowSensitivity, _>> = nodes
            .par_iter()
            .map(|x| flow_with_sensitivity(x, dt, &p, free.then_some(sweep), opts.integrator))
            .collect();
        let mut fl = Vec::with_capacity(m);
        for f in flows {
            match f {
                Ok(f) => fl.push(f),
                Err(_) => {
                    return Err(CycleError::NewtonDiverged {
                        iterations: iter,
                        residual: last_residual,
                    })
                }
            }
        }

        let mut r = DVector::zeros(n);
        for i in 0..m {
            let next = &nodes[(i + 1) % m];
            let sgn = close(i);
            r[3 * i] = fl[i].end[0] - sgn * next[0];
            r[3 * i + 1] = fl[i].end[1] - sgn * next[1];
            r[3 * i + 2] = fl[i].end[2] - next[2];
        }
        r[3 * m] = reduced_rhs_array(&nodes[0], &p)[0];
        if let Some(a) = arc {
            r[3 * m + 1] = arc_value(a, &nodes[0], tau, lambda);
        }
        let residual = r.amax();
        if residual <= opts.tol {
            let mut phis: Vec<Matrix3<f64>> = fl.iter().map(|f| f.phi).collect();
            if half {
                let mirror = Matrix3::from_diagonal(&nalgebra::Vector3::new(-1.0, -1.0, 1.0));
                for i in 0..m {
                    let x = nodes[i];
                    nodes.push([-x[0], -x[1], x[2]]);
                    phis.push(mirror * phis[i] * mirror);
                }
            }
            return Ok(Shot {
                nodes,
                tau,
                lambda,
                phis,
                residual,
                iterations: iter,
            });
        }
        if iter == opts.max_iter || !residual.is_finite() {
            return Err(CycleError::NewtonDiverged {
                iterations: iter,
                residual,
            });
        }
        last_residual = residual;

        let mut jac = DMatrix::zeros(n, n);
        for i in 0..m {
            let j = (i + 1) % m;
            for a in 0..3 {
                for b in 0..3 {
                    jac[(3 * i + a, 3 * i + b)] += fl[i].phi[(a, b)];
                }
                jac[(3 * i + a, 3 * j + a)] -= if a < 2 { close(i) } else { 1.0 };
            }
            let f_end = reduced_rhs_array(&fl[i].end, &p);
            for a in 0..3 {
                jac[(3 * i + a, 3 * m)] = f_end[a] / spans as f64;
                if free {
                    jac[(3 * i + a, 3 * m + 1)] = fl[i].dparam[a];
                }
            }
        }
        let j0 = reduced_jacobian_array(&nodes[0], &p);
        for b in 0..3 {
            jac[(3 * m, b)] = j0[(0, b)];
        }
        if free {
            // Derivative of dA/dt with respect to the sweep parameter.
            let x = &nodes[0];
            jac[(3 * m, 3 * m + 1)] = match sweep {
                SweepParam::Alpha => p.alpha_c() * x[2] * x[0],
                SweepParam::Epsilon => 0.5 * x[1] / p.t2,
            };
            let a = arc.unwrap();
            for b in 0..3 {
                jac[(3 * m + 1, b)] = a.tangent[b];
            }
            jac[(3 * m + 1, 3 * m)] = a.tangent[3] / tau;
            jac[(3 * m + 1, 3 * m + 1)] = a.tangent[4];
        }

        let delta = jac
            .lu()
            .solve(&(-r))
            .ok_or(CycleError::SingularShootingMatrix)?;
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(CycleError::SingularShootingMatrix);
        }
        let mut scaled = 0.0f64;
        for i in 0..3 * m {
            scaled = scaled.max(delta[i].abs());
        }
        scaled = scaled.max(delta[3 * m].abs() / tau);
        if free {
            scaled = scaled.max(delta[3 * m + 1].abs());
        }
        if scaled > opts.max_step {
            return Err(CycleError::NewtonDiverged {
                iterations: iter + 1,
                residual,
            });
        }
        for i in 0..m {
            for c in 0..3 {
                nodes[i][c] += delta[3 * i + c];
            }
        }
        tau += delta[3 * m];
        if free {
            lambda += delta[3 * m + 1];
        }
    }
    unreachable!("loop returns on its final iteration")
}

pub(crate) fn arc_value(a: &ArcConstraint, x0: &[f64; 3], tau: f64, lambda: f64) -> f64 {
    let g: f64 = (0..3).map(|c| a.tangent[c] * (x0[c] - a.anchor[c])).sum();
    g + a.tangent[3] * (tau.ln() - a.ln_tau) + a.tangent[4] * (lambda - a.lambda)
}

/// Number of shooting segments for a period.
pub(crate) fn segments_for(period: f64, opts: &ShootingOptions) -> usize {
    ((period / opts.max_segment_time).ceil() as usize).max(1)
}

/// Shooting nodes for `m` equal segments, reusing the guess nodes where
/// they line up and integrating forward from the nearest one otherwise.
pub(crate) fn initial_nodes(
    guess: &CycleCandidate,
    m: usize,
    p: &Params,
    opts: &IntegratorOptions,
) -> Result<Vec<[f64; 3]>, CycleError> {
    let have: Vec<[f64; 3]> = if guess.nodes.is_empty() {
        vec![guess.anchor.to_array()]
    } else {
        guess.nodes.iter().map(|x| x.to_array()).collect()
    };
    if have.len() == m {
        return Ok(have);
    }
    let k = have.len();
    let dt_have = guess.period / k as f64;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let t = guess.period * i as f64 / m as f64;
        let src = ((t / dt_have).floor() as usize).min(k - 1);
        let t0 = src as f64 * dt_have;
        out.push(integrate_endpoint(
            &ReducedSystem(p),
            have[src],
            (t0, t.max(t0)),
            *opts,
        )?);
    }
    Ok(out)
}

/// Converts a converged shot into a [`LimitCycle`] at parameters `p`.
pub(crate) fn finish(
    shot: &Shot,
    p: &Params,
    opts: &ShootingOptions,
) -> Result<LimitCycle, CycleError> {
    let nodes: Vec<ReducedState> = shot
        .nodes
        .iter()
        .map(|x| ReducedState::from_array(*x))
        .collect();
    let multipliers = multipliers_of(&shot.phis);
    let metrics = cycle_metrics(&nodes, shot.tau, p, opts.integrator)?;
    if metrics.extent() < opts.min_extent {
        return Err(CycleError::FixedPointReached {
            state: shot.nodes[0],
        });
    }
    Ok(LimitCycle {
        anchor: nodes[0],
        period: shot.tau,
        stable: is_stable(&multipliers),
        multipliers,
        metrics,
        residual: shot.residual,
        nodes,
    })
}

/// Newton shooting from a guess with default options.
pub fn refine_cycle(guess: &CycleCandidate, p: &Params) -> Result<LimitCycle, CycleError> {
    refine_cycle_with(guess, p, &ShootingOptions::default())
}

/// Newton shooting from a guess. The segment count follows the period;
/// on divergence the count is doubled twice before giving up.
pub fn refine_cycle_with(
    guess: &CycleCandidate,
    p: &Params,
    opts: &ShootingOptions,
) -> Result<LimitCycle, CycleError> {
    if !(guess.period > 0.0 && guess.period.is_finite()) || !guess.anchor.is_finite() {
        return Err(CycleError::PoorGuess(f64::INFINITY));
    }
    let m0 = segments_for(guess.period, opts).max(guess.nodes.len());
    let start = initial_nodes(guess, m0, p, &opts.integrator)?;
    let closure = guess_closure(&start, guess.period, p, &opts.integrator)?;
    if closure > opts.max_guess_residual {
        return Err(CycleError::PoorGuess(closure));
    }
    let mut last_err = None;
    for m in [m0, 2 * m0, 4 * m0] {
        let nodes = if m == m0 {
            start.clone()
        } else {
            initial_nodes(guess, m, p, &opts.integrator)?
        };
        match shoot(
            nodes,
            guess.period,
            p,
            SweepParam::Alpha,
            p.alpha_ratio(),
            None,
            false,
            opts,
        ) {
            Ok(shot) => return finish(&shot, p, opts),
            Err(e @ (CycleError::NewtonDiverged { .. } | CycleError::SingularShootingMatrix)) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// Newton shooting restricted to mirror-symmetric cycles, whose second
/// half-period is the image of the first under `(A, B) -> (-A, -B)`.
///
/// Unlike [`refine_cycle_with`] this stays well posed where a symmetric
/// cycle has a `+1` multiplier along an asymmetric direction.
pub fn refine_symmetric_cycle(
    guess: &CycleCandidate,
    p: &Params,
    opts: &ShootingOptions,
) -> Result<LimitCycle, CycleError> {
    if !(guess.period > 0.0 && guess.period.is_finite()) || !guess.anchor.is_finite() {
        return Err(CycleError::PoorGuess(f64::INFINITY));
    }
    let m = segments_for(0.5 * guess.period, opts);
    let full = initial_nodes(guess, 2 * m, p, &opts.integrator)?;
    let shot = shoot(
        full[..m].to_vec(),
        guess.period,
        p,
        SweepParam::Alpha,
        p.alpha_ratio(),
        None,
        true,
        opts,
    )?;
    finish(&shot, p, opts)
}

fn guess_closure(
    nodes: &[[f64; 3]],
    period: f64,
    p: &Params,
    opts: &IntegratorOptions,
) -> Result<f64, CycleError> {
    let m = nodes.len();
    let dt = period / m as f64;
    let mut worst = 0.0f64;
    for i in 0..m {
        let end = integrate_endpoint(&ReducedSystem(p), nodes[i], (0.0, dt), *opts)?;
        let next = &nodes[(i + 1) % m];
        for c in 0..3 {
            worst = worst.max((end[c] - next[c]).abs());
        }
    }
    Ok(worst)
}

/// Linearized ellipse seeds for the unstable cycle pair surrounding the
/// twin fixed points just below the subcritical Hopf point.
///
/// `delta_eps_t2` is the offset below the Hopf point on the `eps T2` axis
/// (`None`: `1e-3` of the Hopf value). Returns the parameters at which the
/// seeds live together with one seed per twin point.
pub fn unstable_pair_seed(
    p: &Params,
    delta_eps_t2: Option<f64>,
    radius: f64,
) -> Result<(Params, [CycleCandidate; 2]), CycleError> {
    let eps_h = tfp_hopf_epsilon(p.alpha_ratio(), p)? * p.t2;
    let delta = delta_eps_t2.unwrap_or(1e-3 * eps_h);
    let q = p.with_eps_t2(eps_h - delta);
    let (plus, minus) = tfp_fixed_points(&q)?;
    let seed = |fp: &crate::analytic::FixedPoint| -> CycleCandidate {
        let j = crate::model::reduced_jacobian(&fp.state, &q);
        let ev = eigenvalues3(&j);
        let crit: Complex64 = ev.iter().copied().filter(|l| l.im > 0.0).fold(
            Complex64::new(f64::NEG_INFINITY, 0.0),
            |a, b| if b.re > a.re { b } else { a },
        );
        let v = eigenvector3(&j, crit);
        // With a real A component the linear ellipse has its A-extremum at
        // the anchor.
        let phase = if v[0].norm() > 0.0 {
            v[0].conj() / v[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let w = v.map(|z| z * phase);
        let re = [w[0].re, w[1].re, w[2].re];
        let norm = re.iter().map(|x| x * x).sum::<f64>().sqrt();
        let x = fp.state.to_array();
        let anchor = [
            x[0] + radius * re[0] / norm,
            x[1] + radius * re[1] / norm,
            x[2] + radius * re[2] / norm,
        ];
        CycleCandidate {
            anchor: ReducedState::from_array(anchor),
            period: std::f64::consts::TAU / crit.im,
            spread: f64::NAN,
            nodes: Vec::new(),
        }
    };
    Ok((q, [seed(&plus), seed(&minus)]))
}
