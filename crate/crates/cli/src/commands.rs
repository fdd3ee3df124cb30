//! Execution of a [`RunConfig`]. Each command returns its data files in
//! memory; writing them is left to the caller.

use serde::Serialize;
use serde_json::{json, Value};
use twinmaser::analytic::{
    classify_fixed_point, ns_boundary_alpha, ns_eigenvalues, ns_fixed_point, tfp_boundary_alpha_y,
    tfp_fixed_points,
};
use twinmaser::classify::{scan_route, stability_diagram, BifurcationEvent, Region};
use twinmaser::correspond::{
    full_lyapunov_max, lift_cycle, lift_fixed_point, lift_state, lift_trajectory,
    quasiperiodicity_check, LiftContext, COMMENSURATE_TOL, FULL_CSV_HEADER,
};
use twinmaser::cycles::{
    continue_cycle, refine_cycle_with, settle_and_extract, CycleCandidate, LimitCycle,
};
use twinmaser::integrate::{integrate, lyapunov_max, IntegratorOptions};
use twinmaser::io::{csv_table, push_row};
use twinmaser::model::ReducedSystem;
use twinmaser::perturb::{
    hopf_amplitude_coefficient, reconstruct_waveforms, solve_harmonic_balance,
};
use twinmaser::{Params, ReducedState};

use crate::config::*;
use crate::error::CliError;

/// Files produced by one run, in write order, plus a JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub summary: Value,
}

impl RunOutput {
    fn new(summary: Value) -> Self {
        RunOutput {
            files: Vec::new(),
            summary,
        }
    }

    fn file(mut self, name: &str, contents: String) -> Self {
        self.files.push((name.to_string(), contents));
        self
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
    s.push('\n');
    s
}

/// Runs the command in `cfg`. `workers` only sizes the thread pool of the
/// diagram; results do not depend on it.
pub fn execute(cfg: &RunConfig, workers: Option<usize>) -> Result<RunOutput, CliError> {
    let p = cfg.params.to_params()?;
    let tol = cfg.tolerances.integrator()?;
    match &cfg.command {
        Command::Simulate(o) => simulate(o, &p, tol),
        Command::FixedPoints => fixed_points(&p),
        Command::Boundaries(o) => boundaries(o, &p),
        Command::Cycle(o) => cycle(o, &p, tol),
        Command::Route(o) => route(o, &p),
        Command::Diagram(o) => diagram(o, cfg.seed, &p, tol, workers),
        Command::Perturb(o) => perturb(o, &p),
        Command::Correspond(o) => correspond(o, &p, tol),
        Command::Lyapunov(o) => lyapunov(o, &p, tol),
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{name} must be positive (got {v})"
        )))
    }
}

fn simulate(
    o: &SimulateOptions,
    p: &Params,
    tol: IntegratorOptions,
) -> Result<RunOutput, CliError> {
    positive("t_end", o.t_end)?;
    if o.full {
        positive("omega_c", o.omega_c)?;
    }
    let x0 = initial_state(o.x0, p)?;
    let tr = integrate(&ReducedSystem(p), x0.to_array(), (0.0, o.t_end), tol)?;
    let times: Vec<f64> = match o.samples {
        Some(n) if n >= 2 => (0..n)
            .map(|i| o.t_end * i as f64 / (n - 1) as f64)
            .collect(),
        Some(n) => {
            return Err(CliError::Validation(format!(
                "samples must be at least 2 (got {n})"
            )))
        }
        None => tr.times.clone(),
    };
    let csv = if o.full {
        let l = lift_trajectory(&tr, &LiftContext::new(p, o.omega_c, o.phi));
        csv_table(
            FULL_CSV_HEADER,
            times
                .iter()
                .map(|&t| std::iter::once(t).chain(l.eval(t).to_array())),
        )
    } else {
        csv_table(
            "t,A,B,Pz",
            times.iter().map(|&t| std::iter::once(t).chain(tr.eval(t))),
        )
    };
    let last = tr.last_state();
    Ok(
        RunOutput::new(json!({ "steps": tr.stats, "final_state": last }))
            .file("trajectory.csv", csv),
    )
}

fn fixed_points(p: &Params) -> Result<RunOutput, CliError> {
    let ns = ns_fixed_point(p);
    let mut points = vec![ns];
    if let Ok((plus, minus)) = tfp_fixed_points(p) {
        points.push(plus);
        points.push(minus);
    }
    let rows: Vec<Value> = points
        .iter()
        .map(|fp| json!({ "fixed_point": fp, "stability": classify_fixed_point(fp) }))
        .collect();
    let (lp, lm, l3) = ns_eigenvalues(p);
    let d = p.derived();
    let body = json!({
        "alpha_ratio": p.alpha_ratio(),
        "eps_t2": p.eps_t2(),
        "alpha_c": d.alpha_c,
        "d": d.d,
        "fixed_points": rows,
        "ns_closed_form_eigenvalues": [lp, lm, l3],
    });
    Ok(RunOutput::new(json!({ "count": points.len() })).file("fixed_points.json", to_json(&body)))
}

fn boundaries(o: &BoundaryOptions, p: &Params) -> Result<RunOutput, CliError> {
    positive("eps_t2_max", o.eps_t2_max)?;
    positive("alpha_ratio_max", o.alpha_ratio_max)?;
    if o.points < 2 {
        return Err(CliError::Validation("points must be at least 2".into()));
    }
    let n = o.points;
    let ns = csv_table(
        "eps_t2,alpha_ratio",
        (0..n).map(|i| {
            let e = o.eps_t2_max * i as f64 / (n - 1) as f64;
            [e, ns_boundary_alpha(e)]
        }),
    );
    // The twin-point Hopf curve lives on y = (eps T2 / 2)^2 strictly
    // between 1 and d; it is sampled at interior points and cut at the top
    // of the plotting window.
    let d = p.derived().d;
    let (lo, hi) = (d.min(1.0), d.max(1.0));
    let mut tfp = String::from("eps_t2,alpha_ratio\n");
    for i in 0..n {
        let y = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
        let a = tfp_boundary_alpha_y(y, p)?;
        let e = 2.0 * y.sqrt();
        if a <= o.alpha_ratio_max && e <= o.eps_t2_max {
            push_row(&mut tfp, [e, a]);
        }
    }
    Ok(RunOutput::new(json!({ "d": d }))
        .file("ns_boundary.csv", ns)
        .file("tfp_boundary.csv", tfp))
}

fn find_cycle(
    o: &CycleOptions,
    p: &Params,
    tol: IntegratorOptions,
) -> Result<LimitCycle, CliError> {
    positive("t_settle", o.t_settle)?;
    positive("t_observe", o.t_observe)?;
    let guess = match (o.anchor, o.period) {
        (Some(a), Some(t)) => {
            positive("period", t)?;
            CycleCandidate {
                anchor: ReducedState::from_array(a),
                period: t,
                spread: 0.0,
                nodes: Vec::new(),
            }
        }
        (None, None) if o.mode != CycleMode::Refine => {
            settle_and_extract(&initial_state(o.x0, p)?, p, &o.settle(tol))?
        }
        _ => {
            return Err(CliError::Validation(
                "a cycle guess needs both anchor and period".into(),
            ))
        }
    };
    Ok(refine_cycle_with(&guess, p, &o.shooting(tol))?)
}

fn orbit_csv(
    c: &LimitCycle,
    p: &Params,
    samples: usize,
    tol: IntegratorOptions,
) -> Result<String, CliError> {
    let tr = integrate(&ReducedSystem(p), c.anchor.to_array(), (0.0, c.period), tol)?;
    let n = samples.max(2);
    Ok(csv_table(
        "t,A,B,Pz",
        (0..n).map(|i| {
            let t = c.period * i as f64 / (n - 1) as f64;
            std::iter::once(t).chain(tr.eval(t))
        }),
    ))
}

fn cycle(o: &CycleOptions, p: &Params, tol: IntegratorOptions) -> Result<RunOutput, CliError> {
    let c = find_cycle(o, p, tol)?;
    if o.mode != CycleMode::Continue {
        let summary =
            json!({ "period": c.period, "stable": c.stable, "multipliers": c.multipliers });
        return Ok(RunOutput::new(summary)
            .file("cycle.json", to_json(&c))
            .file("cycle.csv", orbit_csv(&c, p, o.samples, tol)?));
    }
    let Some(target) = o.target else {
        return Err(CliError::Validation("continue needs a target".into()));
    };
    if !target.is_finite() || target < 0.0 {
        return Err(CliError::Validation(format!("bad target {target}")));
    }
    positive("initial_step", o.initial_step)?;
    let br = continue_cycle(&c, p, o.axis.sweep(), target, &o.continuation(tol))?;
    let summary = json!({
        "points": br.points.len(),
        "termination": br.termination,
        "endpoint": br.endpoint,
        "folds": br.folds,
        "flags": br.flags,
    });
    Ok(RunOutput::new(summary.clone())
        .file("branch.jsonl", br.to_jsonl())
        .file("branch_summary.json", to_json(&summary)))
}

fn route(o: &RouteOptions, p: &Params) -> Result<RunOutput, CliError> {
    let spec = o.spec()?;
    let events = scan_route(&spec, p)?;
    let summary = json!({
        "route": spec.route,
        "events": events.iter().map(|e| json!({ "kind": e.kind, "location": e.location, "uncertainty": e.uncertainty })).collect::<Vec<_>>(),
    });
    Ok(RunOutput::new(summary).file("events.jsonl", BifurcationEvent::to_jsonl(&events)))
}

fn diagram(
    o: &DiagramOptions,
    seed: u64,
    p: &Params,
    tol: IntegratorOptions,
    workers: Option<usize>,
) -> Result<RunOutput, CliError> {
    let d = stability_diagram(&o.grid(seed), p, &o.classify(tol), workers)?;
    let count = |r: Region| d.cells.iter().filter(|c| c.region == Some(r)).count();
    let summary = json!({
        "cells": d.cells.len(),
        "region_i": count(Region::I),
        "region_ii": count(Region::II),
        "undetermined": d.cells.iter().map(|c| c.undetermined).sum::<usize>(),
    });
    Ok(RunOutput::new(summary)
        .file("diagram.csv", d.to_csv())
        .file("boundaries.json", to_json(&d.boundaries)))
}

fn perturb(o: &PerturbOptions, p: &Params) -> Result<RunOutput, CliError> {
    let (lo, hi) = o.range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo && o.points >= 2) {
        return Err(CliError::Validation(
            "perturb range must be increasing with at least 2 points".into(),
        ));
    }
    let k = hopf_amplitude_coefficient(p)?;
    let mut table = String::from("alpha_ratio,l,omega,period,k_sqrt\n");
    for i in 0..o.points {
        let x = lo + (hi - lo) * i as f64 / (o.points - 1) as f64;
        if x <= 2.0 {
            continue;
        }
        let pc = solve_harmonic_balance(&p.with_alpha_ratio(x))?;
        push_row(
            &mut table,
            [x, pc.l, pc.omega, pc.period(), k * (x - 2.0).sqrt()],
        );
    }
    let mut out = RunOutput::new(Value::Null);
    let here = if p.alpha_ratio() > 2.0 {
        let pc = solve_harmonic_balance(p)?;
        let w = reconstruct_waveforms(&pc, p);
        let n = o.samples.max(2);
        let wave = csv_table(
            "t,A,B,Pz",
            (0..n).map(|i| {
                let t = pc.period() * i as f64 / n as f64;
                std::iter::once(t).chain(w.state(t).to_array())
            }),
        );
        out = out.file("waveforms.csv", wave);
        Some(pc)
    } else {
        None
    };
    let body = json!({ "k": k, "eps_t2": p.eps_t2(), "cycle": here });
    out.summary = json!({ "k": k });
    Ok(out
        .file("perturb.json", to_json(&body))
        .file("amplitude.csv", table))
}

fn correspond(
    o: &CorrespondOptions,
    p: &Params,
    tol: IntegratorOptions,
) -> Result<RunOutput, CliError> {
    positive("omega_c", o.omega_c)?;
    if !o.phi.is_finite() {
        return Err(CliError::Validation("phi must be finite".into()));
    }
    let ctx = LiftContext::new(p, o.omega_c, o.phi);
    let n = o.samples.max(2);
    let (report, csv) = match o.source {
        LiftSource::Tfp => {
            let (plus, _) = tfp_fixed_points(p)?;
            let l = lift_fixed_point(&plus, p, &ctx);
            let report = json!({
                "source": o.source,
                "context": ctx,
                "carrier_period": l.period(),
                "residual_max": l.max_residual(p, n),
                "periodicity_error": l.periodicity_error(n),
            });
            (report, l.to_csv(n))
        }
        LiftSource::Cycle => {
            positive("periods", o.periods)?;
            let c = find_cycle(
                &CycleOptions {
                    x0: o.x0,
                    ..CycleOptions::default()
                },
                p,
                tol,
            )?;
            let l = lift_cycle(&c, p, &ctx, o.periods, tol)?;
            let report = json!({
                "source": o.source,
                "context": ctx,
                "period": c.period,
                "residual_max": l.max_residual(p, n),
                "winding": quasiperiodicity_check(c.period, &ctx, COMMENSURATE_TOL),
            });
            (report, l.to_csv(n))
        }
    };
    Ok(RunOutput::new(report.clone())
        .file("full_trajectory.csv", csv)
        .file("correspond.json", to_json(&report)))
}

fn lyapunov(
    o: &LyapunovRunOptions,
    p: &Params,
    tol: IntegratorOptions,
) -> Result<RunOutput, CliError> {
    let x0 = initial_state(o.x0, p)?;
    let opts = o.lyapunov(tol);
    let (exponent, series) = if o.full {
        positive("omega_c", o.omega_c)?;
        let ctx = LiftContext::new(p, o.omega_c, 0.0);
        full_lyapunov_max(&lift_state(&x0, 0.0, &ctx), &ctx.full_params(p), &opts)?
    } else {
        let e = lyapunov_max(&x0, p, &opts)?;
        (e.exponent, e.series)
    };
    let body = json!({ "exponent": exponent, "full": o.full });
    Ok(RunOutput::new(body.clone())
        .file("lyapunov.json", to_json(&body))
        .file(
            "convergence.csv",
            csv_table("t,exponent", series.iter().map(|&(t, v)| [t, v])),
        ))
}
