use twinmaser::analytic::ns_pz;
use twinmaser::cycles::{
    continue_cycle, hausdorff, refine_cycle, settle_and_extract, ContinuationOptions, LimitCycle,
    SettleOptions,
};
use twinmaser::integrate::{IntegratorOptions, SweepParam};
use twinmaser::perturb::{reconstruct_waveforms, solve_harmonic_balance};
use twinmaser::{Params, ReducedState};

fn stable_cycle(p: &Params) -> LimitCycle {
    let x0 = ReducedState::new(0.01, 0.0, ns_pz(p));
    let opts = SettleOptions {
        t_settle: 3200.0,
        ..Default::default()
    };
    refine_cycle(&settle_and_extract(&x0, p, &opts).unwrap(), p).unwrap()
}

#[test]
fn perturbative_orbit_tracks_the_refined_cycle() {
    let p = Params::at(2.05, 2.5);
    let pc = solve_harmonic_balance(&p).unwrap();
    let w = reconstruct_waveforms(&pc, &p);
    // The transient is slow this close to the Hopf point; the cycle is
    // reached by continuation from 2.1 instead.
    let q = Params::at(2.1, 2.5);
    let br = continue_cycle(
        &stable_cycle(&q),
        &q,
        SweepParam::Alpha,
        2.05,
        &ContinuationOptions::default(),
    )
    .unwrap();
    let last = br.last();
    assert!((last.param - 2.05).abs() < 1e-12);
    let c = last.cycle.clone();
    assert!(c.stable);
    let exact = c.sample(&p, 4000, IntegratorOptions::default()).unwrap();
    let d = hausdorff(&w.sample(4000), &exact) / c.metrics.extent();
    assert!(d <= 0.05, "{d}");
    assert!((pc.period() / c.period - 1.0).abs() < 0.02);
}

#[test]
fn amplitude_agrees_with_shooting_near_the_hopf_point() {
    let p = Params::at(2.1, 2.5);
    let c = stable_cycle(&p);
    let br = continue_cycle(
        &c,
        &p,
        SweepParam::Alpha,
        2.005,
        &ContinuationOptions::default(),
    )
    .unwrap();
    let mut checked = 0;
    for bp in br
        .points
        .iter()
        .filter(|bp| bp.param >= 2.005 && bp.param <= 2.1)
    {
        let l = solve_harmonic_balance(&p.with_alpha_ratio(bp.param))
            .unwrap()
            .l;
        let rel = (bp.cycle.metrics.a_max - l).abs() / l;
        assert!(
            rel <= 0.05,
            "alpha/alpha_c={} A_max={} l={l}",
            bp.param,
            bp.cycle.metrics.a_max
        );
        checked += 1;
    }
    assert!(checked >= 4, "{checked}");
}
