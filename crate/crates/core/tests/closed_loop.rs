use dobc_core::control::{inject_load_noise, simulate, ClosedLoop, NoiseSpec, PidGains, Plant, Stimulus};
use dobc_core::dobc::ObserverConfig;
use dobc_core::plant::{build_avr, build_lfc, AvrParams, LfcParams};
use dobc_core::scenario::{
    avr_loop, default_avr_loop, default_lfc_loop, grid_with_forecasts, run_paper_case, worst_case_scan, CaseId,
    CaseOptions, LOAD_FORECAST, PV_FORECAST,
};

fn lfc(ki: f64) -> ClosedLoop {
    ClosedLoop::new(Plant::Lfc(build_lfc(&LfcParams::default()).unwrap()), PidGains::integral(ki))
}

fn step(pv: f64, load: f64) -> Stimulus {
    Stimulus { v_ref: 0.0, pv_change: pv, load_change: load, t_step: 0.5 }
}

#[test]
fn lfc_superposition() {
    let spec = lfc(0.1);
    let both = simulate(&spec, step(-0.0667, 0.1333), 1e-3, 10.0).unwrap();
    let pv = simulate(&spec, step(-0.0667, 0.0), 1e-3, 10.0).unwrap();
    let load = simulate(&spec, step(0.0, 0.1333), 1e-3, 10.0).unwrap();
    let (a, b, c) =
        (both.channel("delta_f").unwrap(), pv.channel("delta_f").unwrap(), load.channel("delta_f").unwrap());
    let worst = a.iter().zip(b).zip(c).map(|((a, b), c)| (a - b - c).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn droop_only_steady_state_and_integral_recovery() {
    let droop = simulate(&lfc(0.0), step(0.0, 0.133), 1e-3, 60.0).unwrap();
    let df = *droop.channel("delta_f").unwrap().last().unwrap();
    assert!((df + 0.3142).abs() < 0.005 * 0.3142, "{df}");
    let integral = simulate(&lfc(0.1), step(0.0, 0.133), 1e-3, 120.0).unwrap();
    let df = *integral.channel("delta_f").unwrap().last().unwrap();
    assert!(df.abs() < 1e-4, "{df}");
}

#[test]
fn avr_case_a_converges_with_step_size() {
    let spec = default_avr_loop(None).unwrap();
    let opts = CaseOptions::default();
    let (coarse, _) = run_paper_case(CaseId::AvrA, &spec, &opts, 1e-3, None).unwrap();
    let (fine, _) = run_paper_case(CaseId::AvrA, &spec, &opts, 5e-4, None).unwrap();
    let (a, b) = (coarse.channel("v_t").unwrap(), fine.channel("v_t").unwrap());
    let worst = a.iter().enumerate().map(|(k, v)| (v - b[2 * k]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn avr_closed_loop_without_controller_gain_settles_at_ten_elevenths() {
    let avr = build_avr(&AvrParams::default()).unwrap();
    let spec = ClosedLoop::new(Plant::Avr(avr.clone()), PidGains::proportional(1.0));
    let t = simulate(&spec, Stimulus { v_ref: 1.0, ..Default::default() }, 1e-3, 30.0).unwrap();
    let v = *t.channel("v_t").unwrap().last().unwrap();
    assert!((v - 10.0 / 11.0).abs() < 1e-6, "{v}");
    assert!((avr.closed_loop().unwrap().dc_gain() - 10.0 / 11.0).abs() < 1e-12);

    let off = AvrParams { k_a: 0.0, ..AvrParams::default() };
    let spec = ClosedLoop::new(Plant::Avr(build_avr(&off).unwrap()), PidGains::proportional(1.0));
    let t = simulate(&spec, Stimulus { v_ref: 1.0, ..Default::default() }, 1e-3, 2.0).unwrap();
    assert!(t.channel("v_t").unwrap().iter().all(|&v| v == 0.0));
}

/// Adding the observer lowers ISE and IAE for a range of PID tunings, with
/// and without the measurement delay.
#[test]
fn avr_observer_improves_every_pid_profile() {
    let profiles = [
        PidGains::pid(0.5, 0.3, 0.1, 100.0),
        PidGains::pid(1.0, 0.5, 0.2, 100.0),
        PidGains::pid(0.3, 0.2, 0.05, 100.0),
        PidGains::pid(0.8, 0.6, 0.25, 50.0),
        PidGains::pid(0.6, 0.4, 0.0, 100.0),
    ];
    let opts = CaseOptions::default();
    for gains in profiles {
        for case in [CaseId::AvrA, CaseId::AvrB] {
            let base = avr_loop(&AvrParams::default(), gains, None).unwrap();
            let with = avr_loop(&AvrParams::default(), gains, Some(ObserverConfig::avr_default())).unwrap();
            let (_, a) = run_paper_case(case, &base, &opts, 1e-3, None).unwrap();
            let (_, b) = run_paper_case(case, &with, &opts, 1e-3, None).unwrap();
            assert!(b.ise < a.ise && b.iae < a.iae, "{gains:?} {case:?}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn integral_settling_grows_with_delay_while_observer_holds() {
    let opts = CaseOptions::default();
    let base = default_lfc_loop(None).unwrap();
    let with = default_lfc_loop(Some(ObserverConfig::lfc_default())).unwrap();
    let ts = |spec: &ClosedLoop, case| run_paper_case(case, spec, &opts, 1e-3, None).unwrap().1.settling_time;
    assert!(ts(&base, CaseId::LfcC) > ts(&base, CaseId::LfcB));
    let (b, c) = (ts(&with, CaseId::LfcB), ts(&with, CaseId::LfcC));
    assert!((c - b).abs() < 0.1 * b, "{b} -> {c}");
}

#[test]
fn noise_is_seeded_and_zero_mean() {
    let spec = NoiseSpec { sigma: 0.01, hold_interval: 0.01, seed: 42 };
    let a: Vec<f64> = (0..100).map(|k| spec.sample(k)).collect();
    let b: Vec<f64> = (0..100).map(|k| spec.sample(k)).collect();
    assert_eq!(a, b);
    let other = NoiseSpec { seed: 43, ..spec };
    assert_ne!(a[0], other.sample(0));

    let n = 100_000;
    let mean = (0..n).map(|k| spec.sample(k)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 3.0 * spec.sigma / (n as f64).sqrt(), "{mean}");

    let quiet = NoiseSpec { sigma: 0.0, ..spec };
    assert_eq!(inject_load_noise(&quiet, 0.133, 3.7), 0.133);
    assert_eq!(inject_load_noise(&spec, 0.0, 0.015), spec.sample(1));
}

#[test]
fn noisy_case_is_reproducible() {
    let spec = default_lfc_loop(Some(ObserverConfig::lfc_default())).unwrap();
    let mut opts = CaseOptions::default();
    opts.noise.seed = 7;
    let (a, _) = run_paper_case(CaseId::LfcD, &spec, &opts, 1e-3, Some(5.0)).unwrap();
    let (b, _) = run_paper_case(CaseId::LfcD, &spec, &opts, 1e-3, Some(5.0)).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    opts.noise.seed = 8;
    let (c, _) = run_paper_case(CaseId::LfcD, &spec, &opts, 1e-3, Some(5.0)).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}

/// Holds while the estimate clamp stays inactive, so the observer runs unclamped here.
#[test]
fn doubling_forecasts_doubles_the_sweep() {
    let observer = ObserverConfig { saturation: f64::INFINITY, ..ObserverConfig::lfc_default() };
    let spec = default_lfc_loop(Some(observer)).unwrap();
    let dt = 2e-3;
    let mut one = grid_with_forecasts(PV_FORECAST, LOAD_FORECAST);
    let mut two = grid_with_forecasts(2.0 * PV_FORECAST, 2.0 * LOAD_FORECAST);
    for s in one.iter_mut().chain(two.iter_mut()) {
        s.horizon = 15.0;
    }
    let a = worst_case_scan(&one, &spec, dt).unwrap();
    let b = worst_case_scan(&two, &spec, dt).unwrap();
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert!((y.scenario.pv_step - 2.0 * x.scenario.pv_step).abs() < 1e-12);
        assert!((y.scenario.load_step - 2.0 * x.scenario.load_step).abs() < 1e-12);
        assert!((y.delta_f_max - 2.0 * x.delta_f_max).abs() < 1e-9, "{} {}", x.delta_f_max, y.delta_f_max);
    }
    assert_eq!(a.argmax, b.argmax);
}

#[test]
fn generated_steps_respect_their_budgets() {
    for s in grid_with_forecasts(PV_FORECAST, LOAD_FORECAST) {
        s.validate().unwrap();
        assert!(s.pv_budget.contains(s.pv_budget.forecast_pf - s.pv_step));
        assert!(s.load_budget.contains(s.load_budget.forecast_pf + s.load_step));
    }
}
