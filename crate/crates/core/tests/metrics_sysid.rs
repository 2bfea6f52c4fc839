use dobc_core::metrics::{compute_indices, render_report, settling_time, ReportFormat, DEFAULT_BAND};
use dobc_core::stability::spectral_abscissa;
use dobc_core::sysid::{fit_second_order, synthetic_dataset, verify_stability, IdDataset};
use dobc_core::TransferFunction;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2..400)
}

proptest! {
    #[test]
    fn cauchy_bounds_hold(e in signal(), dt in 1e-4f64..0.1) {
        let r = compute_indices(&e, dt, 0.0);
        let sup = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = 1e-12 * (1.0 + r.iae * sup + r.itae * sup);
        prop_assert!(r.ise <= r.iae * sup + slack);
        prop_assert!(r.itse <= r.itae * sup + slack);
    }

    #[test]
    fn indices_grow_with_horizon(e in signal(), cut in 1usize..400) {
        let cut = cut.min(e.len());
        let short = compute_indices(&e[..cut], 1e-3, 0.0);
        let long = compute_indices(&e, 1e-3, 0.0);
        for (a, b) in [(short.ise, long.ise), (short.itse, long.itse), (short.iae, long.iae), (short.itae, long.itae)] {
            prop_assert!(a <= b + 1e-15);
        }
    }
}

#[test]
fn indices_converge_with_step_size() {
    let idx = |dt: f64| {
        let n = (8.0 / dt).round() as usize;
        let e: Vec<f64> = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                (-0.7 * t).exp() * (3.0 * t).cos()
            })
            .collect();
        compute_indices(&e, dt, 0.0)
    };
    let (a, b) = (idx(2e-3), idx(1e-3));
    for (x, y) in [(a.ise, b.ise), (a.itse, b.itse), (a.iae, b.iae), (a.itae, b.itae)] {
        assert!((x - y).abs() < 1e-3 * y.abs(), "{x} vs {y}");
    }
}

#[test]
fn exponential_decay_oracle() {
    let dt = 1e-3;
    let e: Vec<f64> = (0..=40_000).map(|k| (-(k as f64) * dt).exp()).collect();
    let r = compute_indices(&e, dt, 0.0);
    for (got, want) in [(r.ise, 0.5), (r.itse, 0.25), (r.iae, 1.0), (r.itae, 1.0)] {
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }
    let s = settling_time(&e, 0.0, DEFAULT_BAND, dt, 0.0);
    assert!(s.settled && (s.time - 20f64.ln()).abs() < 1e-3, "{s:?}");
}

#[test]
fn empty_report_is_header_only() {
    let csv = render_report(std::iter::empty(), ReportFormat::Csv);
    assert_eq!(csv.lines().count(), 1);
}

fn plant() -> TransferFunction {
    TransferFunction::from_coeffs(&[2.68e5], &[4661.0, 303.4, 1.0]).unwrap()
}

#[test]
fn input_scaling_scales_only_the_gain() {
    let data = synthetic_dataset(&plant(), 1e-4, 2.0).unwrap();
    let base = fit_second_order(&data).unwrap();
    for c in [0.01, 3.0, 250.0] {
        let scaled = IdDataset::new(data.dt, data.u.iter().map(|v| v * c).collect(), data.y.clone()).unwrap();
        let r = fit_second_order(&scaled).unwrap();
        assert!((r.b0 * c / base.b0 - 1.0).abs() < 1e-3, "c={c}");
        assert!((r.a1 / base.a1 - 1.0).abs() < 1e-3 && (r.a0 / base.a0 - 1.0).abs() < 1e-3, "c={c}");
    }
}

#[test]
fn unrelated_output_is_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 5000;
    let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let r = fit_second_order(&IdDataset::new(1e-3, u, y).unwrap()).unwrap();
    assert!(r.flagged, "fit {}", r.fit_percent);
}

#[test]
fn verdicts_agree_with_pole_signs_across_gains() {
    let r = fit_second_order(&synthetic_dataset(&plant(), 1e-4, 2.0).unwrap()).unwrap();
    for k in 0..60 {
        let ki = 0.2 * k as f64;
        let c = verify_stability(&r, ki).unwrap();
        assert_eq!(c.stable, c.pole_stable, "ki={ki}");
        assert_eq!(c.stable, spectral_abscissa(&c.characteristic) < 0.0);
    }
}
