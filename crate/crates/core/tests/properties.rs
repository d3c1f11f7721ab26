use hybridsim::coupling::{amplification, antenna_field, sw_drive_field};
use hybridsim::dynamics::{
    evolve_sequence, fit_envelope, hahn_trace, rabi_trace, Axis, DecoherenceParams, PulseSequence,
};
use hybridsim::magnonics::{mode_ladder, LineShape};
use hybridsim::nv::NVConfig;
use hybridsim::nv::{ensemble_orientations, find_matching_orientation, odmr_map};
use hybridsim::params::{DriveConfig, FieldConfig};
use hybridsim::scalar::linspace;
use hybridsim::sensing::{
    drive_sweep, estimate_concentration, run_protocol, species_sweep, target_rabi, SensingConfig,
};
use hybridsim::ScenarioF64;
use proptest::prelude::*;

fn matched_frequency(s: &ScenarioF64) -> f64 {
    find_matching_orientation(2862.0, 15.0, 145.0, &s.material)
        .unwrap()
        .frequency
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn both_channels_scale_as_sqrt_power(p in 1e-4f64..10.0, x in 10.0f64..300.0) {
        let s = ScenarioF64::default();
        let f = matched_frequency(&s);
        let geo = s.geometry.at_distance(x);
        let field = FieldConfig::new(145.0, 0.0).unwrap();
        let k = s.kappa_sw().unwrap();
        let d1 = DriveConfig::new(p, f, 50.0).unwrap();
        let d4 = DriveConfig::new(4.0 * p, f, 50.0).unwrap();
        let a1 = antenna_field(&d1, &geo).unwrap();
        let a4 = antenna_field(&d4, &geo).unwrap();
        prop_assert!((a4 / a1 - 2.0).abs() < 1e-12);
        let s1 = sw_drive_field(&d1, &geo, &field, &s.material, &s.spectrum, k).unwrap().amplitude;
        let s4 = sw_drive_field(&d4, &geo, &field, &s.material, &s.spectrum, k).unwrap().amplitude;
        prop_assert!((s4 / s1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sw_drive_is_continuous_in_frequency(f in 2000.0f64..2890.0) {
        let s = ScenarioF64::default();
        let field = FieldConfig::new(145.0, 0.0).unwrap();
        let k = s.kappa_sw().unwrap();
        let at = |f: f64| {
            let d = DriveConfig::new(1e-3, f, 50.0).unwrap();
            sw_drive_field(&d, &s.geometry, &field, &s.material, &s.spectrum, k).unwrap().amplitude
        };
        let peak = at(matched_frequency(&s));
        let (a, b) = (at(f), at(f + 1e-6));
        prop_assert!((a - b).abs() <= 1e-6 * peak, "{} {}", a, b);
    }

    #[test]
    fn contrast_stays_within_bounds(power in 1e-3f64..20.0, theta_idx in 0usize..3) {
        let mut s = ScenarioF64::default();
        s.ensemble.size = 60;
        s.drive.power = power;
        s.field.theta = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI][theta_idx];
        let m = odmr_map(&linspace(0.0, 200.0, 9), &linspace(2400.0, 3300.0, 91), &s).unwrap();
        for row in &m.contrast {
            for &c in row {
                prop_assert!((0.0..=s.odmr.c_max).contains(&c));
            }
        }
    }

    #[test]
    fn rotations_that_compose_to_identity_restore_the_state(omega in 0.1f64..50.0, a in 0.0f64..6.3, b in 0.0f64..6.3) {
        let seq = PulseSequence::new(vec![
            PulseSequence::rotation(Axis::X, omega, a),
            PulseSequence::rotation(Axis::Y, omega, b),
            PulseSequence::rotation(Axis::Y, omega, std::f64::consts::TAU - b),
            PulseSequence::rotation(Axis::X, omega, std::f64::consts::TAU - a),
        ]).unwrap();
        let out = evolve_sequence(&seq, 0.0, None).unwrap();
        prop_assert!(out.population.abs() < 1e-10);
    }

    #[test]
    fn envelope_fit_round_trips(t2 in 0.3f64..5.0, alpha in 0.5f64..3.0) {
        let dec = DecoherenceParams::new(t2, alpha, None).unwrap();
        let t = linspace(0.0, 3.0 * t2, 60);
        let s = hahn_trace(&t, &dec).unwrap();
        let fit = fit_envelope(&t[1..], &s[1..]).unwrap();
        prop_assert!((fit.t2 / t2 - 1.0).abs() < 1e-3);
        prop_assert!((fit.alpha / alpha - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rabi_extrema_sit_at_half_periods(omega in 0.1f64..20.0, n in 1u32..20) {
        let dec = DecoherenceParams::new(1.0, 1.0, None).unwrap();
        let t = [(n as f64 - 0.5) / omega, n as f64 / omega];
        let p = rabi_trace(omega, 0.0, &t, &dec).unwrap();
        prop_assert!(p[0].abs() < 1e-9 && (p[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ensemble_is_unit_and_seeded(n in 1usize..200, seed in any::<u64>()) {
        let a = ensemble_orientations::<f64>(n, seed).unwrap();
        prop_assert_eq!(&a, &ensemble_orientations::<f64>(n, seed).unwrap());
        for v in &a {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sensing_is_linear_in_target_count(n in 40.0f64..400.0) {
        let s = ScenarioF64::default();
        let nv = NVConfig::at_angle(matched_theta(), 145.0, &s.material).unwrap();
        let dec = DecoherenceParams::new(1.0, 1.0, None).unwrap();
        let cfg = SensingConfig { n_targets: n, ..Default::default() };
        let one = run_protocol(&cfg, &nv, &dec, &s.material).unwrap();
        let two = run_protocol(&SensingConfig { n_targets: 2.0 * n, ..cfg.clone() }, &nv, &dec, &s.material).unwrap();
        prop_assert!((two.applied_rabi / one.applied_rabi - 2.0).abs() < 1e-12);
        let est = estimate_concentration(&one, &cfg, &s.material).unwrap();
        prop_assert!((est / n - 1.0).abs() < 0.02, "{} vs {}", est, n);
    }
}

fn matched_theta() -> f64 {
    let s = ScenarioF64::default();
    find_matching_orientation(2862.0, 15.0, 145.0, &s.material)
        .unwrap()
        .theta_nv
}

#[test]
fn amplification_follows_inverse_distance_times_attenuation() {
    let s = ScenarioF64::default();
    let f = matched_frequency(&s);
    let field = FieldConfig::new(145.0, 0.0).unwrap();
    let ladder = mode_ladder(&field, &s.material, &s.geometry, &s.spectrum).unwrap();
    let window: LineShape<f64> = s.spectrum.drive_window;
    let lengths: Vec<f64> = ladder
        .iter()
        .filter(|m| (m.frequency - f).abs() <= window.cutoff)
        .map(|m| m.decay_length)
        .collect();
    let (l_min, l_max) = lengths
        .iter()
        .fold((f64::MAX, 0.0_f64), |(a, b), &l| (a.min(l), b.max(l)));
    let drive = DriveConfig::new(1.0, f, 50.0).unwrap();
    let b20 = antenna_field(&drive, &s.geometry.at_distance(20.0)).unwrap();
    let a20 = amplification(20.0, 15.0, 145.0, f, &s).unwrap();
    assert!((a20 - 100.0).abs() < 1e-9);
    let mut last = a20;
    for x in linspace(30.0, 300.0, 10) {
        let a = amplification(x, 15.0, 145.0, f, &s).unwrap();
        assert!(a > last, "amplification must grow with distance");
        last = a;
        let pure = a20 * b20 / antenna_field(&drive, &s.geometry.at_distance(x)).unwrap();
        let att = a / pure;
        let dx = x - 20.0;
        assert!(
            att <= (-dx / l_max).exp() * (1.0 + 1e-12) && att >= (-dx / l_min).exp() * (1.0 - 1e-12),
            "x = {x}: {att}"
        );
    }
}

#[test]
fn amplification_is_linear_in_kappa() {
    let mut s = ScenarioF64::default();
    let f = matched_frequency(&s);
    let k = s.kappa_sw().unwrap();
    s.coupling.kappa_sw = Some(2.0 * k);
    let a = amplification(80.0, 15.0, 145.0, f, &s).unwrap();
    s.coupling.kappa_sw = Some(k);
    let b = amplification(80.0, 15.0, 145.0, f, &s).unwrap();
    assert!((a / b - 2.0).abs() < 1e-12);
}

#[test]
fn sensing_response_peaks_at_the_matching_field() {
    let s = ScenarioF64::default();
    let cfg = SensingConfig::<f64>::default();
    let b = linspace(1900.0, 2200.0, 3001);
    let step = b[1] - b[0];
    let r = drive_sweep(&b, &cfg, &s.material).unwrap();
    let i = (0..r.len()).max_by(|&i, &j| r[i].total_cmp(&r[j])).unwrap();
    let matched = 2.0 * cfg.f_cavity / cfg.gamma_target;
    assert!((b[i] - matched).abs() <= step, "{} vs {}", b[i], matched);
    let at = SensingConfig {
        b_drive: b[i],
        ..cfg.clone()
    };
    assert!((target_rabi(&at) - cfg.f_cavity).abs() <= cfg.gamma_target * step);
}

#[test]
fn two_species_give_resolved_peaks() {
    let s = ScenarioF64::default();
    let cfg = SensingConfig::<f64>::default();
    // A second species with a 1 % smaller gyromagnetic ratio matches about 20 G higher.
    let species = [(cfg.gamma_target, 100.0), (0.99 * cfg.gamma_target, 100.0)];
    let b = linspace(2000.0, 2100.0, 2001);
    let r = species_sweep(&b, &species, &cfg, &s.material).unwrap();
    let peaks: Vec<usize> = (1..r.len() - 1)
        .filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1])
        .collect();
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    let valley = r[peaks[0]..peaks[1]].iter().cloned().fold(f64::MAX, f64::min);
    assert!(valley < 0.1 * r[peaks[0]]);
}

#[test]
fn empty_cavity_gives_flat_trace() {
    let s = ScenarioF64::default();
    let nv = NVConfig::at_angle(matched_theta(), 145.0, &s.material).unwrap();
    let dec = DecoherenceParams::new(1.0, 1.0, None).unwrap();
    let cfg = SensingConfig {
        n_targets: 0.0,
        ..Default::default()
    };
    let t = run_protocol(&cfg, &nv, &dec, &s.material).unwrap();
    assert!(t.nv_population.iter().all(|&p| p == 1.0));
    assert_eq!(t.inferred_rabi, Some(0.0));
    let off = SensingConfig {
        f_cavity: 2700.0,
        ..Default::default()
    };
    assert!(run_protocol(&off, &nv, &dec, &s.material).is_err());
}

#[test]
fn undersampled_trace_cannot_be_inverted() {
    let s = ScenarioF64::default();
    let nv = NVConfig::at_angle(matched_theta(), 145.0, &s.material).unwrap();
    let dec = DecoherenceParams::new(1.0, 1.0, None).unwrap();
    let cfg = SensingConfig {
        n_targets: 2.0,
        ..Default::default()
    };
    let t = run_protocol(&cfg, &nv, &dec, &s.material).unwrap();
    assert!(t.inferred_rabi.is_none());
    assert!(estimate_concentration(&t, &cfg, &s.material).is_err());
}
