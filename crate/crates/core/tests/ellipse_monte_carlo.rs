use kickgate_core::interferometry::{fit_ellipse, phase_from_ellipse, synthesize, PulsePairSamples, SynthesisParams};

fn params(delta_phi: f64, noise: f64, seed: u64) -> SynthesisParams {
    SynthesisParams { amp_u: 1.0, amp_v: 1.0, offset_u: 1.0, offset_v: 1.0, delta_phi, n: 200, noise, rng_seed: seed }
}

fn recovered(p: &SynthesisParams) -> f64 {
    phase_from_ellipse(&fit_ellipse(&synthesize(p).unwrap()).unwrap()).delta_phi
}

#[test]
fn noisy_phase_recovery_rate() {
    let hits = (0..100).filter(|&s| (recovered(&params(0.7, 0.05, s)) - 0.7).abs() <= 0.05).count();
    assert!(hits >= 95, "{hits}/100 within 0.05 rad");
}

#[test]
fn residual_tracks_noise_level() {
    let rms = |noise: f64| {
        let v: Vec<f64> =
            (0..100).map(|s| fit_ellipse(&synthesize(&params(1.0, noise, s)).unwrap()).unwrap().residual_rms).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (r0, r1, r2) = (rms(0.0), rms(0.025), rms(0.05));
    assert!(r0 < 1e-10);
    assert!(r1 > 1e3 * r0.max(1e-16));
    // first order in the noise amplitude
    let ratio = r2 / r1;
    assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn noiseless_round_trip_over_phase_range() {
    for i in 0..=60 {
        let dphi = 0.05 + (std::f64::consts::PI - 0.1) * i as f64 / 60.0;
        for seed in [1, 2] {
            let got = recovered(&SynthesisParams {
                amp_u: 0.7,
                amp_v: 1.9,
                offset_u: 3.0,
                offset_v: -1.0,
                ..params(dphi, 0.0, seed)
            });
            assert!((got - dphi).abs() < 1e-6, "{dphi}: {got}");
        }
    }
}

#[test]
fn axis_scaling_leaves_phase_unchanged() {
    let s = synthesize(&params(1.3, 0.03, 9)).unwrap();
    let base = recovered(&params(1.3, 0.03, 9));
    for (ku, kv) in [(10.0, 1.0), (1.0, 1e-3), (250.0, 0.02)] {
        let scaled = PulsePairSamples::new(s.points.iter().map(|&(u, v)| (ku * u, kv * v)).collect()).unwrap();
        let got = phase_from_ellipse(&fit_ellipse(&scaled).unwrap()).delta_phi;
        assert!((got - base).abs() < 1e-9, "{ku} {kv}: {got} vs {base}");
    }
}

#[test]
fn in_phase_data_is_flagged_degenerate() {
    for seed in 0..10 {
        let fit = fit_ellipse(&synthesize(&params(0.0, 0.0, seed)).unwrap()).unwrap();
        assert!(fit.degenerate);
        let est = phase_from_ellipse(&fit);
        assert!(est.ambiguous);
        assert_eq!(est.delta_phi, 0.0);
    }
}
