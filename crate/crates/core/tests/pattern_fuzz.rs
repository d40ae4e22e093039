use kickgate_core::hardware::{
    compile_multi_epoch, compile_pattern, validate_pattern, HardwareConstraints, PulsePattern,
};
use kickgate_core::model::{Kick, KickSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random non-overlapping bursts whose expanded span fits `budget` slots.
fn in_capacity(rng: &mut ChaCha8Rng, budget: u64) -> KickSequence {
    let n = rng.random_range(0..=12);
    let mut kicks = Vec::new();
    let mut next = rng.random_range(0..50);
    for _ in 0..n {
        let z = rng.random_range(1..=8);
        if next + z > budget {
            break;
        }
        kicks.push(Kick::new(next, z as u32));
        next += z + rng.random_range(0..budget / 6);
    }
    KickSequence::new(kicks, 2.0, 200e-12).unwrap()
}

#[test]
fn compiled_patterns_always_validate() {
    let hw = HardwareConstraints { horizon: 20e-6, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let seq = in_capacity(&mut rng, hw.steady_state_budget_slots);
        let p = compile_pattern(&seq, &hw).unwrap();
        let report = validate_pattern(&p, &hw);
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
        assert_eq!(p.slots.len() as u64, hw.horizon_slots());
        assert_eq!(p.transmitted_payload(), seq.pulse_count() as usize);
        assert_eq!(PulsePattern::from_runs(&p.runs()), p.slots);
        assert!(p.payloads.iter().all(|w| w.len <= 750));
        assert!(p.gates.iter().all(|g| g.len() as f64 * hw.slot_period >= 35e-9 * (1.0 - 1e-12)));
    }
}

#[test]
fn full_horizon_pattern_validates() {
    let hw = HardwareConstraints::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let seq = in_capacity(&mut rng, 750);
        let p = compile_pattern(&seq, &hw).unwrap();
        assert_eq!(p.slots.len(), 5_000_000);
        assert!(validate_pattern(&p, &hw).passed());
    }
}

#[test]
fn multi_epoch_patterns_validate() {
    let hw = HardwareConstraints { horizon: 100e-6, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let mut kicks = Vec::new();
        let mut next = 0;
        for _ in 0..n {
            let z = rng.random_range(1..=4);
            kicks.push(Kick::new(next, z));
            next += u64::from(z) + rng.random_range(5_000..15_000);
        }
        let seq = KickSequence::new(kicks, 2.0, 200e-12).unwrap();
        let p = compile_multi_epoch(&seq, &hw).unwrap();
        assert!(validate_pattern(&p, &hw).passed());
        assert_eq!(p.payloads.len(), n);
        assert_eq!(p.transmitted_payload(), seq.pulse_count() as usize);
    }
}
