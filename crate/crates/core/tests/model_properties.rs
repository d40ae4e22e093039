use kickgate_core::model::{
    closure_sums, derive_parameters, gate_error, gate_phase, pair_kernel, phase_from_times, Kick, KickSequence,
};
use kickgate_core::TrapIonConfig;
use proptest::prelude::*;

fn sequence() -> impl Strategy<Value = Vec<Kick>> {
    proptest::collection::btree_map(0u64..200_000, 1u32..4, 1..12)
        .prop_map(|m| m.into_iter().map(|(s, z)| Kick::new(s, z)).collect())
}

fn seq(kicks: Vec<Kick>) -> KickSequence {
    KickSequence::new(kicks, 2.0, 200e-12).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn time_translation_invariance(kicks in sequence(), shift in 0u64..5_000_000) {
        let cfg = TrapIonConfig::default();
        let a = seq(kicks.clone());
        let b = seq(kicks.iter().map(|k| Kick::new(k.slot + shift, k.multiplicity)).collect());
        let (ac, as_) = closure_sums(&a, &cfg).unwrap();
        let (bc, bs) = closure_sums(&b, &cfg).unwrap();
        let w: f64 = kicks.iter().map(|k| f64::from(k.multiplicity)).sum();
        prop_assert!((ac.norm() - bc.norm()).abs() < 1e-11 * w);
        prop_assert!((as_.norm() - bs.norm()).abs() < 1e-11 * w);
        prop_assert_eq!(gate_phase(&a, &cfg).unwrap(), gate_phase(&b, &cfg).unwrap());
        let (ea, eb) = (gate_error(&a, &cfg).unwrap(), gate_error(&b, &cfg).unwrap());
        prop_assert!((ea - eb).abs() < 1e-10 * w * w);
        prop_assert_eq!(a.duration(), b.duration());
    }

    #[test]
    fn time_reversal(kicks in sequence()) {
        let cfg = TrapIonConfig::default();
        let p = derive_parameters(&cfg).unwrap();
        let s = seq(kicks.clone());
        let w: Vec<f64> = kicks.iter().map(|k| f64::from(k.multiplicity)).collect();
        let t = s.times();
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        // t_n -> -t_n in index order negates every t_jk and hence φ
        let a = phase_from_times(&t, &w, p.omega_c, 2.0 * p.alpha_c);
        let b = phase_from_times(&neg, &w, p.omega_c, 2.0 * p.alpha_c);
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((a - gate_phase(&s, &cfg).unwrap()).abs() <= 1e-9 * (1.0 + a.abs()));
        // playing the sequence backwards on the grid restores the time order,
        // which flips the sign once more
        let last = kicks.last().unwrap().slot;
        let reversed: Vec<Kick> = kicks.iter().rev().map(|k| Kick::new(last - k.slot, k.multiplicity)).collect();
        let c = gate_phase(&seq(reversed), &cfg).unwrap();
        prop_assert!((c - gate_phase(&s, &cfg).unwrap()).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn doubling_multiplicities_quadruples_error(kicks in sequence()) {
        let cfg = TrapIonConfig::default();
        let doubled: Vec<Kick> = kicks.iter().map(|k| Kick::new(k.slot, 2 * k.multiplicity)).collect();
        let e1 = gate_error(&seq(kicks), &cfg).unwrap();
        let e2 = gate_error(&seq(doubled), &cfg).unwrap();
        prop_assert!((e2 - 4.0 * e1).abs() <= 1e-12 * (1.0 + e2));
    }

    #[test]
    fn kernel_is_cubic_at_small_angles(x in 1e-4f64..0.05) {
        // sin(√3x)/√3 - sin x = -x³/3 + x⁵/15 + O(x⁷)
        let k = pair_kernel(1.0, x);
        let series = -x.powi(3) / 3.0 + x.powi(5) / 15.0;
        prop_assert!((k - series).abs() <= 0.01 * x.powi(7) + 1e-17);
    }
}

#[test]
fn phase_vanishes_as_cube_of_frequency() {
    let base = TrapIonConfig::default();
    let s = seq(vec![Kick::new(0, 1), Kick::new(700, 2), Kick::new(2500, 1), Kick::new(4000, 3)]);
    let phase_scaled = |lambda: f64| {
        let cfg = TrapIonConfig { trap_frequency: base.trap_frequency * lambda, ..base };
        let p = derive_parameters(&cfg).unwrap();
        // strip the α² prefactor to expose the kernel sum
        gate_phase(&s, &cfg).unwrap() / (4.0 * p.alpha_c * p.alpha_c)
    };
    let r1 = phase_scaled(1e-2);
    let r2 = phase_scaled(5e-3);
    assert!(r1 != 0.0);
    assert!((r1 / r2 - 8.0).abs() < 1e-3, "ratio {}", r1 / r2);
}
