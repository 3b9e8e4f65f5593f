use proptest::prelude::*;

use sdwan_core::delay::{Delay, DelayModelSpec};
use sdwan_core::model::{LinkKind, OverlayLink, RATE_FLOOR};

fn link(cap: f64, prop: f64) -> OverlayLink {
    OverlayLink {
        id: "e".into(),
        src: "a".into(),
        dst: "b".into(),
        capacity_mbps: cap,
        prop_delay_ms: prop,
        kind: LinkKind::Mv,
    }
}

fn ms(d: Delay) -> f64 {
    d.finite().expect("finite")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inverse_recovers_load(cap in 0.5..50.0f64, prop in 0.0..30.0f64, frac in 0.0..0.99f64) {
        let m = DelayModelSpec::default();
        let l = link(cap, prop);
        let load = frac * cap;
        let bound = ms(m.predict_delay_spr(&l, load).unwrap());
        let back = m.invert_delay_bound(&l, bound).unwrap();
        prop_assert!((back - load).abs() <= 1e-9 * cap, "{back} vs {load}");
    }

    #[test]
    fn spr_delay_strictly_increasing(cap in 0.5..50.0f64, a in 0.0..0.99f64, b in 0.0..0.99f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let m = DelayModelSpec::default();
        let l = link(cap, 10.0);
        let (lo, hi) = (a.min(b) * cap, a.max(b) * cap);
        prop_assert!(ms(m.predict_delay_spr(&l, lo).unwrap()) < ms(m.predict_delay_spr(&l, hi).unwrap()));
    }

    #[test]
    fn qos_delay_strictly_decreasing(d in 0.0..20.0f64, u1 in 0.01..20.0f64, u2 in 0.01..20.0f64) {
        prop_assume!((u1 - u2).abs() > 1e-6);
        let m = DelayModelSpec::default();
        let l = link(40.0, 15.0);
        let (lo, hi) = (d + u1.min(u2), d + u1.max(u2));
        prop_assert!(ms(m.predict_delay_qos(&l, d, lo).unwrap()) > ms(m.predict_delay_qos(&l, d, hi).unwrap()));
    }

    #[test]
    fn relaxed_qos_delay_is_a_convex_extension(d in 0.0..10.0f64, z in 0.02..20.0f64) {
        let m = DelayModelSpec::default();
        let l = link(40.0, 15.0);
        let r = |v: f64| m.qos_delay_relaxed(&l, d, v);
        // Agrees with the exact predictor once headroom reaches the floor.
        if z - d >= RATE_FLOOR {
            prop_assert!((r(z) - ms(m.predict_delay_qos(&l, d, z).unwrap())).abs() <= 1e-9 * r(z));
        }
        // Slope matches a central difference and the curve never bends down.
        let h = 1e-4;
        let fd = (r(z + h) - r(z - h)) / (2.0 * h);
        let slope = m.qos_delay_relaxed_slope(d, z);
        prop_assert!((fd - slope).abs() <= 1e-3 * slope.abs().max(1.0), "{fd} vs {slope}");
        let second = r(z - h) - 2.0 * r(z) + r(z + h);
        prop_assert!(second >= -1e-9 - 8.0 * f64::EPSILON * r(z - h).abs());
    }
}

#[test]
fn boundaries() {
    let m = DelayModelSpec::default();
    let l = link(6.0, 10.0);
    assert_eq!(m.predict_delay_spr(&l, 6.0).unwrap(), Delay::Saturated);
    assert_eq!(m.predict_delay_spr(&l, 7.0).unwrap(), Delay::Saturated);
    assert!(m.predict_delay_spr(&l, -1.0).is_err());
    assert_eq!(m.predict_delay_qos(&l, 4.0, 4.0).unwrap(), Delay::Saturated);
    assert!(m.predict_delay_qos(&l, 1.0, 0.001).is_err());
    assert_eq!(m.invert_delay_bound(&l, 10.0), None);
    assert_eq!(m.invert_delay_bound(&l, 9.0), None);
    // A tight bound clamps at zero instead of going negative.
    assert_eq!(m.invert_delay_bound(&l, 10.5), Some(0.0));
    assert!((m.invert_delay_bound(&l, 1e12).unwrap() - 6.0).abs() < 1e-9);
}
