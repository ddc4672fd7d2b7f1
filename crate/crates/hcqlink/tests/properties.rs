//! Property-based suites for the analytic layers: entropy, loss budgets,
//! histogram partitioning and the GLLP bound.

use std::collections::BTreeMap;

use proptest::prelude::*;

use hcqlink::fiber::{channel_loss, db_to_transmittance, Band, FiberSpec, LossBudget};
use hcqlink::keyrate::{binary_entropy, gllp_rate, KeyRateParams};
use hcqlink::stats::{histogram, peak_areas};

fn fiber(length_km: f64, prop_db_per_km: f64, iface_db: f64) -> FiberSpec {
    FiberSpec {
        membrane_thickness_um: 1.2,
        refractive_index: 1.45,
        window_loss_db_per_km: BTreeMap::from([(2, prop_db_per_km), (3, prop_db_per_km)]),
        window_min_loss_db_per_km: BTreeMap::new(),
        interface_loss_db: BTreeMap::from([(Band::Quantum, iface_db), (Band::Classical, iface_db)]),
        length_km,
        num_interfaces: 2,
    }
}

fn params(gain_q: f64, qber_e: f64, p_multi: f64) -> KeyRateParams {
    KeyRateParams {
        gain_q,
        qber_e,
        p_multi,
        f_ec: 1.16,
        sift_factor_q: 0.5,
        rep_rate_hz: 80e6,
    }
}

fn rate_or_zero(p: &KeyRateParams) -> f64 {
    match gllp_rate(p) {
        Ok(r) => r,
        Err(hcqlink::Error::Infeasible(_)) => 0.0,
        Err(e) => panic!("unexpected error: {e}"),
    }
}

proptest! {
    #[test]
    fn entropy_symmetric(x in 0.0..=1.0f64) {
        let a = binary_entropy(x).unwrap();
        let b = binary_entropy(1.0 - x).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounded_and_concave(x in 0.001..=0.999f64, y in 0.001..=0.999f64) {
        let hx = binary_entropy(x).unwrap();
        prop_assert!((0.0..=1.0).contains(&hx));
        let mid = binary_entropy(0.5 * (x + y)).unwrap();
        let avg = 0.5 * (binary_entropy(x).unwrap() + binary_entropy(y).unwrap());
        prop_assert!(mid >= avg - 1e-12);
    }

    #[test]
    fn loss_budget_additive_in_length(
        l1 in 0.0..5.0f64,
        l2 in 0.0..5.0f64,
        alpha in 0.01..5.0f64,
        iface in 0.0..5.0f64,
    ) {
        let a = channel_loss(&fiber(l1, alpha, iface), 0.934).unwrap();
        let b = channel_loss(&fiber(l2, alpha, iface), 0.934).unwrap();
        let ab = channel_loss(&fiber(l1 + l2, alpha, iface), 0.934).unwrap();
        prop_assert!((a.propagation_db + b.propagation_db - ab.propagation_db).abs() < 1e-9);
        let budget = LossBudget::from_components(a.propagation_db, a.interface_db);
        prop_assert!((budget.total_db - a.total_db).abs() < 1e-12);
    }

    #[test]
    fn transmittance_multiplicative(db1 in 0.0..30.0f64, db2 in 0.0..30.0f64) {
        let t = db_to_transmittance(db1 + db2);
        let product = db_to_transmittance(db1) * db_to_transmittance(db2);
        prop_assert!((t - product).abs() < 1e-12);
    }

    #[test]
    fn histogram_total_bounded_and_partition(
        raw in proptest::collection::vec(0i64..2_000_000, 1..60),
    ) {
        let mut tags = raw.clone();
        tags.sort_unstable();
        let h = histogram(&tags, &tags, 100, 62_500, 12_500).unwrap();
        // every counted pair lies within the span
        let mut expected = 0u64;
        for &a in &tags {
            for &b in &tags {
                if (b - a).abs() <= 62_500 {
                    expected += 1;
                }
            }
        }
        prop_assert_eq!(h.total_counts(), expected);
        // window == period assigns every fully covered bin to exactly one peak
        let areas = peak_areas(&h, 12_500).unwrap();
        let assigned = areas.central + areas.sides.values().sum::<u64>();
        prop_assert!(assigned <= h.total_counts());
    }

    #[test]
    fn gllp_monotone_in_qber(
        gain in 1e-4..1e-1f64,
        e1 in 0.0..0.05f64,
        e2 in 0.0..0.05f64,
    ) {
        let lo = e1.min(e2);
        let hi = e1.max(e2);
        let r_lo = rate_or_zero(&params(gain, lo, gain * 0.1));
        let r_hi = rate_or_zero(&params(gain, hi, gain * 0.1));
        prop_assert!(r_lo >= r_hi - 1e-12);
    }

    #[test]
    fn gllp_monotone_in_p_multi(
        gain in 1e-4..1e-1f64,
        m1 in 0.0..1.0f64,
        m2 in 0.0..1.0f64,
    ) {
        let lo = gain * 0.9 * m1.min(m2);
        let hi = gain * 0.9 * m1.max(m2);
        let r_lo = rate_or_zero(&params(gain, 0.01, lo));
        let r_hi = rate_or_zero(&params(gain, 0.01, hi));
        prop_assert!(r_lo >= r_hi - 1e-12);
    }

    #[test]
    fn gllp_monotone_in_gain_at_zero_multiphoton(
        g1 in 1e-4..1e-1f64,
        g2 in 1e-4..1e-1f64,
        e in 0.0..0.05f64,
    ) {
        let lo = g1.min(g2);
        let hi = g1.max(g2);
        let r_lo = rate_or_zero(&params(lo, e, 0.0));
        let r_hi = rate_or_zero(&params(hi, e, 0.0));
        // with no multiphoton tagging the rate is linear in the gain
        prop_assert!(r_hi >= r_lo - 1e-12);
    }

    #[test]
    fn gllp_rate_bounded_by_gain(
        gain in 1e-4..1e-1f64,
        e in 0.0..0.05f64,
        mfrac in 0.0..1.0f64,
    ) {
        let r = rate_or_zero(&params(gain, e, gain * mfrac));
        prop_assert!(r >= 0.0);
        prop_assert!(r <= gain);
    }
}
