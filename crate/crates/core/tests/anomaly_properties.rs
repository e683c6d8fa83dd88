use actherm::anomaly::{anomaly_check, anomaly_score, AnomalyConfig, Verdict};
use actherm::model::{MotorSpec, ThermalParams};
use proptest::prelude::*;

fn with(p: [f64; 5]) -> ThermalParams {
    ThermalParams::from_spec(&MotorSpec::ec4pole_22_90w(), 30.0)
        .unwrap()
        .with_learned(p)
}

proptest! {
    #[test]
    fn score_ignores_ambient_offset(p in prop::array::uniform5(-2.0..2.0f64), r in prop::array::uniform4(-2.0..2.0f64), p5 in -5.0..5.0f64) {
        let cfg = AnomalyConfig { d_detect: 1.0, reference: r };
        let mut q = p;
        q[4] = p5;
        prop_assert_eq!(anomaly_score(&with(p), &cfg), anomaly_score(&with(q), &cfg));
    }

    #[test]
    fn score_is_a_symmetric_distance(a in prop::array::uniform4(-2.0..2.0f64), b in prop::array::uniform4(-2.0..2.0f64)) {
        let pa = with([a[0], a[1], a[2], a[3], 0.0]);
        let pb = with([b[0], b[1], b[2], b[3], 0.0]);
        let ab = anomaly_score(&pa, &AnomalyConfig { d_detect: 1.0, reference: b });
        let ba = anomaly_score(&pb, &AnomalyConfig { d_detect: 1.0, reference: a });
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert_eq!(anomaly_score(&pa, &AnomalyConfig { d_detect: 1.0, reference: a }), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn verdict_follows_strict_threshold(delta in 0.0..3.0f64) {
        let cfg = AnomalyConfig { d_detect: 1.0, reference: [0.0; 4] };
        let params = with([delta; 5]);
        let expected = if anomaly_score(&params, &cfg) > 1.0 { Verdict::Anomaly } else { Verdict::Normal };
        prop_assert_eq!(anomaly_check(&params, &cfg), expected);
    }
}
