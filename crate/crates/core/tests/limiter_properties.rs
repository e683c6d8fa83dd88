use actherm::limiter::{limiter_tick, LimiterConfig, LimiterState};
use actherm::sim::{elastic_tension, ElasticMuscle};
use proptest::prelude::*;

proptest! {
    #[test]
    fn offset_never_goes_negative(
        dl in 0.0..20.0f64,
        readings in prop::collection::vec((0.0..400.0f64, 10.0..300.0f64), 1..200),
    ) {
        let cfg = LimiterConfig::default();
        let mut s = LimiterState { dl };
        for (f, limit) in readings {
            s = limiter_tick(s, f, limit, &cfg);
            prop_assert!(s.dl >= 0.0);
        }
    }

    #[test]
    fn per_tick_slew_is_bounded(dl in 0.0..20.0f64, f in 0.0..400.0f64, limit in 10.0..300.0f64) {
        let cfg = LimiterConfig::default();
        let d = (f - limit).abs();
        let next = limiter_tick(LimiterState { dl }, f, limit, &cfg).dl;
        let change = next - dl;
        if f > limit {
            prop_assert!(change <= cfg.dl_plus * d + 1e-12);
            prop_assert!(change <= cfg.d_gain * d - dl + 1e-12);
            // an offset already beyond the cap snaps back to it in one tick
            if dl > cfg.d_gain * d {
                prop_assert!((next - cfg.d_gain * d).abs() < 1e-9);
            }
        } else {
            prop_assert!(change <= 0.0);
            prop_assert!(-change <= cfg.dl_minus * d + 1e-12);
        }
    }

    #[test]
    fn constant_excess_converges_to_gain_times_error(d in 1.0..100.0f64) {
        let cfg = LimiterConfig::default();
        let mut s = LimiterState::default();
        for _ in 0..100_000 {
            s = limiter_tick(s, 100.0 + d, 100.0, &cfg);
        }
        prop_assert!((s.dl - cfg.d_gain * d).abs() < 1e-9 * d);
    }

    #[test]
    fn elastic_loop_settles_near_any_reachable_limit(limit in 150.0..195.0f64) {
        let cfg = LimiterConfig::default();
        let muscle = ElasticMuscle::default();
        let mut s = LimiterState::default();
        let mut tail = Vec::new();
        for k in 0..10_000 {
            let f = elastic_tension(&muscle, -16.0 + s.dl);
            if k >= 7_500 {
                tail.push(f);
            }
            s = limiter_tick(s, f, limit, &cfg);
        }
        let hi = tail.iter().cloned().fold(f64::MIN, f64::max);
        let lo = tail.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(hi - limit <= 5.0 && limit - lo <= 5.0, "band [{lo}, {hi}] around {limit}");
        prop_assert!((hi - lo) / 2.0 <= 5.0);
    }
}
