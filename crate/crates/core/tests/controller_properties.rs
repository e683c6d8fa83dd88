use actherm::controller::{control_loss, control_loss_and_gradient, controller_tick, ControllerConfig, TensionPlan};
use actherm::model::{MotorSpec, ThermalParams, ThermalState};
use proptest::prelude::*;

fn ec4(p: [f64; 5]) -> ThermalParams {
    ThermalParams::from_spec(&MotorSpec::ec4pole_22_90w(), 30.0)
        .unwrap()
        .with_learned(p)
}

fn state() -> impl Strategy<Value = ThermalState> {
    (30.0..95.0f64, 30.0..70.0f64).prop_map(|(c1, c2)| ThermalState::new(c1, c2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn plan_gradient_matches_central_differences(
        p in prop::array::uniform5(-0.6..0.6f64),
        x in state(),
        plan in prop::collection::vec(10.0..300.0f64, 30),
    ) {
        let cfg = ControllerConfig::default();
        let params = ec4(p);
        let (loss, grad) = control_loss_and_gradient(&plan, x, &params, &cfg);
        for j in 0..plan.len() {
            // relative step: tensions are O(100)
            let h = 1e-6 * plan[j];
            let (mut hi, mut lo) = (plan.clone(), plan.clone());
            hi[j] += h;
            lo[j] -= h;
            let fd = (control_loss(&hi, x, &params, &cfg) - control_loss(&lo, x, &params, &cfg)) / (2.0 * h);
            // rounding in the rollout puts a floor of roughly eps·loss/h under
            // the difference quotient; slots whose gradient sits below it are
            // compared at that floor instead of 1e-10
            let noise = 64.0 * f64::EPSILON * loss / h;
            let err = (grad[j] - fd).abs();
            prop_assert!(
                err <= (1e-4 * grad[j].abs().max(fd.abs())).max(1e-10).max(noise),
                "slot {j}: {} vs {fd}",
                grad[j]
            );
        }
    }

    #[test]
    fn tick_stays_in_box_and_never_raises_loss(
        p in prop::array::uniform5(-0.6..0.6f64),
        x in state(),
        prev in prop::option::of(prop::collection::vec(0.0..400.0f64, 30)),
    ) {
        let cfg = ControllerConfig::default();
        let params = ec4(p);
        let prev = prev.map(|f_limit| TensionPlan { f_limit, created_at: 0.0 });
        let out = controller_tick(prev.as_ref(), x, &params, &cfg, 1.0).unwrap();
        prop_assert!(out.plan.f_limit.iter().all(|f| (cfg.f_min..=cfg.f_max).contains(f)));
        prop_assert!(out.final_loss <= out.initial_loss);
        prop_assert!(out.iterations <= cfg.iters_per_tick);
        prop_assert_eq!(out.final_loss, control_loss(&out.plan.f_limit, x, &params, &cfg));
    }
}
