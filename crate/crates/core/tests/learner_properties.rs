use actherm::learner::{
    apply_gradient, clip_norm, learner_update, window_loss, window_loss_and_gradient, BatchBuffer, LearnerConfig,
    SampleWindow,
};
use actherm::model::{MotorSpec, ThermalParams, ThermalState};
use proptest::prelude::*;

fn ec4(p: [f64; 5]) -> ThermalParams {
    ThermalParams::from_spec(&MotorSpec::ec4pole_22_90w(), 30.0)
        .unwrap()
        .with_learned(p)
}

/// Window sampled from a plant with offsets `truth`, plus measurement noise.
fn window_from(truth: [f64; 5], c1: f64, c2: f64, tensions: &[f64], noise: &[f64]) -> SampleWindow {
    let k = ec4(truth).coefficients();
    let mut x = ThermalState::new(c1, c2);
    let (mut w1, mut w2) = (Vec::new(), Vec::new());
    for (f, n) in tensions.iter().zip(noise) {
        w1.push(x.c1);
        w2.push(x.c2 + n);
        x = k.step(x, *f, 1.0);
    }
    SampleWindow::new(w1, w2, tensions.to_vec(), 0.0).unwrap()
}

fn window_strategy() -> impl Strategy<Value = SampleWindow> {
    (
        prop::array::uniform5(-0.6..0.6f64),
        30.0..90.0f64,
        30.0..70.0f64,
        prop::collection::vec(10.0..200.0f64, 30),
        prop::collection::vec(-0.3..0.3f64, 30),
    )
        .prop_map(|(truth, c1, c2, f, noise)| window_from(truth, c1, c2, &f, &noise))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences(window in window_strategy(), p in prop::array::uniform5(-0.6..0.6f64)) {
        let (_, grad) = window_loss_and_gradient(&window, &ec4(p), 1.0);
        for i in 0..5 {
            let h = 1e-6;
            let (mut hi, mut lo) = (p, p);
            hi[i] += h;
            lo[i] -= h;
            let fd = (window_loss(&window, &ec4(hi), 1.0) - window_loss(&window, &ec4(lo), 1.0)) / (2.0 * h);
            let err = (grad[i] - fd).abs();
            prop_assert!(err <= (1e-4 * grad[i].abs().max(fd.abs())).max(1e-10), "P{}: {} vs {}", i + 1, grad[i], fd);
        }
    }

    #[test]
    fn only_the_first_core_sample_matters(window in window_strategy(), shift in -20.0..20.0f64) {
        let params = ec4([0.1, -0.2, 0.3, 0.0, 0.05]);
        let mut moved = window.clone();
        for c in &mut moved.c1[1..] {
            *c += shift;
        }
        prop_assert_eq!(window_loss_and_gradient(&window, &params, 1.0), window_loss_and_gradient(&moved, &params, 1.0));
    }

    #[test]
    fn clipping_bounds_the_step(g in prop::array::uniform5(-1e4..1e4f64), p in prop::array::uniform5(-1.0..1.0f64)) {
        let cfg = LearnerConfig::default();
        let mut clipped = g;
        let norm = clip_norm(&mut clipped, cfg.d_clip);
        let after = clipped.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(after <= cfg.d_clip * (1.0 + 1e-12));
        if norm <= cfg.d_clip {
            prop_assert_eq!(clipped, g);
        }
        let (next, _) = apply_gradient(&ec4(p), g, &cfg);
        let step = next.learned.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(step <= cfg.alpha * cfg.d_clip * (1.0 + 1e-9));
    }
}

#[test]
fn batch_update_moves_towards_the_plant() {
    let truth = [0.5, 0.5, -0.5, -0.5, 0.5];
    let cfg = LearnerConfig::default();
    let mut buffer = BatchBuffer::new(cfg.n_batch);
    let zeros = vec![0.0; 30];
    for b in 0..cfg.n_batch {
        let f: Vec<f64> = (0..30).map(|i| 60.0 + ((i * 7 + b * 13) % 140) as f64).collect();
        buffer.push(window_from(truth, 40.0 + b as f64, 35.0, &f, &zeros));
    }
    let start = ec4([0.0; 5]);
    let before: f64 = buffer.windows().map(|w| window_loss(w, &start, 1.0)).sum();
    let report = learner_update(&mut buffer, &start, &cfg).unwrap();
    let after: f64 = {
        let mut probe = BatchBuffer::new(cfg.n_batch);
        for b in 0..cfg.n_batch {
            let f: Vec<f64> = (0..30).map(|i| 60.0 + ((i * 7 + b * 13) % 140) as f64).collect();
            probe.push(window_from(truth, 40.0 + b as f64, 35.0, &f, &zeros));
        }
        probe.windows().map(|w| window_loss(w, &report.params, 1.0)).sum()
    };
    assert!(after < before, "{after} !< {before}");
    assert_eq!(buffer.len(), cfg.n_batch - 1);
}
