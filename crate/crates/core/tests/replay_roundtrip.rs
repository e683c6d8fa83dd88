use actherm::harness::learning::{run_learning, LearningOptions};
use actherm::harness::replay::run_replay;
use actherm::harness::trace::{read_telemetry, write_telemetry};
use actherm::harness::Config;
use std::path::Path;

fn recorded(duration: f64) -> (Config, actherm::harness::learning::LearningRun) {
    let mut cfg = Config {
        seed: 3,
        ..Default::default()
    };
    cfg.sim_learn.duration = duration;
    cfg.sim_learn.write_telemetry = true;
    let run = run_learning(&cfg, &LearningOptions::from_config(&cfg)).unwrap();
    (cfg, run)
}

#[test]
fn replaying_simulated_telemetry_reproduces_learning() {
    let (cfg, sim) = recorded(1200.0);
    assert_eq!(sim.telemetry.len(), 60_000);
    let mut csv = Vec::new();
    write_telemetry(&mut csv, &sim.telemetry).unwrap();
    let records = read_telemetry(csv.as_slice(), Path::new("sim.csv")).unwrap();

    let replay = run_replay(&cfg, &records, [0.0; 5]).unwrap();
    assert_eq!(replay.updates.len(), sim.updates.len());
    assert!(!sim.updates.is_empty());
    for (a, b) in sim.final_params.learned.iter().zip(&replay.final_params.learned) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
    for (s, r) in sim.trace.iter().zip(&replay.trace) {
        assert_eq!(s.time_s, r.time_s);
        assert!((s.c1_est.unwrap() - r.c1_est.unwrap()).abs() <= 1e-9);
    }
}

#[test]
fn downsampled_telemetry_still_tracks() {
    let (cfg, sim) = recorded(900.0);
    // keep one record per second: the estimator sub-steps across each gap
    let sparse: Vec<_> = sim.telemetry.iter().step_by(50).copied().collect();
    let replay = run_replay(&cfg, &sparse, [0.0; 5]).unwrap();
    assert_eq!(replay.trace.len(), sim.trace.len());
    let worst = sim
        .trace
        .iter()
        .zip(&replay.trace)
        .map(|(s, r)| (s.c1_est.unwrap() - r.c1_est.unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 5.0, "worst c1 gap {worst}");
}
