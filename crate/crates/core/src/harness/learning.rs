//! Online-learning scenarios: identification against a mis-modelled plant,
//! the multi-plant quantitative study, and fault detection.

use serde::Serialize;

use super::clock::Clock;
use super::config::{ArmPolicy, Config};
use super::trace::{to_csv, trace_csv, write_telemetry, TelemetryRecord, TraceRow};
use super::{write_json, ArtifactSink, Report, Scenario};
use crate::anomaly::{AnomalyMonitor, VerdictEvent};
use crate::error::Result;
use crate::estimator::Estimator;
use crate::learner::{Learner, ParamSnapshot};
use crate::model::{ThermalParams, ThermalState, N_PARAMS};
use crate::sim::{param_rmse, perturbed_params, sim_rng, FaultMode, Plant, PlantConfig};

/// Knobs of one learning run that vary between scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningOptions {
    pub duration: f64,
    pub p_sim: [f64; N_PARAMS],
    pub fault: FaultMode,
    /// Seed windows with the plant's true core temperature instead of the
    /// estimate.
    pub true_core_seed: bool,
    pub arm: ArmPolicy,
    /// Offsets the model starts from.
    pub initial_p: [f64; N_PARAMS],
    /// RNG seed of the tension walk.
    pub seed: u64,
    pub record_telemetry: bool,
}

impl LearningOptions {
    pub fn from_config(cfg: &Config) -> Self {
        Self {
            duration: cfg.sim_learn.duration,
            p_sim: cfg.sim_learn.p_sim,
            fault: FaultMode::None,
            true_core_seed: cfg.sim_learn.true_core_seed,
            arm: cfg.anomaly.arm,
            initial_p: [0.0; N_PARAMS],
            seed: cfg.seed,
            record_telemetry: cfg.sim_learn.write_telemetry,
        }
    }
}

/// Parameters after one learner update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub time_s: f64,
    pub p: [f64; N_PARAMS],
    pub mean_loss: f64,
    pub grad_norm: f64,
    pub g: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LearningRun {
    pub trace: Vec<TraceRow>,
    pub updates: Vec<UpdateRecord>,
    pub initial_params: ThermalParams,
    pub final_params: ThermalParams,
    pub true_params: ThermalParams,
    pub learning_onset: Option<f64>,
    pub first_anomaly: Option<f64>,
    pub events: Vec<VerdictEvent>,
    pub telemetry: Vec<TelemetryRecord>,
}

impl LearningRun {
    /// Learned offsets in effect at time `t`.
    pub fn params_at(&self, t: f64) -> [f64; N_PARAMS] {
        self.updates
            .iter()
            .take_while(|u| u.time_s <= t)
            .last()
            .map_or(self.initial_params.learned, |u| u.p)
    }

    /// RMSE to the plant over `P1..P4` at time `t`.
    pub fn rmse4_at(&self, t: f64) -> f64 {
        param_rmse(&self.params_at(t)[..4], &self.true_params.learned[..4])
    }

    /// RMSE to the plant over all five offsets at time `t`.
    pub fn rmse5_at(&self, t: f64) -> f64 {
        param_rmse(&self.params_at(t), &self.true_params.learned)
    }

    pub fn snapshots(&self, motor_id: &str) -> Vec<ParamSnapshot> {
        let mut base = self.initial_params;
        self.updates
            .iter()
            .map(|u| {
                base.learned = u.p;
                ParamSnapshot::new(motor_id, u.time_s, &base)
            })
            .collect()
    }

    /// Per-update parameter error table.
    pub fn error_rows(&self) -> Vec<ParamErrorRow> {
        let truth = self.true_params.learned;
        self.updates
            .iter()
            .map(|u| ParamErrorRow {
                time_s: u.time_s,
                e1: (u.p[0] - truth[0]).abs(),
                e2: (u.p[1] - truth[1]).abs(),
                e3: (u.p[2] - truth[2]).abs(),
                e4: (u.p[3] - truth[3]).abs(),
                e5: (u.p[4] - truth[4]).abs(),
                rmse4: param_rmse(&u.p[..4], &truth[..4]),
                rmse5: param_rmse(&u.p, &truth),
                g: u.g,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamErrorRow {
    pub time_s: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
    pub rmse4: f64,
    pub rmse5: f64,
    pub g: Option<f64>,
}

/// Runs the plant, estimator, learner and anomaly monitor in lockstep.
///
/// Every `dt_data` the tension walk draws a new command, then the window
/// sample `(c1, c2_obs, f_obs)` is taken. The estimator and plant advance on
/// their own periods.
pub fn run_learning(cfg: &Config, opts: &LearningOptions) -> Result<LearningRun> {
    let spec = cfg.motor.spec()?;
    let plant_cfg = PlantConfig {
        spec: spec.clone(),
        p_sim: opts.p_sim,
        ambient: cfg.plant.ambient,
        dt_plant: cfg.plant.dt_plant,
        seed: opts.seed,
    };
    let mut plant = Plant::new(&plant_cfg, ThermalState::uniform(cfg.plant.initial_temp), opts.fault)?;
    let initial_params = ThermalParams::from_spec(&spec, cfg.model_ambient)?.with_learned(opts.initial_p);
    let mut learner = Learner::new(initial_params, cfg.learner)?;
    let mut estimator = Estimator::new(cfg.estimator);
    let mut monitor = AnomalyMonitor::new(
        0,
        cfg.anomaly.d_detect,
        match opts.arm {
            ArmPolicy::Auto(a) => Some(a),
            ArmPolicy::AtStart => None,
        },
    );
    if opts.arm == ArmPolicy::AtStart {
        monitor.arm(&initial_params);
    }

    let clock = Clock::for_periods(&[cfg.plant.dt_plant, cfg.estimator.dt_est, cfg.learner.dt_data])?;
    let plant_every = clock.ticks(cfg.plant.dt_plant)?;
    let est_every = clock.ticks(cfg.estimator.dt_est)?;
    let data_every = clock.ticks(cfg.learner.dt_data)?;
    let total = clock.ticks_in(opts.duration);

    let mut rng = sim_rng(opts.seed);
    let walk = cfg.plant.walk;
    let mut f_cmd = cfg.plant.initial_tension;

    let first = plant.observe(f_cmd);
    estimator.reset(initial_core(cfg, first.c2), 0.0);

    let mut trace = Vec::with_capacity((total / data_every) as usize + 1);
    let mut updates = Vec::new();
    let mut telemetry = Vec::new();
    let mut onset = None;

    for tick in 0..total {
        let t = clock.time(tick);
        let sample = tick % data_every == 0;
        if sample {
            f_cmd = walk.next(&mut rng, f_cmd);
        }
        let obs = plant.observe(f_cmd);
        let c1_est = estimator.c1_est().expect("estimator is seeded");
        if opts.record_telemetry && tick % plant_every == 0 {
            telemetry.push(TelemetryRecord {
                t,
                c2: obs.c2,
                f: obs.f,
            });
        }
        if sample {
            let truth = plant.state();
            let seed_c1 = if opts.true_core_seed { truth.c1 } else { c1_est };
            if let Some(report) = learner.push_sample(t, seed_c1, obs.c2, obs.f)? {
                onset.get_or_insert(t);
                monitor.on_update(t, &report.params, report.mean_loss);
                updates.push(UpdateRecord {
                    time_s: t,
                    p: report.params.learned,
                    mean_loss: report.mean_loss,
                    grad_norm: report.grad_norm,
                    g: monitor.is_armed().then(|| monitor.score()),
                });
            }
            trace.push(TraceRow {
                time_s: t,
                f_cmd: Some(f_cmd),
                f_true: Some(plant.true_tension(f_cmd)),
                f_obs: Some(obs.f),
                c1_true: Some(truth.c1),
                c2_true: Some(truth.c2),
                c2_obs: Some(obs.c2),
                c1_est: Some(c1_est),
                g: monitor.is_armed().then(|| monitor.score()),
                verdict: monitor.is_armed().then(|| monitor.verdict()),
                ..Default::default()
            });
        }
        if tick % est_every == 0 {
            estimator.tick(obs.c2, obs.f, learner.params())?;
        }
        if tick % plant_every == 0 {
            plant.step(f_cmd);
        }
    }

    Ok(LearningRun {
        trace,
        updates,
        initial_params,
        final_params: *learner.params(),
        true_params: *plant.params(),
        learning_onset: onset,
        first_anomaly: monitor.first_anomaly(),
        events: monitor.events().to_vec(),
        telemetry,
    })
}

pub(crate) fn initial_core(cfg: &Config, first_c2: f64) -> f64 {
    match cfg.estimator.initial_c1 {
        crate::estimator::InitialCorePolicy::FirstHousingReading => first_c2,
        crate::estimator::InitialCorePolicy::FixedAmbient(t) => t,
    }
}

fn write_learning_artifacts(sink: &mut dyn ArtifactSink, cfg: &Config, run: &LearningRun, suffix: &str) -> Result<()> {
    sink.write(&format!("trace{suffix}.csv"), &trace_csv(&run.trace)?)?;
    sink.write(&format!("param_error{suffix}.csv"), &to_csv(&run.error_rows())?)?;
    write_json(sink, &format!("params{suffix}.json"), &run.snapshots(&cfg.motor_id))?;
    let end = run.trace.last().map_or(0.0, |r| r.time_s);
    write_json(
        sink,
        &format!("final_params{suffix}.json"),
        &ParamSnapshot::new(&cfg.motor_id, end, &run.final_params),
    )?;
    if !run.events.is_empty() {
        sink.write(&format!("events{suffix}.csv"), &to_csv(&run.events)?)?;
    }
    Ok(())
}

pub struct SimLearn;

impl Scenario for SimLearn {
    fn name(&self) -> &'static str {
        "sim-learn"
    }

    fn description(&self) -> &'static str {
        "learn the thermal offsets of a mis-modelled plant under a random tension walk"
    }

    fn set_duration(&self, cfg: &mut Config, duration: f64) {
        cfg.sim_learn.duration = duration;
    }

    fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
        let opts = LearningOptions::from_config(cfg);
        let run = run_learning(cfg, &opts)?;
        write_learning_artifacts(sink, cfg, &run, "")?;
        if opts.record_telemetry {
            let mut buf = Vec::new();
            write_telemetry(&mut buf, &run.telemetry)?;
            sink.write("telemetry.csv", &buf)?;
        }

        let mut report = Report::new(self.name(), cfg.seed);
        let checkpoints: Vec<_> = checkpoint_times(opts.duration, 200.0)
            .into_iter()
            .map(|t| (t, run.rmse5_at(t), run.rmse4_at(t)))
            .collect();
        report.insert("initial_rmse", run.rmse5_at(0.0))?;
        report.insert("final_rmse", run.rmse5_at(opts.duration))?;
        report.insert("final_rmse_p1_p4", run.rmse4_at(opts.duration))?;
        report.insert("final_p", run.final_params.learned)?;
        report.insert("p_sim", run.true_params.learned)?;
        report.insert("updates", run.updates.len())?;
        report.insert("learning_onset_s", run.learning_onset)?;
        report.insert("rmse_series [t, rmse5, rmse4]", checkpoints)?;
        Ok(report)
    }
}

pub(crate) fn checkpoint_times(duration: f64, every: f64) -> Vec<f64> {
    let n = (duration / every + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * every).collect()
}

/// Mean and standard deviation of parameter RMSE across plants at each
/// checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantRow {
    pub minute: f64,
    pub mean_estimated: f64,
    pub std_estimated: f64,
    pub mean_true_core: f64,
    pub std_true_core: f64,
}

#[derive(Debug, Clone)]
pub struct QuantStudy {
    pub p_sims: Vec<[f64; N_PARAMS]>,
    pub rows: Vec<QuantRow>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Learns `plants` randomly perturbed plants twice, once seeding windows
/// with the estimated core temperature and once with the true one.
pub fn run_quant_study(cfg: &Config) -> Result<QuantStudy> {
    let q = &cfg.sim_quant;
    let mut rng = sim_rng(cfg.seed);
    let p_sims = (0..q.plants)
        .map(|_| perturbed_params(&mut rng, q.target_rmse))
        .collect::<Result<Vec<_>>>()?;
    let times = checkpoint_times(q.duration, q.checkpoint_interval);

    let mut estimated = vec![Vec::new(); times.len()];
    let mut true_core = vec![Vec::new(); times.len()];
    for (i, p_sim) in p_sims.iter().enumerate() {
        for (seeded_true, bucket) in [(false, &mut estimated), (true, &mut true_core)] {
            let opts = LearningOptions {
                duration: q.duration,
                p_sim: *p_sim,
                fault: FaultMode::None,
                true_core_seed: seeded_true,
                arm: cfg.anomaly.arm,
                initial_p: [0.0; N_PARAMS],
                seed: cfg.seed.wrapping_add(1 + i as u64),
                record_telemetry: false,
            };
            let run = run_learning(cfg, &opts)?;
            for (slot, &t) in bucket.iter_mut().zip(&times) {
                slot.push(run.rmse5_at(t));
            }
        }
    }
    let rows = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (mean_estimated, std_estimated) = mean_std(&estimated[i]);
            let (mean_true_core, std_true_core) = mean_std(&true_core[i]);
            QuantRow {
                minute: t / 60.0,
                mean_estimated,
                std_estimated,
                mean_true_core,
                std_true_core,
            }
        })
        .collect();
    Ok(QuantStudy { p_sims, rows })
}

pub struct SimQuant;

impl Scenario for SimQuant {
    fn name(&self) -> &'static str {
        "sim-quant"
    }

    fn description(&self) -> &'static str {
        "parameter error across randomly perturbed plants, estimated vs true core seeding"
    }

    fn set_duration(&self, cfg: &mut Config, duration: f64) {
        cfg.sim_quant.duration = duration;
    }

    fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
        let study = run_quant_study(cfg)?;
        sink.write("quant.csv", &to_csv(&study.rows)?)?;
        write_json(sink, "p_sim.json", &study.p_sims)?;
        let mut report = Report::new(self.name(), cfg.seed);
        report.insert("plants", study.p_sims.len())?;
        report.insert(
            "checkpoints [minute, mean_est, mean_true]",
            study
                .rows
                .iter()
                .map(|r| (r.minute, r.mean_estimated, r.mean_true_core))
                .collect::<Vec<_>>(),
        )?;
        Ok(report)
    }
}

fn fault_label(fault: &FaultMode) -> String {
    match fault {
        FaultMode::None => "none".into(),
        FaultMode::StuckSensor { .. } => "stuck_sensor".into(),
        FaultMode::StuckTension { .. } => "stuck_tension".into(),
    }
}

/// Outcome of one fault-injection run.
#[derive(Debug, Clone, Serialize)]
pub struct FaultOutcome {
    pub fault: FaultMode,
    pub learning_onset_s: Option<f64>,
    pub first_anomaly_s: Option<f64>,
    /// Detection delay after the first learner update.
    pub detection_after_onset_s: Option<f64>,
    pub final_g: Option<f64>,
    pub final_deltas: [f64; 4],
}

/// Learns against a healthy-parameter plant with `fault` injected; the
/// detector is armed on the initial model.
pub fn run_fault(cfg: &Config, fault: FaultMode) -> Result<(LearningRun, FaultOutcome)> {
    let opts = LearningOptions {
        duration: cfg.sim_fault.duration,
        p_sim: cfg.sim_fault.p_sim,
        fault,
        true_core_seed: false,
        arm: ArmPolicy::AtStart,
        initial_p: [0.0; N_PARAMS],
        seed: cfg.seed,
        record_telemetry: false,
    };
    let run = run_learning(cfg, &opts)?;
    let p = run.final_params.learned;
    let r = run.initial_params.learned;
    let outcome = FaultOutcome {
        fault,
        learning_onset_s: run.learning_onset,
        first_anomaly_s: run.first_anomaly,
        detection_after_onset_s: run.first_anomaly.zip(run.learning_onset).map(|(d, o)| d - o),
        final_g: run.updates.last().and_then(|u| u.g),
        final_deltas: std::array::from_fn(|i| p[i] - r[i]),
    };
    Ok((run, outcome))
}

pub struct SimFault;

impl Scenario for SimFault {
    fn name(&self) -> &'static str {
        "sim-fault"
    }

    fn description(&self) -> &'static str {
        "inject sensor/tension faults and report when parameter drift flags an anomaly"
    }

    fn set_duration(&self, cfg: &mut Config, duration: f64) {
        cfg.sim_fault.duration = duration;
    }

    fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
        let mut report = Report::new(self.name(), cfg.seed);
        let mut outcomes = Vec::new();
        for fault in &cfg.sim_fault.faults {
            let (run, outcome) = run_fault(cfg, *fault)?;
            write_learning_artifacts(sink, cfg, &run, &format!("_{}", fault_label(fault)))?;
            outcomes.push(outcome);
        }
        report.insert("faults", &outcomes)?;
        Ok(report)
    }
}
