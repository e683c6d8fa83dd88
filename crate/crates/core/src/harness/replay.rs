//! Offline replay of recorded `t,c2,f` telemetry through the estimator,
//! learner and anomaly monitor.

use super::config::{ArmPolicy, Config};
use super::learning::UpdateRecord;
use super::trace::{read_telemetry_file, to_csv, trace_csv, TelemetryRecord, TraceRow};
use super::{write_json, ArtifactSink, Report, Scenario};
use crate::anomaly::{AnomalyMonitor, VerdictEvent};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::learner::{Learner, ParamSnapshot};
use crate::model::{ThermalParams, N_PARAMS};

#[derive(Debug, Clone)]
pub struct ReplayRun {
    pub trace: Vec<TraceRow>,
    pub updates: Vec<UpdateRecord>,
    pub final_params: ThermalParams,
    pub first_anomaly: Option<f64>,
    pub events: Vec<VerdictEvent>,
}

fn on_grid(t: f64, period: f64) -> bool {
    let k = (t / period).round();
    (t - k * period).abs() <= 1e-9 * t.abs().max(1.0)
}

/// Feeds `records` in order. Learner samples are taken at records whose
/// timestamps fall on the `dt_data` grid.
pub fn run_replay(cfg: &Config, records: &[TelemetryRecord], initial_p: [f64; N_PARAMS]) -> Result<ReplayRun> {
    let motor = cfg.motor.spec()?;
    let initial = ThermalParams::from_spec(&motor, cfg.model_ambient)?.with_learned(initial_p);
    let mut learner = Learner::new(initial, cfg.learner)?;
    let mut estimator = Estimator::new(cfg.estimator);
    let mut monitor = AnomalyMonitor::new(
        0,
        cfg.anomaly.d_detect,
        match cfg.anomaly.arm {
            ArmPolicy::Auto(a) => Some(a),
            ArmPolicy::AtStart => None,
        },
    );
    if cfg.anomaly.arm == ArmPolicy::AtStart {
        monitor.arm(&initial);
    }

    let mut trace = Vec::new();
    let mut updates = Vec::new();
    for r in records {
        let c1_est = estimator.observe(r.t, r.c2, r.f, learner.params())?;
        if !on_grid(r.t, cfg.learner.dt_data) {
            continue;
        }
        if let Some(report) = learner.push_sample(r.t, c1_est, r.c2, r.f)? {
            monitor.on_update(r.t, &report.params, report.mean_loss);
            updates.push(UpdateRecord {
                time_s: r.t,
                p: report.params.learned,
                mean_loss: report.mean_loss,
                grad_norm: report.grad_norm,
                g: monitor.is_armed().then(|| monitor.score()),
            });
        }
        trace.push(TraceRow {
            time_s: r.t,
            f_obs: Some(r.f),
            c2_obs: Some(r.c2),
            c1_est: Some(c1_est),
            g: monitor.is_armed().then(|| monitor.score()),
            verdict: monitor.is_armed().then(|| monitor.verdict()),
            ..Default::default()
        });
    }
    Ok(ReplayRun {
        trace,
        updates,
        final_params: *learner.params(),
        first_anomaly: monitor.first_anomaly(),
        events: monitor.events().to_vec(),
    })
}

pub struct Replay;

impl Scenario for Replay {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn description(&self) -> &'static str {
        "run recorded telemetry through the estimator, learner and anomaly detector"
    }

    fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
        let path = cfg
            .replay
            .input
            .as_deref()
            .ok_or_else(|| Error::Config("replay needs a telemetry input file".into()))?;
        let records = read_telemetry_file(path)?;
        let run = run_replay(cfg, &records, cfg.replay.initial_p.unwrap_or([0.0; N_PARAMS]))?;
        sink.write("replay.csv", &trace_csv(&run.trace)?)?;
        sink.write(
            "updates.csv",
            &to_csv(&run.updates.iter().map(UpdateRow::from).collect::<Vec<_>>())?,
        )?;
        let end = records.last().map_or(0.0, |r| r.t);
        write_json(
            sink,
            "final_params.json",
            &ParamSnapshot::new(&cfg.motor_id, end, &run.final_params),
        )?;

        let mut report = Report::new(self.name(), cfg.seed);
        report.insert("input", path.display().to_string())?;
        report.insert("records", records.len())?;
        report.insert("updates", run.updates.len())?;
        report.insert("final_p", run.final_params.learned)?;
        report.insert("first_anomaly_s", run.first_anomaly)?;
        Ok(report)
    }
}

#[derive(serde::Serialize)]
struct UpdateRow {
    time_s: f64,
    p1: f64,
    p2: f64,
    p3: f64,
    p4: f64,
    p5: f64,
    mean_loss: f64,
    grad_norm: f64,
    g: Option<f64>,
}

impl From<&UpdateRecord> for UpdateRow {
    fn from(u: &UpdateRecord) -> Self {
        Self {
            time_s: u.time_s,
            p1: u.p[0],
            p2: u.p[1],
            p3: u.p[2],
            p4: u.p[3],
            p5: u.p[4],
            mean_loss: u.mean_loss,
            grad_norm: u.grad_norm,
            g: u.g,
        }
    }
}
