//! Full loop on a length-controlled muscle: the planner publishes a tension
//! ceiling once per second and the limiter enforces it every tick.

use serde::Serialize;

use super::clock::Clock;
use super::config::{ArmPolicy, Config};
use super::learning::initial_core;
use super::trace::{to_csv, trace_csv, TraceRow};
use super::{write_json, ArtifactSink, Report, Scenario};
use crate::anomaly::AnomalyMonitor;
use crate::controller::Controller;
use crate::error::Result;
use crate::estimator::Estimator;
use crate::learner::{Learner, ParamSnapshot};
use crate::limiter::{apply_offset, limiter_tick, LimiterConfig, LimiterState};
use crate::model::{ThermalParams, ThermalState};
use crate::sim::{elastic_tension, ElasticMuscle, FaultMode, Plant, PlantConfig};

#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub trace: Vec<TraceRow>,
    pub max_c1: f64,
    /// Largest core temperature after the first time it reached `c1_max`.
    pub max_c1_after_reach: Option<f64>,
    pub min_dl: f64,
    pub final_params: ThermalParams,
}

pub fn run_closed_loop(cfg: &Config) -> Result<ClosedLoopRun> {
    let cl = &cfg.closed_loop;
    let motor = cfg.motor.spec()?;
    let plant_cfg = PlantConfig {
        spec: motor.clone(),
        p_sim: cl.p_sim,
        ambient: cfg.plant.ambient,
        dt_plant: cfg.plant.dt_plant,
        seed: cfg.seed,
    };
    let mut plant = Plant::new(
        &plant_cfg,
        ThermalState::uniform(cfg.plant.initial_temp),
        FaultMode::None,
    )?;
    let initial = ThermalParams::from_spec(&motor, cfg.model_ambient)?;
    let mut learner = Learner::new(initial, cfg.learner)?;
    let mut estimator = Estimator::new(cfg.estimator);
    let mut controller = Controller::new(cfg.controller)?;
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
    let mut limiter = LimiterState::default();

    let clock = Clock::for_periods(&[
        cfg.plant.dt_plant,
        cfg.estimator.dt_est,
        cfg.learner.dt_data,
        cfg.controller.dt_control,
        cfg.limiter.period,
        cl.trace_interval,
    ])?;
    let plant_every = clock.ticks(cfg.plant.dt_plant)?;
    let est_every = clock.ticks(cfg.estimator.dt_est)?;
    let data_every = clock.ticks(cfg.learner.dt_data)?;
    let control_every = clock.ticks(cfg.controller.dt_control)?;
    let limiter_every = clock.ticks(cfg.limiter.period)?;
    let trace_every = clock.ticks(cl.trace_interval)?;
    let total = clock.ticks_in(cl.duration);

    let tension = |dl: LimiterState| elastic_tension(&cl.muscle, apply_offset(cl.l_ref, dl));
    let first = plant.observe(tension(limiter));
    estimator.reset(initial_core(cfg, first.c2), 0.0);

    let mut trace = Vec::new();
    let mut max_c1 = plant.state().c1;
    let mut max_after: Option<f64> = None;
    let mut min_dl = limiter.dl;

    for tick in 0..total {
        let t = clock.time(tick);
        let f = tension(limiter);
        let obs = plant.observe(f);
        let c1_est = estimator.c1_est().expect("estimator is seeded");
        if tick % data_every == 0 {
            if let Some(report) = learner.push_sample(t, c1_est, obs.c2, obs.f)? {
                monitor.on_update(t, &report.params, report.mean_loss);
            }
        }
        if tick % control_every == 0 {
            controller.tick(ThermalState::new(c1_est, obs.c2), learner.params(), t)?;
        }
        if tick % trace_every == 0 {
            let truth = plant.state();
            trace.push(TraceRow {
                time_s: t,
                f_cmd: Some(apply_offset(cl.l_ref, limiter)),
                f_true: Some(f),
                f_obs: Some(obs.f),
                c1_true: Some(truth.c1),
                c2_true: Some(truth.c2),
                c2_obs: Some(obs.c2),
                c1_est: Some(c1_est),
                f_limit: Some(controller.head()),
                dl: Some(limiter.dl),
                g: monitor.is_armed().then(|| monitor.score()),
                verdict: monitor.is_armed().then(|| monitor.verdict()),
            });
        }
        if tick % limiter_every == 0 {
            limiter = limiter_tick(limiter, obs.f, controller.head(), &cfg.limiter);
            min_dl = min_dl.min(limiter.dl);
        }
        if tick % est_every == 0 {
            estimator.tick(obs.c2, obs.f, learner.params())?;
        }
        if tick % plant_every == 0 {
            let (state, _) = plant.step(f);
            max_c1 = max_c1.max(state.c1);
            if let Some(m) = max_after.as_mut() {
                *m = m.max(state.c1);
            } else if state.c1 >= cfg.controller.c1_max {
                max_after = Some(state.c1);
            }
        }
    }

    Ok(ClosedLoopRun {
        trace,
        max_c1,
        max_c1_after_reach: max_after,
        min_dl,
        final_params: *learner.params(),
    })
}

/// One limiter tick against an elastic muscle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimiterSample {
    pub time_s: f64,
    pub f_limit: f64,
    pub f_meas: f64,
    pub dl: f64,
}

/// Ceiling that falls linearly from `start` to `end` over `ramp_time`
/// seconds, then holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitRamp {
    pub start: f64,
    pub end: f64,
    pub ramp_time: f64,
}

impl LimitRamp {
    pub fn at(&self, t: f64) -> f64 {
        if t >= self.ramp_time {
            self.end
        } else {
            self.start + (self.end - self.start) * t / self.ramp_time
        }
    }
}

/// Drives the limiter alone against `muscle` for `duration` seconds.
pub fn limiter_ramp(
    cfg: &LimiterConfig,
    muscle: &ElasticMuscle,
    l_ref: f64,
    ramp: &LimitRamp,
    duration: f64,
) -> Vec<LimiterSample> {
    let n = (duration / cfg.period + 1e-9).floor() as usize;
    let mut state = LimiterState::default();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * cfg.period;
        let f_meas = elastic_tension(muscle, apply_offset(l_ref, state));
        let f_limit = ramp.at(t);
        out.push(LimiterSample {
            time_s: t,
            f_limit,
            f_meas,
            dl: state.dl,
        });
        state = limiter_tick(state, f_meas, f_limit, cfg);
    }
    out
}

pub struct ClosedLoop;

impl Scenario for ClosedLoop {
    fn name(&self) -> &'static str {
        "closed-loop"
    }

    fn description(&self) -> &'static str {
        "learner, planner and tension limiter on an elastic muscle"
    }

    fn set_duration(&self, cfg: &mut Config, duration: f64) {
        cfg.closed_loop.duration = duration;
    }

    fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
        let run = run_closed_loop(cfg)?;
        sink.write("closed_loop.csv", &trace_csv(&run.trace)?)?;
        let ramp = LimitRamp {
            start: 200.0,
            end: 150.0,
            ramp_time: 20.0,
        };
        let samples = limiter_ramp(
            &cfg.limiter,
            &cfg.closed_loop.muscle,
            cfg.closed_loop.l_ref,
            &ramp,
            60.0,
        );
        sink.write("limiter_ramp.csv", &to_csv(&samples)?)?;
        let end = run.trace.last().map_or(0.0, |r| r.time_s);
        write_json(
            sink,
            "final_params.json",
            &ParamSnapshot::new(&cfg.motor_id, end, &run.final_params),
        )?;

        let mut report = Report::new(self.name(), cfg.seed);
        report.insert("max_c1", run.max_c1)?;
        report.insert("max_c1_after_reach", run.max_c1_after_reach)?;
        report.insert("min_dl", run.min_dl)?;
        report.insert("final_p", run.final_params.learned)?;
        report.insert("ramp_final_tension", samples.last().map(|s| s.f_meas))?;
        Ok(report)
    }
}
