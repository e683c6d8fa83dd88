//! Thermal control: the planner's ceiling is applied directly as the plant
//! tension, so the core temperature tracks `c1_max`.

use serde::Serialize;

use super::clock::Clock;
use super::config::Config;
use super::learning::{initial_core, run_learning, LearningOptions};
use super::trace::{trace_csv, TraceRow};
use super::{write_json, ArtifactSink, Report, Scenario};
use crate::controller::{Controller, TensionPlan};
use crate::error::Result;
use crate::estimator::Estimator;
use crate::model::{ThermalParams, ThermalState, N_PARAMS};
use crate::sim::{FaultMode, Plant, PlantConfig};

/// Core temperature that counts as having reached the ceiling (°C).
pub const REACH_THRESHOLD: f64 = 78.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlRunSpec {
    /// Offsets of the model used by estimator and planner.
    pub model_p: [f64; N_PARAMS],
    /// Offsets of the simulated plant.
    pub plant_p: [f64; N_PARAMS],
    /// Initial core and housing temperature (°C).
    pub initial_temp: f64,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct ControlRun {
    pub trace: Vec<TraceRow>,
    pub plans: Vec<TensionPlan>,
    pub max_c1: f64,
    /// First control time at which the true core reached [`REACH_THRESHOLD`].
    pub time_to_reach: Option<f64>,
    /// Mean applied tension over the final 10% of the run (N).
    pub tail_tension: f64,
    pub final_state: ThermalState,
}

/// Runs planner, estimator and plant together for `spec.duration` seconds.
pub fn run_thermal_control(cfg: &Config, spec: &ControlRunSpec) -> Result<ControlRun> {
    let motor = cfg.motor.spec()?;
    let plant_cfg = PlantConfig {
        spec: motor.clone(),
        p_sim: spec.plant_p,
        ambient: cfg.plant.ambient,
        dt_plant: cfg.plant.dt_plant,
        seed: cfg.seed,
    };
    let mut plant = Plant::new(&plant_cfg, ThermalState::uniform(spec.initial_temp), FaultMode::None)?;
    let model = ThermalParams::from_spec(&motor, cfg.model_ambient)?.with_learned(spec.model_p);
    let mut controller = Controller::new(cfg.controller)?;
    let mut estimator = Estimator::new(cfg.estimator);

    let dt_control = cfg.controller.dt_control;
    let clock = Clock::for_periods(&[cfg.plant.dt_plant, cfg.estimator.dt_est, dt_control])?;
    let plant_every = clock.ticks(cfg.plant.dt_plant)?;
    let est_every = clock.ticks(cfg.estimator.dt_est)?;
    let control_every = clock.ticks(dt_control)?;
    let total = clock.ticks_in(spec.duration);

    let first = plant.observe(controller.head());
    estimator.reset(initial_core(cfg, first.c2), 0.0);

    let mut trace = Vec::new();
    let mut plans = Vec::new();
    let mut max_c1 = plant.state().c1;
    let mut time_to_reach = None;
    let tail_start = spec.duration * 0.9;
    let (mut tail_sum, mut tail_n) = (0.0, 0usize);

    for tick in 0..total {
        let t = clock.time(tick);
        let obs = plant.observe(controller.head());
        let c1_est = estimator.c1_est().expect("estimator is seeded");
        if tick % control_every == 0 {
            let outcome = controller.tick(ThermalState::new(c1_est, obs.c2), &model, t)?;
            plans.push(outcome.plan);
            let truth = plant.state();
            if time_to_reach.is_none() && truth.c1 >= REACH_THRESHOLD {
                time_to_reach = Some(t);
            }
            let f = controller.head();
            if t >= tail_start {
                tail_sum += f;
                tail_n += 1;
            }
            trace.push(TraceRow {
                time_s: t,
                f_cmd: Some(f),
                f_true: Some(f),
                f_obs: Some(obs.f),
                c1_true: Some(truth.c1),
                c2_true: Some(truth.c2),
                c2_obs: Some(obs.c2),
                c1_est: Some(c1_est),
                f_limit: Some(f),
                ..Default::default()
            });
        }
        let f = controller.head();
        let obs = plant.observe(f);
        if tick % est_every == 0 {
            estimator.tick(obs.c2, obs.f, &model)?;
        }
        if tick % plant_every == 0 {
            let (state, _) = plant.step(f);
            max_c1 = max_c1.max(state.c1);
        }
    }

    Ok(ControlRun {
        trace,
        plans,
        max_c1,
        time_to_reach,
        tail_tension: if tail_n > 0 { tail_sum / tail_n as f64 } else { f64::NAN },
        final_state: plant.state(),
    })
}

/// Learns the offsets of `sim_control.p_sim` for `learn_duration` seconds,
/// unless `sim_control.model_p` supplies them.
pub fn learned_model(cfg: &Config) -> Result<[f64; N_PARAMS]> {
    if let Some(p) = cfg.sim_control.model_p {
        return Ok(p);
    }
    let mut opts = LearningOptions::from_config(cfg);
    opts.duration = cfg.sim_control.learn_duration;
    opts.p_sim = cfg.sim_control.p_sim;
    opts.true_core_seed = false;
    opts.record_telemetry = false;
    Ok(run_learning(cfg, &opts)?.final_params.learned)
}

#[derive(Debug, Clone, Serialize)]
struct ControlSummary {
    model: &'static str,
    initial_temp: f64,
    max_c1: f64,
    time_to_reach_s: Option<f64>,
    tail_tension: f64,
}

pub struct SimControl;

impl Scenario for SimControl {
    fn name(&self) -> &'static str {
        "sim-control"
    }

    fn description(&self) -> &'static str {
        "hold the core at its ceiling with learned and unlearned models"
    }

    fn set_duration(&self, cfg: &mut Config, duration: f64) {
        cfg.sim_control.duration = duration;
    }

    fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
        let learned = learned_model(cfg)?;
        let sc = &cfg.sim_control;
        let mut summaries = Vec::new();
        for &initial_temp in &sc.initial_temps {
            for (label, model_p) in [("learned", learned), ("nominal", [0.0; N_PARAMS])] {
                let run = run_thermal_control(
                    cfg,
                    &ControlRunSpec {
                        model_p,
                        plant_p: sc.p_sim,
                        initial_temp,
                        duration: sc.duration,
                    },
                )?;
                let stem = format!("control_{label}_{initial_temp}");
                sink.write(&format!("{stem}.csv"), &trace_csv(&run.trace)?)?;
                sink.write(&format!("{stem}_plans.csv"), &plans_csv(&run.plans)?)?;
                summaries.push(ControlSummary {
                    model: label,
                    initial_temp,
                    max_c1: run.max_c1,
                    time_to_reach_s: run.time_to_reach,
                    tail_tension: run.tail_tension,
                });
            }
        }
        write_json(sink, "model_p.json", &learned)?;
        let mut report = Report::new(self.name(), cfg.seed);
        report.insert("c1_max", cfg.controller.c1_max)?;
        report.insert("model_p", learned)?;
        report.insert("runs", &summaries)?;
        Ok(report)
    }
}

/// One line per plan: creation time then the ceiling sequence.
fn plans_csv(plans: &[TensionPlan]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if let Some(first) = plans.first() {
        let mut header = vec!["created_at".to_string()];
        header.extend((0..first.f_limit.len()).map(|k| format!("f{k}")));
        w.write_record(&header)?;
    }
    for p in plans {
        let mut rec = vec![p.created_at.to_string()];
        rec.extend(p.f_limit.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sustainable_tension;

    #[test]
    fn matched_model_settles_at_sustainable_tension() {
        let cfg = Config::default();
        let run = run_thermal_control(
            &cfg,
            &ControlRunSpec {
                model_p: [0.0; 5],
                plant_p: [0.0; 5],
                initial_temp: 30.0,
                duration: 1500.0,
            },
        )
        .unwrap();
        let params = ThermalParams::from_spec(&cfg.motor.spec().unwrap(), 30.0).unwrap();
        let f_star = sustainable_tension(80.0, &params);
        assert!(
            (run.tail_tension - f_star).abs() < 10.0,
            "{} vs {f_star}",
            run.tail_tension
        );
        assert!(run.max_c1 < 81.0);
        assert_eq!(run.plans.len(), 1500);
        assert_eq!(run.plans[0].f_limit.len(), 30);
    }

    #[test]
    fn plans_csv_has_header() {
        let text = String::from_utf8(plans_csv(&[TensionPlan::constant(5.0, 3, 1.0)]).unwrap()).unwrap();
        assert_eq!(text, "created_at,f0,f1,f2\n1,5,5,5\n");
    }
}
