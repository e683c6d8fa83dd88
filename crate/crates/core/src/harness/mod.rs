//! Scenario orchestration.
//!
//! Each scenario implements [`Scenario`] and is registered by name in a
//! [`ScenarioRegistry`]; the CLI looks scenarios up by their subcommand name.
//! Scenarios write their artifacts through an [`ArtifactSink`] so the same
//! run can target a directory or memory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub mod clock;
pub mod closed_loop;
pub mod config;
pub mod control;
pub mod learning;
pub mod replay;
pub mod trace;

pub use config::{Config, MotorSelector};

/// Destination for named output files.
pub trait ArtifactSink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()>;
}

/// Writes `value` as pretty-printed JSON.
pub fn write_json<T: Serialize + ?Sized>(sink: &mut dyn ArtifactSink, name: &str, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    sink.write(name, &bytes)
}

/// Writes artifacts as files under a directory, creating it on first use.
#[derive(Debug)]
pub struct DirSink {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl DirSink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            written: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

impl ArtifactSink for DirSink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::create_dir_all(&self.root)?;
        let path = self.root.join(name);
        std::fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

/// Keeps artifacts in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl ArtifactSink for MemorySink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.files.insert(name.to_string(), bytes.to_vec());
        Ok(())
    }
}

/// Summary of a scenario run, printed by the CLI and saved as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub summary: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            summary: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.summary.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.summary.get(key)
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "scenario: {} (seed {})", self.scenario, self.seed)?;
        for (k, v) in &self.summary {
            writeln!(f, "  {k}: {v}")?;
        }
        Ok(())
    }
}

/// A runnable experiment.
pub trait Scenario: Send + Sync {
    /// Registry key and CLI subcommand.
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Sets the scenario's own duration (s), if it has one.
    fn set_duration(&self, _cfg: &mut Config, _duration: f64) {}

    fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report>;
}

/// Scenarios keyed by name.
pub struct ScenarioRegistry {
    entries: BTreeMap<&'static str, Box<dyn Scenario>>,
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(learning::SimLearn));
        reg.register(Box::new(learning::SimQuant));
        reg.register(Box::new(learning::SimFault));
        reg.register(Box::new(control::SimControl));
        reg.register(Box::new(closed_loop::ClosedLoop));
        reg.register(Box::new(replay::Replay));
        reg
    }

    /// Adds a scenario, replacing any previous one of the same name.
    pub fn register(&mut self, scenario: Box<dyn Scenario>) -> Option<Box<dyn Scenario>> {
        self.entries.insert(scenario.name(), scenario)
    }

    pub fn get(&self, name: &str) -> Result<&dyn Scenario> {
        self.entries.get(name).map(|s| s.as_ref()).ok_or_else(|| {
            Error::Config(format!(
                "unknown scenario `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    /// Validates the config, runs the scenario and saves `report.json`.
    pub fn run(&self, name: &str, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
        let scenario = self.get(name)?;
        cfg.validate()?;
        let report = scenario.run(cfg, sink)?;
        write_json(sink, "report.json", &report)?;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;

    impl Scenario for Echo {
        fn name(&self) -> &'static str {
            "echo"
        }

        fn description(&self) -> &'static str {
            "writes its seed"
        }

        fn run(&self, cfg: &Config, sink: &mut dyn ArtifactSink) -> Result<Report> {
            sink.write("seed.txt", cfg.seed.to_string().as_bytes())?;
            let mut r = Report::new(self.name(), cfg.seed);
            r.insert("ok", true)?;
            Ok(r)
        }
    }

    #[test]
    fn builtins_are_registered_by_name() {
        let reg = ScenarioRegistry::with_builtins();
        assert_eq!(
            reg.names(),
            vec![
                "closed-loop",
                "replay",
                "sim-control",
                "sim-fault",
                "sim-learn",
                "sim-quant"
            ]
        );
        assert!(reg.get("sim-learn").is_ok());
        assert!(matches!(reg.get("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn custom_scenarios_can_be_registered() {
        let mut reg = ScenarioRegistry::empty();
        assert!(reg.register(Box::new(Echo)).is_none());
        let mut sink = MemorySink::default();
        let cfg = Config {
            seed: 5,
            ..Default::default()
        };
        let report = reg.run("echo", &cfg, &mut sink).unwrap();
        assert_eq!(report.get("ok"), Some(&Value::Bool(true)));
        assert_eq!(sink.files["seed.txt"], b"5");
        assert!(sink.files.contains_key("report.json"));
    }

    #[test]
    fn dir_sink_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = DirSink::new(dir.path().join("out"));
        sink.write("a.csv", b"x\n").unwrap();
        assert_eq!(std::fs::read(dir.path().join("out/a.csv")).unwrap(), b"x\n");
        assert_eq!(sink.written().len(), 1);
    }
}
