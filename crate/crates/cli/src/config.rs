//! Run configuration file and its command-line / environment overrides.

use std::fs;
use std::path::{Path, PathBuf};

use dinekit_core::agent::Hyperparameters;
use dinekit_core::dine::{EnvModelConfig, Thresholds};
use dinekit_core::env::EnvConfig;
use dinekit_core::exec::Execution;
use serde::{Deserialize, Serialize};

/// Prefix of every environment variable override, e.g. `DINEKIT_SEED`.
pub const ENV_PREFIX: &str = "DINEKIT_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    #[default]
    Swim,
    CliffWalk,
}

/// Threshold grids for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    /// Leading records left out, e.g. the exploration phase of a fresh run.
    pub skip: u64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            rho: (0..=20).map(|i| f64::from(i) / 20.0).collect(),
            phi: (0..=25).map(|i| f64::from(i) / 50.0).collect(),
            skip: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvironmentKind,
    /// Simulator configuration file; defaults apply when absent.
    pub env_config: Option<PathBuf>,
    /// Inline simulator configuration, used when `env_config` is absent.
    pub env: Option<EnvConfig>,
    pub steps: u64,
    pub seed: u64,
    /// Trace file written by `train`/`demo` and read by `serve`/`sweep`.
    pub trace: Option<PathBuf>,
    /// Weights written after training.
    pub checkpoint: Option<PathBuf>,
    pub addr: String,
    pub execution: Execution,
    /// Learn every this many environment steps.
    pub train_every: u64,
    /// Train the environment model and detect extrema.
    pub extrema: bool,
    pub hyper: Hyperparameters,
    pub thresholds: Thresholds,
    pub env_model: EnvModelConfig,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            environment: EnvironmentKind::Swim,
            env_config: None,
            env: None,
            steps: 10_000,
            seed: 0,
            trace: None,
            checkpoint: None,
            addr: "127.0.0.1:8080".into(),
            execution: Execution::default(),
            train_every: 1,
            extrema: true,
            hyper: Hyperparameters::default(),
            thresholds: Thresholds::default(),
            env_model: EnvModelConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

/// Values given on the command line or through `DINEKIT_*` variables; they
/// win over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub rho: Option<f64>,
    pub phi: Option<f64>,
    pub trace: Option<PathBuf>,
    pub addr: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("run config: {e}")))
    }

    /// Reads a run configuration; relative paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        rebase(&mut cfg.env_config);
        rebase(&mut cfg.trace);
        rebase(&mut cfg.checkpoint);
        if let Some(env) = &mut cfg.env {
            env.base_dir = Some(base.to_path_buf());
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.steps {
            self.steps = v;
        }
        if let Some(v) = o.rho {
            self.thresholds.rho = v;
        }
        if let Some(v) = o.phi {
            self.thresholds.phi = v;
        }
        if let Some(v) = &o.trace {
            self.trace = Some(v.clone());
        }
        if let Some(v) = &o.addr {
            self.addr = v.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: dinekit_core::Error| ConfigError(e.to_string());
        if self.steps == 0 {
            return Err(ConfigError("steps must be positive".into()));
        }
        if self.train_every == 0 {
            return Err(ConfigError("train_every must be positive".into()));
        }
        if let Some(p) = &self.env_config {
            if !p.is_file() {
                return Err(ConfigError(format!("env_config {} does not exist", p.display())));
            }
        }
        if self.env_config.is_some() && self.env.is_some() {
            return Err(ConfigError("give either env_config or [env], not both".into()));
        }
        self.hyper.validate().map_err(wrap)?;
        self.thresholds.validate().map_err(wrap)?;
        self.env_model.validate().map_err(wrap)?;
        for (name, grid, hi) in [("sweep.rho", &self.sweep.rho, 1.0), ("sweep.phi", &self.sweep.phi, f64::INFINITY)] {
            if grid.iter().any(|v| !(0.0..=hi).contains(v)) {
                return Err(ConfigError(format!("{name} holds a value out of range")));
            }
        }
        Ok(())
    }

    /// Simulator configuration selected by this run.
    pub fn env_config(&self) -> Result<EnvConfig, ConfigError> {
        let cfg = match (&self.env_config, &self.env) {
            (Some(p), _) => EnvConfig::load(p).map_err(|e| ConfigError(e.to_string()))?,
            (None, Some(c)) => c.clone(),
            (None, None) => EnvConfig::default(),
        };
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }
}

/// Invalid configuration; the binary maps it to exit code 1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("stepz = 3\n").is_err());
        assert!(RunConfig::from_toml("[hyper]\nlr = 0.1\n").is_err());
    }

    #[test]
    fn zero_steps_rejected() {
        let cfg = RunConfig::from_toml("steps = 0\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::from_toml("seed = 3\nsteps = 10\n[thresholds]\nrho = 0.4\nphi = 0.2\n").unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            rho: Some(0.7),
            ..Overrides::default()
        });
        assert_eq!((cfg.seed, cfg.steps), (9, 10));
        assert_eq!(cfg.thresholds, Thresholds { rho: 0.7, phi: 0.2 });
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("env.toml"), "[queue]\nboot_delay = 2\n").unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "env_config = \"env.toml\"\ntrace = \"out.jsonl\"\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.trace.as_deref(), Some(dir.path().join("out.jsonl").as_path()));
        assert_eq!(cfg.env_config().unwrap().queue.boot_delay, 2);
    }

    #[test]
    fn missing_env_file_rejected() {
        let cfg = RunConfig {
            env_config: Some("/nonexistent/env.toml".into()),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
