//! Synthetic request arrival rates.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Short burst inserted into a step pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Peak {
    pub at: u64,
    pub len: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    /// Length of the phase in intervals; the last phase may omit it.
    pub steps: Option<u64>,
    pub pattern: WorkloadPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadPattern {
    Constant {
        rate: f64,
    },
    /// `from` before interval `at`, `to` from then on, with an optional peak.
    Step {
        from: f64,
        to: f64,
        at: u64,
        #[serde(default)]
        peak: Option<Peak>,
    },
    /// Base rate with randomly starting bursts of `height` extra requests/s.
    Spike {
        base: f64,
        height: f64,
        probability: f64,
        duration: u64,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// One arrival rate per line, wrapping around at the end.
    TraceFile {
        path: PathBuf,
    },
    /// Inline rates, wrapping around at the end.
    Rates {
        rates: Vec<f64>,
    },
    /// Patterns played back to back; each phase sees its own local time.
    Phased {
        phases: Vec<Phase>,
    },
}

impl Default for WorkloadPattern {
    fn default() -> Self {
        WorkloadPattern::Sinusoid {
            mean: 45.0,
            amplitude: 25.0,
            period: 200.0,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub pattern: WorkloadPattern,
    /// Relative standard deviation of multiplicative Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            pattern: WorkloadPattern::default(),
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Stateful workload source; [`next_rate`](Self::next_rate) advances one
/// interval.
#[derive(Debug, Clone)]
pub struct WorkloadGenerator {
    pattern: WorkloadPattern,
    noise: f64,
    seed: u64,
    t: u64,
    rng: ChaCha8Rng,
    spike_left: u64,
    wraps: u64,
}

impl WorkloadGenerator {
    /// Builds the generator, loading trace files relative to `base_dir`.
    pub fn new(config: &WorkloadConfig, base_dir: Option<&Path>) -> Result<Self> {
        let pattern = resolve(&config.pattern, base_dir)?;
        validate(&pattern)?;
        if !(config.noise >= 0.0 && config.noise.is_finite()) {
            return Err(Error::Config("workload.noise must be >= 0".into()));
        }
        Ok(WorkloadGenerator {
            pattern,
            noise: config.noise,
            seed: config.seed,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            spike_left: 0,
            wraps: 0,
        })
    }

    pub fn reset(&mut self) {
        self.t = 0;
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.spike_left = 0;
        self.wraps = 0;
    }

    /// Intervals emitted so far.
    pub fn position(&self) -> u64 {
        self.t
    }

    pub fn next_rate(&mut self) -> f64 {
        let t = self.t;
        self.t += 1;
        let pattern = std::mem::replace(&mut self.pattern, WorkloadPattern::Rates { rates: vec![] });
        let base = self.rate_at(&pattern, t);
        self.pattern = pattern;
        let noisy = if self.noise > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            base * (1.0 + self.noise * z)
        } else {
            base
        };
        noisy.max(0.0)
    }

    fn rate_at(&mut self, pattern: &WorkloadPattern, t: u64) -> f64 {
        match pattern {
            WorkloadPattern::Constant { rate } => *rate,
            WorkloadPattern::Step { from, to, at, peak } => {
                if let Some(p) = peak {
                    if t >= p.at && t < p.at + p.len {
                        return p.rate;
                    }
                }
                if t < *at {
                    *from
                } else {
                    *to
                }
            }
            WorkloadPattern::Spike {
                base,
                height,
                probability,
                duration,
            } => {
                if self.spike_left == 0 && self.rng.random::<f64>() < *probability {
                    self.spike_left = *duration;
                }
                if self.spike_left > 0 {
                    self.spike_left -= 1;
                    base + height
                } else {
                    *base
                }
            }
            WorkloadPattern::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => mean + amplitude * (std::f64::consts::TAU * t as f64 / period + phase).sin(),
            WorkloadPattern::Rates { rates } => {
                let n = rates.len() as u64;
                let i = t % n;
                if i == 0 && t > 0 {
                    self.wraps += 1;
                    log::info!("workload trace exhausted after {n} intervals, wrapping around (pass {})", self.wraps);
                }
                rates[i as usize]
            }
            WorkloadPattern::Phased { phases } => {
                let mut start = 0;
                for (i, phase) in phases.iter().enumerate() {
                    let last = i + 1 == phases.len();
                    match phase.steps {
                        Some(len) if !last && t >= start + len => start += len,
                        _ => return self.rate_at(&phase.pattern, t - start),
                    }
                }
                unreachable!("validated phased pattern has at least one phase")
            }
            WorkloadPattern::TraceFile { .. } => unreachable!("trace files are resolved on load"),
        }
    }
}

fn resolve(pattern: &WorkloadPattern, base_dir: Option<&Path>) -> Result<WorkloadPattern> {
    Ok(match pattern {
        WorkloadPattern::TraceFile { path } => {
            let full = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            WorkloadPattern::Rates {
                rates: load_trace(&full)?,
            }
        }
        WorkloadPattern::Phased { phases } => WorkloadPattern::Phased {
            phases: phases
                .iter()
                .map(|p| {
                    Ok(Phase {
                        steps: p.steps,
                        pattern: resolve(&p.pattern, base_dir)?,
                    })
                })
                .collect::<Result<_>>()?,
        },
        other => other.clone(),
    })
}

/// Reads a workload trace: one non-negative rate per line, blank lines and
/// `#` comments ignored.
pub fn load_trace(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rates = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rate: f64 = line.parse().map_err(|_| Error::TraceFile {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("not a number: {line:?}"),
        })?;
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::TraceFile {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("arrival rate must be non-negative, got {rate}"),
            });
        }
        rates.push(rate);
    }
    if rates.is_empty() {
        return Err(Error::TraceFile {
            path: path.to_path_buf(),
            line: 0,
            message: "workload trace holds no rates".into(),
        });
    }
    Ok(rates)
}

fn validate(pattern: &WorkloadPattern) -> Result<()> {
    let bad = |m: &str| Err(Error::Config(format!("workload: {m}")));
    let nonneg = |x: f64| x >= 0.0 && x.is_finite();
    match pattern {
        WorkloadPattern::Constant { rate } if !nonneg(*rate) => bad("rate must be >= 0"),
        WorkloadPattern::Step { from, to, peak, .. } => {
            if !nonneg(*from) || !nonneg(*to) || peak.as_ref().is_some_and(|p| !nonneg(p.rate)) {
                return bad("step rates must be >= 0");
            }
            Ok(())
        }
        WorkloadPattern::Spike {
            base,
            height,
            probability,
            ..
        } => {
            if !nonneg(*base) || !nonneg(*height) || !(0.0..=1.0).contains(probability) {
                return bad("spike needs base, height >= 0 and probability in [0, 1]");
            }
            Ok(())
        }
        WorkloadPattern::Sinusoid {
            mean,
            amplitude,
            period,
            ..
        } => {
            if !(period > &0.0) || !nonneg(mean - amplitude.abs()) {
                return bad("sinusoid needs period > 0 and mean >= |amplitude|");
            }
            Ok(())
        }
        WorkloadPattern::Rates { rates } => {
            if rates.is_empty() || !rates.iter().all(|r| nonneg(*r)) {
                return bad("rates must be non-empty and >= 0");
            }
            Ok(())
        }
        WorkloadPattern::Phased { phases } => {
            if phases.is_empty() {
                return bad("phased pattern needs at least one phase");
            }
            for (i, p) in phases.iter().enumerate() {
                if p.steps.is_none() && i + 1 != phases.len() {
                    return bad("only the last phase may omit `steps`");
                }
                validate(&p.pattern)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
