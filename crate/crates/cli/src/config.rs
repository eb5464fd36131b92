//! Run configuration: a TOML document validated into an engine setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use dtrp_core::density::{DensityRegion, PiecewiseUniformDensity};
use dtrp_core::engine::{EngineConfig, DEFAULT_QUEUE_CAP, DEFAULT_WARMUP};
use dtrp_core::geometry::{ConvexPolygon, Point};
use dtrp_core::partition::DEFAULT_SLACK;
use dtrp_core::policies::{KChoice, PolicyKind};
use dtrp_core::stochastic::derive_seed;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

/// Environment polygon; the unit square when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub vertices: Vec<[f64; 2]>,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }
}

fn polygon(vertices: &[[f64; 2]]) -> Result<ConvexPolygon, dtrp_core::geometry::GeometryError> {
    ConvexPolygon::new(vertices.iter().map(|v| Point::new(v[0], v[1])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub vertices: Vec<[f64; 2]>,
    pub level: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    #[default]
    Uniform,
    /// The two-region family on the unit square.
    Epsilon { epsilon: f64 },
    /// Explicit regions; levels are rescaled to unit mass when `normalize`.
    Regions {
        regions: Vec<RegionSpec>,
        #[serde(default = "yes")]
        normalize: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Fixed(usize),
    Named(KName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KName {
    Auto,
}

impl Default for KSpec {
    fn default() -> Self {
        KSpec::Named(KName::Auto)
    }
}

impl KSpec {
    pub fn choice(self) -> KChoice {
        match self {
            KSpec::Fixed(k) => KChoice::Fixed(k),
            KSpec::Named(KName::Auto) => KChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Event log of the first replication, one event per line.
    pub events: Option<PathBuf>,
}

fn d_speed() -> f64 {
    1.0
}
fn d_agents() -> usize {
    1
}
fn d_slack() -> f64 {
    DEFAULT_SLACK
}
fn d_warmup() -> f64 {
    DEFAULT_WARMUP
}
fn d_replications() -> usize {
    1
}
fn d_queue_cap() -> usize {
    DEFAULT_QUEUE_CAP
}

/// Deserializes TOML, reporting the path of the offending field.
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Schema {
        path: String::new(),
        message: e.message().to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().message().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub policy: PolicyKind,
    pub lambda: f64,
    pub radius: f64,
    pub horizon: f64,
    #[serde(default = "d_speed")]
    pub speed: f64,
    #[serde(default = "d_agents")]
    pub agents: usize,
    #[serde(default)]
    pub k: KSpec,
    #[serde(default = "d_slack")]
    pub slack: f64,
    #[serde(default = "d_warmup")]
    pub warmup: f64,
    #[serde(default = "d_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_queue_cap")]
    pub queue_cap: usize,
    #[serde(default)]
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    /// A config with every optional field at its default.
    pub fn new(policy: PolicyKind, lambda: f64, radius: f64, horizon: f64) -> Self {
        Self {
            policy,
            lambda,
            radius,
            horizon,
            speed: d_speed(),
            agents: d_agents(),
            k: KSpec::default(),
            slack: d_slack(),
            warmup: d_warmup(),
            replications: d_replications(),
            seed: 0,
            queue_cap: d_queue_cap(),
            environment: EnvironmentSpec::default(),
            density: DensitySpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = parse_toml(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn environment(&self) -> Result<ConvexPolygon, ConfigError> {
        polygon(&self.environment.vertices).map_err(|e| invalid("environment.vertices", e.to_string()))
    }

    pub fn density(&self) -> Result<PiecewiseUniformDensity, ConfigError> {
        let env = self.environment()?;
        match &self.density {
            DensitySpec::Uniform => Ok(PiecewiseUniformDensity::uniform(env)),
            DensitySpec::Epsilon { epsilon } => {
                if env != ConvexPolygon::unit_square() {
                    return Err(invalid("density.epsilon", "the epsilon family is defined on the unit square"));
                }
                PiecewiseUniformDensity::epsilon_family(*epsilon).map_err(|e| invalid("density.epsilon", e.to_string()))
            }
            DensitySpec::Regions { regions, normalize } => {
                let mut cells = Vec::with_capacity(regions.len());
                for r in regions {
                    let cell = polygon(&r.vertices).map_err(|e| invalid("density.regions.vertices", e.to_string()))?;
                    cells.push(DensityRegion { cell, level: r.level });
                }
                if *normalize {
                    let mass: f64 = cells.iter().map(|c| c.level * c.cell.area()).sum();
                    if mass > 0.0 && mass.is_finite() {
                        for c in &mut cells {
                            c.level /= mass;
                        }
                    }
                }
                PiecewiseUniformDensity::new(env, cells).map_err(|e| invalid("density.regions", e.to_string()))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("radius", self.radius)?;
        positive("speed", self.speed)?;
        positive("horizon", self.horizon)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be nonnegative and finite, got {}", self.lambda)));
        }
        if self.agents == 0 {
            return Err(invalid("agents", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(invalid("warmup", "must lie in [0, 1)"));
        }
        if !(0.0..0.5).contains(&self.slack) {
            return Err(invalid("slack", "must lie in [0, 0.5)"));
        }
        if self.k == KSpec::Fixed(0) {
            return Err(invalid("k", "must be \"auto\" or at least 1"));
        }
        if self.queue_cap == 0 {
            return Err(invalid("queue_cap", "must be at least 1"));
        }
        self.density()?;
        Ok(())
    }

    /// Seed of replication `rep`, derived from the master seed.
    pub fn replication_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, rep as u64)
    }

    pub fn engine(&self, rep: usize) -> Result<EngineConfig, ConfigError> {
        let mut c = EngineConfig::new(self.policy, self.density()?);
        c.lambda = self.lambda;
        c.speed = self.speed;
        c.radius = self.radius;
        c.agents = self.agents;
        c.k = self.k.choice();
        c.slack = self.slack;
        c.horizon = self.horizon;
        c.warmup = self.warmup;
        c.seed = self.replication_seed(rep);
        c.queue_cap = self.queue_cap;
        Ok(c)
    }
}
