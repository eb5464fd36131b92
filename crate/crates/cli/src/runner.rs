//! One replication of a configuration, flattened into a CSV row and a
//! metadata record.

use serde::{Deserialize, Serialize};

use dtrp_core::bounds::{BoundSpec, FrequencyProfile};
use dtrp_core::engine::{run, AuditReport, EngineError, Event, GroupStat, RunOutput};
use dtrp_core::geometry::ConvexPolygon;

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Unstable,
    Error,
}

/// One CSV row. The leading columns identify the campaign point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub campaign: String,
    pub point: usize,
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub replication: usize,
    pub run_id: String,
    pub seed: u64,
    pub policy: String,
    pub m: usize,
    pub r: f64,
    pub lambda: f64,
    pub v: f64,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub t_sys_mean: Option<f64>,
    pub t_sys_ci: Option<f64>,
    pub t_detect_mean: Option<f64>,
    pub n_served: Option<usize>,
    pub n_outstanding_final: Option<usize>,
    pub little_lhs: Option<f64>,
    pub little_rhs: Option<f64>,
    pub bound_value: f64,
    pub ratio: Option<f64>,
    pub status: RunStatus,
    pub diagnostic: String,
    pub n_window: Option<usize>,
    pub low_confidence: Option<bool>,
    pub horizon: Option<f64>,
    pub phase_length_mean: Option<f64>,
    /// Mean system time per density region, `;`-separated.
    pub region_means: String,
    pub audit_clean: Option<bool>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    pub fn little_error(&self) -> Option<f64> {
        Some(((self.little_lhs? - self.little_rhs?) / self.little_rhs?).abs())
    }

    pub fn region_means(&self) -> Vec<f64> {
        if self.region_means.is_empty() {
            return Vec::new();
        }
        self.region_means.split(';').map(|s| s.parse().unwrap_or(f64::NAN)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMeta {
    pub region: ConvexPolygon,
    pub lambda: f64,
    pub k: usize,
    pub tile_counts: Vec<usize>,
    pub residuals: Vec<f64>,
    pub subdivision: (usize, usize),
    pub tiles: usize,
}

/// Sidecar data for one run: partitions, tile counts and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub seed: u64,
    pub horizon: Option<f64>,
    pub warmup_time: Option<f64>,
    pub phases_completed: Option<usize>,
    pub agents: Vec<AgentMeta>,
    pub region_means: Vec<GroupStat>,
    pub cell_means: Vec<GroupStat>,
    pub audit: Option<AuditReport>,
}

pub struct Replication {
    pub record: RunRecord,
    pub meta: RunMeta,
    pub events: Option<Vec<Event>>,
    /// Present when the engine rejected the configuration itself.
    pub config_error: Option<String>,
}

/// Analytic bound matching the policy's regime and bias.
pub fn bound_for(config: &RunConfig) -> Result<f64, ConfigError> {
    let spec = BoundSpec {
        regime: config.policy.regime(),
        bias: config.policy.bias(),
        m: config.agents,
        v: config.speed,
        r: config.radius,
        lambda: config.lambda,
    };
    Ok(spec.evaluate(&config.density()?))
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn run_replication(
    config: &RunConfig,
    rep: usize,
    label: (&str, usize, &str, Option<f64>),
    record_events: bool,
) -> Result<Replication, ConfigError> {
    let (campaign, point, param, value) = label;
    let mut engine = config.engine(rep)?;
    engine.record_events = record_events;
    let bound = bound_for(config)?;
    let run_id = if campaign.is_empty() {
        format!("run-{rep}")
    } else {
        format!("{campaign}-{point}-{rep}")
    };
    let mut record = RunRecord {
        campaign: campaign.to_string(),
        point,
        sweep_param: param.to_string(),
        sweep_value: value,
        replication: rep,
        run_id: run_id.clone(),
        seed: engine.seed,
        policy: config.policy.name().to_string(),
        m: config.agents,
        r: config.radius,
        lambda: config.lambda,
        v: config.speed,
        k: None,
        t_sys_mean: None,
        t_sys_ci: None,
        t_detect_mean: None,
        n_served: None,
        n_outstanding_final: None,
        little_lhs: None,
        little_rhs: None,
        bound_value: bound,
        ratio: None,
        status: RunStatus::Ok,
        diagnostic: String::new(),
        n_window: None,
        low_confidence: None,
        horizon: None,
        phase_length_mean: None,
        region_means: String::new(),
        audit_clean: None,
    };
    let mut meta = RunMeta {
        run_id,
        seed: engine.seed,
        horizon: None,
        warmup_time: None,
        phases_completed: None,
        agents: Vec::new(),
        region_means: Vec::new(),
        cell_means: Vec::new(),
        audit: None,
    };
    let out: RunOutput = match run(&engine) {
        Ok(out) => out,
        Err(e) => {
            let config_error = match e {
                EngineError::Instability { .. } | EngineError::DrainTimeout { .. } => {
                    record.status = RunStatus::Unstable;
                    None
                }
                _ => {
                    record.status = RunStatus::Error;
                    Some(e.to_string())
                }
            };
            record.diagnostic = e.to_string();
            return Ok(Replication {
                record,
                meta,
                events: None,
                config_error,
            });
        }
    };
    let s = &out.stats;
    record.k = out.plans.first().map(|p| p.tiling.k);
    record.t_sys_mean = Some(s.t_sys_mean);
    record.t_sys_ci = Some(s.t_sys_ci);
    record.t_detect_mean = Some(s.t_detect_mean);
    record.n_served = Some(s.n_served);
    record.n_outstanding_final = Some(s.n_outstanding_final);
    record.little_lhs = Some(s.little_lhs);
    record.little_rhs = Some(s.little_rhs);
    record.ratio = Some(s.t_sys_mean / bound);
    record.n_window = Some(s.n_window);
    record.low_confidence = Some(s.low_confidence);
    record.horizon = Some(s.horizon);
    record.phase_length_mean = Some(s.phase_length_mean);
    record.region_means = join(s.region_means.iter().map(|g| g.mean));
    record.audit_clean = Some(out.audit.is_clean());
    if s.low_confidence {
        record.diagnostic = format!("only {} services in the estimation window", s.n_window);
    }
    meta.horizon = Some(s.horizon);
    meta.warmup_time = Some(s.warmup_time);
    meta.phases_completed = Some(s.phases_completed);
    meta.region_means = s.region_means.clone();
    meta.cell_means = s.cell_means.clone();
    meta.audit = Some(out.audit);
    meta.agents = out
        .plans
        .iter()
        .map(|p| AgentMeta {
            region: p.region.clone(),
            lambda: p.lambda,
            k: p.tiling.k,
            tile_counts: p.tiling.counts.clone(),
            residuals: p.tiling.residuals.clone(),
            subdivision: p.tiling.subdivision,
            tiles: p.tiling.tile_count(),
        })
        .collect();
    Ok(Replication {
        record,
        meta,
        events: out.events,
        config_error: None,
    })
}

/// Analytic values printed by the `bounds` verb.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub small_r_unbiased: f64,
    pub small_r_biased: f64,
    pub heavy_unbiased: f64,
    pub heavy_biased: f64,
    /// The bound matching the configured policy.
    pub selected: f64,
    pub frequency_gamma: f64,
}

pub fn bound_report(config: &RunConfig) -> Result<BoundReport, ConfigError> {
    use dtrp_core::bounds::{heavy_biased, heavy_unbiased, optimal_frequency, small_r_biased, small_r_unbiased, DEFAULT_RESOLUTION};
    let phi = config.density()?;
    let (m, v, r, l) = (config.agents, config.speed, config.radius, config.lambda);
    let profile: FrequencyProfile = optimal_frequency(&phi, m, v, r, DEFAULT_RESOLUTION);
    Ok(BoundReport {
        small_r_unbiased: small_r_unbiased(phi.environment().area(), m, v, r),
        small_r_biased: small_r_biased(&phi, m, v, r),
        heavy_unbiased: heavy_unbiased(&phi, l, m, v),
        heavy_biased: heavy_biased(&phi, l, m, v),
        selected: bound_for(config)?,
        frequency_gamma: profile.gamma,
    })
}
