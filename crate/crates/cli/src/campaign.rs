//! Parameter sweeps: built-in presets, spec files, parallel execution,
//! per-point summaries and acceptance checks.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use dtrp_core::bounds::heavy_biased;
use dtrp_core::density::PiecewiseUniformDensity;
use dtrp_core::policies::PolicyKind;
use dtrp_core::tsp::BHH_BETA;

use crate::config::{parse_toml, ConfigError, DensitySpec, KSpec, RegionSpec, RunConfig};
use crate::output::{csv_bytes, json_bytes, write_atomic};
use crate::runner::{run_replication, RunMeta, RunRecord};

/// Number of worker threads, overridable through this variable.
pub const WORKERS_ENV: &str = "DTRP_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Lambda,
    Radius,
    Epsilon,
    Agents,
    Speed,
    Horizon,
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Radius => "radius",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Agents => "agents",
            SweepParam::Speed => "speed",
            SweepParam::Horizon => "horizon",
            SweepParam::K => "k",
        }
    }

    fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig, ConfigError> {
        let count = |field: &'static str| {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(ConfigError::Invalid {
                    field,
                    message: format!("sweep value {value} is not a positive integer"),
                })
            }
        };
        let mut c = base.clone();
        match self {
            SweepParam::Lambda => c.lambda = value,
            SweepParam::Radius => c.radius = value,
            SweepParam::Epsilon => c.density = DensitySpec::Epsilon { epsilon: value },
            SweepParam::Agents => c.agents = count("sweep.values")?,
            SweepParam::Speed => c.speed = value,
            SweepParam::Horizon => c.horizon = value,
            SweepParam::K => c.k = KSpec::Fixed(count("sweep.values")?),
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

/// A base configuration swept along one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub name: String,
    /// Replications per point; overrides the base configuration's count.
    pub replications: usize,
    pub base: RunConfig,
    pub sweep: Sweep,
}

impl CampaignSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = &self.sweep.values;
        if v.len() < 2 {
            return Err(ConfigError::Invalid {
                field: "sweep.values",
                message: "a sweep needs at least 2 points".into(),
            });
        }
        let up = v.windows(2).all(|w| w[1] > w[0]);
        let down = v.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(ConfigError::Invalid {
                field: "sweep.values",
                message: "sweep values must be strictly monotone".into(),
            });
        }
        if self.replications == 0 {
            return Err(ConfigError::Invalid {
                field: "replications",
                message: "must be at least 1".into(),
            });
        }
        for &value in v {
            self.sweep.parameter.apply(&self.base, value)?;
        }
        Ok(())
    }

    pub fn point_configs(&self) -> Result<Vec<RunConfig>, ConfigError> {
        self.sweep
            .values
            .iter()
            .map(|&value| {
                let mut c = self.sweep.parameter.apply(&self.base, value)?;
                c.replications = self.replications;
                Ok(c)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub name: String,
    pub specs: Vec<CampaignSpec>,
    /// Parameter choices not fixed by the experiment being reproduced.
    pub notes: Vec<String>,
}

pub const PRESETS: [&str; 3] = ["urs-r-sweep", "bts-eps-sweep", "heavy-load"];

/// Density with level 1.8 on the left half of the unit square and 0.2 on the right.
pub fn half_split_density() -> DensitySpec {
    let rect = |x0: f64, x1: f64| vec![[x0, 0.0], [x1, 0.0], [x1, 1.0], [x0, 1.0]];
    DensitySpec::Regions {
        regions: vec![
            RegionSpec {
                vertices: rect(0.0, 0.5),
                level: 1.8,
            },
            RegionSpec {
                vertices: rect(0.5, 1.0),
                level: 0.2,
            },
        ],
        normalize: false,
    }
}

impl Campaign {
    pub fn preset(name: &str) -> Option<Campaign> {
        match name {
            "urs-r-sweep" => Some(Self::urs_r_sweep()),
            "bts-eps-sweep" => Some(Self::bts_eps_sweep()),
            "heavy-load" => Some(Self::heavy_load()),
            _ => None,
        }
    }

    pub fn from_spec_file(path: &Path) -> Result<Campaign, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: CampaignSpec = parse_toml(&text)?;
        spec.validate()?;
        Ok(Campaign {
            name: spec.name.clone(),
            specs: vec![spec],
            notes: Vec::new(),
        })
    }

    pub fn urs_r_sweep() -> Campaign {
        let mut base = RunConfig::new(PolicyKind::Urs, 5.0, 0.1, 4000.0);
        base.seed = 1;
        Campaign {
            name: "urs-r-sweep".into(),
            specs: vec![CampaignSpec {
                name: "urs-r-sweep".into(),
                replications: 10,
                base,
                sweep: Sweep {
                    parameter: SweepParam::Radius,
                    values: vec![0.1, 0.05, 0.025, 0.0125, 0.00625],
                },
            }],
            notes: vec!["lambda = 5 is a chosen light load; the arrival rate of the small-radius experiments is not stated".into()],
        }
    }

    pub fn bts_eps_sweep() -> Campaign {
        let mut base = RunConfig::new(PolicyKind::Bts, 5.0, 0.00625, 4000.0);
        base.seed = 2;
        Campaign {
            name: "bts-eps-sweep".into(),
            specs: vec![CampaignSpec {
                name: "bts-eps-sweep".into(),
                replications: 10,
                base,
                sweep: Sweep {
                    parameter: SweepParam::Epsilon,
                    values: vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.89],
                },
            }],
            notes: vec!["lambda = 5 is a chosen light load, as for the URS sweep".into()],
        }
    }

    pub fn heavy_load() -> Campaign {
        let mut specs = Vec::new();
        for policy in [PolicyKind::Uttsp, PolicyKind::Bttsp] {
            for (label, density) in [("uniform", DensitySpec::Uniform), ("half", half_split_density())] {
                for m in [1, 2] {
                    let mut base = RunConfig::new(policy, 25.0, 0.3, 2000.0);
                    base.agents = m;
                    base.density = density.clone();
                    base.seed = 3;
                    specs.push(CampaignSpec {
                        name: format!("{}-{label}-m{m}", policy.name().to_lowercase()),
                        replications: 3,
                        base,
                        sweep: Sweep {
                            parameter: SweepParam::Lambda,
                            values: vec![25.0, 50.0, 100.0],
                        },
                    });
                }
            }
        }
        Campaign {
            name: "heavy-load".into(),
            specs,
            notes: vec![
                "lambda in {25, 50, 100} stands in for the lambda -> infinity limit".into(),
                "r = 0.3 gives the 25-tile UTTSP grid; BTTSP uses the same radius".into(),
            ],
        }
    }

    /// Keeps only the specs whose name satisfies `keep`.
    pub fn filtered(mut self, keep: impl Fn(&str) -> bool) -> Campaign {
        self.specs.retain(|s| keep(&s.name));
        self
    }

    pub fn with_replications(mut self, n: usize) -> Campaign {
        for s in &mut self.specs {
            s.replications = n;
        }
        self
    }

    pub fn with_horizon(mut self, h: f64) -> Campaign {
        for s in &mut self.specs {
            s.base.horizon = h;
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.specs.iter().try_for_each(CampaignSpec::validate)
    }
}

/// Replication statistics of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub campaign: String,
    pub spec: String,
    pub point: usize,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub policy: String,
    pub m: usize,
    pub r: f64,
    pub lambda: f64,
    pub v: f64,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub replications: usize,
    pub replications_ok: usize,
    pub t_sys_mean: f64,
    /// Half-width of the 95% interval across replications.
    pub t_sys_ci: f64,
    pub t_over_lambda: f64,
    pub t_detect_mean: f64,
    pub bound_value: f64,
    pub ratio: f64,
    pub ratio_ci: f64,
    pub phase_length_mean: f64,
    pub max_little_error: f64,
    pub region_means: String,
    pub region_ci: String,
    pub audit_clean: bool,
}

impl PointSummary {
    pub fn region_means(&self) -> Vec<f64> {
        self.region_means.split(';').filter(|s| !s.is_empty()).map(|s| s.parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn region_ci(&self) -> Vec<f64> {
        self.region_ci.split(';').filter(|s| !s.is_empty()).map(|s| s.parse().unwrap_or(f64::NAN)).collect()
    }
}

/// Mean and 95% half-width of independent replications.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub campaign: Campaign,
    pub rows: Vec<RunRecord>,
    pub metas: Vec<RunMeta>,
    pub summaries: Vec<PointSummary>,
    pub config_errors: Vec<String>,
}

/// Thread pool sized by [`WORKERS_ENV`] when set.
pub fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got {v:?}"))?;
        builder = builder.num_threads(n.max(1));
    }
    Ok(builder.build()?)
}

struct Job {
    spec: usize,
    point: usize,
    value: f64,
    config: RunConfig,
    rep: usize,
}

/// Runs every replication of every point. Rows come back in configuration
/// order whatever order the workers finish in.
pub fn run_campaign(campaign: &Campaign) -> Result<CampaignResult> {
    campaign.validate()?;
    let mut jobs = Vec::new();
    let mut point = 0;
    for (s, spec) in campaign.specs.iter().enumerate() {
        for (config, &value) in spec.point_configs()?.into_iter().zip(&spec.sweep.values) {
            for rep in 0..spec.replications {
                jobs.push(Job {
                    spec: s,
                    point,
                    value,
                    config: config.clone(),
                    rep,
                });
            }
            point += 1;
        }
    }
    let results = pool()?.install(|| {
        jobs.par_iter()
            .map(|j| {
                let param = campaign.specs[j.spec].sweep.parameter.name();
                run_replication(&j.config, j.rep, (&campaign.name, j.point, param, Some(j.value)), false)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut rows = Vec::with_capacity(results.len());
    let mut metas = Vec::with_capacity(results.len());
    let mut config_errors = Vec::new();
    for r in results {
        if let Some(e) = r.config_error {
            config_errors.push(format!("{}: {e}", r.record.run_id));
        }
        rows.push(r.record);
        metas.push(r.meta);
    }
    let mut summaries = Vec::new();
    for (j, first) in jobs.iter().enumerate() {
        if first.rep != 0 {
            continue;
        }
        let spec = &campaign.specs[first.spec];
        let group: Vec<&RunRecord> = rows[j..j + spec.replications].iter().collect();
        summaries.push(summarize(&campaign.name, &spec.name, first, &group));
    }
    Ok(CampaignResult {
        campaign: campaign.clone(),
        rows,
        metas,
        summaries,
        config_errors,
    })
}

fn summarize(campaign: &str, spec: &str, job: &Job, group: &[&RunRecord]) -> PointSummary {
    let ok: Vec<&&RunRecord> = group.iter().filter(|r| r.is_ok()).collect();
    let col = |f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let (t, t_ci) = mean_ci(&col(|r| r.t_sys_mean));
    let (ratio, ratio_ci) = mean_ci(&col(|r| r.ratio));
    let (det, _) = mean_ci(&col(|r| r.t_detect_mean));
    let (phase, _) = mean_ci(&col(|r| r.phase_length_mean));
    let regions = ok.first().map_or(0, |r| r.region_means().len());
    let (mut means, mut cis) = (Vec::new(), Vec::new());
    for j in 0..regions {
        let v: Vec<f64> = ok.iter().map(|r| r.region_means()[j]).filter(|x| x.is_finite()).collect();
        let (m, c) = mean_ci(&v);
        means.push(m.to_string());
        cis.push(c.to_string());
    }
    let c = &job.config;
    PointSummary {
        campaign: campaign.to_string(),
        spec: spec.to_string(),
        point: job.point,
        sweep_param: group[0].sweep_param.clone(),
        sweep_value: job.value,
        policy: c.policy.name().to_string(),
        m: c.agents,
        r: c.radius,
        lambda: c.lambda,
        v: c.speed,
        k: ok.first().and_then(|r| r.k),
        replications: group.len(),
        replications_ok: ok.len(),
        t_sys_mean: t,
        t_sys_ci: t_ci,
        t_over_lambda: t / c.lambda,
        t_detect_mean: det,
        bound_value: group[0].bound_value,
        ratio,
        ratio_ci,
        phase_length_mean: phase,
        max_little_error: ok.iter().filter_map(|r| r.little_error()).fold(0.0, f64::max),
        region_means: means.join(";"),
        region_ci: cis.join(";"),
        audit_clean: ok.iter().all(|r| r.audit_clean == Some(true)),
    }
}

#[derive(Debug, Serialize)]
struct CampaignMeta<'a> {
    campaign: &'a Campaign,
    version: &'a str,
    runs: &'a [RunMeta],
    config_errors: &'a [String],
}

impl CampaignResult {
    pub fn rows_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&self.rows)
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(&self.summaries)
    }

    pub fn metadata_json(&self) -> Result<Vec<u8>> {
        json_bytes(&CampaignMeta {
            campaign: &self.campaign,
            version: env!("CARGO_PKG_VERSION"),
            runs: &self.metas,
            config_errors: &self.config_errors,
        })
    }

    /// Writes `<name>.csv`, `<name>_summary.csv` and `<name>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let name = &self.campaign.name;
        write_atomic(&dir.join(format!("{name}.csv")), &self.rows_csv()?)?;
        write_atomic(&dir.join(format!("{name}_summary.csv")), &self.summary_csv()?)?;
        write_atomic(&dir.join(format!("{name}.json")), &self.metadata_json()?)?;
        Ok(())
    }

    pub fn any_unstable(&self) -> bool {
        self.rows.iter().any(|r| r.status == crate::runner::RunStatus::Unstable)
    }

    fn point(&self, spec: &str, value: f64) -> Option<&PointSummary> {
        self.summaries.iter().find(|s| s.spec == spec && s.sweep_value == value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value / target - 1.0).abs() <= tol
}

/// Assertions for the built-in presets plus the run invariants that apply
/// to every campaign.
pub fn checks(result: &CampaignResult) -> Vec<Check> {
    let mut out = Vec::new();
    let failed: Vec<&str> = result.rows.iter().filter(|r| !r.is_ok()).map(|r| r.run_id.as_str()).collect();
    out.push(check("all runs completed", failed.is_empty(), format!("{} failed: {failed:?}", failed.len())));
    let accepted: Vec<&RunRecord> = result
        .rows
        .iter()
        .filter(|r| r.is_ok() && r.low_confidence == Some(false))
        .collect();
    let worst = accepted.iter().filter_map(|r| r.little_error()).fold(0.0, f64::max);
    out.push(check(
        "little's law within 5%",
        worst < 0.05,
        format!("worst relative error {worst:.4} over {} runs", accepted.len()),
    ));
    let dirty = result.rows.iter().filter(|r| r.audit_clean == Some(false)).count();
    out.push(check("invariant audits clean", dirty == 0, format!("{dirty} runs with violations")));

    match result.campaign.name.as_str() {
        "urs-r-sweep" => {
            let s = &result.summaries;
            if let Some(last) = s.last() {
                out.push(check(
                    "ratio at smallest r in [0.95, 1.35]",
                    (0.95..=1.35).contains(&last.ratio),
                    format!("r = {}: ratio {:.4} ± {:.4}", last.r, last.ratio, last.ratio_ci),
                ));
            }
            let monotone = s.windows(2).all(|w| w[1].ratio <= w[0].ratio + w[0].ratio_ci + w[1].ratio_ci);
            let seq: Vec<String> = s.iter().map(|p| format!("{:.3}", p.ratio)).collect();
            out.push(check("ratio nonincreasing in r within CI", monotone, seq.join(" ")));
        }
        "bts-eps-sweep" => {
            let s = &result.summaries;
            let bad: Vec<String> = s
                .iter()
                .filter(|p| !(0.95..=1.4).contains(&p.ratio))
                .map(|p| format!("eps {}: {:.3}", p.sweep_value, p.ratio))
                .collect();
            let seq: Vec<String> = s.iter().map(|p| format!("{:.3}", p.ratio)).collect();
            out.push(check(
                "T/bound in [0.95, 1.4] at every eps",
                bad.is_empty(),
                format!("ratios {}", seq.join(" ")),
            ));
            let decreasing = s.windows(2).all(|w| w[1].bound_value < w[0].bound_value);
            out.push(check("bound strictly decreasing in eps", decreasing, ""));
            let mut worst: f64 = 0.0;
            for p in s.iter().filter(|p| p.sweep_value > 0.0) {
                let Ok(phi) = PiecewiseUniformDensity::epsilon_family(p.sweep_value) else {
                    continue;
                };
                let means = p.region_means();
                let levels: Vec<f64> = phi.regions().iter().map(|r| r.level).collect();
                let predicted = (levels[1] / levels[0]).sqrt();
                worst = worst.max((means[0] / means[1] / predicted - 1.0).abs());
            }
            out.push(check(
                "region means scale as mu^(-1/2) within 15%",
                worst <= 0.15,
                format!("worst relative deviation {worst:.4}"),
            ));
        }
        "heavy-load" => {
            let beta2 = BHH_BETA * BHH_BETA;
            if let Some(p) = result.point("uttsp-uniform-m1", 100.0) {
                let k = p.k.unwrap_or(1) as f64;
                let target = (1.0 + 1.0 / k) * beta2 / 2.0;
                out.push(check(
                    "UTTSP T/lambda within 25% of (1+1/K) beta^2/2",
                    within(p.t_over_lambda, target, 0.25),
                    format!("{:.4} vs {target:.4}", p.t_over_lambda),
                ));
                let phase = beta2 * 100.0;
                out.push(check(
                    "UTTSP phase length within 25% of beta^2 lambda",
                    within(p.phase_length_mean, phase, 0.25),
                    format!("{:.3} vs {phase:.3}", p.phase_length_mean),
                ));
            }
            if let Some(p) = result.point("bttsp-half-m1", 100.0) {
                let phi = RunConfig {
                    density: half_split_density(),
                    ..RunConfig::new(PolicyKind::Bttsp, 100.0, 0.3, 1.0)
                }
                .density()
                .expect("preset density is valid");
                let target = heavy_biased(&phi, 1.0, 1, 1.0);
                out.push(check(
                    "BTTSP T/lambda within 25% of the biased bound",
                    within(p.t_over_lambda, target, 0.25),
                    format!("{:.4} vs {target:.4}", p.t_over_lambda),
                ));
            }
            if let (Some(a), Some(b)) = (result.point("uttsp-uniform-m1", 100.0), result.point("uttsp-uniform-m2", 100.0)) {
                let scaled = b.t_sys_mean / (a.t_sys_mean / 4.0);
                out.push(check(
                    "UTTSP m=2 within 30% of a quarter of m=1",
                    (scaled - 1.0).abs() <= 0.30,
                    format!("T(m=2) / (T(m=1)/4) = {scaled:.4}"),
                ));
            }
        }
        _ => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            Campaign::preset(name).unwrap().validate().unwrap();
        }
        assert!(Campaign::preset("nope").is_none());
        assert_eq!(Campaign::heavy_load().specs.len(), 8);
    }

    #[test]
    fn sweeps_must_be_monotone_with_two_points() {
        let mut spec = Campaign::urs_r_sweep().specs.remove(0);
        spec.sweep.values = vec![0.1];
        assert!(spec.validate().is_err());
        spec.sweep.values = vec![0.1, 0.05, 0.07];
        assert!(spec.validate().is_err());
        spec.sweep.values = vec![0.05, 0.1];
        spec.validate().unwrap();
        spec.sweep.parameter = SweepParam::Agents;
        spec.sweep.values = vec![1.0, 2.5];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn epsilon_sweep_sets_density() {
        let spec = &Campaign::bts_eps_sweep().specs[0];
        let configs = spec.point_configs().unwrap();
        assert_eq!(configs[2].density, DensitySpec::Epsilon { epsilon: 0.3 });
        assert!(configs.iter().all(|c| c.replications == 10));
    }

    #[test]
    fn small_campaign_is_ordered_and_reproducible() {
        let c = Campaign::urs_r_sweep().with_replications(2).with_horizon(100.0);
        let c = Campaign {
            specs: vec![CampaignSpec {
                sweep: Sweep {
                    parameter: SweepParam::Radius,
                    values: vec![0.2, 0.1],
                },
                ..c.specs[0].clone()
            }],
            ..c
        };
        let a = run_campaign(&c).unwrap();
        let ids: Vec<&str> = a.rows.iter().map(|r| r.run_id.as_str()).collect();
        assert_eq!(ids, ["urs-r-sweep-0-0", "urs-r-sweep-0-1", "urs-r-sweep-1-0", "urs-r-sweep-1-1"]);
        assert_ne!(a.rows[0].seed, a.rows[1].seed);
        assert_eq!(a.rows[0].seed, a.rows[2].seed);
        assert_eq!(a.summaries.len(), 2);
        let b = run_campaign(&c).unwrap();
        assert_eq!(a.rows_csv().unwrap(), b.rows_csv().unwrap());
        assert_eq!(a.metadata_json().unwrap(), b.metadata_json().unwrap());
    }

    #[test]
    fn mean_ci_matches_t_interval() {
        let (m, h) = mean_ci(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // t(0.975, 2) = 4.3027
        assert!((h - 4.302653 / 3f64.sqrt()).abs() < 1e-5);
    }
}
