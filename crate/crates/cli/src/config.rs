//! Run configuration: one TOML file with flat tables and every default baked in.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use softqd::baselines::MapElitesConfig;
use softqd::domains::{DescriptorScaling, Domain};
use softqd::squad::{KnnSpace, SquadConfig};
use softqd::theory::SuiteCounts;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Squad,
    MapElites,
    GaMe,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Squad => "squad",
            Algorithm::MapElites => "map_elites",
            Algorithm::GaMe => "ga_me",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    #[default]
    ChunkMean,
    ScaledChunkSum,
}

impl From<Scaling> for DescriptorScaling {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::ChunkMean => DescriptorScaling::ChunkMean,
            Scaling::ScaledChunkSum => DescriptorScaling::ScaledChunkSum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SquadSection {
    pub population_size: usize,
    pub batch_size: usize,
    pub neighbors: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Defaults per domain: lp-4 0.1, lp-8 0.5, lp-16 1.0, hill 0.1.
    pub gamma_sq: Option<f64>,
    pub logit_clip_eps: f64,
    pub quality_floor: f64,
    pub transform_enabled: bool,
    pub knn_space: KnnSpace,
    /// Defaults to the domain's search box.
    pub init_box: Option<[f64; 2]>,
}

impl Default for SquadSection {
    fn default() -> Self {
        let d = SquadConfig::default();
        Self {
            population_size: d.population_size,
            batch_size: d.batch_size,
            neighbors: d.neighbors,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            gamma_sq: None,
            logit_clip_eps: d.logit_clip_eps,
            quality_floor: d.quality_floor,
            transform_enabled: d.transform_enabled,
            knn_space: d.knn_space,
            init_box: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapElitesSection {
    pub archive_cells: usize,
    pub batch: usize,
    /// Defaults to 1% of the init box width.
    pub sigma_iso: Option<f64>,
    pub sigma_line: f64,
    /// Defaults to 0.05 for ga_me and 0 for map_elites.
    pub grad_step: Option<f64>,
    /// Raised to the SQUAD budget `N (T_max + 1)` when lower or unset.
    pub total_evals: Option<usize>,
}

impl Default for MapElitesSection {
    fn default() -> Self {
        let d = MapElitesConfig::default();
        Self {
            archive_cells: d.archive_cells,
            batch: d.batch,
            sigma_iso: None,
            sigma_line: d.sigma_line,
            grad_step: None,
            total_evals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub seed: u64,
    pub sandwich: usize,
    pub monotone_add: usize,
    pub monotone_quality: usize,
    pub submodular: usize,
    pub limit: usize,
    pub samples: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        let c = SuiteCounts::default();
        Self {
            seed: 0,
            sandwich: c.sandwich,
            monotone_add: c.monotone_add,
            monotone_quality: c.monotone_quality,
            submodular: c.submodular,
            limit: c.limit,
            samples: c.samples,
        }
    }
}

impl CheckSection {
    pub fn counts(&self) -> SuiteCounts {
        SuiteCounts {
            sandwich: self.sandwich,
            monotone_add: self.monotone_add,
            monotone_quality: self.monotone_quality,
            submodular: self.submodular,
            limit: self.limit,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: String,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub precision: Precision,
    pub descriptor_scaling: Scaling,
    /// Cells of the CVT used for QD Score and coverage.
    pub metrics_cells: usize,
    /// Vendi kernel bandwidth; defaults to d / 6.
    pub sigma_v_sq: Option<f64>,
    /// Epochs between metric rows (the first and last epoch are always written).
    pub metric_interval: usize,
    pub cvt_seed: u64,
    pub cvt_samples: usize,
    pub cvt_iters: usize,
    /// Load metric centroids from this JSON file instead of building them.
    pub centroids: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub squad: SquadSection,
    pub map_elites: MapElitesSection,
    pub check: CheckSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: "lp-4".into(),
            algorithm: Algorithm::Squad,
            seeds: vec![1, 2, 3],
            precision: Precision::F64,
            descriptor_scaling: Scaling::ChunkMean,
            metrics_cells: 512,
            sigma_v_sq: None,
            metric_interval: 100,
            cvt_seed: 0,
            cvt_samples: 100_000,
            cvt_iters: 100,
            centroids: None,
            out_dir: PathBuf::from("runs"),
            squad: SquadSection::default(),
            map_elites: MapElitesSection::default(),
            check: CheckSection::default(),
        }
    }
}

/// Fully resolved settings for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub domain: Domain,
    pub squad: SquadConfig,
    pub map_elites: MapElitesConfig,
    pub sigma_v_sq: f64,
}

pub fn default_gamma_sq(domain: Domain) -> f64 {
    match domain {
        Domain::LinearProjection { behavior_dim: 8 } => 0.5,
        Domain::LinearProjection { behavior_dim: 16 } => 1.0,
        _ => 0.1,
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        toml::from_str(s).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates every field and fills domain-dependent defaults.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let usage = |field: &str, msg: String| CliError::Usage(format!("{field}: {msg}"));
        let domain: Domain = self
            .domain
            .parse()
            .map_err(|e: softqd::Error| usage("domain", e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(usage("seeds", "at least one seed is required".into()));
        }
        if self.metrics_cells == 0 {
            return Err(usage("metrics_cells", "must be at least 1".into()));
        }
        if self.metric_interval == 0 {
            return Err(usage("metric_interval", "must be at least 1".into()));
        }
        if self.cvt_samples < self.metrics_cells {
            return Err(usage("cvt_samples", "must be at least metrics_cells".into()));
        }
        let d = domain.behavior_dim();
        let sigma_v_sq = self.sigma_v_sq.unwrap_or(d as f64 / 6.0);
        if !(sigma_v_sq > 0.0 && sigma_v_sq.is_finite()) {
            return Err(usage("sigma_v_sq", "must be positive".into()));
        }

        let s = &self.squad;
        let init_box = s.init_box.map(|[a, b]| (a, b)).unwrap_or_else(|| domain.init_box());
        let squad = SquadConfig {
            population_size: s.population_size,
            batch_size: s.batch_size,
            neighbors: s.neighbors,
            epochs: s.epochs,
            learning_rate: s.learning_rate,
            gamma_sq: s.gamma_sq.unwrap_or_else(|| default_gamma_sq(domain)),
            logit_clip_eps: s.logit_clip_eps,
            quality_floor: s.quality_floor,
            transform_enabled: s.transform_enabled,
            knn_space: s.knn_space,
            init_box,
        };
        squad.validate().map_err(|e| usage("squad", e.to_string()))?;

        let m = &self.map_elites;
        let budget = squad.population_size * (squad.epochs + 1);
        let total_evals = m.total_evals.unwrap_or(0).max(budget);
        if m.total_evals.is_some_and(|t| t < budget) && self.algorithm != Algorithm::Squad {
            log::warn!("map_elites.total_evals raised to the SQUAD budget of {budget} evaluations");
        }
        let default_step = if self.algorithm == Algorithm::GaMe { 0.05 } else { 0.0 };
        let map_elites = MapElitesConfig {
            archive_cells: m.archive_cells,
            batch: m.batch,
            sigma_iso: m.sigma_iso.unwrap_or(0.01 * (init_box.1 - init_box.0)),
            sigma_line: m.sigma_line,
            total_evals,
            grad_step: m.grad_step.unwrap_or(default_step),
            init_box,
        };
        if self.algorithm != Algorithm::Squad {
            map_elites.validate().map_err(|e| usage("map_elites", e.to_string()))?;
        }
        Ok(Resolved {
            domain,
            squad,
            map_elites,
            sigma_v_sq,
        })
    }
}

/// Parameters that `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    GammaSq,
    BatchSize,
    Neighbors,
    PopulationSize,
    TransformEnabled,
}

impl FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "gamma_sq" => SweepParam::GammaSq,
            "batch_size" => SweepParam::BatchSize,
            "neighbors" => SweepParam::Neighbors,
            "population_size" => SweepParam::PopulationSize,
            "transform_enabled" => SweepParam::TransformEnabled,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown sweep parameter '{other}' (expected gamma_sq, batch_size, neighbors, population_size, transform_enabled)"
                )))
            }
        })
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::GammaSq => "gamma_sq",
            SweepParam::BatchSize => "batch_size",
            SweepParam::Neighbors => "neighbors",
            SweepParam::PopulationSize => "population_size",
            SweepParam::TransformEnabled => "transform_enabled",
        })
    }
}

impl SweepParam {
    /// Copy of `base` with this parameter set from its textual value.
    pub fn apply(&self, base: &RunConfig, value: &str) -> CliResult<RunConfig> {
        let bad = |kind: &str| CliError::Usage(format!("{self}: '{value}' is not a valid {kind}"));
        let mut cfg = base.clone();
        match self {
            SweepParam::GammaSq => cfg.squad.gamma_sq = Some(value.parse().map_err(|_| bad("number"))?),
            SweepParam::BatchSize => cfg.squad.batch_size = value.parse().map_err(|_| bad("integer"))?,
            SweepParam::Neighbors => cfg.squad.neighbors = value.parse().map_err(|_| bad("integer"))?,
            SweepParam::PopulationSize => cfg.squad.population_size = value.parse().map_err(|_| bad("integer"))?,
            SweepParam::TransformEnabled => cfg.squad.transform_enabled = value.parse().map_err(|_| bad("boolean"))?,
        }
        Ok(cfg)
    }
}
