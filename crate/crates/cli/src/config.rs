//! Declarative run configuration: strict JSON schema, flag overrides, and
//! resolution into the core decode configuration.
//!
//! Unknown keys are rejected everywhere. `--set path=value` overrides edit
//! the JSON document before final parsing, so overrides go through the same
//! validation as file contents.

use std::path::{Path, PathBuf};

use knndiv_core::decode::{DecodeConfig, DecoderKind};
use knndiv_core::perturb::{DistanceStats, NoiseParams, PerturbConfig};
use knndiv_core::scoring::ScoreConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub model: ModelParams,
    #[serde(default)]
    pub datastore: DatastoreParams,
    pub score: ScoreConfig,
    pub perturb: PerturbSpec,
    pub decode: DecodeParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    pub model: PathBuf,
    pub datastore: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<PathBuf>,
    pub candidates: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: f64,
    pub embed_dim: usize,
    pub embed_seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatastoreParams {
    /// Clusters for the inverted-file index; 0 disables the index.
    #[serde(default)]
    pub n_clusters: usize,
    #[serde(default = "default_kmeans_iters")]
    pub kmeans_iters: usize,
    #[serde(default)]
    pub kmeans_seed: u64,
    /// Probed clusters at query time (used when an index is configured).
    #[serde(default = "default_n_probe")]
    pub n_probe: usize,
}

fn default_kmeans_iters() -> usize {
    25
}

fn default_n_probe() -> usize {
    4
}

impl Default for DatastoreParams {
    fn default() -> Self {
        DatastoreParams {
            n_clusters: 0,
            kmeans_iters: default_kmeans_iters(),
            kmeans_seed: 0,
            n_probe: default_n_probe(),
        }
    }
}

/// Perturbation selection as written in config files. Static noise comes in
/// two spellings: direct magnitudes, or multipliers of validation-set
/// distance statistics resolved at decode time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbSpec {
    None,
    StaticNoise { h_m: f64, h_s: f64 },
    StaticNoiseFromStats { h_m_mult: f64, h_s_mult: f64 },
    AdaptiveNoise { h_m_mult: f64, h_s_mult: f64 },
    Randomize { h: f64 },
}

impl PerturbSpec {
    /// True when resolving this spec needs validation-set distance
    /// statistics.
    pub fn needs_stats(&self) -> bool {
        matches!(self, PerturbSpec::StaticNoiseFromStats { .. })
    }

    pub fn resolve(&self, stats: Option<&DistanceStats>) -> Result<PerturbConfig, CliError> {
        Ok(match *self {
            PerturbSpec::None => PerturbConfig::None,
            PerturbSpec::StaticNoise { h_m, h_s } => PerturbConfig::StaticNoise { h_m, h_s },
            PerturbSpec::StaticNoiseFromStats { h_m_mult, h_s_mult } => {
                let stats = stats.ok_or_else(|| {
                    CliError::config("static_noise_from_stats needs validation statistics")
                })?;
                let params = NoiseParams::from_stats(stats, h_m_mult, h_s_mult);
                PerturbConfig::StaticNoise {
                    h_m: params.m,
                    h_s: params.s,
                }
            }
            PerturbSpec::AdaptiveNoise { h_m_mult, h_s_mult } => {
                PerturbConfig::AdaptiveNoise { h_m_mult, h_s_mult }
            }
            PerturbSpec::Randomize { h } => PerturbConfig::Randomize { h },
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeParams {
    pub decoder: DecoderKind,
    #[serde(default = "default_beam_size")]
    pub beam_size: usize,
    #[serde(default = "default_dbs_groups")]
    pub dbs_groups: usize,
    #[serde(default = "default_diversity_strength")]
    pub diversity_strength: f64,
    #[serde(default = "default_nucleus_p")]
    pub nucleus_p: f64,
    pub k: usize,
    pub max_len: usize,
    pub seed: u64,
}

fn default_beam_size() -> usize {
    20
}

fn default_dbs_groups() -> usize {
    20
}

fn default_diversity_strength() -> f64 {
    0.5
}

fn default_nucleus_p() -> f64 {
    0.9
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        apply_overrides(&mut value, overrides)?;
        let config: RunConfig = serde_json::from_value(value)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_value(
        mut value: serde_json::Value,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        apply_overrides(&mut value, overrides)?;
        let config: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.model.alpha.is_nan() || self.model.alpha <= 0.0 {
            return Err(CliError::config("model.alpha must be > 0"));
        }
        if self.model.embed_dim == 0 {
            return Err(CliError::config("model.embed_dim must be >= 1"));
        }
        if self.datastore.n_clusters > 0 && self.datastore.n_probe == 0 {
            return Err(CliError::config("datastore.n_probe must be >= 1"));
        }
        // decode-time ranges are enforced by the core config; check early
        // with a placeholder perturbation so errors name the config key
        let decode = DecodeConfig {
            decoder: self.decode.decoder,
            beam_size: self.decode.beam_size,
            dbs_groups: self.decode.dbs_groups,
            diversity_strength: self.decode.diversity_strength,
            nucleus_p: self.decode.nucleus_p,
            k: self.decode.k,
            score: self.score,
            perturb: self.perturb.resolve(Some(&DistanceStats {
                mean: 0.0,
                std: 0.0,
                d_max: 0.0,
                d_std: 0.0,
            }))?,
            max_len: self.decode.max_len,
            seed: self.decode.seed,
        };
        decode
            .validate()
            .map_err(|e| CliError::config(format!("decode: {e}")))
    }

    /// Resolves the full decode configuration, given validation distance
    /// statistics when the perturbation spec needs them.
    pub fn decode_config(&self, stats: Option<&DistanceStats>) -> Result<DecodeConfig, CliError> {
        let cfg = DecodeConfig {
            decoder: self.decode.decoder,
            beam_size: self.decode.beam_size,
            dbs_groups: self.decode.dbs_groups,
            diversity_strength: self.decode.diversity_strength,
            nucleus_p: self.decode.nucleus_p,
            k: self.decode.k,
            score: self.score,
            perturb: self.perturb.resolve(stats)?,
            max_len: self.decode.max_len,
            seed: self.decode.seed,
        };
        cfg.validate().map_err(CliError::from)?;
        Ok(cfg)
    }
}

/// Applies `path=value` overrides onto the raw JSON document. Values parse
/// as JSON when possible and fall back to strings.
pub fn apply_overrides(
    value: &mut serde_json::Value,
    overrides: &[String],
) -> Result<(), CliError> {
    for entry in overrides {
        let (path, raw) = entry
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override '{entry}' is not path=value")))?;
        let new: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut node = &mut *value;
        let segments: Vec<&str> = path.split('.').collect();
        let last = segments.len() - 1;
        for (i, segment) in segments.iter().enumerate() {
            let obj = match node {
                serde_json::Value::Object(map) => map,
                _ => {
                    return Err(CliError::config(format!(
                        "override path '{path}' crosses a non-object"
                    )))
                }
            };
            if i == last {
                obj.insert(segment.to_string(), new.clone());
                break;
            }
            node = obj
                .entry(segment.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Hyperparameter sweep: a base configuration, axes over scalar decode-time
/// fields, and replicate seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: serde_json::Value,
    pub axes: Vec<SweepAxis>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_max_points() -> usize {
    512
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dot path of a scalar field, e.g. `perturb.h` or `score.lambda`.
    pub field: String,
    pub values: Vec<serde_json::Value>,
}

/// Fields a sweep may vary. Model and datastore parameters are fixed per
/// sweep because artifacts are built once from the base configuration.
const SWEEPABLE_PREFIXES: [&str; 3] = ["score.", "perturb.", "decode."];

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read sweep spec {}: {e}", path.display()))
        })?;
        let spec: SweepSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("sweep spec {}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::config("sweep needs at least one seed"));
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(CliError::config(format!(
                    "axis '{}' has no values",
                    axis.field
                )));
            }
            if !SWEEPABLE_PREFIXES.iter().any(|p| axis.field.starts_with(p)) {
                return Err(CliError::config(format!(
                    "axis '{}' is not sweepable; use score.*, perturb.*, or decode.*",
                    axis.field
                )));
            }
        }
        let points = self.point_count();
        if points == 0 {
            return Err(CliError::config("sweep has zero points"));
        }
        if points * self.seeds.len() > self.max_points {
            return Err(CliError::config(format!(
                "sweep size {} exceeds cap {}",
                points * self.seeds.len(),
                self.max_points
            )));
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Materializes every grid point as `(axis values, RunConfig)`, seeds
    /// applied separately by the runner.
    pub fn points(&self) -> Result<Vec<(Vec<serde_json::Value>, serde_json::Value)>, CliError> {
        let mut points = Vec::with_capacity(self.point_count());
        let mut indices = vec![0usize; self.axes.len()];
        loop {
            let mut doc = self.base.clone();
            let mut coords = Vec::with_capacity(self.axes.len());
            for (axis, &i) in self.axes.iter().zip(indices.iter()) {
                let value = &axis.values[i];
                coords.push(value.clone());
                apply_overrides(
                    &mut doc,
                    &[format!(
                        "{}={}",
                        axis.field,
                        serde_json::to_string(value).unwrap()
                    )],
                )?;
            }
            points.push((coords, doc));
            // odometer increment, last axis fastest
            let mut pos = self.axes.len();
            loop {
                if pos == 0 {
                    return Ok(points);
                }
                pos -= 1;
                indices[pos] += 1;
                if indices[pos] < self.axes[pos].values.len() {
                    break;
                }
                indices[pos] = 0;
            }
        }
    }
}
