use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::{ArrayConfig, SceneConfig};
use crate::geometry::Point3;
use crate::imaging::VoxelGridSpec;
use crate::metrics::DEFAULT_THRESHOLD;
use crate::proposal::{CONFIDENCE_PERCENTILE, DEFAULT_NUM_CANDIDATES};
use crate::selection::SelectionConfig;
use crate::synth::VisibilityParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    pub num_candidates: usize,
    /// Iso-band half-width in meters; half the voxel spacing when unset.
    pub delta: Option<f64>,
    pub confidence_percentile: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            num_candidates: DEFAULT_NUM_CANDIDATES,
            delta: None,
            confidence_percentile: CONFIDENCE_PERCENTILE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompleterKind {
    #[default]
    Baseline,
    External,
}

impl std::str::FromStr for CompleterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "external" => Ok(Self::External),
            other => Err(Error::Config(format!("unknown completer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompleterConfig {
    pub kind: CompleterKind,
    pub exchange_dir: Option<PathBuf>,
    pub timeout_secs: f64,
}

impl Default for CompleterConfig {
    fn default() -> Self {
        Self {
            kind: CompleterKind::Baseline,
            exchange_dir: None,
            timeout_secs: 120.0,
        }
    }
}

/// Ranges that corpus generation draws visibility parameters from, per object.
/// Angles are radians; a range with equal ends is a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Points sampled on each mesh before masking.
    pub points: usize,
    pub tau: [f64; 2],
    pub tau_h: [f64; 2],
    pub tau_v: [f64; 2],
    pub noise_sigma: [f64; 2],
    pub dropout_fraction: f64,
    /// Array in unit-sphere coordinates that the masks are computed against.
    pub array: ArrayConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            points: 8192,
            tau: [20f64.to_radians(), 60f64.to_radians()],
            tau_h: [20f64.to_radians(), 90f64.to_radians()],
            tau_v: [20f64.to_radians(), 90f64.to_radians()],
            noise_sigma: [0.0, 0.02],
            dropout_fraction: 0.0,
            array: ArrayConfig {
                center: [0.0, 0.0, 3.0],
                extent: [2.0, 2.0],
                count: [4, 4],
            },
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::Config("corpus points must be positive".into()));
        }
        for (name, [lo, hi]) in [
            ("tau", self.tau),
            ("tau_h", self.tau_h),
            ("tau_v", self.tau_v),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(lo <= hi) {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        // Both ends must be valid parameter sets.
        for pick in [0, 1] {
            self.visibility_at([pick; 4]).validate().map_err(config_error)?;
        }
        self.array.build().map(drop)
    }

    /// Visibility parameters taking end `pick[i]` of each range.
    fn visibility_at(&self, pick: [usize; 4]) -> VisibilityParams {
        VisibilityParams {
            tau: self.tau[pick[0]],
            tau_h: self.tau_h[pick[1]],
            tau_v: self.tau_v[pick[2]],
            noise_sigma: self.noise_sigma[pick[3]],
            dropout_fraction: self.dropout_fraction,
            ..VisibilityParams::default()
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::Config(m),
        other => other,
    }
}

/// Every tunable of a reconstruction experiment, stored as one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Distance threshold for precision and recall, unit-sphere units.
    pub metric_threshold: f64,
    pub grid: VoxelGridSpec,
    pub proposal: ProposalConfig,
    pub completer: CompleterConfig,
    pub selection: SelectionConfig,
    /// Simulated acquisition used by `simulate` and the benchmark fixtures.
    pub scene: SceneConfig,
    pub visibility: VisibilityParams,
    pub corpus: CorpusConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            metric_threshold: DEFAULT_THRESHOLD,
            grid: VoxelGridSpec::centered(Point3::origin(), 0.004, [48, 48, 48])
                .expect("default grid is valid"),
            proposal: ProposalConfig::default(),
            completer: CompleterConfig::default(),
            selection: SelectionConfig::default(),
            scene: SceneConfig::default(),
            visibility: VisibilityParams::default(),
            corpus: CorpusConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.root())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.proposal;
        if p.num_candidates == 0 {
            return Err(Error::Config("num_candidates must be at least 1".into()));
        }
        if let Some(delta) = p.delta {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::Config(format!("delta must be positive, got {delta}")));
            }
        }
        if !(p.confidence_percentile > 0.0 && p.confidence_percentile <= 100.0) {
            return Err(Error::Config(format!(
                "confidence percentile must lie in (0, 100], got {}",
                p.confidence_percentile
            )));
        }
        if !(self.metric_threshold > 0.0 && self.metric_threshold.is_finite()) {
            return Err(Error::Config("metric threshold must be positive".into()));
        }
        if !(self.completer.timeout_secs > 0.0 && self.completer.timeout_secs.is_finite()) {
            return Err(Error::Config("completer timeout must be positive".into()));
        }
        if self.completer.kind == CompleterKind::External && self.completer.exchange_dir.is_none()
        {
            return Err(Error::Config(
                "the external completer needs an exchange directory".into(),
            ));
        }
        if !(self.scene.specular_sigma > 0.0) || self.scene.points == 0 || self.scene.snr_db.is_nan() {
            return Err(Error::Config("scene needs scatterers and a positive sigma".into()));
        }
        self.scene.array.build()?;
        self.selection.validate()?;
        self.visibility.validate().map_err(config_error)?;
        self.corpus.validate()
    }
}
