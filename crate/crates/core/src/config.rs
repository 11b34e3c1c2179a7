//! Run configuration shared by the command-line tools.
//!
//! A config is a JSON object; every field is optional and falls back to the
//! defaults below. The path can also come from the `KISSGEV_CONFIG`
//! environment variable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::beamform::{EnhanceParams, GevParams, Postfilter};
use crate::error::{Error, Result};
use crate::maskgen;
use crate::metrics::{Method, Metric};
use crate::oracle::IrmOptions;
use crate::roomsim::ScenarioRanges;
use crate::stft::StftConfig;

pub const CONFIG_ENV: &str = "KISSGEV_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSettings {
    pub gamma: usize,
    pub alpha: f64,
}

impl Default for MaskSettings {
    fn default() -> Self {
        Self { gamma: 100, alpha: 25.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformSettings {
    pub loading: f64,
    pub postfilter: Postfilter,
    pub reference_channel: usize,
}

impl Default for BeamformSettings {
    fn default() -> Self {
        Self {
            loading: GevParams::default().loading,
            postfilter: Postfilter::default(),
            reference_channel: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub stft: StftConfig,
    pub maskgen: MaskSettings,
    pub beamform: BeamformSettings,
    pub irm: IrmOptions,
    /// Array geometry JSON; the built-in 8-microphone circular array when
    /// absent.
    pub geometry: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub metric: Metric,
    pub seed: u64,
    /// Scenarios drawn by `simulate`.
    pub count: usize,
    pub ranges: ScenarioRanges,
    pub corpus: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Worker threads for batch commands; 0 uses all cores.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            maskgen: MaskSettings::default(),
            beamform: BeamformSettings::default(),
            irm: IrmOptions::default(),
            geometry: None,
            methods: Method::ALL.to_vec(),
            metric: Metric::default(),
            seed: 0,
            count: 60,
            ranges: ScenarioRanges::default(),
            corpus: None,
            output: None,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })
    }

    /// Loads `explicit`, else the file named by `KISSGEV_CONFIG`, else the
    /// defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::from_json_file(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::from_json_file(PathBuf::from(p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn enhance_params(&self) -> EnhanceParams {
        EnhanceParams {
            stft: self.stft,
            gamma: self.maskgen.gamma,
            alpha: self.maskgen.alpha,
            gev: GevParams {
                loading: self.beamform.loading,
                postfilter: self.beamform.postfilter,
                ..GevParams::default()
            },
            reference_channel: self.beamform.reference_channel,
        }
    }

    pub fn load_geometry(&self) -> Result<ArrayGeometry> {
        match &self.geometry {
            Some(p) => ArrayGeometry::from_json_file(p),
            None => Ok(ArrayGeometry::respeaker_like()),
        }
    }

    /// Checks every field against the preconditions of the module that
    /// consumes it. Errors name the offending field.
    pub fn validate(&self, unchecked: bool) -> Result<()> {
        self.stft
            .validate()
            .map_err(|e| Error::config("stft", e.to_string()))?;
        maskgen::make_filterbank(self.stft.frame_size, self.maskgen.gamma)
            .map_err(|e| Error::config("maskgen.gamma", e.to_string()))?;
        if !(self.maskgen.alpha > 0.0 && self.maskgen.alpha < 50.0) {
            return Err(Error::config("maskgen.alpha", format!("{} outside (0, 50)", self.maskgen.alpha)));
        }
        if !(self.beamform.loading >= 0.0 && self.beamform.loading.is_finite()) {
            return Err(Error::config("beamform.loading", "must be finite and >= 0"));
        }
        if !(self.irm.exponent > 0.0 && self.irm.exponent.is_finite()) {
            return Err(Error::config("irm.exponent", "must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "no methods selected"));
        }
        if let Metric::FilteredSdr { taps: 0 } = self.metric {
            return Err(Error::config("metric.taps", "must be positive"));
        }
        self.ranges.validate(unchecked)?;
        if let Some(g) = &self.geometry {
            if !g.is_file() {
                return Err(Error::config("geometry", format!("{} does not exist", g.display())));
            }
        }
        Ok(())
    }
}
