//! Oracle ideal ratio mask and the oracle-mask GEV upper bound.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, Doa};
use crate::beamform::{self, EnhanceParams};
use crate::error::{Error, Result};
use crate::maskgen::TfMask;
use crate::stft::{self, MultichannelSpectrogram};
use crate::wavio::AudioClip;

/// How the noise-side mask is derived from the target IRM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMaskRule {
    /// `1 − IRM(X, N)`
    #[default]
    Complement,
    /// `IRM(N, X)`, the ratio mask of the interference itself
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrmOptions {
    /// Exponent applied to the power ratio `|X|²/(|X|²+|N|²)`.
    pub exponent: f64,
    pub noise_rule: NoiseMaskRule,
}

impl Default for IrmOptions {
    fn default() -> Self {
        Self {
            exponent: 0.5,
            noise_rule: NoiseMaskRule::Complement,
        }
    }
}

/// `IRM(t,f) = (|X|² / (|X|² + |N|²))^0.5`, 0 where both are zero.
pub fn ideal_ratio_mask(target: &MultichannelSpectrogram, interference: &MultichannelSpectrogram) -> Result<TfMask> {
    ideal_ratio_mask_with(target, interference, 0.5)
}

pub fn ideal_ratio_mask_with(
    target: &MultichannelSpectrogram,
    interference: &MultichannelSpectrogram,
    exponent: f64,
) -> Result<TfMask> {
    if target.num_channels() != 1 || interference.num_channels() != 1 {
        return Err(Error::Shape("ratio masks take single-channel spectrograms".into()));
    }
    if (target.num_frames(), target.num_bins()) != (interference.num_frames(), interference.num_bins()) {
        return Err(Error::Shape(format!(
            "target is {}x{}, interference is {}x{}",
            target.num_frames(),
            target.num_bins(),
            interference.num_frames(),
            interference.num_bins()
        )));
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::param("exponent", format!("{exponent} must be positive")));
    }
    let x = target.channel(0);
    let n = interference.channel(0);
    let values = Array2::from_shape_fn(x.dim(), |(t, f)| {
        let px = x[[t, f]].norm_sqr();
        let pn = n[[t, f]].norm_sqr();
        let total = px + pn;
        if total > 0.0 {
            (px / total).powf(exponent).clamp(0.0, 1.0)
        } else {
            0.0
        }
    });
    TfMask::soft(values)
}

/// Target and noise soft masks for the oracle beamformer.
pub fn oracle_masks(
    target: &MultichannelSpectrogram,
    interference: &MultichannelSpectrogram,
    options: &IrmOptions,
) -> Result<(TfMask, TfMask)> {
    let irm = ideal_ratio_mask_with(target, interference, options.exponent)?;
    let noise = match options.noise_rule {
        NoiseMaskRule::Complement => TfMask::soft(irm.values().mapv(|v| 1.0 - v))?,
        NoiseMaskRule::Swapped => ideal_ratio_mask_with(interference, target, options.exponent)?,
    };
    Ok((irm, noise))
}

/// GEV-BAN driven by masks computed from the clean reverberant images at
/// the reference channel.
pub fn oracle_gev_enhance(
    mixture: &AudioClip,
    target_ref: &AudioClip,
    interference_ref: &AudioClip,
    geometry: &ArrayGeometry,
    doa: &Doa,
    params: &EnhanceParams,
    options: &IrmOptions,
) -> Result<AudioClip> {
    if target_ref.len() != mixture.len() || interference_ref.len() != mixture.len() {
        return Err(Error::Shape(format!(
            "references ({}, {}) not aligned with the {}-sample mixture",
            target_ref.len(),
            interference_ref.len(),
            mixture.len()
        )));
    }
    let reference = params.reference_channel;
    // mono references are taken as already being the reference channel
    let pick = |clip: &AudioClip| -> Result<AudioClip> {
        match clip.num_channels() {
            1 => Ok(clip.clone()),
            n if reference < n => Ok(clip.channel_clip(reference)),
            n => Err(Error::Input(format!("reference has {n} channels, no channel {reference}"))),
        }
    };
    let (spec, steering) = beamform::prepare(mixture, geometry, doa, params)?;
    let xs = stft::stft(&pick(target_ref)?, &params.stft)?;
    let ns = stft::stft(&pick(interference_ref)?, &params.stft)?;
    let (mx, mn) = oracle_masks(&xs, &ns, options)?;
    let (z, _) = beamform::gev_from_masks(&spec, &steering, &mx, &mn, &params.gev, reference)?;
    stft::istft(&z)
}
