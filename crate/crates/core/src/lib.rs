//! Training-free, DoA-informed GEV beamforming for multichannel speech
//! enhancement.
//!
//! The processing chain is
//!
//! ```text
//! stft -> steering -> power_ratio -> thresholds -> binary_masks
//!      -> estimate_scm (target, noise) -> solve_gev -> ban_gain
//!      -> apply_beamformer -> istft
//! ```
//!
//! A two-band filterbank compares the power of a delay-and-sum beam steered
//! at the target against the average channel power. The extremes of that
//! ratio become coarse binary target/noise masks, which drive spatial
//! covariance estimation for a GEV beamformer with BAN post-filtering.
//!
//! Around the core sit the baselines ([`beamform::delay_and_sum`] and the
//! oracle-mask GEV in [`oracle`]), an image-method room simulator
//! ([`roomsim`]), SI-SDR scoring ([`metrics`]) and the command layer used by
//! the `kissgev` binary ([`cli`]).

pub mod array;
pub mod beamform;
pub mod cli;
pub mod config;
mod error;
mod linalg;
pub mod maskgen;
pub mod metrics;
pub mod oracle;
pub mod roomsim;
pub mod stft;
pub mod synth;
pub mod wavio;

pub use array::{ArrayGeometry, Doa, SteeringVector};
pub use beamform::{BeamformerWeights, GevParams, ScmSet};
pub use error::{Error, Result};
pub use maskgen::{Filterbank, MaskKind, RatioMap, TfMask};
pub use stft::{MultichannelSpectrogram, StftConfig};
pub use wavio::{AudioClip, WavEncoding};

pub use num_complex::Complex64;
