//! One-sided STFT analysis and weighted overlap-add synthesis.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::wavio::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Square root of the periodic Hann window, used for both analysis and
    /// synthesis.
    #[default]
    SqrtHann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub frame_size: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_size: 512,
            hop: 256,
            window: Window::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn new(frame_size: usize, hop: usize) -> Result<Self> {
        let cfg = Self {
            frame_size,
            hop,
            window: Window::SqrtHann,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn num_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    /// Checks frame/hop constraints and the constant overlap-add condition.
    pub fn validate(&self) -> Result<()> {
        let n = self.frame_size;
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::param("frame_size", format!("{n} is not an even integer >= 2")));
        }
        if self.hop == 0 || !n.is_multiple_of(self.hop) || self.hop > n / 2 {
            return Err(Error::param(
                "hop",
                format!("{} must divide the frame size {n} and be at most {}", self.hop, n / 2),
            ));
        }
        let (lo, hi) = self.overlap_sum_range();
        if hi - lo > 1e-10 {
            return Err(Error::param(
                "window",
                format!("overlap-add sum varies by {:e}", hi - lo),
            ));
        }
        Ok(())
    }

    pub fn analysis_window(&self) -> Vec<f64> {
        match self.window {
            Window::SqrtHann => (0..self.frame_size)
                .map(|i| {
                    let h = 0.5 - 0.5 * (2.0 * PI * i as f64 / self.frame_size as f64).cos();
                    h.max(0.0).sqrt()
                })
                .collect(),
        }
    }

    pub fn synthesis_window(&self) -> Vec<f64> {
        self.analysis_window()
    }

    /// Sum over shifted analysis·synthesis products; constant for a valid
    /// configuration.
    pub fn overlap_add_gain(&self) -> f64 {
        let (lo, hi) = self.overlap_sum_range();
        0.5 * (lo + hi)
    }

    fn overlap_sum_range(&self) -> (f64, f64) {
        let wa = self.analysis_window();
        let ws = self.synthesis_window();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..self.hop {
            let s: f64 = (n..self.frame_size)
                .step_by(self.hop)
                .map(|i| wa[i] * ws[i])
                .sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }

    /// Frequency in Hz of bin `f`.
    pub fn bin_frequency(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * f64::from(sample_rate) / self.frame_size as f64
    }

    /// Number of frames produced for `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_size {
            0
        } else {
            (len - self.frame_size) / self.hop + 1
        }
    }

    /// Samples reconstructed by overlap-add from `frames` frames.
    pub fn output_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.frame_size
        }
    }

    /// Half-open sample range that overlap-add reconstructs exactly.
    pub fn interior(&self, frames: usize) -> std::ops::Range<usize> {
        if frames == 0 {
            return 0..0;
        }
        let start = self.frame_size - self.hop;
        start..(frames * self.hop).max(start)
    }
}

/// Complex STFT frames `[channels, frames, bins]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSpectrogram {
    frames: Array3<Complex64>,
    config: StftConfig,
    sample_rate: u32,
}

impl MultichannelSpectrogram {
    pub fn new(frames: Array3<Complex64>, config: StftConfig, sample_rate: u32) -> Result<Self> {
        config.validate()?;
        if frames.shape()[2] != config.num_bins() {
            return Err(Error::Shape(format!(
                "spectrogram has {} bins, frame size {} needs {}",
                frames.shape()[2],
                config.frame_size,
                config.num_bins()
            )));
        }
        if frames.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("non-finite spectrogram entry".into()));
        }
        Ok(Self {
            frames,
            config,
            sample_rate,
        })
    }

    /// Single-channel spectrogram from a `[frames, bins]` matrix.
    pub fn from_single(frames: Array2<Complex64>, config: StftConfig, sample_rate: u32) -> Result<Self> {
        Self::new(frames.insert_axis(Axis(0)), config, sample_rate)
    }

    pub fn frames(&self) -> &Array3<Complex64> {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.frames
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn num_frames(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn num_bins(&self) -> usize {
        self.frames.shape()[2]
    }

    pub fn channel(&self, d: usize) -> ArrayView2<'_, Complex64> {
        self.frames.index_axis(Axis(0), d)
    }

    /// Windowed time-domain energy of frame `t` on channel `d`, recovered
    /// from the one-sided bins via Parseval.
    pub fn frame_energy(&self, d: usize, t: usize) -> f64 {
        let n = self.config.frame_size;
        let row = self.frames.slice(ndarray::s![d, t, ..]);
        let last = row.len() - 1;
        let inner: f64 = row
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let w = if k == 0 || k == last { 1.0 } else { 2.0 };
                w * z.norm_sqr()
            })
            .sum();
        inner / n as f64
    }
}

/// Forward STFT of every channel of `clip`.
pub fn stft(clip: &AudioClip, config: &StftConfig) -> Result<MultichannelSpectrogram> {
    config.validate()?;
    let n = config.frame_size;
    if clip.len() < n {
        return Err(Error::Size(format!(
            "clip has {} samples, fewer than one {n}-sample frame",
            clip.len()
        )));
    }
    let frames = config.num_frames(clip.len());
    let bins = config.num_bins();
    let window = config.analysis_window();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut out = Array3::<Complex64>::zeros((clip.num_channels(), frames, bins));
    let mut buf = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for (d, x) in clip.samples().outer_iter().enumerate() {
        for t in 0..frames {
            let start = t * config.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(x[start + i] * window[i], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (f, z) in buf[..bins].iter().enumerate() {
                out[[d, t, f]] = *z;
            }
        }
    }
    MultichannelSpectrogram::new(out, *config, clip.sample_rate())
}

/// Inverse STFT by weighted overlap-add. Output has `(T-1)*hop + N` samples.
pub fn istft(spec: &MultichannelSpectrogram) -> Result<AudioClip> {
    let config = spec.config();
    let n = config.frame_size;
    let frames = spec.num_frames();
    let len = config.output_len(frames);
    let window = config.synthesis_window();
    let norm = 1.0 / (config.overlap_add_gain() * n as f64);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut out = Array2::<f64>::zeros((spec.num_channels(), len));
    let mut buf = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); ifft.get_inplace_scratch_len()];
    for d in 0..spec.num_channels() {
        let ch = spec.channel(d);
        for t in 0..frames {
            let row = ch.row(t);
            buf[0] = Complex64::new(row[0].re, 0.0);
            for k in 1..n / 2 {
                buf[k] = row[k];
                buf[n - k] = row[k].conj();
            }
            buf[n / 2] = Complex64::new(row[n / 2].re, 0.0);
            ifft.process_with_scratch(&mut buf, &mut scratch);
            let start = t * config.hop;
            for i in 0..n {
                out[[d, start + i]] += buf[i].re * window[i] * norm;
            }
        }
    }
    AudioClip::new(out, spec.sample_rate())
}
