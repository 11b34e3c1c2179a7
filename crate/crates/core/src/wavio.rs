//! Multichannel RIFF/WAVE input and output.
//!
//! Samples are interleaved on disk and stored channel-major in memory
//! (`[channels, samples]`). Integer PCM is normalized by `2^(bits-1)`, so
//! PCM-16 full scale `+32767` reads back as `32767 / 32768`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

const MAX_CHANNELS: u16 = 64;

/// Time-domain multichannel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Array2<f64>,
    sample_rate: u32,
}

/// On-disk sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

impl AudioClip {
    /// Builds a clip from a `[channels, samples]` matrix.
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::param("sample_rate", "must be positive"));
        }
        if samples.nrows() == 0 {
            return Err(Error::Size("audio clip has no channels".into()));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite sample at flat index {pos}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let len = samples.len();
        let samples = Array2::from_shape_vec((1, len), samples)
            .expect("a single row always matches its own length");
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn channel(&self, index: usize) -> ArrayView1<'_, f64> {
        self.samples.row(index)
    }

    /// Single-channel clip holding a copy of `index`.
    pub fn channel_clip(&self, index: usize) -> AudioClip {
        let row = self.samples.row(index).to_owned().insert_axis(Axis(0));
        AudioClip {
            samples: row,
            sample_rate: self.sample_rate,
        }
    }

    /// Returns a copy truncated to the first `len` samples.
    pub fn truncated(&self, len: usize) -> AudioClip {
        let len = len.min(self.len());
        AudioClip {
            samples: self.samples.slice(ndarray::s![.., ..len]).to_owned(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            samples: &self.samples * gain,
            sample_rate: self.sample_rate,
        }
    }
}

/// Reads a PCM-16, PCM-32 or IEEE float-32 WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > MAX_CHANNELS {
        return Err(Error::Format(format!(
            "{} channels (supported: 1-{MAX_CHANNELS})",
            spec.channels
        )));
    }
    let channels = usize::from(spec.channels);
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, 32) => reader
            .into_samples::<i32>()
            .map(|s| s.map(|v| f64::from(v) / 2_147_483_648.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, bits) => {
            return Err(Error::Format(format!("PCM-{bits} integer encoding")))
        }
        (hound::SampleFormat::Float, bits) => {
            return Err(Error::Format(format!("IEEE float-{bits} encoding")))
        }
    }
    .map_err(|e| map_hound(path, e))?;

    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "data chunk ends mid-frame",
            ),
        ));
    }
    let frames = interleaved.len() / channels;
    let samples = Array2::from_shape_fn((channels, frames), |(c, n)| interleaved[n * channels + c]);
    AudioClip::new(samples, spec.sample_rate)
}

/// Writes `clip` to `path`. PCM-16 output is clamped to `[-1, 1]` first.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let channels = u16::try_from(clip.num_channels())
        .ok()
        .filter(|&c| c <= MAX_CHANNELS)
        .ok_or_else(|| Error::Format(format!("{} channels", clip.num_channels())))?;
    let spec = hound::WavSpec {
        channels,
        sample_rate: clip.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for n in 0..clip.len() {
        for c in 0..clip.num_channels() {
            let v = clip.samples[[c, n]];
            let res = match encoding {
                WavEncoding::Pcm16 => writer.write_sample(quantize_pcm16(v)),
                WavEncoding::Float32 => writer.write_sample(v as f32),
            };
            res.map_err(|e| map_hound(path, e))?;
        }
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

fn quantize_pcm16(v: f64) -> i16 {
    let q = (v.clamp(-1.0, 1.0) * 32768.0).round();
    q.clamp(-32768.0, 32767.0) as i16
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::Unsupported => Error::Format("unsupported WAVE encoding".into()),
        hound::Error::FormatError(msg) => {
            // hound reports a short header or data chunk as a format error
            if msg.contains("unexpected eof") || msg.contains("EOF") {
                Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::UnexpectedEof, msg),
                )
            } else {
                Error::Format(msg.to_string())
            }
        }
        other => Error::Format(other.to_string()),
    }
}
