//! Synthetic source material for desk-scale simulations: speech-like
//! babble, ambient noise and music-like tones. These stand in for a real
//! speech/noise corpus when none is available; any directory of WAVs laid out
//! the same way works with [`crate::roomsim::Corpus`].

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::roomsim::{Corpus, InterferenceKind};
use crate::wavio::{self, AudioClip, WavEncoding};

/// White Gaussian noise shaped by `gain(freq_hz)` in the frequency domain.
pub fn shaped_noise(rng: &mut ChaCha8Rng, len: usize, sample_rate: u32, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let size = len.next_power_of_two().max(2);
    let mut buf: Vec<Complex64> = (0..size)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(size).process(&mut buf);
    let fs = f64::from(sample_rate);
    for (k, z) in buf.iter_mut().enumerate() {
        let bin = if k <= size / 2 { k } else { size - k };
        *z *= gain(bin as f64 * fs / size as f64);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf.truncate(len);
    buf.into_iter().map(|z| z.re / size as f64).collect()
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = target / rms;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

fn hann_envelope(n: usize, i: usize, attack: usize) -> f64 {
    let a = attack.min(n / 2).max(1);
    if i < a {
        0.5 - 0.5 * (std::f64::consts::PI * i as f64 / a as f64).cos()
    } else if i >= n - a {
        0.5 - 0.5 * (std::f64::consts::PI * (n - 1 - i) as f64 / a as f64).cos()
    } else {
        1.0
    }
}

fn band(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |f| if f >= lo && f <= hi { 1.0 } else { 0.0 }
}

/// Speech-like signal: words of voiced syllables (glottal harmonics through
/// three formant resonances) and fricative noise bursts, separated by pauses.
pub fn speech_like(rng: &mut ChaCha8Rng, sample_rate: u32, seconds: f64, rms: f64) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let len = (seconds * fs) as usize;
    let mut out = vec![0.0; len];
    let nyquist = fs / 2.0;
    let fric_band = band(2500.0_f64.min(nyquist * 0.3), (7500.0_f64).min(nyquist * 0.95));
    let hiss = shaped_noise(rng, len, sample_rate, fric_band);
    let base_f0 = rng.random_range(95.0..210.0);
    let lead = rng.random_range(0.1..0.35_f64).min(seconds * 0.2);
    let mut pos = (lead * fs) as usize;
    let min_room = ((0.25 * fs) as usize).min(len / 2);
    while pos + min_room < len {
        let syllables = rng.random_range(1..=3);
        for _ in 0..syllables {
            if rng.random_bool(0.45) {
                let n = ((rng.random_range(0.05..0.13) * fs) as usize).min(len - pos);
                let level = rng.random_range(0.3..0.8);
                for i in 0..n {
                    out[pos + i] += level * 6.0 * hiss[pos + i] * hann_envelope(n, i, n / 3);
                }
                pos += n;
            }
            let n = ((rng.random_range(0.12..0.3) * fs) as usize).min(len - pos);
            let f0_start = base_f0 * rng.random_range(0.85..1.2);
            let f0_end = f0_start * rng.random_range(0.8..1.15);
            let formants = [
                (rng.random_range(300.0..850.0), 90.0),
                (rng.random_range(850.0..2300.0), 120.0),
                (rng.random_range(2300.0..3300.0), 160.0),
            ];
            let mut phase = 0.0;
            for i in 0..n {
                let frac = i as f64 / n.max(1) as f64;
                let f0 = f0_start + (f0_end - f0_start) * frac;
                phase += TAU * f0 / fs;
                let mut v = 0.0;
                let mut h = 1;
                while (h as f64) * f0 < nyquist * 0.9 && h < 60 {
                    let fh = h as f64 * f0;
                    let amp: f64 = formants
                        .iter()
                        .map(|&(fc, bw)| bw * bw / ((fh - fc).powi(2) + bw * bw))
                        .sum::<f64>()
                        / (h as f64).powf(0.3);
                    v += amp * (phase * h as f64).sin();
                    h += 1;
                }
                let env = (std::f64::consts::PI * frac).sin().powf(0.6);
                out[pos + i] += v * env;
            }
            pos += n;
            if pos + (0.25 * fs) as usize >= len {
                break;
            }
        }
        pos += (rng.random_range(0.06..0.35) * fs) as usize;
    }
    normalize_rms(&mut out, rms);
    out
}

/// Broadband background with a random spectral tilt between white and pink,
/// slow level drift, a weak mains hum and random transient clatter.
pub fn ambient_noise(rng: &mut ChaCha8Rng, sample_rate: u32, seconds: f64, rms: f64) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let len = (seconds * fs) as usize;
    let tilt = rng.random_range(0.0..0.5);
    let mut out = shaped_noise(rng, len, sample_rate, |f| f.max(40.0).powf(-tilt));
    let drift_rate = rng.random_range(0.2..1.0);
    let drift_phase = rng.random_range(0.0..TAU);
    for (i, v) in out.iter_mut().enumerate() {
        *v *= 1.0 + 0.4 * (TAU * drift_rate * i as f64 / fs + drift_phase).sin();
    }
    normalize_rms(&mut out, 1.0);
    let hum_f = if rng.random_bool(0.5) { 50.0 } else { 60.0 };
    let hum = rng.random_range(0.0..0.1);
    for (i, v) in out.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v += hum * ((TAU * hum_f * t).sin() + 0.5 * (TAU * 3.0 * hum_f * t).sin());
    }
    let mut clatter = shaped_noise(rng, len, sample_rate, band(800.0, fs / 2.0));
    normalize_rms(&mut clatter, 1.0);
    let bursts = rng.random_range(2..8);
    for _ in 0..bursts {
        let start = rng.random_range(0..len);
        let decay = rng.random_range(0.01..0.08) * fs;
        let level = rng.random_range(1.0..3.0);
        for i in start..len.min(start + (6.0 * decay) as usize) {
            out[i] += level * clatter[i] * (-((i - start) as f64) / decay).exp();
        }
    }
    normalize_rms(&mut out, rms);
    out
}

/// Chord sequence of decaying harmonic notes with percussive hits.
pub fn music_like(rng: &mut ChaCha8Rng, sample_rate: u32, seconds: f64, rms: f64) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let len = (seconds * fs) as usize;
    let mut out = vec![0.0; len];
    let beat = rng.random_range(0.25..0.5) * fs;
    let root = rng.random_range(45..60) as f64;
    let scale = [0.0, 2.0, 4.0, 5.0, 7.0, 9.0, 11.0];
    let mut start = 0usize;
    while start < len {
        let chord_root = root + scale[rng.random_range(0..scale.len())];
        let dur = (beat * rng.random_range(1..=3) as f64) as usize;
        for interval in [0.0, 4.0, 7.0, 12.0] {
            let midi = chord_root + interval + if rng.random_bool(0.3) { 12.0 } else { 0.0 };
            let f0 = 440.0 * 2f64.powf((midi - 69.0) / 12.0);
            let decay = rng.random_range(0.3..1.2) * fs;
            for i in start..len.min(start + dur + (0.2 * fs) as usize) {
                let t = (i - start) as f64;
                let env = (-t / decay).exp() * hann_envelope(dur + (0.2 * fs) as usize, i - start, 64);
                let mut v = 0.0;
                let mut h = 1;
                while h as f64 * f0 < fs * 0.45 && h < 40 {
                    v += (TAU * h as f64 * f0 * t / fs).sin() / h as f64;
                    h += 1;
                }
                out[i] += 0.25 * env * v;
            }
        }
        start += dur;
    }
    let hat = shaped_noise(rng, len, sample_rate, band(5000.0_f64.min(fs * 0.3), fs / 2.0));
    let mut hit = 0.0;
    while (hit as usize) < len {
        let s = hit as usize;
        for i in s..len.min(s + (0.05 * fs) as usize) {
            out[i] += 8.0 * hat[i] * (-((i - s) as f64) / (0.01 * fs)).exp();
        }
        hit += beat / 2.0;
    }
    normalize_rms(&mut out, rms);
    out
}

/// Clip counts, duration and levels for [`write_corpus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusPlan {
    pub clips_per_kind: usize,
    pub seconds: f64,
    pub sample_rate: u32,
    pub target_rms: f64,
    pub interference_rms: f64,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        Self {
            clips_per_kind: 5,
            seconds: 3.0,
            sample_rate: 16000,
            target_rms: 0.05,
            interference_rms: 0.05,
        }
    }
}

/// Generates one clip of the given role.
pub fn generate(kind: Option<InterferenceKind>, plan: &CorpusPlan, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fs, secs) = (plan.sample_rate, plan.seconds);
    match kind {
        None => speech_like(&mut rng, fs, secs, plan.target_rms),
        Some(InterferenceKind::Speech) => speech_like(&mut rng, fs, secs, plan.interference_rms),
        Some(InterferenceKind::Ambient) => ambient_noise(&mut rng, fs, secs, plan.interference_rms),
        Some(InterferenceKind::Music) => music_like(&mut rng, fs, secs, plan.interference_rms),
    }
}

const ROLES: [(Option<InterferenceKind>, &str); 4] = [
    (None, "target"),
    (Some(InterferenceKind::Ambient), "ambient"),
    (Some(InterferenceKind::Music), "music"),
    (Some(InterferenceKind::Speech), "speech"),
];

fn check_plan(plan: &CorpusPlan) -> Result<()> {
    if plan.clips_per_kind == 0 || !(plan.seconds > 0.0) {
        return Err(Error::Input("corpus plan needs at least one clip of positive length".into()));
    }
    Ok(())
}

fn clip_seed(seed: u64, role: usize, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add((role * 10_000 + i) as u64)
}

/// Builds the synthetic corpus in memory. Clip paths are the ones
/// [`write_corpus`] would use, relative to the corpus root.
pub fn corpus(plan: &CorpusPlan, seed: u64) -> Result<Corpus> {
    check_plan(plan)?;
    let mut out = Corpus::default();
    for (r, (kind, dir)) in ROLES.iter().enumerate() {
        let clips = (0..plan.clips_per_kind)
            .map(|i| {
                let clip = AudioClip::mono(generate(*kind, plan, clip_seed(seed, r, i)), plan.sample_rate)?;
                Ok((PathBuf::from(dir).join(format!("{dir}_{i:03}.wav")), Arc::new(clip)))
            })
            .collect::<Result<Vec<_>>>()?;
        match kind {
            None => out.targets = clips,
            Some(k) => {
                out.interferers.insert(*k, clips);
            }
        }
    }
    Ok(out)
}

/// Writes `target/`, `ambient/`, `music/` and `speech/` float WAVs under
/// `root`.
pub fn write_corpus(root: impl AsRef<Path>, plan: &CorpusPlan, seed: u64) -> Result<()> {
    let root = root.as_ref();
    let corpus = corpus(plan, seed)?;
    let all = corpus.targets.iter().chain(corpus.interferers.values().flatten());
    for (rel, clip) in all {
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        wavio::write_wav(clip, &path, WavEncoding::Float32)?;
    }
    Ok(())
}
