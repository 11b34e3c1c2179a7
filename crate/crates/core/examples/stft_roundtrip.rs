//! Writes a two-channel clip as PCM-16 and float WAV, reads both back and
//! runs them through STFT analysis and overlap-add resynthesis.
//!
//!     cargo run --release --example stft_roundtrip [OUT_DIR]

use kissgev::stft::{istft, stft};
use kissgev::wavio::{read_wav, write_wav};
use kissgev::{AudioClip, StftConfig, WavEncoding};
use ndarray::{s, Array2};

fn main() -> kissgev::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let fs = 16000;
    let x = Array2::from_shape_fn((2, fs as usize), |(ch, n)| {
        let t = n as f64 / f64::from(fs);
        0.5 * (2.0 * std::f64::consts::PI * (220.0 * (ch + 1) as f64) * t).sin() * (1.0 - t)
    });
    let clip = AudioClip::new(x, fs)?;
    let config = StftConfig::default();

    for (encoding, name) in [(WavEncoding::Pcm16, "pcm16.wav"), (WavEncoding::Float32, "float32.wav")] {
        let path = dir.join(name);
        write_wav(&clip, &path, encoding)?;
        let back = read_wav(&path)?;
        let wav_err = (back.samples() - clip.samples()).iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let spec = stft(&back, &config)?;
        let y = istft(&spec)?;
        let range = config.interior(spec.num_frames());
        let a = y.samples().slice(s![.., range.clone()]);
        let b = back.samples().slice(s![.., range]);
        let err = (&a - &b).mapv(|v| v * v).sum().sqrt() / b.mapv(|v| v * v).sum().sqrt();
        println!(
            "{name:<12} max sample error {wav_err:.2e}  {} frames x {} bins  stft round trip {err:.2e}",
            spec.num_frames(),
            spec.num_bins()
        );
    }
    Ok(())
}
