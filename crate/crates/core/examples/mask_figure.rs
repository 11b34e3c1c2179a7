//! Renders the KISS-GEV target mask next to the oracle ideal ratio mask for
//! one simulated recording (black = 1).
//!
//!     cargo run --release --example mask_figure [OUT_DIR]

use std::path::PathBuf;

use kissgev::beamform::{self, EnhanceParams};
use kissgev::maskgen;
use kissgev::oracle;
use kissgev::roomsim::{self, InterferenceKind, ScenarioRanges};
use kissgev::synth::{self, CorpusPlan};
use kissgev::{stft, ArrayGeometry};

fn main() -> kissgev::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("kissgev_masks"), PathBuf::from);
    let corpus = synth::corpus(&CorpusPlan::default(), 2)?;
    let geometry = ArrayGeometry::respeaker_like();
    let scenario = roomsim::sample_scenarios(&corpus, &geometry, &ScenarioRanges::default(), 3, 8)?
        .into_iter()
        .find(|s| s.spec.kind == InterferenceKind::Ambient)
        .expect("kinds cycle");
    let mix = roomsim::synthesize_mixture(&scenario)?;
    let params = EnhanceParams::default();
    let (spec, steering) = beamform::prepare(&mix.mixture, &geometry, &scenario.spec.target_doa, &params)?;
    let kiss = maskgen::kiss_masks(&spec, &steering, params.gamma, params.alpha)?;
    let x = stft::stft(&mix.target_image.channel_clip(0), &params.stft)?;
    let n = stft::stft(&mix.interference_image.channel_clip(0), &params.stft)?;
    let irm = oracle::ideal_ratio_mask(&x, &n)?;

    std::fs::create_dir_all(&out).map_err(|e| kissgev::Error::Input(format!("{}: {e}", out.display())))?;
    for (name, mask) in [("kiss_target", &kiss.target), ("kiss_noise", &kiss.noise), ("oracle_irm", &irm)] {
        std::fs::write(out.join(format!("{name}.pgm")), mask.to_pgm())
            .map_err(|e| kissgev::Error::Input(e.to_string()))?;
    }

    let frames = kiss.target.num_frames() as f64;
    let density: Vec<f64> = kiss.target.column_sums().iter().map(|c| 100.0 * c / frames).collect();
    println!("{} frames x {} bins", kiss.target.num_frames(), kiss.target.num_bins());
    println!(
        "target mask density per bin: min {:.1}%, max {:.1}% (alpha = {}%)",
        density.iter().cloned().fold(f64::INFINITY, f64::min),
        density.iter().cloned().fold(0.0, f64::max),
        params.alpha
    );
    // where the coarse mask agrees with the oracle
    let agree = |mask: &kissgev::TfMask| {
        let (mut num, mut den) = (0.0, 0.0);
        for (m, o) in mask.values().iter().zip(irm.values()) {
            num += m * o;
            den += m;
        }
        num / den
    };
    println!("mean oracle IRM under the target mask {:.2}, under the noise mask {:.2}", agree(&kiss.target), agree(&kiss.noise));
    println!("PGMs written to {}", out.display());
    Ok(())
}
