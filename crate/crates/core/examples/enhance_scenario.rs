//! Simulates one reverberant recording and enhances it with every method.
//!
//!     cargo run --release --example enhance_scenario [OUT_DIR]
//!
//! With OUT_DIR, the mixture and each enhanced signal are written as WAVs.

use std::path::PathBuf;

use kissgev::beamform::{self, EnhanceParams, Postfilter};
use kissgev::metrics::{score_against_image, Metric};
use kissgev::oracle::{self, IrmOptions};
use kissgev::roomsim::{self, ScenarioRanges};
use kissgev::synth::{self, CorpusPlan};
use kissgev::{wavio, ArrayGeometry, WavEncoding};

fn main() -> kissgev::Result<()> {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let corpus = synth::corpus(&CorpusPlan::default(), 11)?;
    let geometry = ArrayGeometry::respeaker_like();
    let scenario = roomsim::sample_scenarios(&corpus, &geometry, &ScenarioRanges::default(), 3, 5)?
        .pop()
        .expect("three scenarios requested");
    let spec = &scenario.spec;
    println!(
        "{}: {:.1} x {:.1} x {:.1} m room, absorption {:.2}, target azimuth {:.0} deg",
        spec.id,
        spec.dimensions[0],
        spec.dimensions[1],
        spec.dimensions[2],
        spec.absorption,
        spec.target_doa.azimuth_degrees()
    );

    let mix = roomsim::synthesize_mixture(&scenario)?;
    let params = EnhanceParams::default();
    let projection = EnhanceParams {
        gev: kissgev::GevParams {
            postfilter: Postfilter::Projection,
            ..params.gev
        },
        ..params
    };
    let doa = &spec.target_doa;
    let outputs = [
        ("unprocessed", mix.mixture.channel_clip(0)),
        ("ds", beamform::ds_enhance(&mix.mixture, &geometry, doa, &params)?),
        ("kissgev", beamform::kissgev_enhance(&mix.mixture, &geometry, doa, &params)?),
        ("kissgev_projection", beamform::kissgev_enhance(&mix.mixture, &geometry, doa, &projection)?),
        (
            "oracle_gev",
            oracle::oracle_gev_enhance(
                &mix.mixture,
                &mix.target_image,
                &mix.interference_image,
                &geometry,
                doa,
                &params,
                &IrmOptions::default(),
            )?,
        ),
    ];
    for (name, clip) in &outputs {
        let sdr = score_against_image(clip, &mix.target_image, 0, Metric::SiSdr)?;
        println!("{name:>20}  SI-SDR {sdr:6.2} dB");
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).ok();
            wavio::write_wav(clip, dir.join(format!("{name}.wav")), WavEncoding::Float32)?;
        }
    }
    if let Some(dir) = &out_dir {
        wavio::write_wav(&mix.mixture, dir.join("mixture.wav"), WavEncoding::Float32)?;
        println!("wrote WAVs to {}", dir.display());
    }
    Ok(())
}
