//! Compares the spatial response of KISS-GEV and delay-and-sum weights for
//! one simulated recording, toward the target and the interferer.
//!
//!     cargo run --release --example gev_beampattern

use kissgev::beamform::{self, EnhanceParams};
use kissgev::roomsim::{self, ScenarioRanges};
use kissgev::synth::{self, CorpusPlan};
use kissgev::{array, ArrayGeometry, Complex64};

fn main() -> kissgev::Result<()> {
    let corpus = synth::corpus(&CorpusPlan::default(), 3)?;
    let geometry = ArrayGeometry::respeaker_like();
    let scenario = roomsim::sample_scenarios(&corpus, &geometry, &ScenarioRanges::default(), 2, 21)?.remove(1);
    let spec = &scenario.spec;
    let mix = roomsim::synthesize_mixture(&scenario)?;
    let params = EnhanceParams::default();
    let out = beamform::kissgev_enhance_detailed(&mix.mixture, &geometry, &spec.target_doa, &params)?;
    let interferer = spec.doa_of(spec.interference_position)?;
    println!(
        "{}: target at {:.0} deg, interferer at {:.0} deg",
        spec.id,
        spec.target_doa.azimuth_degrees(),
        interferer.azimuth_degrees()
    );

    let fs = spec.sample_rate;
    let n = params.stft.frame_size;
    let manifold = |doa| -> kissgev::Result<_> {
        // conj of the delay-and-sum weights is the plane-wave response
        let w = array::steering(&array::tdoa_relative(&geometry, doa, fs, 0), n)?;
        Ok(w.weights().mapv(|z| z.conj()))
    };
    let a_target = manifold(&spec.target_doa)?;
    let a_interf = manifold(&interferer)?;
    let d = geometry.num_mics() as f64;
    println!("{:>8} {:>22} {:>22}", "freq Hz", "GEV target/interf dB", "DS target/interf dB");
    for bin in [16, 32, 64, 96, 128, 160, 192, 224] {
        let f = out.weights.vectors().row(bin);
        let gev = |a: &ndarray::Array2<Complex64>| {
            let r: Complex64 = f.iter().zip(a.column(bin)).map(|(w, x)| w.conj() * x).sum();
            r.norm_sqr()
        };
        let ds = |a: &ndarray::Array2<Complex64>| {
            let r: Complex64 = a_target.column(bin).iter().zip(a.column(bin)).map(|(w, x)| w.conj() * x).sum();
            r.norm_sqr() / (d * d)
        };
        println!(
            "{:>8.0} {:>22.1} {:>22.1}",
            params.stft.bin_frequency(bin, fs),
            10.0 * (gev(&a_target) / gev(&a_interf)).log10(),
            10.0 * (ds(&a_target) / ds(&a_interf)).log10()
        );
    }
    Ok(())
}
