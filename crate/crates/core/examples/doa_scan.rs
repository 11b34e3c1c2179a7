//! Steers delay-and-sum over a 1-degree azimuth grid and reports where the
//! output power of an anechoic far-field source peaks.
//!
//!     cargo run --release --example doa_scan [AZIMUTH_DEG]

use kissgev::beamform::delay_and_sum;
use kissgev::roomsim::{convolve_rows, image_method_rir, RoomSpec};
use kissgev::{array, stft, ArrayGeometry, AudioClip, Doa, StftConfig};
use rand::{Rng, SeedableRng};

fn main() -> kissgev::Result<()> {
    let true_az: f64 = std::env::args().nth(1).map_or(Ok(117.0), |a| a.parse()).unwrap_or(117.0);
    let geometry = ArrayGeometry::respeaker_like();
    let center = [10.0, 10.0, 1.5];
    let (s, c) = true_az.to_radians().sin_cos();
    let room = RoomSpec {
        dimensions: [20.0, 20.0, 3.0],
        absorption: [1.0; 6],
        speed_of_sound: geometry.speed_of_sound(),
        source_position: [center[0] + 8.0 * c, center[1] + 8.0 * s, 1.5],
        mic_positions: geometry.mic_positions().iter().map(|p| [center[0] + p[0], center[1] + p[1], center[2] + p[2]]).collect(),
        max_order: 0,
        sample_rate: 16000,
        rir_length: 1024,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let noise: Vec<f64> = (0..16000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let clip = AudioClip::new(convolve_rows(&noise, &image_method_rir(&room)?, noise.len()), 16000)?;
    let config = StftConfig::default();
    let spec = stft::stft(&clip, &config)?;

    let mut best = (0.0, f64::MIN);
    for az in 0..360 {
        let doa = Doa::from_degrees(az as f64, 0.0)?;
        let taus = array::tdoa_relative(&geometry, &doa, 16000, 0);
        let out = delay_and_sum(&spec, &array::steering(&taus, config.frame_size)?)?;
        let power: f64 = out.frames().iter().map(|z| z.norm_sqr()).sum();
        if power > best.1 {
            best = (az as f64, power);
        }
        if az % 30 == 0 {
            println!("{az:>4} deg  {:8.2} dB", 10.0 * power.log10());
        }
    }
    println!("source at {true_az} deg, delay-and-sum power peaks at {} deg", best.0);
    Ok(())
}
