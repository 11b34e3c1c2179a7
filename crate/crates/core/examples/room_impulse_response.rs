//! Image-method impulse responses: the anechoic case and the decay of a
//! reverberant shoebox room.
//!
//!     cargo run --release --example room_impulse_response

use kissgev::roomsim::{image_method_rir, image_sources, RoomSpec};

fn main() -> kissgev::Result<()> {
    let mut room = RoomSpec {
        dimensions: [6.0, 5.0, 3.0],
        absorption: [1.0; 6],
        speed_of_sound: 343.0,
        source_position: [1.5, 2.0, 1.6],
        mic_positions: vec![[4.0, 2.5, 1.2]],
        max_order: 20,
        sample_rate: 16000,
        rir_length: 8192,
    };
    let (s, m) = (room.source_position, room.mic_positions[0]);
    let r = ((s[0] - m[0]).powi(2) + (s[1] - m[1]).powi(2) + (s[2] - m[2]).powi(2)).sqrt();
    let rir = image_method_rir(&room)?;
    let (peak_at, peak) = rir
        .row(0)
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |best, (i, v)| if v.abs() > best.1.abs() { (i, *v) } else { best });
    println!("anechoic: r = {r:.3} m");
    let area: f64 = rir.row(0).sum();
    println!("  expected 1/(4 pi r) = {:.5} at sample {:.2}", 1.0 / (4.0 * std::f64::consts::PI * r), r * 16000.0 / 343.0);
    // off-grid delays spread the band-limited impulse over neighbouring taps
    println!("  sampled peak {peak:.5} at {peak_at}, tap sum {area:.5}");

    for absorption in [0.8, 0.5, 0.2] {
        room.absorption = [absorption; 6];
        let images = image_sources(&room, &room.mic_positions[0]);
        let mut per_order = [0.0; 6];
        for img in images.iter().filter(|i| i.order < 6) {
            per_order[img.order] += img.amplitude().powi(2);
        }
        let rir = image_method_rir(&room)?;
        let h = rir.row(0);
        let total: f64 = h.iter().map(|v| v * v).sum();
        // Schroeder backward integration, -20 dB point extrapolated to -60
        let mut remaining = total;
        let mut t20 = None;
        for (i, v) in h.iter().enumerate() {
            remaining -= v * v;
            if t20.is_none() && remaining < total * 0.01 {
                t20 = Some(i as f64 / 16000.0 * 3.0);
            }
        }
        println!("absorption {absorption}: {} images, energy by order {:?}", images.len(), per_order.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>());
        match t20 {
            Some(t) => println!("  RT60 estimate {t:.2} s"),
            None => println!("  RT60 beyond the {} ms response", 8192 * 1000 / 16000),
        }
    }
    Ok(())
}
