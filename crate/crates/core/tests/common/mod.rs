#![allow(dead_code)]

use kissgev::roomsim::{sample_scenarios, synthesize_mixture, Mixture, MixtureScenario, ScenarioRanges};
use kissgev::synth::{self, CorpusPlan};
use kissgev::{ArrayGeometry, AudioClip, Doa};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FS: u32 = 16000;

/// One simulated reverberant scenario from the synthetic corpus.
pub fn scenario(index: usize) -> (MixtureScenario, Mixture) {
    let plan = CorpusPlan {
        clips_per_kind: 2,
        seconds: 2.0,
        ..CorpusPlan::default()
    };
    let corpus = synth::corpus(&plan, 11).unwrap();
    let all = sample_scenarios(&corpus, &ArrayGeometry::respeaker_like(), &ScenarioRanges::default(), index + 1, 5).unwrap();
    let s = all.into_iter().last().unwrap();
    let mix = synthesize_mixture(&s).unwrap();
    (s, mix)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Far-field plane wave from `doa` on `geometry`, each channel delayed by
/// its geometric TDoA with an FFT-domain fractional shift.
pub fn plane_wave(geometry: &ArrayGeometry, doa: &Doa, source: &[f64]) -> AudioClip {
    use num_complex::Complex64;
    use rustfft::FftPlanner;
    let taus = kissgev::array::tdoa(geometry, doa, FS);
    let pad = 64usize;
    let n = (source.len() + 2 * pad).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec: Vec<Complex64> = source.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spec.resize(n, Complex64::default());
    fwd.process(&mut spec);
    let mut out = Array2::<f64>::zeros((geometry.num_mics(), source.len()));
    for (d, tau) in taus.iter().enumerate() {
        let mut s: Vec<Complex64> = (0..n)
            .map(|k| {
                let freq = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                let phase = -2.0 * std::f64::consts::PI * freq * (tau + pad as f64) / n as f64;
                spec[k] * Complex64::from_polar(1.0, phase)
            })
            .collect();
        // n is a power of two; keep its Nyquist bin real so the output stays real
        s[n / 2] = Complex64::new(spec[n / 2].re * (std::f64::consts::PI * (tau + pad as f64)).cos(), 0.0);
        inv.process(&mut s);
        for t in 0..source.len() {
            out[[d, t]] = s[t + pad].re / n as f64;
        }
    }
    AudioClip::new(out, FS).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn report(criterion: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
}
