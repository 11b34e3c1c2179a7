//! Shoebox room impulse responses by the image-source method, plus the
//! scenario sampler and mixture synthesis used for simulated evaluation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::{distance, ArrayGeometry, Doa};
use crate::error::{Error, Result};
use crate::wavio::{self, AudioClip};

/// Half-width of the Hann-windowed sinc used for fractional delays; the
/// kernel has `2 * SINC_HALF_WIDTH + 1` taps.
pub const SINC_HALF_WIDTH: usize = 40;

/// One shoebox room with one source and any number of microphones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// `(L_x, L_y, L_z)` in meters.
    pub dimensions: [f64; 3],
    /// Energy absorption per surface: `x=0, x=L_x, y=0, y=L_y, z=0, z=L_z`.
    pub absorption: [f64; 6],
    pub speed_of_sound: f64,
    pub source_position: [f64; 3],
    pub mic_positions: Vec<[f64; 3]>,
    pub max_order: usize,
    pub sample_rate: u32,
    pub rir_length: usize,
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Geometry(format!("room dimensions {:?} must be positive", self.dimensions)));
        }
        if self.absorption.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::Geometry(format!("absorption {:?} must lie in (0, 1]", self.absorption)));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::Geometry("speed of sound must be positive".into()));
        }
        if self.sample_rate == 0 || self.rir_length == 0 {
            return Err(Error::Geometry("sample rate and RIR length must be positive".into()));
        }
        let inside = |p: &[f64; 3]| (0..3).all(|k| p[k] > 0.0 && p[k] < self.dimensions[k]);
        if !inside(&self.source_position) {
            return Err(Error::Geometry(format!("source {:?} is not inside the room", self.source_position)));
        }
        for (i, m) in self.mic_positions.iter().enumerate() {
            if !inside(m) {
                return Err(Error::Geometry(format!("mic {i} at {m:?} is not inside the room")));
            }
            if distance(m, &self.source_position) < 1e-3 {
                return Err(Error::Geometry(format!("source coincides with mic {i}")));
            }
        }
        Ok(())
    }

    /// Reflection coefficient per surface, `β = √(1 − absorption)`.
    pub fn reflection_coefficients(&self) -> [f64; 6] {
        self.absorption.map(|a| (1.0 - a).max(0.0).sqrt())
    }
}

/// A mirrored copy of the source seen from one microphone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    /// Lattice index per axis; `|n_x| + |n_y| + |n_z|` wall reflections.
    pub index: [i64; 3],
    pub order: usize,
    pub position: [f64; 3],
    /// Product of reflection coefficients along the path.
    pub reflection_gain: f64,
    pub distance: f64,
}

impl ImageSource {
    pub fn amplitude(&self) -> f64 {
        self.reflection_gain / (4.0 * PI * self.distance)
    }
}

/// Image coordinate along one axis, with hits on the low and high walls.
fn mirror(n: i64, len: f64, src: f64) -> (f64, u32, u32) {
    let pos = n as f64 * len + if n.rem_euclid(2) == 0 { src } else { len - src };
    let m = n.unsigned_abs() as u32;
    let (far, near) = (m.div_ceil(2), m / 2);
    if n >= 0 {
        (pos, near, far)
    } else {
        (pos, far, near)
    }
}

/// All images up to `room.max_order` reflections as seen from `mic`.
pub fn image_sources(room: &RoomSpec, mic: &[f64; 3]) -> Vec<ImageSource> {
    let beta = room.reflection_coefficients();
    let k = room.max_order as i64;
    let mut out = Vec::new();
    for nx in -k..=k {
        let (x, x_lo, x_hi) = mirror(nx, room.dimensions[0], room.source_position[0]);
        let rem_x = k - nx.abs();
        for ny in -rem_x..=rem_x {
            let (y, y_lo, y_hi) = mirror(ny, room.dimensions[1], room.source_position[1]);
            let rem_y = rem_x - ny.abs();
            for nz in -rem_y..=rem_y {
                let (z, z_lo, z_hi) = mirror(nz, room.dimensions[2], room.source_position[2]);
                let position = [x, y, z];
                let reflection_gain = beta[0].powi(x_lo as i32)
                    * beta[1].powi(x_hi as i32)
                    * beta[2].powi(y_lo as i32)
                    * beta[3].powi(y_hi as i32)
                    * beta[4].powi(z_lo as i32)
                    * beta[5].powi(z_hi as i32);
                out.push(ImageSource {
                    index: [nx, ny, nz],
                    order: (nx.abs() + ny.abs() + nz.abs()) as usize,
                    position,
                    reflection_gain,
                    distance: distance(&position, mic),
                });
            }
        }
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Adds `amplitude` at fractional `delay` (samples) with a Hann-windowed sinc.
fn add_fractional_impulse(out: &mut [f64], delay: f64, amplitude: f64) {
    let center = delay.round() as i64;
    let half = SINC_HALF_WIDTH as i64;
    let width = SINC_HALF_WIDTH as f64 + 1.0;
    for k in -half..=half {
        let idx = center + k;
        if idx < 0 || idx as usize >= out.len() {
            continue;
        }
        let t = idx as f64 - delay;
        let window = 0.5 * (1.0 + (PI * t / width).cos());
        out[idx as usize] += amplitude * window * sinc(t);
    }
}

/// Impulse responses `[mics, rir_length]` from the source to every mic.
pub fn image_method_rir(room: &RoomSpec) -> Result<Array2<f64>> {
    room.validate()?;
    let mut out = Array2::<f64>::zeros((room.mic_positions.len(), room.rir_length));
    let fs = f64::from(room.sample_rate);
    for (m, mic) in room.mic_positions.iter().enumerate() {
        let mut row = vec![0.0; room.rir_length];
        for image in image_sources(room, mic) {
            if image.reflection_gain == 0.0 {
                continue;
            }
            let delay = image.distance * fs / room.speed_of_sound;
            if delay - SINC_HALF_WIDTH as f64 >= room.rir_length as f64 {
                continue;
            }
            add_fractional_impulse(&mut row, delay, image.amplitude());
        }
        out.row_mut(m).assign(&ndarray::Array1::from(row));
    }
    Ok(out)
}

/// Linear convolution of `signal` with each row of `filters`, keeping the
/// first `out_len` samples.
pub fn convolve_rows(signal: &[f64], filters: &Array2<f64>, out_len: usize) -> Array2<f64> {
    let full = signal.len() + filters.ncols();
    let size = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut xs: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    xs.resize(size, Complex64::default());
    fwd.process(&mut xs);
    let mut out = Array2::<f64>::zeros((filters.nrows(), out_len));
    for (r, h) in filters.outer_iter().enumerate() {
        let mut hs: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        hs.resize(size, Complex64::default());
        fwd.process(&mut hs);
        for (a, b) in hs.iter_mut().zip(&xs) {
            *a *= b;
        }
        inv.process(&mut hs);
        for n in 0..out_len.min(size) {
            out[[r, n]] = hs[n].re / size as f64;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceKind {
    Ambient,
    Music,
    Speech,
}

impl InterferenceKind {
    pub const ALL: [InterferenceKind; 3] = [Self::Ambient, Self::Music, Self::Speech];

    pub fn dir_name(self) -> &'static str {
        match self {
            Self::Ambient => "ambient",
            Self::Music => "music",
            Self::Speech => "speech",
        }
    }
}

impl std::fmt::Display for InterferenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.dir_name())
    }
}

/// Everything needed to rebuild one simulated recording, minus the audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub kind: InterferenceKind,
    pub seed: u64,
    pub dimensions: [f64; 3],
    pub absorption: f64,
    pub speed_of_sound: f64,
    pub max_order: usize,
    pub rir_length: usize,
    pub sample_rate: u32,
    pub array_center: [f64; 3],
    /// Rotation of the array about the vertical axis, degrees.
    pub array_yaw_deg: f64,
    /// Microphones in array coordinates (the geometry used for beamforming).
    pub array_geometry: ArrayGeometry,
    pub target_position: [f64; 3],
    pub interference_position: [f64; 3],
    /// Target direction in array coordinates.
    pub target_doa: Doa,
    pub target_clip: PathBuf,
    pub interference_clip: PathBuf,
}

impl ScenarioSpec {
    /// Absolute microphone positions in the room.
    pub fn mic_positions(&self) -> Vec<[f64; 3]> {
        let (s, c) = self.array_yaw_deg.to_radians().sin_cos();
        self.array_geometry
            .mic_positions()
            .iter()
            .map(|p| {
                [
                    self.array_center[0] + c * p[0] - s * p[1],
                    self.array_center[1] + s * p[0] + c * p[1],
                    self.array_center[2] + p[2],
                ]
            })
            .collect()
    }

    pub fn room_for(&self, source: [f64; 3]) -> RoomSpec {
        RoomSpec {
            dimensions: self.dimensions,
            absorption: [self.absorption; 6],
            speed_of_sound: self.speed_of_sound,
            source_position: source,
            mic_positions: self.mic_positions(),
            max_order: self.max_order,
            sample_rate: self.sample_rate,
            rir_length: self.rir_length,
        }
    }

    /// Direction from the array center to `source`, in array coordinates.
    pub fn doa_of(&self, source: [f64; 3]) -> Result<Doa> {
        let v = [
            source[0] - self.array_center[0],
            source[1] - self.array_center[1],
            source[2] - self.array_center[2],
        ];
        let (s, c) = self.array_yaw_deg.to_radians().sin_cos();
        Doa::from_vector([c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]])
    }
}

/// A scenario with its source audio attached.
#[derive(Debug, Clone)]
pub struct MixtureScenario {
    pub spec: ScenarioSpec,
    pub target: Arc<AudioClip>,
    pub interference: Arc<AudioClip>,
}

impl MixtureScenario {
    /// Loads both clips from the paths recorded in `spec`.
    pub fn load(spec: ScenarioSpec, base: &Path) -> Result<Self> {
        let target = wavio::read_wav(base.join(&spec.target_clip))?;
        let interference = wavio::read_wav(base.join(&spec.interference_clip))?;
        Self::new(spec, Arc::new(target), Arc::new(interference))
    }

    pub fn new(spec: ScenarioSpec, target: Arc<AudioClip>, interference: Arc<AudioClip>) -> Result<Self> {
        for (name, clip) in [("target", &target), ("interference", &interference)] {
            if clip.sample_rate() != spec.sample_rate {
                return Err(Error::Input(format!(
                    "{name} clip is {} Hz, scenario runs at {} Hz",
                    clip.sample_rate(),
                    spec.sample_rate
                )));
            }
            if clip.is_empty() {
                return Err(Error::Input(format!("{name} clip is empty")));
            }
        }
        Ok(Self {
            spec,
            target,
            interference,
        })
    }
}

/// Simulated microphone signals and the clean reverberant images.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub mixture: AudioClip,
    pub target_image: AudioClip,
    pub interference_image: AudioClip,
}

/// Convolves both sources with their RIRs and sums them per channel. The
/// interference is looped or cut to the target length; no level scaling is
/// applied.
pub fn synthesize_mixture(scenario: &MixtureScenario) -> Result<Mixture> {
    let spec = &scenario.spec;
    let len = scenario.target.len();
    let target_src: Vec<f64> = scenario.target.channel(0).to_vec();
    let interf_ch = scenario.interference.channel(0);
    let interf_src: Vec<f64> = (0..len).map(|n| interf_ch[n % interf_ch.len()]).collect();

    let target_rir = image_method_rir(&spec.room_for(spec.target_position))?;
    let interf_rir = image_method_rir(&spec.room_for(spec.interference_position))?;
    let target_image = convolve_rows(&target_src, &target_rir, len);
    let interference_image = convolve_rows(&interf_src, &interf_rir, len);
    let mixture = &target_image + &interference_image;
    Ok(Mixture {
        mixture: AudioClip::new(mixture, spec.sample_rate)?,
        target_image: AudioClip::new(target_image, spec.sample_rate)?,
        interference_image: AudioClip::new(interference_image, spec.sample_rate)?,
    })
}

/// Uniform sampling ranges for simulated scenarios. Room, absorption and
/// speed-of-sound ranges default to the reference experiment design; the
/// placement ranges are free choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioRanges {
    pub width: [f64; 2],
    pub length: [f64; 2],
    pub height: [f64; 2],
    pub absorption: [f64; 2],
    pub speed_of_sound: [f64; 2],
    /// Minimum distance from any wall for the array and both sources.
    pub wall_margin: f64,
    pub array_height: [f64; 2],
    pub source_height: [f64; 2],
    /// Horizontal distance from the array center to each source.
    pub target_distance: [f64; 2],
    pub interference_distance: [f64; 2],
    /// Minimum azimuth separation between target and interference, degrees.
    pub min_separation_deg: f64,
    pub max_order: usize,
    pub rir_length: usize,
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        Self {
            width: [5.0, 15.0],
            length: [5.0, 15.0],
            height: [3.0, 4.0],
            absorption: [0.2, 0.8],
            speed_of_sound: [340.0, 355.0],
            wall_margin: 0.5,
            array_height: [0.8, 1.5],
            source_height: [1.2, 1.9],
            target_distance: [1.0, 2.0],
            interference_distance: [1.5, 3.0],
            min_separation_deg: 45.0,
            max_order: 20,
            rir_length: 8192,
        }
    }
}

impl ScenarioRanges {
    /// Checks internal consistency; unless `unchecked`, also that room,
    /// absorption and speed-of-sound ranges stay inside the reference ones.
    pub fn validate(&self, unchecked: bool) -> Result<()> {
        let pairs: [(&str, [f64; 2]); 9] = [
            ("width", self.width),
            ("length", self.length),
            ("height", self.height),
            ("absorption", self.absorption),
            ("speed_of_sound", self.speed_of_sound),
            ("array_height", self.array_height),
            ("source_height", self.source_height),
            ("target_distance", self.target_distance),
            ("interference_distance", self.interference_distance),
        ];
        for (name, [lo, hi]) in pairs {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                return Err(Error::config(name, format!("[{lo}, {hi}] is not a valid range")));
            }
        }
        if !(self.absorption[0] > 0.0 && self.absorption[1] <= 1.0) {
            return Err(Error::config("absorption", "must lie in (0, 1]"));
        }
        if self.width[0] <= 0.0 || self.length[0] <= 0.0 || self.height[0] <= 0.0 {
            return Err(Error::config("dimensions", "must be positive"));
        }
        if self.rir_length == 0 {
            return Err(Error::config("rir_length", "must be positive"));
        }
        if !(0.0..180.0).contains(&self.min_separation_deg) {
            return Err(Error::config("min_separation_deg", "must lie in [0, 180)"));
        }
        if !unchecked {
            let reference = Self::default();
            let within = |name: &str, r: [f64; 2], p: [f64; 2]| {
                if r[0] < p[0] || r[1] > p[1] {
                    Err(Error::config(
                        name,
                        format!("[{}, {}] leaves the supported range [{}, {}]; pass --unchecked to allow", r[0], r[1], p[0], p[1]),
                    ))
                } else {
                    Ok(())
                }
            };
            within("width", self.width, reference.width)?;
            within("length", self.length, reference.length)?;
            within("height", self.height, reference.height)?;
            within("absorption", self.absorption, reference.absorption)?;
            within("speed_of_sound", self.speed_of_sound, reference.speed_of_sound)?;
        }
        Ok(())
    }
}

/// Source audio grouped by role: `target/` plus one directory per
/// interference kind (`ambient/`, `music/`, `speech/`).
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub root: PathBuf,
    pub targets: Vec<(PathBuf, Arc<AudioClip>)>,
    pub interferers: BTreeMap<InterferenceKind, Vec<(PathBuf, Arc<AudioClip>)>>,
}

impl Corpus {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_owned();
        if !root.is_dir() {
            return Err(Error::Input(format!("corpus directory {} does not exist", root.display())));
        }
        let targets = load_dir(&root, "target")?;
        let mut interferers = BTreeMap::new();
        for kind in InterferenceKind::ALL {
            let clips = load_dir(&root, kind.dir_name())?;
            if !clips.is_empty() {
                interferers.insert(kind, clips);
            }
        }
        let corpus = Self {
            root,
            targets,
            interferers,
        };
        corpus.check()?;
        Ok(corpus)
    }

    fn check(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Input(format!("no target clips under {}/target", self.root.display())));
        }
        if self.interferers.is_empty() {
            return Err(Error::Input(format!(
                "no interference clips under {} (expected ambient/, music/ or speech/)",
                self.root.display()
            )));
        }
        Ok(())
    }
}

fn load_dir(root: &Path, sub: &str) -> Result<Vec<(PathBuf, Arc<AudioClip>)>> {
    let dir = root.join(sub);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let clip = wavio::read_wav(&p)?;
            let rel = p.strip_prefix(root).map(Path::to_path_buf).unwrap_or(p);
            Ok((rel, Arc::new(clip)))
        })
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Draws `count` scenarios, cycling through the interference kinds present
/// in the corpus. Scenario `i` uses its own ChaCha stream of `seed`, so it
/// is reproducible independently of the others.
pub fn sample_scenarios(
    corpus: &Corpus,
    geometry: &ArrayGeometry,
    ranges: &ScenarioRanges,
    count: usize,
    seed: u64,
) -> Result<Vec<MixtureScenario>> {
    corpus.check()?;
    ranges.validate(true)?;
    let kinds: Vec<InterferenceKind> = corpus.interferers.keys().copied().collect();
    let sample_rate = corpus.targets[0].1.sample_rate();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let kind = kinds[i % kinds.len()];
            let (target_path, target) = &corpus.targets[rng.random_range(0..corpus.targets.len())];
            let pool = &corpus.interferers[&kind];
            let (interf_path, interference) = &pool[rng.random_range(0..pool.len())];
            let spec = sample_placement(&mut rng, geometry, ranges, sample_rate)
                .map(|p| ScenarioSpec {
                    id: format!("s{i:04}-{kind}"),
                    kind,
                    seed,
                    target_clip: target_path.clone(),
                    interference_clip: interf_path.clone(),
                    ..p
                })?;
            MixtureScenario::new(spec, target.clone(), interference.clone())
        })
        .collect()
}

fn sample_placement(
    rng: &mut ChaCha8Rng,
    geometry: &ArrayGeometry,
    ranges: &ScenarioRanges,
    sample_rate: u32,
) -> Result<ScenarioSpec> {
    let margin = ranges.wall_margin;
    for _ in 0..1000 {
        let dims = [uniform(rng, ranges.width), uniform(rng, ranges.length), uniform(rng, ranges.height)];
        let inside = |p: &[f64; 3]| (0..3).all(|k| p[k] >= margin && p[k] <= dims[k] - margin);
        let center = [
            uniform(rng, [margin, dims[0] - margin]),
            uniform(rng, [margin, dims[1] - margin]),
            uniform(rng, ranges.array_height),
        ];
        let yaw = rng.random_range(0.0..360.0);
        let absorption = uniform(rng, ranges.absorption);
        let c = uniform(rng, ranges.speed_of_sound);
        let place = |dist: [f64; 2], rng: &mut ChaCha8Rng| -> Option<([f64; 3], f64)> {
            for _ in 0..100 {
                let az: f64 = rng.random_range(0.0..360.0);
                let d = uniform(rng, dist);
                let (s, co) = az.to_radians().sin_cos();
                let p = [center[0] + d * co, center[1] + d * s, uniform(rng, ranges.source_height)];
                if inside(&p) {
                    return Some((p, az));
                }
            }
            None
        };
        let Some((target, t_az)) = place(ranges.target_distance, rng) else { continue };
        let mut interference = None;
        for _ in 0..100 {
            if let Some((p, az)) = place(ranges.interference_distance, rng) {
                let sep = (az - t_az).rem_euclid(360.0);
                if sep.min(360.0 - sep) >= ranges.min_separation_deg {
                    interference = Some(p);
                    break;
                }
            }
        }
        let Some(interference) = interference else { continue };
        if !inside(&center) {
            continue;
        }
        let mut spec = ScenarioSpec {
            id: String::new(),
            kind: InterferenceKind::Ambient,
            seed: 0,
            dimensions: dims,
            absorption,
            speed_of_sound: c,
            max_order: ranges.max_order,
            rir_length: ranges.rir_length,
            sample_rate,
            array_center: center,
            array_yaw_deg: yaw,
            array_geometry: geometry.with_speed_of_sound(c.clamp(300.0, 400.0))?,
            target_position: target,
            interference_position: interference,
            target_doa: Doa::from_vector([1.0, 0.0, 0.0])?,
            target_clip: PathBuf::new(),
            interference_clip: PathBuf::new(),
        };
        spec.target_doa = spec.doa_of(target)?;
        return Ok(spec);
    }
    Err(Error::Input("could not place sources with the requested ranges".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anechoic(source: [f64; 3], mic: [f64; 3]) -> RoomSpec {
        RoomSpec {
            dimensions: [6.0, 5.0, 3.0],
            absorption: [1.0; 6],
            speed_of_sound: 343.0,
            source_position: source,
            mic_positions: vec![mic],
            max_order: 3,
            sample_rate: 16000,
            rir_length: 2048,
        }
    }

    #[test]
    fn mirror_indices() {
        assert_eq!(mirror(0, 5.0, 1.0), (1.0, 0, 0));
        assert_eq!(mirror(1, 5.0, 1.0), (9.0, 0, 1));
        assert_eq!(mirror(-1, 5.0, 1.0), (-1.0, 1, 0));
        assert_eq!(mirror(2, 5.0, 1.0), (11.0, 1, 1));
        assert_eq!(mirror(-3, 5.0, 1.0), (-11.0, 2, 1));
    }

    #[test]
    fn anechoic_single_impulse() {
        // 343 m/s at 16 kHz: 2.1437... m is exactly 100 samples
        let r = 100.0 * 343.0 / 16000.0;
        let room = anechoic([1.0, 2.0, 1.5], [1.0 + r, 2.0, 1.5]);
        let rir = image_method_rir(&room).unwrap();
        let row = rir.row(0);
        let (peak_idx, peak) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert_eq!(peak_idx, 100);
        assert!((peak - 1.0 / (4.0 * PI * r)).abs() < 1e-9);
        let rest: f64 = row.iter().enumerate().filter(|(i, _)| *i != 100).map(|(_, v)| v.abs()).sum();
        assert!(rest < 1e-9);
    }

    #[test]
    fn inverse_distance_law() {
        let r = 50.0 * 343.0 / 16000.0;
        let near = image_method_rir(&anechoic([1.0, 1.0, 1.5], [1.0 + r, 1.0, 1.5])).unwrap();
        let far = image_method_rir(&anechoic([1.0, 1.0, 1.5], [1.0 + 2.0 * r, 1.0, 1.5])).unwrap();
        let peak = |a: &Array2<f64>| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ratio = peak(&far) / peak(&near);
        assert!((ratio - 0.5).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn image_count_per_order() {
        let mut room = anechoic([1.0, 2.0, 1.5], [3.0, 2.5, 1.2]);
        room.max_order = 6;
        let images = image_sources(&room, &room.mic_positions[0]);
        for k in 0..=6usize {
            let count = images.iter().filter(|im| im.order == k).count();
            let expected = if k == 0 { 1 } else { 4 * k * k + 2 };
            assert_eq!(count, expected, "order {k}");
        }
    }

    #[test]
    fn rejects_bad_rooms() {
        let mut room = anechoic([1.0, 2.0, 1.5], [1.0, 2.0, 1.5]);
        assert!(matches!(image_method_rir(&room), Err(Error::Geometry(_))));
        room.mic_positions[0] = [7.0, 1.0, 1.0];
        assert!(image_method_rir(&room).is_err());
        room.mic_positions[0] = [2.0, 1.0, 1.0];
        room.absorption[2] = 0.0;
        assert!(image_method_rir(&room).is_err());
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let h = Array2::from_shape_vec((2, 3), vec![0.5, 0.25, -1.0, 1.0, 0.0, 0.0]).unwrap();
        let y = convolve_rows(&x, &h, 8);
        for r in 0..2 {
            for n in 0..8 {
                let direct: f64 = (0..3)
                    .filter(|&k| n >= k && n - k < x.len())
                    .map(|k| h[[r, k]] * x[n - k])
                    .sum();
                assert!((y[[r, n]] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ranges_validation() {
        let mut r = ScenarioRanges::default();
        r.validate(false).unwrap();
        r.absorption = [0.2, 0.9];
        assert!(matches!(r.validate(false), Err(Error::Config { ref field, .. }) if field == "absorption"));
        assert!(r.validate(true).is_ok());
        r.absorption = [0.5, 0.3];
        assert!(r.validate(true).is_err());
    }
}
