//! Coarse target/noise masks from a banded beamformed-to-average power ratio.
//!
//! For each frame `t` and band `b` the ratio
//!
//! ```text
//! R_b(t) = Σ_f H_b(f) |Σ_d W_d(f) Y_d(t,f)|²  /  (D Σ_f H_b(f) Σ_d |Y_d(t,f)|²)
//! ```
//!
//! lies in `[0, 1]` by Cauchy-Schwarz. It is spread back over the bins of its
//! band, and the per-bin upper and lower `α`-percentile extremes across time
//! become the target and noise masks.

use ndarray::{Array2, ArrayView2, Axis};

use crate::array::SteeringVector;
use crate::error::{Error, Result};
use crate::stft::MultichannelSpectrogram;

/// Contiguous, non-overlapping bands covering bins `0..=N/2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filterbank {
    bounds: Vec<(usize, usize)>,
}

impl Filterbank {
    /// Inclusive `(lower, upper)` bin bounds per band.
    pub fn new(bounds: Vec<(usize, usize)>, frame_size: usize) -> Result<Self> {
        let last_bin = frame_size / 2;
        let Some(first) = bounds.first() else {
            return Err(Error::param("filterbank", "no bands"));
        };
        if first.0 != 0 {
            return Err(Error::param("filterbank", "first band must start at bin 0"));
        }
        for (b, &(lo, hi)) in bounds.iter().enumerate() {
            if lo > hi {
                return Err(Error::param("filterbank", format!("band {b} is empty")));
            }
            if let Some(&(next_lo, _)) = bounds.get(b + 1) {
                if next_lo != hi + 1 {
                    return Err(Error::param(
                        "filterbank",
                        format!("band {} must start right after bin {hi}", b + 1),
                    ));
                }
            }
        }
        if bounds.last().map(|b| b.1) != Some(last_bin) {
            return Err(Error::param("filterbank", format!("last band must end at bin {last_bin}")));
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[(usize, usize)] {
        &self.bounds
    }

    pub fn num_bands(&self) -> usize {
        self.bounds.len()
    }

    pub fn num_bins(&self) -> usize {
        self.bounds.last().map_or(0, |b| b.1 + 1)
    }

    /// Band index containing bin `f`.
    pub fn band_of(&self, f: usize) -> Option<usize> {
        self.bounds.iter().position(|&(lo, hi)| lo <= f && f <= hi)
    }

    /// Filter response `H_b(f)`.
    pub fn response(&self, b: usize, f: usize) -> f64 {
        let (lo, hi) = self.bounds[b];
        if lo <= f && f <= hi {
            1.0
        } else {
            0.0
        }
    }
}

/// Two-band filterbank split at separator bin `gamma`: bins `0..γ` and `γ..=N/2`.
pub fn make_filterbank(frame_size: usize, gamma: usize) -> Result<Filterbank> {
    let last = frame_size / 2;
    if gamma < 1 || gamma > last {
        return Err(Error::param("gamma", format!("{gamma} outside [1, {last}]")));
    }
    Filterbank::new(vec![(0, gamma - 1), (gamma, last)], frame_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioMap {
    band_ratios: Array2<f64>,
    expanded: Array2<f64>,
}

impl RatioMap {
    /// `[bands, frames]`
    pub fn band_ratios(&self) -> &Array2<f64> {
        &self.band_ratios
    }

    /// `[frames, bins]`
    pub fn expanded(&self) -> &Array2<f64> {
        &self.expanded
    }

    pub fn num_frames(&self) -> usize {
        self.expanded.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.expanded.ncols()
    }

    /// Builds a map directly from per-bin values, for thresholding
    /// arbitrary `[frames, bins]` data.
    pub fn from_expanded(expanded: Array2<f64>) -> Self {
        let band_ratios = expanded.t().to_owned();
        Self {
            band_ratios,
            expanded,
        }
    }
}

pub fn power_ratio(
    spec: &MultichannelSpectrogram,
    steering: &SteeringVector,
    fb: &Filterbank,
) -> Result<RatioMap> {
    let (d, frames, bins) = (spec.num_channels(), spec.num_frames(), spec.num_bins());
    if steering.num_channels() != d || steering.num_bins() != bins {
        return Err(Error::Shape(format!(
            "steering is {}x{}, spectrogram has {d} channels and {bins} bins",
            steering.num_channels(),
            steering.num_bins()
        )));
    }
    if fb.num_bins() != bins {
        return Err(Error::Shape(format!(
            "filterbank covers {} bins, spectrogram has {bins}",
            fb.num_bins()
        )));
    }
    let y = spec.frames();
    let w = steering.weights();
    let mut band_ratios = Array2::<f64>::zeros((fb.num_bands(), frames));
    for t in 0..frames {
        for (b, &(lo, hi)) in fb.bounds().iter().enumerate() {
            let mut beam = 0.0;
            let mut total = 0.0;
            for f in lo..=hi {
                let mut acc = num_complex::Complex64::default();
                for ch in 0..d {
                    let v = y[[ch, t, f]];
                    acc += w[[ch, f]] * v;
                    total += v.norm_sqr();
                }
                beam += acc.norm_sqr();
            }
            let denom = d as f64 * total;
            band_ratios[[b, t]] = if denom > 0.0 { beam / denom } else { 0.0 };
        }
    }
    let expanded = Array2::from_shape_fn((frames, bins), |(t, f)| {
        let b = fb.band_of(f).expect("filterbank covers every bin");
        band_ratios[[b, t]]
    });
    Ok(RatioMap {
        band_ratios,
        expanded,
    })
}

/// Per-bin thresholds `T_X(f)` (upper) and `T_N(f)` (lower).
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub target: Vec<f64>,
    pub noise: Vec<f64>,
}

/// Number of frames in each `α`-percentile tail: `⌊αT/100⌋`.
pub fn tail_count(alpha: f64, frames: usize) -> usize {
    (alpha * frames as f64 / 100.0 + 1e-9).floor() as usize
}

/// Rank-based percentile thresholds over frames, per bin.
///
/// With `k = ⌊αT/100⌋` and `s` the sorted values of a bin, `T_X = s[T-k-1]`
/// (the nearest-rank `100-α` percentile) and `T_N = s[k]`, its mirror image
/// from the bottom. Under the strict comparisons of [`binary_masks`] each
/// mask then holds exactly `k` frames when values are distinct.
pub fn thresholds(ratio: &RatioMap, alpha: f64) -> Result<Thresholds> {
    if !(alpha > 0.0 && alpha < 50.0) {
        return Err(Error::param("alpha", format!("{alpha} outside (0, 50)")));
    }
    let frames = ratio.num_frames();
    if frames < 2 {
        return Err(Error::Size(format!("need at least 2 frames, got {frames}")));
    }
    let k = tail_count(alpha, frames);
    let (mut target, mut noise) = (Vec::new(), Vec::new());
    let mut column = Vec::with_capacity(frames);
    for col in ratio.expanded().axis_iter(Axis(1)) {
        column.clear();
        column.extend(col.iter().copied());
        column.sort_by(f64::total_cmp);
        target.push(column[frames - k - 1]);
        noise.push(column[k]);
    }
    Ok(Thresholds { target, noise })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MaskKind {
    Binary,
    Soft,
}

/// Time-frequency mask `[frames, bins]` with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMask {
    values: Array2<f64>,
    kind: MaskKind,
}

impl TfMask {
    pub fn binary(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Input("binary mask holds a value other than 0 or 1".into()));
        }
        Ok(Self {
            values,
            kind: MaskKind::Binary,
        })
    }

    pub fn soft(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input("soft mask value outside [0, 1]".into()));
        }
        Ok(Self {
            values,
            kind: MaskKind::Soft,
        })
    }

    pub fn ones(frames: usize, bins: usize) -> Self {
        Self {
            values: Array2::ones((frames, bins)),
            kind: MaskKind::Binary,
        }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn num_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.values.ncols()
    }

    /// Active frames per bin (sum of mask values along time).
    pub fn column_sums(&self) -> Vec<f64> {
        self.values.sum_axis(Axis(0)).to_vec()
    }

    /// CSV: one row per frame, one column per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 2);
        for row in self.values.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| format_mask_value(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Binary PGM (P5) image, time on the horizontal axis and frequency
    /// increasing upwards; a value of 1 renders black.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (frames, bins) = self.values.dim();
        let mut out = format!("P5\n{frames} {bins}\n255\n").into_bytes();
        for f in (0..bins).rev() {
            for t in 0..frames {
                let v = self.values[[t, f]].clamp(0.0, 1.0);
                out.push((255.0 * (1.0 - v)).round() as u8);
            }
        }
        out
    }
}

fn format_mask_value(v: f64) -> String {
    if v == 0.0 || v == 1.0 {
        format!("{}", v as u8)
    } else {
        format!("{v:.6}")
    }
}

/// `M_X = [R > T_X]`, `M_N = [R < T_N]`; ties go to neither mask.
pub fn binary_masks(ratio: &RatioMap, thr: &Thresholds) -> Result<(TfMask, TfMask)> {
    let bins = ratio.num_bins();
    if thr.target.len() != bins || thr.noise.len() != bins {
        return Err(Error::Shape(format!(
            "{} thresholds for {bins} bins",
            thr.target.len()
        )));
    }
    let r = ratio.expanded();
    let target = Array2::from_shape_fn(r.dim(), |(t, f)| f64::from(u8::from(r[[t, f]] > thr.target[f])));
    let noise = Array2::from_shape_fn(r.dim(), |(t, f)| f64::from(u8::from(r[[t, f]] < thr.noise[f])));
    Ok((TfMask::binary(target)?, TfMask::binary(noise)?))
}

/// Everything the mask stage produces for one recording.
#[derive(Debug, Clone)]
pub struct KissMasks {
    pub ratio: RatioMap,
    pub thresholds: Thresholds,
    pub target: TfMask,
    pub noise: TfMask,
}

/// Filterbank → ratio → thresholds → masks.
pub fn kiss_masks(
    spec: &MultichannelSpectrogram,
    steering: &SteeringVector,
    gamma: usize,
    alpha: f64,
) -> Result<KissMasks> {
    let fb = make_filterbank(spec.config().frame_size, gamma)?;
    let ratio = power_ratio(spec, steering, &fb)?;
    let thresholds = thresholds(&ratio, alpha)?;
    let (target, noise) = binary_masks(&ratio, &thresholds)?;
    Ok(KissMasks {
        ratio,
        thresholds,
        target,
        noise,
    })
}
