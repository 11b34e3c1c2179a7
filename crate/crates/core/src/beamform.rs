//! Mask-driven spatial covariance estimation, GEV beamforming with BAN
//! post-filtering, and the delay-and-sum baseline.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{self, ArrayGeometry, Doa, SteeringVector};
use crate::error::{Error, Result};
use crate::linalg;
use crate::maskgen::{self, KissMasks, TfMask};
use crate::stft::{self, MultichannelSpectrogram, StftConfig};
use crate::wavio::AudioClip;

/// Per-frequency `D×D` Hermitian matrices, stored `[bins, D, D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm(Array3<Complex64>);

impl Scm {
    pub fn new(matrices: Array3<Complex64>) -> Result<Self> {
        let s = matrices.shape();
        if s[1] != s[2] {
            return Err(Error::Shape(format!("SCM blocks are {}x{}", s[1], s[2])));
        }
        Ok(Self(matrices))
    }

    pub fn matrices(&self) -> &Array3<Complex64> {
        &self.0
    }

    pub fn bin(&self, f: usize) -> ArrayView2<'_, Complex64> {
        self.0.index_axis(Axis(0), f)
    }

    pub fn num_bins(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.mapv(|z| z * c))
    }

    /// Diagonally loaded copy, see [`load_diagonal`].
    pub fn loaded(&self, params: &GevParams) -> Self {
        let level = self.floor_level();
        let mut out = self.0.clone();
        for (f, mut m) in out.outer_iter_mut().enumerate() {
            m.assign(&load_diagonal(self.bin(f), level, params));
        }
        Self(out)
    }

    /// Mean of `tr(Φ(f))/D` over bins, or 1 for an all-zero SCM. The
    /// loading floor is measured in this unit.
    pub fn floor_level(&self) -> f64 {
        let d = self.dim() as f64;
        let total: f64 = self
            .0
            .outer_iter()
            .map(|m| (0..m.nrows()).map(|i| m[[i, i]].re).sum::<f64>() / d)
            .sum();
        let mean = total / self.num_bins().max(1) as f64;
        if mean > 0.0 && mean.is_finite() {
            mean
        } else {
            1.0
        }
    }

    /// Largest `‖Φ − Φᴴ‖_F` over bins.
    pub fn hermitian_defect(&self) -> f64 {
        self.0
            .outer_iter()
            .map(|m| {
                let d = m.nrows();
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += (m[[i, j]] - m[[j, i]].conj()).norm_sqr();
                    }
                }
                acc.sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Target and noise covariance estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmSet {
    pub phi_xx: Scm,
    pub phi_nn: Scm,
}

/// GEV solver regularization. Before factorization the noise SCM becomes
/// `Φ + loading·(tr(Φ)/D + floor·P)·I`, with `P` the mean per-bin power of
/// the SCM ([`Scm::floor_level`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub loading: f64,
    pub floor: f64,
    #[serde(default)]
    pub postfilter: Postfilter,
}

impl Default for GevParams {
    fn default() -> Self {
        Self {
            loading: 1e-6,
            floor: 1e-12,
            postfilter: Postfilter::default(),
        }
    }
}

/// Per-bin gain applied after the GEV vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Postfilter {
    /// Blind analytic normalization from the noise SCM.
    #[default]
    Ban,
    /// Projection onto the reference microphone through the target SCM,
    /// `(Φ_XX F)_ref / (Fᴴ Φ_XX F)`.
    Projection,
}

impl GevParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.loading >= 0.0 && self.loading.is_finite()) {
            return Err(Error::param("loading", format!("{} must be finite and >= 0", self.loading)));
        }
        if !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(Error::param("floor", format!("{} must be finite and >= 0", self.floor)));
        }
        Ok(())
    }
}

/// Per-bin beamformer `F(f)` (`[bins, D]`, unit norm) and real gain `g(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    f_gev: Array2<Complex64>,
    g_ban: Vec<f64>,
    eigenvalues: Vec<f64>,
    fallback_bins: Vec<usize>,
}

impl BeamformerWeights {
    pub fn new(f_gev: Array2<Complex64>, g_ban: Vec<f64>) -> Result<Self> {
        if f_gev.nrows() != g_ban.len() {
            return Err(Error::Shape(format!(
                "{} weight vectors for {} gains",
                f_gev.nrows(),
                g_ban.len()
            )));
        }
        if g_ban.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Numeric("gains must be finite and non-negative".into()));
        }
        let bins = g_ban.len();
        Ok(Self {
            f_gev,
            g_ban,
            eigenvalues: vec![f64::NAN; bins],
            fallback_bins: Vec::new(),
        })
    }

    /// `[bins, D]`
    pub fn vectors(&self) -> &Array2<Complex64> {
        &self.f_gev
    }

    pub fn gains(&self) -> &[f64] {
        &self.g_ban
    }

    /// Principal generalized eigenvalue per bin (NaN on fallback bins).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Bins whose target SCM was empty and that use delay-and-sum weights.
    pub fn fallback_bins(&self) -> &[usize] {
        &self.fallback_bins
    }

    pub fn num_bins(&self) -> usize {
        self.g_ban.len()
    }

    /// Rescales each bin so the output approximates the target image at
    /// microphone `reference`. The complex projection gain is split into a
    /// real gain and a phase rotation of `F`. Fallback bins are unchanged.
    pub fn apply_projection(mut self, phi_xx: &Scm, reference: usize) -> Result<Self> {
        let (bins, d) = self.f_gev.dim();
        if phi_xx.num_bins() != bins || phi_xx.dim() != d {
            return Err(Error::Shape(format!("weights are {bins}x{d}, target SCM is {}x{}", phi_xx.num_bins(), phi_xx.dim())));
        }
        if reference >= d {
            return Err(Error::param("reference_channel", format!("{reference} out of range")));
        }
        for f in 0..bins {
            if self.fallback_bins.contains(&f) {
                continue;
            }
            let v = self.f_gev.row(f).to_owned();
            let pv = phi_xx.bin(f).dot(&v);
            let quad: f64 = v.iter().zip(pv.iter()).map(|(a, b)| (a.conj() * b).re).sum();
            let g = if quad > 0.0 { pv[reference] / quad } else { Complex64::default() };
            if g.norm() > 0.0 && g.norm().is_finite() {
                // g Fᴴ Y = |g| (F e^{-j arg g})ᴴ Y
                let rot = (g / g.norm()).conj();
                self.f_gev.row_mut(f).mapv_inplace(|z| z * rot);
                self.g_ban[f] = g.norm();
            } else {
                self.g_ban[f] = 0.0;
            }
        }
        Ok(self)
    }

    /// Replaces the gains with BAN gains computed from `phi_nn`; fallback
    /// bins keep their delay-and-sum gain.
    pub fn apply_ban(mut self, phi_nn: &Scm) -> Result<Self> {
        let gains = ban_gain(&self, phi_nn)?;
        for (f, g) in gains.into_iter().enumerate() {
            if !self.fallback_bins.contains(&f) {
                self.g_ban[f] = g;
            }
        }
        Ok(self)
    }
}

/// `Φ(f) = Σ_t M(t,f) Y(t,f) Y(t,f)ᴴ`, without normalization by mask mass.
pub fn estimate_scm(spec: &MultichannelSpectrogram, mask: &TfMask) -> Result<Scm> {
    let (d, frames, bins) = (spec.num_channels(), spec.num_frames(), spec.num_bins());
    if mask.num_frames() != frames || mask.num_bins() != bins {
        return Err(Error::Shape(format!(
            "mask is {}x{}, spectrogram is {frames}x{bins}",
            mask.num_frames(),
            mask.num_bins()
        )));
    }
    let y = spec.frames();
    let m = mask.values();
    let mut out = Array3::<Complex64>::zeros((bins, d, d));
    for f in 0..bins {
        for t in 0..frames {
            let weight = m[[t, f]];
            if weight == 0.0 {
                continue;
            }
            for i in 0..d {
                let yi = y[[i, t, f]] * weight;
                for j in i..d {
                    out[[f, i, j]] += yi * y[[j, t, f]].conj();
                }
            }
        }
        for i in 0..d {
            out[[f, i, i]] = Complex64::new(out[[f, i, i]].re, 0.0);
            for j in i + 1..d {
                out[[f, j, i]] = out[[f, i, j]].conj();
            }
        }
    }
    Scm::new(out)
}

/// `Φ + ε (tr(Φ)/D + δ·level) I`
pub fn load_diagonal(phi: ArrayView2<'_, Complex64>, level: f64, params: &GevParams) -> Array2<Complex64> {
    let d = phi.nrows();
    let trace: f64 = (0..d).map(|i| phi[[i, i]].re).sum();
    let mu = params.loading * (trace / d as f64 + params.floor * level);
    let mut out = phi.to_owned();
    for i in 0..d {
        out[[i, i]] += mu;
    }
    out
}

/// Principal generalized eigenvector of `(Φ_XX, Φ_NN)` per bin.
///
/// The pencil is reduced with the Cholesky factor of the loaded noise SCM to
/// a standard Hermitian problem. Each vector is scaled to unit norm and
/// rotated so that its inner product with the delay-and-sum weights
/// `conj(W(f))` is real and non-negative. Bins with an all-zero target SCM
/// fall back to delay-and-sum weights. Gains are left at 1 (see
/// [`ban_gain`] / [`BeamformerWeights::apply_ban`]).
pub fn solve_gev(scms: &ScmSet, steering: &SteeringVector, params: &GevParams) -> Result<BeamformerWeights> {
    params.validate()?;
    let (bins, d) = (scms.phi_xx.num_bins(), scms.phi_xx.dim());
    if scms.phi_nn.num_bins() != bins || scms.phi_nn.dim() != d {
        return Err(Error::Shape("target and noise SCMs differ in shape".into()));
    }
    if steering.num_bins() != bins || steering.num_channels() != d {
        return Err(Error::Shape(format!(
            "steering is {}x{}, SCMs are {bins} bins of {d}x{d}",
            steering.num_channels(),
            steering.num_bins()
        )));
    }
    let mut f_gev = Array2::<Complex64>::zeros((bins, d));
    let mut eigenvalues = vec![f64::NAN; bins];
    let mut fallback_bins = Vec::new();
    let mut g_ban = vec![1.0; bins];
    let level = scms.phi_nn.floor_level();
    for f in 0..bins {
        let xx = scms.phi_xx.bin(f);
        let nn = scms.phi_nn.bin(f);
        if xx.iter().chain(nn.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numeric(format!("non-finite SCM entry at bin {f}")));
        }
        let ds = steering.bin(f).mapv(|w| w.conj());
        if (0..d).all(|i| xx[[i, i]].re <= 0.0) {
            log::debug!("bin {f}: empty target SCM, using delay-and-sum weights");
            let norm = (d as f64).sqrt();
            f_gev.row_mut(f).assign(&ds.mapv(|z| z / norm));
            g_ban[f] = 1.0 / norm;
            fallback_bins.push(f);
            continue;
        }
        let (vector, lambda) = principal_generalized_eigvec(xx, nn, level, params)
            .ok_or_else(|| Error::Solver {
                bin: f,
                reason: "noise SCM not positive definite after diagonal loading".into(),
            })?;
        f_gev.row_mut(f).assign(&align_phase(vector, &ds));
        eigenvalues[f] = lambda;
    }
    Ok(BeamformerWeights {
        f_gev,
        g_ban,
        eigenvalues,
        fallback_bins,
    })
}

fn principal_generalized_eigvec(
    xx: ArrayView2<'_, Complex64>,
    nn: ArrayView2<'_, Complex64>,
    level: f64,
    params: &GevParams,
) -> Option<(Array1<Complex64>, f64)> {
    let d = xx.nrows();
    let l = linalg::cholesky(&load_diagonal(nn, level, params))?;
    // C = L⁻¹ Φ_XX L⁻ᴴ, built column by column: M = L⁻¹ Φ_XX, C = (L⁻¹ Mᴴ)ᴴ
    let mut m = Array2::<Complex64>::zeros((d, d));
    for j in 0..d {
        m.column_mut(j).assign(&linalg::forward_solve(&l, &xx.column(j).to_owned()));
    }
    let mh = m.t().mapv(|z| z.conj());
    let mut c = Array2::<Complex64>::zeros((d, d));
    for j in 0..d {
        let col = linalg::forward_solve(&l, &mh.column(j).to_owned());
        for i in 0..d {
            c[[j, i]] = col[i].conj();
        }
    }
    let ch = c.t().mapv(|z| z.conj());
    let c = (&c + &ch).mapv(|z| z * 0.5);
    let (values, vectors) = linalg::hermitian_eigen(&c);
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)?;
    let v = linalg::adjoint_back_solve(&l, &vectors.column(best).to_owned());
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    Some((v.mapv(|z| z / norm), values[best]))
}

fn align_phase(v: Array1<Complex64>, reference: &Array1<Complex64>) -> Array1<Complex64> {
    let inner: Complex64 = reference.iter().zip(v.iter()).map(|(r, x)| r.conj() * x).sum();
    let anchor = if inner.norm() > 0.0 {
        inner
    } else {
        v.iter().copied().find(|z| z.norm() > 0.0).unwrap_or(Complex64::new(1.0, 0.0))
    };
    let rot = anchor.conj() / anchor.norm();
    v.mapv(|z| z * rot)
}

/// BAN gain `√(Fᴴ Φ Φ F) / (D² Fᴴ Φ F)` per bin; 0 where `Fᴴ Φ F = 0`.
///
/// Some BAN variants place `D` inside the square root instead; the
/// difference is a constant factor per array.
pub fn ban_gain(weights: &BeamformerWeights, phi_nn: &Scm) -> Result<Vec<f64>> {
    let (bins, d) = weights.vectors().dim();
    if phi_nn.num_bins() != bins || phi_nn.dim() != d {
        return Err(Error::Shape(format!(
            "weights are {bins}x{d}, noise SCM is {}x{}",
            phi_nn.num_bins(),
            phi_nn.dim()
        )));
    }
    let dd = (d * d) as f64;
    Ok((0..bins)
        .map(|f| {
            let phi = phi_nn.bin(f);
            let v = weights.vectors().row(f);
            let pv = phi.dot(&v);
            let quad: f64 = v.iter().zip(pv.iter()).map(|(a, b)| (a.conj() * b).re).sum();
            let num: f64 = pv.iter().map(|z| z.norm_sqr()).sum();
            if quad > 0.0 {
                let g = num.sqrt() / (dd * quad);
                if g.is_finite() {
                    g
                } else {
                    0.0
                }
            } else {
                0.0
            }
        })
        .collect())
}

/// `Z(t,f) = g(f) F(f)ᴴ Y(t,f)` as a one-channel spectrogram.
pub fn apply_beamformer(spec: &MultichannelSpectrogram, weights: &BeamformerWeights) -> Result<MultichannelSpectrogram> {
    let (d, frames, bins) = (spec.num_channels(), spec.num_frames(), spec.num_bins());
    if weights.vectors().dim() != (bins, d) {
        return Err(Error::Shape(format!(
            "weights are {:?}, spectrogram needs ({bins}, {d})",
            weights.vectors().dim()
        )));
    }
    let y = spec.frames();
    let w = weights.vectors();
    let z = Array2::from_shape_fn((frames, bins), |(t, f)| {
        let mut acc = Complex64::default();
        for ch in 0..d {
            acc += w[[f, ch]].conj() * y[[ch, t, f]];
        }
        acc * weights.gains()[f]
    });
    MultichannelSpectrogram::from_single(z, spec.config(), spec.sample_rate())
}

/// `Z_DS(t,f) = (1/D) Σ_d W_d(f) Y_d(t,f)`
pub fn delay_and_sum(spec: &MultichannelSpectrogram, steering: &SteeringVector) -> Result<MultichannelSpectrogram> {
    let (d, frames, bins) = (spec.num_channels(), spec.num_frames(), spec.num_bins());
    if steering.num_channels() != d || steering.num_bins() != bins {
        return Err(Error::Shape(format!(
            "steering is {}x{}, spectrogram has {d} channels and {bins} bins",
            steering.num_channels(),
            steering.num_bins()
        )));
    }
    let y = spec.frames();
    let w = steering.weights();
    let z = Array2::from_shape_fn((frames, bins), |(t, f)| {
        let mut acc = Complex64::default();
        for ch in 0..d {
            acc += w[[ch, f]] * y[[ch, t, f]];
        }
        acc / d as f64
    });
    MultichannelSpectrogram::from_single(z, spec.config(), spec.sample_rate())
}

/// Parameters shared by every enhancement method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhanceParams {
    pub stft: StftConfig,
    /// Separator bin of the two-band filterbank.
    pub gamma: usize,
    /// Percentile width (percent) of each mask tail.
    pub alpha: f64,
    pub gev: GevParams,
    /// Channel the steering vector (and hence the output) is aligned to.
    pub reference_channel: usize,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            gamma: 100,
            alpha: 25.0,
            gev: GevParams::default(),
            reference_channel: 0,
        }
    }
}

impl EnhanceParams {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        maskgen::make_filterbank(self.stft.frame_size, self.gamma)?;
        if !(self.alpha > 0.0 && self.alpha < 50.0) {
            return Err(Error::param("alpha", format!("{} outside (0, 50)", self.alpha)));
        }
        self.gev.validate()
    }
}

/// Validates channel counts and returns the STFT and steering vector for a
/// recording.
pub fn prepare(
    clip: &AudioClip,
    geometry: &ArrayGeometry,
    doa: &Doa,
    params: &EnhanceParams,
) -> Result<(MultichannelSpectrogram, SteeringVector)> {
    params.validate()?;
    if clip.num_channels() < 2 {
        return Err(Error::Input(format!(
            "beamforming needs at least 2 channels, got {}",
            clip.num_channels()
        )));
    }
    if clip.num_channels() != geometry.num_mics() {
        return Err(Error::Shape(format!(
            "recording has {} channels, geometry has {} microphones",
            clip.num_channels(),
            geometry.num_mics()
        )));
    }
    if params.reference_channel >= clip.num_channels() {
        return Err(Error::param("reference_channel", format!("{} out of range", params.reference_channel)));
    }
    let spec = stft::stft(clip, &params.stft)?;
    let taus = array::tdoa_relative(geometry, doa, clip.sample_rate(), params.reference_channel);
    let steering = array::steering(&taus, params.stft.frame_size)?;
    Ok((spec, steering))
}

/// Delay-and-sum enhancement of a recording.
pub fn ds_enhance(clip: &AudioClip, geometry: &ArrayGeometry, doa: &Doa, params: &EnhanceParams) -> Result<AudioClip> {
    let (spec, steering) = prepare(clip, geometry, doa, params)?;
    stft::istft(&delay_and_sum(&spec, &steering)?)
}

/// GEV-BAN beamforming from arbitrary target/noise masks.
pub fn gev_from_masks(
    spec: &MultichannelSpectrogram,
    steering: &SteeringVector,
    target: &TfMask,
    noise: &TfMask,
    params: &GevParams,
    reference: usize,
) -> Result<(MultichannelSpectrogram, BeamformerWeights)> {
    let scms = ScmSet {
        phi_xx: estimate_scm(spec, target)?,
        phi_nn: estimate_scm(spec, noise)?,
    };
    let weights = solve_gev(&scms, steering, params)?;
    let weights = match params.postfilter {
        Postfilter::Ban => weights.apply_ban(&scms.phi_nn.loaded(params))?,
        Postfilter::Projection => weights.apply_projection(&scms.phi_xx, reference)?,
    };
    if !weights.fallback_bins().is_empty() {
        log::info!("{} bins fell back to delay-and-sum weights", weights.fallback_bins().len());
    }
    let z = apply_beamformer(spec, &weights)?;
    Ok((z, weights))
}

/// Intermediate products of one KISS-GEV run.
#[derive(Debug, Clone)]
pub struct KissGevOutput {
    pub enhanced: AudioClip,
    pub masks: KissMasks,
    pub weights: BeamformerWeights,
}

/// Full pipeline: STFT, DoA-steered power-ratio masks, GEV-BAN, inverse STFT.
pub fn kissgev_enhance(clip: &AudioClip, geometry: &ArrayGeometry, doa: &Doa, params: &EnhanceParams) -> Result<AudioClip> {
    kissgev_enhance_detailed(clip, geometry, doa, params).map(|o| o.enhanced)
}

pub fn kissgev_enhance_detailed(
    clip: &AudioClip,
    geometry: &ArrayGeometry,
    doa: &Doa,
    params: &EnhanceParams,
) -> Result<KissGevOutput> {
    let (spec, steering) = prepare(clip, geometry, doa, params)?;
    let masks = maskgen::kiss_masks(&spec, &steering, params.gamma, params.alpha)?;
    let (z, weights) = gev_from_masks(&spec, &steering, &masks.target, &masks.noise, &params.gev, params.reference_channel)?;
    Ok(KissGevOutput {
        enhanced: stft::istft(&z)?,
        masks,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scm_of(blocks: &[Array2<Complex64>]) -> Scm {
        let d = blocks[0].nrows();
        let mut a = Array3::zeros((blocks.len(), d, d));
        for (f, b) in blocks.iter().enumerate() {
            a.index_axis_mut(Axis(0), f).assign(b);
        }
        Scm::new(a).unwrap()
    }

    fn real_diag(v: &[f64]) -> Array2<Complex64> {
        Array2::from_diag(&Array1::from_iter(v.iter().map(|x| c(*x, 0.0))))
    }

    fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> Array2<Complex64> {
        let b = Array2::from_shape_fn((d, d + 2), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        b.dot(&b.t().mapv(|z| z.conj()))
    }

    fn single_bin_spec(y: Vec<Vec<Complex64>>) -> MultichannelSpectrogram {
        // y[t][d] placed in bin 0 of a 2-point frame; bin 1 left empty
        let d = y[0].len();
        let frames = Array3::from_shape_fn((d, y.len(), 2), |(ch, t, f)| if f == 0 { y[t][ch] } else { c(0.0, 0.0) });
        MultichannelSpectrogram::new(frames, StftConfig::new(2, 1).unwrap(), 16000).unwrap()
    }

    #[test]
    fn scm_outer_product_by_hand() {
        let spec = single_bin_spec(vec![vec![c(1.0, 0.0), c(0.0, 1.0)]]);
        let scm = estimate_scm(&spec, &TfMask::ones(1, 2)).unwrap();
        let phi = scm.bin(0);
        assert_eq!(phi[[0, 0]], c(1.0, 0.0));
        assert_eq!(phi[[0, 1]], c(0.0, -1.0));
        assert_eq!(phi[[1, 0]], c(0.0, 1.0));
        assert_eq!(phi[[1, 1]], c(1.0, 0.0));
    }

    #[test]
    fn scm_zero_mask_and_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let frames = Array3::from_shape_fn((3, 30, 9), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let spec = MultichannelSpectrogram::new(frames.clone(), StftConfig::new(16, 8).unwrap(), 16000).unwrap();
        let zero = estimate_scm(&spec, &TfMask::binary(Array2::zeros((30, 9))).unwrap()).unwrap();
        assert!(zero.matrices().iter().all(|z| *z == c(0.0, 0.0)));
        let full = estimate_scm(&spec, &TfMask::ones(30, 9)).unwrap();
        for f in 0..9 {
            for i in 0..3 {
                for j in 0..3 {
                    let brute: Complex64 = (0..30).map(|t| frames[[i, t, f]] * frames[[j, t, f]].conj()).sum();
                    assert!((brute - full.bin(f)[[i, j]]).norm() < 1e-10);
                }
            }
        }
        assert!(full.hermitian_defect() <= 1e-10);
        let soft = TfMask::soft(Array2::from_elem((30, 9), 0.3)).unwrap();
        let part = estimate_scm(&spec, &soft).unwrap();
        for (a, b) in part.matrices().iter().zip(full.matrices().iter()) {
            assert!((a - b * 0.3).norm() < 1e-10);
        }
    }

    #[test]
    fn scm_rejects_mask_shape() {
        let spec = single_bin_spec(vec![vec![c(1.0, 0.0), c(1.0, 0.0)]]);
        assert!(matches!(estimate_scm(&spec, &TfMask::ones(3, 2)), Err(Error::Shape(_))));
    }

    fn unit_steering(d: usize, bins: usize) -> SteeringVector {
        array::steering(&vec![0.0; d], 2 * (bins - 1)).unwrap()
    }

    fn exact() -> GevParams {
        GevParams { loading: 0.0, floor: 0.0, ..GevParams::default() }
    }

    #[test]
    fn diagonal_pencils() {
        let sv = unit_steering(2, 2);
        let scms = ScmSet {
            phi_xx: scm_of(&[real_diag(&[2.0, 1.0]), real_diag(&[2.0, 1.0])]),
            phi_nn: scm_of(&[real_diag(&[1.0, 1.0]), real_diag(&[1.0, 4.0])]),
        };
        let w = solve_gev(&scms, &sv, &exact()).unwrap();
        for f in 0..2 {
            let v = w.vectors().row(f);
            assert!((v[0] - c(1.0, 0.0)).norm() < 1e-12, "{v:?}");
            assert!(v[1].norm() < 1e-12);
            assert!((w.eigenvalues()[f] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ban_identity_noise() {
        let sv = unit_steering(2, 2);
        let scms = ScmSet {
            phi_xx: scm_of(&[real_diag(&[2.0, 1.0]), real_diag(&[1.0, 3.0])]),
            phi_nn: scm_of(&[real_diag(&[1.0, 1.0]), real_diag(&[1.0, 1.0])]),
        };
        let w = solve_gev(&scms, &sv, &exact()).unwrap();
        let g = ban_gain(&w, &scms.phi_nn).unwrap();
        assert!(g.iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn ban_is_degree_zero_in_noise_scm() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let sv = unit_steering(4, 3);
        let phi_nn = scm_of(&[random_psd(&mut rng, 4), random_psd(&mut rng, 4), random_psd(&mut rng, 4)]);
        let scms = ScmSet {
            phi_xx: scm_of(&[random_psd(&mut rng, 4), random_psd(&mut rng, 4), random_psd(&mut rng, 4)]),
            phi_nn: phi_nn.clone(),
        };
        let w = solve_gev(&scms, &sv, &exact()).unwrap();
        let g = ban_gain(&w, &phi_nn).unwrap();
        let g4 = ban_gain(&w, &phi_nn.scaled(4.0)).unwrap();
        assert_eq!(g, g4);
        // three-matrix-product reference
        for f in 0..3 {
            let v = w.vectors().row(f).to_owned();
            let vh = v.mapv(|z| z.conj());
            let phi = phi_nn.bin(f).to_owned();
            let num = vh.dot(&phi.dot(&phi).dot(&v)).re;
            let den = vh.dot(&phi.dot(&v)).re;
            let reference = num.sqrt() / (16.0 * den);
            assert!((g[f] - reference).abs() <= 1e-10 * reference);
        }
    }

    #[test]
    fn loading_is_homogeneous_in_the_scm() {
        let params = GevParams::default();
        let faint = scm_of(&[real_diag(&[1e-20, 3e-20]), real_diag(&[0.0, 0.0])]);
        let base = faint.loaded(&params);
        let scaled = faint.scaled(1e12).loaded(&params);
        for (a, b) in base.matrices().iter().zip(scaled.matrices().iter()) {
            assert!((a * 1e12 - b).norm() <= 1e-12 * b.norm());
        }
        // the empty bin still gets a positive diagonal
        assert!(base.bin(1)[[0, 0]].re > 0.0);
        let zero = scm_of(&[real_diag(&[0.0, 0.0])]);
        assert!((zero.loaded(&params).bin(0)[[1, 1]].re - 1e-18).abs() < 1e-30);
    }

    #[test]
    fn ban_zero_quadratic_form() {
        let w = BeamformerWeights::new(array![[c(1.0, 0.0), c(0.0, 0.0)]], vec![1.0]).unwrap();
        let g = ban_gain(&w, &scm_of(&[real_diag(&[0.0, 1.0])])).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn weights_are_unit_norm_and_phase_aligned() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let taus = [0.0, 0.4, -1.3, 2.0];
        let sv = array::steering(&taus, 8).unwrap();
        let xx: Vec<_> = (0..5).map(|_| random_psd(&mut rng, 4)).collect();
        let nn: Vec<_> = (0..5).map(|_| random_psd(&mut rng, 4)).collect();
        let scms = ScmSet { phi_xx: scm_of(&xx), phi_nn: scm_of(&nn) };
        let w = solve_gev(&scms, &sv, &GevParams::default()).unwrap();
        for f in 0..5 {
            let v = w.vectors().row(f);
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            let inner: Complex64 = (0..4).map(|d| sv.weights()[[d, f]] * v[d]).sum();
            assert!(inner.re >= 0.0 && inner.im.abs() < 1e-12);
        }
        // scaling either SCM leaves the phase-fixed vector unchanged
        let scaled = ScmSet { phi_xx: scms.phi_xx.scaled(7.5), phi_nn: scms.phi_nn.scaled(0.02) };
        let w2 = solve_gev(&scaled, &sv, &GevParams::default()).unwrap();
        for (a, b) in w.vectors().iter().zip(w2.vectors().iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn empty_target_falls_back_to_delay_and_sum() {
        let sv = array::steering(&[0.0, 0.5], 2).unwrap();
        let scms = ScmSet {
            phi_xx: scm_of(&[real_diag(&[0.0, 0.0]), real_diag(&[1.0, 2.0])]),
            phi_nn: scm_of(&[real_diag(&[1.0, 1.0]), real_diag(&[1.0, 1.0])]),
        };
        let w = solve_gev(&scms, &sv, &GevParams::default()).unwrap();
        assert_eq!(w.fallback_bins(), &[0]);
        let w = w.apply_ban(&scms.phi_nn).unwrap();
        let g = w.gains()[0];
        let v = w.vectors().row(0);
        // effective weights g·F equal conj(W)/D
        for d in 0..2 {
            let eff = v[d] * g;
            let ds = sv.weights()[[d, 0]].conj() / 2.0;
            assert!((eff - ds).norm() < 1e-12);
        }
    }

    #[test]
    fn non_finite_scm_is_numeric_error() {
        let sv = unit_steering(2, 2);
        let mut bad = real_diag(&[1.0, 1.0]);
        bad[[0, 1]] = c(f64::NAN, 0.0);
        let scms = ScmSet {
            phi_xx: scm_of(&[real_diag(&[1.0, 1.0]), bad]),
            phi_nn: scm_of(&[real_diag(&[1.0, 1.0]), real_diag(&[1.0, 1.0])]),
        };
        assert!(matches!(solve_gev(&scms, &sv, &GevParams::default()), Err(Error::Numeric(_))));
    }

    #[test]
    fn indefinite_noise_reports_bin() {
        let sv = unit_steering(2, 2);
        let scms = ScmSet {
            phi_xx: scm_of(&[real_diag(&[1.0, 1.0]), real_diag(&[1.0, 1.0])]),
            phi_nn: scm_of(&[real_diag(&[1.0, 1.0]), real_diag(&[-1.0, 1.0])]),
        };
        match solve_gev(&scms, &sv, &exact()) {
            Err(Error::Solver { bin, .. }) => assert_eq!(bin, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn apply_selects_and_zeroes() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let frames = Array3::from_shape_fn((3, 7, 5), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let spec = MultichannelSpectrogram::new(frames.clone(), StftConfig::new(8, 4).unwrap(), 16000).unwrap();
        let e1 = Array2::from_shape_fn((5, 3), |(_, d)| if d == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let z = apply_beamformer(&spec, &BeamformerWeights::new(e1.clone(), vec![1.0; 5]).unwrap()).unwrap();
        assert_eq!(z.channel(0), spec.channel(0));
        let z = apply_beamformer(&spec, &BeamformerWeights::new(e1, vec![0.0; 5]).unwrap()).unwrap();
        assert!(z.frames().iter().all(|v| v.norm() == 0.0));
        let wv = Array2::from_shape_fn((5, 3), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let gains: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..2.0)).collect();
        let z = apply_beamformer(&spec, &BeamformerWeights::new(wv.clone(), gains.clone()).unwrap()).unwrap();
        for t in 0..7 {
            for f in 0..5 {
                let oracle: Complex64 = (0..3).map(|d| wv[[f, d]].conj() * frames[[d, t, f]]).sum::<Complex64>() * gains[f];
                assert!((z.frames()[[0, t, f]] - oracle).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delay_and_sum_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let base = Array3::from_shape_fn((1, 6, 5), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let same = ndarray::concatenate(Axis(0), &[base.view(), base.view()]).unwrap();
        let cfg = StftConfig::new(8, 4).unwrap();
        let spec = MultichannelSpectrogram::new(same, cfg, 16000).unwrap();
        let sv = array::steering(&[0.0, 0.0], 8).unwrap();
        let z = delay_and_sum(&spec, &sv).unwrap();
        for (a, b) in z.frames().iter().zip(base.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        let neg = base.mapv(|v| -v);
        let opp = ndarray::concatenate(Axis(0), &[base.view(), neg.view()]).unwrap();
        let z = delay_and_sum(&MultichannelSpectrogram::new(opp, cfg, 16000).unwrap(), &sv).unwrap();
        assert!(z.frames().iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn enhance_rejects_channel_mismatch() {
        let clip = AudioClip::new(Array2::zeros((3, 2048)), 16000).unwrap();
        let geometry = ArrayGeometry::respeaker_like();
        let doa = Doa::from_degrees(0.0, 0.0).unwrap();
        assert!(matches!(
            kissgev_enhance(&clip, &geometry, &doa, &EnhanceParams::default()),
            Err(Error::Shape(_))
        ));
        let mono = AudioClip::new(Array2::zeros((1, 2048)), 16000).unwrap();
        assert!(matches!(
            ds_enhance(&mono, &geometry, &doa, &EnhanceParams::default()),
            Err(Error::Input(_))
        ));
    }
    #[test]
    fn projection_restores_reference_target_for_rank_one_scm() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = 4;
        let bins = 3;
        let h: Vec<Array1<Complex64>> = (0..bins)
            .map(|_| Array1::from_shape_fn(d, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        let phi_xx = scm_of(&h.iter().map(|v| {
            let col = v.clone().insert_axis(Axis(1));
            col.dot(&col.t().mapv(|z| z.conj()))
        }).collect::<Vec<_>>());
        let f_gev = Array2::from_shape_fn((bins, d), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        for reference in [0, 2] {
            let w = BeamformerWeights::new(f_gev.clone(), vec![1.0; bins])
                .unwrap()
                .apply_projection(&phi_xx, reference)
                .unwrap();
            for f in 0..bins {
                let response: Complex64 = w.vectors().row(f).iter().zip(h[f].iter()).map(|(a, b)| a.conj() * b).sum();
                let out = response * w.gains()[f];
                assert!((out - h[f][reference]).norm() < 1e-12, "bin {f}: {out} vs {}", h[f][reference]);
            }
        }
    }
}
