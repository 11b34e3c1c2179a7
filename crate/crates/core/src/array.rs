//! Array geometry, far-field TDoAs and anechoic steering vectors.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius of the default 8-microphone circular array, in meters.
pub const DEFAULT_ARRAY_RADIUS: f64 = 0.0463;

/// Microphone positions in array-centered coordinates (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    #[serde(rename = "mics")]
    mic_positions: Vec<[f64; 3]>,
    speed_of_sound: f64,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<[f64; 3]>, speed_of_sound: f64) -> Result<Self> {
        let geometry = Self {
            mic_positions,
            speed_of_sound,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Uniform circular array in the horizontal plane, mic 0 on the +x axis.
    pub fn circular(count: usize, radius: f64, speed_of_sound: f64) -> Result<Self> {
        let mics = (0..count)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / count as f64;
                [radius * phi.cos(), radius * phi.sin(), 0.0]
            })
            .collect();
        Self::new(mics, speed_of_sound)
    }

    /// 8-mic circular array approximating a ReSpeaker Core v2. It is a
    /// stand-in for the board layout; supply a geometry file for real
    /// hardware.
    pub fn respeaker_like() -> Self {
        Self::circular(8, DEFAULT_ARRAY_RADIUS, 343.0).expect("default geometry is valid")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let geometry: Self = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.mic_positions.len() < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 microphones, got {}",
                self.mic_positions.len()
            )));
        }
        if !(300.0..=400.0).contains(&self.speed_of_sound) {
            return Err(Error::Geometry(format!(
                "speed of sound {} m/s outside [300, 400]",
                self.speed_of_sound
            )));
        }
        for (i, p) in self.mic_positions.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Geometry(format!("mic {i} has a non-finite coordinate")));
            }
            for (j, q) in self.mic_positions.iter().enumerate().skip(i + 1) {
                if distance(p, q) < 1e-9 {
                    return Err(Error::Geometry(format!("mics {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn mic_positions(&self) -> &[[f64; 3]] {
        &self.mic_positions
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn with_speed_of_sound(&self, c: f64) -> Result<Self> {
        Self::new(self.mic_positions.clone(), c)
    }
}

/// Unit vector from the array center toward the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doa([f64; 3]);

impl Doa {
    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = norm3(&v);
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::param("doa", format!("cannot normalize {v:?}")));
        }
        Ok(Self([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Azimuth counter-clockwise from +x in the horizontal plane, elevation
    /// up from that plane; both in degrees.
    pub fn from_degrees(azimuth: f64, elevation: f64) -> Result<Self> {
        let (az, el) = (azimuth.to_radians(), elevation.to_radians());
        Self::from_vector([el.cos() * az.cos(), el.cos() * az.sin(), el.sin()])
    }

    pub fn unit(&self) -> [f64; 3] {
        self.0
    }

    pub fn azimuth_degrees(&self) -> f64 {
        self.0[1].atan2(self.0[0]).to_degrees()
    }
}

/// Per-channel anechoic phase weights `W_d(f) = exp(j 2π f τ_d / N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    weights: Array2<Complex64>,
    tdoas: Vec<f64>,
    frame_size: usize,
}

impl SteeringVector {
    /// `[channels, bins]`
    pub fn weights(&self) -> &Array2<Complex64> {
        &self.weights
    }

    pub fn bin(&self, f: usize) -> ArrayView1<'_, Complex64> {
        self.weights.column(f)
    }

    pub fn tdoas(&self) -> &[f64] {
        &self.tdoas
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn num_channels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.weights.ncols()
    }
}

/// Far-field delays in samples: `τ_d = -(u · p_d) fs / c`. A microphone
/// further along `u` hears the source first and gets a more negative delay.
pub fn tdoa(geometry: &ArrayGeometry, doa: &Doa, sample_rate: u32) -> Vec<f64> {
    let u = doa.unit();
    let scale = f64::from(sample_rate) / geometry.speed_of_sound();
    geometry
        .mic_positions()
        .iter()
        .map(|p| -(u[0] * p[0] + u[1] * p[1] + u[2] * p[2]) * scale)
        .collect()
}

/// Like [`tdoa`] but shifted so channel `reference` has zero delay. The
/// common offset does not change any power ratio; it makes beamformer
/// outputs time-aligned with that channel.
pub fn tdoa_relative(
    geometry: &ArrayGeometry,
    doa: &Doa,
    sample_rate: u32,
    reference: usize,
) -> Vec<f64> {
    let taus = tdoa(geometry, doa, sample_rate);
    let offset = taus[reference];
    taus.into_iter().map(|t| t - offset).collect()
}

pub fn steering(tdoas: &[f64], frame_size: usize) -> Result<SteeringVector> {
    if let Some(t) = tdoas.iter().find(|t| !t.is_finite()) {
        return Err(Error::Numeric(format!("non-finite TDoA {t}")));
    }
    if frame_size < 2 || !frame_size.is_multiple_of(2) {
        return Err(Error::param("frame_size", format!("{frame_size} is not even")));
    }
    let bins = frame_size / 2 + 1;
    let weights = Array2::from_shape_fn((tdoas.len(), bins), |(d, f)| {
        Complex64::from_polar(1.0, 2.0 * PI * f as f64 * tdoas[d] / frame_size as f64)
    });
    Ok(SteeringVector {
        weights,
        tdoas: tdoas.to_vec(),
        frame_size,
    })
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm3(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> ArrayGeometry {
        ArrayGeometry::new(vec![[0.05, 0.0, 0.0], [-0.05, 0.0, 0.0]], 343.0).unwrap()
    }

    #[test]
    fn mic_at_origin_has_zero_delay() {
        let g = ArrayGeometry::new(vec![[0.0; 3], [0.1, 0.0, 0.0]], 343.0).unwrap();
        for az in [0.0, 45.0, 170.0] {
            let taus = tdoa(&g, &Doa::from_degrees(az, 20.0).unwrap(), 16000);
            assert_eq!(taus[0], 0.0);
        }
    }

    #[test]
    fn two_mic_endfire_delays() {
        let taus = tdoa(&pair(), &Doa::from_vector([1.0, 0.0, 0.0]).unwrap(), 16000);
        let expected = 0.05 * 16000.0 / 343.0;
        assert!((taus[0] + expected).abs() < 1e-12);
        assert!((taus[1] - expected).abs() < 1e-12);
        assert!((expected - 2.3324).abs() < 1e-4);
    }

    #[test]
    fn broadside_delays_are_equal() {
        let taus = tdoa(&pair(), &Doa::from_vector([0.0, 1.0, 0.0]).unwrap(), 16000);
        assert!((taus[0] - taus[1]).abs() < 1e-15);
    }

    #[test]
    fn steering_values() {
        let w = steering(&[0.0, 256.0], 512).unwrap();
        assert!(w.weights().row(0).iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!((w.weights()[[1, 1]] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        for z in w.weights().iter() {
            assert!((z.norm() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(w.weights().column(0).iter().filter(|z| **z == Complex64::new(1.0, 0.0)).count(), 2);
        assert!(steering(&[f64::NAN], 512).is_err());
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(vec![[0.0; 3]], 343.0).is_err());
        assert!(ArrayGeometry::new(vec![[0.0; 3], [0.0; 3]], 343.0).is_err());
        assert!(ArrayGeometry::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], 250.0).is_err());
        let g = ArrayGeometry::respeaker_like();
        assert_eq!(g.num_mics(), 8);
        let back: ArrayGeometry = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(back, g);
        let parsed: ArrayGeometry =
            serde_json::from_str(r#"{ "mics": [[0,0,0],[0.1,0,0]], "speed_of_sound": 343.0 }"#).unwrap();
        assert_eq!(parsed.num_mics(), 2);
    }

    #[test]
    fn doa_normalizes() {
        let d = Doa::from_vector([3.0, 4.0, 0.0]).unwrap();
        assert!((norm3(&d.unit()) - 1.0).abs() < 1e-12);
        assert!(Doa::from_vector([0.0; 3]).is_err());
        let d = Doa::from_degrees(90.0, 0.0).unwrap();
        assert!((d.unit()[1] - 1.0).abs() < 1e-12);
        assert!((d.azimuth_degrees() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn relative_delays_zero_the_reference() {
        let g = ArrayGeometry::respeaker_like();
        let doa = Doa::from_degrees(33.0, 10.0).unwrap();
        let abs = tdoa(&g, &doa, 16000);
        let rel = tdoa_relative(&g, &doa, 16000, 2);
        assert_eq!(rel[2], 0.0);
        for d in 0..8 {
            assert!(((abs[d] - rel[d]) - abs[2]).abs() < 1e-12);
        }
    }
}
