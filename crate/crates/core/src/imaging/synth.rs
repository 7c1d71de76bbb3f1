//! Parametric synthetic eye, used in place of a camera.
//!
//! The iris texture is a seeded lattice of zero-mean random values over
//! (angle, normalized radius), smoothly interpolated. Because the texture is
//! addressed by normalized radius, pupil dilation only deforms pixel
//! geometry; the unwrapped texture stays the same.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::quantize;
use super::{ImagingError, RgbImage};

/// Grey level of the pupil disc on every channel.
pub const PUPIL_LEVEL: f64 = 12.0;
/// Mean red level of the iris annulus.
pub const IRIS_BASE_RED: f64 = 130.0;
/// Peak texture excursion around [`IRIS_BASE_RED`].
const IRIS_TEXTURE_AMPLITUDE: f64 = 40.0;
/// Red level of the sclera, independent of redness.
pub const SCLERA_RED: f64 = 185.0;
/// Fraction of green/blue removed from the sclera at redness 1.
const CONGESTION_DEPTH: f64 = 0.8;
const IRIS_GREEN: f64 = 0.72;
const IRIS_BLUE: f64 = 0.52;

const LATTICE_ANGLES: usize = 32;
const LATTICE_RADII: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeParams {
    pub image_size: usize,
    pub center: [f64; 2],
    pub pupil_radius: f64,
    pub iris_radius: f64,
    pub texture_seed: u64,
    pub dilation: f64,
    pub redness: f64,
    pub illumination_gain: f64,
    pub noise_sigma: f64,
    /// Rotation of the iris texture in radians.
    #[serde(default)]
    pub texture_rotation: f64,
    /// Distinguishes captures of one identity; mixed into the noise stream.
    #[serde(default)]
    pub capture_seed: u64,
}

impl Default for EyeParams {
    fn default() -> Self {
        EyeParams {
            image_size: 256,
            center: [128.0, 128.0],
            pupil_radius: 30.0,
            iris_radius: 90.0,
            texture_seed: 1,
            dilation: 1.0,
            redness: 0.0,
            illumination_gain: 1.0,
            noise_sigma: 0.0,
            texture_rotation: 0.0,
            capture_seed: 0,
        }
    }
}

impl EyeParams {
    pub fn effective_pupil_radius(&self) -> f64 {
        self.pupil_radius * self.dilation
    }

    pub fn validate(&self) -> Result<(), ImagingError> {
        let fail = |m: String| Err(ImagingError::Geometry(m));
        if self.image_size < super::MIN_RGB_DIM {
            return fail(format!("image_size {} below 64", self.image_size));
        }
        if !(self.dilation > 0.0) {
            return fail("dilation must be > 0".into());
        }
        let pupil = self.effective_pupil_radius();
        if !(pupil > 0.0) {
            return fail("pupil radius must be > 0".into());
        }
        if !(pupil < self.iris_radius) {
            return fail(format!("pupil {pupil} must be smaller than iris {}", self.iris_radius));
        }
        if !(self.iris_radius < self.image_size as f64 / 2.0) {
            return fail(format!("iris radius {} exceeds half the frame", self.iris_radius));
        }
        if !(0.0..=1.0).contains(&self.redness) {
            return fail(format!("redness {} outside [0,1]", self.redness));
        }
        if !(self.illumination_gain > 0.0) {
            return fail("illumination_gain must be > 0".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return fail("noise_sigma must be >= 0".into());
        }
        Ok(())
    }
}

/// Seed-determined iris texture in `[-1, 1]` over (angle, normalized radius).
#[derive(Debug, Clone)]
pub struct IrisTexture {
    lattice: Vec<f64>,
}

impl IrisTexture {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lattice: Vec<f64> = (0..LATTICE_ANGLES * LATTICE_RADII)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        // every radial ring averages to zero, so concentric circle integrals see no texture
        for ring in 0..LATTICE_RADII {
            let mean = (0..LATTICE_ANGLES)
                .map(|a| lattice[a * LATTICE_RADII + ring])
                .sum::<f64>()
                / LATTICE_ANGLES as f64;
            for a in 0..LATTICE_ANGLES {
                lattice[a * LATTICE_RADII + ring] -= mean;
            }
        }
        let peak = lattice.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            lattice.iter_mut().for_each(|v| *v /= peak);
        }
        IrisTexture { lattice }
    }

    /// Texture value at angle `theta` (radians) and normalized radius `rho`.
    pub fn eval(&self, theta: f64, rho: f64) -> f64 {
        let u = (theta / TAU).rem_euclid(1.0) * LATTICE_ANGLES as f64;
        let a0 = (u.floor() as usize) % LATTICE_ANGLES;
        let a1 = (a0 + 1) % LATTICE_ANGLES;
        let fa = smoothstep(u - u.floor());

        let v = (rho.clamp(0.0, 1.0) * LATTICE_RADII as f64 - 0.5)
            .clamp(0.0, (LATTICE_RADII - 1) as f64);
        let r0 = v.floor() as usize;
        let r1 = (r0 + 1).min(LATTICE_RADII - 1);
        let fr = smoothstep(v - r0 as f64);

        let at = |a: usize, r: usize| self.lattice[a * LATTICE_RADII + r];
        let near = at(a0, r0) * (1.0 - fa) + at(a1, r0) * fa;
        let far = at(a0, r1) * (1.0 - fa) + at(a1, r1) * fa;
        near * (1.0 - fr) + far * fr
    }
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn noise_stream_seed(texture_seed: u64, capture_seed: u64) -> u64 {
    texture_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ capture_seed.rotate_left(29) ^ 0xD1B5_4A32_D192_ED03
}

/// Renders an eye from `params`. Pure: identical params give identical bytes.
pub fn generate_synthetic_eye(params: &EyeParams) -> Result<RgbImage, ImagingError> {
    params.validate()?;
    let size = params.image_size;
    let texture = IrisTexture::from_seed(params.texture_seed);
    let [cx, cy] = params.center;
    let pupil_r = params.effective_pupil_radius();
    let iris_r = params.iris_radius;
    let gain = params.illumination_gain;
    let sclera_gb = SCLERA_RED * (1.0 - CONGESTION_DEPTH * params.redness);

    let mut noise = (params.noise_sigma > 0.0).then(|| {
        (
            ChaCha8Rng::seed_from_u64(noise_stream_seed(params.texture_seed, params.capture_seed)),
            Normal::new(0.0, params.noise_sigma).expect("finite sigma"),
        )
    });

    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let d = dx.hypot(dy);
            let rgb = if d < pupil_r {
                [PUPIL_LEVEL, PUPIL_LEVEL, PUPIL_LEVEL]
            } else if d < iris_r {
                let rho = (d - pupil_r) / (iris_r - pupil_r);
                let theta = dy.atan2(dx) - params.texture_rotation;
                let red = IRIS_BASE_RED + IRIS_TEXTURE_AMPLITUDE * texture.eval(theta, rho);
                [red, red * IRIS_GREEN, red * IRIS_BLUE]
            } else {
                [SCLERA_RED, sclera_gb, sclera_gb]
            };
            for channel in rgb {
                let mut v = channel * gain;
                if let Some((rng, normal)) = noise.as_mut() {
                    v += normal.sample(rng);
                }
                data.push(quantize(v));
            }
        }
    }
    RgbImage::new(size, size, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pupil_is_dark() {
        let img = generate_synthetic_eye(&EyeParams::default()).unwrap();
        assert!(img.get(128, 128).iter().all(|&c| c < 40));
    }

    #[test]
    fn deterministic() {
        let p = EyeParams {
            noise_sigma: 5.0,
            ..EyeParams::default()
        };
        assert_eq!(generate_synthetic_eye(&p).unwrap(), generate_synthetic_eye(&p).unwrap());
    }

    #[test]
    fn invalid_geometry_rejected() {
        let p = EyeParams {
            pupil_radius: 80.0,
            dilation: 1.2,
            ..EyeParams::default()
        };
        assert!(matches!(generate_synthetic_eye(&p), Err(ImagingError::Geometry(_))));
        let p = EyeParams {
            iris_radius: 130.0,
            ..EyeParams::default()
        };
        assert!(generate_synthetic_eye(&p).is_err());
        let p = EyeParams {
            redness: 1.5,
            ..EyeParams::default()
        };
        assert!(generate_synthetic_eye(&p).is_err());
    }

    #[test]
    fn texture_rings_have_zero_mean() {
        let t = IrisTexture::from_seed(9);
        for rho in [0.05, 0.3, 0.5, 0.77, 0.95] {
            let n = 4096;
            let mean: f64 = (0..n).map(|i| t.eval(TAU * i as f64 / n as f64, rho)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-9, "rho {rho}: mean {mean}");
        }
    }

    #[test]
    fn pupil_darker_than_every_iris_mean_without_noise() {
        for seed in 0..20 {
            let t = IrisTexture::from_seed(seed);
            let min_iris = (0..360)
                .flat_map(|a| (0..10).map(move |r| (a, r)))
                .map(|(a, r)| IRIS_BASE_RED + IRIS_TEXTURE_AMPLITUDE * t.eval(a as f64 * TAU / 360.0, r as f64 / 10.0))
                .fold(f64::INFINITY, f64::min);
            assert!(PUPIL_LEVEL < min_iris);
        }
    }

    #[test]
    fn params_json_field_names() {
        let json = serde_json::to_value(EyeParams::default()).unwrap();
        for key in [
            "image_size",
            "center",
            "pupil_radius",
            "iris_radius",
            "texture_seed",
            "dilation",
            "redness",
            "illumination_gain",
            "noise_sigma",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: EyeParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, EyeParams::default());
    }
}
