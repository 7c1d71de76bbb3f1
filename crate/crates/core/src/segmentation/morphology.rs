use std::fmt;

use serde::{Deserialize, Serialize};

use super::EyeGeometry;
use crate::imaging::RgbImage;

/// Sclera annulus outer radius, as a multiple of the iris radius.
const SCLERA_BAND: f64 = 1.4;
const MAX_CONCENTRICITY: f64 = 0.15;
const RATIO_RANGE: (f64, f64) = (0.1, 0.8);
const MAX_REDNESS: f64 = 0.55;

/// Named morphology checks. `CongestionAdvisory` is recorded but never
/// blocks on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MorphologyCheck {
    #[serde(rename = "containment")]
    Containment,
    #[serde(rename = "concentricity")]
    Concentricity,
    #[serde(rename = "radius_ratio")]
    RadiusRatio,
    #[serde(rename = "in_frame")]
    InFrame,
    #[serde(rename = "congestion-advisory")]
    CongestionAdvisory,
}

impl MorphologyCheck {
    pub const ALL: [MorphologyCheck; 5] = [
        MorphologyCheck::Containment,
        MorphologyCheck::Concentricity,
        MorphologyCheck::RadiusRatio,
        MorphologyCheck::InFrame,
        MorphologyCheck::CongestionAdvisory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MorphologyCheck::Containment => "containment",
            MorphologyCheck::Concentricity => "concentricity",
            MorphologyCheck::RadiusRatio => "radius_ratio",
            MorphologyCheck::InFrame => "in_frame",
            MorphologyCheck::CongestionAdvisory => "congestion-advisory",
        }
    }

    pub fn is_advisory(self) -> bool {
        self == MorphologyCheck::CongestionAdvisory
    }
}

impl fmt::Display for MorphologyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyReport {
    pub geometry: EyeGeometry,
    pub concentricity: f64,
    pub radius_ratio: f64,
    pub sclera_redness: f64,
    /// True when no blocking check failed.
    pub passed: bool,
    pub failures: Vec<MorphologyCheck>,
}

/// Mean `R / (R + G + B)` over in-frame pixels outside the iris circle and
/// within `1.4 * iris.r` of its center. Black pixels are skipped; with no
/// eligible pixel the neutral 1/3 is returned.
pub fn sclera_redness(img: &RgbImage, geom: &EyeGeometry) -> f64 {
    let iris = &geom.iris;
    let outer = SCLERA_BAND * iris.r;
    let x_lo = (iris.cx - outer).floor().max(0.0) as usize;
    let y_lo = (iris.cy - outer).floor().max(0.0) as usize;
    let x_hi = ((iris.cx + outer).ceil().max(0.0) as usize).min(img.width() - 1);
    let y_hi = ((iris.cy + outer).ceil().max(0.0) as usize).min(img.height() - 1);
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let d = (x as f64 - iris.cx).hypot(y as f64 - iris.cy);
            if d <= iris.r || d > outer {
                continue;
            }
            let [r, g, b] = img.get(x, y);
            let total = r as u32 + g as u32 + b as u32;
            if total == 0 {
                continue;
            }
            sum += r as f64 / total as f64;
            count += 1;
        }
    }
    if count == 0 {
        1.0 / 3.0
    } else {
        sum / count as f64
    }
}

pub fn morphology_check(img: &RgbImage, geom: &EyeGeometry) -> MorphologyReport {
    let concentricity = geom.concentricity();
    let radius_ratio = geom.radius_ratio();
    let redness = sclera_redness(img, geom);
    let iris = &geom.iris;
    let in_frame = iris.cx - iris.r >= 0.0
        && iris.cy - iris.r >= 0.0
        && iris.cx + iris.r <= (img.width() - 1) as f64
        && iris.cy + iris.r <= (img.height() - 1) as f64;

    let mut failures = Vec::new();
    if !geom.is_contained() {
        failures.push(MorphologyCheck::Containment);
    }
    if concentricity > MAX_CONCENTRICITY * iris.r {
        failures.push(MorphologyCheck::Concentricity);
    }
    if !(RATIO_RANGE.0..=RATIO_RANGE.1).contains(&radius_ratio) {
        failures.push(MorphologyCheck::RadiusRatio);
    }
    if !in_frame {
        failures.push(MorphologyCheck::InFrame);
    }
    if redness > MAX_REDNESS {
        failures.push(MorphologyCheck::CongestionAdvisory);
    }
    let passed = failures.iter().all(|f| f.is_advisory());
    MorphologyReport {
        geometry: *geom,
        concentricity,
        radius_ratio,
        sclera_redness: redness,
        passed,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{generate_synthetic_eye, EyeParams};
    use crate::segmentation::Circle;

    fn truth(p: &EyeParams) -> EyeGeometry {
        EyeGeometry {
            pupil: Circle::new(p.center[0], p.center[1], p.effective_pupil_radius()),
            iris: Circle::new(p.center[0], p.center[1], p.iris_radius),
        }
    }

    #[test]
    fn redness_of_flat_sclera() {
        let geom = truth(&EyeParams::default());
        let gray = RgbImage::filled(256, 256, [90, 90, 90]).unwrap();
        assert!((sclera_redness(&gray, &geom) - 1.0 / 3.0).abs() < 1e-12);
        let red = RgbImage::filled(256, 256, [255, 0, 0]).unwrap();
        assert_eq!(sclera_redness(&red, &geom), 1.0);
        let black = RgbImage::filled(256, 256, [0, 0, 0]).unwrap();
        assert!((sclera_redness(&black, &geom) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn redness_tracks_congestion_and_ignores_gain() {
        let base = EyeParams::default();
        let calm = generate_synthetic_eye(&base).unwrap();
        let congested = generate_synthetic_eye(&EyeParams {
            redness: 0.6,
            ..base.clone()
        })
        .unwrap();
        let geom = truth(&base);
        let r0 = sclera_redness(&calm, &geom);
        let r6 = sclera_redness(&congested, &geom);
        assert!(r6 > r0);
        for gain in [0.8, 1.2] {
            let lit = generate_synthetic_eye(&EyeParams {
                redness: 0.6,
                illumination_gain: gain,
                ..base.clone()
            })
            .unwrap();
            assert!((sclera_redness(&lit, &geom) - r6).abs() < 0.005);
        }
    }

    #[test]
    fn default_eye_passes() {
        let p = EyeParams::default();
        let img = generate_synthetic_eye(&p).unwrap();
        let report = morphology_check(&img, &truth(&p));
        assert!(report.passed);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn offset_pupil_fails_concentricity() {
        let p = EyeParams::default();
        let img = generate_synthetic_eye(&p).unwrap();
        let mut geom = truth(&p);
        geom.pupil.cx += 0.3 * geom.iris.r;
        let report = morphology_check(&img, &geom);
        assert!(!report.passed);
        assert!(report.failures.contains(&MorphologyCheck::Concentricity));
    }

    #[test]
    fn congestion_is_advisory_only() {
        let p = EyeParams {
            redness: 0.9,
            ..EyeParams::default()
        };
        let img = generate_synthetic_eye(&p).unwrap();
        let report = morphology_check(&img, &truth(&p));
        assert!(report.passed);
        assert_eq!(report.failures, vec![MorphologyCheck::CongestionAdvisory]);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["failures"][0], "congestion-advisory");
    }
}
