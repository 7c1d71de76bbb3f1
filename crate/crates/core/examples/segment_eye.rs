// Locate pupil and iris boundaries with the integro-differential search
// and run the morphology gate.

use iris_core::imaging::{generate_synthetic_eye, EyeParams};
use iris_core::segmentation::{morphology_check, segment_eye};

fn main() {
    for (seed, noise, redness) in [(1, 0.0, 0.0), (2, 8.0, 0.0), (3, 4.0, 0.7)] {
        let params = EyeParams {
            center: [124.0, 131.0],
            pupil_radius: 28.0,
            iris_radius: 88.0,
            texture_seed: seed,
            noise_sigma: noise,
            redness,
            ..EyeParams::default()
        };
        let img = generate_synthetic_eye(&params).expect("valid parameters");
        let geometry = segment_eye(&img).expect("boundaries found");
        let report = morphology_check(&img, &geometry);
        println!(
            "seed {seed} noise {noise}: pupil ({:.1}, {:.1}) r={:.1}  iris ({:.1}, {:.1}) r={:.1}",
            geometry.pupil.cx, geometry.pupil.cy, geometry.pupil.r, geometry.iris.cx, geometry.iris.cy, geometry.iris.r
        );
        println!(
            "    truth: center ({:.1}, {:.1}) pupil r={:.1} iris r={:.1}",
            params.center[0], params.center[1], params.pupil_radius, params.iris_radius
        );
        let failures: Vec<&str> = report.failures.iter().map(|f| f.name()).collect();
        println!(
            "    morphology passed={} redness={:.2} ratio={:.2} flags={failures:?}",
            report.passed, report.sclera_redness, report.radius_ratio
        );
    }
}
