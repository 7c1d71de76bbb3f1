// Render a synthetic eye, write it as PPM, and show how nuisance
// parameters (dilation, congestion, illumination) change the capture.

use iris_core::imaging::{generate_synthetic_eye, ppm, split_rgb, EyeParams};

fn main() {
    let out = std::env::temp_dir().join("iris-examples");
    std::fs::create_dir_all(&out).expect("create output dir");

    let base = EyeParams {
        texture_seed: 42,
        noise_sigma: 2.0,
        ..EyeParams::default()
    };
    let variants = [
        ("baseline", base.clone()),
        ("dilated", EyeParams { dilation: 1.3, ..base.clone() }),
        ("congested", EyeParams { redness: 0.6, ..base.clone() }),
        ("dim", EyeParams { illumination_gain: 0.8, ..base.clone() }),
    ];
    for (name, params) in variants {
        let img = generate_synthetic_eye(&params).expect("valid parameters");
        let path = out.join(format!("eye_{name}.ppm"));
        ppm::write_ppm(&path, &img).expect("write ppm");
        let (r, g, _) = split_rgb(&img);
        let sclera = |gray: &iris_core::imaging::GrayImage| {
            // a point between the iris edge and the frame border
            gray.get(params.center[0] as usize + params.iris_radius as usize + 15, params.center[1] as usize)
        };
        println!(
            "{name:>9}: pupil r={:.1}px  sclera R={:.0} G={:.0}  -> {}",
            params.effective_pupil_radius(),
            sclera(&r),
            sclera(&g),
            path.display()
        );
    }
}
