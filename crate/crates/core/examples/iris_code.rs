// Rubber-sheet unwrap, weighted Haar decomposition and sign-bit codes;
// compare captures of the same eye and of a different eye.

use iris_core::imaging::{generate_synthetic_eye, EyeParams};
use iris_core::matching::hamming_distance;
use iris_core::pipeline::{analyze, encode, PipelineConfig};
use iris_core::transform::{haar_idwt2, SelectorModel, WeightMap};

fn main() {
    let cfg = PipelineConfig {
        weight_map: WeightMap::from_sectors(64, 32, [1.0, 1.2, 1.0, 0.8, 1.0, 1.2, 1.0, 0.8]).expect("valid map"),
        ..PipelineConfig::default()
    };
    let selector = SelectorModel::keep_all(cfg.angles, cfg.radii, cfg.levels);
    let capture = |seed: u64, capture_seed: u64, dilation: f64| {
        let params = EyeParams {
            texture_seed: seed,
            capture_seed,
            dilation,
            noise_sigma: 4.0,
            ..EyeParams::default()
        };
        let img = generate_synthetic_eye(&params).expect("valid parameters");
        analyze(&img, &cfg).expect("pipeline accepts synthetic eyes")
    };

    let a = capture(10, 0, 1.0);
    let b = capture(10, 1, 1.25);
    let c = capture(11, 0, 1.0);

    let back = haar_idwt2(&a.coefficients).expect("inverse transform");
    println!(
        "grid {}x{}, {} coefficients, tomography curvature {:.4}, reconstruction mean {:.3}",
        a.normalized.angles,
        a.normalized.radii,
        a.coefficients.len(),
        a.geom.profile_curvature,
        back.mean()
    );

    let (ea, eb, ec) = (
        encode(&a, &selector).unwrap(),
        encode(&b, &selector).unwrap(),
        encode(&c, &selector).unwrap(),
    );
    let valid = ea.code.mask.iter().filter(|&&m| m).count();
    println!("code: {} bits, {valid} valid", ea.code.len());
    println!(
        "same eye, dilated recapture: HD = {:.3}",
        hamming_distance(&ea.code, &eb.code).unwrap()
    );
    println!(
        "different eyes:              HD = {:.3}",
        hamming_distance(&ea.code, &ec.code).unwrap()
    );
}
