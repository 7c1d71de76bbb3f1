// Enroll a subject, then run the two-factor flow: five-digit code first,
// iris second. Shows each way a verification can fail.

use iris_core::dispatcher::{Dispatcher, DispatcherConfig};
use iris_core::gateway::{IrisSystem, TunedModel, VerifyRequest};
use iris_core::imaging::{generate_synthetic_eye, EyeParams, RgbImage};
use iris_core::pipeline::PipelineConfig;
use iris_core::store::Store;

fn eye(seed: u64, capture: u64) -> RgbImage {
    generate_synthetic_eye(&EyeParams {
        texture_seed: seed,
        capture_seed: capture,
        dilation: 0.9 + 0.05 * capture as f64,
        noise_sigma: 4.0,
        ..EyeParams::default()
    })
    .unwrap()
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path().join("site.iris")).unwrap();
    let log = Dispatcher::open(dir.path().join("events.ndjson"), DispatcherConfig::default()).unwrap();
    let sys = IrisSystem::new(store, log, TunedModel::untrained(PipelineConfig::default())).unwrap();

    let enrolled = sys.enroll("ada", "Ada L.", "40213", &[eye(7, 0), eye(7, 1), eye(7, 2)]).unwrap();
    println!("enrolled {} with {} templates", enrolled.subject_id, enrolled.templates);

    let attempt = |label: &str, pin: &str, image: RgbImage| {
        let d = sys
            .run_verify(&VerifyRequest {
                subject_id: "ada".into(),
                pin: pin.into(),
                image,
                door_id: Some("lab".into()),
            })
            .unwrap();
        println!(
            "{label:<22} accepted={:<5} score={:<8} stage_failed={:?}",
            d.accepted,
            d.fused_score.map_or("-".into(), |s| format!("{s:.4}")),
            d.stage_failed
        );
    };
    attempt("genuine", "40213", eye(7, 5));
    attempt("wrong code", "40214", eye(7, 5));
    attempt("impostor", "40213", eye(8, 0));
    attempt("blank frame", "40213", RgbImage::filled(256, 256, [128, 128, 128]).unwrap());

    let identified = sys.run_identify(&eye(7, 6), None).unwrap();
    println!("identify -> {:?} (score {:?})", identified.subject_id, identified.fused_score);
    println!(
        "{} events logged, {} segmentation runs",
        sys.dispatcher().events().len(),
        sys.segmentation_runs()
    );
}
