// Train the perceptron coefficient selector and GA-tune fusion weights on
// a small synthetic population, then check rates on unseen identities.

use iris_core::gateway::{encode_identities, pair_samples, tune_model, Identity, TuneConfig};
use iris_core::imaging::{generate_synthetic_eye, EyeParams};
use iris_core::matching::{evaluate_rates, GaConfig};
use iris_core::pipeline::analyze;

fn population(first_seed: u64, identities: u64, captures: u64, cfg: &TuneConfig) -> Vec<Identity> {
    (0..identities)
        .map(|i| Identity {
            subject_id: format!("id{i:02}"),
            analyses: (0..captures)
                .map(|j| {
                    let params = EyeParams {
                        texture_seed: first_seed + i,
                        capture_seed: j,
                        dilation: 0.9 + 0.1 * j as f64,
                        redness: 0.15 * j as f64,
                        noise_sigma: 4.0,
                        ..EyeParams::default()
                    };
                    analyze(&generate_synthetic_eye(&params).unwrap(), &cfg.pipeline).unwrap()
                })
                .collect(),
        })
        .collect()
}

fn main() {
    let cfg = TuneConfig {
        ga: GaConfig {
            population: 24,
            generations: 20,
            ..GaConfig::default()
        },
        ..TuneConfig::default()
    };
    let train = population(100, 6, 4, &cfg);
    let (model, report) = tune_model(&train, &cfg).expect("enough training data");
    println!("selector {} keeps {} of {} coefficients", model.selector.version_token(), model.selector.k, model.selector.weights.len());
    let w = &model.weights;
    println!(
        "weights: code {:.3} geom {:?} cluster {:.3} threshold {:.4}",
        w.w_code,
        w.w_geom.map(|g| (g * 1000.0).round() / 1000.0),
        w.w_cluster,
        w.threshold
    );
    for s in report.history.iter().step_by(5) {
        println!("  gen {:>2}: fitness {:.4} FAR {:.4} FRR {:.4}", s.generation, s.best_fitness, s.far, s.frr);
    }

    let held_out = population(500, 4, 3, &cfg);
    let samples = pair_samples(&encode_identities(&held_out, &model.selector).unwrap()).unwrap();
    let (far, frr) = evaluate_rates(w, &samples.genuine, &samples.impostor).unwrap();
    println!(
        "held out: {} genuine / {} impostor pairs, FAR {far:.4} FRR {frr:.4}",
        samples.genuine.len(),
        samples.impostor.len()
    );
}
