//! Genetic tuning of fusion weights and threshold.
//!
//! Chromosome genes, in order: `w_code`, the five `w_geom`, `w_cluster`,
//! `threshold`. Weight genes are clamped to `[0, 1]`, the threshold gene to
//! `[1e-6, 1 - 1e-6]`. Fitness (lower is better) is
//! `fa_penalty * FAR + fr_penalty * FRR` on the training samples; an
//! all-zero weight vector scores `fa_penalty + fr_penalty`.
//!
//! Random draws come from one ChaCha8 stream seeded with `cfg.seed`, consumed
//! strictly in this order:
//!
//! 1. initial population: individual by individual, 8 uniform `[0, 1)` genes;
//! 2. per generation, per child slot after the elites:
//!    tournament A (`tournament_size` uniform indices), tournament B (same),
//!    one uniform for the crossover decision, and when crossing over one
//!    boolean per gene (true takes A's gene); then per gene one uniform for
//!    the mutation decision, followed by one N(0, 0.05) draw when mutating.
//!
//! Fitness evaluation consumes no randomness, so it runs in parallel
//! without changing the stream. Ranking ties resolve by population index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_rates, ComponentSample, MatchWeights, MatchingError};

const GENES: usize = 8;
const THRESHOLD_GENE: usize = 7;
const MUTATION_SIGMA: f64 = 0.05;
const MIN_SAMPLES: usize = 20;
const THRESHOLD_FLOOR: f64 = 1e-6;

pub type Chromosome = [f64; GENES];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    #[serde(default = "default_version")]
    pub version: String,
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    pub seed: u64,
    pub fa_penalty: f64,
    pub fr_penalty: f64,
}

fn default_version() -> String {
    "1".into()
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            version: default_version(),
            population: 48,
            generations: 60,
            mutation_rate: 0.15,
            crossover_rate: 0.8,
            tournament_size: 3,
            elitism: 2,
            seed: 7,
            fa_penalty: 10.0,
            fr_penalty: 1.0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), MatchingError> {
        let fail = |m: &str| Err(MatchingError::Config(m.into()));
        if self.population == 0 {
            return fail("population must be >= 1");
        }
        if self.tournament_size < 2 {
            return fail("tournament_size must be >= 2");
        }
        if self.elitism < 1 || self.elitism > self.population {
            return fail("elitism must lie in 1..=population");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) || !(0.0..=1.0).contains(&self.crossover_rate) {
            return fail("rates must lie in [0, 1]");
        }
        if !(self.fa_penalty >= 0.0 && self.fr_penalty >= 0.0) {
            return fail("penalties must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaReport {
    pub weights: MatchWeights,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
}

impl GaReport {
    /// `generation,best_fitness,FAR,FRR` rows with a header line.
    pub fn history_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["generation", "best_fitness", "FAR", "FRR"]).expect("in-memory write");
        for s in &self.history {
            w.serialize((s.generation, s.best_fitness, s.far, s.frr)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn clamp_genes(c: &mut Chromosome) {
    for (i, g) in c.iter_mut().enumerate() {
        *g = if i == THRESHOLD_GENE {
            g.clamp(THRESHOLD_FLOOR, 1.0 - THRESHOLD_FLOOR)
        } else {
            g.clamp(0.0, 1.0)
        };
    }
}

pub fn chromosome_weights(c: &Chromosome) -> MatchWeights {
    MatchWeights::new(c[0], [c[1], c[2], c[3], c[4], c[5]], c[6], c[THRESHOLD_GENE])
}

struct Evaluated {
    fitness: f64,
    far: f64,
    frr: f64,
}

fn evaluate(c: &Chromosome, genuine: &[ComponentSample], impostor: &[ComponentSample], cfg: &GaConfig) -> Evaluated {
    match evaluate_rates(&chromosome_weights(c), genuine, impostor) {
        Ok((far, frr)) => Evaluated {
            fitness: cfg.fa_penalty * far + cfg.fr_penalty * frr,
            far,
            frr,
        },
        Err(_) => Evaluated {
            fitness: cfg.fa_penalty + cfg.fr_penalty,
            far: 1.0,
            frr: 1.0,
        },
    }
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[Evaluated], size: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let i = rng.random_range(0..fitness.len());
        if (fitness[i].fitness, i) < (fitness[best].fitness, best) {
            best = i;
        }
    }
    best
}

pub fn ga_tune(
    genuine: &[ComponentSample],
    impostor: &[ComponentSample],
    cfg: &GaConfig,
) -> Result<MatchWeights, MatchingError> {
    ga_tune_with_history(genuine, impostor, cfg).map(|r| r.weights)
}

pub fn ga_tune_with_history(
    genuine: &[ComponentSample],
    impostor: &[ComponentSample],
    cfg: &GaConfig,
) -> Result<GaReport, MatchingError> {
    cfg.validate()?;
    if genuine.len() < MIN_SAMPLES || impostor.len() < MIN_SAMPLES {
        return Err(MatchingError::TrainingData(format!(
            "need >= {MIN_SAMPLES} samples per class, got {} genuine / {} impostor",
            genuine.len(),
            impostor.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mutation = Normal::new(0.0, MUTATION_SIGMA).expect("valid sigma");
    let eval_all = |pop: &[Chromosome]| -> Vec<Evaluated> {
        pop.par_iter().map(|c| evaluate(c, genuine, impostor, cfg)).collect()
    };

    let mut population: Vec<Chromosome> = (0..cfg.population)
        .map(|_| {
            let mut c: Chromosome = std::array::from_fn(|_| rng.random::<f64>());
            clamp_genes(&mut c);
            c
        })
        .collect();
    let mut fitness = eval_all(&population);

    let mut best_idx = 0;
    for i in 1..fitness.len() {
        if fitness[i].fitness < fitness[best_idx].fitness {
            best_idx = i;
        }
    }
    let mut best = population[best_idx];
    let mut best_eval = Evaluated { ..fitness[best_idx] };
    let mut history = vec![GenerationStats {
        generation: 0,
        best_fitness: best_eval.fitness,
        far: best_eval.far,
        frr: best_eval.frr,
    }];

    for generation in 1..=cfg.generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[a].fitness.total_cmp(&fitness[b].fitness).then(a.cmp(&b)));
        let mut next: Vec<Chromosome> = order.iter().take(cfg.elitism).map(|&i| population[i]).collect();
        while next.len() < cfg.population {
            let a = tournament(&mut rng, &fitness, cfg.tournament_size);
            let b = tournament(&mut rng, &fitness, cfg.tournament_size);
            let mut child = if rng.random::<f64>() < cfg.crossover_rate {
                std::array::from_fn(|g| if rng.random::<bool>() { population[a][g] } else { population[b][g] })
            } else {
                population[a]
            };
            for gene in child.iter_mut() {
                if rng.random::<f64>() < cfg.mutation_rate {
                    *gene += mutation.sample(&mut rng);
                }
            }
            clamp_genes(&mut child);
            next.push(child);
        }
        population = next;
        fitness = eval_all(&population);

        let previous = best_eval.fitness;
        for (c, e) in population.iter().zip(&fitness) {
            if e.fitness < best_eval.fitness {
                best = *c;
                best_eval = Evaluated { ..*e };
            }
        }
        assert!(best_eval.fitness <= previous, "best-ever fitness increased");
        history.push(GenerationStats {
            generation,
            best_fitness: best_eval.fitness,
            far: best_eval.far,
            frr: best_eval.frr,
        });
    }

    Ok(GaReport {
        weights: chromosome_weights(&best),
        best_fitness: best_eval.fitness,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(code: f64, geom: f64, cluster: f64) -> ComponentSample {
        ComponentSample {
            code_distance: code,
            geom_delta: [geom; 5],
            cluster_penalty: cluster,
        }
    }

    /// Genuine components all sit below 0.2 and impostor components above
    /// 0.5, so any positive weighting separates them.
    fn separable() -> (Vec<ComponentSample>, Vec<ComponentSample>) {
        let genuine = (0..30).map(|i| sample(0.05 + 0.004 * i as f64, 0.01, 0.1)).collect();
        let impostor = (0..30).map(|i| sample(0.5 + 0.01 * i as f64, 0.6, 0.6)).collect();
        (genuine, impostor)
    }

    #[test]
    fn separable_set_has_a_perfect_threshold() {
        // oracle: sweep thresholds at fixed unit weights
        let (g, i) = separable();
        let w = MatchWeights::new(1.0, [1.0; 5], 1.0, 0.5);
        let max_g = g.iter().map(|s| w.score(s).unwrap().fused).fold(f64::MIN, f64::max);
        let min_i = i.iter().map(|s| w.score(s).unwrap().fused).fold(f64::MAX, f64::min);
        assert!(max_g < min_i);
        let sweep = (1..1000).map(|t| t as f64 / 1000.0).find(|&t| {
            let w = MatchWeights { threshold: t, ..w.clone() };
            evaluate_rates(&w, &g, &i).unwrap() == (0.0, 0.0)
        });
        assert!(sweep.is_some());

        let report = ga_tune_with_history(&g, &i, &GaConfig::default()).unwrap();
        assert_eq!(evaluate_rates(&report.weights, &g, &i).unwrap(), (0.0, 0.0));
        assert_eq!(report.best_fitness, 0.0);
    }

    #[test]
    fn history_is_monotone_and_rerun_identical() {
        let (g, i) = separable();
        let cfg = GaConfig {
            generations: 15,
            seed: 99,
            ..GaConfig::default()
        };
        let a = ga_tune_with_history(&g, &i, &cfg).unwrap();
        let b = ga_tune_with_history(&g, &i, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 16);
        assert!(a.history.windows(2).all(|w| w[1].best_fitness <= w[0].best_fitness));
        let csv = a.history_csv();
        assert!(csv.starts_with("generation,best_fitness,FAR,FRR\n"));
        assert_eq!(csv.lines().count(), 17);
    }

    #[test]
    fn no_variation_returns_initial_chromosome() {
        let (g, i) = separable();
        let cfg = GaConfig {
            population: 1,
            generations: 1,
            mutation_rate: 0.0,
            crossover_rate: 0.0,
            elitism: 1,
            seed: 5,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut initial: Chromosome = std::array::from_fn(|_| rng.random::<f64>());
        clamp_genes(&mut initial);
        assert_eq!(ga_tune(&g, &i, &cfg).unwrap(), chromosome_weights(&initial));
    }

    #[test]
    fn rejects_small_sets_and_bad_config() {
        let (g, i) = separable();
        assert!(matches!(ga_tune(&g[..19], &i, &GaConfig::default()), Err(MatchingError::TrainingData(_))));
        let bad = GaConfig {
            tournament_size: 1,
            ..GaConfig::default()
        };
        assert!(matches!(ga_tune(&g, &i, &bad), Err(MatchingError::Config(_))));
    }
}
