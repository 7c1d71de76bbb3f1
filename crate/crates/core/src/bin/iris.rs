//! `iris` — operator CLI over the library.
//!
//! Exit codes: 0 success, 1 rejected / no match, 2 usage error, 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use iris_core::gateway::{
    analyze_corpus, http, load_corpus, simulate_corpus, tune_model, ErrorClass, GatewayError, IrisSystem,
    SimulationConfig, SystemPaths, TuneConfig, TunedModel, VerifyRequest,
};
use iris_core::imaging::{ppm, RgbImage};
use iris_core::matching::GaConfig;
use iris_core::pipeline::PipelineConfig;
use iris_core::time::Timestamp;

#[derive(Parser)]
#[command(name = "iris", version, about = "Iris identification: enrollment, two-factor verify, reports")]
struct Cli {
    /// Enrollment store file.
    #[arg(long, global = true, env = "IRIS_STORE_PATH", default_value = "iris.store")]
    store: PathBuf,
    /// Tuned model (weights) file.
    #[arg(long, global = true, env = "IRIS_WEIGHTS_PATH", default_value = "iris.model.json")]
    weights: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Enroll a subject from three or more captures.
    Enroll {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        pin: String,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Five-digit code, then iris match against the subject's templates.
    Verify {
        #[arg(long)]
        subject: String,
        #[arg(long)]
        pin: String,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        door: Option<String>,
    },
    /// Search all enrolled subjects for a capture.
    Identify {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        door: Option<String>,
    },
    /// Status report over [from, to); RFC 3339 or epoch milliseconds.
    Report {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Train the selector and GA-tune fusion weights on a corpus directory.
    Tune {
        #[arg(long)]
        corpus: PathBuf,
        /// GA configuration as JSON; defaults when omitted.
        #[arg(long)]
        ga_config: Option<PathBuf>,
        /// Coefficients kept by the selector.
        #[arg(long, default_value_t = 256)]
        k: usize,
        /// Where to write the per-generation history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Render a seeded synthetic population with manifest and ROC CSV.
    Simulate {
        #[arg(long, default_value_t = 50)]
        identities: usize,
        #[arg(long, default_value_t = 10)]
        images: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, env = "IRIS_PORT", default_value_t = 8080)]
        port: u16,
    },
}

enum Outcome {
    Ok,
    Rejected,
}

fn read_image(path: &PathBuf) -> Result<RgbImage, GatewayError> {
    ppm::read_ppm(path).map_err(|e| GatewayError::Invalid(format!("{}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable output"));
}

fn open_system(cli: &Cli) -> Result<IrisSystem, GatewayError> {
    let model = TunedModel::load(&cli.weights)?;
    IrisSystem::open(&SystemPaths::beside_store(&cli.store), model)
}

fn run(cli: Cli) -> Result<Outcome, GatewayError> {
    match &cli.command {
        Command::Enroll {
            subject,
            name,
            pin,
            images,
        } => {
            iris_core::store::validate_pin(pin)?;
            let images = images.iter().map(read_image).collect::<Result<Vec<_>, _>>()?;
            let result = open_system(&cli)?.enroll(subject, name, pin, &images)?;
            print_json(&result);
            Ok(Outcome::Ok)
        }
        Command::Verify {
            subject,
            pin,
            image,
            door,
        } => {
            iris_core::store::validate_pin(pin)?;
            let image = read_image(image)?;
            let decision = open_system(&cli)?.run_verify(&VerifyRequest {
                subject_id: subject.clone(),
                pin: pin.clone(),
                image,
                door_id: door.clone(),
            })?;
            print_json(&decision);
            Ok(if decision.accepted { Outcome::Ok } else { Outcome::Rejected })
        }
        Command::Identify { image, door } => {
            let image = read_image(image)?;
            let result = open_system(&cli)?.run_identify(&image, door.as_deref())?;
            print_json(&result);
            Ok(if result.subject_id.is_some() { Outcome::Ok } else { Outcome::Rejected })
        }
        Command::Report { from, to, format } => {
            let parse = |t: &str| Timestamp::parse(t).ok_or_else(|| GatewayError::Invalid(format!("bad timestamp {t:?}")));
            let (from, to) = (parse(from)?, parse(to)?);
            let paths = SystemPaths::beside_store(&cli.store);
            let dispatcher = iris_core::dispatcher::Dispatcher::open(&paths.events, paths.load_alerts()?)?;
            let report = dispatcher.build_report(from, to)?;
            match format {
                Format::Json => println!("{}", report.to_json()),
                Format::Csv => print!("{}", report.to_csv()),
            }
            Ok(Outcome::Ok)
        }
        Command::Tune {
            corpus,
            ga_config,
            k,
            history,
        } => {
            let ga: GaConfig = match ga_config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                    .map_err(|e| GatewayError::Invalid(format!("{}: {e}", p.display())))?,
                None => GaConfig::default(),
            };
            let cfg = TuneConfig {
                pipeline: PipelineConfig::default(),
                k: *k,
                ga,
            };
            let identities = analyze_corpus(&load_corpus(corpus)?, &cfg.pipeline);
            let (model, report) = tune_model(&identities, &cfg)?;
            model.save(&cli.weights)?;
            if let Some(h) = history {
                std::fs::write(h, report.history_csv())?;
            }
            let last = report.history.last();
            print_json(&serde_json::json!({
                "weights_path": cli.weights,
                "weights": model.weights,
                "best_fitness": report.best_fitness,
                "far": last.map(|s| s.far),
                "frr": last.map(|s| s.frr),
            }));
            Ok(Outcome::Ok)
        }
        Command::Simulate {
            identities,
            images,
            seed,
            noise,
            out,
        } => {
            let cfg = SimulationConfig {
                identities: *identities,
                images_per_identity: *images,
                seed: *seed,
                noise_sigma: *noise,
                ..SimulationConfig::default()
            };
            let result = simulate_corpus(out, &cfg, &PipelineConfig::default())?;
            print_json(&serde_json::json!({
                "corpus": out,
                "images": result.manifest.images.len(),
                "pipeline_failures": result.failed,
            }));
            Ok(Outcome::Ok)
        }
        Command::Serve { port } => {
            let sys = Arc::new(open_system(&cli)?);
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving on port {port}");
            rt.block_on(http::serve(sys, *port))?;
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Rejected) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {} ({})", e, e.kind());
            ExitCode::from(match e.class() {
                ErrorClass::Usage | ErrorClass::Conflict => 2,
                ErrorClass::NotFound | ErrorClass::Unprocessable => 1,
                ErrorClass::Internal => 3,
            })
        }
    }
}
