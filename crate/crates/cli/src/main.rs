use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cass_core::classifier::SourceModels;
use cass_core::harness::evaluation::run_evaluation;
use cass_core::harness::metrics::classification_error_rate;
use cass_core::harness::pool::train_pool_models;
use cass_core::harness::settings::Settings;
use cass_core::io::{write_json_lines, write_wav};
use cass_core::localization::train_bank;
use cass_core::scene::{run_scene, Policy, SceneConfig, SceneContext};
use cass_core::selftest::{self, SelftestSize};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Binaural localization, stream segregation and classification with
/// simulated head rotation.
#[derive(Parser)]
#[command(name = "cass", version)]
struct Cli {
    /// TOML settings file; every section and key is optional.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the azimuth bank from white noise at every grid azimuth.
    TrainLoc {
        #[arg(long, default_value = "bank.json")]
        out: PathBuf,
        /// Noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one spectral GMM per sound class.
    TrainClf {
        #[arg(long, default_value = "models.json")]
        out: PathBuf,
        /// Class-named subdirectories of WAV files; built-in sounds otherwise.
        #[arg(long, value_name = "DIR")]
        sound_dir: Option<PathBuf>,
        /// Seed of the built-in sound pool.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one scene and write a per-block JSON-lines trace.
    Simulate(SimulateArgs),
    /// Run the cross-validated protocol and write JSON and CSV summaries.
    Evaluate(EvaluateArgs),
    /// Run the numerical property checks.
    Selftest {
        /// Fewer randomized trials.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "bank.json")]
    bank: PathBuf,
    #[arg(long, default_value = "models.json")]
    models: PathBuf,
    /// Number of sources of a random scene (ignored with a `[scene]` section).
    #[arg(long, default_value_t = 2)]
    sources: usize,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// Feedback rotation gain on the offset to the least certain source.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trace destination; standard output when absent.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Also write the analysed ear signals as a stereo WAV.
    #[arg(long, value_name = "FILE")]
    wav: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, default_value = "bank.json")]
    bank: PathBuf,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Summary table; next to the report with a `.csv` extension when absent.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Restrict to one scenario.
    #[arg(long)]
    sources: Option<usize>,
    /// Restrict to one policy.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    scenes_per_fold: Option<usize>,
    /// Run only these folds, e.g. `0,3`.
    #[arg(long, value_delimiter = ',')]
    only_folds: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    None,
    Random,
    Feedback,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::None => Policy::None,
            PolicyArg::Random => Policy::Random,
            PolicyArg::Feedback => Policy::Feedback,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path).with_context(|| format!("reading settings `{}`", path.display()))?,
        None => Settings::default(),
    };
    match cli.command {
        Command::TrainLoc { out, seed } => {
            if let Some(s) = seed {
                settings.localization.seed = s;
            }
            let frontend = settings.frontend()?;
            let renderer = settings.renderer()?;
            eprintln!(
                "training {} azimuths × {} channels from {} s of noise each",
                settings.localization.num_azimuths, settings.frontend.num_channels, settings.localization.duration
            );
            let bank = train_bank(renderer.as_ref(), &frontend, &settings.localization)?;
            bank.save(&out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::TrainClf { out, sound_dir, seed } => {
            let eval = &mut settings.evaluation;
            if let Some(dir) = sound_dir {
                eval.sound_dir = Some(dir);
            }
            if let Some(s) = seed {
                eval.master_seed = s;
            }
            let frontend = settings.frontend()?;
            let renderer = settings.renderer()?;
            let eval = &settings.evaluation;
            let pool = eval.pool()?;
            eprintln!("training models for {}", pool.labels().join(", "));
            let models = train_pool_models(
                &pool,
                None,
                eval.folds,
                &frontend,
                renderer.as_ref(),
                &eval.training,
                &eval.classifier,
            )?;
            models.save(&out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Simulate(args) => simulate(&settings, args)?,
        Command::Evaluate(args) => evaluate(settings, args)?,
        Command::Selftest { quick, seed } => {
            let size = if quick { SelftestSize::QUICK } else { SelftestSize::FULL };
            let checks = selftest::run_all(size, seed);
            for c in &checks {
                println!(
                    "{} {:<36} {:>8.1?}  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.elapsed,
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(settings: &Settings, args: SimulateArgs) -> Result<()> {
    let frontend = settings.frontend()?;
    let renderer = settings.renderer()?;
    let bank = settings.load_bank(&args.bank, renderer.as_ref())?;
    let models = SourceModels::load(&args.models)?;
    let mut scene = match &settings.scene {
        Some(scene) => {
            let mut scene = scene.clone();
            if let Some(s) = args.seed {
                scene.seed = s;
            }
            scene
        }
        None => {
            let labels: Vec<String> = models.labels().into_iter().map(String::from).collect();
            SceneConfig::random(
                args.sources,
                &labels,
                Policy::None,
                SceneConfig::default().alpha,
                args.seed.unwrap_or(0),
            )?
        }
    };
    if let Some(p) = args.policy {
        scene.policy = p.into();
    }
    if let Some(a) = args.alpha {
        scene.alpha = a;
    }
    let ctx = SceneContext {
        frontend: &frontend,
        renderer: renderer.as_ref(),
        bank: &bank,
        models: &models,
        em: &settings.evaluation.em,
    };
    let outcome = run_scene(&scene, &ctx, args.wav.is_some())?;

    match &args.trace {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating `{}`", path.display()))?;
            let mut w = BufWriter::new(file);
            write_json_lines(&mut w, &outcome.blocks)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write_json_lines(&mut w, &outcome.blocks)?;
            w.flush()?;
        }
    }
    if let (Some(path), Some((l, r))) = (&args.wav, outcome.audio) {
        write_wav(path, settings.frontend.sample_rate, &[l, r])?;
    }
    let sources: Vec<String> = scene
        .sources
        .iter()
        .map(|s| format!("{} at {}°", s.class, s.azimuth))
        .collect();
    eprintln!("scene: {} (policy {})", sources.join(", "), scene.policy);
    match outcome.rmse {
        Some(r) => eprintln!("localization RMSE {r:.2}°"),
        None => eprintln!("localization RMSE undefined: every block was skipped"),
    }
    if let Ok(e) = classification_error_rate(&outcome.decisions) {
        eprintln!("classification error {e:.2}%");
    }
    Ok(())
}

fn evaluate(mut settings: Settings, args: EvaluateArgs) -> Result<()> {
    let eval = &mut settings.evaluation;
    if let Some(n) = args.sources {
        eval.scenarios = vec![n];
    }
    if let Some(p) = args.policy {
        eval.policies = vec![p.into()];
    }
    if let Some(a) = args.alpha {
        eval.alpha = a;
    }
    if let Some(s) = args.seed {
        eval.master_seed = s;
    }
    if let Some(f) = args.folds {
        eval.folds = f;
    }
    if let Some(s) = args.scenes_per_fold {
        eval.scenes_per_fold = s;
    }
    if let Some(f) = args.only_folds {
        eval.evaluated_folds = Some(f);
    }
    if eval.alpha.is_nan() || eval.alpha <= 0.0 {
        bail!("--alpha must be positive");
    }

    let frontend = settings.frontend()?;
    let renderer = settings.renderer()?;
    let bank = settings.load_bank(&args.bank, renderer.as_ref())?;
    let report = run_evaluation(&settings.evaluation, &frontend, renderer.as_ref(), &bank, |m| {
        eprintln!("{m}")
    })?;
    report.save_json(&args.out)?;
    let csv = args.csv.unwrap_or_else(|| args.out.with_extension("csv"));
    report.save_csv(&csv)?;
    report.write_csv(std::io::stdout().lock())?;
    eprintln!("wrote {} and {}", args.out.display(), csv.display());
    Ok(())
}
