use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prism::fixture::{core_tasks, fixture_table, regression_checks};
use prism::manifest::verify;
use prism::report::emit_report;
use prism::run::{cmd_analyze, cmd_evaluate, cmd_synth, cmd_train, EvalOptions};
use prism::scores::read_scores;
use prism::{Error, ExperimentConfig};
use prism_core::stats::ModelKey;

#[derive(Parser)]
#[command(name = "prism", version, about = "Toy vision-language model: data, training, evaluation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML); defaults apply to anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.learning_rate=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic shapes dataset with its evaluation tasks.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of images (each yields one record per task kind).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        canvas: Option<usize>,
        #[arg(long)]
        language_only: Option<usize>,
        /// Output directory (default: the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model and write a checkpoint, ledger and cost report.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-step progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Greedy-decode task files with a checkpoint and score the answers.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required = true)]
        task: Vec<PathBuf>,
        /// Transcript file (one JSON record per example).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        max_new_tokens: Option<usize>,
        /// Also write per-task accuracies as a score file.
        #[arg(long, requires = "name")]
        scores: Option<PathBuf>,
        /// Model name used in the score file.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = "runs")]
        family: String,
    },
    /// Z-score a score table, aggregate and test base vs. alternate models.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        /// Use the shipped result tables and run their regression checks.
        #[arg(long, conflicts_with = "scores")]
        fixture: bool,
        #[arg(long, num_args = 1..)]
        scores: Vec<PathBuf>,
        /// Base models (`family/name` or a unique name).
        #[arg(long, num_args = 1..)]
        base: Vec<String>,
        #[arg(long, num_args = 1..)]
        alt: Vec<String>,
        /// `family` or `global`.
        #[arg(long)]
        pool: Option<String>,
        /// `table-text`, `delimited` or `radar-data`.
        #[arg(long)]
        format: Option<String>,
        #[arg(long, value_delimiter = ',')]
        benchmarks: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the hashes recorded for a run directory or artifact.
    Verify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.into()).to_string()
}

fn list(xs: &[String]) -> String {
    toml::Value::Array(xs.iter().map(|x| toml::Value::String(x.clone())).collect()).to_string()
}

fn load(args: &ConfigArgs, mut extra: Vec<String>) -> prism::Result<ExperimentConfig> {
    let mut sets = args.sets.clone();
    sets.append(&mut extra);
    ExperimentConfig::load(args.config.as_deref(), &sets)
}

fn output_dir(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output))
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            n,
            canvas,
            language_only,
            out,
        } => {
            let mut extra = Vec::new();
            if let Some(s) = seed {
                extra.push(format!("seed={s}"));
            }
            if let Some(n) = n {
                extra.push(format!("data.synth.images={n}"));
            }
            if let Some(c) = canvas {
                extra.push(format!("data.synth.canvas={c}"));
            }
            if let Some(l) = language_only {
                extra.push(format!("data.synth.language_only={l}"));
            }
            let cfg = load(&config, extra)?;
            let dir = output_dir(&cfg, &out);
            let m = cmd_synth(&cfg, &dir)?;
            println!("wrote {} files to {} (config {})", m.artifacts.len(), dir.display(), &m.config_hash[..12]);
        }
        Command::Train {
            config,
            seed,
            out,
            quiet,
        } => {
            let mut extra = Vec::new();
            if let Some(s) = seed {
                extra.push(format!("seed={s}"));
            }
            let cfg = load(&config, extra)?;
            let dir = output_dir(&cfg, &out);
            let every = cfg.train.log_every;
            let mut log = |r: &prism_core::train::StepReport| {
                if !quiet && every > 0 && (r.step.is_multiple_of(every) || r.step + 1 == r.total_steps) {
                    eprintln!(
                        "stage {} step {}/{} loss {:.4} lr {:.3e} grad-norm {:.3}",
                        r.stage,
                        r.step + 1,
                        r.total_steps,
                        r.loss,
                        r.lr,
                        r.grad_norm
                    );
                }
            };
            let t = cmd_train(&cfg, &dir, &mut log)?;
            for s in &t.ledger.stages {
                println!(
                    "{}: {} steps over {} examples, final loss {}",
                    s.name,
                    s.steps,
                    s.examples,
                    s.final_loss.map(|l| format!("{l:.4}")).unwrap_or_else(|| "-".into())
                );
            }
            println!("align step share {:.2}%", 100.0 * t.cost.align_step_share);
            println!("wrote {} (config {})", dir.display(), &t.manifest.config_hash[..12]);
        }
        Command::Evaluate {
            model,
            task,
            out,
            workers,
            max_new_tokens,
            scores,
            name,
            family,
        } => {
            let opts = EvalOptions {
                workers,
                max_new_tokens,
                scores: scores.map(|p| (p, ModelKey::new(family, name.expect("clap enforces --name")))),
            };
            for r in cmd_evaluate(&model, &task, &out, &opts)? {
                println!("{}\t{}\t{:.2}", r.task, r.family, r.accuracy);
            }
        }
        Command::Analyze {
            config,
            fixture,
            scores,
            base,
            alt,
            pool,
            format,
            benchmarks,
            out,
        } => {
            let mut extra = Vec::new();
            if !base.is_empty() {
                extra.push(format!("analysis.base={}", list(&base)));
            }
            if !alt.is_empty() {
                extra.push(format!("analysis.alt={}", list(&alt)));
            }
            if let Some(p) = pool {
                extra.push(format!("analysis.pool={}", quoted(&p)));
            }
            if let Some(f) = format {
                extra.push(format!("analysis.format={}", quoted(&f)));
            }
            if !benchmarks.is_empty() {
                extra.push(format!("analysis.benchmarks={}", list(&benchmarks)));
            } else if fixture {
                extra.push(format!("analysis.benchmarks={}", list(&core_tasks())));
            }
            let cfg = load(&config, extra)?;
            let raw = if fixture {
                fixture_table()?
            } else if scores.is_empty() {
                return Err(Failure::Validation("analyze needs --scores or --fixture".into()));
            } else {
                read_scores(&scores)?
            };
            let analysis = cmd_analyze(&cfg, &raw, out.as_deref())?;
            match &out {
                Some(dir) => println!("wrote {}", dir.display()),
                None => print!("{}", emit_report(&analysis, cfg.analysis.format)),
            }
            if fixture {
                let checks = regression_checks()?;
                for c in &checks {
                    println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                if checks.iter().any(|c| !c.pass) {
                    return Err(Failure::Runtime("fixture regression checks failed".into()));
                }
            }
        }
        Command::Verify { paths } => {
            for p in &paths {
                let v = verify(Path::new(p))?;
                println!(
                    "ok {} ({} artifacts, config {})",
                    v.manifest.display(),
                    v.artifacts,
                    &v.config_hash[..12]
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
