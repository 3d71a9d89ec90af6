mod config;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use latsmooth::data::{parse_fasta, parse_labeled_csv, Alphabet, Sequence, SubsampleMode};
use latsmooth::harness::{
    fit_vae, sample_space, vae_corpus, limits_study, run_pipeline_with, sweep, to_json,
    LimitsConfig, OracleSpec, RunReport, SweepConfig, Task,
};
use latsmooth::hull::{run_props, PropConfig, PropSource};
use latsmooth::random;
use latsmooth::vae::{reconstruction_accuracy, train_vae, VaeModel};
use serde::Serialize;

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "latsmooth", version, about = "Latent-space sequence optimization with graph label smoothing")]
struct Cli {
    /// Run seed; overrides the config and re-derives every stage seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    Gaussian,
    VaeLatents,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the sequence VAE and write it in the text model format.
    TrainVae {
        /// Sequences (FASTA, or CSV with a `sequence,fitness` header). Without
        /// it the corpus comes from the configured task.
        #[arg(long, alias = "data")]
        corpus: Option<PathBuf>,
    },
    /// Run the full pipeline and write a JSON report.
    Optimize {
        /// Pretrained VAE; trained from the config when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// CSV enumerating the whole labeled space; replaces the configured oracle.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score designs against the configured task's oracle.
    Eval {
        /// A run report (JSON), FASTA, or one sequence per line.
        #[arg(long)]
        designs: PathBuf,
    },
    /// Hull and distance checks for synthetic nodes.
    VerifyProps {
        #[arg(long, value_delimiter = ',', default_values_t = vec![16usize, 32, 64])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = Source::Gaussian)]
        source: Source,
        /// VAE for `--source vae-latents`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Sequences to embed for `--source vae-latents`; random ones otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Smoothing hyperparameter grid from the `[sweep]` config section.
    Sweep {
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Design fitness as the training set shrinks.
    Limits {
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<String>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    emit(out, &to_json(value)?)
}

fn task_alphabet(cfg: &FileConfig) -> Alphabet {
    match &cfg.run.task.oracle {
        OracleSpec::Nk { alphabet, .. } | OracleSpec::Table { alphabet, .. } => alphabet.clone(),
    }
}

fn read_sequences(path: &Path, alphabet: &Alphabet) -> Result<Vec<Sequence>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('>') {
        return Ok(parse_fasta(path, alphabet)?);
    }
    if text.lines().next().is_some_and(|h| h.trim() == "sequence,fitness") {
        return Ok(parse_labeled_csv(path, alphabet)?.sequences);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Ok(alphabet.encode(l.trim(), i + 1)?))
        .collect()
}

fn load_vae(path: &Path) -> Result<VaeModel<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(VaeModel::from_text(&text)?)
}

#[derive(Serialize)]
struct VaeSummary {
    corpus: usize,
    initial_loss: f64,
    final_loss: f64,
    reconstruction: f64,
}

#[derive(Serialize)]
struct EvalReport {
    metrics: latsmooth::harness::MetricsReport,
    metrics_verified: bool,
    best_train_fitness: f64,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads == 0 {
        bail!("--threads must be at least 1");
    }
    let mut cfg = FileConfig::load(cli.config.as_deref(), cli.seed)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::TrainVae { corpus } => {
            let alphabet = task_alphabet(&cfg);
            let corpus = match corpus {
                Some(p) => read_sequences(&p, &alphabet)?,
                None => {
                    let task = Task::build(&cfg.run.task, cfg.run.seed)?;
                    vae_corpus(&cfg.run.vae, &task, cfg.run.seed)?
                }
            };
            let fit = train_vae::<f64>(&corpus, &alphabet, &cfg.run.vae.train)?;
            let summary = VaeSummary {
                corpus: corpus.len(),
                initial_loss: fit.initial_loss,
                final_loss: fit.epoch_losses.last().copied().unwrap_or(fit.initial_loss),
                reconstruction: reconstruction_accuracy(&fit.model, &corpus)?,
            };
            match out {
                Some(p) => {
                    emit(Some(p), &fit.model.to_text())?;
                    eprint!("{}", to_json(&summary)?);
                }
                None => {
                    print!("{}", fit.model.to_text());
                    eprint!("{}", to_json(&summary)?);
                }
            }
        }
        Command::Optimize { model, data } => {
            if let Some(p) = data {
                cfg.run.task.oracle = OracleSpec::Table {
                    path: p,
                    alphabet: task_alphabet(&cfg),
                };
            }
            let vae = model.as_deref().map(load_vae).transpose()?;
            let report = run_pipeline_with(&cfg.run, vae, cli.threads)?;
            emit_json(out, &report)?;
        }
        Command::Eval { designs } => {
            let task = Task::build(&cfg.run.task, cfg.run.seed)?;
            let seqs = if designs.extension().is_some_and(|e| e == "json") {
                let text = std::fs::read_to_string(&designs)?;
                let report: RunReport = serde_json::from_str(&text).context("parsing run report")?;
                report
                    .smoothed
                    .designs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| Ok(task.alphabet().encode(&d.sequence, i + 1)?))
                    .collect::<Result<Vec<_>>>()?
            } else {
                read_sequences(&designs, task.alphabet())?
            };
            let (metrics, metrics_verified) = task.evaluate_sequences(&seqs)?;
            emit_json(
                out,
                &EvalReport {
                    metrics,
                    metrics_verified,
                    best_train_fitness: task.best_train_fitness(),
                },
            )?;
        }
        Command::VerifyProps {
            dims,
            n,
            beta,
            trials,
            source,
            model,
            data,
        } => {
            let seed = cli.seed.unwrap_or(cfg.run.seed);
            let (source, dims) = match source {
                Source::Gaussian => (PropSource::Gaussian, dims),
                Source::VaeLatents => {
                    let vae = match model {
                        Some(p) => load_vae(&p)?,
                        None => {
                            let task = Task::build(&cfg.run.task, cfg.run.seed)?;
                            fit_vae(&cfg.run, &task)?
                        }
                    };
                    let seqs = match data {
                        Some(p) => read_sequences(&p, &vae.alphabet)?,
                        None => sample_space(vae.alphabet.len(), vae.length, n.max(1) * 4, random::derive_seed(seed, 5)),
                    };
                    let d = vae.latent_dim();
                    (PropSource::Latents(vae.encode_batch(&seqs)?), vec![d])
                }
            };
            let report = run_props(
                &PropConfig {
                    dims,
                    n,
                    beta,
                    trials,
                    source,
                    seed,
                },
                cli.threads,
            )?;
            emit_json(out, &report)?;
        }
        Command::Sweep { budget } => {
            let sc = SweepConfig {
                base: cfg.run.clone(),
                grid: cfg.sweep.grid.clone(),
                budget: budget.unwrap_or(cfg.sweep.budget),
                seed: cfg.run.seed,
            };
            emit_json(out, &sweep(&sc, cli.threads)?)?;
        }
        Command::Limits { ratios, modes, repeats } => {
            let modes = match modes {
                Some(ms) => ms
                    .iter()
                    .map(|m| match m.as_str() {
                        "random" => Ok(SubsampleMode::Random),
                        "lowest" => Ok(SubsampleMode::Lowest),
                        other => bail!("unknown subsample mode '{other}'"),
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => cfg.limits.modes.clone(),
            };
            let lc = LimitsConfig {
                base: cfg.run.clone(),
                ratios: ratios.unwrap_or_else(|| cfg.limits.ratios.clone()),
                modes,
                repeats: repeats.unwrap_or(cfg.limits.repeats),
                seed: cfg.run.seed,
            };
            emit_json(out, &limits_study(&lc, cli.threads)?)?;
        }
    }
    Ok(())
}
