//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 for invalid input or a failed analysis step,
//! 2 for file-system errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::corpus::{tabulate_distributions, validate_corpus, write_corpus, CorpusError};
use crate::pipeline::{
    load_corpus, render_segmentation, report, segment_corpus, train, write_file,
    write_segmentation, PipelineError, TrainArtifacts, CONFIG_FILE,
};
use crate::synth::{default_paper_spec, generate_corpus, RegimeSpec};

pub const CORPUS_FILE: &str = "corpus.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SPEC_FILE: &str = "spec.json";

#[derive(Debug, Parser)]
#[command(name = "verbseq", version, about = "Transition structure in annotated verb sequences")]
pub struct Cli {
    /// Run configuration (flat key = value file).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus file and list every violation.
    Validate { corpus: PathBuf },
    /// Category, tense and tense-by-category distributions.
    Stats { corpus: PathBuf },
    /// Generate a synthetic corpus with its ground-truth sidecar.
    Synth(SynthArgs),
    /// Train the map, clustering and Markov models.
    Train {
        /// Corpus file; defaults to `corpus` from the configuration.
        corpus: Option<PathBuf>,
    },
    /// Crosstabs, association tests, typical pairs and segmentation.
    Report(ArtifactArgs),
    /// Segment every text of a corpus into cluster spans.
    Segment(ArtifactArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator spec as JSON.
    #[arg(long, conflicts_with = "paper_default", required_unless_present = "paper_default")]
    pub spec: Option<PathBuf>,
    /// Use the bundled spec calibrated to the reference corpus marginals.
    #[arg(long)]
    pub paper_default: bool,
    /// Number of texts.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct ArtifactArgs {
    /// Corpus file; defaults to `corpus` from the configuration.
    pub corpus: Option<PathBuf>,
    /// Directory written by `train`; defaults to `out` from the configuration.
    #[arg(long, value_name = "DIR")]
    pub artifacts: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(explicit: Option<&Path>, fallback: Option<&Path>) -> Result<RunConfig, PipelineError> {
    match (explicit, fallback) {
        (Some(p), _) => Ok(RunConfig::load(p)?),
        (None, Some(p)) if p.exists() => Ok(RunConfig::load(p)?),
        _ => Ok(RunConfig::default()),
    }
}

fn corpus_path(arg: &Option<PathBuf>, config: &RunConfig) -> Result<PathBuf, PipelineError> {
    arg.clone().or_else(|| config.corpus.clone()).ok_or_else(|| {
        PipelineError::Config(crate::config::ConfigError::Invalid(
            "no corpus given on the command line or in the configuration".into(),
        ))
    })
}

fn out_write(stdout: &mut dyn Write, text: &str) -> Result<(), PipelineError> {
    stdout.write_all(text.as_bytes()).map_err(|source| PipelineError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, PipelineError> {
    match &cli.command {
        Command::Validate { corpus } => {
            let file = fs::File::open(corpus).map_err(|source| PipelineError::Io {
                path: corpus.clone(),
                source,
            })?;
            let (_, errors) = validate_corpus(file);
            if let Some(CorpusError::Io(e)) = errors.first() {
                return Err(PipelineError::Io {
                    path: corpus.clone(),
                    source: std::io::Error::new(e.kind(), e.to_string()),
                });
            }
            for e in &errors {
                out_write(stdout, &format!("{}: {e}\n", corpus.display()))?;
            }
            if errors.is_empty() {
                out_write(stdout, &format!("{}: ok\n", corpus.display()))?;
                Ok(0)
            } else {
                Ok(1)
            }
        }
        Command::Stats { corpus } => {
            let c = load_corpus(corpus)?;
            out_write(stdout, &tabulate_distributions(&c)?.render())?;
            Ok(0)
        }
        Command::Synth(args) => {
            let config = load_config(cli.config.as_deref(), None)?;
            let seed = cli.seed.unwrap_or(config.seed);
            let out = cli.out.clone().unwrap_or(config.out);
            let spec: RegimeSpec = match &args.spec {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|source| PipelineError::Io {
                        path: p.clone(),
                        source,
                    })?;
                    serde_json::from_str(&text).map_err(|source| PipelineError::Artifact {
                        path: p.clone(),
                        source,
                    })?
                }
                None => default_paper_spec(),
            };
            let (corpus, truth) = generate_corpus(&spec, args.n, seed)?;
            fs::create_dir_all(&out).map_err(|source| PipelineError::Io {
                path: out.clone(),
                source,
            })?;
            let mut csv = Vec::new();
            write_corpus(&corpus, &mut csv)?;
            write_file(&out.join(CORPUS_FILE), &csv)?;
            let mut sidecar = Vec::new();
            truth.write_sidecar(&mut sidecar).expect("writing to memory");
            write_file(&out.join(TRUTH_FILE), &sidecar)?;
            let mut spec_json = serde_json::to_string_pretty(&spec).expect("spec serializes");
            spec_json.push('\n');
            write_file(&out.join(SPEC_FILE), spec_json.as_bytes())?;
            out_write(
                stdout,
                &format!(
                    "{} texts, {} tokens -> {}\n",
                    corpus.texts.len(),
                    corpus.token_count(),
                    out.display()
                ),
            )?;
            Ok(0)
        }
        Command::Train { corpus } => {
            let mut config = load_config(cli.config.as_deref(), None)?;
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            if let Some(o) = &cli.out {
                config.out = o.clone();
            }
            config.corpus = Some(corpus_path(corpus, &config)?);
            let c = load_corpus(config.corpus.as_deref().expect("set above"))?;
            let artifacts = train(&config, &c)?;
            artifacts.write(&config.out, &config)?;
            let cl = &artifacts.clustering;
            let db = cl.db_score.map_or_else(|| "n/a".to_string(), |d| format!("{d:.4}"));
            out_write(
                stdout,
                &format!(
                    "k\t{}\ndb_score\t{}\nhmm_loglik\t{:.6}\nartifacts\t{}\n",
                    cl.k,
                    db,
                    artifacts.hmm.loglik_trace.last().copied().unwrap_or(f64::NAN),
                    config.out.display()
                ),
            )?;
            Ok(0)
        }
        Command::Report(args) | Command::Segment(args) => {
            let base = load_config(cli.config.as_deref(), None)?;
            let dir = args
                .artifacts
                .clone()
                .or_else(|| cli.out.clone())
                .unwrap_or_else(|| base.out.clone());
            let config = load_config(cli.config.as_deref(), Some(&dir.join(CONFIG_FILE)))?;
            let out = cli.out.clone().unwrap_or_else(|| dir.clone());
            let corpus = load_corpus(&corpus_path(&args.corpus, &config)?)?;
            let artifacts = TrainArtifacts::load(&dir)?;
            if matches!(cli.command, Command::Report(_)) {
                let r = report(&config, &artifacts, &corpus)?;
                r.write(&out)?;
                out_write(stdout, &r.render())?;
            } else {
                let seg = segment_corpus(&corpus, &artifacts.label(&corpus)?);
                write_segmentation(&out, &seg)?;
                out_write(stdout, &render_segmentation(&seg))?;
            }
            Ok(0)
        }
    }
}
