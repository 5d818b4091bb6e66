use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use sdoh_core::corpus::{read_corpus, write_corpus, Record, SynthConfig};
use sdoh_core::derivation::{read_study_csv, study_rows, write_study_csv, CodeStatusLexicon};
use sdoh_core::harness::{
    read_report, run_experiment, write_experiment, write_manifest, write_report_artifacts, ExperimentConfig,
    CACHE_DIR,
};
use sdoh_core::scorer::{overall, score_corpus, write_csv, Matching};
use sdoh_core::sectionizer::Sectionizer;
use sdoh_core::stats::{associate, write_associations_csv, Method, MiceConfig};
use sdoh_core::tagger::{checkpoint, extract_corpus, finetune, train, FinetuneConfig, Hyper, TrainReport};

#[derive(Parser)]
#[command(name = "sdoh-assoc", version, about = "SDoH extraction and association pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration for the verb.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Institution {
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchingArg {
    Overlap,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated corpus (config: generator settings).
    Generate {
        #[command(flatten)]
        common: Common,
        /// Preset used when no config is given.
        #[arg(long, value_enum, default_value = "b")]
        institution: Institution,
        /// Number of documents; overrides the config.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Locate the social-history section of each note (config: section rules, plain text).
    Sectionize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Train a tagger from scratch (config: tagger hyperparameters).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Continue training a checkpoint on new data (config: fine-tuning settings).
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run a tagger over a corpus and write predicted events.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Section rules file; the built-in rules otherwise.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Score predicted events against gold events.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long, value_enum, default_value = "overlap")]
        matching: MatchingArg,
    },
    /// Derive the analysis table from a corpus (config: code-status lexicon, plain text).
    Derive {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Estimate adjusted associations from an analysis table (config: imputation settings).
    Associate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Analysis modes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "mice,cca")]
        methods: Vec<String>,
    },
    /// Run the full cross-institution experiment (config: experiment design).
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild tables and figures from an experiment's report.json.
    Report {
        #[command(flatten)]
        common: Common,
        /// Experiment output directory or report.json.
        #[arg(long)]
        input: PathBuf,
    },
}

/// Non-converged association rows are reported after the outputs are written.
#[derive(Debug)]
struct NotConverged(usize);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} association(s) did not converge", self.0)
    }
}

impl std::error::Error for NotConverged {}

fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(sdoh_core::Error::from)
                .with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn docs(records: Vec<Record>) -> Vec<sdoh_core::corpus::AnnotatedDocument> {
    records.into_iter().map(|r| r.document).collect()
}

fn write_training(out: &Path, report: &TrainReport) -> anyhow::Result<()> {
    checkpoint::save(&report.model, out.join("model.json"))?;
    let mut w = csv::Writer::from_writer(create(&out.join("losses.csv"))?);
    w.write_record(["epoch", "loss"])?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        w.write_record([(e + 1).to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { common, institution, n } => {
            let mut config: SynthConfig = match (&common.config, institution) {
                (Some(p), _) => load_json(Some(p))?,
                (None, Institution::A) => SynthConfig::institution_a(1000, 0),
                (None, Institution::B) => SynthConfig::institution_b(4000, 0),
            };
            if let Some(n) = n {
                config.n_documents = n;
            }
            if let Some(s) = common.seed {
                config.rng_seed = s;
            }
            let corpus = sdoh_core::corpus::generate_synthetic(&config)?;
            std::fs::create_dir_all(&common.out)?;
            write_corpus(common.out.join("corpus.jsonl"), &corpus.records)?;
            serde_json::to_writer(create(&common.out.join("truth.json"))?, &corpus.truth)?;
            serde_json::to_writer_pretty(create(&common.out.join("config.json"))?, &config)?;
            write_manifest(&common.out, &[])?;
        }
        Command::Sectionize { common, input } => {
            let sectionizer = match &common.config {
                Some(p) => Sectionizer::load(p)?,
                None => Sectionizer::default_rules().clone(),
            };
            let mut records = read_corpus(&input)?;
            for r in &mut records {
                r.document.social_history = sectionizer.extract_social_history(&r.document.text);
            }
            std::fs::create_dir_all(&common.out)?;
            write_corpus(common.out.join("corpus.jsonl"), &records)?;
            write_manifest(&common.out, &[])?;
        }
        Command::Train { common, input } => {
            let mut hyper: Hyper = load_json(common.config.as_deref())?;
            if let Some(s) = common.seed {
                hyper.seed = s;
            }
            let report = train(&docs(read_corpus(&input)?), &hyper)?;
            std::fs::create_dir_all(&common.out)?;
            write_training(&common.out, &report)?;
            write_manifest(&common.out, &[])?;
        }
        Command::Finetune { common, input, model } => {
            let mut config: FinetuneConfig = load_json(common.config.as_deref())?;
            if let Some(s) = common.seed {
                config.seed = s;
            }
            let base = checkpoint::load(&model)?;
            let report = finetune(&base, &docs(read_corpus(&input)?), &config)?;
            std::fs::create_dir_all(&common.out)?;
            write_training(&common.out, &report)?;
            write_manifest(&common.out, &[])?;
        }
        Command::Extract { common, input, model, rules } => {
            let model = checkpoint::load(&model)?;
            let sectionizer = match &rules {
                Some(p) => Sectionizer::load(p)?,
                None => Sectionizer::default_rules().clone(),
            };
            let records = read_corpus(&input)?;
            let inputs: Vec<_> = records.iter().map(|r| r.document.clone()).collect();
            let predicted = extract_corpus(&model, &inputs, &sectionizer)?;
            let out: Vec<Record> = records
                .into_iter()
                .zip(predicted)
                .map(|(r, d)| Record::new(d, r.structured))
                .collect();
            std::fs::create_dir_all(&common.out)?;
            write_corpus(common.out.join("corpus.jsonl"), &out)?;
            write_manifest(&common.out, &[])?;
        }
        Command::Score { common, gold, predicted, matching } => {
            let matching = match matching {
                MatchingArg::Overlap => Matching::Overlap,
                MatchingArg::Exact => Matching::Exact,
            };
            let rows = score_corpus(&docs(read_corpus(&gold)?), &docs(read_corpus(&predicted)?), matching)?;
            std::fs::create_dir_all(&common.out)?;
            write_csv(&rows, common.out.join("scores.csv"))?;
            if let Some(o) = overall(&rows) {
                log::info!("overall P {:.3} R {:.3} F1 {:.3}", o.p, o.r, o.f1);
            }
            write_manifest(&common.out, &[])?;
        }
        Command::Derive { common, input } => {
            let lexicon = match &common.config {
                Some(p) => CodeStatusLexicon::load(p)?,
                None => CodeStatusLexicon::default_lexicon().clone(),
            };
            let rows = study_rows(&read_corpus(&input)?, &lexicon);
            std::fs::create_dir_all(&common.out)?;
            write_study_csv(&rows, create(&common.out.join("study.csv"))?)?;
            write_manifest(&common.out, &[])?;
        }
        Command::Associate { common, input, methods } => {
            let mut config: MiceConfig = load_json(common.config.as_deref())?;
            if let Some(s) = common.seed {
                config.seed = s;
            }
            let methods = methods.iter().map(|m| Method::parse(m)).collect::<sdoh_core::Result<Vec<_>>>()?;
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let rows = read_study_csv(BufReader::new(file))?;
            let results = associate(&rows, &methods, &config)?;
            std::fs::create_dir_all(&common.out)?;
            write_associations_csv(&results, create(&common.out.join("associations.csv"))?)?;
            write_manifest(&common.out, &[])?;
            let failed = results.iter().filter(|r| !r.converged).count();
            if failed > 0 {
                return Err(NotConverged(failed).into());
            }
        }
        Command::Experiment { common } => {
            let mut config: ExperimentConfig = load_json(common.config.as_deref())?;
            if let Some(s) = common.seed {
                config.reseed(s);
            }
            let cache = common.out.join(CACHE_DIR);
            let run = run_experiment(&config, Some(&cache))?;
            let manifest = write_experiment(&run, &common.out)?;
            log::info!("{} files written to {}", manifest.files.len(), common.out.display());
            let failed = run.report.associations.iter().filter(|a| !a.result.converged).count();
            if failed > 0 {
                return Err(NotConverged(failed).into());
            }
        }
        Command::Report { common, input } => {
            let path = if input.is_dir() { input.join("report.json") } else { input };
            let report = read_report(&path)?;
            write_report_artifacts(&report, &common.out)?;
            write_manifest(&common.out, &[CACHE_DIR])?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<NotConverged>().is_some() {
        return 3;
    }
    match err.chain().find_map(|e| e.downcast_ref::<sdoh_core::Error>()) {
        Some(e) if e.is_validation() => 2,
        Some(e) if e.is_numeric() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
