use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oilrf::booster::Ensemble;
use oilrf::dataset::{DatabaseTag, to_csv};
use oilrf::metrics::DatasetRole;
use oilrf::preprocess::Dataset;
use oilrf::synth::{DistributionSpec, generate};
use oilrf::workflow::{self, PipelineConfig, PipelineError, RunDir, SourceInput, Stage, SynthConfig, artifacts};

/// Oil recovery-factor classification pipeline.
#[derive(Parser)]
#[command(name = "oilrf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON). Without one, synthetic sources are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Database combination: TC, TA, CA or TCA.
    #[arg(long)]
    combo: Option<DatabaseTag>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic TORIS-, Commercial- and Atlas-like CSVs plus a config that reads them.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Records per database.
        #[arg(long, default_value_t = 2000)]
        records: usize,
    },
    /// Read the sources, merge and de-duplicate.
    Ingest(Common),
    /// Filter, prune, split, impute and transform.
    Preprocess(Common),
    /// Select hyperparameters (grid search when configured).
    Tune(Common),
    /// Train the booster on the prepared training set.
    Train(Common),
    /// Score the model on the run's datasets, or on one CSV with --model/--data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "data")]
        model: Option<PathBuf>,
        /// Prepared dataset CSV (as written by `preprocess`).
        #[arg(long, requires = "model")]
        data: Option<PathBuf>,
        /// Database the CSV came from.
        #[arg(long, default_value = "TCA")]
        tag: DatabaseTag,
        #[arg(long, default_value = "test")]
        role: String,
    },
    /// Per-class SHAP importance over the training set.
    Explain(Common),
    /// Build the summary tables from the written reports.
    Report(Common),
    /// All stages in order.
    Run(Common),
}

fn load_config(c: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &c.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig { synth: Some(SynthConfig::default()), ..Default::default() },
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    if let Some(combo) = c.combo {
        cfg.combo = combo;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn synth(common: &Common, records: usize) -> Result<(), PipelineError> {
    let cfg = load_config(common)?;
    let out = cfg.output_dir.clone();
    let mut sources = Vec::new();
    for tag in DatabaseTag::SOURCES {
        let spec = cfg
            .synth
            .as_ref()
            .and_then(|s| s.spec_for(tag))
            .or_else(|| DistributionSpec::preset(tag))
            .expect("every source has a preset");
        let db = generate(&spec, records, cfg.seed)
            .map_err(|e| PipelineError::Config { stage: Stage::Ingest, message: e.to_string() })?;
        let path = out.join(format!("{tag}.csv"));
        write_file(&path, &to_csv(&db))?;
        sources.push(SourceInput { tag, path: PathBuf::from(format!("{tag}.csv")), columns: Default::default() });
    }
    let pipeline = PipelineConfig { sources, synth: None, output_dir: out.join("run"), ..cfg };
    let path = out.join("pipeline.json");
    write_file(&path, &(serde_json::to_string_pretty(&pipeline).expect("serializable") + "\n"))?;
    println!("wrote {} synthetic records per source and {}", records, path.display());
    Ok(())
}

fn write_file(path: &std::path::Path, text: &str) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError::Io {
        stage: Stage::Ingest,
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

fn evaluate_file(model: &PathBuf, data: &PathBuf, tag: DatabaseTag, role: &str) -> Result<(), PipelineError> {
    let stage = Stage::Evaluate;
    let read =
        |p: &PathBuf| std::fs::read_to_string(p).map_err(|_| PipelineError::MissingArtifact { stage, path: p.clone() });
    let bad = |e: String| PipelineError::Data { stage, message: e };
    let model = Ensemble::from_json(&read(model)?).map_err(|e| bad(e.to_string()))?;
    let data = Dataset::from_csv(&read(data)?, tag).map_err(|e| bad(e.to_string()))?;
    let role: DatasetRole = serde_json::from_value(serde_json::Value::String(role.to_string()))
        .map_err(|_| PipelineError::Config { stage, message: format!("unknown role {role}") })?;
    print_json(&workflow::evaluate(&model, &data, role)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    let dir = |c: &Common| load_config(c).and_then(|cfg| RunDir::new(&cfg));
    match cli.command {
        Command::Synth { common, records } => synth(&common, records),
        Command::Ingest(c) => {
            let d = dir(&c)?;
            d.describe()?;
            d.ingest()?;
            println!("wrote {}", d.path(artifacts::MERGED).display());
            Ok(())
        }
        Command::Preprocess(c) => {
            let d = dir(&c)?;
            d.preprocess()?;
            println!("wrote {}", d.path(artifacts::PREPROCESS).display());
            Ok(())
        }
        Command::Tune(c) => dir(&c)?.tune().map(|hp| print_json(&hp)),
        Command::Train(c) => {
            let d = dir(&c)?;
            d.train()?;
            println!("wrote {}", d.path(artifacts::MODEL).display());
            Ok(())
        }
        Command::Evaluate { model: Some(model), data: Some(data), tag, role, .. } => {
            evaluate_file(&model, &data, tag, &role)
        }
        Command::Evaluate { common, .. } => dir(&common)?.evaluate().map(|r| print_json(&r)),
        Command::Explain(c) => dir(&c)?.explain().map(|s| print!("{}", s.to_csv())),
        Command::Report(c) => dir(&c)?.report().map(|s| print!("{s}")),
        Command::Run(c) => {
            let cfg = load_config(&c)?;
            let root = workflow::run_pipeline(&cfg)?;
            print!("{}", std::fs::read_to_string(root.join(artifacts::SUMMARY)).unwrap_or_default());
            println!("run directory: {}", root.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
