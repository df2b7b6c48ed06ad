//! End-to-end runs: ingest, merge, prepare, select hyperparameters, train,
//! evaluate on train/test/independent data, explain, report.
//!
//! Every stage exists as an in-memory function and as a file stage that
//! reads the previous stage's artifacts from a run directory, so a run can be
//! executed whole or one stage at a time with identical results.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::booster::{Ensemble, FORMAT_VERSION, Hyperparameters, TrainLog, train_with_eval};
use crate::dataset::{
    ColumnMapping, Database, DatabaseTag, FeatureSchema, IngestOptions, deduplicate, merge, parse_database_with, to_csv,
};
use crate::explain::{ImportanceSummary, aggregate_importance, explain};
use crate::metrics::{DatasetRole, EvaluationReport, summary_csv, table3_csv};
use crate::preprocess::{
    Dataset, IndependentAudit, PrepareConfig, PreprocessAudit, TransformParams, prepare, prepare_independent,
};
use crate::synth::{DistributionSpec, generate};
use crate::tuner::{SearchGrid, SearchResult, pairwise_grid_search};

/// File names inside a run directory.
pub mod artifacts {
    pub const CONFIG: &str = "config.json";
    pub const MANIFEST: &str = "manifest.json";
    pub const SOURCES_DIR: &str = "sources";
    pub const MERGED: &str = "merged.csv";
    pub const INDEPENDENT_SOURCE: &str = "independent_source.csv";
    pub const TRAIN: &str = "train.csv";
    pub const TEST: &str = "test.csv";
    pub const INDEPENDENT: &str = "independent.csv";
    pub const TRANSFORMS: &str = "transforms.json";
    pub const PREPROCESS: &str = "preprocess.json";
    pub const TUNING_TRACE: &str = "tuning_trace.jsonl";
    pub const HYPERPARAMETERS: &str = "hyperparameters.json";
    pub const MODEL: &str = "model.json";
    pub const TRAINING_LOG: &str = "training_log.json";
    pub const IMPORTANCE_CSV: &str = "importance.csv";
    pub const IMPORTANCE_JSON: &str = "importance.json";
    pub const SUMMARY: &str = "summary.csv";
    pub const TABLE3: &str = "table3.csv";

    pub fn report(role: crate::metrics::DatasetRole) -> String {
        format!("report_{}.json", role.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Preprocess,
    Tune,
    Train,
    Evaluate,
    Explain,
    Report,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[{stage}] configuration: {message}")]
    Config { stage: Stage, message: String },
    #[error("[{stage}] data: {message}")]
    Data { stage: Stage, message: String },
    #[error("[{stage}] training: {message}")]
    Training { stage: Stage, message: String },
    #[error("[{stage}] missing artifact {}: run the upstream stage first", path.display())]
    MissingArtifact { stage: Stage, path: PathBuf },
    #[error("[{stage}] {}: {message}", path.display())]
    Io { stage: Stage, path: PathBuf, message: String },
}

impl PipelineError {
    /// Process exit status: 2 configuration, 3 data, 4 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } => 2,
            PipelineError::Data { .. } | PipelineError::MissingArtifact { .. } | PipelineError::Io { .. } => 3,
            PipelineError::Training { .. } => 4,
        }
    }
}

fn config_err(stage: Stage, e: impl ToString) -> PipelineError {
    PipelineError::Config { stage, message: e.to_string() }
}

fn data_err(stage: Stage, e: impl ToString) -> PipelineError {
    PipelineError::Data { stage, message: e.to_string() }
}

fn train_err(stage: Stage, e: impl ToString) -> PipelineError {
    PipelineError::Training { stage, message: e.to_string() }
}

/// A source database read from CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInput {
    pub tag: DatabaseTag,
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMapping,
}

/// Generate the source databases instead of reading files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub records: usize,
    /// Replacement specs; sources without one use their preset.
    pub specs: Vec<DistributionSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { records: 2000, specs: Vec::new() }
    }
}

impl SynthConfig {
    pub fn spec_for(&self, tag: DatabaseTag) -> Option<DistributionSpec> {
        self.specs.iter().find(|s| s.source == tag).cloned().or_else(|| DistributionSpec::preset(tag))
    }
}

/// Where the booster's settings come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ModelSelection {
    /// The tuned settings reported for the combination.
    Published,
    Fixed {
        hyperparameters: Hyperparameters,
    },
    Search {
        grid: SearchGrid,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Drives the split, folds, tree sampling and synthetic data.
    pub seed: u64,
    pub combo: DatabaseTag,
    pub sources: Vec<SourceInput>,
    pub synth: Option<SynthConfig>,
    pub prepare: PrepareConfig,
    pub model: ModelSelection,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            combo: DatabaseTag::Tc,
            sources: Vec::new(),
            synth: None,
            prepare: PrepareConfig::default(),
            model: ModelSelection::Published,
            output_dir: PathBuf::from("run"),
        }
    }
}

impl PipelineConfig {
    /// Sources a run needs: the combination's members plus its independent database.
    pub fn required_sources(&self) -> Vec<DatabaseTag> {
        let mut tags = self.combo.sources().to_vec();
        tags.extend(self.combo.independent());
        tags
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let stage = Stage::Config;
        if self.combo.is_source() {
            return Err(config_err(stage, format!("combo must be TC, TA, CA or TCA, not {}", self.combo)));
        }
        if self.synth.is_none() {
            for tag in self.required_sources() {
                if !self.sources.iter().any(|s| s.tag == tag) {
                    return Err(config_err(stage, format!("no input file for source {tag}")));
                }
            }
        }
        if let Some(s) = &self.synth {
            if s.records == 0 {
                return Err(config_err(stage, "synth.records must be positive"));
            }
            for spec in &s.specs {
                spec.validate().map_err(|e| config_err(stage, e))?;
            }
        }
        if self.sources.iter().any(|s| !s.tag.is_source()) {
            return Err(config_err(stage, "source inputs must be TORIS, Commercial or Atlas"));
        }
        self.prepare.split.validate().map_err(|e| config_err(stage, e))?;
        for (name, t) in
            [("feature_threshold", self.prepare.feature_threshold), ("record_threshold", self.prepare.record_threshold)]
        {
            if !(0.0..=1.0).contains(&t) {
                return Err(config_err(stage, format!("{name} = {t} outside [0, 1]")));
            }
        }
        match &self.model {
            ModelSelection::Published => {}
            ModelSelection::Fixed { hyperparameters } => {
                hyperparameters.validate().map_err(|e| config_err(stage, e))?
            }
            ModelSelection::Search { grid } => grid.validate().map_err(|e| config_err(stage, e))?,
        }
        Ok(())
    }

    /// The configuration with the run seed pushed into the split settings.
    pub fn effective(&self) -> PipelineConfig {
        let mut c = self.clone();
        c.prepare.split.seed = c.seed;
        c
    }

    /// Read a JSON config; relative source paths resolve against its directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = read(Stage::Config, path)?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| config_err(Stage::Config, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut cfg.sources {
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
        }
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// in-memory stages

/// Read or generate every source the run needs.
pub fn load_sources(cfg: &PipelineConfig) -> Result<BTreeMap<DatabaseTag, Database>, PipelineError> {
    let stage = Stage::Ingest;
    let schema = FeatureSchema::reservoir();
    let mut out = BTreeMap::new();
    for tag in cfg.required_sources() {
        let db = match (&cfg.synth, cfg.sources.iter().find(|s| s.tag == tag)) {
            (_, Some(input)) => {
                let text = read(stage, &input.path)?;
                parse_database_with(&text, tag, &schema, &input.columns, &IngestOptions::default())
                    .map_err(|e| data_err(stage, format!("{}: {e}", input.path.display())))?
            }
            (Some(synth), None) => {
                let spec = synth.spec_for(tag).ok_or_else(|| config_err(stage, format!("no spec for {tag}")))?;
                generate(&spec, synth.records, cfg.seed).map_err(|e| config_err(stage, e))?
            }
            (None, None) => return Err(config_err(stage, format!("no input for source {tag}"))),
        };
        out.insert(tag, db);
    }
    Ok(out)
}

/// Merged, de-duplicated training database of the combination.
pub fn merge_sources(sources: &BTreeMap<DatabaseTag, Database>, combo: DatabaseTag) -> Result<Database, PipelineError> {
    let members: Vec<Database> = combo.sources().iter().filter_map(|t| sources.get(t).cloned()).collect();
    let merged = merge(&members, combo).map_err(|e| data_err(Stage::Ingest, e))?;
    Ok(deduplicate(&merged))
}

pub fn select_hyperparameters(
    model: &ModelSelection,
    combo: DatabaseTag,
    train: &Dataset,
    seed: u64,
) -> Result<(Hyperparameters, Option<SearchResult>), PipelineError> {
    match model {
        ModelSelection::Published => Ok((Hyperparameters::published(combo), None)),
        ModelSelection::Fixed { hyperparameters } => Ok((hyperparameters.clone(), None)),
        ModelSelection::Search { grid } => {
            let r = pairwise_grid_search(&train.x, &train.labels, grid, seed).map_err(|e| train_err(Stage::Tune, e))?;
            Ok((r.hyperparameters.clone(), Some(r)))
        }
    }
}

pub fn train_model(train: &Dataset, hp: &Hyperparameters, seed: u64) -> Result<(Ensemble, TrainLog), PipelineError> {
    let (mut model, log) =
        train_with_eval(&train.x, &train.labels, hp, seed, None).map_err(|e| train_err(Stage::Train, e))?;
    model.feature_names = train.feature_names.clone();
    Ok((model, log))
}

pub fn evaluate(model: &Ensemble, data: &Dataset, role: DatasetRole) -> Result<EvaluationReport, PipelineError> {
    let stage = Stage::Evaluate;
    if data.feature_names != model.feature_names {
        return Err(data_err(
            stage,
            format!("dataset features {:?} differ from model features {:?}", data.feature_names, model.feature_names),
        ));
    }
    let pred = model.predict_classes(&data.x).map_err(|e| data_err(stage, e))?;
    EvaluationReport::new(role, data.tag, &pred, &data.labels).map_err(|e| data_err(stage, e))
}

pub fn importance(model: &Ensemble, data: &Dataset) -> Result<ImportanceSummary, PipelineError> {
    let stage = Stage::Explain;
    let attribution = explain(model, &data.x).map_err(|e| data_err(stage, e))?;
    aggregate_importance(&attribution).map_err(|e| data_err(stage, e))
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: PipelineConfig,
    pub sources: BTreeMap<DatabaseTag, Database>,
    pub merged: Database,
    pub train: Dataset,
    pub test: Dataset,
    pub transforms: TransformParams,
    pub audit: PreprocessAudit,
    pub independent: Option<(Dataset, IndependentAudit)>,
    pub hyperparameters: Hyperparameters,
    pub search: Option<SearchResult>,
    pub model: Ensemble,
    pub log: TrainLog,
    pub reports: Vec<EvaluationReport>,
    pub importance: ImportanceSummary,
}

impl RunOutcome {
    pub fn report(&self, role: DatasetRole) -> Option<&EvaluationReport> {
        self.reports.iter().find(|r| r.role == role)
    }

    pub fn summary_csv(&self) -> String {
        summary_csv(self.config.combo, &self.reports)
    }
}

/// Run every stage in memory.
pub fn run(cfg: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let cfg = cfg.effective();
    let sources = load_sources(&cfg)?;
    let merged = merge_sources(&sources, cfg.combo)?;
    let prepared = prepare(&merged, &cfg.prepare).map_err(|e| data_err(Stage::Preprocess, e))?;
    let independent = match cfg.combo.independent() {
        Some(tag) => Some(
            prepare_independent(&sources[&tag], &prepared.params, &cfg.prepare.range_overrides)
                .map_err(|e| data_err(Stage::Preprocess, e))?,
        ),
        None => None,
    };
    let (hyperparameters, search) = select_hyperparameters(&cfg.model, cfg.combo, &prepared.train, cfg.seed)?;
    let (model, log) = train_model(&prepared.train, &hyperparameters, cfg.seed)?;
    let mut reports = vec![
        evaluate(&model, &prepared.train, DatasetRole::Train)?,
        evaluate(&model, &prepared.test, DatasetRole::Test)?,
    ];
    if let Some((data, _)) = &independent {
        reports.push(evaluate(&model, data, DatasetRole::Independent)?);
    }
    let importance = importance(&model, &prepared.train)?;
    Ok(RunOutcome {
        config: cfg,
        sources,
        merged,
        train: prepared.train,
        test: prepared.test,
        transforms: prepared.params,
        audit: prepared.audit,
        independent,
        hyperparameters,
        search,
        model,
        log,
        reports,
        importance,
    })
}

// ---------------------------------------------------------------------------
// run directory

fn read(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound if stage != Stage::Config && stage != Stage::Ingest => {
            PipelineError::MissingArtifact { stage, path: path.to_path_buf() }
        }
        _ => PipelineError::Io { stage, path: path.to_path_buf(), message: e.to_string() },
    })
}

fn write(stage: Stage, path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::Io {
            stage,
            path: parent.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    fs::write(path, contents).map_err(|e| PipelineError::Io { stage, path: path.to_path_buf(), message: e.to_string() })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact is serializable") + "\n"
}

fn read_json<T: for<'de> Deserialize<'de>>(stage: Stage, path: &Path) -> Result<T, PipelineError> {
    let text = read(stage, path)?;
    serde_json::from_str(&text).map_err(|e| data_err(stage, format!("{}: {e}", path.display())))
}

/// Audit written next to the prepared datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessRecord {
    pub audit: PreprocessAudit,
    pub independent: Option<IndependentAudit>,
}

/// Self-description of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub model_format: u32,
    pub seed: u64,
    pub combo: DatabaseTag,
    pub independent: Option<DatabaseTag>,
    pub synthetic: bool,
    pub artifacts: Vec<String>,
}

impl Manifest {
    fn new(cfg: &PipelineConfig, artifacts: Vec<String>) -> Self {
        Manifest {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            model_format: FORMAT_VERSION,
            seed: cfg.seed,
            combo: cfg.combo,
            independent: cfg.combo.independent(),
            synthetic: cfg.synth.is_some(),
            artifacts,
        }
    }
}

/// A run directory and the configuration that owns it.
pub struct RunDir {
    pub root: PathBuf,
    pub config: PipelineConfig,
}

impl RunDir {
    /// Validates `cfg` and fixes the run's effective settings.
    pub fn new(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(RunDir { root: cfg.output_dir.clone(), config: cfg.effective() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, stage: Stage, name: &str, contents: &str) -> Result<(), PipelineError> {
        write(stage, &self.path(name), contents)
    }

    fn read_dataset(&self, stage: Stage, name: &str, tag: DatabaseTag) -> Result<Dataset, PipelineError> {
        let path = self.path(name);
        Dataset::from_csv(&read(stage, &path)?, tag).map_err(|e| data_err(stage, format!("{}: {e}", path.display())))
    }

    fn read_model(&self, stage: Stage) -> Result<Ensemble, PipelineError> {
        let path = self.path(artifacts::MODEL);
        Ensemble::from_json(&read(stage, &path)?).map_err(|e| data_err(stage, format!("{}: {e}", path.display())))
    }

    /// Write the config snapshot and manifest.
    pub fn describe(&self) -> Result<(), PipelineError> {
        let mut names: Vec<String> = [
            artifacts::CONFIG,
            artifacts::MERGED,
            artifacts::TRAIN,
            artifacts::TEST,
            artifacts::TRANSFORMS,
            artifacts::PREPROCESS,
            artifacts::TUNING_TRACE,
            artifacts::HYPERPARAMETERS,
            artifacts::MODEL,
            artifacts::TRAINING_LOG,
            artifacts::IMPORTANCE_CSV,
            artifacts::IMPORTANCE_JSON,
            artifacts::SUMMARY,
            artifacts::TABLE3,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        names.push(artifacts::report(DatasetRole::Train));
        names.push(artifacts::report(DatasetRole::Test));
        if self.config.combo.independent().is_some() {
            names.push(artifacts::INDEPENDENT_SOURCE.into());
            names.push(artifacts::INDEPENDENT.into());
            names.push(artifacts::report(DatasetRole::Independent));
        }
        names.sort();
        self.write(Stage::Config, artifacts::CONFIG, &to_json(&self.config))?;
        self.write(Stage::Config, artifacts::MANIFEST, &to_json(&Manifest::new(&self.config, names)))
    }

    /// Load or generate the sources; write the merged and independent
    /// databases (and generated sources) as CSV.
    pub fn ingest(&self) -> Result<(), PipelineError> {
        let stage = Stage::Ingest;
        let sources = load_sources(&self.config)?;
        if self.config.synth.is_some() {
            for (tag, db) in &sources {
                self.write(stage, &format!("{}/{}.csv", artifacts::SOURCES_DIR, tag), &to_csv(db))?;
            }
        }
        let merged = merge_sources(&sources, self.config.combo)?;
        self.write(stage, artifacts::MERGED, &to_csv(&merged))?;
        if let Some(tag) = self.config.combo.independent() {
            self.write(stage, artifacts::INDEPENDENT_SOURCE, &to_csv(&sources[&tag]))?;
        }
        Ok(())
    }

    fn read_database(&self, stage: Stage, name: &str, tag: DatabaseTag) -> Result<Database, PipelineError> {
        let path = self.path(name);
        let text = read(stage, &path)?;
        parse_database_with(
            &text,
            tag,
            &FeatureSchema::reservoir(),
            &ColumnMapping::default(),
            &IngestOptions::default(),
        )
        .map_err(|e| data_err(stage, format!("{}: {e}", path.display())))
    }

    pub fn preprocess(&self) -> Result<(), PipelineError> {
        let stage = Stage::Preprocess;
        let cfg = &self.config;
        let merged = self.read_database(stage, artifacts::MERGED, cfg.combo)?;
        let prepared = prepare(&merged, &cfg.prepare).map_err(|e| data_err(stage, e))?;
        self.write(stage, artifacts::TRAIN, &prepared.train.to_csv())?;
        self.write(stage, artifacts::TEST, &prepared.test.to_csv())?;
        self.write(stage, artifacts::TRANSFORMS, &to_json(&prepared.params))?;
        let mut independent = None;
        if let Some(tag) = cfg.combo.independent() {
            let raw = self.read_database(stage, artifacts::INDEPENDENT_SOURCE, tag)?;
            let (data, audit) = prepare_independent(&raw, &prepared.params, &cfg.prepare.range_overrides)
                .map_err(|e| data_err(stage, e))?;
            self.write(stage, artifacts::INDEPENDENT, &data.to_csv())?;
            independent = Some(audit);
        }
        self.write(stage, artifacts::PREPROCESS, &to_json(&PreprocessRecord { audit: prepared.audit, independent }))
    }

    /// Select hyperparameters; runs the grid search when configured.
    pub fn tune(&self) -> Result<Hyperparameters, PipelineError> {
        let stage = Stage::Tune;
        let train = self.read_dataset(stage, artifacts::TRAIN, self.config.combo)?;
        let (hp, search) = select_hyperparameters(&self.config.model, self.config.combo, &train, self.config.seed)?;
        let trace = search.as_ref().map(|s| s.trace_jsonl()).unwrap_or_default();
        self.write(stage, artifacts::TUNING_TRACE, &trace)?;
        self.write(stage, artifacts::HYPERPARAMETERS, &to_json(&hp))?;
        Ok(hp)
    }

    /// Train on the prepared training set. Uses the tuned settings when a
    /// search is configured, otherwise the configured ones directly.
    pub fn train(&self) -> Result<Ensemble, PipelineError> {
        let stage = Stage::Train;
        let train = self.read_dataset(stage, artifacts::TRAIN, self.config.combo)?;
        let hp = match &self.config.model {
            ModelSelection::Search { .. } => read_json(stage, &self.path(artifacts::HYPERPARAMETERS))?,
            other => select_hyperparameters(other, self.config.combo, &train, self.config.seed)?.0,
        };
        let (model, log) = train_model(&train, &hp, self.config.seed)?;
        self.write(stage, artifacts::MODEL, &model.to_json())?;
        self.write(stage, artifacts::TRAINING_LOG, &to_json(&log))?;
        Ok(model)
    }

    pub fn evaluate(&self) -> Result<Vec<EvaluationReport>, PipelineError> {
        let stage = Stage::Evaluate;
        let model = self.read_model(stage)?;
        let mut reports = Vec::new();
        for (role, name) in [(DatasetRole::Train, artifacts::TRAIN), (DatasetRole::Test, artifacts::TEST)] {
            let data = self.read_dataset(stage, name, self.config.combo)?;
            reports.push(evaluate(&model, &data, role)?);
        }
        if let Some(tag) = self.config.combo.independent() {
            let data = self.read_dataset(stage, artifacts::INDEPENDENT, tag)?;
            reports.push(evaluate(&model, &data, DatasetRole::Independent)?);
        }
        for r in &reports {
            self.write(stage, &artifacts::report(r.role), &to_json(r))?;
        }
        Ok(reports)
    }

    pub fn explain(&self) -> Result<ImportanceSummary, PipelineError> {
        let stage = Stage::Explain;
        let model = self.read_model(stage)?;
        let train = self.read_dataset(stage, artifacts::TRAIN, self.config.combo)?;
        let summary = importance(&model, &train)?;
        self.write(stage, artifacts::IMPORTANCE_CSV, &summary.to_csv())?;
        self.write(stage, artifacts::IMPORTANCE_JSON, &to_json(&summary))?;
        Ok(summary)
    }

    /// Summary tables from the written reports.
    pub fn report(&self) -> Result<String, PipelineError> {
        let stage = Stage::Report;
        let mut roles = vec![DatasetRole::Train, DatasetRole::Test];
        if self.config.combo.independent().is_some() {
            roles.push(DatasetRole::Independent);
        }
        let reports = roles
            .into_iter()
            .map(|role| read_json(stage, &self.path(&artifacts::report(role))))
            .collect::<Result<Vec<EvaluationReport>, _>>()?;
        let summary = summary_csv(self.config.combo, &reports);
        self.write(stage, artifacts::SUMMARY, &summary)?;
        self.write(stage, artifacts::TABLE3, &table3_csv(&[(self.config.combo, reports)]))?;
        Ok(summary)
    }
}

/// Run every stage through the run directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PathBuf, PipelineError> {
    let dir = RunDir::new(cfg)?;
    dir.describe()?;
    dir.ingest()?;
    dir.preprocess()?;
    dir.tune()?;
    dir.train()?;
    dir.evaluate()?;
    dir.explain()?;
    dir.report()?;
    Ok(dir.root)
}
