use serde::{Deserialize, Serialize};

use super::filter::project;
use super::{
    ClassLabel, ImputeReport, PreprocessError, PruneReport, RangeOverrides, SplitSpec, TransformParams,
    apply_transforms, bin_rf, complete_case, filter_ranges_with, fit_transforms, impute, prune_missing,
    stratified_split,
};
use crate::dataset::{
    ColumnMapping, Database, DatabaseTag, Feature, FeatureSchema, IngestError, IngestOptions, format_real,
    parse_database_with,
};
use crate::matrix::Matrix;

/// Name of the class column in prepared CSV files.
const CLASS_COLUMN: &str = "class";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub feature_threshold: f64,
    pub record_threshold: f64,
    pub split: SplitSpec,
    pub range_overrides: RangeOverrides,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            feature_threshold: 0.70,
            record_threshold: 0.55,
            split: SplitSpec::default(),
            range_overrides: RangeOverrides::new(),
        }
    }
}

/// A complete, transformed, labelled dataset ready for the booster.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tag: DatabaseTag,
    pub feature_names: Vec<String>,
    pub keys: Vec<String>,
    pub sources: Vec<DatabaseTag>,
    pub rf: Vec<f64>,
    pub labels: Vec<ClassLabel>,
    pub x: Matrix,
}

impl Dataset {
    /// Requires every record to be complete.
    pub fn from_database(db: &Database) -> Result<Self, PreprocessError> {
        let cols = db.schema.len();
        let mut data = Vec::with_capacity(db.len() * cols);
        let mut rf = Vec::with_capacity(db.len());
        let mut labels = Vec::with_capacity(db.len());
        for r in &db.records {
            let v = r.rf.ok_or_else(|| PreprocessError::MissingRf(r.key.clone()))?;
            rf.push(v);
            labels.push(bin_rf(v)?);
            for (j, x) in r.values.iter().enumerate() {
                let name = &db.schema.features()[j].name;
                data.push(x.ok_or_else(|| PreprocessError::ColumnEntirelyMissing(name.clone()))?);
            }
        }
        Ok(Dataset {
            tag: db.tag,
            feature_names: db.schema.names().map(str::to_string).collect(),
            keys: db.records.iter().map(|r| r.key.clone()).collect(),
            sources: db.records.iter().map(|r| r.source).collect(),
            rf,
            labels,
            x: Matrix::new(db.len(), cols, data),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Canonical CSV: `name, source, RF, class, <features...>`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["name", "source", "RF", CLASS_COLUMN];
        header.extend(self.feature_names.iter().map(String::as_str));
        w.write_record(&header).expect("in-memory write");
        for i in 0..self.len() {
            let mut row = vec![
                self.keys[i].clone(),
                self.sources[i].to_string(),
                format_real(self.rf[i]),
                self.labels[i].to_string(),
            ];
            row.extend(self.x.row(i).iter().map(|&v| format_real(v)));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Read a file written by [`Dataset::to_csv`]. Feature columns are the
    /// ones following the class column.
    pub fn from_csv(text: &str, tag: DatabaseTag) -> Result<Self, IngestError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| IngestError::Csv { row: 1, message: e.to_string() })?;
        let start = header
            .iter()
            .position(|h| h == CLASS_COLUMN)
            .ok_or_else(|| IngestError::MissingColumn(CLASS_COLUMN.to_string()))?;
        let features: Vec<Feature> = header.iter().skip(start + 1).map(|n| Feature::new(n, "", 0.0, 1.0)).collect();
        let schema = FeatureSchema::new(features).map_err(|e| IngestError::Csv { row: 1, message: e.to_string() })?;
        let db = parse_database_with(text, tag, &schema, &ColumnMapping::default(), &IngestOptions::default())?;
        Dataset::from_database(&db).map_err(|e| IngestError::Csv { row: 0, message: e.to_string() })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessAudit {
    pub input_records: usize,
    pub range_filtered: Vec<String>,
    pub prune: PruneReport,
    pub features: Vec<String>,
    pub train_records: usize,
    pub test_records: usize,
    pub imputed_train: ImputeReport,
    pub imputed_test: ImputeReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub params: TransformParams,
    pub audit: PreprocessAudit,
}

/// Full preparation of a merged, de-duplicated database: range filter,
/// pruning, stratified split, per-partition imputation, then transforms
/// fitted on train and applied to both partitions.
pub fn prepare(db: &Database, config: &PrepareConfig) -> Result<Prepared, PreprocessError> {
    let filtered = filter_ranges_with(db, &config.range_overrides);
    let range_filtered = removed_keys(db, &filtered);
    let (pruned, prune) = prune_missing(&filtered, config.feature_threshold, config.record_threshold)?;
    let (train, test) = stratified_split(&pruned, &config.split)?;
    let (train, imputed_train) = impute(&train)?;
    let (test, imputed_test) = impute(&test)?;
    let mut params = fit_transforms(&train)?;
    params.fitted_on = format!("{} train ({} records, seed {})", db.tag, train.len(), config.split.seed);
    let train = Dataset::from_database(&apply_transforms(&train, &params)?)?;
    let test = Dataset::from_database(&apply_transforms(&test, &params)?)?;
    let audit = PreprocessAudit {
        input_records: db.len(),
        range_filtered,
        prune,
        features: pruned.schema.names().map(str::to_string).collect(),
        train_records: train.len(),
        test_records: test.len(),
        imputed_train,
        imputed_test,
    };
    Ok(Prepared { train, test, params, audit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentAudit {
    pub tag: DatabaseTag,
    pub input_records: usize,
    pub range_filtered: usize,
    pub incomplete_dropped: usize,
    pub evaluated: usize,
}

/// Prepare a held-out source database: the same range filter, restriction
/// to the trained features, complete-case filtering, and the training
/// transforms. Nothing is imputed or refitted.
pub fn prepare_independent(
    db: &Database,
    params: &TransformParams,
    overrides: &RangeOverrides,
) -> Result<(Dataset, IndependentAudit), PreprocessError> {
    let filtered = filter_ranges_with(db, overrides);
    let names: Vec<String> = params.features.iter().map(|f| f.name.clone()).collect();
    let projected = project(&filtered, &names)?;
    let complete = complete_case(&projected);
    let data = Dataset::from_database(&apply_transforms(&complete, params)?)?;
    let audit = IndependentAudit {
        tag: db.tag,
        input_records: db.len(),
        range_filtered: db.len() - filtered.len(),
        incomplete_dropped: filtered.len() - complete.len(),
        evaluated: data.len(),
    };
    Ok((data, audit))
}

fn removed_keys(before: &Database, after: &Database) -> Vec<String> {
    let kept: std::collections::HashSet<&str> = after.records.iter().map(|r| r.key.as_str()).collect();
    let mut removed: Vec<String> =
        before.records.iter().filter(|r| !kept.contains(r.key.as_str())).map(|r| r.key.clone()).collect();
    removed.dedup();
    removed
}
