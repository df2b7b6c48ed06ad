use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::dataset::{Database, DatabaseTag, FeatureSchema};

/// Replacement bounds for one feature; `None` keeps the schema's value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundOverride {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Per-source-database bound overrides, keyed by feature name.
pub type RangeOverrides = BTreeMap<DatabaseTag, BTreeMap<String, BoundOverride>>;

/// Drop records with any present value outside its schema bounds.
pub fn filter_ranges(db: &Database) -> Database {
    filter_ranges_with(db, &RangeOverrides::new())
}

/// As [`filter_ranges`], with per-source bounds replacing the schema's.
/// Missing values never cause removal.
pub fn filter_ranges_with(db: &Database, overrides: &RangeOverrides) -> Database {
    let bounds_for = |source: DatabaseTag| -> Vec<(f64, f64)> {
        let per_feature = overrides.get(&source);
        db.schema
            .features()
            .iter()
            .map(|f| {
                let o = per_feature.and_then(|m| m.get(&f.name)).copied().unwrap_or_default();
                (o.lower.unwrap_or(f.lower_bound), o.upper.unwrap_or(f.upper_bound))
            })
            .collect()
    };
    let bounds: BTreeMap<DatabaseTag, Vec<(f64, f64)>> =
        DatabaseTag::SOURCES.iter().map(|&t| (t, bounds_for(t))).collect();
    let records = db
        .records
        .iter()
        .filter(|r| {
            let b = &bounds[&r.source];
            r.values.iter().zip(b).all(|(v, &(lo, hi))| v.is_none_or(|x| x >= lo && x <= hi))
        })
        .cloned()
        .collect();
    db.with_records(records)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    /// Missing fraction of every input feature before pruning.
    pub feature_missing_fraction: BTreeMap<String, f64>,
    pub dropped_features: Vec<String>,
    pub dropped_records: Vec<String>,
}

/// Drop features missing in more than `feature_threshold` of records, then
/// records missing more than `record_threshold` of the surviving features.
pub fn prune_missing(
    db: &Database,
    feature_threshold: f64,
    record_threshold: f64,
) -> Result<(Database, PruneReport), PreprocessError> {
    for t in [feature_threshold, record_threshold] {
        if !(t > 0.0 && t < 1.0) {
            return Err(PreprocessError::InvalidThreshold(t));
        }
    }
    if db.is_empty() {
        return Err(PreprocessError::EmptyDatabase);
    }
    let n = db.len() as f64;
    let mut report = PruneReport::default();
    let mut keep = Vec::new();
    for (j, feature) in db.schema.features().iter().enumerate() {
        let missing = db.records.iter().filter(|r| r.values[j].is_none()).count();
        let fraction = missing as f64 / n;
        report.feature_missing_fraction.insert(feature.name.clone(), fraction);
        if fraction > feature_threshold {
            report.dropped_features.push(feature.name.clone());
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(PreprocessError::AllFeaturesDropped);
    }
    let schema = db.schema.select(&keep).expect("subset of a valid schema");
    let width = keep.len() as f64;
    let mut records = Vec::with_capacity(db.len());
    for r in &db.records {
        let values: Vec<Option<f64>> = keep.iter().map(|&j| r.values[j]).collect();
        let missing = values.iter().filter(|v| v.is_none()).count();
        if missing as f64 / width > record_threshold {
            report.dropped_records.push(r.key.clone());
        } else {
            let mut r = r.clone();
            r.values = values;
            records.push(r);
        }
    }
    Ok((Database { tag: db.tag, schema, records }, report))
}

/// Keep only records with every feature and the RF present.
pub fn complete_case(db: &Database) -> Database {
    db.with_records(db.records.iter().filter(|r| r.is_complete()).cloned().collect())
}

/// Restrict a database to the named features, in the given order.
pub(crate) fn project(db: &Database, names: &[String]) -> Result<Database, PreprocessError> {
    let indices = names
        .iter()
        .map(|n| db.schema.index_of(n).ok_or_else(|| PreprocessError::UnknownFeature(n.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let schema: FeatureSchema = db.schema.select(&indices).map_err(|_| PreprocessError::AllFeaturesDropped)?;
    let records = db
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.values = indices.iter().map(|&j| r.values[j]).collect();
            r
        })
        .collect();
    Ok(Database { tag: db.tag, schema, records })
}
