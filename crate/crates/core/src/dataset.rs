//! Reservoir databases: schema, CSV ingest, merging and de-duplication.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the target column in canonical CSV files.
pub const TARGET_NAME: &str = "RF";

/// Number of input features in the reservoir schema.
pub const FEATURE_COUNT: usize = 11;

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("schema has no features")]
    Empty,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("feature `{name}` has lower bound {lower} not below upper bound {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("row {row}: {message}")]
    Csv { row: u64, message: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: u64, expected: usize, found: usize },
    #[error("header has no column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadNumber { row: u64, column: String, value: String },
    #[error("row {row}: empty key")]
    MissingKey { row: u64 },
    #[error("row {row}: negative RF {value}")]
    NegativeRf { row: u64, value: f64 },
    #[error("row {row}: `{value}` is not a source database tag")]
    BadSource { row: u64, value: String },
    #[error("row {row}: source `{source_tag}` does not belong to database `{tag}`")]
    ForeignSource { row: u64, source_tag: DatabaseTag, tag: DatabaseTag },
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("`{0}` is not a merge combination")]
    NotACombination(DatabaseTag),
    #[error("combination `{combo}` needs sources {expected:?}, got {found:?}")]
    SourceMismatch { combo: DatabaseTag, expected: Vec<DatabaseTag>, found: Vec<DatabaseTag> },
    #[error("databases do not share a schema")]
    SchemaMismatch,
    #[error("record `{key}` has {found} values, schema has {expected}")]
    Arity { key: String, expected: usize, found: usize },
    #[error("record `{key}` is tagged `{source_tag}` which is not a source database")]
    RecordTag { key: String, source_tag: DatabaseTag },
}

/// One input feature with its unit and admissible range.
///
/// Unbounded sides are stored as infinities and serialized as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub unit: String,
    #[serde(with = "bound::lower")]
    pub lower_bound: f64,
    #[serde(with = "bound::upper")]
    pub upper_bound: f64,
}

impl Feature {
    pub fn new(name: &str, unit: &str, lower_bound: f64, upper_bound: f64) -> Self {
        Feature { name: name.to_string(), unit: unit.to_string(), lower_bound, upper_bound }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower_bound && value <= self.upper_bound
    }
}

mod bound {
    use serde::{Deserialize, Deserializer, Serializer};

    fn ser<S: Serializer>(v: f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() { s.serialize_some(&v) } else { s.serialize_none() }
    }

    pub mod lower {
        use super::*;
        pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
            ser(*v, s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
        }
    }

    pub mod upper {
        use super::*;
        pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
            ser(*v, s)
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
        }
    }
}

/// Ordered list of input features. The target is always [`TARGET_NAME`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl TryFrom<Vec<Feature>> for FeatureSchema {
    type Error = SchemaError;
    fn try_from(features: Vec<Feature>) -> Result<Self, SchemaError> {
        FeatureSchema::new(features)
    }
}

impl From<FeatureSchema> for Vec<Feature> {
    fn from(schema: FeatureSchema) -> Self {
        schema.features
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self, SchemaError> {
        if features.is_empty() {
            return Err(SchemaError::Empty);
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(SchemaError::DuplicateFeature(f.name.clone()));
            }
            // NaN bounds fail this test as well
            if !(f.lower_bound < f.upper_bound) {
                return Err(SchemaError::InvalidBounds {
                    name: f.name.clone(),
                    lower: f.lower_bound,
                    upper: f.upper_bound,
                });
            }
        }
        Ok(FeatureSchema { features })
    }

    /// The eleven exploration-stage reservoir features.
    ///
    /// Bo, GOR and reserves carry the published admissibility windows;
    /// saturations and porosity are fractions; the remaining physical
    /// quantities are only required to be non-negative. Temperature is
    /// unbounded.
    pub fn reservoir() -> Self {
        let inf = f64::INFINITY;
        FeatureSchema::new(vec![
            Feature::new("api_gravity", "degAPI", 0.0, inf),
            Feature::new("bo", "RB/STB", 1.0, 3.0),
            Feature::new("gor", "MSCF/RB", 0.0, 60.0),
            Feature::new("water_saturation", "fraction", 0.0, 1.0),
            Feature::new("temperature", "degF", f64::NEG_INFINITY, inf),
            Feature::new("pressure", "psi", 0.0, inf),
            Feature::new("thickness", "ft", 0.0, inf),
            Feature::new("reserves", "STB", 0.0, 5e11),
            Feature::new("permeability", "mD", 0.0, inf),
            Feature::new("porosity", "fraction", 0.0, 1.0),
            Feature::new("area", "acre", 0.0, inf),
        ])
        .expect("static schema is valid")
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Replace the admissible range of one feature.
    pub fn with_bounds(mut self, name: &str, lower: f64, upper: f64) -> Result<Self, SchemaError> {
        let i = self.index_of(name).ok_or_else(|| SchemaError::UnknownFeature(name.to_string()))?;
        self.features[i].lower_bound = lower;
        self.features[i].upper_bound = upper;
        FeatureSchema::new(self.features)
    }

    /// Sub-schema keeping the features at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self, SchemaError> {
        FeatureSchema::new(indices.iter().map(|&i| self.features[i].clone()).collect())
    }
}

/// Source databases and their merge combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatabaseTag {
    #[serde(rename = "TORIS")]
    Toris,
    #[serde(rename = "Commercial")]
    Commercial,
    #[serde(rename = "Atlas")]
    Atlas,
    #[serde(rename = "TC")]
    Tc,
    #[serde(rename = "TA")]
    Ta,
    #[serde(rename = "CA")]
    Ca,
    #[serde(rename = "TCA")]
    Tca,
}

impl DatabaseTag {
    pub const SOURCES: [DatabaseTag; 3] = [DatabaseTag::Toris, DatabaseTag::Commercial, DatabaseTag::Atlas];
    pub const COMBINATIONS: [DatabaseTag; 4] = [DatabaseTag::Tc, DatabaseTag::Ta, DatabaseTag::Ca, DatabaseTag::Tca];

    pub fn is_source(self) -> bool {
        matches!(self, DatabaseTag::Toris | DatabaseTag::Commercial | DatabaseTag::Atlas)
    }

    /// Source databases making up this tag, in priority order.
    pub fn sources(self) -> &'static [DatabaseTag] {
        use DatabaseTag::*;
        match self {
            Toris => &[Toris],
            Commercial => &[Commercial],
            Atlas => &[Atlas],
            Tc => &[Toris, Commercial],
            Ta => &[Toris, Atlas],
            Ca => &[Commercial, Atlas],
            Tca => &[Toris, Commercial, Atlas],
        }
    }

    /// The source withheld from a two-database combination.
    pub fn independent(self) -> Option<DatabaseTag> {
        use DatabaseTag::*;
        match self {
            Tc => Some(Atlas),
            Ta => Some(Commercial),
            Ca => Some(Toris),
            _ => None,
        }
    }

    /// Rank used to break de-duplication ties; lower wins.
    pub fn priority(self) -> usize {
        match self {
            DatabaseTag::Toris => 0,
            DatabaseTag::Commercial => 1,
            DatabaseTag::Atlas => 2,
            _ => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        use DatabaseTag::*;
        match self {
            Toris => "TORIS",
            Commercial => "Commercial",
            Atlas => "Atlas",
            Tc => "TC",
            Ta => "TA",
            Ca => "CA",
            Tca => "TCA",
        }
    }
}

impl fmt::Display for DatabaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatabaseTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        use DatabaseTag::*;
        match s.trim().to_ascii_uppercase().as_str() {
            "TORIS" | "T" => Ok(Toris),
            "COMMERCIAL" | "C" => Ok(Commercial),
            "ATLAS" | "A" => Ok(Atlas),
            "TC" => Ok(Tc),
            "TA" => Ok(Ta),
            "CA" => Ok(Ca),
            "TCA" => Ok(Tca),
            _ => Err(format!("unknown database tag `{s}`")),
        }
    }
}

/// One reservoir: input values aligned to the schema, plus the recovery factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirRecord {
    pub key: String,
    pub values: Vec<Option<f64>>,
    pub rf: Option<f64>,
    pub source: DatabaseTag,
}

impl ReservoirRecord {
    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn missing_count(&self) -> usize {
        self.values.len() - self.present_count()
    }

    pub fn is_complete(&self) -> bool {
        self.rf.is_some() && self.values.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Database {
    pub tag: DatabaseTag,
    pub schema: FeatureSchema,
    pub records: Vec<ReservoirRecord>,
}

impl Database {
    pub fn new(tag: DatabaseTag, schema: FeatureSchema, records: Vec<ReservoirRecord>) -> Result<Self, DatasetError> {
        for r in &records {
            if r.values.len() != schema.len() {
                return Err(DatasetError::Arity { key: r.key.clone(), expected: schema.len(), found: r.values.len() });
            }
            if !r.source.is_source() {
                return Err(DatasetError::RecordTag { key: r.key.clone(), source_tag: r.source });
            }
        }
        Ok(Database { tag, schema, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same tag and schema, different records.
    pub fn with_records(&self, records: Vec<ReservoirRecord>) -> Database {
        Database { tag: self.tag, schema: self.schema.clone(), records }
    }

    /// Values of one feature column, in record order.
    pub fn column(&self, feature: usize) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.values[feature]).collect()
    }
}

/// Maps CSV header names onto the record fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub key: String,
    pub rf: String,
    /// Optional per-row provenance column; required for merged databases.
    pub source: String,
    /// Feature name to CSV column; features absent here use their own name.
    pub features: BTreeMap<String, String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            key: "name".to_string(),
            rf: TARGET_NAME.to_string(),
            source: "source".to_string(),
            features: BTreeMap::new(),
        }
    }
}

impl ColumnMapping {
    pub fn column_for<'a>(&'a self, feature: &'a str) -> &'a str {
        self.features.get(feature).map(String::as_str).unwrap_or(feature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Cell contents treated as missing, compared case-insensitively after trimming.
    pub missing_tokens: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { missing_tokens: ["", "NA", "N/A", "null"].iter().map(|s| s.to_string()).collect() }
    }
}

impl IngestOptions {
    fn is_missing(&self, cell: &str) -> bool {
        let cell = cell.trim();
        self.missing_tokens.iter().any(|t| t.trim().eq_ignore_ascii_case(cell))
    }
}

/// Parse a CSV database using the default column mapping and missing tokens.
pub fn parse_database(csv_text: &str, tag: DatabaseTag, schema: &FeatureSchema) -> Result<Database, IngestError> {
    parse_database_with(csv_text, tag, schema, &ColumnMapping::default(), &IngestOptions::default())
}

/// Parse a CSV database. Rows without an RF value are dropped.
///
/// Rows are reported by their 1-based line number, the header being line 1.
pub fn parse_database_with(
    csv_text: &str,
    tag: DatabaseTag,
    schema: &FeatureSchema,
    mapping: &ColumnMapping,
    options: &IngestOptions,
) -> Result<Database, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| IngestError::Csv { row: 1, message: e.to_string() })?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let key_col = find(&mapping.key).ok_or_else(|| IngestError::MissingColumn(mapping.key.clone()))?;
    let rf_col = find(&mapping.rf).ok_or_else(|| IngestError::MissingColumn(mapping.rf.clone()))?;
    let source_col = find(&mapping.source);
    let feature_cols = schema
        .names()
        .map(|name| {
            let col = mapping.column_for(name);
            find(col).ok_or_else(|| IngestError::MissingColumn(col.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    for result in reader.records() {
        let row = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    IngestError::Ragged { row: line, expected: *expected_len as usize, found: *len as usize }
                }
                _ => IngestError::Csv { row: line, message: e.to_string() },
            }
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let number = |col: usize, column: &str| -> Result<Option<f64>, IngestError> {
            let cell = &row[col];
            if options.is_missing(cell) {
                return Ok(None);
            }
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some).ok_or_else(|| IngestError::BadNumber {
                row: line,
                column: column.to_string(),
                value: cell.to_string(),
            })
        };

        let key = row[key_col].to_string();
        if key.is_empty() {
            return Err(IngestError::MissingKey { row: line });
        }
        let rf = number(rf_col, &mapping.rf)?;
        if let Some(value) = rf.filter(|v| *v < 0.0) {
            return Err(IngestError::NegativeRf { row: line, value });
        }
        let values = schema
            .names()
            .zip(&feature_cols)
            .map(|(name, &col)| number(col, mapping.column_for(name)))
            .collect::<Result<Vec<_>, _>>()?;
        let source = match source_col.map(|c| &row[c]).filter(|s| !s.is_empty()) {
            Some(s) => {
                let source = s
                    .parse::<DatabaseTag>()
                    .ok()
                    .filter(|t| t.is_source())
                    .ok_or_else(|| IngestError::BadSource { row: line, value: s.to_string() })?;
                if !tag.sources().contains(&source) {
                    return Err(IngestError::ForeignSource { row: line, source_tag: source, tag });
                }
                source
            }
            None if tag.is_source() => tag,
            None => {
                return Err(IngestError::MissingColumn(mapping.source.clone()));
            }
        };
        if rf.is_none() {
            continue;
        }
        records.push(ReservoirRecord { key, values, rf, source });
    }
    Ok(Database { tag, schema: schema.clone(), records })
}

/// Render a real with 17 significant digits, which round-trips every `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Canonical CSV: `name, source, RF, <features...>`, missing cells empty.
pub fn to_csv(db: &Database) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mapping = ColumnMapping::default();
    let mut header = vec![mapping.key.as_str(), mapping.source.as_str(), mapping.rf.as_str()];
    header.extend(db.schema.names());
    writer.write_record(&header).expect("in-memory write");
    for r in &db.records {
        let mut row = vec![r.key.clone(), r.source.to_string(), r.rf.map(format_real).unwrap_or_default()];
        row.extend(r.values.iter().map(|v| v.map(format_real).unwrap_or_default()));
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// Concatenate source databases under a merge tag.
///
/// Records are laid out in source priority order (TORIS, Commercial, Atlas)
/// whatever the argument order, so the result depends only on the set of inputs.
pub fn merge(sources: &[Database], combo: DatabaseTag) -> Result<Database, DatasetError> {
    if combo.is_source() {
        return Err(DatasetError::NotACombination(combo));
    }
    let mut found: Vec<DatabaseTag> = sources.iter().map(|d| d.tag).collect();
    found.sort();
    if found != combo.sources() {
        return Err(DatasetError::SourceMismatch {
            combo,
            expected: combo.sources().to_vec(),
            found: sources.iter().map(|d| d.tag).collect(),
        });
    }
    let schema = &sources[0].schema;
    if sources.iter().any(|d| &d.schema != schema) {
        return Err(DatasetError::SchemaMismatch);
    }
    let mut ordered: Vec<&Database> = sources.iter().collect();
    ordered.sort_by_key(|d| d.tag);
    let records = ordered.iter().flat_map(|d| d.records.iter().cloned()).collect();
    Ok(Database { tag: combo, schema: schema.clone(), records })
}

/// Lowercase with internal whitespace runs collapsed to one space.
pub fn normalize_key(key: &str) -> String {
    key.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Keep one record per normalized key: the most complete one, then the
/// highest-priority source, then the earliest. Survivors keep input order.
pub fn deduplicate(db: &Database) -> Database {
    let mut best: HashMap<String, usize> = HashMap::new();
    for (i, r) in db.records.iter().enumerate() {
        let key = normalize_key(&r.key);
        match best.get(&key) {
            Some(&j) => {
                let incumbent = &db.records[j];
                let challenger = (std::cmp::Reverse(r.present_count()), r.source.priority());
                let current = (std::cmp::Reverse(incumbent.present_count()), incumbent.source.priority());
                if challenger < current {
                    best.insert(key, i);
                }
            }
            None => {
                best.insert(key, i);
            }
        }
    }
    let mut keep: Vec<usize> = best.into_values().collect();
    keep.sort_unstable();
    db.with_records(keep.into_iter().map(|i| db.records[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut h = vec!["name".to_string(), "RF".to_string()];
        h.extend(FeatureSchema::reservoir().names().map(str::to_string));
        h.join(",")
    }

    fn row(name: &str, rf: &str, porosity: &str) -> String {
        let mut cells = vec![name.to_string(), rf.to_string()];
        for f in FeatureSchema::reservoir().names() {
            cells.push(if f == "porosity" { porosity.to_string() } else { "1.5".to_string() });
        }
        cells.join(",")
    }

    fn record(key: &str, present: usize, source: DatabaseTag) -> ReservoirRecord {
        let values = (0..FEATURE_COUNT).map(|i| (i < present).then_some(1.0)).collect();
        ReservoirRecord { key: key.to_string(), values, rf: Some(0.3), source }
    }

    fn db(tag: DatabaseTag, n: usize) -> Database {
        let records = (0..n).map(|i| record(&format!("{tag}-{i}"), 11, tag)).collect();
        Database::new(tag, FeatureSchema::reservoir(), records).unwrap()
    }

    #[test]
    fn reservoir_schema_has_eleven_features() {
        let s = FeatureSchema::reservoir();
        assert_eq!(s.len(), FEATURE_COUNT);
        assert!(s.features().iter().all(|f| f.lower_bound < f.upper_bound));
        let bo = &s.features()[s.index_of("bo").unwrap()];
        assert_eq!((bo.lower_bound, bo.upper_bound), (1.0, 3.0));
    }

    #[test]
    fn schema_rejects_inverted_bounds() {
        let err = FeatureSchema::new(vec![Feature::new("x", "", 2.0, 1.0)]).unwrap_err();
        assert!(matches!(err, SchemaError::InvalidBounds { .. }));
        assert_eq!(FeatureSchema::new(vec![]).unwrap_err(), SchemaError::Empty);
    }

    #[test]
    fn schema_json_keeps_infinite_bounds() {
        let s = FeatureSchema::reservoir();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("null"));
        let back: FeatureSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn parses_all_rows() {
        let text = [header(), row("a", "0.3", "0.2"), row("b", "0.4", "0.1"), row("c", "0.5", "NA")].join("\n");
        let db = parse_database(&text, DatabaseTag::Toris, &FeatureSchema::reservoir()).unwrap();
        assert_eq!(db.len(), 3);
        let por = db.schema.index_of("porosity").unwrap();
        assert_eq!(db.records[2].values[por], None);
        assert!(db.records.iter().all(|r| r.source == DatabaseTag::Toris));
    }

    #[test]
    fn drops_rows_without_rf() {
        let text = [header(), row("a", "0.3", "0.2"), row("b", "", "0.1"), row("c", "null", "0.1")].join("\n");
        let db = parse_database(&text, DatabaseTag::Atlas, &FeatureSchema::reservoir()).unwrap();
        assert_eq!(db.len(), 1);
    }

    #[test]
    fn bad_number_names_cell() {
        let text = [header(), row("a", "0.3", "0.2"), row("b", "0.3", "12.x")].join("\n");
        let err = parse_database(&text, DatabaseTag::Toris, &FeatureSchema::reservoir()).unwrap_err();
        assert_eq!(err, IngestError::BadNumber { row: 3, column: "porosity".into(), value: "12.x".into() });
    }

    #[test]
    fn ragged_row_is_an_error() {
        let text = format!("{}\n{}\nx,0.3,1\n", header(), row("a", "0.3", "0.2"));
        let err = parse_database(&text, DatabaseTag::Toris, &FeatureSchema::reservoir()).unwrap_err();
        assert!(matches!(err, IngestError::Ragged { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn negative_rf_rejected() {
        let text = [header(), row("a", "-0.1", "0.2")].join("\n");
        let err = parse_database(&text, DatabaseTag::Toris, &FeatureSchema::reservoir()).unwrap_err();
        assert!(matches!(err, IngestError::NegativeRf { row: 2, .. }));
    }

    #[test]
    fn custom_column_mapping() {
        let schema = FeatureSchema::new(vec![Feature::new("porosity", "", 0.0, 1.0)]).unwrap();
        let mut mapping = ColumnMapping { key: "Field".into(), rf: "Recovery".into(), ..Default::default() };
        mapping.features.insert("porosity".into(), "PHI".into());
        let text = "Field,PHI,Recovery\nx,0.2,0.4\n";
        let db =
            parse_database_with(text, DatabaseTag::Commercial, &schema, &mapping, &IngestOptions::default()).unwrap();
        assert_eq!(db.records[0].values, vec![Some(0.2)]);
        assert_eq!(db.records[0].rf, Some(0.4));
    }

    #[test]
    fn merged_csv_requires_source_column() {
        let text = [header(), row("a", "0.3", "0.2")].join("\n");
        let err = parse_database(&text, DatabaseTag::Tc, &FeatureSchema::reservoir()).unwrap_err();
        assert_eq!(err, IngestError::MissingColumn("source".into()));
    }

    #[test]
    fn canonical_csv_round_trips() {
        let mut d = db(DatabaseTag::Toris, 3);
        d.records[1].values[4] = None;
        d.records[2].values[0] = Some(0.1 + 0.2);
        d.records[0].rf = Some(2.32);
        let text = to_csv(&d);
        let back = parse_database(&text, DatabaseTag::Toris, &d.schema).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn merge_counts() {
        let merged = merge(&[db(DatabaseTag::Toris, 10), db(DatabaseTag::Commercial, 5)], DatabaseTag::Tc).unwrap();
        assert_eq!(merged.len(), 15);
        assert_eq!(merged.tag, DatabaseTag::Tc);
        let all = merge(
            &[db(DatabaseTag::Atlas, 4), db(DatabaseTag::Toris, 10), db(DatabaseTag::Commercial, 5)],
            DatabaseTag::Tca,
        )
        .unwrap();
        assert_eq!(all.len(), 19);
        assert_eq!(all.records[0].source, DatabaseTag::Toris);
    }

    #[test]
    fn merge_rejects_wrong_sources() {
        let err = merge(&[db(DatabaseTag::Toris, 1), db(DatabaseTag::Atlas, 1)], DatabaseTag::Ca).unwrap_err();
        assert!(matches!(err, DatasetError::SourceMismatch { .. }));
        let err = merge(&[db(DatabaseTag::Toris, 1), db(DatabaseTag::Toris, 1)], DatabaseTag::Tc).unwrap_err();
        assert!(matches!(err, DatasetError::SourceMismatch { .. }));
        let err = merge(&[db(DatabaseTag::Toris, 1)], DatabaseTag::Toris).unwrap_err();
        assert_eq!(err, DatasetError::NotACombination(DatabaseTag::Toris));
    }

    #[test]
    fn dedup_keeps_most_complete() {
        let records = vec![record("Field  A", 5, DatabaseTag::Toris), record("field a", 8, DatabaseTag::Atlas)];
        let d = Database::new(DatabaseTag::Ta, FeatureSchema::reservoir(), records).unwrap();
        let out = deduplicate(&d);
        assert_eq!(out.len(), 1);
        assert_eq!(out.records[0].present_count(), 8);
    }

    #[test]
    fn dedup_tie_prefers_toris() {
        let records = vec![record("x", 7, DatabaseTag::Atlas), record("x", 7, DatabaseTag::Toris)];
        let d = Database::new(DatabaseTag::Ta, FeatureSchema::reservoir(), records).unwrap();
        let out = deduplicate(&d);
        assert_eq!(out.len(), 1);
        assert_eq!(out.records[0].source, DatabaseTag::Toris);
    }

    #[test]
    fn dedup_unique_keys_is_identity() {
        let d = db(DatabaseTag::Commercial, 6);
        assert_eq!(deduplicate(&d), d);
    }

    #[test]
    fn independent_sources() {
        assert_eq!(DatabaseTag::Tc.independent(), Some(DatabaseTag::Atlas));
        assert_eq!(DatabaseTag::Ta.independent(), Some(DatabaseTag::Commercial));
        assert_eq!(DatabaseTag::Ca.independent(), Some(DatabaseTag::Toris));
        assert_eq!(DatabaseTag::Tca.independent(), None);
    }
}
