//! Delimited-text loading with the usual proxy transforms.
//!
//! Each schema dimension is bound to one input column. A [`TransformRule`]
//! turns the raw cell into a category: a postal code prefix for geography, a
//! truncated NACE code for the knowledge base, a size class from an employee
//! count, or an explicit lookup table.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infomeasure::{MaxEntropyMode, UnitScale};
use crate::tableau::{Dimension, DimensionSchema, Record};

/// Category used for empty cells under [`MissingPolicy::ExplicitMissing`].
pub const MISSING_CATEGORY: &str = "(missing)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformRule {
    Identity,
    /// First `length` characters, e.g. a 2-digit NACE division or postal region.
    Prefix { length: usize },
    /// Explicit code → category table. Codes absent from the table map to
    /// `default`, or count as missing.
    CodeMap {
        #[serde(default)]
        mapping: BTreeMap<String, String>,
        /// Two-column delimited file (header row, then code,category) merged into `mapping`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<String>,
    },
    /// `labels[i]` for the first `thresholds[i]` the value is below; the last
    /// label otherwise.
    NumericBin { thresholds: Vec<f64>, labels: Vec<String> },
}

/// Outcome of applying a transform to one raw cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Transformed {
    Category(String),
    Missing,
    Invalid(&'static str),
}

impl TransformRule {
    /// EU enterprise size classes by employee count.
    pub fn eu_size_classes() -> Self {
        TransformRule::NumericBin {
            thresholds: vec![10.0, 50.0, 250.0],
            labels: ["micro", "small", "medium", "large"].map(String::from).to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TransformRule::Identity => Ok(()),
            TransformRule::Prefix { length } => {
                if *length == 0 {
                    Err(Error::Schema("prefix length must be at least 1".into()))
                } else {
                    Ok(())
                }
            }
            TransformRule::CodeMap { mapping, default, .. } => {
                if mapping.values().any(String::is_empty) || default.as_deref() == Some("") {
                    Err(Error::Schema("code_map categories must be non-empty".into()))
                } else {
                    Ok(())
                }
            }
            TransformRule::NumericBin { thresholds, labels } => {
                if thresholds.iter().any(|t| !t.is_finite()) {
                    return Err(Error::Schema("bin thresholds must be finite".into()));
                }
                if thresholds.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema("bin thresholds must be strictly increasing".into()));
                }
                if labels.len() != thresholds.len() + 1 {
                    return Err(Error::Schema(format!(
                        "{} thresholds need {} bin labels, got {}",
                        thresholds.len(),
                        thresholds.len() + 1,
                        labels.len()
                    )));
                }
                if labels.iter().any(String::is_empty) {
                    return Err(Error::Schema("bin labels must be non-empty".into()));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, raw: &str) -> Transformed {
        let value = raw.trim();
        if value.is_empty() {
            return Transformed::Missing;
        }
        match self {
            TransformRule::Identity => Transformed::Category(value.to_string()),
            TransformRule::Prefix { length } => {
                Transformed::Category(value.chars().take(*length).collect())
            }
            TransformRule::CodeMap { mapping, default, .. } => {
                match mapping.get(value).or(default.as_ref()) {
                    Some(c) => Transformed::Category(c.clone()),
                    None => Transformed::Missing,
                }
            }
            TransformRule::NumericBin { thresholds, labels } => match value.parse::<f64>() {
                Ok(x) if x.is_finite() => {
                    let bin = thresholds.iter().position(|t| x < *t).unwrap_or(thresholds.len());
                    Transformed::Category(labels[bin].clone())
                }
                _ => Transformed::Invalid("non-numeric value in binned column"),
            },
        }
    }

    /// Reads a `path`-backed code map into `mapping`; relative paths resolve against `base`.
    fn load_code_map(&mut self, base: Option<&Path>, delimiter: u8) -> Result<()> {
        let TransformRule::CodeMap { mapping, path: Some(path), .. } = self else {
            return Ok(());
        };
        let full = match base {
            Some(b) if path.is_relative() => b.join(&*path),
            _ => path.clone(),
        };
        let file = File::open(&full).map_err(|e| Error::io(&full, e))?;
        let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(file);
        let mut seen = HashSet::new();
        for row in reader.records() {
            let row = row?;
            let (Some(code), Some(category)) = (row.get(0), row.get(1)) else {
                return Err(Error::Validation(format!("{}: code_map rows need two columns", full.display())));
            };
            let code = code.trim().to_string();
            if !seen.insert(code.clone()) {
                return Err(Error::Validation(format!("{}: duplicate code `{code}`", full.display())));
            }
            mapping.insert(code, category.trim().to_string());
        }
        *path = full;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Drop,
    ExplicitMissing,
}

/// Binds a schema dimension to an input column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionBinding {
    pub name: String,
    /// Defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_cardinality: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformRule>,
}

impl DimensionBinding {
    pub fn column(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.name)
    }
}

fn default_delimiter() -> char {
    ','
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub input: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub dimensions: Vec<DimensionBinding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_column: Option<String>,
    #[serde(default)]
    pub missing: MissingPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mode: Option<MaxEntropyMode>,
    #[serde(default)]
    pub unit: UnitScale,
    /// Abort on the first bad row instead of dropping it.
    #[serde(default)]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_group_mass: Option<f64>,
}

impl IngestConfig {
    /// Identity bindings for every dimension of `schema`, reading the column of the same name.
    pub fn identity(input: impl Into<PathBuf>, schema: &DimensionSchema) -> Self {
        Self {
            input: input.into(),
            delimiter: ',',
            dimensions: schema
                .dims()
                .iter()
                .map(|d| DimensionBinding {
                    name: d.name.clone(),
                    column: None,
                    declared_cardinality: d.declared_cardinality,
                    transform: None,
                })
                .collect(),
            weight_column: None,
            period_column: None,
            missing: MissingPolicy::Drop,
            max_mode: None,
            unit: UnitScale::Bits,
            strict: false,
            epsilon: None,
            smoothing: None,
            min_group_mass: None,
        }
    }

    /// Parses a JSON config. Relative input and code-map paths resolve against
    /// the config file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(base) = base {
            if config.input.is_relative() {
                config.input = base.join(&config.input);
            }
        }
        config.resolve_code_maps(base)?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_code_maps(&mut self, base: Option<&Path>) -> Result<()> {
        let delimiter = self.delimiter_byte()?;
        for binding in &mut self.dimensions {
            if let Some(rule) = &mut binding.transform {
                rule.load_code_map(base, delimiter)?;
            }
        }
        Ok(())
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        if self.delimiter.is_ascii() && self.delimiter != '"' && self.delimiter != '\n' {
            Ok(self.delimiter as u8)
        } else {
            Err(Error::Validation(format!("unsupported delimiter {:?}", self.delimiter)))
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.delimiter_byte()?;
        let mut columns = HashSet::new();
        let assigned = self
            .dimensions
            .iter()
            .map(DimensionBinding::column)
            .chain(self.weight_column.as_deref())
            .chain(self.period_column.as_deref());
        for column in assigned {
            if !columns.insert(column) {
                return Err(Error::Validation(format!("column `{column}` is assigned twice")));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::Validation(format!("invalid epsilon {eps}")));
            }
        }
        self.schema().map(|_| ())
    }

    pub fn schema(&self) -> Result<DimensionSchema> {
        DimensionSchema::new(
            self.dimensions
                .iter()
                .map(|b| Dimension {
                    name: b.name.clone(),
                    declared_cardinality: b.declared_cardinality,
                    transform: b.transform.clone(),
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub dropped_by_reason: BTreeMap<String, usize>,
}

impl IngestStats {
    fn drop_row(&mut self, reason: &str) {
        self.rows_dropped += 1;
        *self.dropped_by_reason.entry(reason.to_string()).or_default() += 1;
    }
}

/// Reads `config.input` into records of `schema`.
pub fn load_records(config: &IngestConfig, schema: &DimensionSchema) -> Result<(Vec<Record>, IngestStats)> {
    let file = File::open(&config.input).map_err(|e| Error::io(&config.input, e))?;
    read_records(file, config, schema)
}

/// [`load_records`] over any reader; `config.input` is ignored.
pub fn read_records<R: Read>(reader: R, config: &IngestConfig, schema: &DimensionSchema) -> Result<(Vec<Record>, IngestStats)> {
    config.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(config.delimiter_byte()?)
        .has_headers(true)
        .from_reader(reader);
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Validation(format!("input has no column `{name}`")))
    };

    let mut bound = Vec::with_capacity(schema.len());
    for dim in schema.dims() {
        let binding = config
            .dimensions
            .iter()
            .find(|b| b.name == dim.name)
            .ok_or_else(|| Error::Validation(format!("dimension `{}` has no column binding", dim.name)))?;
        let rule = dim.transform.clone().unwrap_or(TransformRule::Identity);
        bound.push((column(binding.column())?, rule));
    }
    let weight_col = config.weight_column.as_deref().map(column).transpose()?;
    let period_col = config.period_column.as_deref().map(column).transpose()?;

    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut row) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                stats.rows_read += 1;
                if config.strict {
                    return Err(e.into());
                }
                stats.drop_row("malformed row");
                continue;
            }
        }
        stats.rows_read += 1;
        match parse_row(&row, &bound, weight_col, period_col, config.missing) {
            Ok(record) => {
                stats.rows_kept += 1;
                records.push(record);
            }
            Err(reason) => {
                if config.strict {
                    return Err(Error::Validation(format!("row {}: {reason}", stats.rows_read)));
                }
                stats.drop_row(reason);
            }
        }
    }
    Ok((records, stats))
}

fn parse_row(
    row: &csv::StringRecord,
    bound: &[(usize, TransformRule)],
    weight_col: Option<usize>,
    period_col: Option<usize>,
    missing: MissingPolicy,
) -> std::result::Result<Record, &'static str> {
    let mut values = Vec::with_capacity(bound.len());
    for (col, rule) in bound {
        match rule.apply(row.get(*col).unwrap_or("")) {
            Transformed::Category(c) => values.push(c),
            Transformed::Missing => match missing {
                MissingPolicy::Drop => return Err("missing category"),
                MissingPolicy::ExplicitMissing => values.push(MISSING_CATEGORY.to_string()),
            },
            Transformed::Invalid(reason) => return Err(reason),
        }
    }
    let weight = match weight_col {
        None => 1.0,
        Some(c) => match row.get(c).unwrap_or("").trim() {
            "" => return Err("missing weight"),
            w => match w.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => x,
                Ok(_) => return Err("negative or non-finite weight"),
                Err(_) => return Err("non-numeric weight"),
            },
        },
    };
    let period = match period_col {
        None => None,
        Some(c) => match row.get(c).unwrap_or("").trim() {
            "" => return Err("missing period"),
            p => Some(p.to_string()),
        },
    };
    Ok(Record { values, weight, period })
}

/// Writes records in the format [`read_records`] accepts: one column per
/// dimension, then `weight`, then `period` when any record carries one.
pub fn write_records<W: Write>(writer: W, schema: &DimensionSchema, records: &[Record]) -> Result<()> {
    let with_period = records.iter().any(|r| r.period.is_some());
    let mut out = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = schema.names().collect();
    header.push("weight");
    if with_period {
        header.push("period");
    }
    out.write_record(&header)?;
    let mut line: Vec<String> = Vec::with_capacity(header.len());
    for r in records {
        if r.values.len() != schema.len() {
            return Err(Error::Schema("record arity does not match schema".into()));
        }
        line.clear();
        line.extend(r.values.iter().cloned());
        line.push(r.weight.to_string());
        if with_period {
            line.push(r.period.clone().unwrap_or_default());
        }
        out.write_record(&line)?;
    }
    out.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Config that re-reads a file produced by [`write_records`].
pub fn config_for_export(input: impl Into<PathBuf>, schema: &DimensionSchema, with_period: bool) -> IngestConfig {
    let mut config = IngestConfig::identity(input, schema);
    config.weight_column = Some("weight".into());
    if with_period {
        config.period_column = Some("period".into());
    }
    config
}
