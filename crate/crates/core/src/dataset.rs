//! Numeric microdata: ingestion, attribute domains, column statistics,
//! class derivation and train/test splitting.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Name of the optional pass-through identifier column.
pub const ID_COLUMN: &str = "id";

/// Label written by [`derive_class`] for values at or below the threshold.
pub const LABEL_LOW: &str = "low";
/// Label written by [`derive_class`] for values above the threshold.
pub const LABEL_HIGH: &str = "high";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Original,
    Microaggregated,
    Preprocessed,
    Masked,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Original => "original",
            Stage::Microaggregated => "microaggregated",
            Stage::Preprocessed => "preprocessed",
            Stage::Masked => "masked",
        };
        f.write_str(s)
    }
}

/// A string-valued column carried alongside the numeric attributes, untouched
/// by every transformation (class labels).
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub name: String,
    pub values: Vec<String>,
}

/// Ordered records over named numeric attributes, stored column-major.
///
/// Row `i` of any dataset derived from this one corresponds to row `i` here;
/// the optional id and label columns ride along verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attributes: Vec<String>,
    columns: Vec<Vec<f64>>,
    ids: Option<Vec<String>>,
    labels: Option<Labels>,
    stage: Stage,
}

impl Dataset {
    /// Builds a dataset from attribute names and one column per attribute.
    pub fn new(attributes: Vec<String>, columns: Vec<Vec<f64>>, stage: Stage) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("dataset needs at least one attribute".into()));
        }
        if attributes.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} attribute names for {} columns",
                attributes.len(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::InsufficientData("dataset has no records".into()));
        }
        for (name, col) in attributes.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Schema(format!(
                    "attribute '{name}' has {} values, expected {n}",
                    col.len()
                )));
            }
            if let Some(pos) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: pos + 1,
                    column: name.clone(),
                    value: col[pos].to_string(),
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in &attributes {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute '{name}'")));
            }
        }
        Ok(Self {
            attributes,
            columns,
            ids: None,
            labels: None,
            stage,
        })
    }

    /// Builds an original-stage dataset from row-major records.
    pub fn from_records(attributes: Vec<String>, records: &[Vec<f64>]) -> Result<Self> {
        let m = attributes.len();
        let mut columns = vec![Vec::with_capacity(records.len()); m];
        for (i, rec) in records.iter().enumerate() {
            if rec.len() != m {
                return Err(Error::Schema(format!(
                    "record {} has {} values, expected {m}",
                    i + 1,
                    rec.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(rec) {
                col.push(v);
            }
        }
        Self::new(attributes, columns, Stage::Original)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_records() {
            return Err(Error::Schema(format!(
                "{} ids for {} records",
                ids.len(),
                self.n_records()
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if labels.values.len() != self.n_records() {
            return Err(Error::Schema(format!(
                "{} labels for {} records",
                labels.values.len(),
                self.n_records()
            )));
        }
        if self.attributes.contains(&labels.name) {
            return Err(Error::Schema(format!(
                "label column '{}' clashes with a numeric attribute",
                labels.name
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Replaces the numeric matrix, keeping names, ids and labels. Used by
    /// every transformation so row alignment is preserved by construction.
    pub(crate) fn derive(&self, columns: Vec<Vec<f64>>, stage: Stage) -> Self {
        debug_assert_eq!(columns.len(), self.columns.len());
        debug_assert!(columns.iter().all(|c| c.len() == self.n_records()));
        Self {
            attributes: self.attributes.clone(),
            columns,
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            stage,
        }
    }

    pub fn n_records(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, a: usize) -> &[f64] {
        &self.columns[a]
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }

    pub fn record(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Rows `range` as a new dataset with the same stage.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n_records() {
            return Err(Error::InsufficientData(format!(
                "row range {}..{} is empty or out of bounds for {} records",
                range.start,
                range.end,
                self.n_records()
            )));
        }
        Ok(Self {
            attributes: self.attributes.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c[range.clone()].to_vec())
                .collect(),
            ids: self.ids.as_ref().map(|ids| ids[range.clone()].to_vec()),
            labels: self.labels.as_ref().map(|l| Labels {
                name: l.name.clone(),
                values: l.values[range.clone()].to_vec(),
            }),
            stage: self.stage,
        })
    }

    /// Writes the dataset as CSV: id column (if any), attributes, then the
    /// label column (if any). Numbers use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::with_capacity(self.n_attributes() + 2);
        if self.ids.is_some() {
            header.push(ID_COLUMN);
        }
        header.extend(self.attributes.iter().map(String::as_str));
        if let Some(l) = &self.labels {
            header.push(&l.name);
        }
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n_records() {
            row.clear();
            if let Some(ids) = &self.ids {
                row.push(ids[i].clone());
            }
            row.extend(self.columns.iter().map(|c| c[i].to_string()));
            if let Some(l) = &self.labels {
                row.push(l.values[i].clone());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Which columns [`load_csv`] reads.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Numeric attributes to keep, in this order. `None` keeps every column
    /// except the id and label columns.
    pub attributes: Option<Vec<String>>,
    /// String column read verbatim as class labels.
    pub label: Option<String>,
}

/// Loads a CSV with a header row. An `id` column, when present, is carried
/// through untouched.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

pub fn read_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };

    let id_pos = header.iter().position(|h| h == ID_COLUMN);
    let label_pos = options.label.as_deref().map(find).transpose()?;
    let selected: Vec<usize> = match &options.attributes {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|&i| Some(i) != id_pos && Some(i) != label_pos)
            .collect(),
    };
    if selected.is_empty() {
        return Err(Error::Schema("no numeric attributes selected".into()));
    }
    if let Some(lp) = label_pos {
        if selected.contains(&lp) {
            return Err(Error::Schema(format!(
                "column '{}' cannot be both a label and a numeric attribute",
                header[lp]
            )));
        }
    }

    let mut columns = vec![Vec::new(); selected.len()];
    let mut ids = id_pos.map(|_| Vec::new());
    let mut labels = label_pos.map(|_| Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (col, &pos) in columns.iter_mut().zip(&selected) {
            let raw = record.get(pos).unwrap_or("");
            let v = raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: header[pos].clone(),
                    value: raw.to_string(),
                })?;
            col.push(v);
        }
        if let (Some(ids), Some(pos)) = (ids.as_mut(), id_pos) {
            ids.push(record.get(pos).unwrap_or("").to_string());
        }
        if let (Some(labels), Some(pos)) = (labels.as_mut(), label_pos) {
            let raw = record.get(pos).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::Parse {
                    row,
                    column: header[pos].clone(),
                    value: raw.to_string(),
                });
            }
            labels.push(raw.to_string());
        }
    }

    let names = selected.iter().map(|&p| header[p].clone()).collect();
    let mut d = Dataset::new(names, columns, Stage::Original)?;
    if let Some(ids) = ids {
        d = d.with_ids(ids)?;
    }
    if let (Some(values), Some(pos)) = (labels, label_pos) {
        d = d.with_labels(Labels {
            name: header[pos].clone(),
            values,
        })?;
    }
    Ok(d)
}

/// Closed interval of admissible values for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDomain {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// Scale factor when the domain was derived from the data maximum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl AttributeDomain {
    pub fn explicit(name: impl Into<String>, lower: f64, upper: f64) -> Result<Self> {
        let name = name.into();
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::param(format!(
                "domain for '{name}' must satisfy lower <= upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            name,
            lower,
            upper,
            alpha: None,
        })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub(crate) fn check(&self, v: f64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                attribute: self.name.clone(),
                value: v,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

/// Domains `[0, alpha * max]` for every attribute of an original dataset.
///
/// Attributes are expected to be non-negative magnitudes; a negative value
/// is rejected since the zero lower bound would not contain it. An all-zero
/// column yields the degenerate domain `[0, 0]`.
pub fn compute_domains(d: &Dataset, alpha: f64) -> Result<Vec<AttributeDomain>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    if d.stage() != Stage::Original {
        return Err(Error::param(format!(
            "domains are derived from the original data, got a {} dataset",
            d.stage()
        )));
    }
    d.attributes()
        .iter()
        .zip(d.columns())
        .map(|(name, col)| {
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            if min < 0.0 {
                return Err(Error::param(format!(
                    "attribute '{name}' has negative value {min}; alpha-scaled domains \
                     need non-negative data (supply explicit domains instead)"
                )));
            }
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(AttributeDomain {
                name: name.clone(),
                lower: 0.0,
                upper: alpha * max,
                alpha: Some(alpha),
            })
        })
        .collect()
}

/// Reads explicit domains from a JSON object `{"attr": [lower, upper], ...}`.
/// Every attribute of the dataset must be covered.
pub fn load_domains(path: impl AsRef<Path>, attributes: &[String]) -> Result<Vec<AttributeDomain>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_domains(&text, attributes)
}

pub fn parse_domains(json: &str, attributes: &[String]) -> Result<Vec<AttributeDomain>> {
    let map: BTreeMap<String, [f64; 2]> = serde_json::from_str(json)?;
    attributes
        .iter()
        .map(|name| {
            let [lo, hi] = map
                .get(name)
                .ok_or_else(|| Error::Schema(format!("no domain given for attribute '{name}'")))?;
            AttributeDomain::explicit(name.clone(), *lo, *hi)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeStats {
    pub name: String,
    /// Sample variance, denominator `n - 1`.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub attributes: Vec<AttributeStats>,
}

impl ColumnStats {
    pub fn variances(&self) -> Vec<f64> {
        self.attributes.iter().map(|a| a.variance).collect()
    }
}

/// Per-attribute sample variance, min, max and mean. Meant for the original
/// dataset: the information-loss distance normalizes by these variances.
pub fn column_stats(d: &Dataset) -> Result<ColumnStats> {
    let n = d.n_records();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "sample variance needs at least 2 records, got {n}"
        )));
    }
    let attributes = d
        .attributes()
        .iter()
        .zip(d.columns())
        .map(|(name, col)| {
            let mean = numeric::mean(col);
            let sq: Vec<f64> = col.iter().map(|v| (v - mean) * (v - mean)).collect();
            AttributeStats {
                name: name.clone(),
                variance: numeric::sum(&sq) / (n - 1) as f64,
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
            }
        })
        .collect();
    Ok(ColumnStats { attributes })
}

/// Turns `attribute` into a two-valued label column named `label_name`:
/// [`LABEL_LOW`] where the value is `<= threshold`, [`LABEL_HIGH`] otherwise.
/// The source attribute leaves the numeric matrix.
pub fn derive_class(d: &Dataset, attribute: &str, threshold: f64, label_name: &str) -> Result<Dataset> {
    let a = d
        .attribute_index(attribute)
        .ok_or_else(|| Error::Schema(format!("attribute '{attribute}' not found")))?;
    if d.labels().is_some() {
        return Err(Error::Schema("dataset already carries a label column".into()));
    }
    if d.n_attributes() < 2 {
        return Err(Error::Schema(format!(
            "'{attribute}' is the only numeric attribute; nothing would remain after labelling"
        )));
    }
    let values = d
        .column(a)
        .iter()
        .map(|&v| if v <= threshold { LABEL_LOW } else { LABEL_HIGH }.to_string())
        .collect();
    let mut attributes = d.attributes().to_vec();
    let mut columns = d.columns().to_vec();
    attributes.remove(a);
    columns.remove(a);
    let mut out = Dataset::new(attributes, columns, d.stage())?;
    out.ids = d.ids.clone();
    out.with_labels(Labels {
        name: label_name.to_string(),
        values,
    })
}

/// Train rows are the first `floor(fraction * n)` rows of `masked`; test rows
/// are the remaining rows of `original`.
pub fn split_train_test(original: &Dataset, masked: &Dataset, fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    check_aligned(original, masked)?;
    let n = original.n_records();
    // Guard against products like 0.29 * 100 = 28.999999999999996.
    let cut = (fraction * n as f64 + 1e-9).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::InsufficientData(format!(
            "fraction {fraction} of {n} records leaves an empty train or test set"
        )));
    }
    Ok((masked.slice_rows(0..cut)?, original.slice_rows(cut..n)?))
}

/// Checks that two datasets describe the same rows over the same attributes.
pub fn check_aligned(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.n_records() != b.n_records() {
        return Err(Error::Alignment(format!(
            "{} records vs {} records",
            a.n_records(),
            b.n_records()
        )));
    }
    if a.attributes() != b.attributes() {
        return Err(Error::Alignment(format!(
            "attributes differ: {:?} vs {:?}",
            a.attributes(),
            b.attributes()
        )));
    }
    if let (Some(x), Some(y)) = (a.ids(), b.ids()) {
        if let Some(i) = x.iter().zip(y).position(|(p, q)| p != q) {
            return Err(Error::Alignment(format!(
                "row {} has id '{}' vs '{}'",
                i + 1,
                x[i],
                y[i]
            )));
        }
    }
    Ok(())
}
