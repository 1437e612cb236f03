use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use super::clean::is_missing_marker;
use super::schema::{ColumnKind, FeatureSchema};
use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

struct RawTable {
    records: Vec<csv::StringRecord>,
    has_label: bool,
}

fn read_raw(path: &Path, schema: &FeatureSchema, label_required: bool) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(file);
    let header = reader.headers()?.clone();
    let full: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    let without_label: Vec<&str> = schema.feature_columns().map(|c| c.name.as_str()).collect();
    let got: Vec<&str> = header.iter().collect();

    let has_label = if got == full {
        true
    } else if !label_required && got == without_label {
        false
    } else {
        return Err(Error::Schema(describe_mismatch(&full, &got)));
    };

    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }
    Ok(RawTable { records, has_label })
}

fn describe_mismatch(expected: &[&str], got: &[&str]) -> String {
    for (i, e) in expected.iter().enumerate() {
        match got.get(i) {
            None => return format!("missing column `{e}` at position {i}"),
            Some(g) if g != e => {
                if expected.contains(g) {
                    return format!("column `{g}` at position {i}, expected `{e}`");
                }
                return format!("unexpected column `{g}` at position {i}, expected `{e}`");
            }
            _ => {}
        }
    }
    match got.get(expected.len()) {
        Some(extra) => format!("extra column `{extra}`"),
        None => "header does not match schema".into(),
    }
}

/// Encodes the raw records. Missing markers become NaN; a row whose label
/// is missing has all its features set to NaN so [`super::clean`] drops it.
fn encode(raw: &RawTable, schema: &mut FeatureSchema) -> Result<(Matrix, Option<Vec<usize>>)> {
    // Derive dictionaries that the schema does not pin yet.
    for (j, col) in schema.columns.clone().iter().enumerate() {
        if col.kind == ColumnKind::Categorical && !schema.categories.contains_key(&col.name) {
            let values: BTreeSet<String> = raw
                .records
                .iter()
                .filter_map(|r| r.get(j))
                .map(str::trim)
                .filter(|v| !is_missing_marker(v))
                .map(str::to_owned)
                .collect();
            schema
                .categories
                .insert(col.name.clone(), values.into_iter().collect());
        }
    }
    if raw.has_label && schema.label_encoding.is_empty() {
        let label_idx = schema
            .columns
            .iter()
            .position(|c| c.kind == ColumnKind::Label)
            .expect("label column");
        let values: BTreeSet<String> = raw
            .records
            .iter()
            .filter_map(|r| r.get(label_idx))
            .map(str::trim)
            .filter(|v| !is_missing_marker(v))
            .map(|v| {
                schema
                    .label_aliases
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| v.to_owned())
            })
            .collect();
        schema.label_encoding = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
    }
    let lookups: BTreeMap<&str, BTreeMap<&str, usize>> = schema
        .categories
        .iter()
        .map(|(name, values)| {
            (
                name.as_str(),
                values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.as_str(), i))
                    .collect(),
            )
        })
        .collect();

    let d = schema.feature_count();
    let mut data = Vec::with_capacity(raw.records.len() * d);
    let mut labels = Vec::with_capacity(raw.records.len());
    let columns: Vec<_> = schema
        .columns
        .iter()
        .filter(|c| raw.has_label || c.kind != ColumnKind::Label)
        .collect();

    for (r, rec) in raw.records.iter().enumerate() {
        let row_no = r + 1;
        if rec.len() != columns.len() {
            return Err(Error::Schema(format!(
                "row {row_no} has {} fields, expected {}",
                rec.len(),
                columns.len()
            )));
        }
        let start = data.len();
        let mut label_missing = false;
        for (col, cell) in columns.iter().zip(rec.iter()) {
            let cell = cell.trim();
            match col.kind {
                ColumnKind::Numeric => {
                    if is_missing_marker(cell) {
                        data.push(f64::NAN);
                    } else {
                        let v: f64 = cell.parse().map_err(|_| Error::Parse {
                            row: row_no,
                            column: col.name.clone(),
                            value: cell.to_owned(),
                        })?;
                        data.push(v);
                    }
                }
                ColumnKind::Categorical => {
                    if is_missing_marker(cell) {
                        data.push(f64::NAN);
                    } else {
                        let id = lookups[col.name.as_str()].get(cell).ok_or_else(|| {
                            Error::Encoding(format!(
                                "row {row_no}: unseen category {cell:?} in column `{}`",
                                col.name
                            ))
                        })?;
                        data.push(*id as f64);
                    }
                }
                ColumnKind::Label => {
                    if is_missing_marker(cell) {
                        label_missing = true;
                        labels.push(0);
                    } else {
                        let id = schema.encode_label(cell).ok_or_else(|| {
                            Error::Encoding(format!("row {row_no}: unseen label {cell:?}"))
                        })?;
                        labels.push(id);
                    }
                }
            }
        }
        if label_missing {
            data[start..].iter_mut().for_each(|v| *v = f64::NAN);
        }
    }
    let features = Matrix::from_vec(raw.records.len(), d, data)?;
    Ok((features, raw.has_label.then_some(labels)))
}

/// Reads a labelled CSV whose header must equal the schema's column names
/// in order. Dictionaries not pinned by `schema` are derived from the file
/// and recorded in the returned dataset's schema. Row numbers in errors are
/// 1-based data rows (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = read_raw(path, schema, true)?;
    let mut schema = schema.clone();
    let (features, labels) = encode(&raw, &mut schema)?;
    Dataset::new(
        features,
        labels.expect("label required"),
        Arc::new(schema),
        path.display().to_string(),
    )
}

/// Like [`load_csv`] but the label column may be absent. The schema's
/// dictionaries must already be fitted.
pub fn load_features_csv(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
) -> Result<(Matrix, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let raw = read_raw(path, schema, false)?;
    let mut schema = schema.clone();
    if raw.has_label && schema.label_encoding.is_empty() {
        return Err(Error::Encoding(
            "schema has no fitted label encoding".into(),
        ));
    }
    encode(&raw, &mut schema)
}

/// Writes a dataset back in its schema's raw form (categories and labels decoded).
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let schema = d.schema();
    w.write_record(schema.columns.iter().map(|c| c.name.as_str()))?;
    for (i, row) in d.features().iter_rows().enumerate() {
        let mut feats = row.iter();
        let mut out = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            match col.kind {
                ColumnKind::Label => {
                    let l = d.labels()[i];
                    out.push(
                        schema
                            .decode_label(l)
                            .map(str::to_owned)
                            .unwrap_or_else(|| l.to_string()),
                    );
                }
                ColumnKind::Numeric => out.push(format_cell(*feats.next().expect("width"))),
                ColumnKind::Categorical => {
                    let v = *feats.next().expect("width");
                    let name = schema
                        .categories
                        .get(&col.name)
                        .and_then(|vals| vals.get(v as usize));
                    out.push(match name {
                        Some(n) if v.is_finite() => n.clone(),
                        _ => format_cell(v),
                    });
                }
            }
        }
        w.write_record(&out)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        // `Display` for f64 is shortest round-trip.
        v.to_string()
    }
}
