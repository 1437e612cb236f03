use std::collections::HashSet;

use super::Dataset;

/// Empty cell, `NaN` or `null`, case-insensitive.
pub fn is_missing_marker(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("null")
}

/// Drops rows holding a missing value and collapses exact duplicates
/// (features and label) onto their first occurrence. Survivor order is kept.
pub fn clean(d: &Dataset) -> Dataset {
    let mut seen: HashSet<(Vec<u64>, usize)> = HashSet::with_capacity(d.len());
    let mut keep = Vec::with_capacity(d.len());
    for (i, row) in d.features().iter_rows().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            continue;
        }
        // +0.0 folds -0.0 onto 0.0 so they compare equal bitwise.
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert((key, d.labels()[i])) {
            keep.push(i);
        }
    }
    if keep.is_empty() && !d.is_empty() {
        log::warn!("clean dropped every row of {}", d.provenance());
    }
    d.subset(&keep)
}
