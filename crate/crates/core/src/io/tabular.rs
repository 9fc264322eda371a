//! Complex data in CSV files, one `re,im` column pair per dimension.

use std::path::Path;

use crate::covariance::Dataset;
use crate::error::{LaeError, Result};
use crate::io::write_atomic;
use crate::linalg::{c, CMatrix};

/// Shortest format that round-trips every `f64`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn expected_header(prefix: char, n: usize) -> impl Iterator<Item = String> {
    (0..n).flat_map(move |k| [format!("{prefix}{k}_re"), format!("{prefix}{k}_im")])
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| LaeError::Parse(format!("row {row}, column {col}: cannot parse {cell:?} as a number")))
}

/// Read rows of paired columns into a matrix with one column per CSV row.
fn read_pairs(path: &Path, prefixes: &[char]) -> Result<(Vec<char>, usize, Vec<CMatrix>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| LaeError::Format(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| LaeError::Format(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let malformed = |why: String| LaeError::Format(format!("{}: malformed header: {why}", path.display()));
    if header.len() % 2 != 0 || header.is_empty() {
        return Err(malformed(format!("{} columns, expected re/im pairs", header.len())));
    }
    let mut groups = Vec::new();
    let mut widths = Vec::new();
    let mut rest = &header[..];
    for &prefix in prefixes {
        let n = rest
            .iter()
            .take_while(|h| h.starts_with(prefix))
            .count()
            / 2;
        if n == 0 {
            continue;
        }
        for (k, (got, want)) in rest.iter().zip(expected_header(prefix, n)).enumerate() {
            if *got != want {
                return Err(malformed(format!("column {} is {got:?}, expected {want:?}", k + 1)));
            }
        }
        groups.push(prefix);
        widths.push(n);
        rest = &rest[2 * n..];
    }
    if !rest.is_empty() || groups.is_empty() {
        return Err(malformed(format!("unexpected columns starting at {:?}", rest.first())));
    }
    let width = widths[0];
    if widths.iter().any(|&w| w != width) {
        return Err(malformed("input and target dimensions differ".into()));
    }

    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(|e| LaeError::Format(format!("{}: row {row}: {e}", path.display())))?;
        if record.len() != header.len() {
            return Err(LaeError::Format(format!(
                "{}: row {row} has {} fields, expected {}",
                path.display(),
                record.len(),
                header.len()
            )));
        }
        samples.push(
            record
                .iter()
                .enumerate()
                .map(|(col, cell)| parse_cell(cell, row, col + 1))
                .collect::<Result<_>>()?,
        );
    }
    let mats = (0..groups.len())
        .map(|g| {
            CMatrix::from_fn(width, samples.len(), |i, t| {
                let base = g * 2 * width + 2 * i;
                c(samples[t][base], samples[t][base + 1])
            })
        })
        .collect();
    Ok((groups, width, mats))
}

/// Load a dataset; `y<k>` columns, when present, make it hetero-associative.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let (groups, _, mut mats) = read_pairs(path, &['x', 'y'])?;
    if groups.first() != Some(&'x') {
        return Err(LaeError::Format(format!("{}: malformed header: no x columns", path.display())));
    }
    let targets = (mats.len() == 2).then(|| mats.pop().expect("two groups"));
    let inputs = mats.pop().expect("input group");
    Dataset::from_columns(inputs, targets)
}

fn render(groups: &[(char, &CMatrix)]) -> String {
    let mut out = String::new();
    let header: Vec<String> = groups
        .iter()
        .flat_map(|(p, m)| expected_header(*p, m.nrows()))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    let cols = groups.first().map_or(0, |(_, m)| m.ncols());
    for t in 0..cols {
        let cells: Vec<String> = groups
            .iter()
            .flat_map(|(_, m)| m.column(t).iter().flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)]).collect::<Vec<_>>())
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv(path: &Path, d: &Dataset) -> Result<()> {
    let mut groups = vec![('x', d.inputs())];
    if !d.is_auto_associative() {
        groups.push(('y', d.targets()));
    }
    write_atomic(path, render(&groups).as_bytes())
}

/// Load a matrix stored one row per line under a `c<k>_re,c<k>_im` header.
pub fn load_matrix_csv(path: &Path) -> Result<CMatrix> {
    let (_, _, mut mats) = read_pairs(path, &['c'])?;
    Ok(mats.pop().expect("one group").transpose())
}

pub fn save_matrix_csv(path: &Path, m: &CMatrix) -> Result<()> {
    write_atomic(path, render(&[('c', &m.transpose())]).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_pairs() {
        let h: Vec<String> = expected_header('x', 2).collect();
        assert_eq!(h, ["x0_re", "x0_im", "x1_re", "x1_im"]);
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
