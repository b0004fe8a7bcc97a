//! Sparse text dataset format.
//!
//! Header line: `num_samples num_features num_labels`. One line per sample:
//! comma-separated label ids, a space, then space-separated zero-based
//! `index:value` feature pairs. An empty label set leaves the label field
//! empty, so the line starts with the separating space. Features not listed
//! are 0.
//!
//! ```text
//! 2 3 4
//! 0,2 1:0.5
//!  0:1.0 2:2.0
//! ```
//!
//! [`save_sparse`] writes the canonical form: label ids ascending, feature
//! pairs ascending by index with exact zeros omitted, values in shortest
//! round-trip decimal. `save(load(f))` reproduces a canonical `f` byte for
//! byte, and load/save never changes a value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use tailgame_core::data::MultiLabelDataset;

use crate::error::{io_error, CliError, Result};

fn malformed(line_no: usize, what: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("line {line_no}: {what}"))
}

/// Parses the sparse text format. `provenance` labels the dataset's origin
/// in reports, usually the file path.
pub fn parse_sparse(text: &str, provenance: &str) -> Result<MultiLabelDataset> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed(1, "missing header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|tok| tok.parse::<usize>().map_err(|_| malformed(1, format!("bad header field {tok:?}"))))
        .collect::<Result<_>>()?;
    let [num_samples, num_features, num_labels] = dims[..] else {
        return Err(malformed(1, format!("header needs 3 fields, got {}", dims.len())));
    };
    if num_features == 0 || num_labels == 0 {
        return Err(malformed(1, "num_features and num_labels must be >= 1"));
    }

    let mut features = Vec::with_capacity(num_samples);
    let mut label_sets = Vec::with_capacity(num_samples);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if features.len() == num_samples {
            if line.trim().is_empty() {
                continue;
            }
            return Err(malformed(line_no, format!("more than {num_samples} data lines")));
        }
        let (label_part, feature_part) = match line.split_once(' ') {
            Some((l, f)) => (l, f),
            None => (line, ""),
        };

        let mut labels = Vec::new();
        if !label_part.is_empty() {
            for tok in label_part.split(',') {
                let l: usize = tok
                    .parse()
                    .map_err(|_| malformed(line_no, format!("bad label id {tok:?}")))?;
                if l >= num_labels {
                    return Err(malformed(line_no, format!("label id {l} >= {num_labels}")));
                }
                labels.push(l);
            }
        }

        let mut row = vec![0.0; num_features];
        let mut seen = vec![false; num_features];
        for tok in feature_part.split_whitespace() {
            let (i_str, v_str) = tok
                .split_once(':')
                .ok_or_else(|| malformed(line_no, format!("bad feature pair {tok:?}")))?;
            let i: usize = i_str
                .parse()
                .map_err(|_| malformed(line_no, format!("bad feature index {i_str:?}")))?;
            if i >= num_features {
                return Err(malformed(line_no, format!("feature index {i} >= {num_features}")));
            }
            if seen[i] {
                return Err(malformed(line_no, format!("duplicate feature index {i}")));
            }
            let v: f64 = v_str
                .parse()
                .map_err(|_| malformed(line_no, format!("bad feature value {v_str:?}")))?;
            if !v.is_finite() {
                return Err(malformed(line_no, format!("non-finite feature value {v_str:?}")));
            }
            seen[i] = true;
            row[i] = v;
        }
        features.push(row);
        label_sets.push(labels);
    }
    if features.len() != num_samples {
        return Err(CliError::Input(format!(
            "{} data lines for {num_samples} declared samples",
            features.len()
        )));
    }

    MultiLabelDataset::new(features, label_sets, num_labels, num_features, provenance.into())
        .map_err(CliError::from)
}

pub fn load_sparse(path: &Path) -> Result<MultiLabelDataset> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_sparse(&text, &path.display().to_string())
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Renders the canonical sparse text form.
pub fn format_sparse(dataset: &MultiLabelDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        dataset.num_samples(),
        dataset.feature_dim(),
        dataset.num_labels()
    );
    for m in 0..dataset.num_samples() {
        let mut first = true;
        for &l in dataset.labels_of(m) {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{l}");
            first = false;
        }
        for (i, &v) in dataset.features()[m].iter().enumerate() {
            if v != 0.0 {
                // {:?} keeps the .0 suffix on integral values ("1.0", "2.0")
                // and stays shortest round-trip decimal.
                let _ = write!(out, " {i}:{v:?}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_sparse(dataset: &MultiLabelDataset, path: &Path) -> Result<()> {
    fs::write(path, format_sparse(dataset)).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC_EXAMPLE: &str = "2 3 4\n0,2 1:0.5\n 0:1.0 2:2.0\n";

    #[test]
    fn parses_the_format_example() {
        let ds = parse_sparse(SPEC_EXAMPLE, "test").unwrap();
        assert_eq!(ds.num_samples(), 2);
        assert_eq!(ds.feature_dim(), 3);
        assert_eq!(ds.num_labels(), 4);
        assert_eq!(ds.labels_of(0), &[0, 2]);
        assert_eq!(ds.features()[0], vec![0.0, 0.5, 0.0]);
        assert_eq!(ds.labels_of(1), &[] as &[usize]);
        assert_eq!(ds.features()[1], vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let ds = parse_sparse(SPEC_EXAMPLE, "test").unwrap();
        assert_eq!(format_sparse(&ds), SPEC_EXAMPLE);
    }

    #[test]
    fn round_trip_preserves_values_exactly() {
        let values = [0.1 + 0.2, 1.0 / 3.0, -0.0625, 2e-9, 12345.6789];
        let features: Vec<Vec<f64>> = values.iter().map(|&v| vec![v, 0.0]).collect();
        let labels = vec![vec![0], vec![1], vec![], vec![0, 1], vec![1]];
        let ds = MultiLabelDataset::new(features.clone(), labels, 2, 2, "test".into()).unwrap();
        let back = parse_sparse(&format_sparse(&ds), "test").unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.label_sets(), ds.label_sets());
        let twice = format_sparse(&back);
        assert_eq!(twice, format_sparse(&ds));
    }

    #[test]
    fn label_out_of_range_names_the_line() {
        let err = parse_sparse("2 3 4\n0 0:1.0\n5 0:1.0\n", "test").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("label id 5"), "{msg}");
    }

    #[test]
    fn malformed_lines_name_the_line() {
        for (text, line, needle) in [
            ("", 1, "missing header"),
            ("2 3", 1, "3 fields"),
            ("x 3 4", 1, "bad header field"),
            ("1 3 4\n0 1:zzz", 2, "bad feature value"),
            ("1 3 4\n0 9:1.0", 2, "feature index 9"),
            ("1 3 4\n0 1:1.0 1:2.0", 2, "duplicate feature index"),
            ("1 3 4\na 1:1.0", 2, "bad label id"),
            ("1 3 4\n0 1.0", 2, "bad feature pair"),
        ] {
            let err = parse_sparse(text, "test").unwrap_err().to_string();
            assert!(err.contains(&format!("line {line}")), "{text:?} -> {err}");
            assert!(err.contains(needle), "{text:?} -> {err}");
        }
    }

    #[test]
    fn sample_count_mismatch_is_an_error() {
        assert!(parse_sparse("3 3 4\n0 0:1.0\n", "test").is_err());
        assert!(parse_sparse("1 3 4\n0 0:1.0\n1 0:1.0\n", "test").is_err());
    }
}
