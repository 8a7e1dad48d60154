//! File formats: coordinate JSON, dense CSV, dataset CSV with optional
//! header and label column, and simulation plan JSON.
//!
//! Coordinate JSON carries the full square B and is validated symmetric on
//! read:
//!
//! ```json
//! {"partition": [2, 3], "a": [1.0, 2.0], "b": [[0.5, 0.2], [0.2, 0.3]]}
//! ```
//!
//! Dense matrices are CSV, one row per line, no header. Floats are written
//! with Rust's shortest round-trip formatting, so read-write cycles are
//! bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::estimate::Dataset;
use crate::partition::Partition;
use crate::sim::{MeanSpec, SimulationPlan};
use crate::ub::UbMatrix;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoordsFile {
    partition: Vec<usize>,
    a: Vec<f64>,
    b: Vec<Vec<f64>>,
}

/// Parses the coordinate JSON format, validating shape and exact symmetry
/// of B.
pub fn coords_from_json(text: &str) -> Result<UbMatrix> {
    let file: CoordsFile = serde_json::from_str(text)?;
    let partition = Partition::new(file.partition)?;
    let k = partition.block_count();
    if file.b.len() != k || file.b.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch {
            what: "coordinate matrix b",
            expected: k,
            actual: file.b.len(),
        });
    }
    let mut b = vec![0.0; k * k];
    for (i, row) in file.b.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            b[i * k + j] = v;
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            if b[i * k + j] != b[j * k + i] {
                return Err(Error::NotSymmetric {
                    max_asymmetry: (b[i * k + j] - b[j * k + i]).abs(),
                });
            }
        }
    }
    UbMatrix::new(file.a, b, partition)
}

/// Serializes coordinates to the JSON format (pretty, trailing newline).
pub fn coords_to_json(x: &UbMatrix) -> String {
    let k = x.block_count();
    let file = CoordsFile {
        partition: x.partition().sizes().to_vec(),
        a: x.a().to_vec(),
        b: (0..k)
            .map(|i| x.b()[i * k..(i + 1) * k].to_vec())
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("coords serialize");
    s.push('\n');
    s
}

pub fn read_coords(path: &Path) -> Result<UbMatrix> {
    coords_from_json(&fs::read_to_string(path)?)
}

/// Parses a dense CSV matrix; errors carry 1-based line and column.
pub fn dense_from_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (colno, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                column: colno + 1,
                message: format!("expected a number, got {:?}", field.trim()),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: row.len(),
                    message: format!(
                        "row has {} fields, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "empty matrix".into(),
        });
    }
    let r = rows.len();
    let c = rows[0].len();
    DenseMatrix::new(r, c, rows.into_iter().flatten().collect())
}

/// Writes a dense matrix as CSV with shortest round-trip floats.
pub fn dense_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn read_dense_csv(path: &Path) -> Result<DenseMatrix> {
    dense_from_csv(&fs::read_to_string(path)?)
}

/// Options for reading a dataset CSV.
#[derive(Debug, Clone, Default)]
pub struct DatasetOptions {
    /// First line holds column names.
    pub has_header: bool,
    /// Name of the column carrying group labels (requires a header).
    pub label_column: Option<String>,
}

/// Reads an observations CSV into a dataset. Group labels may come from a
/// designated column or from `extra_labels` (one label per row, e.g. read
/// from a separate single-column file); strings are mapped to group ids in
/// order of first appearance.
pub fn dataset_from_csv(
    text: &str,
    partition: &Partition,
    options: &DatasetOptions,
    extra_labels: Option<&[String]>,
) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let label_idx = if let Some(name) = &options.label_column {
        if !options.has_header {
            return Err(Error::InvalidGrouping(
                "a label column needs a header row to name it".into(),
            ));
        }
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            column: 1,
            message: "missing header row".into(),
        })?;
        let idx = header
            .split(',')
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                Error::InvalidGrouping(format!("no column named {name:?} in the header"))
            })?;
        Some(idx)
    } else {
        if options.has_header {
            lines.next();
        }
        None
    };

    let p = partition.total();
    let mut data = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in lines {
        let mut values = Vec::with_capacity(p);
        for (colno, field) in line.split(',').enumerate() {
            if Some(colno) == label_idx {
                labels.push(field.trim().to_string());
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                column: colno + 1,
                message: format!("expected a number, got {:?}", field.trim()),
            })?;
            values.push(v);
        }
        if values.len() != p {
            return Err(Error::Parse {
                line: lineno + 1,
                column: values.len(),
                message: format!("row has {} data fields, expected {p}", values.len()),
            });
        }
        data.extend_from_slice(&values);
        n += 1;
    }
    let dataset = Dataset::new(data, partition.clone())?;
    let label_strings: Option<Vec<String>> = if !labels.is_empty() {
        Some(labels)
    } else {
        extra_labels.map(|l| l.to_vec())
    };
    match label_strings {
        Some(strings) => {
            if strings.len() != n {
                return Err(Error::InvalidGrouping(format!(
                    "{} labels for {n} rows",
                    strings.len()
                )));
            }
            dataset.with_groups(label_ids(&strings))
        }
        None => Ok(dataset),
    }
}

/// Maps label strings to consecutive ids by first appearance.
pub fn label_ids(labels: &[String]) -> Vec<usize> {
    let mut seen: Vec<&str> = Vec::new();
    labels
        .iter()
        .map(|l| {
            if let Some(idx) = seen.iter().position(|s| *s == l.as_str()) {
                idx
            } else {
                seen.push(l);
                seen.len() - 1
            }
        })
        .collect()
}

/// One label per nonempty line.
pub fn labels_from_str(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn default_law_replicates() -> usize {
    200_000
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    partition: Vec<usize>,
    sigma_a: Vec<f64>,
    sigma_b: Vec<Vec<f64>>,
    #[serde(default)]
    mu: Option<Vec<f64>>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    group_means: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    group_sizes: Option<Vec<usize>>,
    #[serde(default)]
    mu0: Option<Vec<f64>>,
    alpha: f64,
    replicates: usize,
    #[serde(default = "default_law_replicates")]
    law_replicates: usize,
    seed: u64,
}

/// Parses a simulation plan. One-sample plans give `mu` and `n`; M-sample
/// plans give `group_means` and `group_sizes`.
pub fn plan_from_json(text: &str) -> Result<SimulationPlan> {
    let file: PlanFile = serde_json::from_str(text)?;
    let partition = Partition::new(file.partition)?;
    let k = partition.block_count();
    let mut b = vec![0.0; k * k];
    if file.sigma_b.len() != k || file.sigma_b.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch {
            what: "plan sigma_b",
            expected: k,
            actual: file.sigma_b.len(),
        });
    }
    for (i, row) in file.sigma_b.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            b[i * k + j] = v;
        }
    }
    let sigma = UbMatrix::new(file.sigma_a, b, partition)?;
    let mean = match (file.mu, file.n, file.group_means, file.group_sizes) {
        (Some(mu), Some(n), None, None) => MeanSpec::OneSample { mu, n },
        (None, None, Some(means), Some(sizes)) => MeanSpec::MultiSample { means, sizes },
        _ => {
            return Err(Error::InvalidParameter(
                "plan needs either (mu, n) or (group_means, group_sizes)".into(),
            ))
        }
    };
    Ok(SimulationPlan {
        sigma,
        mean,
        mu0: file.mu0,
        alpha: file.alpha,
        replicates: file.replicates,
        law_replicates: file.law_replicates,
        seed: file.seed,
    })
}

pub fn read_plan(path: &Path) -> Result<SimulationPlan> {
    plan_from_json(&fs::read_to_string(path)?)
}

/// Writes through a temporary file in the same directory plus an atomic
/// rename, so failures never leave partial output behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {path:?}")))?;
    let tmp_name = format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id());
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    fs::write(&tmp_path, contents)?;
    match fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp_path);
            Err(e.into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coords_round_trip() {
        let text = r#"{"partition":[2,3],"a":[1.0,2.0],"b":[[0.5,0.2],[0.2,0.3]]}"#;
        let x = coords_from_json(text).unwrap();
        assert_eq!(x.a(), &[1.0, 2.0]);
        assert_eq!(x.b(), &[0.5, 0.2, 0.2, 0.3]);
        let again = coords_from_json(&coords_to_json(&x)).unwrap();
        assert_eq!(again, x);
    }

    #[test]
    fn coords_reject_asymmetry_and_unknown_fields() {
        let bad = r#"{"partition":[2,2],"a":[1.0,1.0],"b":[[0.1,0.2],[0.3,0.1]]}"#;
        assert!(matches!(
            coords_from_json(bad),
            Err(Error::NotSymmetric { .. })
        ));
        let unknown = r#"{"partition":[2,2],"a":[1.0,1.0],"b":[[0,0],[0,0]],"x":1}"#;
        assert!(coords_from_json(unknown).is_err());
    }

    #[test]
    fn dense_csv_round_trip_is_bit_exact() {
        let m = DenseMatrix::new(2, 3, vec![0.1, -2.5, 3.0000000000000004, 1e-17, 5.0, -0.0])
            .unwrap();
        let text = dense_to_csv(&m);
        let back = dense_from_csv(&text).unwrap();
        assert_eq!(back.entries(), m.entries());
    }

    #[test]
    fn dense_csv_errors_carry_position() {
        let err = dense_from_csv("1.0,2.0\n3.0,oops\n").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!((line, column), (2, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn dataset_with_label_column() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let text = "g,x1,x2,x3,x4\na,1,2,3,4\nb,5,6,7,8\na,9,10,11,12\n";
        let opts = DatasetOptions {
            has_header: true,
            label_column: Some("g".into()),
        };
        let d = dataset_from_csv(text, &p, &opts, None).unwrap();
        assert_eq!(d.n(), 3);
        let groups = d.groups().unwrap();
        assert_eq!(groups.labels(), &[0, 1, 0]);
        assert_eq!(groups.sizes(), &[2, 1]);
        assert_eq!(d.row(1), &[5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn dataset_with_separate_labels() {
        let p = Partition::new(vec![2, 2]).unwrap();
        let text = "1,2,3,4\n5,6,7,8\n";
        let labels = labels_from_str("ctrl\ntreat\n");
        let d = dataset_from_csv(text, &p, &DatasetOptions::default(), Some(&labels)).unwrap();
        assert_eq!(d.groups().unwrap().labels(), &[0, 1]);
    }

    #[test]
    fn plan_parses_one_sample() {
        let text = r#"{
            "partition": [3, 4],
            "sigma_a": [1.0, 1.5],
            "sigma_b": [[0.3, 0.1], [0.1, 0.2]],
            "mu": [0,0,0,0,0,0,0],
            "n": 50,
            "alpha": 0.05,
            "replicates": 100,
            "seed": 7
        }"#;
        let plan = plan_from_json(text).unwrap();
        assert_eq!(plan.law_replicates, 200_000);
        match plan.mean {
            MeanSpec::OneSample { ref mu, n } => {
                assert_eq!(mu.len(), 7);
                assert_eq!(n, 50);
            }
            _ => panic!("expected one-sample plan"),
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, "first").unwrap();
        write_atomic(&path, "second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        // No temp files left behind.
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
