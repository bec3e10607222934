//! Plain-text dataset files.
//!
//! * edges: one `src<TAB>dst` pair per line, 0-indexed
//! * features: CSV, row `i` is node `i`, no header
//! * labels: one integer per line
//! * splits: one of `train`, `val`, `test`, `none` per line

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Dataset, Graph, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

impl DatasetPaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        DatasetPaths {
            edges: dir.join("edges.tsv"),
            features: dir.join("features.csv"),
            labels: dir.join("labels.txt"),
            splits: dir.join("splits.txt"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in lines(&text) {
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, no, format!("bad number {cell:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    no,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), cols), flat)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = String::with_capacity(m.len() * 8);
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (no, line) in lines(&text) {
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, no, "expected `src<TAB>dst`"));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| parse_err(path, no, format!("bad node id {s:?}: {e}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= n || v >= n {
            return Err(parse_err(
                path,
                no,
                format!("node id out of range for {n} nodes"),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub(crate) fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = read(path)?;
    lines(&text)
        .map(|(no, l)| {
            l.parse::<i64>()
                .map_err(|e| parse_err(path, no, format!("bad label {l:?}: {e}")))
        })
        .collect()
}

fn read_splits(path: &Path) -> Result<Vec<Split>> {
    let text = read(path)?;
    lines(&text)
        .map(|(no, l)| l.parse::<Split>().map_err(|e| parse_err(path, no, e)))
        .collect()
}

/// Loads a dataset. Duplicate edges collapse, input self-loops are dropped
/// and the class count is `max(label) + 1`.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let features = read_matrix_csv(&paths.features)?;
    let n = features.nrows();
    let edges = read_edges(&paths.edges, n)?;
    let raw_labels = read_labels(&paths.labels)?;
    let splits = read_splits(&paths.splits)?;
    if let Some((i, y)) = raw_labels.iter().enumerate().find(|(_, &y)| y < 0) {
        return Err(Error::Validation(format!(
            "label {y} of node {i} is out of range"
        )));
    }
    let labels: Vec<usize> = raw_labels.iter().map(|&y| y as usize).collect();
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let graph = Graph::from_edges(n, &edges, features)?;
    Dataset::new(graph, labels, splits, class_count)
}

/// Writes a dataset in the format [`load_dataset`] reads.
pub fn save_dataset(dataset: &Dataset, paths: &DatasetPaths) -> Result<()> {
    let write = |path: &Path, body: String| -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    };
    let edges: String = dataset
        .graph
        .edges()
        .iter()
        .map(|(u, v)| format!("{u}\t{v}\n"))
        .collect();
    write(&paths.edges, edges)?;
    write_matrix_csv(&paths.features, dataset.graph.features())?;
    write(
        &paths.labels,
        dataset.labels().iter().map(|y| format!("{y}\n")).collect(),
    )?;
    write(
        &paths.splits,
        dataset
            .splits()
            .iter()
            .map(|s| format!("{}\n", s.as_str()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_files(
        dir: &Path,
        edges: &str,
        features: &str,
        labels: &str,
        splits: &str,
    ) -> DatasetPaths {
        let p = DatasetPaths::in_dir(dir);
        fs::write(&p.edges, edges).unwrap();
        fs::write(&p.features, features).unwrap();
        fs::write(&p.labels, labels).unwrap();
        fs::write(&p.splits, splits).unwrap();
        p
    }

    #[test]
    fn empty_edge_file_gives_zero_adjacency() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_files(
            dir.path(),
            "",
            "1,2\n3,4\n5,6\n",
            "0\n1\n0\n",
            "train\nval\ntest\n",
        );
        let d = load_dataset(&p).unwrap();
        assert_eq!(d.node_count(), 3);
        assert!(d.graph.adjacency().iter().all(|&a| a == 0.0));
        assert_eq!(d.class_count(), 2);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_files(
            dir.path(),
            "1\t2\n2\t1\n0\t0\n",
            "0\n0\n0\n",
            "0\n0\n1\n",
            "train\nnone\ntest\n",
        );
        let d = load_dataset(&p).unwrap();
        // Dedup oracle: sort each pair, then sort and dedup the list.
        let mut pairs = vec![(1, 2), (2, 1)]
            .into_iter()
            .map(|(a, b): (usize, usize)| (a.min(b), a.max(b)))
            .collect::<Vec<_>>();
        pairs.sort();
        pairs.dedup();
        assert_eq!(d.graph.edges(), pairs);
        assert_eq!(d.graph.adjacency()[[1, 2]], 1.0);
        assert_eq!(d.graph.adjacency()[[0, 0]], 0.0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_files(
            dir.path(),
            "0\t1\n1 2\n",
            "0\n0\n0\n",
            "0\n0\n0\n",
            "train\ntest\ntest\n",
        );
        match load_dataset(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_label_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_files(dir.path(), "0\t1\n", "0\n0\n", "0\n-1\n", "train\ntest\n");
        assert!(matches!(load_dataset(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = DatasetPaths::in_dir(dir.path());
        assert!(matches!(load_dataset(&p), Err(Error::Io { .. })));
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let g = Graph::from_edges(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            ndarray::array![[0.5, -1.25], [1e-3, 2.0], [3.0, 0.1], [0.0, 7.0]],
        )
        .unwrap();
        let d = Dataset::new(
            g,
            vec![0, 1, 1, 2],
            vec![Split::Train, Split::Val, Split::Test, Split::None],
            3,
        )
        .unwrap();
        let p = DatasetPaths::in_dir(dir.path());
        save_dataset(&d, &p).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), d);
    }
}
