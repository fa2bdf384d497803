//! On-disk datasets.
//!
//! A manifest is a text file with one graph per line:
//! `edges.tsv<TAB>features.csv`. Paths are relative to the manifest's
//! directory. Blank lines and lines starting with `#` are skipped. Edge lists
//! hold one `u<TAB>v` pair per line with 0-based node indices; the node count
//! comes from the number of feature rows.

use crate::graph::{FeatureMatrix, Graph, GraphError, MaskMatrix};
use ndarray::Array2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: GraphError },
    #[error("{0}: no graphs")]
    NoGraphs(PathBuf),
    #[error("{path}: {message}")]
    Inconsistent { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// One graph with its complete feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    pub graph: Graph,
    pub features: FeatureMatrix,
}

impl GraphRecord {
    pub fn new(graph: Graph, features: FeatureMatrix) -> Result<Self, GraphError> {
        if graph.n_nodes() != features.n_rows() {
            return Err(GraphError::DimensionMismatch { expected: graph.n_nodes(), got: features.n_rows() });
        }
        Ok(Self { graph, features })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<GraphRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn d_features(&self) -> usize {
        self.graphs.first().map_or(0, |g| g.features.d_features())
    }
}

fn read_text(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_edge_list(text: &str, path: &Path) -> Result<Vec<(usize, usize)>, DataError> {
    content_lines(text)
        .map(|(line, l)| {
            let parse_err = |message: String| DataError::Parse { path: path.to_path_buf(), line, message };
            let mut parts = l.split('\t');
            let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(format!("expected `u<TAB>v`, got `{l}`")));
            };
            let node = |s: &str| s.trim().parse::<usize>().map_err(|e| parse_err(format!("bad node index `{s}`: {e}")));
            Ok((node(u)?, node(v)?))
        })
        .collect()
}

fn read_matrix(path: &Path) -> Result<Array2<f64>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(|e| DataError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} columns, got {}", cols.unwrap_or(0), record.len()),
            });
        }
        for field in record.iter() {
            let v = field.trim().parse::<f64>().map_err(|e| DataError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bad number `{field}`: {e}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(DataError::Inconsistent { path: path.to_path_buf(), message: "empty matrix".into() });
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("rows * cols values"))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix, DataError> {
    FeatureMatrix::new(read_matrix(path)?).map_err(|source| DataError::Graph { path: path.to_path_buf(), source })
}

pub fn read_mask(path: &Path) -> Result<MaskMatrix, DataError> {
    MaskMatrix::from_f64(&read_matrix(path)?).map_err(|source| DataError::Graph { path: path.to_path_buf(), source })
}

fn write_rows<W: Write>(w: W, rows: impl Iterator<Item = Vec<String>>) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_to_data(path: &Path) -> impl FnOnce(csv::Error) -> DataError + '_ {
    move |e| DataError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

/// Writes values with the shortest representation that parses back exactly.
pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_rows(std::io::BufWriter::new(file), m.rows().into_iter().map(|r| r.iter().map(|v| v.to_string()).collect()))
        .map_err(csv_to_data(path))
}

pub fn write_mask(path: &Path, mask: &MaskMatrix) -> Result<(), DataError> {
    write_matrix(path, &mask.to_f64())
}

pub fn write_edge_list(path: &Path, graph: &Graph) -> Result<(), DataError> {
    let mut out = String::new();
    for (u, v) in graph.edges() {
        out.push_str(&format!("{u}\t{v}\n"));
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn load_graph(edges: &Path, features: &Path) -> Result<GraphRecord, DataError> {
    let feats = read_features(features)?;
    let edge_list = parse_edge_list(&read_text(edges)?, edges)?;
    let graph = Graph::new(feats.n_rows(), edge_list)
        .map_err(|source| DataError::Graph { path: edges.to_path_buf(), source })?;
    Ok(GraphRecord { graph, features: feats })
}

/// Loads every graph listed in a manifest and checks that all feature
/// matrices share one column count.
pub fn load_manifest(path: &Path) -> Result<Dataset, DataError> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut graphs = Vec::new();
    for (line, l) in content_lines(&text) {
        let mut parts = l.split('\t');
        let (Some(e), Some(f), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected `edges<TAB>features`, got `{l}`"),
            });
        };
        let record = load_graph(&base.join(e.trim()), &base.join(f.trim()))?;
        if let Some(first) = graphs.first() {
            let first: &GraphRecord = first;
            if first.features.d_features() != record.features.d_features() {
                return Err(DataError::Inconsistent {
                    path: path.to_path_buf(),
                    message: format!(
                        "line {line}: {} feature columns, earlier graphs have {}",
                        record.features.d_features(),
                        first.features.d_features()
                    ),
                });
            }
        }
        graphs.push(record);
    }
    if graphs.is_empty() {
        return Err(DataError::NoGraphs(path.to_path_buf()));
    }
    Ok(Dataset { graphs })
}

/// Writes `graph_NNNN.edges.tsv` / `graph_NNNN.features.csv` pairs and a
/// `manifest.tsv` into `dir`, returning the manifest path.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<PathBuf, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = String::new();
    for (i, g) in data.graphs.iter().enumerate() {
        let e = format!("graph_{i:04}.edges.tsv");
        let f = format!("graph_{i:04}.features.csv");
        write_edge_list(&dir.join(&e), &g.graph)?;
        write_matrix(&dir.join(&f), g.features.values())?;
        manifest.push_str(&format!("{e}\t{f}\n"));
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).map_err(io_err(&path))?;
    Ok(path)
}
