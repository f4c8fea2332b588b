//! Text and binary file formats for graphs, node data, and checkpoints.

use std::{
    fs,
    io::{BufWriter, Write},
    path::{Path, PathBuf},
};

use spangraph_core::{Dataset, GnnModel, Graph, LayerType, Matrix, Split};

use crate::error::{Error, Result};

const FEATURE_MAGIC: &[u8; 4] = b"SPGF";
const CHECKPOINT_MAGIC: &[u8; 4] = b"SPGW";

/// Locations of the four files that make up a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

impl DatasetPaths {
    /// Standard file names inside `dir`; a binary `features.bin` is used when
    /// no `features.csv` exists.
    pub fn in_dir(dir: &Path) -> Self {
        let csv = dir.join("features.csv");
        let features = if csv.exists() { csv } else { dir.join("features.bin") };
        Self { edges: dir.join("edges.txt"), features, labels: dir.join("labels.txt"), splits: dir.join("splits.txt") }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Content lines with their 1-based line numbers, skipping blanks and `#`
/// comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parsed edge list before node-count resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub declared_nodes: Option<usize>,
    pub pairs: Vec<(u64, u64)>,
    lines: Vec<usize>,
}

pub fn parse_edge_list(path: &Path, text: &str) -> Result<EdgeList> {
    let mut out = EdgeList { declared_nodes: None, pairs: Vec::new(), lines: Vec::new() };
    for (k, (line, content)) in content_lines(text).enumerate() {
        let mut tokens = content.split_whitespace();
        let first = tokens.next().unwrap_or_default();
        if k == 0 && first == "nodes" {
            let n = tokens
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| parse_err(path, line, "expected \"nodes N\""))?;
            if tokens.next().is_some() {
                return Err(parse_err(path, line, "trailing tokens after node count"));
            }
            out.declared_nodes = Some(n);
            continue;
        }
        let parse = |t: Option<&str>| t.and_then(|t| t.parse::<u64>().ok());
        match (parse(Some(first)), parse(tokens.next()), tokens.next()) {
            (Some(u), Some(v), None) => {
                out.pairs.push((u, v));
                out.lines.push(line);
            }
            _ => return Err(parse_err(path, line, format!("expected \"u v\", got {content:?}"))),
        }
    }
    Ok(out)
}

impl EdgeList {
    /// Builds the graph. The node count is the declared one, else `hint`,
    /// else one past the largest id.
    pub fn into_graph(self, path: &Path, hint: Option<usize>) -> Result<Graph> {
        let max_id = self.pairs.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0) as usize;
        let n = self.declared_nodes.or(hint).unwrap_or(max_id);
        if let Some(i) = self.pairs.iter().position(|&(u, v)| u.max(v) as usize >= n) {
            let (u, v) = self.pairs[i];
            return Err(parse_err(path, self.lines[i], format!("node id {} out of range for {n} nodes", u.max(v))));
        }
        Ok(Graph::from_edges(n, self.pairs)?)
    }
}

pub fn read_edge_list(path: &Path, hint: Option<usize>) -> Result<Graph> {
    parse_edge_list(path, &read_text(path)?)?.into_graph(path, hint)
}

pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("nodes {}\n", g.num_nodes()));
    for &(u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    fs::write(path, out).map_err(Error::io(path))
}

/// Reads features as CSV, or as the `SPGF` binary layout when the file starts
/// with that magic.
pub fn read_features(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    if bytes.starts_with(FEATURE_MAGIC) {
        return decode_binary_features(path, &bytes);
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::Format { path: path.into(), msg: "not UTF-8 text".into() })?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, content) in content_lines(&text) {
        let start = data.len();
        for field in content.split(',') {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad number {:?}", field.trim())))?;
            data.push(x);
        }
        let width = data.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => return Err(parse_err(path, line, format!("expected {c} columns, got {width}"))),
            _ => {}
        }
        rows += 1;
    }
    Ok(Matrix::from_vec(rows, cols.unwrap_or(0), data)?)
}

fn decode_binary_features(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let bad = |msg: &str| Error::Format { path: path.into(), msg: msg.into() };
    let header = bytes.get(4..20).ok_or_else(|| bad("truncated header"))?;
    let rows = u64::from_le_bytes(header[..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
    let body = &bytes[20..];
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(4)).ok_or_else(|| bad("dimensions overflow"))?;
    if body.len() != expected {
        return Err(bad(&format!("expected {expected} payload bytes for {rows}x{cols}, found {}", body.len())));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn write_features_csv(path: &Path, x: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).map_err(Error::io(path))?);
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(",")).map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Writes the `SPGF` layout; values are narrowed to `f32`.
pub fn write_features_binary(path: &Path, x: &Matrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(20 + 4 * x.as_slice().len());
    bytes.extend_from_slice(FEATURE_MAGIC);
    bytes.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(x.cols() as u64).to_le_bytes());
    for &v in x.as_slice() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn read_labels(path: &Path) -> Result<Vec<Option<u32>>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line, content)| match content.parse::<i64>() {
            Ok(-1) => Ok(None),
            Ok(c) if (0..=u32::MAX as i64).contains(&c) => Ok(Some(c as u32)),
            _ => Err(parse_err(path, line, format!("bad label {content:?}"))),
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[Option<u32>]) -> Result<()> {
    let out: String = labels.iter().map(|l| format!("{}\n", l.map_or(-1, |c| c as i64))).collect();
    fs::write(path, out).map_err(Error::io(path))
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
        Split::None => "none",
    }
}

pub fn read_splits(path: &Path) -> Result<Vec<Split>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|(line, content)| match content {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(parse_err(path, line, format!("bad split {other:?}"))),
        })
        .collect()
}

pub fn write_splits(path: &Path, splits: &[Split]) -> Result<()> {
    let out: String = splits.iter().map(|&s| format!("{}\n", split_name(s))).collect();
    fs::write(path, out).map_err(Error::io(path))
}

/// Loads and validates a dataset. Without a `nodes N` header the node count
/// comes from the feature rows.
pub fn load_graph(paths: &DatasetPaths) -> Result<Dataset> {
    let features = read_features(&paths.features)?;
    let graph = read_edge_list(&paths.edges, Some(features.rows()))?;
    let labels = read_labels(&paths.labels)?;
    let splits = read_splits(&paths.splits)?;
    Ok(Dataset::new(graph, features, labels, splits)?)
}

/// Writes a dataset with the standard file names under `dir`.
pub fn write_dataset(dir: &Path, data: &Dataset, binary_features: bool) -> Result<DatasetPaths> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let paths = DatasetPaths {
        edges: dir.join("edges.txt"),
        features: dir.join(if binary_features { "features.bin" } else { "features.csv" }),
        labels: dir.join("labels.txt"),
        splits: dir.join("splits.txt"),
    };
    write_edge_list(&paths.edges, &data.graph)?;
    if binary_features {
        write_features_binary(&paths.features, &data.features)?;
    } else {
        write_features_csv(&paths.features, &data.features)?;
    }
    write_labels(&paths.labels, &data.labels)?;
    write_splits(&paths.splits, &data.splits)?;
    Ok(paths)
}

/// Checkpoint layout: `SPGW`, u64 layer type (0 gcn, 1 sage-mean), u64 layer
/// count, then per layer u64 rows, u64 cols and row-major f64 values, all
/// little-endian.
pub fn write_checkpoint(path: &Path, model: &GnnModel) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    let code: u64 = match model.layer_type() {
        LayerType::Gcn => 0,
        LayerType::SageMean => 1,
    };
    bytes.extend_from_slice(&code.to_le_bytes());
    bytes.extend_from_slice(&(model.num_layers() as u64).to_le_bytes());
    for w in model.weights() {
        bytes.extend_from_slice(&(w.rows() as u64).to_le_bytes());
        bytes.extend_from_slice(&(w.cols() as u64).to_le_bytes());
        for &v in w.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn read_checkpoint(path: &Path) -> Result<GnnModel> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    let bad = |msg: &str| Error::Format { path: path.into(), msg: msg.into() };
    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        return Err(bad("missing SPGW magic"));
    }
    let mut pos = 4;
    let mut next = || -> Result<u64> {
        let chunk = bytes.get(pos..pos + 8).ok_or_else(|| bad("truncated checkpoint"))?;
        pos += 8;
        Ok(u64::from_le_bytes(chunk.try_into().unwrap()))
    };
    let layer_type = match next()? {
        0 => LayerType::Gcn,
        1 => LayerType::SageMean,
        other => return Err(bad(&format!("unknown layer type code {other}"))),
    };
    let layers = next()?;
    let mut weights = Vec::new();
    for _ in 0..layers {
        let (rows, cols) = (next()? as usize, next()? as usize);
        let data = (0..rows * cols).map(|_| next().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
        weights.push(Matrix::from_vec(rows, cols, data)?);
    }
    if next().is_ok() {
        return Err(bad("trailing bytes after last layer"));
    }
    Ok(GnnModel::new(layer_type, weights)?)
}
