//! File formats: point CSVs and pair/graph JSON documents. Indices are 0-based.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{NeighborGraph, PairSet};
use crate::error::{Error, Result};

/// Points read from CSV, with the optional trailing `label` column split off.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    pub points: Array2<f64>,
    pub labels: Option<Vec<i64>>,
}

pub fn read_points_csv(path: impl AsRef<Path>) -> Result<LabeledPoints> {
    let file = std::fs::File::open(path)?;
    read_points(file)
}

/// Parses a header row followed by float columns; a final column named
/// `label` is read as integer class ids.
pub fn read_points<R: std::io::Read>(reader: R) -> Result<LabeledPoints> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let has_label = headers.iter().next_back().map(|h| h.trim() == "label").unwrap_or(false);
    let dim = headers.len() - usize::from(has_label);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        for k in 0..dim {
            let v: f64 = record[k].trim().parse().map_err(|_| Error::Config {
                pointer: format!("row {line}, column {k}"),
                reason: format!("`{}` is not a number", &record[k]),
            })?;
            values.push(v);
        }
        if has_label {
            let raw = record[dim].trim();
            let l: i64 = raw.parse().map_err(|_| Error::Config {
                pointer: format!("row {line}, column label"),
                reason: format!("`{raw}` is not an integer"),
            })?;
            labels.push(l);
        }
        rows += 1;
    }
    let points = Array2::from_shape_vec((rows, dim), values).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(LabeledPoints {
        points,
        labels: has_label.then_some(labels),
    })
}

pub fn write_points_csv(path: impl AsRef<Path>, points: &Array2<f64>, labels: Option<&[i64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..points.ncols()).map(|k| format!("x{k}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in points.rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Dense matrix as CSV with a `c0..cN` header.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: ndarray::ArrayView2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.ncols()).map(|k| format!("c{k}")))?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PairsDoc {
    pairs: Vec<[usize; 2]>,
    #[serde(default)]
    modality: Option<Vec<u8>>,
    #[serde(default)]
    n: Option<usize>,
}

/// `{"pairs": [[i, j], ...], "modality": [0|1, ...]}`. Pairs are symmetric.
/// The index count is `n` when given, else the modality length, else one
/// past the largest index.
pub fn parse_pairs_json(text: &str) -> Result<PairSet> {
    let doc: PairsDoc = serde_json::from_str(text)?;
    if let Some(m) = &doc.modality {
        if let Some(bad) = m.iter().find(|&&v| v > 1) {
            return Err(Error::Config {
                pointer: "/modality".into(),
                reason: format!("modality {bad} is not 0 or 1"),
            });
        }
    }
    let n = doc
        .n
        .or(doc.modality.as_ref().map(Vec::len))
        .unwrap_or_else(|| doc.pairs.iter().flatten().max().map_or(0, |m| m + 1));
    let pairs: Vec<(usize, usize)> = doc.pairs.iter().map(|p| (p[0], p[1])).collect();
    PairSet::from_pairs(n, &pairs, doc.modality)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphDoc {
    edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    directed: bool,
}

/// `{"edges": [[i, j, w], ...]}`; undirected unless `"directed": true`.
pub fn parse_graph_json(text: &str) -> Result<NeighborGraph> {
    let doc: GraphDoc = serde_json::from_str(text)?;
    let n = doc
        .n
        .unwrap_or_else(|| doc.edges.iter().map(|e| e.0.max(e.1)).max().map_or(0, |m| m + 1));
    if doc.directed {
        NeighborGraph::new(n, doc.edges, false)
    } else {
        NeighborGraph::undirected(n, &doc.edges)
    }
}

pub fn read_graph_json(path: impl AsRef<Path>) -> Result<NeighborGraph> {
    parse_graph_json(&std::fs::read_to_string(path)?)
}

pub fn read_pairs_json(path: impl AsRef<Path>) -> Result<PairSet> {
    parse_pairs_json(&std::fs::read_to_string(path)?)
}
