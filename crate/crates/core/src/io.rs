//! Line-oriented JSON corpus format.
//!
//! Line 1 is the header `{"K", "dims", "ground_metric", "type_names",
//! "version": 1}`. Every further line is one graph
//! `{"n", "types", "edges", "features", "meta"}`. A feature vector is either a
//! dense array or `{"nz": [[index, value], ...]}` with zeros elsewhere.
//! Writing is canonical: edges sorted, meta keys sorted, sparse encoding
//! chosen by a fixed density rule.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical_edges, validate, GroundMetric, HeteroGraph, TypeTable};

pub const FORMAT_VERSION: u32 = 1;

/// Vectors at least this long with at most a quarter non-zeros are written
/// sparsely.
const SPARSE_MIN_DIM: usize = 64;

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(rename = "K")]
    k: usize,
    dims: Vec<usize>,
    ground_metric: Vec<GroundMetric>,
    type_names: Vec<String>,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FeatureRepr {
    Dense(Vec<f64>),
    Sparse { nz: Vec<(usize, f64)> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    n: usize,
    types: Vec<usize>,
    edges: Vec<(usize, usize)>,
    features: Option<Vec<FeatureRepr>>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

fn encode_feature(f: &[f64]) -> FeatureRepr {
    let nnz = f.iter().filter(|&&x| x != 0.0).count();
    if f.len() >= SPARSE_MIN_DIM && nnz * 4 <= f.len() {
        FeatureRepr::Sparse {
            nz: f
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| (i, x))
                .collect(),
        }
    } else {
        FeatureRepr::Dense(f.to_vec())
    }
}

fn decode_feature(repr: FeatureRepr, dim: usize) -> std::result::Result<Vec<f64>, String> {
    match repr {
        FeatureRepr::Dense(v) => Ok(v),
        FeatureRepr::Sparse { nz } => {
            let mut v = vec![0.0; dim];
            for (i, x) in nz {
                if i >= dim {
                    return Err(format!("sparse index {i} out of range for dimension {dim}"));
                }
                v[i] = x;
            }
            Ok(v)
        }
    }
}

/// Serialises a corpus; the result ends with a newline.
pub fn corpus_to_string(table: &TypeTable, graphs: &[HeteroGraph]) -> Result<String> {
    let header = Header {
        k: table.k(),
        dims: table.dims().to_vec(),
        ground_metric: table.metrics().to_vec(),
        type_names: table.names().to_vec(),
        version: FORMAT_VERSION,
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for g in graphs {
        let record = Record {
            n: g.n,
            types: g.types.clone(),
            edges: canonical_edges(g.edges.clone()),
            features: g
                .features
                .as_ref()
                .map(|fs| fs.iter().map(|f| encode_feature(f)).collect()),
            meta: g.meta.clone(),
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses and validates a corpus. Errors name the offending record
/// (0-based graph index).
pub fn corpus_from_str(text: &str) -> Result<(TypeTable, Vec<HeteroGraph>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Header("empty corpus".into()))?;
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| Error::Header(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Header(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.k != header.dims.len() {
        return Err(Error::Header(format!(
            "K = {} but {} dims given",
            header.k,
            header.dims.len()
        )));
    }
    let table = TypeTable::new(header.dims, header.ground_metric, header.type_names)
        .map_err(|e| Error::Header(e.to_string()))?;

    let mut graphs = Vec::new();
    for (index, line) in lines.enumerate() {
        let rec_err = |message: String| Error::Record { index, message };
        let record: Record = serde_json::from_str(line).map_err(|e| rec_err(e.to_string()))?;
        if record.types.len() != record.n {
            return Err(rec_err(format!(
                "n = {} but {} types",
                record.n,
                record.types.len()
            )));
        }
        if let Some(&t) = record.types.iter().find(|&&t| t >= table.k()) {
            return Err(rec_err(format!(
                "type {t} out of range for K = {}",
                table.k()
            )));
        }
        let features = match record.features {
            None => None,
            Some(reprs) => {
                if reprs.len() != record.n {
                    return Err(rec_err(format!(
                        "{} feature vectors for {} nodes",
                        reprs.len(),
                        record.n
                    )));
                }
                Some(
                    reprs
                        .into_iter()
                        .zip(&record.types)
                        .map(|(r, &t)| decode_feature(r, table.dim(t)))
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(rec_err)?,
                )
            }
        };
        let mut g = HeteroGraph::new(record.types, record.edges, features);
        g.meta = record.meta;
        let report = validate(&g, &table);
        if !report.is_valid() {
            return Err(rec_err(report.messages().join("; ")));
        }
        graphs.push(g);
    }
    Ok((table, graphs))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<(TypeTable, Vec<HeteroGraph>)> {
    corpus_from_str(&fs::read_to_string(path)?)
}

pub fn write_corpus(
    path: impl AsRef<Path>,
    table: &TypeTable,
    graphs: &[HeteroGraph],
) -> Result<()> {
    fs::write(path, corpus_to_string(table, graphs)?)?;
    Ok(())
}
