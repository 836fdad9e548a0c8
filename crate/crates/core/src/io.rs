//! On-disk dataset directories and text converters.
//!
//! Layout of a dataset directory (all numbers little-endian):
//!
//! | file              | contents                                   |
//! |-------------------|--------------------------------------------|
//! | `meta.json`       | `num_nodes, num_features, num_classes, task, format_version` |
//! | `features.f32`    | `num_nodes * num_features` f32, row-major  |
//! | `row_offsets.u64` | `num_nodes + 1` u64                        |
//! | `col_indices.u32` | `row_offsets[num_nodes]` u32               |
//! | `labels.u32`      | `num_nodes` u32                            |
//! | `train.u32`, `val.u32`, `test.u32` | node indices, u32         |
//!
//! The adjacency files may be absent in a condensed artifact, which then uses
//! identity structure.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledNodes, Task};
use crate::error::{CgcError, Result};
use crate::graph::SparseAdjacency;
use crate::matrix::DenseMatrix;

pub const FORMAT_VERSION: u32 = 1;

pub const META_FILE: &str = "meta.json";
pub const FEATURES_FILE: &str = "features.f32";
pub const ROW_OFFSETS_FILE: &str = "row_offsets.u64";
pub const COL_INDICES_FILE: &str = "col_indices.u32";
pub const LABELS_FILE: &str = "labels.u32";
pub const TRAIN_FILE: &str = "train.u32";
pub const VAL_FILE: &str = "val.u32";
pub const TEST_FILE: &str = "test.u32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub task: Task,
    pub format_version: u32,
}

/// Raw contents of a dataset directory before dataset-level validation.
#[derive(Debug, Clone)]
pub struct RawDirectory {
    pub meta: Meta,
    pub features: DenseMatrix,
    pub adjacency: Option<SparseAdjacency>,
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CgcError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CgcError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CgcError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CgcError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CgcError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(bytes).map_err(|e| CgcError::io(path, e))?;
    w.flush().map_err(|e| CgcError::io(path, e))
}

fn check_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value)
        .map_err(|_| CgcError::InvalidArgument(format!("{what} {value} does not fit in u32")))
}

fn write_u32s(path: &Path, values: &[usize], what: &str) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&check_u32(v, what)?.to_le_bytes());
    }
    write_bytes(path, &bytes)
}

fn write_u64s(path: &Path, values: &[usize]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for &v in values {
        bytes.extend_from_slice(&(v as u64).to_le_bytes());
    }
    write_bytes(path, &bytes)
}

fn write_f32s(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_bytes(path, &bytes)
}

fn read_sized(path: &Path, width: usize, expected: Option<usize>) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| CgcError::io(path, e))?;
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    match expected {
        Some(count) if bytes.len() != count * width => Err(CgcError::SizeMismatch {
            file,
            expected: (count * width) as u64,
            actual: bytes.len() as u64,
        }),
        None if bytes.len() % width != 0 => Err(CgcError::SizeMismatch {
            file,
            expected: (bytes.len() / width * width) as u64,
            actual: bytes.len() as u64,
        }),
        _ => Ok(bytes),
    }
}

fn read_u32s(path: &Path, expected: Option<usize>) -> Result<Vec<usize>> {
    Ok(read_sized(path, 4, expected)?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect())
}

fn read_u64s(path: &Path, expected: usize) -> Result<Vec<usize>> {
    read_sized(path, 8, Some(expected))?
        .chunks_exact(8)
        .map(|c| {
            let v = u64::from_le_bytes(c.try_into().unwrap());
            usize::try_from(v)
                .map_err(|_| CgcError::Structure(format!("row offset {v} exceeds address space")))
        })
        .collect()
}

fn read_f32s(path: &Path, expected: usize) -> Result<Vec<f64>> {
    Ok(read_sized(path, 4, Some(expected))?
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect())
}

/// Writes the generic directory layout. Adjacency is optional.
pub fn write_directory(
    dir: &Path,
    meta: &Meta,
    features: &DenseMatrix,
    adjacency: Option<&SparseAdjacency>,
    labels: &[usize],
    masks: [&[usize]; 3],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CgcError::io(dir, e))?;
    write_json(&dir.join(META_FILE), meta)?;
    write_f32s(&dir.join(FEATURES_FILE), features.as_slice())?;
    if let Some(adj) = adjacency {
        if let Some(values) = adj.values() {
            if values.iter().any(|&w| w != 1.0) {
                return Err(CgcError::InvalidArgument(
                    "the directory format stores unweighted adjacency only".into(),
                ));
            }
        }
        write_u64s(&dir.join(ROW_OFFSETS_FILE), adj.row_offsets())?;
        write_u32s(&dir.join(COL_INDICES_FILE), adj.col_indices(), "column index")?;
    } else {
        for f in [ROW_OFFSETS_FILE, COL_INDICES_FILE] {
            let p = dir.join(f);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| CgcError::io(&p, e))?;
            }
        }
    }
    write_u32s(&dir.join(LABELS_FILE), labels, "label")?;
    for (name, mask) in [TRAIN_FILE, VAL_FILE, TEST_FILE].into_iter().zip(masks) {
        write_u32s(&dir.join(name), mask, "mask index")?;
    }
    Ok(())
}

/// Reads the generic layout, checking file sizes against `meta.json`.
pub fn read_directory(dir: &Path) -> Result<RawDirectory> {
    let meta: Meta = read_json(&dir.join(META_FILE))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(CgcError::VersionMismatch {
            found: meta.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let n = meta.num_nodes;
    let feats = read_f32s(&dir.join(FEATURES_FILE), n * meta.num_features)?;
    let features = DenseMatrix::from_vec(n, meta.num_features, feats)?;
    let offsets_path = dir.join(ROW_OFFSETS_FILE);
    let adjacency = if offsets_path.exists() {
        let offsets = read_u64s(&offsets_path, n + 1)?;
        let nnz = *offsets.last().unwrap_or(&0);
        let cols = read_u32s(&dir.join(COL_INDICES_FILE), Some(nnz))?;
        Some(SparseAdjacency::from_csr(n, offsets, cols, None)?)
    } else {
        None
    };
    let labels = read_u32s(&dir.join(LABELS_FILE), Some(n))?;
    let train = read_u32s(&dir.join(TRAIN_FILE), None)?;
    let val = read_u32s(&dir.join(VAL_FILE), None)?;
    let test = read_u32s(&dir.join(TEST_FILE), None)?;
    Ok(RawDirectory {
        meta,
        features,
        adjacency,
        labels,
        train,
        val,
        test,
    })
}

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    let meta = Meta {
        num_nodes: ds.num_nodes(),
        num_features: ds.num_features(),
        num_classes: ds.num_classes(),
        task: ds.task,
        format_version: FORMAT_VERSION,
    };
    write_directory(
        dir,
        &meta,
        &ds.features,
        Some(&ds.adjacency),
        ds.labels.labels(),
        [&ds.train, &ds.val, &ds.test],
    )
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let raw = read_directory(dir)?;
    let adjacency = raw.adjacency.ok_or_else(|| {
        CgcError::Structure(format!(
            "{} has no adjacency files",
            dir.display()
        ))
    })?;
    let labels = LabeledNodes::new(raw.labels, raw.meta.num_classes)?;
    Dataset::new(
        adjacency,
        raw.features,
        labels,
        raw.train,
        raw.val,
        raw.test,
        raw.meta.task,
    )
}

/// Text inputs for [`convert_edgelist`].
pub struct TextSources {
    /// Lines `u v`; blank lines and `#` comments are skipped.
    pub edges: Box<dyn BufRead>,
    /// One row per node, comma- or whitespace-separated.
    pub features: Box<dyn BufRead>,
    /// One integer label per line.
    pub labels: Box<dyn BufRead>,
    pub train: Box<dyn BufRead>,
    pub val: Box<dyn BufRead>,
    pub test: Box<dyn BufRead>,
}

impl TextSources {
    pub fn from_strs(
        edges: &str,
        features: &str,
        labels: &str,
        train: &str,
        val: &str,
        test: &str,
    ) -> Self {
        let own = |s: &str| -> Box<dyn BufRead> { Box::new(std::io::Cursor::new(s.to_owned())) };
        Self {
            edges: own(edges),
            features: own(features),
            labels: own(labels),
            train: own(train),
            val: own(val),
            test: own(test),
        }
    }

    pub fn from_paths(
        edges: &Path,
        features: &Path,
        labels: &Path,
        train: &Path,
        val: &Path,
        test: &Path,
    ) -> Result<Self> {
        let open = |p: &Path| -> Result<Box<dyn BufRead>> {
            let f = fs::File::open(p).map_err(|e| CgcError::io(p, e))?;
            Ok(Box::new(std::io::BufReader::new(f)))
        };
        Ok(Self {
            edges: open(edges)?,
            features: open(features)?,
            labels: open(labels)?,
            train: open(train)?,
            val: open(val)?,
            test: open(test)?,
        })
    }
}

fn content_lines(
    reader: Box<dyn BufRead>,
    source: &'static str,
) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(move |(no, line)| {
        match line {
            Err(e) => Some(Err(CgcError::io(PathBuf::from(source), e))),
            Ok(l) => {
                let t = l.trim();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((no + 1, t.to_owned())))
                }
            }
        }
    })
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

fn parse_index(tok: &str, source: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|e| CgcError::Parse {
        location: format!("{source} line {line}"),
        message: format!("{tok:?} is not a node index ({e})"),
    })
}

fn parse_indices(reader: Box<dyn BufRead>, source: &'static str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in content_lines(reader, source) {
        let (no, line) = item?;
        for tok in tokens(&line) {
            out.push(parse_index(tok, source, no)?);
        }
    }
    Ok(out)
}

/// Builds a dataset from text edge lists and tables. Edges are symmetrized
/// and deduplicated; self-loops are dropped. The node count is the number of
/// feature rows; the class count is `max(label) + 1`.
pub fn convert_edgelist(src: TextSources, task: Task) -> Result<Dataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for item in content_lines(src.features, "features") {
        let (no, line) = item?;
        let row = tokens(&line)
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CgcError::Parse {
                        location: format!("features line {no}"),
                        message: format!("{t:?} is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CgcError::Parse {
                    location: format!("features line {no}"),
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let features = DenseMatrix::from_rows(&rows)?;

    let labels = parse_indices(src.labels, "labels")?;
    if labels.len() != n {
        return Err(CgcError::DimensionMismatch {
            context: "labels vs feature rows",
            expected: n,
            actual: labels.len(),
        });
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);

    let mut edges = Vec::new();
    let mut self_loops = 0usize;
    for item in content_lines(src.edges, "edges") {
        let (no, line) = item?;
        let mut it = tokens(&line);
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(CgcError::Parse {
                location: format!("edges line {no}"),
                message: "expected two node indices".into(),
            });
        };
        let (u, v) = (parse_index(a, "edges", no)?, parse_index(b, "edges", no)?);
        for x in [u, v] {
            if x >= n {
                return Err(CgcError::IndexOutOfRange {
                    index: x,
                    num_nodes: n,
                    context: format!("edges line {no}"),
                });
            }
        }
        if u == v {
            self_loops += 1;
        } else {
            edges.push((u, v));
        }
    }
    if self_loops > 0 {
        log::info!("dropped {self_loops} self-loop lines");
    }
    let adjacency = SparseAdjacency::from_undirected_edges(n, edges)?;
    Dataset::new(
        adjacency,
        features,
        LabeledNodes::new(labels, num_classes)?,
        parse_indices(src.train, "train")?,
        parse_indices(src.val, "val")?,
        parse_indices(src.test, "test")?,
        task,
    )
}

/// One `u v` line per undirected edge, `u < v`, in canonical order.
pub fn export_edgelist(adj: &SparseAdjacency) -> String {
    let mut out = String::new();
    for (u, v) in adj.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}
