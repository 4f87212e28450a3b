//! `UAIE` embedding container and its label sidecar.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "UAIE"
//! 4       4           u32 version (= 1)
//! 8       4           u32 N (rows)
//! 12      4           u32 dim
//! 16      4·N·dim     f32 values, row-major
//! ```
//! All integers and floats are little-endian. Values are widened to `f64` on
//! load and narrowed (round to nearest) on save.
//!
//! The sidecar `<stem>.labels.tsv` has a header row `utterance_id`, `speaker`,
//! then one column per nuisance factor. A header cell may carry the class
//! count as `name:count`. Integer label cells are used as class indices;
//! if a column holds any other text, its distinct values are sorted and
//! numbered from 0.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use uai_core::data::{EmbeddingDataset, Factor};
use uai_core::Matrix;

use crate::error::{Error, Result};
use crate::fsutil::{read, read_text, write_atomic};

pub const UAIE_MAGIC: &[u8; 4] = b"UAIE";
pub const UAIE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_uaie(m: &Matrix) -> Result<Vec<u8>> {
    let (rows, dim) = m.shape();
    if u32::try_from(rows).is_err() || u32::try_from(dim).is_err() {
        return Err(Error::DimensionOverflow {
            path: PathBuf::new(),
            rows: rows as u64,
            dim: dim as u64,
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rows * dim);
    out.extend_from_slice(UAIE_MAGIC);
    out.extend_from_slice(&UAIE_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses a container; `path` only labels errors.
pub fn decode_uaie(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != UAIE_MAGIC {
            return Err(bad_magic(&bytes[..4], path));
        }
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..4] != UAIE_MAGIC {
        return Err(bad_magic(&bytes[..4], path));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != UAIE_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    let (rows, dim) = (u64::from(word(8)), u64::from(word(12)));
    let payload = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| usize::try_from(n).is_ok())
        .ok_or_else(|| Error::DimensionOverflow {
            path: path.into(),
            rows,
            dim,
        })?;
    let expected = HEADER_LEN as u64 + payload;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::TrailingBytes {
            path: path.into(),
            trailing: actual - expected,
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Ok(Matrix::from_vec(rows as usize, dim as usize, data)?)
}

fn bad_magic(found: &[u8], path: &Path) -> Error {
    Error::BadMagic {
        path: path.into(),
        expected: String::from_utf8_lossy(UAIE_MAGIC).into_owned(),
        found: String::from_utf8_lossy(found).into_owned(),
    }
}

pub fn save_embeddings(m: &Matrix, path: &Path) -> Result<()> {
    let bytes = encode_uaie(m).map_err(|e| match e {
        Error::DimensionOverflow { rows, dim, .. } => Error::DimensionOverflow {
            path: path.into(),
            rows,
            dim,
        },
        other => other,
    })?;
    write_atomic(path, &bytes)
}

pub fn load_embeddings(path: &Path) -> Result<Matrix> {
    decode_uaie(&read(path)?, path)
}

/// `x.uaie` -> `x.labels.tsv`.
pub fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("labels.tsv")
}

pub fn encode_labels(ds: &EmbeddingDataset) -> String {
    let mut out = format!("utterance_id\tspeaker:{}", ds.speakers.n_classes);
    for (name, f) in &ds.nuisance {
        out.push_str(&format!("\t{name}:{}", f.n_classes));
    }
    out.push('\n');
    for i in 0..ds.len() {
        out.push_str(&ds.utterance_ids[i]);
        out.push_str(&format!("\t{}", ds.speakers.labels[i]));
        for f in ds.nuisance.values() {
            out.push_str(&format!("\t{}", f.labels[i]));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub utterance_ids: Vec<String>,
    pub speakers: Factor,
    pub nuisance: BTreeMap<String, Factor>,
}

pub fn decode_labels(text: &str, path: &Path) -> Result<LabelTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "missing header row"))?;
    let columns: Vec<&str> = header.split('\t').collect();
    if columns.len() < 2 || columns[0] != "utterance_id" || column_name(columns[1]) != "speaker" {
        return Err(Error::parse(path, 1, "header must start with utterance_id<TAB>speaker"));
    }
    let mut ids = Vec::new();
    let mut cells: Vec<Vec<(usize, String)>> = vec![Vec::new(); columns.len() - 1];
    let mut seen = BTreeSet::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected {} columns, found {}", columns.len(), fields.len()),
            ));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::parse(path, idx + 1, format!("duplicate utterance id {:?}", fields[0])));
        }
        ids.push(fields[0].to_string());
        for (c, f) in fields[1..].iter().enumerate() {
            cells[c].push((idx + 1, f.to_string()));
        }
    }
    let mut factors = Vec::new();
    for (c, column) in columns[1..].iter().enumerate() {
        factors.push((column_name(column).to_string(), to_factor(column, &cells[c], path)?));
    }
    let mut iter = factors.into_iter();
    let (_, speakers) = iter.next().expect("speaker column");
    let mut nuisance = BTreeMap::new();
    for (name, f) in iter {
        if nuisance.insert(name.clone(), f).is_some() || name == "speaker" {
            return Err(Error::parse(path, 1, format!("duplicate factor column {name:?}")));
        }
    }
    Ok(LabelTable {
        utterance_ids: ids,
        speakers,
        nuisance,
    })
}

fn column_name(cell: &str) -> &str {
    cell.split_once(':').map_or(cell, |(n, _)| n)
}

fn to_factor(column: &str, cells: &[(usize, String)], path: &Path) -> Result<Factor> {
    let declared = match column.split_once(':') {
        Some((_, count)) => Some(
            count
                .parse::<usize>()
                .map_err(|_| Error::parse(path, 1, format!("bad class count in {column:?}")))?,
        ),
        None => None,
    };
    let numeric: Option<Vec<usize>> = cells.iter().map(|(_, c)| c.parse().ok()).collect();
    let labels = match numeric {
        Some(v) => v,
        None => {
            let names: BTreeSet<&str> = cells.iter().map(|(_, c)| c.as_str()).collect();
            let index: BTreeMap<&str, usize> = names.into_iter().enumerate().map(|(i, n)| (n, i)).collect();
            cells.iter().map(|(_, c)| index[c.as_str()]).collect()
        }
    };
    let used = labels.iter().map(|l| l + 1).max().unwrap_or(0);
    let n_classes = declared.unwrap_or(used);
    if let Some(pos) = labels.iter().position(|&l| l >= n_classes) {
        return Err(Error::parse(
            path,
            cells[pos].0,
            format!("label {} not below the declared {n_classes} classes of {column:?}", labels[pos]),
        ));
    }
    Ok(Factor::new(labels, n_classes)?)
}

/// Writes `path` and its label sidecar.
pub fn save_dataset(ds: &EmbeddingDataset, path: &Path) -> Result<()> {
    save_embeddings(&ds.embeddings, path)?;
    write_atomic(&labels_path(path), encode_labels(ds).as_bytes())
}

pub fn load_dataset(path: &Path) -> Result<EmbeddingDataset> {
    let embeddings = load_embeddings(path)?;
    let sidecar = labels_path(path);
    let table = decode_labels(&read_text(&sidecar)?, &sidecar)?;
    if table.utterance_ids.len() != embeddings.rows() {
        return Err(Error::parse(
            &sidecar,
            0,
            format!("{} label rows for {} embeddings", table.utterance_ids.len(), embeddings.rows()),
        ));
    }
    Ok(EmbeddingDataset::new(embeddings, table.speakers, table.nuisance, table.utterance_ids)?)
}

/// Rounds every value to the nearest `f32`, i.e. what a save/load cycle yields.
pub fn quantize(m: &Matrix) -> Matrix {
    m.map(|v| f64::from(v as f32))
}
