//! TKD1 container format and the token-dump bundle.
//!
//! A container file is a sequence of records, each laid out as
//! `[magic "TKD1"][u32 LE header_len][UTF-8 JSON header][raw f32 LE payload]`.
//! All payloads are little-endian row-major f32. A token dump stores its
//! records in a fixed order: `grid`, `features`, `keys`, `cls_attn`,
//! `sim_features`, then the optional `text_embeddings`, `projection`,
//! `attn_matrix`. Writing and re-reading a dump is the identity on bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: [u8; 4] = *b"TKD1";

/// JSON header preceding each payload. Field order is fixed so that
/// serialization is byte-stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordHeader {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    order: String,
    endianness: String,
}

/// One named tensor inside a container file.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorRecord {
    pub fn vector(name: &str, data: Vec<f32>) -> Self {
        TensorRecord {
            name: name.to_string(),
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(name: &str, m: &Matrix) -> Self {
        TensorRecord {
            name: name.to_string(),
            shape: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.shape.len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "{}: expected 2-d shape, got {:?}",
                self.name, self.shape
            )));
        }
        Matrix::from_vec(self.shape[0], self.shape[1], self.data.clone())
    }

    fn validate(&self) -> Result<()> {
        if self.shape.is_empty() || self.shape.iter().any(|&e| e == 0) {
            return Err(Error::InvalidHeader(format!(
                "{}: shape extents must all be >= 1, got {:?}",
                self.name, self.shape
            )));
        }
        let numel: usize = self.shape.iter().product();
        if self.data.len() != numel {
            return Err(Error::ShapeMismatch(format!(
                "{}: payload has {} elements, shape {:?} needs {}",
                self.name,
                self.data.len(),
                self.shape,
                numel
            )));
        }
        Ok(())
    }
}

/// Serialized size in bytes of one record (magic + length + header + payload).
pub fn record_size(record: &TensorRecord) -> usize {
    let header = header_bytes(record);
    4 + 4 + header.len() + 4 * record.data.len()
}

fn header_bytes(record: &TensorRecord) -> Vec<u8> {
    let header = RecordHeader {
        name: record.name.clone(),
        dtype: "f32".to_string(),
        shape: record.shape.clone(),
        order: "row-major".to_string(),
        endianness: "little".to_string(),
    };
    serde_json::to_vec(&header).expect("record header serializes")
}

pub fn write_records(path: &Path, records: &[TensorRecord]) -> Result<()> {
    for r in records {
        r.validate()?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let header = header_bytes(r);
        let io = |e| Error::io(path, e);
        w.write_all(&MAGIC).map_err(io)?;
        w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&header).map_err(io)?;
        for &v in &r.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<TensorRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut records = Vec::new();
    loop {
        let mut magic = [0u8; 4];
        match r.read_exact(&mut magic) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(Error::io(path, e)),
        }
        if magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(|e| Error::io(path, e))?;
        let header_len = u32::from_le_bytes(len) as usize;
        let mut header_buf = vec![0u8; header_len];
        r.read_exact(&mut header_buf).map_err(|e| Error::io(path, e))?;
        let header: RecordHeader = serde_json::from_slice(&header_buf)
            .map_err(|e| Error::InvalidHeader(e.to_string()))?;
        if header.dtype != "f32" {
            return Err(Error::UnsupportedDtype {
                name: header.name,
                dtype: header.dtype,
            });
        }
        if header.order != "row-major" || header.endianness != "little" {
            return Err(Error::InvalidHeader(format!(
                "{}: order {:?} endianness {:?}",
                header.name, header.order, header.endianness
            )));
        }
        if header.shape.is_empty() || header.shape.iter().any(|&e| e == 0) {
            return Err(Error::InvalidHeader(format!(
                "{}: shape extents must all be >= 1, got {:?}",
                header.name, header.shape
            )));
        }
        let numel: usize = header.shape.iter().product();
        let mut payload = vec![0u8; 4 * numel];
        r.read_exact(&mut payload).map_err(|e| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::TruncatedPayload {
                    name: header.name.clone(),
                }
            } else {
                Error::io(path, e)
            }
        })?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        records.push(TensorRecord {
            name: header.name,
            shape: header.shape,
            data,
        });
    }
    Ok(records)
}

/// The per-image tensor bundle every pruning and diagnostic operation
/// consumes: encoder features, key vectors, head-summed CLS attention,
/// mid-stage similarity features, and the optional LLM-side tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDump {
    pub grid_h: usize,
    pub grid_w: usize,
    /// Final-stage hidden states, `N x D_enc`.
    pub features: Matrix,
    /// Key vectors, `N x D_k`.
    pub keys: Matrix,
    /// Head-summed CLS-to-patch attention, length `N`, entries >= 0.
    pub cls_attn: Vec<f32>,
    /// Mid-stage averaged hidden states used for similarity, `N x D_s`.
    pub sim_features: Matrix,
    /// Text token embeddings, `K_text x D_llm`.
    pub text_embeddings: Option<Matrix>,
    /// Multimodal projection, `D_enc x D_llm`.
    pub projection: Option<Matrix>,
    /// Causal visual self-attention, `N x N`.
    pub attn_matrix: Option<Matrix>,
}

impl TokenDump {
    pub fn n_tokens(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_h == 0 || self.grid_w == 0 {
            return Err(Error::InvalidArgument("grid extents must be >= 1".into()));
        }
        let n = self.n_tokens();
        let check = |name: &str, rows: usize| -> Result<()> {
            if rows != n {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has {rows} rows, grid implies {n}"
                )));
            }
            Ok(())
        };
        check("features", self.features.rows())?;
        check("keys", self.keys.rows())?;
        check("cls_attn", self.cls_attn.len())?;
        check("sim_features", self.sim_features.rows())?;
        if self.cls_attn.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::InvalidArgument(
                "cls_attn entries must be >= 0".into(),
            ));
        }
        if let Some(p) = &self.projection {
            if p.rows() != self.features.cols() {
                return Err(Error::ShapeMismatch(format!(
                    "projection has {} rows, features have {} columns",
                    p.rows(),
                    self.features.cols()
                )));
            }
        }
        if let Some(a) = &self.attn_matrix {
            if a.rows() != n || a.cols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "attn_matrix is {}x{}, grid implies {n}x{n}",
                    a.rows(),
                    a.cols()
                )));
            }
        }
        Ok(())
    }

    fn to_records(&self) -> Vec<TensorRecord> {
        let mut records = vec![
            TensorRecord::vector("grid", vec![self.grid_h as f32, self.grid_w as f32]),
            TensorRecord::matrix("features", &self.features),
            TensorRecord::matrix("keys", &self.keys),
            TensorRecord::vector("cls_attn", self.cls_attn.clone()),
            TensorRecord::matrix("sim_features", &self.sim_features),
        ];
        if let Some(t) = &self.text_embeddings {
            records.push(TensorRecord::matrix("text_embeddings", t));
        }
        if let Some(p) = &self.projection {
            records.push(TensorRecord::matrix("projection", p));
        }
        if let Some(a) = &self.attn_matrix {
            records.push(TensorRecord::matrix("attn_matrix", a));
        }
        records
    }

    /// Serialized file size in bytes, computable before writing.
    pub fn file_size(&self) -> usize {
        self.to_records().iter().map(record_size).sum()
    }
}

pub fn write_dump(dump: &TokenDump, path: &Path) -> Result<()> {
    dump.validate()?;
    write_records(path, &dump.to_records())
}

pub fn read_dump(path: &Path) -> Result<TokenDump> {
    let records = read_records(path)?;
    let mut grid = None;
    let mut features = None;
    let mut keys = None;
    let mut cls_attn = None;
    let mut sim_features = None;
    let mut text_embeddings = None;
    let mut projection = None;
    let mut attn_matrix = None;
    for rec in records {
        match rec.name.as_str() {
            "grid" => {
                if rec.data.len() != 2 {
                    return Err(Error::InvalidHeader("grid record must hold 2 values".into()));
                }
                grid = Some((rec.data[0] as usize, rec.data[1] as usize));
            }
            "features" => features = Some(rec.to_matrix()?),
            "keys" => keys = Some(rec.to_matrix()?),
            "cls_attn" => cls_attn = Some(rec.data),
            "sim_features" => sim_features = Some(rec.to_matrix()?),
            "text_embeddings" => text_embeddings = Some(rec.to_matrix()?),
            "projection" => projection = Some(rec.to_matrix()?),
            "attn_matrix" => attn_matrix = Some(rec.to_matrix()?),
            other => {
                return Err(Error::InvalidHeader(format!(
                    "unexpected tensor {other:?} in token dump"
                )))
            }
        }
    }
    let missing = |name: &str| Error::InvalidHeader(format!("missing tensor {name:?}"));
    let (grid_h, grid_w) = grid.ok_or_else(|| missing("grid"))?;
    let dump = TokenDump {
        grid_h,
        grid_w,
        features: features.ok_or_else(|| missing("features"))?,
        keys: keys.ok_or_else(|| missing("keys"))?,
        cls_attn: cls_attn.ok_or_else(|| missing("cls_attn"))?,
        sim_features: sim_features.ok_or_else(|| missing("sim_features"))?,
        text_embeddings,
        projection,
        attn_matrix,
    };
    dump.validate()?;
    Ok(dump)
}
