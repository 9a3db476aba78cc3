//! Vector file formats.
//!
//! Text follows the word2vec text convention: a `count dim` header, then one
//! `id v1 ... vdim` line per vector. Binary is little endian throughout:
//!
//! ```text
//! u64 count, u64 dim, then per vector: u32 id_len, id bytes (UTF-8), dim x f32
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::EmbeddingModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Text,
    Binary,
}

/// Named `f32` vectors of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectors {
    pub ids: Vec<String>,
    pub dim: usize,
    pub rows: Vec<Vec<f32>>,
}

impl Vectors {
    pub fn new(ids: Vec<String>, dim: usize, rows: Vec<Vec<f32>>) -> Result<Self> {
        if ids.len() != rows.len() || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Invalid("vector ids and rows do not match".into()));
        }
        if let Some(id) = ids.iter().find(|id| id.is_empty() || id.contains(char::is_whitespace)) {
            return Err(Error::Invalid(format!("vector id {id:?} is empty or contains whitespace")));
        }
        Ok(Vectors { ids, dim, rows })
    }

    pub fn from_model(model: &EmbeddingModel) -> Self {
        Vectors {
            ids: model.location_ids.clone(),
            dim: model.dim,
            rows: model.location_vectors_f32(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            write!(out, "{id}")?;
            for v in row {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (count, dim) = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::parse(path, 1, "missing header"));
            };
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next()) {
                (Some(Ok(c)), Some(Ok(d))) => break (c, d),
                _ => return Err(Error::parse(path, i + 1, "header must be `count dim`")),
            }
        };
        let mut ids = Vec::with_capacity(count);
        let mut rows = Vec::with_capacity(count);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let id = parts.next().unwrap_or_default().to_string();
            let row: std::result::Result<Vec<f32>, _> = parts.map(str::parse::<f32>).collect();
            let row = row.map_err(|_| Error::parse(path, i + 1, "bad vector component"))?;
            if row.len() != dim {
                return Err(Error::parse(path, i + 1, format!("expected {dim} components, got {}", row.len())));
            }
            ids.push(id);
            rows.push(row);
        }
        if ids.len() != count {
            return Err(Error::parse(path, 1, format!("header says {count} vectors, found {}", ids.len())));
        }
        Ok(Vectors { ids, dim, rows })
    }

    pub fn write_binary<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.write_all(&(id.len() as u32).to_le_bytes())?;
            out.write_all(id.as_bytes())?;
            for v in row {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut reader: R, path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let mut u64buf = [0u8; 8];
        reader.read_exact(&mut u64buf).map_err(io)?;
        let count = u64::from_le_bytes(u64buf) as usize;
        reader.read_exact(&mut u64buf).map_err(io)?;
        let dim = u64::from_le_bytes(u64buf) as usize;
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        let mut rows = Vec::with_capacity(count.min(1 << 20));
        let mut u32buf = [0u8; 4];
        for _ in 0..count {
            reader.read_exact(&mut u32buf).map_err(io)?;
            let mut id = vec![0u8; u32::from_le_bytes(u32buf) as usize];
            reader.read_exact(&mut id).map_err(io)?;
            let id = String::from_utf8(id).map_err(|_| Error::parse(path, 0, "vector id is not UTF-8"))?;
            let mut row = Vec::with_capacity(dim);
            for _ in 0..dim {
                reader.read_exact(&mut u32buf).map_err(io)?;
                row.push(f32::from_le_bytes(u32buf));
            }
            ids.push(id);
            rows.push(row);
        }
        Ok(Vectors { ids, dim, rows })
    }
}

/// Writes the model's location vectors to `path`.
pub fn export_vectors(model: &EmbeddingModel, path: impl AsRef<Path>, format: VectorFormat) -> Result<()> {
    save_vectors(&Vectors::from_model(model), path, format)
}

pub fn save_vectors(vectors: &Vectors, path: impl AsRef<Path>, format: VectorFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        VectorFormat::Text => vectors.write_text(&mut out),
        VectorFormat::Binary => vectors.write_binary(&mut out),
    }
    .and_then(|_| out.flush())
    .map_err(|e| Error::io(path, e))
}

pub fn load_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<Vectors> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        VectorFormat::Text => Vectors::read_text(BufReader::new(file), path),
        VectorFormat::Binary => Vectors::read_binary(BufReader::new(file), path),
    }
}
