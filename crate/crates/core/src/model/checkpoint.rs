//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic "JJCK" | version u32 | vocab u32 | embed u32 | hidden u32 | kind u8 | inversion u8
//! then per parameter, in name order:
//!   name_len u32 | name (UTF-8) | rows u32 | cols u32 | rows*cols f64
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, ParamStore, Scalar};

use super::{Dims, Inversion, LanguageModel, Seq2Seq, Visit};

pub const MAGIC: &[u8; 4] = b"JJCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Seq2Seq,
    LanguageModel,
}

/// Serialized model: header fields plus named parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub kind: ModelKind,
    pub inversion: Inversion,
    pub dims: Dims,
    pub params: ParamStore<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn from_seq2seq(model: &Seq2Seq<T>, inversion: Inversion) -> Self {
        Self {
            kind: ModelKind::Seq2Seq,
            inversion,
            dims: model.dims(),
            params: model.to_store(""),
        }
    }

    pub fn from_lm(lm: &LanguageModel<T>, inversion: Inversion) -> Self {
        Self {
            kind: ModelKind::LanguageModel,
            inversion,
            dims: lm.dims(),
            params: lm.to_store(""),
        }
    }

    pub fn to_seq2seq(&self) -> Result<Seq2Seq<T>> {
        if self.kind != ModelKind::Seq2Seq {
            return Err(Error::Checkpoint("expected an encoder-decoder checkpoint".into()));
        }
        let mut m = Seq2Seq::zeros(self.dims);
        self.params.check_compatible(&m.to_store(""))?;
        m.load_store("", &self.params)?;
        Ok(m)
    }

    pub fn to_lm(&self) -> Result<LanguageModel<T>> {
        if self.kind != ModelKind::LanguageModel {
            return Err(Error::Checkpoint("expected a language-model checkpoint".into()));
        }
        let mut m = LanguageModel::zeros(self.dims);
        self.params.check_compatible(&m.to_store(""))?;
        m.load_store("", &self.params)?;
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        let w = &mut buf;
        w.write_u32::<LittleEndian>(VERSION).unwrap();
        w.write_u32::<LittleEndian>(self.dims.vocab as u32).unwrap();
        w.write_u32::<LittleEndian>(self.dims.embed as u32).unwrap();
        w.write_u32::<LittleEndian>(self.dims.hidden as u32).unwrap();
        w.write_u8(match self.kind {
            ModelKind::Seq2Seq => 0,
            ModelKind::LanguageModel => 1,
        })
        .unwrap();
        w.write_u8(self.inversion.code()).unwrap();
        for (name, m) in self.params.iter() {
            w.write_u32::<LittleEndian>(name.len() as u32).unwrap();
            w.extend_from_slice(name.as_bytes());
            w.write_u32::<LittleEndian>(m.rows() as u32).unwrap();
            w.write_u32::<LittleEndian>(m.cols() as u32).unwrap();
            for &v in m.as_slice() {
                w.write_f64::<LittleEndian>(v.as_f64()).unwrap();
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::Checkpoint(format!("truncated or corrupt checkpoint ({what})"));
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("magic"))?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(|_| bad("version"))?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let mut header = [0u32; 3];
        for h in &mut header {
            *h = r.read_u32::<LittleEndian>().map_err(|_| bad("header"))?;
        }
        let dims = Dims::new(header[0] as usize, header[1] as usize, header[2] as usize);
        let kind = match r.read_u8().map_err(|_| bad("kind"))? {
            0 => ModelKind::Seq2Seq,
            1 => ModelKind::LanguageModel,
            k => return Err(Error::Checkpoint(format!("unknown model kind {k}"))),
        };
        let inversion = Inversion::from_code(r.read_u8().map_err(|_| bad("inversion"))?)
            .ok_or_else(|| bad("inversion"))?;

        let mut params = ParamStore::new();
        while (r.position() as usize) < bytes.len() {
            let len = r.read_u32::<LittleEndian>().map_err(|_| bad("name length"))? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(|_| bad("name"))?;
            let name = String::from_utf8(name).map_err(|_| bad("name encoding"))?;
            let rows = r.read_u32::<LittleEndian>().map_err(|_| bad("rows"))? as usize;
            let cols = r.read_u32::<LittleEndian>().map_err(|_| bad("cols"))? as usize;
            let remaining = bytes.len() - r.position() as usize;
            if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).is_none_or(|n| n > remaining) {
                return Err(bad("values"));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(T::lit(r.read_f64::<LittleEndian>().map_err(|_| bad("values"))?));
            }
            params.insert(name, Matrix::from_vec(rows, cols, data)?)?;
        }
        Ok(Self {
            kind,
            inversion,
            dims,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
