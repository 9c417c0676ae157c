//! Binary tensor archive.
//!
//! Layout (all integers little-endian u64 unless noted):
//! magic `PLKRF1\0`, record count, then per record: name length, UTF-8 name,
//! dtype byte (0 = f64, 1 = f32), rank, extents, raw little-endian elements.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::real::{Dtype, Real};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 7] = b"PLKRF1\0";

/// Caps guarding against absurd headers from corrupt files.
const MAX_NAME: u64 = 1 << 16;
const MAX_RANK: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub enum StoredTensor {
    F64(Tensor<f64>),
    F32(Tensor<f32>),
}

impl StoredTensor {
    pub fn dtype(&self) -> Dtype {
        match self {
            StoredTensor::F64(_) => Dtype::F64,
            StoredTensor::F32(_) => Dtype::F32,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            StoredTensor::F64(t) => t.shape(),
            StoredTensor::F32(t) => t.shape(),
        }
    }

    /// Converts to the requested precision.
    pub fn to<T: Real>(&self) -> Tensor<T> {
        match self {
            StoredTensor::F64(t) => t.cast(),
            StoredTensor::F32(t) => t.cast(),
        }
    }

    fn from_tensor<T: Real>(t: &Tensor<T>) -> Self {
        let plain = Tensor::from_parts(t.shape().to_vec(), t.data().to_vec());
        match T::DTYPE {
            Dtype::F64 => StoredTensor::F64(plain.cast()),
            Dtype::F32 => StoredTensor::F32(plain.cast()),
        }
    }
}

/// Ordered collection of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    entries: IndexMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores `tensor` in its own precision, replacing any previous entry.
    pub fn insert<T: Real>(&mut self, name: &str, tensor: &Tensor<T>) {
        self.entries.insert(name.to_string(), StoredTensor::from_tensor(tensor));
    }

    pub fn insert_stored(&mut self, name: &str, tensor: StoredTensor) {
        self.entries.insert(name.to_string(), tensor);
    }

    pub fn stored(&self, name: &str) -> Option<&StoredTensor> {
        self.entries.get(name)
    }

    pub fn get<T: Real>(&self, name: &str) -> Result<Tensor<T>> {
        self.entries
            .get(name)
            .map(StoredTensor::to)
            .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &StoredTensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        let mut buf = Vec::new();
        for (name, t) in &self.entries {
            buf.clear();
            buf.extend_from_slice(&(name.len() as u64).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.push(t.dtype().code());
            buf.extend_from_slice(&(t.shape().len() as u64).to_le_bytes());
            for &e in t.shape() {
                buf.extend_from_slice(&(e as u64).to_le_bytes());
            }
            match t {
                StoredTensor::F64(t) => t.data().iter().for_each(|x| x.write_le(&mut buf)),
                StoredTensor::F32(t) => t.data().iter().for_each(|x| x.write_le(&mut buf)),
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let count = r.u64()?;
        let mut entries = IndexMap::new();
        for _ in 0..count {
            let len = r.u64()?;
            if len > MAX_NAME {
                return Err(Error::Format(format!("name length {len} too large")));
            }
            let name = std::str::from_utf8(r.take(len as usize)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_string();
            let code = r.take(1)?[0];
            let dtype = Dtype::from_code(code).ok_or_else(|| Error::Format(format!("unknown dtype code {code}")))?;
            let rank = r.u64()?;
            if rank > MAX_RANK {
                return Err(Error::Format(format!("rank {rank} too large")));
            }
            let mut shape = Vec::with_capacity(rank as usize);
            let mut numel: usize = 1;
            for _ in 0..rank {
                let e = usize::try_from(r.u64()?).map_err(|_| Error::Format("extent overflows usize".into()))?;
                numel = numel
                    .checked_mul(e)
                    .ok_or_else(|| Error::Format("element count overflows".into()))?;
                shape.push(e);
            }
            let stored = match dtype {
                Dtype::F64 => StoredTensor::F64(r.tensor(shape, numel, &name)?),
                Dtype::F32 => StoredTensor::F32(r.tensor(shape, numel, &name)?),
            };
            if entries.insert(name.clone(), stored).is_some() {
                return Err(Error::Format(format!("duplicate tensor {name}")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after last record".into()));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(Error::io(path))?;
        self.write_to(std::io::BufWriter::new(file)).map_err(Error::io(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(Error::io(path))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn tensor<T: Real>(&mut self, shape: Vec<usize>, numel: usize, name: &str) -> Result<Tensor<T>> {
        let size = T::DTYPE.size();
        let raw = self.take(
            numel
                .checked_mul(size)
                .ok_or_else(|| Error::Format("byte count overflows".into()))?,
        )?;
        let data = raw.chunks_exact(size).map(T::read_le).collect();
        Tensor::new(shape, data).map_err(|e| Error::Format(format!("{name}: {e}")))
    }
}
