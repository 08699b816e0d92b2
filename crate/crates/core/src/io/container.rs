//! The `LHPS` tensor container.
//!
//! ```text
//! magic     4 bytes  "LHPS"
//! version   u16
//! count     u32
//! entry*    name_len u32, name (UTF-8), dtype u8 (0 = f64, 1 = i64),
//!           rank u8, dims u64 * rank, payload (product(dims) * 8 bytes)
//! ```
//!
//! All integers and payloads are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LHPS";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F64(Vec<f64>),
    I64(Vec<i64>),
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F64(v) => v.len(),
            TensorData::I64(v) => v.len(),
        }
    }

    fn tag(&self) -> u8 {
        match self {
            TensorData::F64(_) => 0,
            TensorData::I64(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(Error::shape(format!("rank {} exceeds 255", dims.len())));
        }
        let expected = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if expected != Some(data.len()) {
            return Err(Error::shape(format!(
                "dims {dims:?} do not match {} values",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn f64(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(dims, TensorData::F64(values))
    }

    pub fn i64(dims: Vec<usize>, values: Vec<i64>) -> Result<Self> {
        Self::new(dims, TensorData::I64(values))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }
}

/// Named tensors in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorContainer {
    entries: Vec<(String, Tensor)>,
}

fn missing(name: &str) -> Error {
    Error::Format(format!("container has no entry {name:?}"))
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name.len() > u32::MAX as usize {
            return Err(Error::Format("entry name too long".into()));
        }
        if self.contains(&name) {
            return Err(Error::Format(format!("duplicate entry {name:?}")));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn insert_f64(&mut self, name: impl Into<String>, dims: Vec<usize>, values: Vec<f64>) -> Result<()> {
        self.insert(name, Tensor::f64(dims, values)?)
    }

    pub fn insert_i64(&mut self, name: impl Into<String>, dims: Vec<usize>, values: Vec<i64>) -> Result<()> {
        self.insert(name, Tensor::i64(dims, values)?)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn f64(&self, name: &str) -> Result<(&[usize], &[f64])> {
        let t = self.get(name).ok_or_else(|| missing(name))?;
        match &t.data {
            TensorData::F64(v) => Ok((&t.dims, v)),
            TensorData::I64(_) => Err(Error::Format(format!("entry {name:?} is i64, expected f64"))),
        }
    }

    pub fn i64(&self, name: &str) -> Result<(&[usize], &[i64])> {
        let t = self.get(name).ok_or_else(|| missing(name))?;
        match &t.data {
            TensorData::I64(v) => Ok((&t.dims, v)),
            TensorData::F64(_) => Err(Error::Format(format!("entry {name:?} is f64, expected i64"))),
        }
    }

    /// f64 payload whose dims must equal `dims`.
    pub fn f64_shaped(&self, name: &str, dims: &[usize]) -> Result<&[f64]> {
        let (d, v) = self.f64(name)?;
        if d != dims {
            return Err(Error::shape(format!(
                "entry {name:?} has dims {d:?}, expected {dims:?}"
            )));
        }
        Ok(v)
    }

    pub fn i64_shaped(&self, name: &str, dims: &[usize]) -> Result<&[i64]> {
        let (d, v) = self.i64(name)?;
        if d != dims {
            return Err(Error::shape(format!(
                "entry {name:?} has dims {d:?}, expected {dims:?}"
            )));
        }
        Ok(v)
    }

    pub fn scalar_f64(&self, name: &str) -> Result<f64> {
        Ok(self.f64_shaped(name, &[1])?[0])
    }

    pub fn scalar_i64(&self, name: &str) -> Result<i64> {
        Ok(self.i64_shaped(name, &[1])?[0])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.data.tag());
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match &t.data {
                TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not an LHPS container".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let count = u32::from_le_bytes(r.array()?);
        let mut c = TensorContainer::new();
        for _ in 0..count {
            let name_len = u32::from_le_bytes(r.array()?) as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("entry name is not UTF-8".into()))?
                .to_string();
            let [tag, rank] = r.array()?;
            let dims = (0..rank)
                .map(|_| {
                    usize::try_from(u64::from_le_bytes(r.array()?))
                        .map_err(|_| Error::Format("dimension exceeds address space".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            let count = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::Format(format!("entry {name:?} payload is truncated")))?;
            let data = match tag {
                0 => TensorData::F64(
                    (0..count)
                        .map(|_| r.array().map(f64::from_le_bytes))
                        .collect::<Result<_>>()?,
                ),
                1 => TensorData::I64(
                    (0..count)
                        .map(|_| r.array().map(i64::from_le_bytes))
                        .collect::<Result<_>>()?,
                ),
                other => return Err(Error::Format(format!("entry {name:?} has unknown dtype tag {other}"))),
            };
            c.insert(name, Tensor { dims, data })?;
        }
        if r.remaining() != 0 {
            return Err(Error::Format(format!(
                "{} trailing bytes after last entry",
                r.remaining()
            )));
        }
        Ok(c)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Format("unexpected end of container".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}
