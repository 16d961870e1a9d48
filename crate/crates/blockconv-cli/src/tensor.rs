//! Binary container for named, typed, n-dimensional real arrays.
//!
//! Layout (all integers little-endian): magic `BTFM`, u32 version (= 1),
//! u32 record count; then per record a u32 name length, the UTF-8 name, a u8
//! dtype (0 = f64, 1 = f32), a u8 rank, rank u64 dims, and the payload in
//! column-major order. Round trips are bitwise; files are portable across
//! platforms because the endianness is fixed.

use crate::error::CliError;
use std::path::Path;

const MAGIC: &[u8; 4] = b"BTFM";
const VERSION: u32 = 1;
const MAX_RANK: u8 = 8;
const MAX_NAME: u32 = 4096;

/// A record's values, in either supported width.
///
/// Equality is bit-level, not numeric: containers round-trip bitwise, and
/// integer metadata rides along as f64 bit patterns that may look like NaN,
/// so two payloads are equal exactly when their stored bits are.
#[derive(Debug, Clone)]
pub enum Payload {
    /// Eight-byte floats.
    F64(Vec<f64>),
    /// Four-byte floats.
    F32(Vec<f32>),
}

impl PartialEq for Payload {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Payload::F64(a), Payload::F64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Payload::F32(a), Payload::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

impl Payload {
    /// Number of stored values.
    pub fn len(&self) -> usize {
        match self {
            Payload::F64(v) => v.len(),
            Payload::F32(v) => v.len(),
        }
    }

    /// Whether the payload holds no values.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> u8 {
        match self {
            Payload::F64(_) => 0,
            Payload::F32(_) => 1,
        }
    }
}

/// One named array.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Record name, unique within a file by convention.
    pub name: String,
    /// Dimensions, outermost first; the payload is column-major.
    pub dims: Vec<u64>,
    /// The values.
    pub payload: Payload,
}

impl Record {
    /// The values widened to f64 regardless of storage width.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.payload {
            Payload::F64(v) => v.clone(),
            Payload::F32(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

/// An ordered collection of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorFile {
    /// The records, in write order.
    pub records: Vec<Record>,
}

impl TensorFile {
    /// Empty container.
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an f64 record after checking that the dims match the data.
    pub fn push_f64(
        &mut self,
        name: &str,
        dims: Vec<u64>,
        data: Vec<f64>,
    ) -> Result<(), CliError> {
        check_shape(name, &dims, data.len())?;
        self.records.push(Record {
            name: name.to_string(),
            dims,
            payload: Payload::F64(data),
        });
        Ok(())
    }

    /// Appends an f32 record after checking that the dims match the data.
    pub fn push_f32(
        &mut self,
        name: &str,
        dims: Vec<u64>,
        data: Vec<f32>,
    ) -> Result<(), CliError> {
        check_shape(name, &dims, data.len())?;
        self.records.push(Record {
            name: name.to_string(),
            dims,
            payload: Payload::F32(data),
        });
        Ok(())
    }

    /// Appends a 64-bit integer (seed, hash) as the bit pattern of one f64.
    pub fn push_meta_bits(&mut self, name: &str, bits: u64) -> Result<(), CliError> {
        self.push_f64(name, vec![1], vec![f64::from_bits(bits)])
    }

    /// Reads back a 64-bit integer stored by `push_meta_bits`.
    pub fn meta_bits(&self, name: &str) -> Option<u64> {
        let r = self.get(name)?;
        match &r.payload {
            Payload::F64(v) if v.len() == 1 => Some(v[0].to_bits()),
            _ => None,
        }
    }

    /// First record with the given name.
    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Serializes to bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let count = u32::try_from(self.records.len())
            .map_err(|_| CliError::Validation("too many records".into()))?;
        out.extend_from_slice(&count.to_le_bytes());
        for r in &self.records {
            let name = r.name.as_bytes();
            if name.len() as u64 > MAX_NAME as u64 {
                return Err(CliError::Validation(format!("record name `{}` too long", r.name)));
            }
            if r.dims.len() as u64 > MAX_RANK as u64 {
                return Err(CliError::Validation(format!(
                    "record `{}` has rank {}, max {MAX_RANK}",
                    r.name,
                    r.dims.len()
                )));
            }
            check_shape(&r.name, &r.dims, r.payload.len())?;
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name);
            out.push(r.payload.dtype());
            out.push(r.dims.len() as u8);
            for &d in &r.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            match &r.payload {
                Payload::F64(v) => {
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                Payload::F32(v) => {
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Parses from bytes, validating the whole framing.
    pub fn from_bytes(data: &[u8]) -> Result<Self, CliError> {
        let mut cur = Cursor { data, pos: 0 };
        let magic = cur.take(4)?;
        if magic != MAGIC {
            return Err(CliError::Io("not a tensor file (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(CliError::Io(format!(
                "unsupported tensor file version {version}, expected {VERSION}"
            )));
        }
        let count = cur.u32()?;
        let mut records = Vec::with_capacity(count.min(1024) as usize);
        for _ in 0..count {
            let name_len = cur.u32()?;
            if name_len > MAX_NAME {
                return Err(CliError::Io(format!("record name length {name_len} too large")));
            }
            let name = String::from_utf8(cur.take(name_len as usize)?.to_vec())
                .map_err(|_| CliError::Io("record name is not UTF-8".into()))?;
            let dtype = cur.u8()?;
            let rank = cur.u8()?;
            if rank > MAX_RANK {
                return Err(CliError::Io(format!("record `{name}` rank {rank} too large")));
            }
            let mut dims = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                dims.push(cur.u64()?);
            }
            let count = dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d));
            let count = count
                .and_then(|c| usize::try_from(c).ok())
                .ok_or_else(|| CliError::Io(format!("record `{name}` element count overflows")))?;
            let payload = match dtype {
                0 => {
                    let bytes = cur.take(count.checked_mul(8).ok_or_else(too_big)?)?;
                    Payload::F64(
                        bytes
                            .chunks_exact(8)
                            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                            .collect(),
                    )
                }
                1 => {
                    let bytes = cur.take(count.checked_mul(4).ok_or_else(too_big)?)?;
                    Payload::F32(
                        bytes
                            .chunks_exact(4)
                            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                            .collect(),
                    )
                }
                other => {
                    return Err(CliError::Io(format!(
                        "record `{name}` has unknown dtype {other}"
                    )))
                }
            };
            records.push(Record { name, dims, payload });
        }
        if cur.pos != data.len() {
            return Err(CliError::Io(format!(
                "{} trailing bytes after the last record",
                data.len() - cur.pos
            )));
        }
        Ok(Self { records })
    }

    /// Writes to a file.
    pub fn write_to(&self, path: &Path) -> Result<(), CliError> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    /// Reads from a file.
    pub fn read_from(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

fn too_big() -> CliError {
    CliError::Io("payload byte count overflows".into())
}

fn check_shape(name: &str, dims: &[u64], len: usize) -> Result<(), CliError> {
    let want = dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d));
    match want.and_then(|c| usize::try_from(c).ok()) {
        Some(w) if w == len => Ok(()),
        _ => Err(CliError::Validation(format!(
            "record `{name}`: dims {dims:?} do not match {len} values"
        ))),
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| CliError::Io("tensor file truncated".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
