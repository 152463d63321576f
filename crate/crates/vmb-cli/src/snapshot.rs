//! NSFM1 binary snapshots: named real arrays in little-endian order.

use crate::output::write_atomic;
use crate::{io_error, CliError, CliResult};
use std::path::Path;

pub const MAGIC: &[u8; 5] = b"NSFM1";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub name: String,
    pub dims: Vec<usize>,
    /// Row-major payload of length prod(dims).
    pub data: Vec<f64>,
}

impl Array {
    pub fn new(name: &str, dims: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "{name}: dims do not match data");
        Array { name: name.to_string(), dims, data }
    }
}

pub fn encode(fields: &[Array]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(fields.len() as u16).to_le_bytes());
    for f in fields {
        out.extend_from_slice(&(f.name.len() as u16).to_le_bytes());
        out.extend_from_slice(f.name.as_bytes());
        out.extend_from_slice(&(f.dims.len() as u16).to_le_bytes());
        for &d in &f.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for x in &f.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<Array>, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(5)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u16()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| "field name is not UTF-8".to_string())?
            .to_string();
        let rank = r.u16()?;
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let total: usize = dims.iter().product();
        let bytes = r.take(total.checked_mul(8).ok_or("payload size overflows")?)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push(Array { name, dims, data });
    }
    if r.pos != buf.len() {
        return Err(format!("{} trailing bytes", buf.len() - r.pos));
    }
    Ok(out)
}

pub fn write_snapshot(fields: &[Array], path: &Path) -> CliResult<()> {
    write_atomic(path, &encode(fields))
}

/// Reads the whole file and decodes it; nothing is returned on a format error.
pub fn read_snapshot(path: &Path) -> CliResult<Vec<Array>> {
    let buf = std::fs::read(path).map_err(io_error(path))?;
    decode(&buf).map_err(|msg| CliError::Format { path: path.to_path_buf(), msg })
}
