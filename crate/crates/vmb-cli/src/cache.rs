//! On-disk cache of the collision tensor (VMBQ1 files).
//!
//! Layout: magic "VMBQ1", then D, n_b and the tensor quadrature order as u32
//! LE, then the n_b^2 x n_b matrix as f64 LE in row-major order. The file name
//! carries gamma and the velocity quadrature order; a header or size mismatch
//! discards the file.

use crate::output::write_atomic;
use crate::{io_error, CliResult, Context};
use nalgebra::DMatrix;
use std::path::{Path, PathBuf};
use vmb::collision::{OperatorSet, QTensor};

pub const MAGIC: &[u8; 5] = b"VMBQ1";
pub const ENV_VAR: &str = "VMB_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheKey {
    pub gamma: f64,
    pub degree: usize,
    pub quad_order: usize,
    pub tensor_order: usize,
}

impl CacheKey {
    pub fn file_name(&self) -> String {
        format!(
            "q_g{:016x}_d{}_q{}_t{}.vmbq",
            self.gamma.to_bits(),
            self.degree,
            self.quad_order,
            self.tensor_order
        )
    }
}

/// `VMB_CACHE_DIR` when set, else `fallback`.
pub fn cache_dir(fallback: &Path) -> PathBuf {
    std::env::var_os(ENV_VAR).map(PathBuf::from).unwrap_or_else(|| fallback.to_path_buf())
}

pub fn encode(q: &QTensor, degree: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(17 + 8 * q.data.len());
    out.extend_from_slice(MAGIC);
    for x in [degree, q.n, q.quad_order] {
        out.extend_from_slice(&(x as u32).to_le_bytes());
    }
    for r in 0..q.data.nrows() {
        for c in 0..q.data.ncols() {
            out.extend_from_slice(&q.data[(r, c)].to_le_bytes());
        }
    }
    out
}

/// `None` unless the header matches `key` and `n` exactly.
pub fn decode(buf: &[u8], key: &CacheKey, n: usize) -> Option<QTensor> {
    if buf.len() != 17 + 8 * n * n * n || &buf[..5] != MAGIC {
        return None;
    }
    let word = |i: usize| u32::from_le_bytes(buf[5 + 4 * i..9 + 4 * i].try_into().unwrap()) as usize;
    if word(0) != key.degree || word(1) != n || word(2) != key.tensor_order {
        return None;
    }
    let vals: Vec<f64> = buf[17..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Some(QTensor {
        n,
        quad_order: key.tensor_order,
        data: DMatrix::from_row_slice(n * n, n, &vals),
    })
}

/// Load the tensor from `dir` or build and store it. Returns whether the
/// cache was hit.
pub fn attach_q_tensor(ops: &mut OperatorSet, key: &CacheKey, dir: &Path) -> CliResult<bool> {
    let path = dir.join(key.file_name());
    let n = ops.n();
    if let Ok(buf) = std::fs::read(&path) {
        if let Some(q) = decode(&buf, key, n) {
            ops.set_q_tensor(q).ctx("collision::set_q_tensor")?;
            return Ok(true);
        }
    }
    ops.build_q_tensor(key.tensor_order).ctx("collision::build_q_tensor")?;
    let q = ops.q_tensor().ctx("collision::q_tensor")?;
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_atomic(&path, &encode(q, key.degree))?;
    Ok(false)
}
