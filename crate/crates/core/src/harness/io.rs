//! Binary channel files.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic   "MIMOCH01"           8 bytes
//! K       u32
//! T       u32
//! R_k     K × u32
//! L_k     K × u32
//! H_k     per user, R_k × T complex entries as (re, im) f64 pairs, row-major
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{ChannelSet, SystemDims};

pub const MAGIC: &[u8; 8] = b"MIMOCH01";

/// Bytes a file with these dimensions occupies.
pub fn file_size(dims: &SystemDims) -> usize {
    let k = dims.users();
    8 + 4 + 4 + 8 * k + 16 * dims.antennas * dims.total_rx()
}

pub fn encode(channel: &ChannelSet) -> Vec<u8> {
    let dims = &channel.dims;
    let mut out = Vec::with_capacity(file_size(dims));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.users() as u32).to_le_bytes());
    out.extend_from_slice(&(dims.antennas as u32).to_le_bytes());
    for &r in &dims.rx {
        out.extend_from_slice(&(r as u32).to_le_bytes());
    }
    for &l in &dims.layers {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    for user in &channel.users {
        for i in 0..user.h.nrows() {
            for j in 0..user.h.ncols() {
                let z = user.h[(i, j)];
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                reason: format!(
                    "truncated: need {n} bytes for {what}, {} remain",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8, "channel entry")?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

/// Dimensions and raw channel matrices, without decomposing.
pub fn decode_raw(bytes: &[u8]) -> Result<(SystemDims, Vec<CMatrix>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(8, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: format!("bad magic {:?}", String::from_utf8_lossy(magic)),
        });
    }
    let k_offset = cur.pos;
    let users = cur.u32("user count")?;
    let antennas = cur.u32("antenna count")?;
    if users == 0 {
        return Err(Error::Format {
            offset: k_offset as u64,
            reason: "zero users".into(),
        });
    }
    // every user needs 8 header bytes; reject counts the file cannot hold
    if users.checked_mul(8).is_none_or(|n| n > bytes.len()) {
        return Err(Error::Format {
            offset: k_offset as u64,
            reason: format!("user count {users} exceeds file size"),
        });
    }
    let dims_offset = cur.pos;
    let rx = (0..users).map(|_| cur.u32("R_k")).collect::<Result<Vec<_>>>()?;
    let layers = (0..users).map(|_| cur.u32("L_k")).collect::<Result<Vec<_>>>()?;
    let dims = SystemDims::new(antennas, rx, layers).map_err(|e| Error::Format {
        offset: dims_offset as u64,
        reason: e.to_string(),
    })?;
    let payload = dims
        .total_rx()
        .checked_mul(antennas)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::Format {
            offset: dims_offset as u64,
            reason: "dimension overflow".into(),
        })?;
    if payload > bytes.len() - cur.pos {
        return Err(Error::Format {
            offset: cur.pos as u64,
            reason: format!(
                "truncated: header promises {payload} payload bytes, {} remain",
                bytes.len() - cur.pos
            ),
        });
    }
    let mut channels = Vec::with_capacity(users);
    for &r in &dims.rx {
        let mut h = CMatrix::zeros(r, antennas);
        for i in 0..r {
            for j in 0..antennas {
                let re = cur.f64()?;
                let im = cur.f64()?;
                h[(i, j)] = Complex64::new(re, im);
            }
        }
        channels.push(h);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            offset: cur.pos as u64,
            reason: format!("{} trailing bytes", bytes.len() - cur.pos),
        });
    }
    Ok((dims, channels))
}

pub fn decode(bytes: &[u8]) -> Result<ChannelSet> {
    let (dims, channels) = decode_raw(bytes)?;
    ChannelSet::from_channels(&channels, &dims.layers)
}

pub fn write_channels(channel: &ChannelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(channel)).map_err(|e| Error::io(path, e))
}

pub fn read_channels(path: impl AsRef<Path>) -> Result<ChannelSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
