//! Binary parameter dump.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "RSLAQCK1"
//! version    u32      1
//! height     u32      input rows
//! width      u32      input columns
//! actions    u32
//! stages     u32      number of conv stages
//! tensors    u32      count
//! per tensor:
//!   name_len u32, name (UTF-8)
//!   ndims    u32, dims (u64 each)
//!   values   f64 little-endian, row-major
//! ```
//!
//! Tensor order: `conv{i}.weight`, `bn{i}.gamma`, `bn{i}.beta` per stage,
//! `fc.weight`, `fc.bias`, then `bn{i}.running_mean` and `bn{i}.running_var`
//! per stage. Conv weights are `(9 * c_in, c_out)` with rows in
//! `(kh, kw, c_in)` order. Adam moments are not stored.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{NetworkConfig, QNetwork};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RSLAQCK1";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, dims: &[usize], values: impl Iterator<Item = f64>) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, dims.len() as u32);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(net: &QNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    let (h, w) = net.input_shape();
    put_u32(&mut out, h as u32);
    put_u32(&mut out, w as u32);
    put_u32(&mut out, super::QFunction::num_actions(net) as u32);
    put_u32(&mut out, net.num_stages() as u32);
    let (means, vars) = net.running_stats();
    put_u32(&mut out, (net.parameters().len() + means.len() + vars.len()) as u32);
    for (name, p) in net.parameter_names().iter().zip(net.parameters()) {
        put_tensor(&mut out, name, &[p.nrows(), p.ncols()], p.iter().copied());
    }
    for (i, (m, v)) in means.iter().zip(vars).enumerate() {
        put_tensor(&mut out, &format!("bn{i}.running_mean"), &[m.len()], m.iter().copied());
        put_tensor(&mut out, &format!("bn{i}.running_var"), &[v.len()], v.iter().copied());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self) -> Result<(String, Vec<usize>, Vec<f64>)> {
        let len = self.u32()? as usize;
        let name = String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let nd = self.u32()? as usize;
        if nd > 4 {
            return Err(Error::Checkpoint(format!("{name}: {nd} dimensions")));
        }
        let dims = (0..nd).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count: usize = dims.iter().product();
        if count.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(Error::Checkpoint(format!("{name}: truncated values")));
        }
        let values = (0..count)
            .map(|_| self.take(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect::<Result<Vec<_>>>()?;
        Ok((name, dims, values))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<QNetwork> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let _actions = r.u32()?;
    let stages = r.u32()? as usize;
    let count = r.u32()? as usize;
    if count != 3 * stages + 2 + 2 * stages {
        return Err(Error::Checkpoint(format!("{count} tensors for {stages} stages")));
    }
    let mut params = Vec::new();
    let mut channels = Vec::new();
    for k in 0..3 * stages + 2 {
        let (name, dims, values) = r.tensor()?;
        if dims.len() != 2 {
            return Err(Error::Checkpoint(format!("{name}: expected a matrix")));
        }
        let a = Array2::from_shape_vec((dims[0], dims[1]), values)
            .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        if k < 3 * stages && k % 3 == 0 {
            channels.push(a.ncols());
        }
        params.push(a);
    }
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for k in 0..2 * stages {
        let (name, dims, values) = r.tensor()?;
        if dims.len() != 1 {
            return Err(Error::Checkpoint(format!("{name}: expected a vector")));
        }
        if k % 2 == 0 {
            means.push(Array1::from(values));
        } else {
            vars.push(Array1::from(values));
        }
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let cfg = NetworkConfig {
        channels,
        ..NetworkConfig::default()
    };
    QNetwork::from_parts(h, w, cfg, params, means, vars)
}

pub fn save(net: &QNetwork, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<QNetwork> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?
        .read_to_end(&mut buf)?;
    from_bytes(&buf)
}
