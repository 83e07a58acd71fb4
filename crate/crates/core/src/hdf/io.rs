//! Binary persistence: magic `HDF1`, little-endian u64 header
//! `{N, M or 0, r, p, d, flags}`, then row-major f64 `U` and `V` (or `D`).

use std::io::{Read, Write};

use super::LowRankFactorization;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"HDF1";
const FLAG_SYMMETRIC: u64 = 1;

pub fn save<W: Write>(f: &LowRankFactorization, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    let m = if f.is_symmetric() { 0 } else { f.cols() };
    let flags = if f.is_symmetric() { FLAG_SYMMETRIC } else { 0 };
    for v in [f.rows(), m, f.rank(), f.p, f.d] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    out.write_all(&flags.to_le_bytes())?;
    write_floats(&mut out, f.u.data())?;
    match (&f.v, &f.diag) {
        (Some(v), _) => write_floats(&mut out, v.data())?,
        (None, Some(d)) => write_floats(&mut out, d)?,
        (None, None) => unreachable!("factorization has either V or D"),
    }
    out.flush()?;
    Ok(())
}

fn write_floats<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_floats<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let bytes = count
        .checked_mul(8)
        .ok_or_else(|| Error::invalid("factorization file header sizes overflow"))?;
    let mut buf = vec![0u8; bytes];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::invalid("factorization header value does not fit in usize"))
}

/// Reads a factorization; build metadata (bound, per-order ranks) is not stored.
pub fn load<R: Read>(mut input: R) -> Result<LowRankFactorization> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not a factorization file (bad magic)"));
    }
    let n = to_usize(read_u64(&mut input)?)?;
    let m = to_usize(read_u64(&mut input)?)?;
    let r = to_usize(read_u64(&mut input)?)?;
    let p = to_usize(read_u64(&mut input)?)?;
    let d = to_usize(read_u64(&mut input)?)?;
    let flags = read_u64(&mut input)?;
    if flags & !FLAG_SYMMETRIC != 0 {
        return Err(Error::invalid(format!("unknown factorization flags {flags:#x}")));
    }
    let symmetric = flags & FLAG_SYMMETRIC != 0;
    if symmetric && m != 0 {
        return Err(Error::invalid("symmetric factorization must record M = 0"));
    }
    let u = DenseMatrix::from_vec(n, r, read_floats(&mut input, n.checked_mul(r).unwrap_or(usize::MAX))?)?;
    let (v, diag) = if symmetric {
        (None, Some(read_floats(&mut input, r)?))
    } else {
        let data = read_floats(&mut input, m.checked_mul(r).unwrap_or(usize::MAX))?;
        (Some(DenseMatrix::from_vec(m, r, data)?), None)
    };
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::invalid("trailing bytes after factorization data"));
    }
    Ok(LowRankFactorization {
        u,
        v,
        diag,
        p,
        d,
        info: None,
    })
}
