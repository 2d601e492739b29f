//! Little-endian primitives shared by the field and checkpoint formats.

use std::io::{self, Read, Write};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Upper bound on any single declared dimension or count in a file.
pub(crate) const MAX_DIM: u64 = 1 << 24;

pub(crate) fn put_u8(w: &mut impl Write, v: u8) -> io::Result<()> {
    w.write_all(&[v])
}
pub(crate) fn put_u16(w: &mut impl Write, v: u16) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_u32(w: &mut impl Write, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_i64(w: &mut impl Write, v: i64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_f32(w: &mut impl Write, v: f32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
pub(crate) fn put_f64(w: &mut impl Write, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::format("truncated file")
    } else {
        Error::Io(e)
    }
}

pub(crate) fn get_u8(r: &mut impl Read) -> Result<u8> {
    Ok(take::<1>(r)?[0])
}
pub(crate) fn get_u16(r: &mut impl Read) -> Result<u16> {
    Ok(u16::from_le_bytes(take(r)?))
}
pub(crate) fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(take(r)?))
}
pub(crate) fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(take(r)?))
}
pub(crate) fn get_i64(r: &mut impl Read) -> Result<i64> {
    Ok(i64::from_le_bytes(take(r)?))
}
pub(crate) fn get_f32(r: &mut impl Read) -> Result<f32> {
    Ok(f32::from_le_bytes(take(r)?))
}
pub(crate) fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(take(r)?))
}

pub(crate) fn get_bytes(r: &mut impl Read, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let got = take::<4>(r)?;
    if &got != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub(crate) fn bounded(v: u64, what: &str) -> Result<usize> {
    if v > MAX_DIM {
        return Err(Error::format(format!("{what} {v} exceeds limit {MAX_DIM}")));
    }
    Ok(v as usize)
}

/// `(name length u32, name, rank u32, dims u64 × rank, values f64 × numel)`.
pub(crate) fn put_named_tensor(w: &mut impl Write, name: &str, t: &Tensor) -> io::Result<()> {
    put_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    put_u32(w, t.rank() as u32)?;
    for &d in t.shape() {
        put_u64(w, d as u64)?;
    }
    let mut buf = Vec::with_capacity(t.len() * 8);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn get_named_tensor(r: &mut impl Read) -> Result<(String, Tensor)> {
    let name_len = bounded(get_u32(r)? as u64, "name length")?;
    let name = String::from_utf8(get_bytes(r, name_len)?)
        .map_err(|_| Error::format("tensor name is not UTF-8"))?;
    let rank = bounded(get_u32(r)? as u64, "rank")?;
    if rank > 8 {
        return Err(Error::format(format!("tensor '{name}' has rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    let mut total: u64 = 1;
    for _ in 0..rank {
        let d = get_u64(r)?;
        total = total
            .checked_mul(d)
            .filter(|&t| t <= MAX_DIM * 16)
            .ok_or_else(|| Error::format(format!("tensor '{name}' dimensions overflow")))?;
        shape.push(d as usize);
    }
    let raw = get_bytes(r, total as usize * 8)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((name, Tensor::new(shape, data)?))
}
