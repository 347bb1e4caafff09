//! Flat binary and CSV records for fields.
//!
//! Binary layout (little endian): magic `GPHF`, `u32` ordering version, `u32` cutoff,
//! then `(re, im)` as `f64` pairs in lattice enumeration order.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64 as C64;

use super::field::TorusField;
use super::lattice::{ModeLattice, ORDERING_VERSION};
use crate::error::{Error, Result};

const FIELD_MAGIC: &[u8; 4] = b"GPHF";

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn write_complex<W: Write>(w: &mut W, values: &[C64]) -> Result<()> {
    for c in values {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_complex<R: Read>(r: &mut R, count: usize) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let im = f64::from_le_bytes(buf);
        out.push(C64::new(re, im));
    }
    Ok(out)
}

pub(crate) fn check_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!("bad magic {buf:?}, expected {magic:?}")));
    }
    Ok(())
}

pub fn write_field_binary<W: Write>(w: &mut W, field: &TorusField) -> Result<()> {
    w.write_all(FIELD_MAGIC)?;
    write_u32(w, ORDERING_VERSION)?;
    write_u32(w, field.lattice().cutoff() as u32)?;
    write_complex(w, field.coeffs())
}

pub fn read_field_binary<R: Read>(r: &mut R) -> Result<TorusField> {
    check_magic(r, FIELD_MAGIC)?;
    let version = read_u32(r)?;
    if version != ORDERING_VERSION {
        return Err(Error::Format(format!("unsupported ordering version {version}")));
    }
    let lattice = ModeLattice::new(read_u32(r)? as usize)?;
    let coeffs = read_complex(r, lattice.len())?;
    TorusField::from_coeffs(lattice, coeffs)
}

/// CSV form: a `cutoff,ordering_version` header row, then one `re,im` row per mode.
pub fn write_field_csv<W: Write>(w: &mut W, field: &TorusField) -> Result<()> {
    writeln!(w, "cutoff,ordering_version")?;
    writeln!(w, "{},{}", field.lattice().cutoff(), ORDERING_VERSION)?;
    writeln!(w, "re,im")?;
    for c in field.coeffs() {
        writeln!(w, "{:e},{:e}", c.re, c.im)?;
    }
    Ok(())
}

pub fn read_field_csv<R: BufRead>(r: R) -> Result<TorusField> {
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        lines.next().ok_or_else(|| Error::Format("truncated field CSV".into()))?.map_err(Error::from)
    };
    let _ = next()?;
    let header = next()?;
    let mut parts = header.split(',');
    let parse_u = |s: Option<&str>| -> Result<usize> {
        s.and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header row `{header}`")))
    };
    let cutoff = parse_u(parts.next())?;
    let version = parse_u(parts.next())? as u32;
    if version != ORDERING_VERSION {
        return Err(Error::Format(format!("unsupported ordering version {version}")));
    }
    let lattice = ModeLattice::new(cutoff)?;
    let _ = next()?;
    let mut coeffs = Vec::with_capacity(lattice.len());
    for _ in 0..lattice.len() {
        let row = next()?;
        let (re, im) = row
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("bad coefficient row `{row}`")))?;
        let re: f64 = re.trim().parse().map_err(|_| Error::Format(format!("bad number `{re}`")))?;
        let im: f64 = im.trim().parse().map_err(|_| Error::Format(format!("bad number `{im}`")))?;
        coeffs.push(C64::new(re, im));
    }
    TorusField::from_coeffs(lattice, coeffs)
}
