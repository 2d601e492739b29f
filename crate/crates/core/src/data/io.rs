//! Field files and corpus manifests.
//!
//! Field file layout (little-endian):
//!
//! ```text
//! "PFLD" | version u16 | H u32 | W u32 | timestamp i64 | pixel_km f32 | artifact u8 | H·W × f32
//! ```
//!
//! A corpus is a directory of field files plus `manifest.csv` with the
//! columns `filename,split,artifact`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::dataset::Split;
use super::field::PrecipField;
use crate::binio::*;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PFLD";
const VERSION: u16 = 1;
pub const MANIFEST_NAME: &str = "manifest.csv";
pub const FIELD_EXT: &str = "pfld";

pub fn write_field(w: &mut impl Write, field: &PrecipField) -> Result<()> {
    let n = field.size() as u32;
    w.write_all(MAGIC)?;
    put_u16(w, VERSION)?;
    put_u32(w, n)?;
    put_u32(w, n)?;
    put_i64(w, field.timestamp)?;
    put_f32(w, field.pixel_km)?;
    put_u8(w, field.artifact as u8)?;
    let mut buf = Vec::with_capacity(field.values().len() * 4);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<PrecipField> {
    expect_magic(r, MAGIC)?;
    let version = get_u16(r)?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported field version {version}"
        )));
    }
    let h = bounded(get_u32(r)? as u64, "height")?;
    let w = bounded(get_u32(r)? as u64, "width")?;
    let count = h
        .checked_mul(w)
        .filter(|&c| c as u64 <= MAX_DIM)
        .ok_or_else(|| Error::format(format!("grid {h}x{w} overflows")))?;
    if h != w {
        return Err(Error::format(format!("grid must be square, got {h}x{w}")));
    }
    let timestamp = get_i64(r)?;
    let pixel_km = get_f32(r)?;
    let artifact = match get_u8(r)? {
        0 => false,
        1 => true,
        t => return Err(Error::format(format!("bad artifact flag {t}"))),
    };
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * 4 {
        return Err(Error::format(format!(
            "payload holds {} bytes, {h}x{w} grid needs {}",
            payload.len(),
            count * 4
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect();
    let mut field = PrecipField::new(h, values, timestamp, pixel_km)
        .map_err(|e| Error::format(e.to_string()))?;
    field.artifact = artifact;
    Ok(field)
}

pub fn save_field(path: &Path, field: &PrecipField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<PrecipField> {
    let mut r = BufReader::new(File::open(path)?);
    read_field(&mut r).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub filename: String,
    pub split: Split,
    pub artifact: bool,
}

impl ManifestEntry {
    /// Field id: the file name without its extension.
    pub fn id(&self) -> &str {
        self.filename
            .strip_suffix(&format!(".{FIELD_EXT}"))
            .unwrap_or(&self.filename)
    }
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "filename,split,artifact")?;
    for e in entries {
        writeln!(w, "{},{},{}", e.filename, e.split, e.artifact as u8)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "filename,split,artifact" => {}
        other => {
            return Err(Error::format(format!(
                "{}: bad manifest header {other:?}",
                path.display()
            )))
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || {
                Error::format(format!(
                    "{}: malformed manifest row {}: {line}",
                    path.display(),
                    i + 2
                ))
            };
            if cols.len() != 3 || cols[0].is_empty() || cols[0].contains(['/', '\\']) {
                return Err(bad());
            }
            let artifact = match cols[2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            Ok(ManifestEntry {
                filename: cols[0].to_string(),
                split: cols[1].parse().map_err(|_| bad())?,
                artifact,
            })
        })
        .collect()
}

/// A directory of field files described by a manifest.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self> {
        let entries = read_manifest(&dir.join(MANIFEST_NAME))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries,
        })
    }

    /// `(id, field)` pairs of one split, in manifest order.
    pub fn load_split(&self, split: Split) -> Result<Vec<(String, PrecipField)>> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| Ok((e.id().to_string(), load_field(&self.dir.join(&e.filename))?)))
            .collect()
    }
}

/// Every `*.pfld` file of a directory as `(id, field)`, sorted by id.
pub fn load_field_dir(dir: &Path) -> Result<Vec<(String, PrecipField)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == FIELD_EXT))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .expect("has extension")
                .to_string_lossy()
                .into_owned();
            Ok((id, load_field(&p)?))
        })
        .collect()
}
