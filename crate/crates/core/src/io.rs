//! Sample files: a little-endian binary column with a 16-byte header, or CSV
//! with one value per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::Sample;

pub const MAGIC: &[u8; 4] = b"DSEL";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_binary<W: Write>(sample: &Sample, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(sample.len() as u64).to_le_bytes())?;
    for v in sample.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Sample> {
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::SampleFormat("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::SampleFormat("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::SampleFormat(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() as u64 != n.saturating_mul(8) {
        return Err(Error::SampleFormat(format!(
            "header announces {n} values but body holds {} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Sample::new(values)
}

pub fn write_csv<W: Write>(sample: &Sample, mut out: W) -> Result<()> {
    for v in sample.values() {
        writeln!(out, "{v:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Sample> {
    let mut values = Vec::new();
    for (line_no, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            Error::SampleFormat(format!("line {}: cannot parse '{trimmed}'", line_no + 1))
        })?;
        values.push(v);
    }
    Sample::new(values)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes CSV for `.csv` paths and the binary format otherwise.
pub fn save_sample(sample: &Sample, path: &Path) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_csv(sample, out)
    } else {
        write_binary(sample, out)
    }
}

/// Reads either format; binary files are recognised by their magic.
pub fn load_sample(path: &Path) -> Result<Sample> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_csv(bytes.as_slice())
    }
}
