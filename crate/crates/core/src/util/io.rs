//! Raw array persistence and CSV helpers shared by the snapshot store,
//! the surrogate archive, and the report writers.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::Result;

/// Writes a float slice as raw little-endian f64, row-major.
pub fn write_f64_raw(path: &Path, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Reads a raw little-endian f64 array written by [`write_f64_raw`].
pub fn read_f64_raw(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(crate::Error::Data(format!(
            "{} has length {} not divisible by 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Minimal CSV writer. Fields are written verbatim; callers must not embed
/// commas or newlines in fields (all our exports are numeric or enum tags).
pub struct CsvWriter {
    out: fs::File,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut out = fs::File::create(path)?;
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = fields.into_iter().map(|f| f.as_ref().to_string()).collect();
        writeln!(self.out, "{}", joined.join(","))?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation; keeps CSV output bit-stable.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let dir = std::env::temp_dir().join("hullopt_io_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.f64");
        let data = vec![0.0, -1.5, f64::MAX, 1e-300];
        write_f64_raw(&path, &data).unwrap();
        assert_eq!(read_f64_raw(&path).unwrap(), data);
    }
}
