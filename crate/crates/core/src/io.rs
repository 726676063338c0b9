//! CSV readers and writers for spectra.
//!
//! Single spectra use a `wavenumber,intensity` header; repeat stacks use
//! `wavenumber,intensity_1,…,intensity_R`. Numbers are written in Rust's
//! shortest round-trip form, so write → read is lossless.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{Spectrum, WavenumberGrid};

fn parse_field(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: '{s}' is not a number")))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Read a header row plus numeric rows; returns the header and columns.
fn read_columns<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header.is_empty() {
        return Err(Error::Parse("missing header row".into()));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!("line {}: expected {} fields, found {}", i + 2, header.len(), rec.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            cols[c].push(parse_field(field, i + 2)?);
        }
    }
    Ok((header, cols))
}

pub fn read_spectrum<R: Read>(reader: R) -> Result<Spectrum> {
    let (header, mut cols) = read_columns(reader)?;
    if header.len() != 2 || header[0] != "wavenumber" {
        return Err(Error::Parse(format!("expected header 'wavenumber,intensity', found '{}'", header.join(","))));
    }
    let intensity = cols.pop().unwrap_or_default();
    let grid = WavenumberGrid::new(cols.pop().unwrap_or_default())?;
    Spectrum::new(grid, intensity)
}

/// Read either layout; a two-column file yields a single repeat.
pub fn read_repeats<R: Read>(reader: R) -> Result<Vec<Spectrum>> {
    let (header, mut cols) = read_columns(reader)?;
    if header.len() < 2 || header[0] != "wavenumber" {
        return Err(Error::Parse("first column must be 'wavenumber'".into()));
    }
    let rest = cols.split_off(1);
    let grid = WavenumberGrid::new(cols.pop().unwrap_or_default())?;
    rest.into_iter().map(|c| Spectrum::new(grid.clone(), c)).collect()
}

pub fn write_spectrum<W: Write>(writer: W, s: &Spectrum) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["wavenumber", "intensity"]).map_err(csv_err)?;
    for (x, y) in s.wavenumbers().iter().zip(s.intensity()) {
        w.write_record([x.to_string(), y.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_repeats<W: Write>(writer: W, repeats: &[Spectrum]) -> Result<()> {
    let first = repeats.first().ok_or_else(|| Error::Empty("no spectra to write".into()))?;
    if repeats.iter().any(|r| r.grid() != first.grid()) {
        return Err(Error::IncompatibleGrid("repeats must share one grid".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["wavenumber".to_string()];
    header.extend((1..=repeats.len()).map(|i| format!("intensity_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, x) in first.wavenumbers().iter().enumerate() {
        let mut row = vec![x.to_string()];
        row.extend(repeats.iter().map(|r| r.intensity()[i].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_spectrum(path: &Path) -> Result<Spectrum> {
    read_spectrum(File::open(path)?)
}

pub fn load_repeats(path: &Path) -> Result<Vec<Spectrum>> {
    read_repeats(File::open(path)?)
}

pub fn save_spectrum(path: &Path, s: &Spectrum) -> Result<()> {
    let mut buf = Vec::new();
    write_spectrum(&mut buf, s)?;
    write_atomic(path, &buf)
}

pub fn save_repeats(path: &Path, repeats: &[Spectrum]) -> Result<()> {
    let mut buf = Vec::new();
    write_repeats(&mut buf, repeats)?;
    write_atomic(path, &buf)
}

/// Write through a temporary sibling and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    write_atomic(path, &buf)
}

/// First 8 bytes (hex) of the SHA-256 of the compact JSON serialization.
pub fn json_hash<T: serde::Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("value serializes to JSON");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Spectrum {
        let g = WavenumberGrid::new(vec![400.0, 400.1, 1e3 / 3.0 + 500.0]).unwrap();
        Spectrum::new(g, vec![0.1 + 0.2, -1e-300, 12345.678901234567]).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let s = sample();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &s).unwrap();
        let back = read_spectrum(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn repeats_round_trip() {
        let a = sample();
        let b = a.with_intensity(vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_repeats(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("wavenumber,intensity_1,intensity_2\n"));
        assert_eq!(read_repeats(buf.as_slice()).unwrap(), vec![a, b]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(read_spectrum("wavenumber,intensity\n1,abc\n".as_bytes()), Err(Error::Parse(_))));
        assert!(read_spectrum("x,y\n1,2\n2,3\n".as_bytes()).is_err());
        assert!(read_spectrum("wavenumber,intensity\n2,1\n1,1\n".as_bytes()).is_err());
        assert!(read_spectrum("wavenumber,intensity\n1,1,1\n2,2\n".as_bytes()).is_err());
    }

    #[test]
    fn atomic_write_creates_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/s.csv");
        save_spectrum(&p, &sample()).unwrap();
        assert_eq!(load_spectrum(&p).unwrap(), sample());
        assert!(!dir.path().join("a/b/s.csv.tmp").exists());
    }
}
