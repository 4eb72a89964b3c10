//! Readers and writers for the tabular artifact formats.
//!
//! Input tables are headerless CSV so that a file is nothing but its rows:
//! coefficients as `ell,m,value`, spectra as `ell,A`, noise multipliers as
//! `ell,m,eta`. Missing triangle entries are zero; duplicate positions are
//! rejected. Report artifacts written for plotting carry a header row and
//! are not meant to be read back.
//!
//! Every writer formats floats with the shortest round-trip representation,
//! so save then load is the identity and repeated runs produce byte-equal
//! files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sphere_heat::{Coeffs, Degree, HarmonicCoeffs, Spectrum, Time};

/// File-level failure with enough context to point at the offending row.
#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path} line {line}: duplicate entry for degree {ell}, order {m}")]
    Duplicate {
        path: PathBuf,
        line: u64,
        ell: usize,
        m: isize,
    },
    #[error("{path} line {line}: duplicate entry for degree {ell}")]
    DuplicateDegree {
        path: PathBuf,
        line: u64,
        ell: usize,
    },
    #[error("{path}: {reason}")]
    BadGrid { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, FileError>;

fn io_err(path: &Path, source: std::io::Error) -> FileError {
    FileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, line: u64, reason: impl Into<String>) -> FileError {
    FileError::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

/// Iterates the rows of a headerless CSV file, enforcing a fixed field
/// count and handing each row to `consume` with its 1-based line number.
pub(crate) fn for_each_row(
    path: &Path,
    fields: usize,
    mut consume: impl FnMut(u64, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => io_err(path, source),
            other => malformed(path, 0, format!("{other:?}")),
        })?;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, csv::Position::line);
            malformed(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() != fields {
            return Err(malformed(
                path,
                line,
                format!("expected {fields} fields, got {}", record.len()),
            ));
        }
        consume(line, &record)?;
    }
    Ok(())
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    name: &str,
    text: &str,
) -> Result<T> {
    text.parse().map_err(|_| {
        malformed(
            path,
            line,
            format!("field `{name}`: cannot parse {text:?}"),
        )
    })
}

/// Loads a coefficient triangle from `ell,m,value` rows. Missing entries
/// are zero; the result's degree is the highest `ell` seen (zero for an
/// empty file). Duplicate `(ell, m)` rows and orders outside the triangle
/// are errors.
pub fn load_coeffs(path: &Path) -> Result<Coeffs> {
    let mut rows: Vec<(u64, Degree, f64)> = Vec::new();
    let mut degree_max = 0usize;
    for_each_row(path, 3, |line, record| {
        let ell: usize = parse_field(path, line, "ell", &record[0])?;
        let m: isize = parse_field(path, line, "m", &record[1])?;
        let value: f64 = parse_field(path, line, "value", &record[2])?;
        if m.unsigned_abs() > ell {
            return Err(malformed(
                path,
                line,
                format!("order {m} outside degree {ell}"),
            ));
        }
        if !value.is_finite() {
            return Err(malformed(path, line, format!("value {value} is not finite")));
        }
        degree_max = degree_max.max(ell);
        rows.push((line, Degree::new(ell, m), value));
        Ok(())
    })?;

    let mut c = HarmonicCoeffs::zeros(degree_max);
    let mut seen = vec![false; c.len()];
    for (line, d, value) in rows {
        if seen[d.index()] {
            return Err(FileError::Duplicate {
                path: path.to_path_buf(),
                line,
                ell: d.ell(),
                m: d.m(),
            });
        }
        seen[d.index()] = true;
        c.values_mut()[d.index()] = value;
    }
    Ok(c)
}

/// Writes every triangle entry, zeros included, as `ell,m,value` rows in
/// mode-index order. Loading the file restores the coefficients and their
/// degree exactly.
pub fn save_coeffs(path: &Path, c: &Coeffs) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for (d, value) in c.iter() {
        writeln!(w, "{},{},{}", d.ell(), d.m(), value).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Loads an angular power spectrum from `ell,A` rows. Degrees may come in
/// any order; missing degrees below the maximum get `A = 0`; duplicates are
/// errors. Negative or non-finite amplitudes are rejected.
pub fn load_spectrum(path: &Path) -> Result<Spectrum> {
    let mut rows: Vec<(u64, usize, f64)> = Vec::new();
    let mut degree_max = 0usize;
    for_each_row(path, 2, |line, record| {
        let ell: usize = parse_field(path, line, "ell", &record[0])?;
        let a: f64 = parse_field(path, line, "A", &record[1])?;
        degree_max = degree_max.max(ell);
        rows.push((line, ell, a));
        Ok(())
    })?;
    if rows.is_empty() {
        return Err(FileError::Invalid {
            path: path.to_path_buf(),
            reason: "spectrum file has no rows".into(),
        });
    }

    let mut a = vec![0.0; degree_max + 1];
    let mut seen = vec![false; degree_max + 1];
    for (line, ell, value) in rows {
        if seen[ell] {
            return Err(FileError::DuplicateDegree {
                path: path.to_path_buf(),
                line,
                ell,
            });
        }
        seen[ell] = true;
        a[ell] = value;
    }
    Spectrum::new(a).map_err(|e| FileError::Invalid {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes `ell,A` rows for every degree up to the spectrum's maximum.
pub fn save_spectrum(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for (ell, a) in spectrum.values().iter().enumerate() {
        writeln!(w, "{ell},{a}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Loads noise multipliers from `ell,m,eta` rows with the same triangle
/// semantics as [`load_coeffs`]: missing entries are zero, duplicates are
/// errors. Returns the file's degree and the triangle in mode-index order.
pub fn load_multipliers(path: &Path) -> Result<(usize, Vec<f64>)> {
    let c = load_coeffs(path)?;
    Ok((c.degree_max(), c.values().to_vec()))
}

fn time_to_f64(t: Time) -> f64 {
    *t.numer() as f64 / *t.denom() as f64
}

/// Writes a simulated path as long-form `tau,ell,m,value` rows, one row per
/// breakpoint and mode, breakpoints ascending and modes in index order.
pub fn save_path_csv(path: &Path, sample: &sphere_heat::Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for (k, state) in sample.states().iter().enumerate() {
        let tau = time_to_f64(sample.tau()[k]);
        for (d, value) in state.iter() {
            writeln!(w, "{tau},{},{},{}", d.ell(), d.m(), value).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// A path loaded back from disk: breakpoint times and the coefficient
/// triangle at each, in mode-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub degree_max: usize,
    pub states: Vec<(f64, Vec<f64>)>,
}

/// Writes a simulated path in the compact binary layout, little-endian
/// throughout:
///
/// ```text
/// u64  degree_max L
/// u64  number of stored states S (breakpoints, t = 0 included)
/// then S blocks, each: f64 tau, (L+1)^2 f64 coefficients in mode-index order
/// ```
pub fn save_path_binary(path: &Path, sample: &sphere_heat::Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let l = sample
        .states()
        .first()
        .map_or(0, |s| s.degree_max());
    w.write_all(&(l as u64).to_le_bytes())
        .and_then(|()| w.write_all(&(sample.states().len() as u64).to_le_bytes()))
        .map_err(|e| io_err(path, e))?;
    for (k, state) in sample.states().iter().enumerate() {
        w.write_all(&time_to_f64(sample.tau()[k]).to_le_bytes())
            .map_err(|e| io_err(path, e))?;
        for &value in state.values() {
            w.write_all(&value.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads the binary layout written by [`save_path_binary`].
pub fn load_path_binary(path: &Path) -> Result<PathRecord> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let mut offset = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = offset.checked_add(n).filter(|&e| e <= bytes.len());
        let end = end.ok_or_else(|| FileError::Invalid {
            path: path.to_path_buf(),
            reason: format!("truncated at byte {offset}"),
        })?;
        let slice = &bytes[offset..end];
        offset = end;
        Ok(slice)
    };
    let degree_max = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let num_states = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let dim = (degree_max + 1) * (degree_max + 1);
    let mut states = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let tau = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut coeffs = Vec::with_capacity(dim);
        for _ in 0..dim {
            coeffs.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        states.push((tau, coeffs));
    }
    if offset != bytes.len() {
        return Err(FileError::Invalid {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after the last state", bytes.len() - offset),
        });
    }
    Ok(PathRecord { degree_max, states })
}
