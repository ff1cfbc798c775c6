//! File formats: CSV tables, 16-bit PGM images and atomic writes.

use std::io::Write;
use std::path::Path;

use wavesense::features::WaveletCoeffMatrix;
use wavesense::imaging::BoundaryImage;
use wavesense::nalgebra::DMatrix;
use wavesense::wavelet::WaveletGrid;

use crate::config::PgmEncoding;
use crate::CliError;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn csv_bytes(header: Option<&[&str]>, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| CliError::Format(e.to_string()))
}

fn read_records(path: &Path, headers: bool) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(headers)
        .from_path(path)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    r.records().collect::<Result<Vec<_>, _>>().map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T, CliError> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| CliError::Format(format!("{}: line {line}, column {}: bad value", path.display(), i + 1)))
}

/// Dense matrix, one row per line, no header.
pub fn matrix_csv(m: &DMatrix<f64>) -> Result<Vec<u8>, CliError> {
    csv_bytes(None, (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect()))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let recs = read_records(path, false)?;
    let cols = recs.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(recs.len() * cols);
    for rec in &recs {
        if rec.len() != cols {
            return Err(CliError::Format(format!("{}: ragged rows", path.display())));
        }
        for i in 0..cols {
            data.push(field::<f64>(rec, i, path)?);
        }
    }
    Ok(DMatrix::from_row_slice(recs.len(), cols, &data))
}

const WAVELET_HEADER: [&str; 7] = ["row", "col", "n1", "n2", "m1", "m2", "value"];

/// Nonzero entries with both linear and lattice indices.
pub fn wavelet_csv(x: &WaveletCoeffMatrix) -> Result<Vec<u8>, CliError> {
    let g = x.grid();
    csv_bytes(
        Some(&WAVELET_HEADER),
        x.iter().map(|(r, c, v)| {
            let (n, m) = (g.index(r), g.index(c));
            vec![
                r.to_string(),
                c.to_string(),
                n[0].to_string(),
                n[1].to_string(),
                m[0].to_string(),
                m[1].to_string(),
                v.to_string(),
            ]
        }),
    )
}

/// Reads a wavelet matrix written by [`wavelet_csv`], checking the lattice
/// indices against `grid`.
pub fn read_wavelet_csv(path: &Path, grid: &WaveletGrid) -> Result<WaveletCoeffMatrix, CliError> {
    let recs = read_records(path, true)?;
    let mut trip = Vec::with_capacity(recs.len());
    for rec in &recs {
        let (r, c): (usize, usize) = (field(rec, 0, path)?, field(rec, 1, path)?);
        let n = [field::<i64>(rec, 2, path)?, field(rec, 3, path)?];
        let m = [field::<i64>(rec, 4, path)?, field(rec, 5, path)?];
        if grid.linear(n) != Some(r) || grid.linear(m) != Some(c) {
            return Err(CliError::Format(format!(
                "{}: entry ({r}, {c}) does not match the configured lattice",
                path.display()
            )));
        }
        trip.push((r, c, field(rec, 6, path)?));
    }
    Ok(WaveletCoeffMatrix::from_triplets(grid.clone(), trip)?)
}

/// Raw intensities as `n1,n2,value` (pixel indices).
pub fn image_csv(img: &BoundaryImage) -> Result<Vec<u8>, CliError> {
    let w = img.dims[1];
    csv_bytes(
        Some(&["n1", "n2", "value"]),
        img.values.iter().enumerate().map(|(i, v)| vec![(i / w).to_string(), (i % w).to_string(), v.to_string()]),
    )
}

/// 16-bit PGM scaled so the maximum maps to 65535. Rows run along the second
/// index from the top, so the image reads like the `(x, y)` plane.
pub fn pgm(img: &BoundaryImage, encoding: PgmEncoding) -> Vec<u8> {
    let [w, h] = img.dims;
    let max = img.max();
    let level = |i: usize, j: usize| -> u16 {
        if max > 0.0 {
            (img.get(i, j) / max * 65535.0).round() as u16
        } else {
            0
        }
    };
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{w} {h}\n65535\n").into_bytes();
    for row in (0..h).rev() {
        let vals = (0..w).map(|col| level(col, row));
        match encoding {
            PgmEncoding::Ascii => {
                let line: Vec<String> = vals.map(|v| v.to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
            PgmEncoding::Binary => {
                for v in vals {
                    out.extend_from_slice(&v.to_be_bytes());
                }
            }
        }
    }
    out
}

/// Parses a 16-bit PGM back into `(width, height, levels)` in file order.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>), CliError> {
    let bad = |m: &str| CliError::Format(format!("PGM: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?.to_string());
    }
    let (w, h): (usize, usize) =
        (fields[1].parse().map_err(|_| bad("width"))?, fields[2].parse().map_err(|_| bad("height"))?);
    if fields[3] != "65535" {
        return Err(bad("expected maxval 65535"));
    }
    let body = &bytes[pos + 1..];
    let levels = match fields[0].as_str() {
        "P5" => {
            if body.len() != 2 * w * h {
                return Err(bad("binary payload size"));
            }
            body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        }
        "P2" => std::str::from_utf8(body)
            .map_err(|_| bad("ascii payload"))?
            .split_ascii_whitespace()
            .map(|t| t.parse().map_err(|_| bad("ascii value")))
            .collect::<Result<Vec<u16>, _>>()?,
        _ => return Err(bad("unknown magic")),
    };
    if levels.len() != w * h {
        return Err(bad("payload size"));
    }
    Ok((w, h, levels))
}

pub fn table_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    csv_bytes(Some(header), rows)
}
