//! Plain-text and image encodings of fields and intensity profiles.
//!
//! * field dump: CSV `x_um,y_um,re,im`, row-major (x fastest)
//! * intensity dump: CSV `x_um,y_um,intensity`, row-major
//! * camera frames: binary PGM (`P5`), 8 or 16 bit, pixel pitch given
//!   separately; image row `r` maps to grid row `iy = r`
//!
//! All decoders take untrusted bytes and must fail with [`Error::Parse`]
//! rather than panic.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Grid2D, IntensityProfile, ScalarField};

pub const FIELD_HEADER: [&str; 4] = ["x_um", "y_um", "re", "im"];
pub const INTENSITY_HEADER: [&str; 3] = ["x_um", "y_um", "intensity"];

/// Decoded image samples before background handling; values may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn write_field_csv<W: Write>(field: &ScalarField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELD_HEADER).map_err(csv_io)?;
    for ((x, y), v) in field.grid.coords().zip(&field.values) {
        w.write_record(&[x.to_string(), y.to_string(), v.re.to_string(), v.im.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_intensity_csv<W: Write>(profile: &IntensityProfile, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INTENSITY_HEADER).map_err(csv_io)?;
    for ((x, y), v) in profile.grid.coords().zip(&profile.values) {
        w.write_record(&[x.to_string(), y.to_string(), v.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Reads a CSV with the given header into coordinate pairs plus the
/// remaining numeric columns of each row.
fn read_rows(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if found.len() != header.len() || found.iter().zip(header).any(|(a, b)| a != *b) {
        return Err(parse_err(format!("expected header {}, found {:?}", header.join(","), found)));
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != header.len() {
            return Err(parse_err(format!("row {}: expected {} columns", line + 2, header.len())));
        }
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("row {}: bad number {s:?}", line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Recovers the uniform grid from row-major `(x, y)` coordinates.
fn infer_grid(rows: &[Vec<f64>]) -> Result<Grid2D> {
    if rows.is_empty() {
        return Err(parse_err("no data rows"));
    }
    let y_first = rows[0][1];
    let nx = rows.iter().take_while(|r| r[1] == y_first).count();
    if nx < 2 || !rows.len().is_multiple_of(nx) {
        return Err(parse_err(format!("{} rows do not form a rectangular grid", rows.len())));
    }
    let ny = rows.len() / nx;
    if ny < 2 {
        return Err(parse_err("grid needs at least two rows"));
    }
    let x0 = rows[0][0];
    let dx = (rows[nx - 1][0] - x0) / (nx - 1) as f64;
    let dy = (rows[(ny - 1) * nx][1] - y_first) / (ny - 1) as f64;
    let grid = Grid2D::new(nx, ny, dx, dy, x0, y_first).map_err(|e| parse_err(e.to_string()))?;
    let tol_x = 1e-6 * dx;
    let tol_y = 1e-6 * dy;
    for (k, r) in rows.iter().enumerate() {
        let (ix, iy) = (k % nx, k / nx);
        if (r[0] - grid.x(ix)).abs() > tol_x + 1e-12 * r[0].abs()
            || (r[1] - grid.y(iy)).abs() > tol_y + 1e-12 * r[1].abs()
        {
            return Err(parse_err(format!("row {}: coordinates off the uniform grid", k + 2)));
        }
    }
    Ok(grid)
}

/// Parses a field dump (`x_um,y_um,re,im`).
pub fn parse_field_csv(text: &str, wavelength_nm: f64) -> Result<ScalarField> {
    let rows = read_rows(text, &FIELD_HEADER)?;
    let grid = infer_grid(&rows)?;
    let values = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
    ScalarField::new(grid, values, wavelength_nm).map_err(|e| parse_err(e.to_string()))
}

/// Parses an intensity dump (`x_um,y_um,intensity`). Values are returned raw.
pub fn parse_intensity_csv(text: &str) -> Result<RawImage> {
    let rows = read_rows(text, &INTENSITY_HEADER)?;
    let grid = infer_grid(&rows)?;
    Ok(RawImage { grid, values: rows.iter().map(|r| r[2]).collect() })
}

/// Parses a binary portable graymap (`P5`). The grid is centred on the origin
/// with square pixels of `pixel_pitch_um`.
pub fn parse_pgm(bytes: &[u8], pixel_pitch_um: f64) -> Result<RawImage> {
    if !(pixel_pitch_um > 0.0 && pixel_pitch_um.is_finite()) {
        return Err(Error::InvalidArgument(format!("pixel pitch must be positive, got {pixel_pitch_um}")));
    }
    let mut cur = PgmCursor { bytes, pos: 0 };
    if cur.bytes.get(..2) != Some(b"P5") {
        return Err(parse_err("missing P5 magic"));
    }
    cur.pos = 2;
    let width = cur.header_number()?;
    let height = cur.header_number()?;
    let maxval = cur.header_number()?;
    if !(1..=65535).contains(&maxval) {
        return Err(parse_err(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    match cur.bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(parse_err("missing whitespace after maxval")),
    }
    let bpp = if maxval < 256 { 1 } else { 2 };
    let count = width.checked_mul(height).ok_or_else(|| parse_err("image dimensions overflow"))?;
    let need = count.checked_mul(bpp).ok_or_else(|| parse_err("image dimensions overflow"))?;
    let raster = &cur.bytes[cur.pos..];
    if raster.len() < need {
        return Err(parse_err(format!("raster truncated: need {need} bytes, have {}", raster.len())));
    }
    let values: Vec<f64> = if bpp == 1 {
        raster[..need].iter().map(|&b| b as usize).collect::<Vec<_>>()
    } else {
        raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as usize).collect()
    }
    .into_iter()
    .map(|v| if v > maxval { Err(parse_err(format!("sample {v} exceeds maxval {maxval}"))) } else { Ok(v as f64) })
    .collect::<Result<_>>()?;
    let grid = crate::field::make_grid(width as f64 * pixel_pitch_um, height as f64 * pixel_pitch_um, width, height)
        .map_err(|e| parse_err(e.to_string()))?;
    Ok(RawImage { grid, values })
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn header_number(&mut self) -> Result<usize> {
        let start = self.pos;
        self.skip_space_and_comments();
        if self.pos == start {
            return Err(parse_err("expected whitespace in header"));
        }
        let digits_start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits = &self.bytes[digits_start..self.pos];
        if digits.is_empty() || digits.len() > 9 {
            return Err(parse_err("bad header number"));
        }
        Ok(digits.iter().fold(0usize, |acc, d| acc * 10 + (d - b'0') as usize))
    }
}

/// Encodes 8-bit samples as PGM; used to build test frames and corpora.
pub fn encode_pgm8(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Decodes a camera frame in either supported encoding (sniffed from the
/// leading bytes), subtracts the background (median of the outer 5% margin)
/// and clamps negative samples to zero.
pub fn decode_intensity_image(bytes: &[u8], pixel_pitch_um: f64) -> Result<IntensityProfile> {
    if !(pixel_pitch_um > 0.0 && pixel_pitch_um.is_finite()) {
        return Err(Error::InvalidArgument(format!("pixel pitch must be positive, got {pixel_pitch_um}")));
    }
    let raw = if bytes.starts_with(b"P5") {
        parse_pgm(bytes, pixel_pitch_um)?
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| parse_err("CSV is not valid UTF-8"))?;
        parse_intensity_csv(text)?
    };
    let background = margin_median(&raw);
    let values = raw.values.iter().map(|v| (v - background).max(0.0)).collect();
    IntensityProfile::new(raw.grid, values)
}

/// Median over samples within 5% of any edge (at least one sample deep).
fn margin_median(raw: &RawImage) -> f64 {
    let g = &raw.grid;
    let mx = ((g.nx as f64 * 0.05).ceil() as usize).max(1);
    let my = ((g.ny as f64 * 0.05).ceil() as usize).max(1);
    let mut margin: Vec<f64> = (0..g.ny)
        .flat_map(|iy| (0..g.nx).map(move |ix| (ix, iy)))
        .filter(|&(ix, iy)| ix < mx || iy < my || ix >= g.nx - mx || iy >= g.ny - my)
        .map(|(ix, iy)| raw.values[g.index(ix, iy)])
        .collect();
    margin.sort_by(f64::total_cmp);
    let n = margin.len();
    if n % 2 == 1 {
        margin[n / 2]
    } else {
        0.5 * (margin[n / 2 - 1] + margin[n / 2])
    }
}

/// Reads a camera frame from disk, see [`decode_intensity_image`].
pub fn load_intensity_image(path: impl AsRef<Path>, pixel_pitch_um: f64) -> Result<IntensityProfile> {
    if !(pixel_pitch_um > 0.0 && pixel_pitch_um.is_finite()) {
        return Err(Error::InvalidArgument(format!("pixel pitch must be positive, got {pixel_pitch_um}")));
    }
    let bytes = std::fs::read(path)?;
    decode_intensity_image(&bytes, pixel_pitch_um)
}
