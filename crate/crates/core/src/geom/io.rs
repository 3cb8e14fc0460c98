//! ASCII grid raster files and point pattern CSV files.
//!
//! Raster format: six header lines `ncols`, `nrows`, `xmin`, `ymin`, `xmax`,
//! `ymax` followed by `nrows` rows of `ncols` space-separated reals, row 0 at
//! the top of the window (maximum y). Pattern format: CSV with header `x,y`
//! and one event per row. Both use LF newlines and decimal points.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point, PointPattern, RasterCovariate, Window};

/// Supported raster file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    AsciiGrid,
}

pub fn load_raster(path: impl AsRef<Path>, format: RasterFormat) -> Result<RasterCovariate> {
    match format {
        RasterFormat::AsciiGrid => {
            let file = File::open(path.as_ref())?;
            parse_raster(BufReader::new(file))
        }
    }
}

pub fn save_raster(raster: &RasterCovariate, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_raster(raster, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_raster(raster: &RasterCovariate, w: &mut impl Write) -> Result<()> {
    let win = raster.window();
    writeln!(w, "ncols {}", raster.ncols())?;
    writeln!(w, "nrows {}", raster.nrows())?;
    writeln!(w, "xmin {}", win.xmin())?;
    writeln!(w, "ymin {}", win.ymin())?;
    writeln!(w, "xmax {}", win.xmax())?;
    writeln!(w, "ymax {}", win.ymax())?;
    for row in 0..raster.nrows() {
        let mut line = String::new();
        for col in 0..raster.ncols() {
            if col > 0 {
                line.push(' ');
            }
            // nine significant digits
            line.push_str(&format!("{:.8e}", raster.get(row, col)));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn parse_raster(reader: impl BufRead) -> Result<RasterCovariate> {
    let mut lines = reader.lines().enumerate();

    let mut header = |key: &str| -> Result<(usize, f64)> {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing header line '{key}'")))?;
        let line = line?;
        let lineno = idx + 1;
        let mut parts = line.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| Error::parse(lineno, "empty header line"))?;
        if name != key {
            return Err(Error::parse(
                lineno,
                format!("expected header '{key}', found '{name}'"),
            ));
        }
        let value: f64 = parts
            .next()
            .ok_or_else(|| Error::parse(lineno, format!("header '{key}' has no value")))?
            .parse()
            .map_err(|_| Error::parse(lineno, format!("header '{key}' value is not numeric")))?;
        if parts.next().is_some() {
            return Err(Error::parse(
                lineno,
                format!("header '{key}' has trailing tokens"),
            ));
        }
        Ok((lineno, value))
    };

    let (l, ncols_f) = header("ncols")?;
    if ncols_f.fract() != 0.0 || ncols_f < 1.0 {
        return Err(Error::parse(l, "ncols must be a positive integer"));
    }
    let (l, nrows_f) = header("nrows")?;
    if nrows_f.fract() != 0.0 || nrows_f < 1.0 {
        return Err(Error::parse(l, "nrows must be a positive integer"));
    }
    let ncols = ncols_f as usize;
    let nrows = nrows_f as usize;
    let (_, xmin) = header("xmin")?;
    let (_, ymin) = header("ymin")?;
    let (l, xmax) = header("xmax")?;
    if xmax <= xmin {
        return Err(Error::parse(l, "xmax must exceed xmin"));
    }
    let (l, ymax) = header("ymax")?;
    if ymax <= ymin {
        return Err(Error::parse(l, "ymax must exceed ymin"));
    }
    let window = Window::new(xmin, xmax, ymin, ymax)?;

    let mut values = Vec::with_capacity(ncols * nrows);
    let mut rows_read = 0usize;
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if rows_read == nrows {
            return Err(Error::parse(lineno, "more data rows than nrows"));
        }
        let mut count = 0usize;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(lineno, format!("cell value '{tok}' is not numeric")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("cell value '{tok}' is not finite")));
            }
            values.push(v);
            count += 1;
        }
        if count != ncols {
            return Err(Error::parse(
                lineno,
                format!("row has {count} values, expected {ncols}"),
            ));
        }
        rows_read += 1;
    }
    if rows_read != nrows {
        return Err(Error::parse(
            0,
            format!("file has {rows_read} data rows, expected {nrows}"),
        ));
    }
    RasterCovariate::new(window, ncols, nrows, values)
}

/// Load a point pattern CSV. `window` is the declared observation window;
/// points outside it are rejected with their row listed.
pub fn load_pattern(path: impl AsRef<Path>, window: Window) -> Result<PointPattern> {
    let file = File::open(path.as_ref())?;
    parse_pattern(BufReader::new(file), window)
}

pub fn parse_pattern(reader: impl BufRead, window: Window) -> Result<PointPattern> {
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty file, expected 'x,y' header"))?;
    let first = first?;
    if first.trim() != "x,y" {
        return Err(Error::parse(1, format!("expected header 'x,y', found '{}'", first.trim())));
    }

    let mut points = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let x: f64 = parts
            .next()
            .ok_or_else(|| Error::parse(lineno, "missing x field"))?
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, "x is not numeric"))?;
        let y: f64 = parts
            .next()
            .ok_or_else(|| Error::parse(lineno, "missing y field"))?
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, "y is not numeric"))?;
        if parts.next().is_some() {
            return Err(Error::parse(lineno, "row has more than two fields"));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::parse(lineno, "coordinates must be finite"));
        }
        points.push(Point::new(x, y));
    }
    PointPattern::new(points, window)
}

pub fn save_pattern(pattern: &PointPattern, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_pattern(pattern, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_pattern(pattern: &PointPattern, w: &mut impl Write) -> Result<()> {
    writeln!(w, "x,y")?;
    for p in pattern.points() {
        writeln!(w, "{},{}", p.x, p.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Cursor;

    fn raster_2x2() -> &'static str {
        "ncols 2\nnrows 2\nxmin 0\nymin 0\nxmax 1\nymax 1\n1 2\n3 4\n"
    }

    #[test]
    fn parse_simple_grid() {
        let r = parse_raster(Cursor::new(raster_2x2())).unwrap();
        assert_eq!(r.ncols(), 2);
        assert_relative_eq!(r.cell_width(), 0.5);
        assert_relative_eq!(r.get(0, 1), 2.0);
        assert_relative_eq!(r.get(1, 0), 3.0);
    }

    #[test]
    fn parse_rejects_zero_ncols() {
        let text = "ncols 0\nnrows 2\nxmin 0\nymin 0\nxmax 1\nymax 1\n";
        let err = parse_raster(Cursor::new(text)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_row_length_mismatch() {
        let text = "ncols 2\nnrows 2\nxmin 0\nymin 0\nxmax 1\nymax 1\n1 2 3\n4 5\n";
        let err = parse_raster(Cursor::new(text)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_non_numeric_cell() {
        let text = "ncols 2\nnrows 1\nxmin 0\nymin 0\nxmax 1\nymax 1\n1 abc\n";
        let err = parse_raster(Cursor::new(text)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 7"), "{msg}");
        assert!(msg.contains("abc"), "{msg}");
    }

    #[test]
    fn parse_rejects_nan_cell() {
        let text = "ncols 2\nnrows 1\nxmin 0\nymin 0\nxmax 1\nymax 1\n1 NaN\n";
        assert!(parse_raster(Cursor::new(text)).is_err());
    }

    #[test]
    fn raster_roundtrip_is_byte_identical() {
        // write -> read -> write must reproduce the first file exactly
        let r = RasterCovariate::from_fn(Window::unit_square(), 100, 100, |x, y| {
            (7.3 * x).sin() * (11.1 * y).cos() + 0.1 * x
        })
        .unwrap();
        let mut first = Vec::new();
        write_raster(&r, &mut first).unwrap();
        let reread = parse_raster(Cursor::new(&first)).unwrap();
        let mut second = Vec::new();
        write_raster(&reread, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(reread.ncols(), 100);
        assert_eq!(reread.nrows(), 100);
    }

    #[test]
    fn pattern_roundtrip() {
        let w = Window::unit_square();
        let text = "x,y\n0.5,0.5\n0.1,0.9\n";
        let p = parse_pattern(Cursor::new(text), w).unwrap();
        assert_eq!(p.len(), 2);
        assert_relative_eq!(p.points()[1].y, 0.9);
        let mut out = Vec::new();
        write_pattern(&p, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn pattern_empty_body_is_legal() {
        let p = parse_pattern(Cursor::new("x,y\n"), Window::unit_square()).unwrap();
        assert_eq!(p.len(), 0);
    }

    #[test]
    fn pattern_missing_header() {
        let err = parse_pattern(Cursor::new("0.5,0.5\n"), Window::unit_square()).unwrap_err();
        assert!(err.to_string().contains("x,y"), "{err}");
    }

    #[test]
    fn pattern_rejects_nan_and_outside() {
        let w = Window::unit_square();
        assert!(parse_pattern(Cursor::new("x,y\nNaN,0.5\n"), w).is_err());
        let err = parse_pattern(Cursor::new("x,y\n1.5,0.5\n"), w).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    }

    #[test]
    fn file_roundtrip_via_tempdir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.asc");
        let r = parse_raster(Cursor::new(raster_2x2())).unwrap();
        save_raster(&r, &path).unwrap();
        let reread = load_raster(&path, RasterFormat::AsciiGrid).unwrap();
        assert_eq!(reread.values(), r.values());
    }
}
