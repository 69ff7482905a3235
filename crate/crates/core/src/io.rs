//! Serialization of paths, densities, ensembles and reports.
//!
//! Text output uses C's `%.17g`, which round-trips every `f64`. Ensembles can
//! also be written as an `MVFB` block: the magic, a little-endian `u16`
//! version, a little-endian `u32` header length, a JSON header describing the
//! arrays, then the arrays as little-endian `f64` in row-major order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Density, Path, TimeGrid};
use crate::multiscale::{Ensemble, LawSummary};

pub const BLOCK_MAGIC: &[u8; 4] = b"MVFB";
pub const BLOCK_VERSION: u16 = 1;

/// `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    fmt_g(x, 17)
}

/// `printf("%.<prec>g", x)` for `prec ≥ 1`.
pub fn fmt_g(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let prec = prec.max(1);
    let sci = format!("{:.*e}", prec - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= prec as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    } else {
        let decimals = (prec as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

/// Path as CSV with columns `t, x_1, …, x_d`, one row per node.
pub fn write_path_csv<W: Write>(w: W, path: &Path<f64>, prefix: &str) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("t".to_string()).chain(numbered(prefix, path.dim())).collect();
    out.write_record(&header).map_err(csv_err)?;
    for k in 0..path.len() {
        let row = std::iter::once(path.grid().node(k)).chain(path.at(k).iter().copied()).map(fmt_g17);
        out.write_record(row).map_err(csv_err)?;
    }
    finish(out)
}

/// Cell-wise density as CSV: `t` is the left end of each cell.
pub fn write_density_csv<W: Write>(w: W, d: &Density<f64>, prefix: &str) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("t".to_string()).chain(numbered(prefix, d.dim())).collect();
    out.write_record(&header).map_err(csv_err)?;
    for k in 0..d.cells() {
        let row = std::iter::once(d.grid().node(k)).chain(d.at(k).iter().copied()).map(fmt_g17);
        out.write_record(row).map_err(csv_err)?;
    }
    finish(out)
}

/// Numeric CSV with a header line; returns the header and the rows.
pub fn read_numeric_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Config(format!("csv line {}: '{f}' is not a number", i + 2))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Density from a `t, g_1, …` CSV with one row per cell of `grid`.
pub fn read_density_csv<R: Read>(r: R, grid: TimeGrid<f64>) -> Result<Density<f64>> {
    let (header, rows) = read_numeric_csv(r)?;
    if header.len() < 2 {
        return Err(Error::Config("density csv needs a time column and at least one value column".into()));
    }
    if rows.len() != grid.steps() {
        return Err(Error::Dimension(format!("density csv has {} rows, the grid has {} cells", rows.len(), grid.steps())));
    }
    let dim = header.len() - 1;
    let values = rows.into_iter().flat_map(|row| row.into_iter().skip(1)).collect();
    Density::from_values(grid, dim, values)
}

/// Path from a `t, x_1, …` CSV with one row per node of `grid`.
pub fn read_path_csv<R: Read>(r: R, grid: TimeGrid<f64>) -> Result<Path<f64>> {
    let (header, rows) = read_numeric_csv(r)?;
    if header.len() < 2 {
        return Err(Error::Config("path csv needs a time column and at least one value column".into()));
    }
    if rows.len() != grid.steps() + 1 {
        return Err(Error::Dimension(format!("path csv has {} rows, the grid has {} nodes", rows.len(), grid.steps() + 1)));
    }
    let dim = header.len() - 1;
    let values = rows.into_iter().flat_map(|row| row.into_iter().skip(1)).collect();
    Path::from_values(grid, dim, values)
}

/// Ensemble in long format: `particle, t, x_1, …`.
pub fn write_ensemble_csv<W: Write>(w: W, e: &Ensemble<f64>, prefix: &str) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> =
        ["particle".to_string(), "t".to_string()].into_iter().chain(numbered(prefix, e.dim())).collect();
    out.write_record(&header).map_err(csv_err)?;
    for p in 0..e.particles() {
        for k in 0..=e.grid().steps() {
            let row = std::iter::once(p.to_string())
                .chain(std::iter::once(e.grid().node(k)).chain(e.at(p, k).iter().copied()).map(fmt_g17));
            out.write_record(row).map_err(csv_err)?;
        }
    }
    finish(out)
}

/// Per-node law summaries: `t, mean_1, …, second_moment`.
pub fn write_law_csv<W: Write>(w: W, grid: &TimeGrid<f64>, law: &[LawSummary<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = law.first().map_or(0, |l| l.mean.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(numbered("mean", dim))
        .chain(std::iter::once("second_moment".to_string()))
        .collect();
    out.write_record(&header).map_err(csv_err)?;
    for (k, l) in law.iter().enumerate() {
        let row = std::iter::once(grid.node(k))
            .chain(l.mean.iter().copied())
            .chain(std::iter::once(l.second_moment))
            .map(fmt_g17);
        out.write_record(row).map_err(csv_err)?;
    }
    finish(out)
}

/// Shape entry of an `MVFB` header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockArray {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub arrays: Vec<BlockArray>,
    /// Free-form metadata (grid, scales, seed).
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// Writes an `MVFB` block; each array length must match its shape.
pub fn write_block<W: Write>(mut w: W, header: &BlockHeader, arrays: &[&[f64]]) -> Result<()> {
    if header.arrays.len() != arrays.len() {
        return Err(Error::Dimension(format!("{} shapes for {} arrays", header.arrays.len(), arrays.len())));
    }
    for (a, v) in header.arrays.iter().zip(arrays) {
        let n: usize = a.shape.iter().product();
        if n != v.len() {
            return Err(Error::Dimension(format!("array '{}' has {} values, shape {:?}", a.name, v.len(), a.shape)));
        }
    }
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Config("block header too large".into()))?;
    w.write_all(BLOCK_MAGIC)?;
    w.write_all(&BLOCK_VERSION.to_le_bytes())?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    for v in arrays {
        let mut buf = Vec::with_capacity(v.len() * 8);
        for x in *v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `MVFB` block written by [`write_block`].
pub fn read_block<R: Read>(mut r: R) -> Result<(BlockHeader, Vec<Vec<f64>>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BLOCK_MAGIC {
        return Err(Error::Config("not an MVFB block (bad magic)".into()));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != BLOCK_VERSION {
        return Err(Error::Unsupported(format!("MVFB version {version}")));
    }
    let mut l = [0u8; 4];
    r.read_exact(&mut l)?;
    let mut json = vec![0u8; u32::from_le_bytes(l) as usize];
    r.read_exact(&mut json)?;
    let header: BlockHeader = serde_json::from_slice(&json)?;
    let mut arrays = Vec::with_capacity(header.arrays.len());
    for a in &header.arrays {
        let n: usize = a.shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        arrays.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect());
    }
    Ok((header, arrays))
}

/// Shape `[particles, nodes, dim]` of an ensemble.
pub fn ensemble_shape(e: &Ensemble<f64>) -> Vec<usize> {
    vec![e.particles(), e.grid().steps() + 1, e.dim()]
}

/// Plot-ready table: every cell is already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Appends a row of numbers; booleans go through [`Table::flag`].
    pub fn push(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(fmt_g17).collect());
    }

    pub fn push_raw(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn flag(b: bool) -> f64 {
        if b {
            1.0
        } else {
            0.0
        }
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            if row.len() != self.header.len() {
                return Err(Error::Dimension(format!("table row has {} cells, header {}", row.len(), self.header.len())));
            }
            out.write_record(row).map_err(csv_err)?;
        }
        finish(out)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, V: Serialize + ?Sized>(mut w: W, v: &V) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        // Reference strings from C printf("%.17g").
        let cases = [
            (0.0, "0"),
            (-0.0, "-0"),
            (1.0, "1"),
            (0.1, "0.10000000000000001"),
            (1.0 / 3.0, "0.33333333333333331"),
            (123456.0, "123456"),
            (1e-5, "1.0000000000000001e-05"),
            (1e-4, "0.0001"),
            (2.5e-300, "2.5e-300"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (-1.5, "-1.5"),
            (f64::INFINITY, "inf"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g17(x), s, "{x:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        let mut r = crate::rng::stream(5, crate::rng::tag::EXPERIMENT, 0, 0);
        use rand::Rng;
        for _ in 0..10_000 {
            let x: f64 = (r.random::<f64>() - 0.5) * 10f64.powi(r.random_range(-30..30));
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn path_and_density_csv_round_trip() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = Path::from_values(g, 2, (0..10).map(|i| (i as f64).sin()).collect()).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &p, "x").unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t,x_1,x_2\n0,0,"));
        assert_eq!(read_path_csv(&buf[..], g).unwrap(), p);

        let d = Density::from_values(g, 1, vec![1.0, 0.5, -2.0, 1e-9]).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &d, "g").unwrap();
        assert_eq!(read_density_csv(&buf[..], g).unwrap(), d);
        assert!(read_density_csv(&buf[..], TimeGrid::new(1.0, 5).unwrap()).is_err());
    }

    #[test]
    fn block_round_trip_and_layout() {
        let header = BlockHeader {
            arrays: vec![BlockArray { name: "a".into(), shape: vec![2, 3] }, BlockArray { name: "b".into(), shape: vec![1] }],
            meta: serde_json::json!({"seed": 3}),
        };
        let a: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let mut buf = Vec::new();
        write_block(&mut buf, &header, &[&a, &[7.0]]).unwrap();
        assert_eq!(&buf[..4], b"MVFB");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        let hl = u32::from_le_bytes(buf[6..10].try_into().unwrap()) as usize;
        assert_eq!(buf.len(), 10 + hl + 7 * 8);
        assert_eq!(f64::from_le_bytes(buf[10 + hl + 8..10 + hl + 16].try_into().unwrap()), 0.5);
        let (h, arrays) = read_block(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(arrays, vec![a, vec![7.0]]);
        assert!(write_block(&mut Vec::new(), &header, &[&[1.0], &[7.0]]).is_err());
        assert!(read_block(&b"MVFX\x01\x00"[..]).is_err());
    }
}
