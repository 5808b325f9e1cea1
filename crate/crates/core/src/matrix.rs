//! Dense row-major matrices, their CSV and binary file formats, and the
//! synthetic low-rank-plus-noise generator used by the experiments.
//!
//! Binary layout (little-endian): the magic bytes `LVSK`, a `u32` format
//! version, `u64` row count, `u64` column count, then `rows * cols` IEEE-754
//! doubles in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::{Normal, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits;

pub const MAGIC: [u8; 4] = *b"LVSK";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Identity of the random source behind every seeded draw in this crate.
pub const GENERATOR: &str = "xoshiro256++ (seed_from_u64) + ziggurat normal";

/// Dense `rows x cols` matrix of finite `f64`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let expected = rows.checked_mul(cols).ok_or_else(|| {
            Error::InvalidSpec(format!("{rows}x{cols} matrix overflows usize"))
        })?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols + 1,
                col: pos % cols + 1,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    /// Builds a matrix from data already known to be finite and well-shaped.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, and a 0-column matrix still has rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copies rows `lo..hi` into a new matrix.
    pub fn row_block(&self, lo: usize, hi: usize) -> Matrix {
        Matrix::from_parts(
            hi - lo,
            self.cols,
            self.data[lo * self.cols..hi * self.cols].to_vec(),
        )
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix::from_parts(self.rows, self.cols, self.data.iter().map(|v| v * c).collect())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix::from_parts(self.cols, self.rows, out)
    }

    /// Plain triple-loop product, for small test-scale operands.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let dst = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (t, &a) in self.row(i).iter().enumerate() {
                for (o, &b) in dst.iter_mut().zip(rhs.row(t)) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix::from_parts(self.rows, rhs.cols, out))
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend(m.row(i).iter().copied());
        }
        Matrix::from_parts(rows, cols, data)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Binary,
}

impl FileFormat {
    /// `.csv` means CSV; everything else is the binary format.
    pub fn from_path(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CsvOptions {
    /// Skip one leading header line.
    pub header: bool,
}

pub fn load_matrix(path: &Path, format: FileFormat, opts: CsvOptions) -> Result<Matrix> {
    match format {
        FileFormat::Csv => load_csv(path, opts),
        FileFormat::Binary => load_binary(path),
    }
}

pub fn save_matrix(m: &Matrix, path: &Path, format: FileFormat) -> Result<()> {
    match format {
        FileFormat::Csv => save_csv(m, path),
        FileFormat::Binary => save_binary(m, path),
    }
}

pub fn load_csv(path: &Path, opts: CsvOptions) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), opts)
}

pub fn read_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let row = rows + 1;
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row,
                expected,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                col: j + 1,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite { row, col: j + 1 });
            }
            data.push(value);
        }
        rows += 1;
        limits::check_f64s("CSV matrix", data.len() as u128)?;
    }
    let cols = cols.ok_or_else(|| Error::Format("CSV input has no data rows".into()))?;
    Ok(Matrix::from_parts(rows, cols, data))
}

/// Shortest representation that parses back to the same bits.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn save_csv(m: &Matrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(m, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv<W: Write>(m: &Matrix, w: &mut W) -> std::io::Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_binary(m: &Matrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_binary(m, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_binary<W: Write>(m: &Matrix, w: &mut W) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    w.write_all(&(m.cols as u64).to_le_bytes())?;
    for v in &m.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_binary(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_binary(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Matrix> {
    let io = |e| Error::io("<stream>", e);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if header[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected LVSK".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let count = (rows as u128) * (cols as u128);
    limits::check_f64s("binary matrix", count)?;
    let (rows, cols, count) = (rows as usize, cols as usize, count as usize);

    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for k in 0..count {
        r.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format(format!("payload truncated after {k} of {count} values"))
            } else {
                io(e)
            }
        })?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: k / cols + 1,
                col: k % cols + 1,
            });
        }
        data.push(v);
    }
    if r.read(&mut buf).map_err(io)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(Matrix::from_parts(rows, cols, data))
}

/// Parameters for `A = G1 * G2 + N` with Gaussian factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn full_rank(n: usize, d: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            rank: d,
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidSpec("n and d must be positive".into()));
        }
        if self.rank == 0 || self.rank > self.d {
            return Err(Error::InvalidSpec(format!(
                "rank {} outside 1..={}",
                self.rank, self.d
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise_sigma {} must be finite and >= 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Draws `A = G1 * G2 + N`: `G1` is `n x rank`, `G2` is `rank x d`, both
/// standard normal, and `N` is i.i.d. `normal(0, noise_sigma^2)`.
///
/// Draw order is G1 row by row, then G2 row by row, then N row by row, all
/// from one generator seeded with `spec.seed`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Matrix> {
    spec.validate()?;
    let (n, d, r) = (spec.n, spec.d, spec.rank);
    let count = n as u128 * d as u128 + n as u128 * r as u128 + r as u128 * d as u128;
    limits::check_f64s("synthetic matrix", count)?;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    // Column i of the r x n column-major buffer is row i of G1.
    let g1_t = DMatrix::<f64>::from_fn(r, n, |_, _| rng.sample(StandardNormal));
    let mut g2 = DMatrix::<f64>::zeros(r, d);
    for t in 0..r {
        for j in 0..d {
            g2[(t, j)] = rng.sample(StandardNormal);
        }
    }
    // (G1 G2)^T = G2^T G1^T is d x n column-major, i.e. A in row-major order.
    let a_t = g2.transpose() * g1_t;
    let mut data: Vec<f64> = a_t.data.into();
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        for v in data.iter_mut() {
            *v += rng.sample(noise);
        }
    }
    Ok(Matrix::from_parts(n, d, data))
}

/// Standard-normal `n x d` matrix, row-major draw order.
pub fn gaussian(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_parts(n, d, data)
}
