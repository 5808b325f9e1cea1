use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::accumulator::ExactAccumulator;
use super::hash::MultiplyShift;
use super::srht::{srht_apply, srht_dense};
use super::{SketchFamily, SketchSpec};
use crate::dist::even_ranges;
use crate::error::{Error, Result};
use crate::limits;
use crate::matrix::{self, Matrix, GENERATOR};
use crate::rng::keyed_rng;

/// Per-state row limit; keeps every digit sum inside `i64`.
pub const MAX_ROWS: u64 = (1 << 31) - 1;

const HASH_STREAM: u64 = 0x4853_4b45_5443_4848;

/// Bucket and sign hashes of a CountSketch (one pair) or OSNAP (`s` pairs).
///
/// OSNAP splits the `k` sketch rows into `s` contiguous blocks and hash `j`
/// picks a row inside block `j`, so the `s` nonzeros of a column are always
/// in distinct rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct RowHashes {
    blocks: Vec<(usize, usize)>,
    bucket: Vec<MultiplyShift>,
    sign: Vec<MultiplyShift>,
}

impl RowHashes {
    pub fn new(spec: &SketchSpec) -> Self {
        let s = spec.sparsity().max(1);
        let mut rng = keyed_rng(spec.seed, HASH_STREAM);
        let mut bucket = Vec::with_capacity(s);
        let mut sign = Vec::with_capacity(s);
        for _ in 0..s {
            bucket.push(MultiplyShift::from_rng(&mut rng));
            sign.push(MultiplyShift::from_rng(&mut rng));
        }
        let blocks = even_ranges(spec.rows(), s)
            .into_iter()
            .map(|r| (r.start, r.len()))
            .collect();
        RowHashes { blocks, bucket, sign }
    }

    /// Value of each nonzero of `S`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.blocks.len() as f64).sqrt()
    }

    #[inline]
    pub fn for_each(&self, row_index: u64, mut f: impl FnMut(usize, f64)) {
        for ((&(lo, len), h), g) in self.blocks.iter().zip(&self.bucket).zip(&self.sign) {
            f(lo + h.bucket(row_index, len), g.sign(row_index));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Store {
    /// CountSketch/OSNAP bucket sums before the `1/sqrt(s)` scale.
    Hashed {
        hashes: RowHashes,
        acc: ExactAccumulator,
    },
    /// SRHT rows awaiting the transform, keyed by global index.
    Buffered(Vec<(u64, Vec<f64>)>),
    /// A finished `k x d` product.
    Dense(Vec<f64>),
}

/// Running `S A` over the rows consumed so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchState {
    spec: SketchSpec,
    k: usize,
    d: usize,
    rows_consumed: u64,
    store: Store,
}

impl SketchState {
    /// Empty state (the zero sketch).
    pub fn new(spec: &SketchSpec) -> Result<Self> {
        spec.validate()?;
        let (k, d) = (spec.rows(), spec.d);
        let store = match spec.family {
            SketchFamily::CountSketch | SketchFamily::Osnap => {
                // Three i64 digits per entry.
                limits::check_f64s("sketch accumulator", 3 * k as u128 * d as u128)?;
                Store::Hashed {
                    hashes: RowHashes::new(spec),
                    acc: ExactAccumulator::new(k, d),
                }
            }
            SketchFamily::Srht => Store::Buffered(Vec::new()),
        };
        Ok(SketchState {
            spec: spec.clone(),
            k,
            d,
            rows_consumed: 0,
            store,
        })
    }

    pub(crate) fn finalized(spec: SketchSpec, sa: Matrix, rows_consumed: u64) -> Self {
        SketchState {
            k: sa.rows(),
            d: sa.cols(),
            spec,
            rows_consumed,
            store: Store::Dense(sa.into_data()),
        }
    }

    pub fn spec(&self) -> &SketchSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows_consumed(&self) -> u64 {
        self.rows_consumed
    }

    /// Size of the state as shipped between processes.
    pub fn payload_bytes(&self) -> usize {
        match &self.store {
            Store::Hashed { acc, .. } => acc.payload_bytes(),
            Store::Buffered(rows) => rows.len() * (8 + 8 * self.d),
            Store::Dense(v) => v.len() * 8,
        }
    }

    /// Folds row `row_index` of `A` into the sketch.
    ///
    /// Each global index must be consumed at most once across all states
    /// that will be merged; this is not checked.
    pub fn stream_update(&mut self, row_index: u64, row: &[f64]) -> Result<()> {
        if row.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: row.len(),
            });
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: row_index as usize + 1,
                col: col + 1,
            });
        }
        if self.rows_consumed >= MAX_ROWS {
            return Err(Error::Config(format!(
                "a sketch state accepts at most {MAX_ROWS} rows"
            )));
        }
        match &mut self.store {
            Store::Hashed { hashes, acc } => {
                let mut result = Ok(());
                hashes.for_each(row_index, |bucket, sign| {
                    if result.is_ok() {
                        result = acc.deposit_row(bucket, sign, row);
                    }
                });
                result?;
            }
            Store::Buffered(rows) => rows.push((row_index, row.to_vec())),
            Store::Dense(_) => {
                return Err(Error::IncompatibleSketch(
                    "a finished sketch cannot consume more rows".into(),
                ))
            }
        }
        self.rows_consumed += 1;
        Ok(())
    }

    /// Streams every row of `a`, row `r` under global index `first_index + r`.
    pub fn consume(&mut self, a: &Matrix, first_index: u64) -> Result<()> {
        for (r, row) in a.row_iter().enumerate() {
            self.stream_update(first_index + r as u64, row)?;
        }
        Ok(())
    }

    /// The `k x d` product `S A`.
    pub fn sketch(&self) -> Result<Matrix> {
        match &self.store {
            Store::Hashed { hashes, acc } => {
                let data = acc.to_dense(hashes.scale());
                Matrix::new(self.k, self.d, data)
            }
            Store::Buffered(rows) => {
                let n = rows.iter().map(|(i, _)| *i + 1).max().unwrap_or(0) as usize;
                limits::check_f64s("SRHT row buffer", n as u128 * self.d as u128)?;
                let mut a = vec![0.0; n * self.d];
                for (i, row) in rows {
                    let dst = &mut a[*i as usize * self.d..(*i as usize + 1) * self.d];
                    for (x, y) in dst.iter_mut().zip(row) {
                        *x += y;
                    }
                }
                srht_dense(&self.spec, &Matrix::from_parts(n, self.d, a))
            }
            Store::Dense(v) => Ok(Matrix::from_parts(self.k, self.d, v.clone())),
        }
    }

    /// Adds `other` into `self`.
    ///
    /// Two streaming CountSketch/OSNAP states merge exactly: the result is
    /// bit-identical to one state that consumed both inputs, in any order
    /// and association. States reloaded from disk merge by ordinary
    /// floating-point addition of their products.
    pub fn merge_from(&mut self, other: &SketchState) -> Result<()> {
        if self.spec.compat_key() != other.spec.compat_key() {
            return Err(Error::IncompatibleSketch(format!(
                "{:?} vs {:?} (family, k, d, s, seed)",
                self.spec.compat_key(),
                other.spec.compat_key()
            )));
        }
        let total = self.rows_consumed + other.rows_consumed;
        if total > MAX_ROWS {
            return Err(Error::Config(format!(
                "a sketch state accepts at most {MAX_ROWS} rows"
            )));
        }
        match (&mut self.store, &other.store) {
            (Store::Hashed { acc, .. }, Store::Hashed { acc: rhs, .. }) => acc.merge_from(rhs)?,
            (Store::Buffered(rows), Store::Buffered(rhs)) => rows.extend(rhs.iter().cloned()),
            (Store::Hashed { .. } | Store::Dense(_), Store::Hashed { .. } | Store::Dense(_))
                if self.spec.family.is_hashed() =>
            {
                let mut sum = self.sketch()?.into_data();
                for (x, y) in sum.iter_mut().zip(other.sketch()?.data()) {
                    *x += y;
                }
                self.store = Store::Dense(sum);
            }
            _ => {
                return Err(Error::IncompatibleSketch(
                    "a finished SRHT sketch cannot be merged".into(),
                ))
            }
        }
        self.rows_consumed = total;
        Ok(())
    }

    pub fn merge(mut self, other: &SketchState) -> Result<SketchState> {
        self.merge_from(other)?;
        Ok(self)
    }

    pub fn sidecar(&self) -> SketchSidecar {
        SketchSidecar {
            family: self.spec.family,
            k: self.k,
            d: self.d,
            s: self.spec.sparsity(),
            seed: self.spec.seed,
            rows_consumed: self.rows_consumed,
            eps: self.spec.eps,
            sizing_constant: self.spec.sizing_constant,
            osnap_s: self.spec.osnap_s,
            rows_override: self.spec.rows_override,
            generator: GENERATOR.to_string(),
        }
    }

    /// Writes `S A` in the binary matrix format at `path` and the spec
    /// sidecar next to it (see [`sidecar_path`](Self::sidecar_path)).
    pub fn save(&self, path: &Path) -> Result<()> {
        matrix::save_binary(&self.sketch()?, path)?;
        let side = Self::sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.sidecar())
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&side, json).map_err(|e| Error::io(side, e))
    }

    pub fn load(path: &Path) -> Result<SketchState> {
        let side = Self::sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: SketchSidecar =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
        let sa = matrix::load_binary(path)?;
        let spec = meta.spec();
        spec.validate()?;
        if sa.shape() != (meta.k, meta.d) || spec.rows() != meta.k || spec.sparsity() != meta.s {
            return Err(Error::Format(format!(
                "sidecar describes a {}x{} sketch (s = {}) but the payload is {}x{}",
                meta.k,
                meta.d,
                meta.s,
                sa.rows(),
                sa.cols()
            )));
        }
        Ok(SketchState::finalized(spec, sa, meta.rows_consumed))
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut os = path.as_os_str().to_owned();
        os.push(".json");
        PathBuf::from(os)
    }
}

/// JSON description stored next to a saved sketch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchSidecar {
    pub family: SketchFamily,
    pub k: usize,
    pub d: usize,
    pub s: usize,
    pub seed: u64,
    pub rows_consumed: u64,
    pub eps: f64,
    pub sizing_constant: f64,
    pub osnap_s: Option<usize>,
    pub rows_override: Option<usize>,
    pub generator: String,
}

impl SketchSidecar {
    pub fn spec(&self) -> SketchSpec {
        SketchSpec {
            family: self.family,
            eps: self.eps,
            d: self.d,
            osnap_s: self.osnap_s,
            seed: self.seed,
            rows_override: self.rows_override,
            sizing_constant: self.sizing_constant,
        }
    }
}

/// `S A` for the whole matrix, streaming rows `0..n` for the hashed
/// families and running the transform for SRHT.
pub fn sketch_matrix(spec: &SketchSpec, a: &Matrix) -> Result<Matrix> {
    if a.cols() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            found: a.cols(),
        });
    }
    match spec.family {
        SketchFamily::Srht => srht_apply(spec, a)?.sketch(),
        _ => {
            let mut state = SketchState::new(spec)?;
            state.consume(a, 0)?;
            state.sketch()
        }
    }
}
