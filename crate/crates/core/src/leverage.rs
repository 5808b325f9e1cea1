//! Leverage scores: exact (thin SVD), sketched with and without
//! singular-value truncation, and a projection-matrix oracle.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits;
use crate::matrix::{format_f64, Matrix};
use crate::sketch::{sketch_matrix, SketchSpec};
use crate::svd::{thin_svd, truncate, SvdResult};

/// Relative singular-value floor of the exact method.
pub const EXACT_RANK_TOL: f64 = 1e-12;
/// Relative eigenvalue floor of the oracle's pseudo-inverse of `A^T A`.
pub const ORACLE_EIG_TOL: f64 = 1e-12;
pub const ORACLE_MAX_ROWS: usize = 5000;
/// Rows whose true score is below this are left out of relative errors.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Sketch,
    SketchTrunc,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Sketch => "sketch",
            Method::SketchTrunc => "sketch_trunc",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeverageResult {
    pub scores: Vec<f64>,
    pub method: Method,
    /// Singular components behind the scores.
    pub effective_rank: usize,
    /// Sketch distortion; 0 for the exact methods.
    pub eps: f64,
    pub sv_tol: Option<f64>,
    pub spec: Option<SketchSpec>,
}

impl LeverageResult {
    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// `V diag(1/sigma)`, the map from rows of `A` to rows of the approximate
/// left factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    /// `d x r`, entry `(p, j) = V[p, j] / sigma_j`.
    pub v_scaled: Matrix,
    pub sigma: Vec<f64>,
}

impl Basis {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    fn from_svd(svd: &SvdResult) -> Result<Basis> {
        let r = svd.rank();
        let d = svd.vt.cols();
        if let Some(index) = svd.sigma.iter().position(|&s| s == 0.0) {
            return Err(Error::SingularInversion { index });
        }
        let mut m = vec![0.0; d * r];
        for j in 0..r {
            let inv = 1.0 / svd.sigma[j];
            for (p, v) in svd.vt.row(j).iter().enumerate() {
                m[p * r + j] = v * inv;
            }
        }
        Ok(Basis {
            v_scaled: Matrix::from_parts(d, r, m),
            sigma: svd.sigma.clone(),
        })
    }
}

/// SVD of the sketch `SA`, truncated at `sv_tol` when given and otherwise
/// keeping every component.
pub fn sketch_basis(sa: &Matrix, sv_tol: Option<f64>) -> Result<Basis> {
    let svd = thin_svd(sa)?;
    match sv_tol {
        Some(tol) => Basis::from_svd(&truncate(&svd, tol)?),
        None => Basis::from_svd(&svd),
    }
}

/// `||a_i V Sigma^{-1}||^2` for every row. Rows are independent, so the
/// result is the same however the rows are split up.
pub fn scores_with_basis(a: &Matrix, basis: &Basis) -> Result<Vec<f64>> {
    let d = a.cols();
    if basis.v_scaled.rows() != d {
        return Err(Error::DimensionMismatch {
            expected: basis.v_scaled.rows(),
            found: d,
        });
    }
    let r = basis.rank();
    let m = basis.v_scaled.data();
    let score_row = |row: &[f64]| -> f64 {
        let mut w = vec![0.0; r];
        for (p, &x) in row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (acc, &v) in w.iter_mut().zip(&m[p * r..(p + 1) * r]) {
                *acc += x * v;
            }
        }
        w.iter().map(|v| v * v).sum()
    };
    if d == 0 {
        return Ok(vec![0.0; a.rows()]);
    }
    Ok(a.data().par_chunks(d).map(score_row).collect())
}

fn ensure_nonzero(a: &Matrix) -> Result<()> {
    if a.rows() == 0 || a.cols() == 0 || a.is_zero() {
        return Err(Error::Degenerate("leverage scores of a zero matrix".into()));
    }
    Ok(())
}

/// Exact scores `||U_i||^2` from the thin SVD, keeping components with
/// `sigma_j > 1e-12 sigma_1` so rank-deficient inputs are well defined.
pub fn leverage_exact(a: &Matrix) -> Result<LeverageResult> {
    leverage_exact_truncated(a, EXACT_RANK_TOL)
}

/// Exact scores of the rank-`r'` truncation at relative cutoff `sv_tol`.
pub fn leverage_exact_truncated(a: &Matrix, sv_tol: f64) -> Result<LeverageResult> {
    ensure_nonzero(a)?;
    let svd = truncate(&thin_svd(a)?, sv_tol)?;
    let r = svd.rank();
    let scores = svd
        .u
        .row_iter()
        .map(|row| row.iter().map(|v| v * v).sum())
        .collect();
    Ok(LeverageResult {
        scores,
        method: Method::Exact,
        effective_rank: r,
        eps: 0.0,
        sv_tol: Some(sv_tol),
        spec: None,
    })
}

/// Projection `H = A (A^T A)^+ A^T`, with the pseudo-inverse taken from a
/// symmetric eigendecomposition. Returns `H` and its rank.
pub fn oracle_projection(a: &Matrix) -> Result<(Matrix, usize)> {
    ensure_nonzero(a)?;
    let n = a.rows();
    if n > ORACLE_MAX_ROWS {
        return Err(Error::Capacity {
            what: "projection matrix oracle",
            requested: (n as u128) * (n as u128) * 8,
            cap: (ORACLE_MAX_ROWS * ORACLE_MAX_ROWS * 8) as u64,
        });
    }
    limits::check_f64s("projection matrix oracle", (n as u128) * (n as u128))?;
    let an = a.to_nalgebra();
    let gram = an.transpose() * &an;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return Err(Error::Degenerate("A^T A has no positive eigenvalue".into()));
    }
    let d = a.cols();
    let mut pinv = nalgebra::DMatrix::<f64>::zeros(d, d);
    let mut rank = 0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > ORACLE_EIG_TOL * top {
            rank += 1;
            let q = eig.eigenvectors.column(j);
            pinv += (q * q.transpose()) / lambda;
        }
    }
    let h = &an * pinv * an.transpose();
    Ok((Matrix::from_nalgebra(&h), rank))
}

/// Scores as squared row norms of the projection matrix.
pub fn leverage_oracle(a: &Matrix) -> Result<LeverageResult> {
    let (h, rank) = oracle_projection(a)?;
    let scores = h.row_iter().map(|row| row.iter().map(|v| v * v).sum()).collect();
    Ok(LeverageResult {
        scores,
        method: Method::Oracle,
        effective_rank: rank,
        eps: 0.0,
        sv_tol: None,
        spec: None,
    })
}

/// Sketch, SVD of `SA`, then `||a_i V Sigma^{-1}||^2` using every
/// component of `SA`. No protection against tiny singular values; only an
/// exactly zero one is refused.
pub fn leverage_sketched(a: &Matrix, spec: &SketchSpec) -> Result<LeverageResult> {
    let sa = sketch_matrix(spec, a)?;
    let basis = sketch_basis(&sa, None)?;
    Ok(LeverageResult {
        scores: scores_with_basis(a, &basis)?,
        method: Method::Sketch,
        effective_rank: basis.rank(),
        eps: spec.eps,
        sv_tol: None,
        spec: Some(spec.clone()),
    })
}

/// As [`leverage_sketched`], but components of `SA` with
/// `sigma_j <= sv_tol * sigma_1` are dropped before inverting.
pub fn leverage_sketched_trunc(a: &Matrix, spec: &SketchSpec, sv_tol: f64) -> Result<LeverageResult> {
    ensure_nonzero(a)?;
    let sa = sketch_matrix(spec, a)?;
    let basis = sketch_basis(&sa, Some(sv_tol))?;
    Ok(LeverageResult {
        scores: scores_with_basis(a, &basis)?,
        method: Method::SketchTrunc,
        effective_rank: basis.rank(),
        eps: spec.eps,
        sv_tol: Some(sv_tol),
        spec: Some(spec.clone()),
    })
}

/// Relative-error statistics of approximate against true scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Rows with true score at or above the floor.
    pub compared: usize,
    pub max_relative: f64,
    pub mean_relative: f64,
    /// Fraction of compared rows with relative error at most `band`.
    pub within_band: f64,
    pub band: f64,
}

pub fn relative_errors(truth: &[f64], approx: &[f64]) -> Vec<(usize, f64)> {
    truth
        .iter()
        .zip(approx)
        .enumerate()
        .filter(|(_, (&t, _))| t >= RELATIVE_ERROR_FLOOR)
        .map(|(i, (&t, &a))| (i, (a - t).abs() / t))
        .collect()
}

pub fn error_stats(truth: &[f64], approx: &[f64], band: f64) -> ErrorStats {
    let errs = relative_errors(truth, approx);
    let compared = errs.len();
    let max_relative = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let mean_relative = if compared == 0 {
        0.0
    } else {
        errs.iter().map(|e| e.1).sum::<f64>() / compared as f64
    };
    let inside = errs.iter().filter(|e| e.1 <= band).count();
    ErrorStats {
        compared,
        max_relative,
        mean_relative,
        within_band: if compared == 0 { 1.0 } else { inside as f64 / compared as f64 },
        band,
    }
}

/// `index,score` CSV with a header line.
pub fn write_scores_csv<W: Write>(scores: &[f64], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "index,score")?;
    for (i, s) in scores.iter().enumerate() {
        writeln!(w, "{i},{}", format_f64(*s))?;
    }
    Ok(())
}

pub fn save_scores(scores: &[f64], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_scores_csv(scores, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads scores from `index,score` lines or from a single score column.
/// A non-numeric first line is treated as a header.
pub fn load_scores(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut scores = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let field = *fields.last().unwrap();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => scores.push(v),
            Ok(_) => {
                return Err(Error::NonFinite {
                    row: lineno + 1,
                    col: fields.len(),
                })
            }
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    row: lineno + 1,
                    col: fields.len(),
                    value: field.to_string(),
                })
            }
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{gaussian, gen_synthetic, SyntheticSpec};
    use crate::sketch::SketchFamily;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn orthonormal_rows() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let ex = leverage_exact(&a).unwrap();
        assert!(close(&ex.scores, &[1.0, 1.0, 0.0], 1e-14));
        assert_eq!(ex.effective_rank, 2);
        let or = leverage_oracle(&a).unwrap();
        assert!(close(&or.scores, &[1.0, 1.0, 0.0], 1e-14));
    }

    #[test]
    fn constant_column() {
        let a = Matrix::new(4, 1, vec![1.0; 4]).unwrap();
        let ex = leverage_exact(&a).unwrap();
        assert!(close(&ex.scores, &[0.25; 4], 1e-15));
        assert_eq!(ex.effective_rank, 1);
    }

    #[test]
    fn identity_oracle() {
        let or = leverage_oracle(&Matrix::identity(6)).unwrap();
        assert!(close(&or.scores, &[1.0; 6], 1e-14));
    }

    #[test]
    fn oracle_projection_is_idempotent() {
        let a = gaussian(40, 5, 3);
        let (h, rank) = oracle_projection(&a).unwrap();
        assert_eq!(rank, 5);
        let h2 = h.matmul(&h).unwrap();
        for (x, y) in h2.data().iter().zip(h.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let scores = leverage_oracle(&a).unwrap().scores;
        for i in 0..40 {
            assert!((h.get(i, i) - scores[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_matches_oracle_on_random_full_rank() {
        let a = gaussian(200, 10, 17);
        let ex = leverage_exact(&a).unwrap();
        let or = leverage_oracle(&a).unwrap();
        assert!(close(&ex.scores, &or.scores, 1e-8));
        assert!((ex.sum() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let z = Matrix::zeros(5, 3);
        assert!(matches!(leverage_exact(&z), Err(Error::Degenerate(_))));
        assert!(matches!(leverage_oracle(&z), Err(Error::Degenerate(_))));
        let spec = SketchSpec::new(SketchFamily::CountSketch, 0.5, 3, 1).with_rows(8);
        assert!(matches!(leverage_sketched_trunc(&z, &spec, 1e-3), Err(Error::Degenerate(_))));
        assert!(matches!(
            leverage_sketched(&z, &spec),
            Err(Error::SingularInversion { index: 0 })
        ));
    }

    #[test]
    fn exactly_zero_sketch_singular_value_is_refused() {
        // The second column is zero, so SA has an exactly zero singular value.
        let a = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]]).unwrap();
        let spec = SketchSpec::new(SketchFamily::CountSketch, 0.5, 2, 9).with_rows(4);
        assert!(matches!(
            leverage_sketched(&a, &spec),
            Err(Error::SingularInversion { index: 1 })
        ));
        let t = leverage_sketched_trunc(&a, &spec, 0.0).unwrap();
        assert_eq!(t.effective_rank, 1);
    }

    #[test]
    fn oracle_capacity_limit() {
        let a = Matrix::zeros(ORACLE_MAX_ROWS + 1, 1);
        let mut a = a.into_data();
        a[0] = 1.0;
        let a = Matrix::new(ORACLE_MAX_ROWS + 1, 1, a).unwrap();
        assert!(matches!(leverage_oracle(&a), Err(Error::Capacity { .. })));
    }

    #[test]
    fn truncation_off_equals_plain_sketch() {
        let a = gaussian(500, 6, 2);
        for fam in SketchFamily::ALL {
            let spec = SketchSpec::new(fam, 0.5, 6, 4);
            let plain = leverage_sketched(&a, &spec).unwrap();
            let trunc = leverage_sketched_trunc(&a, &spec, 0.0).unwrap();
            assert_eq!(plain.scores, trunc.scores, "{fam}");
        }
    }

    #[test]
    fn scale_invariance() {
        let a = gen_synthetic(&SyntheticSpec {
            n: 120,
            d: 8,
            rank: 5,
            noise_sigma: 0.0,
            seed: 5,
        })
        .unwrap();
        let base = leverage_exact(&a).unwrap();
        for c in [-3.0, 1e-4, 250.0] {
            let scaled = leverage_exact(&a.scaled(c)).unwrap();
            assert_eq!(scaled.effective_rank, 5);
            assert!(close(&scaled.scores, &base.scores, 1e-10));
        }
        let spec = SketchSpec::new(SketchFamily::Osnap, 0.5, 8, 1);
        let s1 = leverage_sketched_trunc(&a, &spec, 1e-6).unwrap();
        for c in [8.0, -0.3] {
            let s2 = leverage_sketched_trunc(&a.scaled(c), &spec, 1e-6).unwrap();
            assert_eq!(s2.effective_rank, s1.effective_rank);
            assert!(close(&s1.scores, &s2.scores, 1e-10));
        }
    }

    #[test]
    fn error_stats_skip_tiny_truths() {
        let stats = error_stats(&[1.0, 1e-9, 0.5], &[1.5, 1.0, 0.5], 0.4);
        assert_eq!(stats.compared, 2);
        assert!((stats.max_relative - 0.5).abs() < 1e-15);
        assert!((stats.within_band - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let scores = vec![0.1, 1.0 / 3.0, 0.0, 1e-300];
        save_scores(&scores, &path).unwrap();
        assert_eq!(load_scores(&path).unwrap(), scores);
        std::fs::write(&path, "0.5\n0.25\n").unwrap();
        assert_eq!(load_scores(&path).unwrap(), vec![0.5, 0.25]);
        std::fs::write(&path, "index,score\n0,x\n").unwrap();
        assert!(matches!(load_scores(&path), Err(Error::Parse { row: 2, .. })));
    }
}
