//! Thin SVD behind a small adapter, plus relative singular-value truncation.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self as backend, ComputeSvdVectors};
use faer::{Mat, Par};

use crate::error::{Error, Result};
use crate::limits;
use crate::matrix::Matrix;

/// Thin SVD `A = U diag(sigma) Vt` with `sigma` sorted descending.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) Vt`, for residual checks.
    pub fn reconstruct(&self) -> Matrix {
        let (n, r) = self.u.shape();
        let d = self.vt.cols();
        let mut us = self.u.data().to_vec();
        for i in 0..n {
            for j in 0..r {
                us[i * r + j] *= self.sigma[j];
            }
        }
        Matrix::from_parts(n, r, us)
            .matmul(&self.vt)
            .unwrap_or_else(|_| Matrix::zeros(n, d))
    }
}

/// Runs single-threaded so results never depend on the thread count.
pub fn thin_svd(a: &Matrix) -> Result<SvdResult> {
    let (n, d) = a.shape();
    if n == 0 || d == 0 {
        return Err(Error::Degenerate(format!("cannot decompose a {n}x{d} matrix")));
    }
    let r = n.min(d);
    // Backend copy of A, its U and workspace, and the row-major U.
    limits::check_f64s(
        "thin SVD workspace",
        2 * (n as u128 * d as u128) + 2 * (n as u128 * r as u128),
    )?;
    let data = a.data();
    let input = Mat::<f64>::from_fn(n, d, |i, j| data[i * d + j]);
    let mut u = Mat::<f64>::zeros(n, r);
    let mut v = Mat::<f64>::zeros(d, r);
    let mut s = Diag::<f64>::zeros(r);
    let thin = ComputeSvdVectors::Thin;
    let scratch = backend::svd_scratch::<f64>(n, d, thin, thin, Par::Seq, Default::default());
    backend::svd(
        input.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| Error::SvdNonConvergence { rows: n, cols: d })?;
    drop(input);

    // The backend deflates negligible singular values to exactly zero. Put
    // back the residual `||A v_j||` so that only a genuinely null direction
    // reports zero.
    let sv: Vec<f64> = (0..r)
        .map(|j| {
            let x = s.column_vector()[j].max(0.0);
            if x > 0.0 {
                return x;
            }
            let vj = v.col(j);
            a.row_iter()
                .map(|row| row.iter().zip(vj.iter()).map(|(p, q)| p * q).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));

    let sigma: Vec<f64> = order.iter().map(|&j| sv[j]).collect();
    let mut u_data = vec![0.0; n * r];
    for (dst, &src) in order.iter().enumerate() {
        for (i, x) in u.col(src).iter().enumerate() {
            u_data[i * r + dst] = *x;
        }
    }
    drop(u);
    let mut vt_data = Vec::with_capacity(r * d);
    for &src in &order {
        vt_data.extend(v.col(src).iter().copied());
    }
    Ok(SvdResult {
        u: Matrix::from_parts(n, r, u_data),
        sigma,
        vt: Matrix::from_parts(r, d, vt_data),
    })
}

/// Number of leading components with `sigma_j > tau * sigma_1`.
pub fn retained_rank(sigma: &[f64], tau: f64) -> usize {
    match sigma.first() {
        Some(&top) => sigma.iter().take_while(|&&s| s > tau * top).count(),
        None => 0,
    }
}

/// Keeps the components with `sigma_j > tau * sigma_1` (strict).
pub fn truncate(svd: &SvdResult, tau: f64) -> Result<SvdResult> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidSpec(format!(
            "truncation threshold {tau} outside [0, 1)"
        )));
    }
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::Degenerate("all singular values are zero".into()));
    }
    let keep = retained_rank(&svd.sigma, tau);
    let (n, r) = svd.u.shape();
    let d = svd.vt.cols();
    let mut u = Vec::with_capacity(n * keep);
    for i in 0..n {
        u.extend_from_slice(&svd.u.data()[i * r..i * r + keep]);
    }
    Ok(SvdResult {
        u: Matrix::from_parts(n, keep, u),
        sigma: svd.sigma[..keep].to_vec(),
        vt: Matrix::from_parts(keep, d, svd.vt.data()[..keep * d].to_vec()),
    })
}
