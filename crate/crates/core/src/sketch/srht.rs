use rayon::prelude::*;

use super::fwht::fwht;
use super::hash::MultiplyShift;
use super::state::SketchState;
use super::{SketchFamily, SketchSpec};
use crate::error::{Error, Result};
use crate::limits;
use crate::matrix::Matrix;
use crate::rng::keyed_rng;

const SIGN_STREAM: u64 = 0x5352_4854_5349_474e;
const ROW_STREAM: u64 = 0x5352_4854_524f_5753;

/// Random diagonal signs and sampled rows of one SRHT instance.
pub(crate) struct SrhtPlan {
    pub signs: MultiplyShift,
    /// Padded length, a power of two.
    pub m: usize,
    /// Sorted sampled rows of `H D A`.
    pub rows: Vec<usize>,
    pub scale: f64,
}

impl SrhtPlan {
    pub fn new(spec: &SketchSpec, n: usize) -> Result<Self> {
        let k = spec.rows();
        let m = n.max(1).next_power_of_two();
        if k > m {
            return Err(Error::InvalidSpec(format!(
                "SRHT samples {k} rows but the padded input has only {m}"
            )));
        }
        let signs = MultiplyShift::from_rng(&mut keyed_rng(spec.seed, SIGN_STREAM));
        let mut rows = rand::seq::index::sample(&mut keyed_rng(spec.seed, ROW_STREAM), m, k).into_vec();
        rows.sort_unstable();
        Ok(SrhtPlan {
            signs,
            m,
            rows,
            // sqrt(m/k) * (1/sqrt(m)) on the unnormalized transform.
            scale: 1.0 / (k as f64).sqrt(),
        })
    }
}

/// `S A` with `S = sqrt(m/k) P H D` and `A` zero-padded to `m` rows.
pub(crate) fn srht_dense(spec: &SketchSpec, a: &Matrix) -> Result<Matrix> {
    let (n, d) = a.shape();
    if d != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            found: d,
        });
    }
    let plan = SrhtPlan::new(spec, n)?;
    limits::check_f64s("SRHT padded transform", plan.m as u128 * d as u128)?;
    let k = plan.rows.len();
    let signs: Vec<f64> = (0..n as u64).map(|i| plan.signs.sign(i)).collect();

    let columns: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut buf = vec![0.0; plan.m];
            for (i, (slot, s)) in buf.iter_mut().zip(&signs).enumerate() {
                *slot = s * a.get(i, j);
            }
            fwht(&mut buf);
            plan.rows.iter().map(|&p| buf[p] * plan.scale).collect()
        })
        .collect();

    let mut out = vec![0.0; k * d];
    for (j, col) in columns.iter().enumerate() {
        for (q, v) in col.iter().enumerate() {
            out[q * d + j] = *v;
        }
    }
    Ok(Matrix::from_parts(k, d, out))
}

/// Applies an SRHT to the whole matrix.
pub fn srht_apply(spec: &SketchSpec, a: &Matrix) -> Result<SketchState> {
    if spec.family != SketchFamily::Srht {
        return Err(Error::UnsupportedFamily(format!(
            "srht_apply called with {}",
            spec.family
        )));
    }
    spec.validate()?;
    let sa = srht_dense(spec, a)?;
    Ok(SketchState::finalized(spec.clone(), sa, a.rows() as u64))
}
