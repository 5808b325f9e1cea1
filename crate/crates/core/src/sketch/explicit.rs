use super::fwht::hadamard_entry;
use super::srht::SrhtPlan;
use super::state::RowHashes;
use super::{SketchFamily, SketchSpec};
use crate::error::Result;
use crate::limits;
use crate::matrix::Matrix;

impl SketchSpec {
    /// The `k x n` sketching matrix written out entry by entry.
    ///
    /// Quadratic in size; meant as a reference for checking the streaming
    /// and transform paths on small inputs.
    pub fn materialize(&self, n: usize) -> Result<Matrix> {
        self.validate()?;
        let k = self.rows();
        limits::check_f64s("explicit sketch matrix", k as u128 * n as u128)?;
        let mut s = vec![0.0; k * n];
        match self.family {
            SketchFamily::CountSketch | SketchFamily::Osnap => {
                let hashes = RowHashes::new(self);
                let scale = hashes.scale();
                for i in 0..n {
                    hashes.for_each(i as u64, |bucket, sign| {
                        s[bucket * n + i] += sign * scale;
                    });
                }
            }
            SketchFamily::Srht => {
                let plan = SrhtPlan::new(self, n)?;
                for (q, &p) in plan.rows.iter().enumerate() {
                    for i in 0..n {
                        s[q * n + i] =
                            plan.scale * hadamard_entry(p, i) * plan.signs.sign(i as u64);
                    }
                }
            }
        }
        Ok(Matrix::from_parts(k, n, s))
    }
}
