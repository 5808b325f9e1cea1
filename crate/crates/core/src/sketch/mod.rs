//! Subspace-embedding sketches applied in the streaming row model.
//!
//! `S` is never materialized on the hot path: CountSketch and OSNAP hash
//! each global row index to its bucket(s) and sign(s), SRHT goes through a
//! fast Walsh-Hadamard transform per column. [`SketchSpec::materialize`]
//! builds `S` explicitly for testing.

mod accumulator;
mod explicit;
pub mod fwht;
pub mod hash;
mod srht;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use accumulator::ExactAccumulator;
pub use srht::srht_apply;
pub use state::{sketch_matrix, SketchSidecar, SketchState, MAX_ROWS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchFamily {
    CountSketch,
    Osnap,
    Srht,
}

impl SketchFamily {
    pub const ALL: [SketchFamily; 3] = [SketchFamily::CountSketch, SketchFamily::Osnap, SketchFamily::Srht];

    pub fn name(self) -> &'static str {
        match self {
            SketchFamily::CountSketch => "countsketch",
            SketchFamily::Osnap => "osnap",
            SketchFamily::Srht => "srht",
        }
    }

    /// Row-partitioned sketches can be summed across workers.
    pub fn is_hashed(self) -> bool {
        !matches!(self, SketchFamily::Srht)
    }
}

impl fmt::Display for SketchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SketchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "countsketch" | "count-sketch" | "cs" => Ok(SketchFamily::CountSketch),
            "osnap" => Ok(SketchFamily::Osnap),
            "srht" | "fjlt" => Ok(SketchFamily::Srht),
            other => Err(Error::InvalidSpec(format!("unknown sketch family {other:?}"))),
        }
    }
}

/// Everything that determines a sketching matrix `S` except the row count
/// of the input (which only SRHT needs, for its padding length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub family: SketchFamily,
    /// Target embedding distortion, in (0, 1).
    pub eps: f64,
    /// Column count of the sketched matrix.
    pub d: usize,
    /// OSNAP nonzeros per column; `ceil(log2 d)` when unset.
    pub osnap_s: Option<usize>,
    pub seed: u64,
    /// Explicit sketch row count; wins over the sizing rule.
    pub rows_override: Option<usize>,
    /// Constant in front of the asymptotic row-count bound.
    pub sizing_constant: f64,
}

impl SketchSpec {
    pub fn new(family: SketchFamily, eps: f64, d: usize, seed: u64) -> Self {
        SketchSpec {
            family,
            eps,
            d,
            osnap_s: None,
            seed,
            rows_override: None,
            sizing_constant: 1.0,
        }
    }

    pub fn with_rows(mut self, k: usize) -> Self {
        self.rows_override = Some(k);
        self
    }

    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.osnap_s = Some(s);
        self
    }

    pub fn with_sizing_constant(mut self, c: f64) -> Self {
        self.sizing_constant = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidSpec(format!("eps {} outside (0, 1)", self.eps)));
        }
        if self.d == 0 {
            return Err(Error::InvalidSpec("d must be positive".into()));
        }
        if !(self.sizing_constant > 0.0 && self.sizing_constant.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "sizing constant {} must be positive",
                self.sizing_constant
            )));
        }
        if self.rows_override == Some(0) {
            return Err(Error::InvalidSpec("rows_override must be >= 1".into()));
        }
        if self.family == SketchFamily::Osnap {
            let s = self.sparsity();
            if s == 0 || s > self.rows() {
                return Err(Error::InvalidSpec(format!(
                    "OSNAP sparsity {s} must be in 1..={}",
                    self.rows()
                )));
            }
        }
        Ok(())
    }

    /// Sketch row count `k`.
    pub fn rows(&self) -> usize {
        sketch_rows(self)
    }

    /// Nonzeros per column of `S`: 1 for CountSketch, `s` for OSNAP.
    /// SRHT is dense and reports 0.
    pub fn sparsity(&self) -> usize {
        match self.family {
            SketchFamily::CountSketch => 1,
            SketchFamily::Srht => 0,
            SketchFamily::Osnap => match self.osnap_s {
                Some(s) => s,
                None => {
                    let s = (self.d as f64).log2().ceil().max(1.0) as usize;
                    s.min(self.rows())
                }
            },
        }
    }

    /// The fields two states must share to be mergeable.
    pub fn compat_key(&self) -> (SketchFamily, usize, usize, usize, u64) {
        (self.family, self.rows(), self.d, self.sparsity(), self.seed)
    }
}

/// `ceil`, except that values within rounding noise of an integer snap to it.
fn ceil_snapped(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Row count from the theoretical bounds:
/// CountSketch `c (d/eps)^2`, OSNAP `c (d/eps^2) log2 d`, SRHT the next power
/// of two above the OSNAP count. All rounded up and at least 1.
pub fn sketch_rows(spec: &SketchSpec) -> usize {
    if let Some(k) = spec.rows_override {
        return k;
    }
    let d = spec.d as f64;
    let c = spec.sizing_constant;
    let k = match spec.family {
        SketchFamily::CountSketch => ceil_snapped(c * (d / spec.eps).powi(2)),
        SketchFamily::Osnap => ceil_snapped(c * d / (spec.eps * spec.eps) * d.log2()),
        SketchFamily::Srht => {
            ceil_snapped(c * d / (spec.eps * spec.eps) * d.log2()).max(1).next_power_of_two()
        }
    };
    k.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_rules() {
        let cs = SketchSpec::new(SketchFamily::CountSketch, 0.5, 16, 0);
        assert_eq!(cs.rows(), 1024);
        let os = SketchSpec::new(SketchFamily::Osnap, 0.5, 16, 0);
        assert_eq!(os.rows(), 256);
        let os = SketchSpec::new(SketchFamily::Osnap, 0.5, 10, 0);
        // 40 * log2 10 = 132.87...
        assert_eq!(os.rows(), 133);
        let sr = SketchSpec::new(SketchFamily::Srht, 0.5, 16, 0);
        assert_eq!(sr.rows(), 256);
        for fam in SketchFamily::ALL {
            assert_eq!(SketchSpec::new(fam, 0.5, 16, 0).with_rows(64).rows(), 64);
        }
    }

    #[test]
    fn sizing_constant_scales() {
        let cs = SketchSpec::new(SketchFamily::CountSketch, 0.5, 16, 0).with_sizing_constant(0.25);
        assert_eq!(cs.rows(), 256);
        // (10 / 0.1)^2 is 10000 up to rounding noise.
        let cs = SketchSpec::new(SketchFamily::CountSketch, 0.1, 10, 0);
        assert_eq!(cs.rows(), 10000);
    }

    #[test]
    fn degenerate_dimensions() {
        let os = SketchSpec::new(SketchFamily::Osnap, 0.5, 1, 0);
        assert_eq!(os.rows(), 1);
        assert_eq!(os.sparsity(), 1);
        assert!(os.validate().is_ok());
        assert_eq!(SketchSpec::new(SketchFamily::Srht, 0.5, 1, 0).rows(), 1);
    }

    #[test]
    fn default_osnap_sparsity() {
        assert_eq!(SketchSpec::new(SketchFamily::Osnap, 0.5, 16, 0).sparsity(), 4);
        assert_eq!(SketchSpec::new(SketchFamily::Osnap, 0.5, 10, 0).sparsity(), 4);
        assert_eq!(SketchSpec::new(SketchFamily::Osnap, 0.5, 256, 0).sparsity(), 8);
        assert_eq!(SketchSpec::new(SketchFamily::Osnap, 0.5, 10, 0).with_sparsity(2).sparsity(), 2);
    }

    #[test]
    fn validation() {
        assert!(SketchSpec::new(SketchFamily::Osnap, 0.0, 4, 0).validate().is_err());
        assert!(SketchSpec::new(SketchFamily::Osnap, 1.0, 4, 0).validate().is_err());
        assert!(SketchSpec::new(SketchFamily::Osnap, 0.5, 0, 0).validate().is_err());
        assert!(SketchSpec::new(SketchFamily::Osnap, 0.5, 4, 0).with_rows(0).validate().is_err());
        assert!(SketchSpec::new(SketchFamily::Osnap, 0.5, 4, 0)
            .with_rows(2)
            .with_sparsity(3)
            .validate()
            .is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("CountSketch".parse::<SketchFamily>().unwrap(), SketchFamily::CountSketch);
        assert_eq!("fjlt".parse::<SketchFamily>().unwrap(), SketchFamily::Srht);
        assert!("gaussian".parse::<SketchFamily>().is_err());
    }
}
