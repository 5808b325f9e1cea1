//! Timing benchmarks and figure data on synthetic inputs.
//!
//! Matrices are generated before any timer starts; timings cover only the
//! score computation.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leverage::{
    error_stats, leverage_exact, leverage_exact_truncated, leverage_sketched,
    leverage_sketched_trunc, ErrorStats,
};
use crate::limits;
use crate::matrix::{format_f64, gen_synthetic, Matrix, SyntheticSpec};
use crate::sketch::{sketch_matrix, SketchFamily, SketchSpec};
use crate::svd::thin_svd;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    Exact,
    CountSketch,
    Osnap,
    Srht,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 4] = [
        BenchMethod::Exact,
        BenchMethod::CountSketch,
        BenchMethod::Osnap,
        BenchMethod::Srht,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Exact => "exact",
            BenchMethod::CountSketch => "countsketch",
            BenchMethod::Osnap => "osnap",
            BenchMethod::Srht => "srht",
        }
    }

    pub fn family(self) -> Option<SketchFamily> {
        match self {
            BenchMethod::Exact => None,
            BenchMethod::CountSketch => Some(SketchFamily::CountSketch),
            BenchMethod::Osnap => Some(SketchFamily::Osnap),
            BenchMethod::Srht => Some(SketchFamily::Srht),
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "svd" => Ok(BenchMethod::Exact),
            other => other
                .parse::<SketchFamily>()
                .map(|f| match f {
                    SketchFamily::CountSketch => BenchMethod::CountSketch,
                    SketchFamily::Osnap => BenchMethod::Osnap,
                    SketchFamily::Srht => BenchMethod::Srht,
                }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchScenario {
    pub name: String,
    pub cells: Vec<SyntheticSpec>,
    pub methods: Vec<BenchMethod>,
    pub eps: Vec<f64>,
    pub repeats: usize,
    pub sizing_constant: f64,
    pub seed: u64,
}

fn power_grid(ks: &[u32], d: usize, seed: u64) -> Vec<SyntheticSpec> {
    ks.iter()
        .map(|&k| SyntheticSpec::full_rank(1 << k, d, seed))
        .collect()
}

impl BenchScenario {
    pub const PRESETS: [&'static str; 4] = ["smoke", "table1", "table2", "table3"];

    /// Named grids: `smoke` is one 1024x16 cell, `table1` is `n x 50` with
    /// SRHT at eps 0.25, `table2` and `table3` are `2^k x 16` and `2^k x 256`
    /// for `k` in {10, 14, 18} at eps 0.5.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let (cells, methods, eps, repeats) = match name {
            "smoke" => (power_grid(&[10], 16, seed), BenchMethod::ALL.to_vec(), vec![0.5], 3),
            "table1" => (
                power_grid(&[16, 18, 20], 50, seed),
                vec![BenchMethod::Exact, BenchMethod::Srht],
                vec![0.25],
                1,
            ),
            "table2" | "table3" => (
                power_grid(&[10, 14, 18], if name == "table2" { 16 } else { 256 }, seed),
                vec![BenchMethod::Exact, BenchMethod::CountSketch, BenchMethod::Osnap],
                vec![0.5],
                1,
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown bench scenario {other:?}; expected one of {:?}",
                    Self::PRESETS
                )))
            }
        };
        Ok(BenchScenario {
            name: name.to_string(),
            cells,
            methods,
            eps,
            repeats,
            sizing_constant: 1.0,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidSpec("repeats must be >= 1".into()));
        }
        if self.cells.is_empty() || self.methods.is_empty() || self.eps.is_empty() {
            return Err(Error::InvalidSpec(format!("scenario {} has an empty grid", self.name)));
        }
        for c in &self.cells {
            c.validate()?;
        }
        for &e in &self.eps {
            self.spec_for(BenchMethod::CountSketch, e, 1).validate()?;
        }
        Ok(())
    }

    fn spec_for(&self, family: BenchMethod, eps: f64, d: usize) -> SketchSpec {
        let family = family.family().unwrap_or(SketchFamily::CountSketch);
        SketchSpec::new(family, eps, d, self.seed).with_sizing_constant(self.sizing_constant)
    }

    /// Rough peak bytes for one cell, input included.
    pub fn cell_bytes(&self, cell: &SyntheticSpec, method: BenchMethod, eps: f64) -> u128 {
        let (n, d) = (cell.n as u128, cell.d as u128);
        let input = n * d * 8;
        match method {
            // Working copy, U, and the returned factor.
            BenchMethod::Exact => input * 4,
            BenchMethod::Srht => {
                let m = (cell.n as u128).next_power_of_two();
                let k = self.spec_for(method, eps, cell.d).rows() as u128;
                input + m * d * 8 + k * d * 8 * 3
            }
            _ => {
                let k = self.spec_for(method, eps, cell.d).rows() as u128;
                input + k * d * (8 * 3 + 4) + k * d * 8 * 3
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub n: usize,
    pub d: usize,
    pub method: BenchMethod,
    pub eps: f64,
    pub repeat: usize,
    pub seconds: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub n: usize,
    pub d: usize,
    pub method: BenchMethod,
    pub eps: f64,
    pub median_seconds: Option<f64>,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: BenchScenario,
    pub records: Vec<BenchRecord>,
    pub summary: Vec<BenchSummary>,
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Time one score computation on a pre-generated matrix.
pub fn time_method(a: &Matrix, method: BenchMethod, spec: &SketchSpec) -> Result<f64> {
    let start = Instant::now();
    let scores = match method {
        BenchMethod::Exact => leverage_exact(a)?,
        _ => leverage_sketched(a, spec)?,
    };
    let secs = start.elapsed().as_secs_f64();
    std::hint::black_box(scores);
    Ok(secs)
}

/// Runs every cell; capacity and numeric failures are recorded, not fatal.
pub fn run_bench(scenario: &BenchScenario) -> Result<BenchReport> {
    scenario.validate()?;
    let cap = limits::mem_cap();
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for cell in &scenario.cells {
        let input_ok = limits::check_against("bench input", cell.n as u128 * cell.d as u128, 8, cap);
        let a = match input_ok.and_then(|_| gen_synthetic(cell)) {
            Ok(a) => Some(a),
            Err(e) => {
                for &method in &scenario.methods {
                    for &eps in &scenario.eps {
                        records.push(skipped(cell, method, eps, &e));
                        summary.push(empty_summary(cell, method, eps));
                    }
                }
                None
            }
        };
        let Some(a) = a else { continue };
        for &method in &scenario.methods {
            // The exact method ignores eps; time it once.
            let eps_grid: &[f64] = if method == BenchMethod::Exact {
                &scenario.eps[..1]
            } else {
                &scenario.eps
            };
            for &eps in eps_grid {
                let spec = scenario.spec_for(method, eps, cell.d);
                let need = scenario.cell_bytes(cell, method, eps);
                if let Err(e) = limits::check_against("bench cell", need, 1, cap) {
                    records.push(skipped(cell, method, eps, &e));
                    summary.push(empty_summary(cell, method, eps));
                    continue;
                }
                let mut times = Vec::new();
                for repeat in 0..scenario.repeats {
                    let (seconds, note) = match time_method(&a, method, &spec) {
                        Ok(s) => {
                            times.push(s);
                            (Some(s), String::new())
                        }
                        Err(e) => (None, format!("failed: {e}")),
                    };
                    records.push(BenchRecord {
                        n: cell.n,
                        d: cell.d,
                        method,
                        eps,
                        repeat,
                        seconds,
                        note,
                    });
                }
                summary.push(BenchSummary {
                    n: cell.n,
                    d: cell.d,
                    method,
                    eps,
                    median_seconds: median(&times),
                    runs: times.len(),
                });
            }
        }
    }
    Ok(BenchReport {
        scenario: scenario.clone(),
        records,
        summary,
    })
}

fn skipped(cell: &SyntheticSpec, method: BenchMethod, eps: f64, e: &Error) -> BenchRecord {
    BenchRecord {
        n: cell.n,
        d: cell.d,
        method,
        eps,
        repeat: 0,
        seconds: None,
        note: format!("skipped: {e}"),
    }
}

fn empty_summary(cell: &SyntheticSpec, method: BenchMethod, eps: f64) -> BenchSummary {
    BenchSummary {
        n: cell.n,
        d: cell.d,
        method,
        eps,
        median_seconds: None,
        runs: 0,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

impl BenchReport {
    pub fn write_records_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "n,d,method,eps,repeat,seconds,note")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.n,
                r.d,
                r.method,
                format_f64(r.eps),
                r.repeat,
                opt(r.seconds),
                r.note.replace(',', ";")
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "n,d,method,eps,median_seconds,runs")?;
        for s in &self.summary {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.n,
                s.d,
                s.method,
                format_f64(s.eps),
                opt(s.median_seconds),
                s.runs
            )?;
        }
        Ok(())
    }

    pub fn median_for(&self, n: usize, method: BenchMethod) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.n == n && s.method == method)
            .and_then(|s| s.median_seconds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    RankFull,
    RankHalf,
    TruncFix,
    Spectrum,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] = [
        FigureKind::RankFull,
        FigureKind::RankHalf,
        FigureKind::TruncFix,
        FigureKind::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::RankFull => "rank_full",
            FigureKind::RankHalf => "rank_half",
            FigureKind::TruncFix => "trunc_fix",
            FigureKind::Spectrum => "spectrum",
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rank_full" => Ok(FigureKind::RankFull),
            "rank_half" => Ok(FigureKind::RankHalf),
            "trunc_fix" => Ok(FigureKind::TruncFix),
            "spectrum" => Ok(FigureKind::Spectrum),
            other => Err(Error::InvalidSpec(format!("unknown figure kind {other:?}"))),
        }
    }
}

/// Inputs shared by all figure kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureConfig {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub seed: u64,
    pub sv_tols: Vec<f64>,
    /// Size of the low-rank-plus-noise input: `n x d`, rank, noise sigma.
    pub noisy: (usize, usize, usize, f64),
    pub sizing_constant: f64,
}

impl Default for FigureConfig {
    fn default() -> Self {
        FigureConfig {
            n: 4096,
            d: 10,
            eps: 0.5,
            seed: 1,
            sv_tols: vec![1e-2, 1e-3],
            noisy: (20_000, 200, 50, 1e-3),
            sizing_constant: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub exact: Vec<f64>,
    pub approx: Vec<f64>,
    pub stats: ErrorStats,
    pub effective_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub name: String,
    pub sigma_a: Vec<f64>,
    pub sigma_sa: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FigureData {
    Scatter(Vec<Series>),
    Spectrum(Vec<Spectrum>),
}

impl FigureConfig {
    fn spec(&self, family: SketchFamily, d: usize) -> SketchSpec {
        SketchSpec::new(family, self.eps, d, self.seed).with_sizing_constant(self.sizing_constant)
    }

    fn band(&self) -> f64 {
        2.0 * self.eps
    }

    fn synthetic(&self, rank: usize) -> Result<Matrix> {
        gen_synthetic(&SyntheticSpec {
            n: self.n,
            d: self.d,
            rank,
            noise_sigma: 0.0,
            seed: self.seed,
        })
    }

    fn noisy(&self) -> Result<Matrix> {
        let (n, d, rank, noise_sigma) = self.noisy;
        gen_synthetic(&SyntheticSpec {
            n,
            d,
            rank,
            noise_sigma,
            seed: self.seed,
        })
    }

    fn series(&self, name: String, exact: Vec<f64>, approx: Vec<f64>, rank: usize) -> Series {
        let stats = error_stats(&exact, &approx, self.band());
        Series {
            name,
            exact,
            approx,
            stats,
            effective_rank: rank,
        }
    }
}

const SCATTER_FAMILIES: [SketchFamily; 2] = [SketchFamily::CountSketch, SketchFamily::Srht];

/// Computes the data behind one figure.
///
/// * `rank_full`: full-rank input, untruncated sketches vs exact scores.
/// * `rank_half`: rank `d/2` input, untruncated sketches vs exact scores.
/// * `trunc_fix`: the rank `d/2` input and the noisy low-rank input, truncated
///   sketches vs exact scores truncated at the same tolerance; the noisy input
///   uses OSNAP and also gets an untruncated series against its rank-`r` reference.
/// * `spectrum`: singular values of `A` and `SA` for each family.
pub fn figure(kind: FigureKind, cfg: &FigureConfig) -> Result<FigureData> {
    match kind {
        FigureKind::RankFull | FigureKind::RankHalf => {
            let rank = if kind == FigureKind::RankFull { cfg.d } else { (cfg.d / 2).max(1) };
            let a = cfg.synthetic(rank)?;
            let exact = leverage_exact(&a)?;
            let mut out = Vec::new();
            for fam in SCATTER_FAMILIES {
                let approx = leverage_sketched(&a, &cfg.spec(fam, cfg.d))?;
                out.push(cfg.series(
                    fam.name().to_string(),
                    exact.scores.clone(),
                    approx.scores,
                    approx.effective_rank,
                ));
            }
            Ok(FigureData::Scatter(out))
        }
        FigureKind::TruncFix => {
            let mut out = Vec::new();
            let a = cfg.synthetic((cfg.d / 2).max(1))?;
            for &tol in &cfg.sv_tols {
                let exact = leverage_exact_truncated(&a, tol)?;
                for fam in SCATTER_FAMILIES {
                    let approx = leverage_sketched_trunc(&a, &cfg.spec(fam, cfg.d), tol)?;
                    out.push(cfg.series(
                        format!("rank_half/{}/{}", fam.name(), format_f64(tol)),
                        exact.scores.clone(),
                        approx.scores,
                        approx.effective_rank,
                    ));
                }
            }
            let b = cfg.noisy()?;
            let spec = cfg.spec(SketchFamily::Osnap, b.cols());
            let plain = leverage_sketched(&b, &spec)?;
            for (i, &tol) in cfg.sv_tols.iter().enumerate() {
                let exact = leverage_exact_truncated(&b, tol)?;
                if i == 0 {
                    out.push(cfg.series(
                        "noisy/osnap/untruncated".to_string(),
                        exact.scores.clone(),
                        plain.scores.clone(),
                        plain.effective_rank,
                    ));
                }
                let approx = leverage_sketched_trunc(&b, &spec, tol)?;
                out.push(cfg.series(
                    format!("noisy/osnap/{}", format_f64(tol)),
                    exact.scores,
                    approx.scores,
                    approx.effective_rank,
                ));
            }
            Ok(FigureData::Scatter(out))
        }
        FigureKind::Spectrum => {
            let mut out = Vec::new();
            let inputs = [
                ("rank_full", cfg.synthetic(cfg.d)?),
                ("rank_half", cfg.synthetic((cfg.d / 2).max(1))?),
                ("noisy", cfg.noisy()?),
            ];
            for (label, a) in &inputs {
                let sigma_a = thin_svd(a)?.sigma;
                for fam in SketchFamily::ALL {
                    let sa = sketch_matrix(&cfg.spec(fam, a.cols()), a)?;
                    out.push(Spectrum {
                        name: format!("{label}/{}", fam.name()),
                        sigma_a: sigma_a.clone(),
                        sigma_sa: thin_svd(&sa)?.sigma,
                    });
                }
            }
            Ok(FigureData::Spectrum(out))
        }
    }
}

impl FigureData {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        match self {
            FigureData::Scatter(series) => {
                writeln!(w, "series,index,exact,approx")?;
                for s in series {
                    for (i, (e, a)) in s.exact.iter().zip(&s.approx).enumerate() {
                        writeln!(w, "{},{},{},{}", s.name, i, format_f64(*e), format_f64(*a))?;
                    }
                }
            }
            FigureData::Spectrum(curves) => {
                writeln!(w, "series,j,sigma_a,sigma_sa")?;
                for c in curves {
                    for (j, (a, sa)) in c.sigma_a.iter().zip(&c.sigma_sa).enumerate() {
                        writeln!(w, "{},{},{},{}", c.name, j, format_f64(*a), format_f64(*sa))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-series error statistics; empty for spectra.
    pub fn stats(&self) -> Vec<(&str, &ErrorStats)> {
        match self {
            FigureData::Scatter(series) => series.iter().map(|s| (s.name.as_str(), &s.stats)).collect(),
            FigureData::Spectrum(_) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn presets_validate() {
        for name in BenchScenario::PRESETS {
            BenchScenario::preset(name, 1).unwrap().validate().unwrap();
        }
        assert!(BenchScenario::preset("table9", 1).is_err());
        let mut s = BenchScenario::preset("smoke", 1).unwrap();
        s.repeats = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn smoke_runs_every_method() {
        let report = run_bench(&BenchScenario::preset("smoke", 3).unwrap()).unwrap();
        assert_eq!(report.records.len(), 4 * 3);
        assert!(report.records.iter().all(|r| r.seconds.is_some()), "{report:?}");
        assert_eq!(report.summary.len(), 4);
        let mut csv = Vec::new();
        report.write_records_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 13);
    }

    #[test]
    fn oversized_cells_are_skipped() {
        let mut s = BenchScenario::preset("smoke", 1).unwrap();
        s.cells.push(SyntheticSpec::full_rank(1 << 40, 1 << 10, 1));
        let report = run_bench(&s).unwrap();
        let skipped: Vec<_> = report.records.iter().filter(|r| r.n == 1 << 40).collect();
        assert_eq!(skipped.len(), 4);
        assert!(skipped.iter().all(|r| r.seconds.is_none() && r.note.starts_with("skipped")));
    }

    #[test]
    fn method_and_kind_names_parse() {
        for m in BenchMethod::ALL {
            assert_eq!(m.name().parse::<BenchMethod>().unwrap(), m);
        }
        for k in FigureKind::ALL {
            assert_eq!(k.name().parse::<FigureKind>().unwrap(), k);
        }
        assert_eq!("rank-half".parse::<FigureKind>().unwrap(), FigureKind::RankHalf);
    }

    #[test]
    fn small_figures_have_expected_shape() {
        let cfg = FigureConfig {
            n: 512,
            d: 6,
            noisy: (600, 12, 4, 1e-3),
            ..FigureConfig::default()
        };
        let FigureData::Scatter(full) = figure(FigureKind::RankFull, &cfg).unwrap() else {
            panic!("expected scatter")
        };
        assert_eq!(full.len(), 2);
        assert!(full.iter().all(|s| s.exact.len() == 512 && s.approx.len() == 512));
        let FigureData::Scatter(fix) = figure(FigureKind::TruncFix, &cfg).unwrap() else {
            panic!("expected scatter")
        };
        assert_eq!(fix.len(), 2 * 2 + 1 + 2);
        let FigureData::Spectrum(curves) = figure(FigureKind::Spectrum, &cfg).unwrap() else {
            panic!("expected spectrum")
        };
        assert_eq!(curves.len(), 3 * 3);
    }
}
