//! Operation counting and the empirical check of the complexity bound.
//!
//! LGCA over `N` crops and `M` descriptions is claimed to cost at most
//! `2NM` alignment entries and `O(NM log NM)` comparisons. [`verify_bound`]
//! runs the pipeline on synthetic toy fixtures over a grid of `(N, M)` and
//! checks both: the entry count exactly, the comparison count against a
//! fitted constant `c <= COMPARISON_CONSTANT_LIMIT`.

use std::ops::AddAssign;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{ToyEncoder, ToyWorld};
use crate::error::{Error, Result};
use crate::geometry::{CropParams, ImageFrame};
use crate::pipeline::{Lgca, LgcaConfig};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub matrix_entries: u64,
    pub sort_comparisons: u64,
    pub encoder_calls: u64,
    pub expansions: u64,
}

impl OpCounters {
    pub fn total(&self) -> u64 {
        self.matrix_entries + self.sort_comparisons + self.encoder_calls + self.expansions
    }

    fn max(self, other: Self) -> Self {
        Self {
            matrix_entries: self.matrix_entries.max(other.matrix_entries),
            sort_comparisons: self.sort_comparisons.max(other.sort_comparisons),
            encoder_calls: self.encoder_calls.max(other.encoder_calls),
            expansions: self.expansions.max(other.expansions),
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.matrix_entries += rhs.matrix_entries;
        self.sort_comparisons += rhs.sort_comparisons;
        self.encoder_calls += rhs.encoder_calls;
        self.expansions += rhs.expansions;
    }
}

pub const COMPARISON_CONSTANT_LIMIT: f64 = 4.0;
pub const DEFAULT_N_GRID: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];
pub const DEFAULT_M_GRID: [usize; 3] = [8, 32, 128];

const BENCH_IMAGE_ID: &str = "bench";
const BENCH_LABEL: &str = "target";
const BENCH_SIDE: u32 = 256;
const BENCH_GRID: usize = 16;
const BENCH_DIM: usize = 16;
const BENCH_VOCAB: [&str; 12] = [
    "beak", "wing", "tail", "crest", "breast", "leg", "eye", "feather", "sky", "water", "reed", "rock",
];

/// A random toy image plus `M` random descriptions for one label.
#[derive(Debug, Clone)]
pub struct BenchFixture {
    pub image: ImageFrame,
    pub encoder: ToyEncoder,
    pub label: String,
    pub descriptions: Vec<String>,
}

impl BenchFixture {
    pub fn synthetic(m_descriptions: usize, seed: u64) -> Result<Self> {
        if m_descriptions == 0 {
            return Err(Error::InvalidParams("bench needs at least one description".into()));
        }
        let mut rng = Stream::new(seed);
        let pick = |rng: &mut Stream| BENCH_VOCAB[rng.below(BENCH_VOCAB.len() as u32) as usize];
        let rows = (0..BENCH_GRID)
            .map(|_| (0..BENCH_GRID).map(|_| pick(&mut rng).to_string()).collect())
            .collect();
        let mut world = ToyWorld::new(BENCH_DIM, seed)?;
        world.insert_grid(BENCH_IMAGE_ID, rows)?;
        let descriptions = (0..m_descriptions)
            .map(|i| {
                let a = pick(&mut rng);
                let b = pick(&mut rng);
                // the index keeps descriptions distinct
                format!("{a} {b} d{i}")
            })
            .collect();
        Ok(Self {
            image: ImageFrame::filled(BENCH_IMAGE_ID, BENCH_SIDE, BENCH_SIDE, [127, 127, 127])?,
            encoder: ToyEncoder::new(world),
            label: BENCH_LABEL.to_string(),
            descriptions,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    /// Count LGCA against the baseline.
    #[default]
    Lgca,
    /// Count the baseline on both sides; every ratio is 1.
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    Lgca,
    Baseline,
}

/// Runs one scorer on a fixture and returns what it spent.
pub fn run_counted(fixture: &BenchFixture, config: &LgcaConfig, scorer: Scorer) -> Result<OpCounters> {
    let lgca = Lgca::new(config.clone(), &fixture.encoder)?;
    let mut counters = OpCounters::default();
    let prepared = lgca.prepare(&fixture.image, &mut counters)?;
    let descs = lgca.describe(&fixture.label, &fixture.descriptions, &mut counters)?;
    match scorer {
        Scorer::Lgca => {
            lgca.similarity(&prepared, &fixture.label, &descs, &mut counters)?;
        }
        Scorer::Baseline => {
            lgca.baseline_q(&prepared, &descs, &mut counters)?;
        }
    }
    Ok(counters)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub n: usize,
    pub m: usize,
    /// Elementwise maximum over trials.
    pub lgca: OpCounters,
    pub q: OpCounters,
    pub entries_bound: u64,
    /// `comparisons / (NM log2 NM)`.
    pub comparison_constant: f64,
    pub entries_ratio: f64,
    pub total_ratio: f64,
    /// Informational only; not part of the check.
    pub wall_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub mode: BenchMode,
    pub trials: u64,
    pub points: Vec<GridPoint>,
    pub fitted_c: f64,
    pub c_limit: f64,
}

fn nm_log_nm(n: usize, m: usize) -> f64 {
    let nm = (n * m) as f64;
    // log2(2) = 1 keeps the smallest grid points meaningful
    nm * nm.log2().max(1.0)
}

fn measure_point(n: usize, m: usize, trials: u64, mode: BenchMode) -> Result<GridPoint> {
    let mut lgca_max = OpCounters::default();
    let mut q_max = OpCounters::default();
    let (mut lgca_time, mut q_time) = (0.0, 0.0);
    let bound = 2 * (n * m) as u64;
    for trial in 0..trials {
        let fixture = BenchFixture::synthetic(m, trial)?;
        let config = LgcaConfig {
            crop: CropParams {
                n_crops: n,
                seed: trial,
                ..CropParams::default()
            },
            ..LgcaConfig::default()
        };
        let start = Instant::now();
        let lgca = match mode {
            BenchMode::Lgca => run_counted(&fixture, &config, Scorer::Lgca)?,
            BenchMode::Q => run_counted(&fixture, &config, Scorer::Baseline)?,
        };
        lgca_time += start.elapsed().as_secs_f64();
        let start = Instant::now();
        let q = run_counted(&fixture, &config, Scorer::Baseline)?;
        q_time += start.elapsed().as_secs_f64();

        if lgca.matrix_entries > bound {
            return Err(Error::BoundViolated {
                n,
                m,
                detail: format!("{} alignment entries exceed 2NM = {bound}", lgca.matrix_entries),
            });
        }
        lgca_max = lgca_max.max(lgca);
        q_max = q_max.max(q);
    }
    let ratio = |a: u64, b: u64| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(GridPoint {
        n,
        m,
        lgca: lgca_max,
        q: q_max,
        entries_bound: bound,
        comparison_constant: lgca_max.sort_comparisons as f64 / nm_log_nm(n, m),
        entries_ratio: ratio(lgca_max.matrix_entries, q_max.matrix_entries),
        total_ratio: ratio(lgca_max.total(), q_max.total()),
        wall_ratio: if q_time > 0.0 { lgca_time / q_time } else { f64::NAN },
    })
}

/// Measures every `(N, M)` pair and checks the bound on each trial.
pub fn verify_bound(n_grid: &[usize], m_grid: &[usize], trials: u64, mode: BenchMode) -> Result<ComplexityReport> {
    if n_grid.is_empty() || m_grid.is_empty() || trials == 0 {
        return Err(Error::InvalidParams("bench grid and trials must be non-empty".into()));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 2) {
        return Err(Error::DegenerateN(n));
    }
    let pairs: Vec<(usize, usize)> = n_grid
        .iter()
        .flat_map(|&n| m_grid.iter().map(move |&m| (n, m)))
        .collect();
    let points = pairs
        .par_iter()
        .map(|&(n, m)| measure_point(n, m, trials, mode))
        .collect::<Result<Vec<_>>>()?;
    let worst = points
        .iter()
        .max_by(|a, b| a.comparison_constant.total_cmp(&b.comparison_constant))
        .expect("non-empty grid");
    let fitted_c = worst.comparison_constant;
    if fitted_c > COMPARISON_CONSTANT_LIMIT {
        return Err(Error::BoundViolated {
            n: worst.n,
            m: worst.m,
            detail: format!(
                "{} comparisons give c = {fitted_c:.3} > {COMPARISON_CONSTANT_LIMIT}",
                worst.lgca.sort_comparisons
            ),
        });
    }
    Ok(ComplexityReport {
        mode,
        trials,
        points,
        fitted_c,
        c_limit: COMPARISON_CONSTANT_LIMIT,
    })
}

impl ComplexityReport {
    pub const CSV_HEADER: [&'static str; 6] = ["N", "M", "entries_q", "entries_lgca", "comparisons_lgca", "ratio"];

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER).map_err(csv_error)?;
        for p in &self.points {
            out.write_record([
                p.n.to_string(),
                p.m.to_string(),
                p.q.matrix_entries.to_string(),
                p.lgca.matrix_entries.to_string(),
                p.lgca.sort_comparisons.to_string(),
                format_sig9(p.entries_ratio),
            ])
            .map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParams(format!("csv: {other:?}")),
    }
}

/// Formats with 9 significant digits, dropping trailing zeros.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.8e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ScheduleMode;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.155514294123), "0.155514294");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn synthetic_fixture_is_deterministic() {
        let a = BenchFixture::synthetic(5, 3).unwrap();
        let b = BenchFixture::synthetic(5, 3).unwrap();
        assert_eq!(a.descriptions, b.descriptions);
        let cfg = LgcaConfig {
            crop: CropParams { n_crops: 16, ..CropParams::default() },
            ..LgcaConfig::default()
        };
        assert_eq!(
            run_counted(&a, &cfg, Scorer::Lgca).unwrap(),
            run_counted(&b, &cfg, Scorer::Lgca).unwrap()
        );
    }

    #[test]
    fn baseline_counts() {
        let f = BenchFixture::synthetic(7, 0).unwrap();
        let cfg = LgcaConfig {
            crop: CropParams { n_crops: 20, ..CropParams::default() },
            ..LgcaConfig::default()
        };
        let q = run_counted(&f, &cfg, Scorer::Baseline).unwrap();
        assert_eq!(q.matrix_entries, 140);
        assert_eq!(q.sort_comparisons, 0);
        assert_eq!(q.expansions, 0);
        // full image + crops + label + descriptions
        assert_eq!(q.encoder_calls, 1 + 20 + 1 + 7);
    }

    #[test]
    fn single_step_costs_baseline_plus_one_selection() {
        let f = BenchFixture::synthetic(4, 1).unwrap();
        let cfg = LgcaConfig {
            crop: CropParams { n_crops: 30, ..CropParams::default() },
            schedule: ScheduleMode::FixedInitial,
            fixed_topk: 1,
            ..LgcaConfig::default()
        };
        let q = run_counted(&f, &cfg, Scorer::Baseline).unwrap();
        let l = run_counted(&f, &cfg, Scorer::Lgca).unwrap();
        assert_eq!(l.matrix_entries, q.matrix_entries);
        assert_eq!(l.expansions, 1);
        assert_eq!(l.encoder_calls, q.encoder_calls + 1);
        // k = 1 keeps one heap slot: one comparison per remaining entry
        assert_eq!(l.sort_comparisons, 30 * 4 - 1);
    }

    #[test]
    fn entry_counts_follow_the_surviving_crops() {
        let f = BenchFixture::synthetic(50, 4).unwrap();
        let cfg = LgcaConfig {
            crop: CropParams { n_crops: 100, ..CropParams::default() },
            ..LgcaConfig::default()
        };
        assert_eq!(run_counted(&f, &cfg, Scorer::Baseline).unwrap().matrix_entries, 5000);

        let lgca = Lgca::new(cfg, &f.encoder).unwrap();
        let mut c = OpCounters::default();
        let prepared = lgca.prepare(&f.image, &mut c).unwrap();
        let descs = lgca.describe(&f.label, &f.descriptions, &mut c).unwrap();
        let before = c.matrix_entries;
        let score = lgca.similarity(&prepared, &f.label, &descs, &mut c).unwrap();
        // one matrix per scored step; the crops left after the last step are never scored
        let expected: usize = score.steps.iter().map(|s| s.crops_in * 50).sum();
        assert_eq!(c.matrix_entries - before, expected as u64);
        assert!(expected <= (100 + 50 + 25 + 12 + 6 + 3) * 50);

        let tiny = BenchFixture::synthetic(1, 0).unwrap();
        let cfg = LgcaConfig {
            crop: CropParams { n_crops: 2, ..CropParams::default() },
            ..LgcaConfig::default()
        };
        assert_eq!(run_counted(&tiny, &cfg, Scorer::Lgca).unwrap().matrix_entries, 2);
    }

    #[test]
    fn small_grid_satisfies_bound() {
        let report = verify_bound(&[16, 32], &[8], 1, BenchMode::Lgca).unwrap();
        assert_eq!(report.points.len(), 2);
        for p in &report.points {
            assert!(p.lgca.matrix_entries <= p.entries_bound);
            assert!(p.entries_ratio < 2.0);
        }
        assert!(report.fitted_c <= COMPARISON_CONSTANT_LIMIT);
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("N,M,entries_q,entries_lgca,comparisons_lgca,ratio\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn q_mode_ratios_are_one() {
        let report = verify_bound(&[16], &[8, 32], 1, BenchMode::Q).unwrap();
        for p in &report.points {
            assert_eq!(p.entries_ratio, 1.0);
            assert_eq!(p.total_ratio, 1.0);
        }
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(matches!(verify_bound(&[1, 16], &[8], 1, BenchMode::Lgca), Err(Error::DegenerateN(1))));
        assert!(verify_bound(&[], &[8], 1, BenchMode::Lgca).is_err());
    }
}
