//! Experiment driver: threshold sweeps, failure thresholds and plot data.

mod format;
pub mod spec_file;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::gen::{generate, ExperimentConfig, Family};
use crate::heuristics::{Heuristic, Mode};
use crate::model::{evaluate_unchecked, PipelineApp, Platform};
use crate::oracle::optimal_latency;
pub use format::sig6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("heuristic never fails on the grid (smallest value {grid_min})")]
    NeverFails { grid_min: f64 },
    #[error("heuristic fails on the whole grid (largest value {grid_max})")]
    AlwaysFails { grid_max: f64 },
}

/// Threshold values to try.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Explicit(Vec<f64>),
    Geometric { min: f64, max: f64, count: usize },
    /// Per instance: `count` geometric points over `[0.01 L, 10 L]` where
    /// `L` is the optimal latency (the single-interval cost).
    Auto { count: usize },
}

impl Grid {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidGrid(m.to_string()));
        match self {
            Grid::Explicit(v) => {
                if v.is_empty() {
                    return bad("empty grid");
                }
                if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return bad("grid values must be positive and finite");
                }
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("grid values must be strictly increasing");
                }
                Ok(())
            }
            Grid::Geometric { min, max, count } => {
                if *count == 0 || !(min.is_finite() && max.is_finite() && *min > 0.0) {
                    return bad("geometric grid needs 0 < min and count >= 1");
                }
                if (*count > 1 && min >= max) || (*count == 1 && min > max) {
                    return bad("geometric grid needs min < max");
                }
                Ok(())
            }
            Grid::Auto { count } if *count == 0 => bad("auto grid needs count >= 1"),
            Grid::Auto { .. } => Ok(()),
        }
    }

    /// The grid values for one instance.
    pub fn values(&self, app: &PipelineApp, platform: &Platform) -> Vec<f64> {
        match self {
            Grid::Explicit(v) => v.clone(),
            Grid::Geometric { min, max, count } => geometric(*min, *max, *count),
            Grid::Auto { count } => {
                let (l, _) = optimal_latency(app, platform);
                geometric(0.01 * l, 10.0 * l, *count)
            }
        }
    }
}

fn geometric(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    let ratio = (max / min).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| match i {
            0 => min,
            i if i == count - 1 => max,
            i => min * (ratio * i as f64).exp(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// One entry per (family, n, p); `seed` is the batch's base seed.
    pub configs: Vec<ExperimentConfig>,
    pub instances: u64,
    pub heuristics: Vec<Heuristic>,
    /// Grid for the period-constrained heuristics.
    pub period_grid: Option<Grid>,
    /// Grid for the latency-constrained heuristics.
    pub latency_grid: Option<Grid>,
}

impl SweepSpec {
    pub fn grid(&self, mode: Mode) -> Option<&Grid> {
        match mode {
            Mode::Period => self.period_grid.as_ref(),
            Mode::Latency => self.latency_grid.as_ref(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.instances == 0 {
            return Err(HarnessError::InvalidSpec("instances must be >= 1".into()));
        }
        if self.heuristics.is_empty() {
            return Err(HarnessError::InvalidSpec("no heuristics selected".into()));
        }
        for h in &self.heuristics {
            self.grid(h.mode())
                .ok_or_else(|| {
                    HarnessError::InvalidSpec(format!("{h} needs a {} grid", h.mode()))
                })?
                .validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: Family,
    pub stages: usize,
    pub processors: usize,
    pub seed: u64,
    pub heuristic: Heuristic,
    pub mode: Mode,
    pub threshold: f64,
    pub feasible: bool,
    pub period: Option<f64>,
    pub latency: Option<f64>,
    pub wall_ms: f64,
    /// Mapping returned by a feasible run, in the 1-based text format.
    pub mapping: Option<String>,
}

/// Runs one heuristic at one threshold and records the outcome.
fn run_point(
    config: &ExperimentConfig,
    app: &PipelineApp,
    platform: &Platform,
    heuristic: Heuristic,
    threshold: f64,
) -> SweepRow {
    let start = Instant::now();
    let result = heuristic.run(app, platform, threshold);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (feasible, period, latency, mapping) = match result {
        Ok(m) => {
            let r = evaluate_unchecked(app, platform, &m);
            (true, Some(r.period), Some(r.latency), Some(m.to_string()))
        }
        Err(_) => (false, None, None, None),
    };
    SweepRow {
        family: config.family,
        stages: config.stages,
        processors: config.processors,
        seed: config.seed,
        heuristic,
        mode: heuristic.mode(),
        threshold,
        feasible,
        period,
        latency,
        wall_ms,
        mapping,
    }
}

/// Runs every heuristic at every grid value on every instance. Rows come out
/// ordered by (config, seed, heuristic, threshold) whatever the thread count.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, HarnessError> {
    spec.validate()?;
    let jobs: Vec<ExperimentConfig> = spec
        .configs
        .iter()
        .flat_map(|c| (0..spec.instances).map(move |k| c.nth(k)))
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|config| {
            let (app, platform) = generate(config);
            let mut rows = Vec::new();
            for &h in &spec.heuristics {
                let grid = spec.grid(h.mode()).expect("validated");
                for t in grid.values(&app, &platform) {
                    rows.push(run_point(config, &app, &platform, h, t));
                }
            }
            rows
        })
        .flatten()
        .collect();
    for v in feasibility_violations(&rows) {
        log::warn!(
            "{} on {}_n{}_p{} seed {}: feasible at {} but not at {}",
            v.heuristic,
            v.family,
            v.stages,
            v.processors,
            v.seed,
            sig6(v.feasible_at),
            sig6(v.infeasible_at)
        );
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "family,n,p,seed,heuristic,mode,threshold,feasible,period,latency,wall_ms";

/// CSV with a fixed column order, `%.6g` numbers and `\n` line endings.
/// `wall_ms` is left empty unless `timing` is set, which keeps the output
/// byte-identical between runs.
pub fn write_csv(rows: &[SweepRow], timing: bool) -> String {
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.family,
            r.stages,
            r.processors,
            r.seed,
            r.heuristic,
            r.mode,
            sig6(r.threshold),
            r.feasible,
            opt(r.period),
            opt(r.latency),
            if timing { format!("{:.3}", r.wall_ms) } else { String::new() },
        )
        .unwrap();
    }
    out
}

/// A heuristic that was feasible at some threshold and infeasible at a
/// looser one on the same instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityViolation {
    pub family: Family,
    pub stages: usize,
    pub processors: usize,
    pub seed: u64,
    pub heuristic: Heuristic,
    pub feasible_at: f64,
    pub infeasible_at: f64,
}

pub fn feasibility_violations(rows: &[SweepRow]) -> Vec<FeasibilityViolation> {
    let mut groups: BTreeMap<(Family, usize, usize, u64, Heuristic), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.family, r.stages, r.processors, r.seed, r.heuristic))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((family, stages, processors, seed, heuristic), mut g) in groups {
        g.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
        let mut first_feasible: Option<f64> = None;
        for r in g {
            match (r.feasible, first_feasible) {
                (true, None) => first_feasible = Some(r.threshold),
                (false, Some(t)) => {
                    out.push(FeasibilityViolation {
                        family,
                        stages,
                        processors,
                        seed,
                        heuristic,
                        feasible_at: t,
                        infeasible_at: r.threshold,
                    });
                    break;
                }
                _ => {}
            }
        }
    }
    out
}

/// Largest grid value at which the heuristic fails on one instance.
pub fn instance_failure_threshold(
    app: &PipelineApp,
    platform: &Platform,
    heuristic: Heuristic,
    grid: &[f64],
) -> Result<f64, HarnessError> {
    let failing: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&t| heuristic.run(app, platform, t).is_err())
        .collect();
    let grid_min = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let grid_max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match failing.len() {
        0 => Err(HarnessError::NeverFails { grid_min }),
        k if k == grid.len() => Err(HarnessError::AlwaysFails { grid_max }),
        _ => Ok(failing.into_iter().fold(f64::NEG_INFINITY, f64::max)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceOutcome {
    Fails(f64),
    NeverFails { grid_min: f64 },
    AlwaysFails { grid_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureSummary {
    pub heuristic: Heuristic,
    /// (seed, outcome) per instance.
    pub per_instance: Vec<(u64, InstanceOutcome)>,
    /// Mean over instances; a never-failing instance counts as its grid
    /// minimum, an always-failing one is left out.
    pub mean: f64,
    pub never_fails: usize,
    pub always_fails: usize,
}

/// Mean failure threshold of `heuristic` over `instances` instances drawn
/// from `config` (seeds `config.seed + k`).
pub fn failure_threshold(
    config: &ExperimentConfig,
    heuristic: Heuristic,
    grid: &Grid,
    instances: u64,
) -> Result<FailureSummary, HarnessError> {
    grid.validate()?;
    let per_instance: Vec<(u64, InstanceOutcome)> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let c = config.nth(k);
            let (app, platform) = generate(&c);
            let values = grid.values(&app, &platform);
            let outcome = match instance_failure_threshold(&app, &platform, heuristic, &values) {
                Ok(t) => InstanceOutcome::Fails(t),
                Err(HarnessError::NeverFails { grid_min }) => InstanceOutcome::NeverFails { grid_min },
                Err(HarnessError::AlwaysFails { grid_max }) => {
                    InstanceOutcome::AlwaysFails { grid_max }
                }
                Err(e) => unreachable!("{e}"),
            };
            (c.seed, outcome)
        })
        .collect();
    let counted: Vec<f64> = per_instance
        .iter()
        .filter_map(|(_, o)| match o {
            InstanceOutcome::Fails(t) => Some(*t),
            InstanceOutcome::NeverFails { grid_min } => Some(*grid_min),
            InstanceOutcome::AlwaysFails { .. } => None,
        })
        .collect();
    let never_fails = per_instance
        .iter()
        .filter(|(_, o)| matches!(o, InstanceOutcome::NeverFails { .. }))
        .count();
    let always_fails = per_instance.len() - counted.len();
    if counted.is_empty() {
        let grid_max = per_instance
            .iter()
            .filter_map(|(_, o)| match o {
                InstanceOutcome::AlwaysFails { grid_max } => Some(*grid_max),
                _ => None,
            })
            .fold(f64::NEG_INFINITY, f64::max);
        return Err(HarnessError::AlwaysFails { grid_max });
    }
    Ok(FailureSummary {
        heuristic,
        mean: counted.iter().sum::<f64>() / counted.len() as f64,
        per_instance,
        never_fails,
        always_fails,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub threshold: f64,
    /// Mean of the unconstrained metric over feasible rows.
    pub mean: Option<f64>,
    pub feasible: usize,
    pub total: usize,
}

/// One curve: a heuristic on one (family, n, p).
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub family: Family,
    pub stages: usize,
    pub processors: usize,
    pub heuristic: Heuristic,
    pub mode: Mode,
    pub points: Vec<PlotPoint>,
}

impl PlotSeries {
    pub fn file_name(&self) -> String {
        format!(
            "{}_n{}_p{}_{}.dat",
            self.family, self.stages, self.processors, self.heuristic
        )
    }

    /// Whitespace-separated columns: threshold, mean, feasible, total.
    /// Missing means are written as `nan`.
    pub fn to_text(&self) -> String {
        let metric = match self.mode {
            Mode::Period => "latency",
            Mode::Latency => "period",
        };
        let mut out = format!("# {} fixed {}: threshold mean_{} feasible total\n", self.heuristic, self.mode, metric);
        for p in &self.points {
            writeln!(
                out,
                "{} {} {} {}",
                sig6(p.threshold),
                p.mean.map(sig6).unwrap_or_else(|| "nan".into()),
                p.feasible,
                p.total
            )
            .unwrap();
        }
        out
    }
}

#[derive(Default)]
struct Accum {
    sum: f64,
    feasible: usize,
    total: usize,
}

/// Groups rows by (family, n, p, heuristic) and threshold. With an
/// instance-dependent grid every instance contributes its own x values.
pub fn aggregate_plot_data(rows: &[SweepRow]) -> Vec<PlotSeries> {
    type Key = (Family, usize, usize, Heuristic);
    // positive floats order like their bit patterns
    let mut groups: BTreeMap<Key, BTreeMap<u64, Accum>> = BTreeMap::new();
    for r in rows {
        let acc = groups
            .entry((r.family, r.stages, r.processors, r.heuristic))
            .or_default()
            .entry(r.threshold.to_bits())
            .or_default();
        acc.total += 1;
        if r.feasible {
            let y = match r.mode {
                Mode::Period => r.latency,
                Mode::Latency => r.period,
            };
            acc.sum += y.expect("feasible rows carry costs");
            acc.feasible += 1;
        }
    }
    groups
        .into_iter()
        .map(|((family, stages, processors, heuristic), pts)| PlotSeries {
            family,
            stages,
            processors,
            heuristic,
            mode: heuristic.mode(),
            points: pts
                .into_iter()
                .map(|(bits, a)| PlotPoint {
                    threshold: f64::from_bits(bits),
                    mean: (a.feasible > 0).then(|| a.sum / a.feasible as f64),
                    feasible: a.feasible,
                    total: a.total,
                })
                .collect(),
        })
        .collect()
}
