//! Pipeline applications, communication-homogeneous platforms, interval
//! mappings and the closed-form period/latency cost model.
//!
//! Indices are 0-based inside the library. Every textual format (instance
//! files, mapping strings, CLI output) is 1-based; the conversion happens in
//! [`format`] and in the `Display` impls.
//!
//! All arithmetic is `f64`. Interval work is always summed left to right over
//! stage indices and every cost goes through [`compute_term`] and
//! [`cycle_time_of`], so two evaluations of the same mapping are
//! bit-identical no matter which module performs them.

pub mod format;

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("pipeline must have at least one stage")]
    EmptyPipeline,
    #[error("expected {expected} data sizes (n+1), found {found}")]
    DataLength { expected: usize, found: usize },
    #[error("stage {stage} has non-positive or non-finite work {value}")]
    InvalidWork { stage: usize, value: f64 },
    #[error("data size delta_{index} is negative or non-finite ({value})")]
    InvalidData { index: usize, value: f64 },
    #[error("platform must have at least one processor")]
    EmptyPlatform,
    #[error("processor {proc} has non-positive or non-finite speed {value}")]
    InvalidSpeed { proc: usize, value: f64 },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("mapping has no intervals")]
    EmptyMapping,
    #[error("mapping has {intervals} intervals but {alloc} processor assignments")]
    AllocLength { intervals: usize, alloc: usize },
    #[error("{what} index {index} out of range 1..={max}")]
    IndexOutOfRange { what: &'static str, index: usize, max: usize },
    #[error("interval {interval} does not start right after the previous one")]
    NonContiguousIntervals { interval: usize },
    #[error("intervals do not cover stages 1..={stages}")]
    IncompleteCover { stages: usize },
    #[error("processor {proc} is assigned to more than one interval")]
    DuplicateProcessor { proc: usize },
}

/// A linear pipeline of `n` stages.
///
/// `work[k]` is the computation of stage `k`; `data[k]` is the size of the
/// message entering stage `k` and `data[k + 1]` the one leaving it. `data[0]`
/// comes from and `data[n]` goes to the outside world.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineApp {
    work: Vec<f64>,
    data: Vec<f64>,
}

impl PipelineApp {
    pub fn new(work: Vec<f64>, data: Vec<f64>) -> Result<Self, ModelError> {
        if work.is_empty() {
            return Err(ModelError::EmptyPipeline);
        }
        if data.len() != work.len() + 1 {
            return Err(ModelError::DataLength {
                expected: work.len() + 1,
                found: data.len(),
            });
        }
        if let Some((stage, &value)) = work
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(ModelError::InvalidWork { stage: stage + 1, value });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
        {
            return Err(ModelError::InvalidData { index, value });
        }
        Ok(Self { work, data })
    }

    pub fn stages(&self) -> usize {
        self.work.len()
    }

    pub fn work(&self) -> &[f64] {
        &self.work
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Total work of an interval, summed left to right.
    pub fn interval_work(&self, interval: Interval) -> f64 {
        self.work[interval.first..=interval.last].iter().sum()
    }

    pub fn total_work(&self) -> f64 {
        self.work.iter().sum()
    }

    /// Size of the message entering the interval.
    pub fn data_in(&self, interval: Interval) -> f64 {
        self.data[interval.first]
    }

    /// Size of the message leaving the interval.
    pub fn data_out(&self, interval: Interval) -> f64 {
        self.data[interval.last + 1]
    }

    /// Multiplies every work and data value by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        Self::new(
            self.work.iter().map(|w| w * factor).collect(),
            self.data.iter().map(|d| d * factor).collect(),
        )
    }
}

/// `p` processors with individual speeds sharing one link bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Platform {
    speeds: Vec<f64>,
    bandwidth: f64,
}

impl Platform {
    pub fn new(speeds: Vec<f64>, bandwidth: f64) -> Result<Self, ModelError> {
        if speeds.is_empty() {
            return Err(ModelError::EmptyPlatform);
        }
        if let Some((proc, &value)) = speeds
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.is_finite() && **s > 0.0))
        {
            return Err(ModelError::InvalidSpeed { proc: proc + 1, value });
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(ModelError::InvalidBandwidth(bandwidth));
        }
        Ok(Self { speeds, bandwidth })
    }

    pub fn processors(&self) -> usize {
        self.speeds.len()
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn speed(&self, proc: usize) -> f64 {
        self.speeds[proc]
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Processor indices by non-increasing speed, ties by ascending index.
    pub fn by_speed(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.speeds.len()).collect();
        order.sort_by(|&a, &b| self.speeds[b].total_cmp(&self.speeds[a]).then(a.cmp(&b)));
        order
    }

    /// The fastest processor (lowest index on ties).
    pub fn fastest(&self) -> usize {
        self.by_speed()[0]
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds[self.fastest()]
    }
}

/// An inclusive range of 0-based stage indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub first: usize,
    pub last: usize,
}

impl Interval {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first + 1, self.last + 1)
    }
}

/// Consecutive stage intervals, each run by a distinct processor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntervalMapping {
    intervals: Vec<Interval>,
    alloc: Vec<usize>,
}

impl IntervalMapping {
    /// Builds a mapping without checking it against an instance; see
    /// [`validate`].
    pub fn new(intervals: Vec<Interval>, alloc: Vec<usize>) -> Self {
        Self { intervals, alloc }
    }

    /// All `n` stages on one processor.
    pub fn single(stages: usize, proc: usize) -> Self {
        Self::new(vec![Interval::new(0, stages - 1)], vec![proc])
    }

    /// Builds the mapping whose interval `j` ends at `ends[j]` (inclusive).
    pub fn from_ends(ends: &[usize], alloc: Vec<usize>) -> Self {
        let mut first = 0;
        let intervals = ends
            .iter()
            .map(|&last| {
                let iv = Interval::new(first, last);
                first = last + 1;
                iv
            })
            .collect();
        Self::new(intervals, alloc)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn alloc(&self) -> &[usize] {
        &self.alloc
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn parts(&self) -> impl Iterator<Item = (Interval, usize)> + '_ {
        self.intervals.iter().copied().zip(self.alloc.iter().copied())
    }

    /// Replaces interval `index` by `parts`, in order.
    pub fn replace(&mut self, index: usize, parts: &[(Interval, usize)]) {
        self.intervals
            .splice(index..=index, parts.iter().map(|(iv, _)| *iv));
        self.alloc.splice(index..=index, parts.iter().map(|(_, p)| *p));
    }
}

impl fmt::Display for IntervalMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("map")?;
        for (iv, proc) in self.parts() {
            write!(f, " {}:{}", iv, proc + 1)?;
        }
        Ok(())
    }
}

/// Period and latency of a mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub period: f64,
    pub latency: f64,
    /// Index of the first interval whose cycle time equals the period.
    pub bottleneck: usize,
}

/// Relative slack allowed when checking a cost against a threshold.
pub const REL_TOL: f64 = 1e-12;

/// `value <= bound` up to [`REL_TOL`].
#[inline]
pub fn within_bound(value: f64, bound: f64) -> bool {
    value <= bound + bound.abs() * REL_TOL
}

/// Time spent by a processor receiving its input and computing, the summand
/// of the latency.
#[inline]
pub(crate) fn compute_term(data_in: f64, work: f64, speed: f64, bandwidth: f64) -> f64 {
    data_in / bandwidth + work / speed
}

/// Receive + compute + send time of one interval.
#[inline]
pub(crate) fn cycle_time_of(
    data_in: f64,
    work: f64,
    data_out: f64,
    speed: f64,
    bandwidth: f64,
) -> f64 {
    compute_term(data_in, work, speed, bandwidth) + data_out / bandwidth
}

pub fn validate(
    app: &PipelineApp,
    platform: &Platform,
    mapping: &IntervalMapping,
) -> Result<(), ModelError> {
    let n = app.stages();
    let p = platform.processors();
    if mapping.is_empty() {
        return Err(ModelError::EmptyMapping);
    }
    if mapping.alloc.len() != mapping.intervals.len() {
        return Err(ModelError::AllocLength {
            intervals: mapping.intervals.len(),
            alloc: mapping.alloc.len(),
        });
    }
    let mut next = 0;
    for (j, iv) in mapping.intervals.iter().enumerate() {
        if iv.first >= n || iv.last >= n {
            return Err(ModelError::IndexOutOfRange {
                what: "stage",
                index: iv.first.max(iv.last) + 1,
                max: n,
            });
        }
        if iv.first != next || iv.last < iv.first {
            return Err(ModelError::NonContiguousIntervals { interval: j + 1 });
        }
        next = iv.last + 1;
    }
    if next != n {
        return Err(ModelError::IncompleteCover { stages: n });
    }
    let mut seen = vec![false; p];
    for &proc in &mapping.alloc {
        if proc >= p {
            return Err(ModelError::IndexOutOfRange {
                what: "processor",
                index: proc + 1,
                max: p,
            });
        }
        if std::mem::replace(&mut seen[proc], true) {
            return Err(ModelError::DuplicateProcessor { proc: proc + 1 });
        }
    }
    Ok(())
}

/// Cycle time of `interval` when run on `proc`.
pub fn interval_cycle_time(
    app: &PipelineApp,
    platform: &Platform,
    interval: Interval,
    proc: usize,
) -> Result<f64, ModelError> {
    let n = app.stages();
    if interval.first > interval.last || interval.last >= n {
        return Err(ModelError::IndexOutOfRange {
            what: "stage",
            index: interval.first.max(interval.last) + 1,
            max: n,
        });
    }
    if proc >= platform.processors() {
        return Err(ModelError::IndexOutOfRange {
            what: "processor",
            index: proc + 1,
            max: platform.processors(),
        });
    }
    Ok(cycle_time_unchecked(app, platform, interval, proc))
}

#[inline]
pub(crate) fn cycle_time_unchecked(
    app: &PipelineApp,
    platform: &Platform,
    interval: Interval,
    proc: usize,
) -> f64 {
    cycle_time_of(
        app.data_in(interval),
        app.interval_work(interval),
        app.data_out(interval),
        platform.speed(proc),
        platform.bandwidth(),
    )
}

pub fn evaluate(
    app: &PipelineApp,
    platform: &Platform,
    mapping: &IntervalMapping,
) -> Result<CostReport, ModelError> {
    validate(app, platform, mapping)?;
    Ok(evaluate_unchecked(app, platform, mapping))
}

/// [`evaluate`] for mappings already known to be valid.
pub(crate) fn evaluate_unchecked(
    app: &PipelineApp,
    platform: &Platform,
    mapping: &IntervalMapping,
) -> CostReport {
    let b = platform.bandwidth();
    let mut period = f64::NEG_INFINITY;
    let mut bottleneck = 0;
    let mut latency = 0.0;
    for (j, (iv, proc)) in mapping.parts().enumerate() {
        let work = app.interval_work(iv);
        let s = platform.speed(proc);
        let cycle = cycle_time_of(app.data_in(iv), work, app.data_out(iv), s, b);
        if cycle > period {
            period = cycle;
            bottleneck = j;
        }
        latency += compute_term(app.data_in(iv), work, s, b);
    }
    latency += app.data()[app.stages()] / b;
    CostReport {
        period,
        latency,
        bottleneck,
    }
}
