//! Exact solvers for small instances.
//!
//! Everything here except [`optimal_latency`] enumerates interval mappings:
//! intervals counts ascending, then interval end positions in lexicographic
//! order, then injective processor assignments in lexicographic order. The
//! first mapping reaching a value wins ties, so witnesses are deterministic.

use thiserror::Error;

use crate::model::{
    compute_term, cycle_time_of, within_bound, Interval, IntervalMapping, PipelineApp, Platform,
};

/// Stage count above which exhaustive search needs `force`.
pub const MAX_STAGES: usize = 12;
/// Processor count above which exhaustive search needs `force`.
pub const MAX_PROCESSORS: usize = 8;
/// Upper bound on the number of partitions [`hetero_1d_partition_decide`]
/// will scan without `force`.
pub const MAX_PARTITIONS: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search ({stages} stages, {processors} processors); use force")]
    InstanceTooLarge { stages: usize, processors: usize },
    #[error("no mapping satisfies the threshold {threshold}")]
    Infeasible { threshold: f64 },
}

fn guard(app: &PipelineApp, platform: &Platform, force: bool) -> Result<(), OracleError> {
    if !force && (app.stages() > MAX_STAGES || platform.processors() > MAX_PROCESSORS) {
        return Err(OracleError::InstanceTooLarge {
            stages: app.stages(),
            processors: platform.processors(),
        });
    }
    Ok(())
}

/// How many intervals an enumerated mapping may have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalCount {
    /// Any `m` in `1..=min(n, p)`.
    AtMost,
    /// Exactly this many.
    Exactly(usize),
}

/// Minimum latency: everything on the fastest processor.
pub fn optimal_latency(app: &PipelineApp, platform: &Platform) -> (f64, IntervalMapping) {
    let mapping = IntervalMapping::single(app.stages(), platform.fastest());
    let latency = crate::model::evaluate_unchecked(app, platform, &mapping).latency;
    (latency, mapping)
}

/// Per-interval quantities of one partition, reused across assignments.
struct Partition {
    ends: Vec<usize>,
    data_in: Vec<f64>,
    work: Vec<f64>,
    data_out: Vec<f64>,
}

impl Partition {
    fn new(app: &PipelineApp, ends: &[usize]) -> Self {
        let mut first = 0;
        let mut p = Partition {
            ends: ends.to_vec(),
            data_in: Vec::with_capacity(ends.len()),
            work: Vec::with_capacity(ends.len()),
            data_out: Vec::with_capacity(ends.len()),
        };
        for &last in ends {
            let iv = Interval::new(first, last);
            p.data_in.push(app.data_in(iv));
            p.work.push(app.interval_work(iv));
            p.data_out.push(app.data_out(iv));
            first = last + 1;
        }
        p
    }

    fn len(&self) -> usize {
        self.ends.len()
    }
}

/// Calls `f` with the end positions of every partition of `n` stages into
/// `m` intervals, in lexicographic order.
fn for_each_partition(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m == 0 || m > n {
        return;
    }
    // ends[0..m-1] are the cut positions, ends[m-1] == n-1.
    let mut ends: Vec<usize> = (0..m).collect();
    ends[m - 1] = n - 1;
    let cuts = m - 1;
    loop {
        f(&ends);
        // advance the rightmost cut that still has room
        let mut i = cuts;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            let limit = n - 1 - (cuts - i);
            if ends[i] < limit {
                ends[i] += 1;
                for k in i + 1..cuts {
                    ends[k] = ends[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn interval_counts(n: usize, p: usize, count: IntervalCount) -> std::ops::RangeInclusive<usize> {
    match count {
        IntervalCount::AtMost => 1..=n.min(p),
        IntervalCount::Exactly(m) => m..=m,
    }
}

/// Depth-first walk over injective assignments of processors to the
/// intervals of `part`, in lexicographic order. `visit` receives the period
/// and latency of each complete assignment; `prune` sees partial
/// (max cycle time, latency lower bound) and may cut the subtree.
struct AssignmentWalk<'a> {
    part: &'a Partition,
    speeds: &'a [f64],
    bandwidth: f64,
    tail: f64,
    used: Vec<bool>,
    alloc: Vec<usize>,
}

impl<'a> AssignmentWalk<'a> {
    fn run(
        &mut self,
        prune: &mut impl FnMut(f64, f64) -> bool,
        visit: &mut impl FnMut(f64, f64, &[usize], &[usize]),
    ) {
        self.step(0, f64::NEG_INFINITY, 0.0, prune, visit);
    }

    fn step(
        &mut self,
        j: usize,
        period: f64,
        latency: f64,
        prune: &mut impl FnMut(f64, f64) -> bool,
        visit: &mut impl FnMut(f64, f64, &[usize], &[usize]),
    ) {
        if j == self.part.len() {
            visit(period, latency + self.tail, &self.part.ends, &self.alloc);
            return;
        }
        for proc in 0..self.speeds.len() {
            if self.used[proc] {
                continue;
            }
            let s = self.speeds[proc];
            let (din, w, dout) = (self.part.data_in[j], self.part.work[j], self.part.data_out[j]);
            let cycle = cycle_time_of(din, w, dout, s, self.bandwidth);
            let period = period.max(cycle);
            let latency = latency + compute_term(din, w, s, self.bandwidth);
            if prune(period, latency + self.tail) {
                continue;
            }
            self.used[proc] = true;
            self.alloc.push(proc);
            self.step(j + 1, period, latency, prune, visit);
            self.alloc.pop();
            self.used[proc] = false;
        }
    }
}

fn walk_all(
    app: &PipelineApp,
    platform: &Platform,
    count: IntervalCount,
    mut prune: impl FnMut(f64, f64) -> bool,
    mut visit: impl FnMut(f64, f64, &[usize], &[usize]),
) {
    let n = app.stages();
    let tail = app.data()[n] / platform.bandwidth();
    for m in interval_counts(n, platform.processors(), count) {
        for_each_partition(n, m, |ends| {
            let part = Partition::new(app, ends);
            let mut walk = AssignmentWalk {
                part: &part,
                speeds: platform.speeds(),
                bandwidth: platform.bandwidth(),
                tail,
                used: vec![false; platform.processors()],
                alloc: Vec::with_capacity(m),
            };
            walk.run(&mut prune, &mut visit);
        });
    }
}

/// Minimum period over all interval mappings.
pub fn brute_force_min_period(
    app: &PipelineApp,
    platform: &Platform,
    force: bool,
) -> Result<(f64, IntervalMapping), OracleError> {
    min_period_with_intervals(app, platform, IntervalCount::AtMost, force)?.ok_or(
        // unreachable for valid inputs: m = 1 always exists
        OracleError::Infeasible {
            threshold: f64::INFINITY,
        },
    )
}

/// Minimum period over mappings with a restricted interval count; `None` if
/// no such mapping exists (e.g. more intervals than stages or processors).
pub fn min_period_with_intervals(
    app: &PipelineApp,
    platform: &Platform,
    count: IntervalCount,
    force: bool,
) -> Result<Option<(f64, IntervalMapping)>, OracleError> {
    guard(app, platform, force)?;
    let mut best = f64::INFINITY;
    let mut witness: Option<IntervalMapping> = None;
    // a partial max already >= best cannot strictly improve
    let best_cell = std::cell::Cell::new(f64::INFINITY);
    walk_all(
        app,
        platform,
        count,
        |period, _| period >= best_cell.get(),
        |period, _, ends, alloc| {
            if period < best {
                best = period;
                best_cell.set(period);
                witness = Some(IntervalMapping::from_ends(ends, alloc.to_vec()));
            }
        },
    );
    Ok(witness.map(|w| (best, w)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub period: f64,
    pub latency: f64,
    pub witness: IntervalMapping,
}

/// Non-dominated (period, latency) pairs, ascending period and strictly
/// descending latency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoFront {
    points: Vec<ParetoPoint>,
}

impl ParetoFront {
    pub fn points(&self) -> &[ParetoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True if some point has period <= `period` and latency <= `latency`.
    pub fn dominates_or_equals(&self, period: f64, latency: f64) -> bool {
        // the point with the largest period <= `period` has the least latency
        let idx = self.points.partition_point(|pt| pt.period <= period);
        idx > 0 && self.points[idx - 1].latency <= latency
    }

    /// Same as [`dominates_or_equals`](Self::dominates_or_equals) with a
    /// relative tolerance on both coordinates.
    pub fn covers(&self, period: f64, latency: f64, rel_tol: f64) -> bool {
        self.points.iter().any(|pt| {
            pt.period <= period * (1.0 + rel_tol) && pt.latency <= latency * (1.0 + rel_tol)
        })
    }

    /// Inserts a point unless an existing one dominates or equals it; drops
    /// the points it dominates. Returns whether it was inserted.
    fn offer(&mut self, period: f64, latency: f64, witness: impl FnOnce() -> IntervalMapping) -> bool {
        if self.dominates_or_equals(period, latency) {
            return false;
        }
        let start = self.points.partition_point(|pt| pt.period < period);
        let end = start
            + self.points[start..]
                .iter()
                .take_while(|pt| pt.latency >= latency)
                .count();
        self.points.splice(
            start..end,
            std::iter::once(ParetoPoint {
                period,
                latency,
                witness: witness(),
            }),
        );
        true
    }

    pub fn min_period(&self) -> Option<&ParetoPoint> {
        self.points.first()
    }

    pub fn min_latency(&self) -> Option<&ParetoPoint> {
        self.points.last()
    }
}

pub fn pareto_front(
    app: &PipelineApp,
    platform: &Platform,
    force: bool,
) -> Result<ParetoFront, OracleError> {
    guard(app, platform, force)?;
    let front = std::cell::RefCell::new(ParetoFront::default());
    walk_all(
        app,
        platform,
        IntervalCount::AtMost,
        |period, latency_bound| front.borrow().dominates_or_equals(period, latency_bound),
        |period, latency, ends, alloc| {
            front
                .borrow_mut()
                .offer(period, latency, || IntervalMapping::from_ends(ends, alloc.to_vec()));
        },
    );
    Ok(front.into_inner())
}

/// Smallest latency among mappings whose period is within `max_period`.
pub fn min_latency_given_period(
    app: &PipelineApp,
    platform: &Platform,
    max_period: f64,
    force: bool,
) -> Result<(f64, IntervalMapping), OracleError> {
    let front = pareto_front(app, platform, force)?;
    front
        .points
        .iter()
        .rev()
        .find(|pt| within_bound(pt.period, max_period))
        .map(|pt| (pt.latency, pt.witness.clone()))
        .ok_or(OracleError::Infeasible {
            threshold: max_period,
        })
}

/// Smallest period among mappings whose latency is within `max_latency`.
pub fn min_period_given_latency(
    app: &PipelineApp,
    platform: &Platform,
    max_latency: f64,
    force: bool,
) -> Result<(f64, IntervalMapping), OracleError> {
    let front = pareto_front(app, platform, force)?;
    front
        .points
        .iter()
        .find(|pt| within_bound(pt.latency, max_latency))
        .map(|pt| (pt.period, pt.witness.clone()))
        .ok_or(OracleError::Infeasible {
            threshold: max_latency,
        })
}

/// Heterogeneous chains-to-chains decision instance: can `weights` be cut
/// into exactly `speeds.len()` intervals and matched one-to-one with the
/// speeds so that every load/speed ratio is at most `bound`?
#[derive(Debug, Clone, PartialEq)]
pub struct Hetero1DInstance {
    pub weights: Vec<f64>,
    pub speeds: Vec<f64>,
    pub bound: f64,
}

impl Hetero1DInstance {
    /// The equivalent pipeline instance: no communication, unit bandwidth.
    pub fn as_pipeline(&self) -> Result<(PipelineApp, Platform), crate::model::ModelError> {
        Ok((
            PipelineApp::new(self.weights.clone(), vec![0.0; self.weights.len() + 1])?,
            Platform::new(self.speeds.clone(), 1.0)?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hetero1DWitness {
    pub intervals: Vec<Interval>,
    /// `sigma[k]` is the (0-based) speed index matched with interval `k`.
    pub sigma: Vec<usize>,
}

impl Hetero1DWitness {
    pub fn max_ratio(&self, inst: &Hetero1DInstance) -> f64 {
        self.intervals
            .iter()
            .zip(&self.sigma)
            .map(|(iv, &s)| {
                inst.weights[iv.first..=iv.last].iter().sum::<f64>() / inst.speeds[s]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_mapping(&self) -> IntervalMapping {
        IntervalMapping::new(self.intervals.clone(), self.sigma.clone())
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Decides a heterogeneous 1D partitioning instance exactly.
///
/// Partitions are scanned in lexicographic order of their end positions. For
/// a fixed partition the best matching pairs loads and speeds in the same
/// sorted order, so each partition costs a sort instead of `p!`
/// permutations. Prefixes whose last interval exceeds `bound * max_speed`
/// are cut.
pub fn hetero_1d_partition_decide(
    inst: &Hetero1DInstance,
    force: bool,
) -> Result<Option<Hetero1DWitness>, OracleError> {
    let n = inst.weights.len();
    let p = inst.speeds.len();
    if p == 0 || p > n {
        return Ok(None);
    }
    if !force && binomial(n as u64 - 1, p as u64 - 1) > MAX_PARTITIONS {
        return Err(OracleError::InstanceTooLarge {
            stages: n,
            processors: p,
        });
    }
    let max_speed = inst.speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cap = inst.bound * max_speed;
    let mut speed_order: Vec<usize> = (0..p).collect();
    speed_order.sort_by(|&a, &b| inst.speeds[a].total_cmp(&inst.speeds[b]).then(a.cmp(&b)));

    let mut search = Decide {
        inst,
        cap,
        speed_order: &speed_order,
        ends: Vec::with_capacity(p),
        loads: Vec::with_capacity(p),
    };
    Ok(search.extend(0))
}

struct Decide<'a> {
    inst: &'a Hetero1DInstance,
    cap: f64,
    speed_order: &'a [usize],
    ends: Vec<usize>,
    loads: Vec<f64>,
}

impl Decide<'_> {
    fn extend(&mut self, first: usize) -> Option<Hetero1DWitness> {
        let n = self.inst.weights.len();
        let p = self.inst.speeds.len();
        let remaining = p - self.ends.len();
        // the last interval must end at n-1; others leave room for the rest
        let last_end = if remaining == 1 { n - 1 } else { n - remaining };
        let first_end = if remaining == 1 { n - 1 } else { first };
        for end in first_end..=last_end {
            let load: f64 = self.inst.weights[first..=end].iter().sum();
            if load > self.cap {
                // weights are positive: longer intervals only get heavier
                break;
            }
            self.ends.push(end);
            self.loads.push(load);
            let found = if remaining == 1 {
                self.matching()
            } else {
                self.extend(end + 1)
            };
            self.ends.pop();
            self.loads.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }

    fn matching(&self) -> Option<Hetero1DWitness> {
        let p = self.loads.len();
        let mut by_load: Vec<usize> = (0..p).collect();
        by_load.sort_by(|&a, &b| self.loads[a].total_cmp(&self.loads[b]).then(a.cmp(&b)));
        let mut sigma = vec![0; p];
        for (&interval, &speed) in by_load.iter().zip(self.speed_order) {
            if self.loads[interval] / self.inst.speeds[speed] > self.inst.bound {
                return None;
            }
            sigma[interval] = speed;
        }
        let mut first = 0;
        let intervals = self
            .ends
            .iter()
            .map(|&e| {
                let iv = Interval::new(first, e);
                first = e + 1;
                iv
            })
            .collect();
        Some(Hetero1DWitness { intervals, sigma })
    }
}
