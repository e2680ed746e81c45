//! Greedy splitting heuristics for the bi-criteria mapping problem.
//!
//! Every heuristic starts with all stages on the fastest processor, then
//! repeatedly splits the interval of the current bottleneck (first interval
//! with the largest cycle time), handing parts to the next fastest unused
//! processors. They differ in how many parts a split creates, how the split
//! is chosen, and when they stop:
//!
//! | name  | alias         | fixed   | split | selection                         |
//! |-------|---------------|---------|-------|-----------------------------------|
//! | `h1`  | `sp-mono-p`   | period  | 2     | min max new cycle time            |
//! | `h2a` | `3explo-mono` | period  | 3     | min max new cycle time            |
//! | `h2b` | `3explo-bi`   | period  | 3     | min max Δlatency / Δperiod(i)     |
//! | `h3`  | `sp-bi-p`     | period  | 2     | ratio, under a searched latency cap |
//! | `h4`  | `sp-mono-l`   | latency | 2     | min max new cycle time            |
//! | `h5`  | `sp-bi-l`     | latency | 2     | ratio                             |
//!
//! Δlatency is the global latency after the split minus before it.
//! Δperiod(i) is the cycle time of the split interval before the split minus
//! the new cycle time of processor `i`. Ratio selection only considers
//! candidates where every Δperiod(i) is positive.
//!
//! Ties always go to the earliest candidate in enumeration order: ascending
//! cut positions, then the assignment keeping the first part on the split
//! processor, then the remaining assignments in order.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    compute_term, cycle_time_unchecked, evaluate_unchecked, within_bound, Interval,
    IntervalMapping, PipelineApp, Platform,
};
use crate::oracle::optimal_latency;

/// Upper end of the doubling search for the latency slack of `h3`.
pub const H3_ALPHA_CAP: f64 = 65_536.0;
/// Starting point of the doubling search for the latency slack of `h3`.
pub const H3_ALPHA_START: f64 = 0.25;
/// Bisection steps of `h3` once a feasible slack is bracketed.
pub const H3_BISECTIONS: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeuristicError {
    #[error("threshold must be positive, got {0}")]
    InvalidTarget(f64),
    #[error("{heuristic} expects a fixed {expected}, got a fixed {found}")]
    ModeMismatch {
        heuristic: Heuristic,
        expected: Mode,
        found: Mode,
    },
    #[error("period target not reached; best period {best_period}")]
    PeriodUnreachable { best_period: f64 },
    #[error("latency target is below the optimal latency {optimal_latency}")]
    LatencyBelowOptimal { optimal_latency: f64 },
}

/// Which criterion is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(alias = "fixed-period")]
    Period,
    #[serde(alias = "fixed-latency")]
    Latency,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Period => "period",
            Mode::Latency => "latency",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicriteriaTarget {
    pub mode: Mode,
    pub value: f64,
}

impl BicriteriaTarget {
    pub fn period(value: f64) -> Self {
        Self {
            mode: Mode::Period,
            value,
        }
    }

    pub fn latency(value: f64) -> Self {
        Self {
            mode: Mode::Latency,
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Heuristic {
    H1,
    H2a,
    H2b,
    H3,
    H4,
    H5,
}

impl Heuristic {
    pub const ALL: [Heuristic; 6] = [
        Heuristic::H1,
        Heuristic::H2a,
        Heuristic::H2b,
        Heuristic::H3,
        Heuristic::H4,
        Heuristic::H5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::H1 => "h1",
            Heuristic::H2a => "h2a",
            Heuristic::H2b => "h2b",
            Heuristic::H3 => "h3",
            Heuristic::H4 => "h4",
            Heuristic::H5 => "h5",
        }
    }

    pub fn alias(self) -> &'static str {
        match self {
            Heuristic::H1 => "sp-mono-p",
            Heuristic::H2a => "3explo-mono",
            Heuristic::H2b => "3explo-bi",
            Heuristic::H3 => "sp-bi-p",
            Heuristic::H4 => "sp-mono-l",
            Heuristic::H5 => "sp-bi-l",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Heuristic::H4 | Heuristic::H5 => Mode::Latency,
            _ => Mode::Period,
        }
    }

    /// Runs the heuristic with the given threshold on its fixed criterion.
    pub fn run(
        self,
        app: &PipelineApp,
        platform: &Platform,
        threshold: f64,
    ) -> Result<IntervalMapping, HeuristicError> {
        self.run_traced(app, platform, threshold).map(|(m, _)| m)
    }

    /// Like [`run`](Self::run), also returning the accepted splits.
    pub fn run_traced(
        self,
        app: &PipelineApp,
        platform: &Platform,
        threshold: f64,
    ) -> Result<(IntervalMapping, Vec<SplitStep>), HeuristicError> {
        if threshold.is_nan() || threshold <= 0.0 {
            return Err(HeuristicError::InvalidTarget(threshold));
        }
        match self {
            Heuristic::H1 => period_loop(app, platform, threshold, Source::TwoWay, Rule::MinMaxCycle),
            Heuristic::H2a => period_loop(app, platform, threshold, Source::ThreeWay, Rule::MinMaxCycle),
            Heuristic::H2b => period_loop(app, platform, threshold, Source::ThreeWay, Rule::MinRatio),
            Heuristic::H3 => h3(app, platform, threshold),
            Heuristic::H4 => latency_loop(app, platform, threshold, Rule::MinMaxCycle),
            Heuristic::H5 => latency_loop(app, platform, threshold, Rule::MinRatio),
        }
    }

    pub fn solve(
        self,
        app: &PipelineApp,
        platform: &Platform,
        target: BicriteriaTarget,
    ) -> Result<IntervalMapping, HeuristicError> {
        if target.mode != self.mode() {
            return Err(HeuristicError::ModeMismatch {
                heuristic: self,
                expected: self.mode(),
                found: target.mode,
            });
        }
        self.run(app, platform, target.value)
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown heuristic `{0}`")]
pub struct UnknownHeuristic(String);

impl FromStr for Heuristic {
    type Err = UnknownHeuristic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s || h.alias() == s)
            .ok_or(UnknownHeuristic(s))
    }
}

impl TryFrom<String> for Heuristic {
    type Error = UnknownHeuristic;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Heuristic> for String {
    fn from(h: Heuristic) -> String {
        h.name().to_string()
    }
}

/// Mapping under construction plus the pool of processors not yet used.
#[derive(Debug, Clone)]
pub struct HeuristicState<'a> {
    app: &'a PipelineApp,
    platform: &'a Platform,
    mapping: IntervalMapping,
    cycle: Vec<f64>,
    period: f64,
    latency: f64,
    used: Vec<usize>,
    unused: VecDeque<usize>,
}

/// Returned when an interval cannot be split as requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("interval cannot be split (too short or not enough unused processors)")]
pub struct NoSplitPossible;

impl<'a> HeuristicState<'a> {
    /// All stages on the fastest processor.
    pub fn initial(app: &'a PipelineApp, platform: &'a Platform) -> Self {
        let mut unused: VecDeque<usize> = platform.by_speed().into();
        let first = unused.pop_front().expect("platform has a processor");
        let mut state = Self {
            app,
            platform,
            mapping: IntervalMapping::single(app.stages(), first),
            cycle: Vec::new(),
            period: 0.0,
            latency: 0.0,
            used: vec![first],
            unused,
        };
        state.refresh();
        state
    }

    fn refresh(&mut self) {
        let report = evaluate_unchecked(self.app, self.platform, &self.mapping);
        self.period = report.period;
        self.latency = report.latency;
        self.cycle = self
            .mapping
            .parts()
            .map(|(iv, p)| cycle_time_unchecked(self.app, self.platform, iv, p))
            .collect();
    }

    pub fn mapping(&self) -> &IntervalMapping {
        &self.mapping
    }

    pub fn into_mapping(self) -> IntervalMapping {
        self.mapping
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn latency(&self) -> f64 {
        self.latency
    }

    pub fn cycle_times(&self) -> &[f64] {
        &self.cycle
    }

    /// Used processors in the order they were enrolled.
    pub fn used(&self) -> &[usize] {
        &self.used
    }

    /// Unused processors, fastest first.
    pub fn unused(&self) -> &VecDeque<usize> {
        &self.unused
    }

    /// First interval with the largest cycle time.
    pub fn bottleneck(&self) -> usize {
        let mut best = 0;
        for (j, &c) in self.cycle.iter().enumerate() {
            if c > self.cycle[best] {
                best = j;
            }
        }
        best
    }

    /// Global latency if interval `target` were replaced by `parts`.
    fn latency_with(&self, target: usize, parts: &[(Interval, usize)]) -> f64 {
        let b = self.platform.bandwidth();
        let term = |(iv, p): (Interval, usize)| {
            compute_term(
                self.app.data_in(iv),
                self.app.interval_work(iv),
                self.platform.speed(p),
                b,
            )
        };
        let mut latency = 0.0;
        let all = self.mapping.parts().take(target)
            .chain(parts.iter().copied())
            .chain(self.mapping.parts().skip(target + 1));
        for part in all {
            latency += term(part);
        }
        latency + self.app.data()[self.app.stages()] / b
    }

    fn candidate(&self, target: usize, cuts: Vec<usize>, parts: Vec<(Interval, usize)>) -> SplitCandidate {
        let before = self.cycle[target];
        let new_cycle: Vec<f64> = parts
            .iter()
            .map(|&(iv, p)| cycle_time_unchecked(self.app, self.platform, iv, p))
            .collect();
        let latency_after = self.latency_with(target, &parts);
        SplitCandidate {
            target,
            cuts,
            delta_period: new_cycle.iter().map(|c| before - c).collect(),
            delta_latency: latency_after - self.latency,
            new_cycle,
            latency_after,
            parts,
        }
    }

    /// Every 2-way split of interval `target` with the next fastest unused
    /// processor: ascending cut, first part kept on the current processor
    /// before the swapped orientation.
    pub fn enumerate_2splits(&self, target: usize) -> Result<Vec<SplitCandidate>, NoSplitPossible> {
        let iv = self.mapping.intervals()[target];
        let owner = self.mapping.alloc()[target];
        let next = *self.unused.front().ok_or(NoSplitPossible)?;
        if iv.len() < 2 {
            return Err(NoSplitPossible);
        }
        let mut out = Vec::with_capacity(2 * (iv.len() - 1));
        for cut in iv.first..iv.last {
            let head = Interval::new(iv.first, cut);
            let tail = Interval::new(cut + 1, iv.last);
            for (a, b) in [(owner, next), (next, owner)] {
                out.push(self.candidate(target, vec![cut], vec![(head, a), (tail, b)]));
            }
        }
        Ok(out)
    }

    /// Every 3-way split of interval `target` over the current processor and
    /// the next two fastest unused ones, all six assignments per cut pair.
    pub fn enumerate_3splits(&self, target: usize) -> Result<Vec<SplitCandidate>, NoSplitPossible> {
        let iv = self.mapping.intervals()[target];
        let owner = self.mapping.alloc()[target];
        if iv.len() < 3 || self.unused.len() < 2 {
            return Err(NoSplitPossible);
        }
        let (p1, p2) = (self.unused[0], self.unused[1]);
        let roles = [owner, p1, p2];
        const PERMUTATIONS: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::new();
        for c1 in iv.first..iv.last - 1 {
            for c2 in c1 + 1..iv.last {
                let pieces = [
                    Interval::new(iv.first, c1),
                    Interval::new(c1 + 1, c2),
                    Interval::new(c2 + 1, iv.last),
                ];
                for perm in PERMUTATIONS {
                    let parts = pieces
                        .iter()
                        .zip(perm)
                        .map(|(&piece, r)| (piece, roles[r]))
                        .collect();
                    out.push(self.candidate(target, vec![c1, c2], parts));
                }
            }
        }
        Ok(out)
    }

    /// Replaces the split interval by the candidate's parts.
    pub fn apply(&mut self, candidate: &SplitCandidate) {
        self.mapping.replace(candidate.target, &candidate.parts);
        for &(_, p) in &candidate.parts {
            if let Some(pos) = self.unused.iter().position(|&u| u == p) {
                self.unused.remove(pos);
                self.used.push(p);
            }
        }
        self.refresh();
    }
}

/// One way of splitting an interval, with the effect it would have.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    /// Index of the interval being split.
    pub target: usize,
    /// Last stage (0-based) of every part but the final one.
    pub cuts: Vec<usize>,
    /// Sub-intervals, left to right, with their processors.
    pub parts: Vec<(Interval, usize)>,
    /// Cycle time of each part.
    pub new_cycle: Vec<f64>,
    pub latency_after: f64,
    pub delta_latency: f64,
    /// Old cycle time of the split interval minus each part's new cycle time.
    pub delta_period: Vec<f64>,
}

impl SplitCandidate {
    pub fn max_cycle(&self) -> f64 {
        self.new_cycle.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_i Δlatency / Δperiod(i)`, or `None` when some Δperiod(i) <= 0.
    pub fn ratio(&self) -> Option<f64> {
        if self.delta_period.iter().any(|&d| d <= 0.0) {
            return None;
        }
        Some(
            self.delta_period
                .iter()
                .map(|&d| self.delta_latency / d)
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }
}

/// An accepted split, for inspecting heuristic runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStep {
    /// Cycle time of the split interval before the split.
    pub cycle_before: f64,
    /// Largest cycle time among the new parts.
    pub cycle_after: f64,
    pub period_after: f64,
    pub latency_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    TwoWay,
    /// 3-way splits, 2-way when the bottleneck cannot be split in three.
    ThreeWay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    MinMaxCycle,
    MinRatio,
}

/// Picks the best admissible candidate under `rule`. Returns the choice and
/// whether `admissible` rejected anything.
fn select(
    candidates: &[SplitCandidate],
    rule: Rule,
    cycle_before: f64,
    admissible: impl Fn(&SplitCandidate) -> bool,
) -> (Option<&SplitCandidate>, bool) {
    let mut rejected = false;
    let mut best: Option<(&SplitCandidate, f64)> = None;
    for c in candidates {
        let score = match rule {
            // strict improvement of the split interval is required
            Rule::MinMaxCycle => Some(c.max_cycle()).filter(|&m| m < cycle_before),
            Rule::MinRatio => c.ratio(),
        };
        let Some(score) = score else { continue };
        if !admissible(c) {
            rejected = true;
            continue;
        }
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((c, score));
        }
    }
    (best.map(|(c, _)| c), rejected)
}

struct LoopOutcome<'a> {
    state: HeuristicState<'a>,
    steps: Vec<SplitStep>,
    /// A candidate was turned down by the latency cap at some step.
    cap_binding: bool,
}

fn split_loop<'a>(
    app: &'a PipelineApp,
    platform: &'a Platform,
    source: Source,
    rule: Rule,
    latency_cap: Option<f64>,
    period_target: Option<f64>,
) -> LoopOutcome<'a> {
    let mut state = HeuristicState::initial(app, platform);
    let mut steps = Vec::new();
    let mut cap_binding = false;
    loop {
        if period_target.is_some_and(|t| within_bound(state.period(), t)) {
            break;
        }
        let j = state.bottleneck();
        let candidates = match source {
            Source::TwoWay => state.enumerate_2splits(j),
            Source::ThreeWay => state
                .enumerate_3splits(j)
                .or_else(|_| state.enumerate_2splits(j)),
        };
        let Ok(candidates) = candidates else { break };
        let cycle_before = state.cycle_times()[j];
        let (choice, rejected) = select(&candidates, rule, cycle_before, |c| {
            latency_cap.is_none_or(|cap| within_bound(c.latency_after, cap))
        });
        cap_binding |= rejected;
        let Some(choice) = choice else { break };
        let cycle_after = choice.max_cycle();
        state.apply(choice);
        steps.push(SplitStep {
            cycle_before,
            cycle_after,
            period_after: state.period(),
            latency_after: state.latency(),
        });
    }
    LoopOutcome {
        state,
        steps,
        cap_binding,
    }
}

type Traced = (IntervalMapping, Vec<SplitStep>);

fn period_loop(
    app: &PipelineApp,
    platform: &Platform,
    target: f64,
    source: Source,
    rule: Rule,
) -> Result<Traced, HeuristicError> {
    let out = split_loop(app, platform, source, rule, None, Some(target));
    if within_bound(out.state.period(), target) {
        Ok((out.state.into_mapping(), out.steps))
    } else {
        Err(HeuristicError::PeriodUnreachable {
            best_period: out.state.period(),
        })
    }
}

fn latency_loop(
    app: &PipelineApp,
    platform: &Platform,
    target: f64,
    rule: Rule,
) -> Result<Traced, HeuristicError> {
    let (optimal, _) = optimal_latency(app, platform);
    if !within_bound(optimal, target) {
        return Err(HeuristicError::LatencyBelowOptimal {
            optimal_latency: optimal,
        });
    }
    let out = split_loop(app, platform, Source::TwoWay, rule, Some(target), None);
    Ok((out.state.into_mapping(), out.steps))
}

/// Splitting with ratio selection under a latency cap `(1 + α) L_opt`,
/// searching α for the smallest-latency mapping that meets the period.
fn h3(app: &PipelineApp, platform: &Platform, target: f64) -> Result<Traced, HeuristicError> {
    let (optimal, _) = optimal_latency(app, platform);
    let mut best: Option<(f64, Traced)> = None;
    let mut best_period = f64::INFINITY;

    // returns (feasible, cap_binding)
    let mut trial = |alpha: f64| -> (bool, bool) {
        let cap = (1.0 + alpha) * optimal;
        let out = split_loop(app, platform, Source::TwoWay, Rule::MinRatio, Some(cap), Some(target));
        best_period = best_period.min(out.state.period());
        let feasible = within_bound(out.state.period(), target);
        if feasible && best.as_ref().is_none_or(|(l, _)| out.state.latency() < *l) {
            best = Some((out.state.latency(), (out.state.mapping().clone(), out.steps)));
        }
        (feasible, out.cap_binding)
    };

    let (feasible, binding) = trial(0.0);
    if feasible {
        return Ok(best.expect("feasible trial recorded").1);
    }
    if !binding {
        // a looser cap would replay the same run
        return Err(HeuristicError::PeriodUnreachable { best_period });
    }

    let mut lo = 0.0;
    let mut hi = H3_ALPHA_START;
    loop {
        let (feasible, binding) = trial(hi);
        if feasible {
            break;
        }
        if hi >= H3_ALPHA_CAP || !binding {
            return Err(HeuristicError::PeriodUnreachable { best_period });
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..H3_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if trial(mid).0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(best.expect("a feasible trial was recorded").1)
}

/// Initial state of every heuristic (all stages on the fastest processor).
pub fn initial_state<'a>(app: &'a PipelineApp, platform: &'a Platform) -> HeuristicState<'a> {
    HeuristicState::initial(app, platform)
}
