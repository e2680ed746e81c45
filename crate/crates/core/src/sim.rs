//! Discrete-event simulation of a mapped pipeline.
//!
//! Each interval runs on its own processor as a loop: receive data set `k`,
//! compute it, send it on. Transfers are rendezvous: a transfer starts only
//! when the sender has finished computing and the receiver is idle waiting
//! for input, and it keeps both busy for `delta / b`. The outside world can
//! always send the next input and always accept an output. A processor never
//! overlaps communication with computation, and takes part in one transfer
//! at a time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::model::{evaluate_unchecked, validate, CostReport, IntervalMapping, ModelError, PipelineApp, Platform};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid mapping: {0}")]
    MappingInvalid(#[from] ModelError),
    #[error("need at least {needed} data sets for {intervals} intervals, got {got}")]
    TooFewDatasets {
        needed: usize,
        got: usize,
        intervals: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Mean gap between consecutive completions over the last `m` data sets.
    pub measured_period: f64,
    /// Completion time of the first data set (which enters at time 0).
    pub measured_latency: f64,
    pub trace_length: usize,
    /// Completion time of every data set.
    pub completions: Vec<f64>,
}

impl SimReport {
    /// Relative errors of (period, latency) against a closed-form report.
    pub fn relative_error(&self, analytic: &CostReport) -> (f64, f64) {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        (
            rel(self.measured_period, analytic.period),
            rel(self.measured_latency, analytic.latency),
        )
    }
}

/// Smallest number of data sets accepted for `m` intervals.
pub fn min_datasets(intervals: usize) -> usize {
    2 * intervals + 2
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    WaitRecv,
    Busy,
    WaitSend,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Transfer on link `l` (into processor `l`, out of processor `l - 1`).
    Transfer(usize),
    Compute(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Sim {
    m: usize,
    datasets: usize,
    transfer: Vec<f64>,
    compute: Vec<f64>,
    phase: Vec<Phase>,
    /// Data set each processor is receiving, computing or sending.
    current: Vec<usize>,
    /// Next data set the outside world injects.
    next_input: usize,
    completions: Vec<f64>,
    queue: BinaryHeap<Event>,
    seq: u64,
}

impl Sim {
    fn schedule(&mut self, time: f64, kind: Kind) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn try_transfer(&mut self, link: usize, now: f64) {
        let sender_ready = if link == 0 {
            self.next_input < self.datasets
        } else {
            self.phase[link - 1] == Phase::WaitSend
        };
        let receiver_ready = link == self.m || self.phase[link] == Phase::WaitRecv;
        if !(sender_ready && receiver_ready) {
            return;
        }
        let dataset = if link == 0 {
            self.next_input += 1;
            self.next_input - 1
        } else {
            self.phase[link - 1] = Phase::Busy;
            self.current[link - 1]
        };
        if link < self.m {
            self.phase[link] = Phase::Busy;
            self.current[link] = dataset;
        }
        self.schedule(now + self.transfer[link], Kind::Transfer(link));
    }

    fn run(&mut self) {
        self.try_transfer(0, 0.0);
        while let Some(ev) = self.queue.pop() {
            let now = ev.time;
            match ev.kind {
                Kind::Transfer(link) => {
                    if link < self.m {
                        self.schedule(now + self.compute[link], Kind::Compute(link));
                    } else {
                        self.completions.push(now);
                    }
                    if link > 0 {
                        let sender = link - 1;
                        self.phase[sender] = if self.current[sender] + 1 < self.datasets {
                            Phase::WaitRecv
                        } else {
                            Phase::Done
                        };
                        if self.phase[sender] == Phase::WaitRecv {
                            self.try_transfer(sender, now);
                        }
                    }
                }
                Kind::Compute(proc) => {
                    self.phase[proc] = Phase::WaitSend;
                    self.try_transfer(proc + 1, now);
                }
            }
        }
    }
}

/// Simulates `datasets` data sets flowing through the mapped pipeline.
pub fn simulate(
    app: &PipelineApp,
    platform: &Platform,
    mapping: &IntervalMapping,
    datasets: usize,
) -> Result<SimReport, SimError> {
    validate(app, platform, mapping)?;
    let m = mapping.len();
    if datasets < min_datasets(m) {
        return Err(SimError::TooFewDatasets {
            needed: min_datasets(m),
            got: datasets,
            intervals: m,
        });
    }
    let b = platform.bandwidth();
    let mut transfer: Vec<f64> = mapping
        .intervals()
        .iter()
        .map(|iv| app.data_in(*iv) / b)
        .collect();
    transfer.push(app.data()[app.stages()] / b);
    let compute = mapping
        .parts()
        .map(|(iv, p)| app.interval_work(iv) / platform.speed(p))
        .collect();

    let mut sim = Sim {
        m,
        datasets,
        transfer,
        compute,
        phase: vec![Phase::WaitRecv; m],
        current: vec![0; m],
        next_input: 0,
        completions: Vec::with_capacity(datasets),
        queue: BinaryHeap::new(),
        seq: 0,
    };
    sim.run();
    debug_assert_eq!(sim.completions.len(), datasets);

    let c = &sim.completions;
    let last = c.len() - 1;
    let measured_period = (c[last] - c[last - m]) / m as f64;
    Ok(SimReport {
        measured_period,
        measured_latency: c[0],
        trace_length: c.len(),
        completions: sim.completions,
    })
}

/// Simulation next to the closed-form costs.
pub fn compare(
    app: &PipelineApp,
    platform: &Platform,
    mapping: &IntervalMapping,
    datasets: usize,
) -> Result<(SimReport, CostReport), SimError> {
    let report = simulate(app, platform, mapping, datasets)?;
    Ok((report, evaluate_unchecked(app, platform, mapping)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, Interval};
    use proptest::prelude::*;

    fn sample() -> (PipelineApp, Platform, IntervalMapping) {
        (
            PipelineApp::new(vec![4.0, 2.0, 6.0], vec![2.0, 4.0, 6.0, 2.0]).unwrap(),
            Platform::new(vec![2.0, 1.0], 2.0).unwrap(),
            IntervalMapping::new(vec![Interval::new(0, 1), Interval::new(2, 2)], vec![0, 1]),
        )
    }

    #[test]
    fn two_interval_example() {
        let (app, platform, m) = sample();
        let r = simulate(&app, &platform, &m, 20).unwrap();
        assert_eq!(r.measured_period, 10.0);
        assert_eq!(r.measured_latency, 14.0);
        assert_eq!(r.trace_length, 20);
    }

    #[test]
    fn single_interval_period_equals_latency() {
        let (app, platform, _) = sample();
        let m = IntervalMapping::single(3, 0);
        let r = simulate(&app, &platform, &m, 4).unwrap();
        let cost = evaluate(&app, &platform, &m).unwrap();
        assert_eq!(r.measured_period, cost.latency);
        assert_eq!(r.measured_latency, cost.latency);
    }

    #[test]
    fn pure_compute_pipeline() {
        let app = PipelineApp::new(vec![3.0, 8.0, 1.0], vec![0.0; 4]).unwrap();
        let platform = Platform::new(vec![1.0, 2.0, 1.0], 5.0).unwrap();
        let m = IntervalMapping::from_ends(&[0, 1, 2], vec![0, 1, 2]);
        let r = simulate(&app, &platform, &m, 8).unwrap();
        assert_eq!(r.measured_period, 4.0);
        assert_eq!(r.measured_latency, 8.0);
    }

    #[test]
    fn errors() {
        let (app, platform, m) = sample();
        assert!(matches!(
            simulate(&app, &platform, &m, 5),
            Err(SimError::TooFewDatasets { needed: 6, .. })
        ));
        let bad = IntervalMapping::new(vec![Interval::new(0, 2)], vec![3]);
        assert!(matches!(
            simulate(&app, &platform, &bad, 10),
            Err(SimError::MappingInvalid(_))
        ));
    }

    proptest! {
        #[test]
        fn matches_closed_form(
            w in prop::collection::vec(0.1f64..20.0, 1..9),
            d_seed in prop::collection::vec(0.0f64..30.0, 10),
            s in prop::collection::vec(0.5f64..20.0, 1..6),
            b in 0.5f64..20.0,
            cut_bits in any::<u16>(),
            perm_seed in any::<u64>(),
        ) {
            let n = w.len();
            let data = d_seed[..=n].to_vec();
            let app = PipelineApp::new(w, data).unwrap();
            let platform = Platform::new(s, b).unwrap();
            let p = platform.processors();
            let mut ends: Vec<usize> = (0..n - 1).filter(|i| cut_bits >> i & 1 == 1).collect();
            ends.truncate(p - 1);
            ends.push(n - 1);
            let mut procs: Vec<usize> = (0..p).collect();
            let mut x = perm_seed;
            for i in (1..p).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                procs.swap(i, (x >> 33) as usize % (i + 1));
            }
            procs.truncate(ends.len());
            let mapping = IntervalMapping::from_ends(&ends, procs);
            let (sim, cost) = compare(&app, &platform, &mapping, min_datasets(mapping.len())).unwrap();
            let (ep, el) = sim.relative_error(&cost);
            prop_assert!(ep <= 1e-9, "period {} vs {}", sim.measured_period, cost.period);
            prop_assert!(el <= 1e-9, "latency {} vs {}", sim.measured_latency, cost.latency);
        }
    }
}
