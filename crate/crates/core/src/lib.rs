//! Mapping linear pipeline workflows onto processors of different speeds
//! connected by identical links, trading off period (inverse throughput)
//! against latency.
//!
//! - [`model`]: applications, platforms, interval mappings, period/latency.
//! - [`heuristics`]: six polynomial splitting heuristics, each fixing one
//!   criterion and optimizing the other.
//! - [`oracle`]: exhaustive reference solvers for small instances, the full
//!   Pareto front, and heterogeneous chains-to-chains decisions.
//! - [`gen`]: reproducible random instances and the NMWTS reduction.
//! - [`sim`]: discrete-event check of the closed-form costs.
//! - [`harness`]: sweeps, failure thresholds, CSV and plot data.
//!
//! ```
//! use pipemap::heuristics::Heuristic;
//! use pipemap::model::{evaluate, PipelineApp, Platform};
//!
//! let app = PipelineApp::new(vec![10.0, 10.0], vec![0.0, 0.0, 0.0]).unwrap();
//! let platform = Platform::new(vec![10.0, 10.0], 1.0).unwrap();
//! let mapping = Heuristic::H1.run(&app, &platform, 1.0).unwrap();
//! let cost = evaluate(&app, &platform, &mapping).unwrap();
//! assert_eq!((cost.period, cost.latency), (1.0, 2.0));
//! ```

pub mod gen;
pub mod harness;
pub mod heuristics;
pub mod model;
pub mod oracle;
pub mod sim;
