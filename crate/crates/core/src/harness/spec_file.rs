//! Sweep specifications in TOML.
//!
//! ```toml
//! families = ["e1", "e2"]
//! stages = [5, 10]
//! processors = [10]
//! instances = 50
//! seed = 0
//! heuristics = ["h1", "sp-bi-p", "h4"]   # default: all six
//!
//! [period_grid]
//! geometric = { min = 2.0, max = 40.0, count = 16 }
//!
//! [latency_grid]
//! auto = 16          # or: values = [10.0, 20.0, 40.0]
//! ```

use serde::Deserialize;

use super::{Grid, HarnessError, SweepSpec};
use crate::gen::{ExperimentConfig, Family};
use crate::heuristics::Heuristic;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricSpec {
    min: f64,
    max: f64,
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    values: Option<Vec<f64>>,
    geometric: Option<GeometricSpec>,
    auto: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    families: Vec<Family>,
    stages: Vec<usize>,
    processors: Vec<usize>,
    instances: u64,
    #[serde(default)]
    seed: u64,
    heuristics: Option<Vec<Heuristic>>,
    period_grid: Option<GridSpec>,
    latency_grid: Option<GridSpec>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = HarnessError;

    fn try_from(g: GridSpec) -> Result<Self, Self::Error> {
        let grid = match (g.values, g.geometric, g.auto) {
            (Some(v), None, None) => Grid::Explicit(v),
            (None, Some(GeometricSpec { min, max, count }), None) => {
                Grid::Geometric { min, max, count }
            }
            (None, None, Some(count)) => Grid::Auto { count },
            _ => {
                return Err(HarnessError::InvalidGrid(
                    "give exactly one of `values`, `geometric`, `auto`".into(),
                ))
            }
        };
        grid.validate()?;
        Ok(grid)
    }
}

pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, HarnessError> {
    let file: SpecFile =
        toml::from_str(text).map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
    if file.stages.contains(&0) || file.processors.contains(&0) {
        return Err(HarnessError::InvalidSpec("stage and processor counts must be >= 1".into()));
    }
    let mut configs = Vec::new();
    for &family in &file.families {
        for &n in &file.stages {
            for &p in &file.processors {
                configs.push(ExperimentConfig::new(family, n, p, file.seed));
            }
        }
    }
    if configs.is_empty() {
        return Err(HarnessError::InvalidSpec("no (family, n, p) combination".into()));
    }
    let spec = SweepSpec {
        configs,
        instances: file.instances,
        heuristics: file.heuristics.unwrap_or_else(|| Heuristic::ALL.to_vec()),
        period_grid: file.period_grid.map(Grid::try_from).transpose()?,
        latency_grid: file.latency_grid.map(Grid::try_from).transpose()?,
    };
    spec.validate()?;
    Ok(spec)
}
