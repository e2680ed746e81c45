//! Seeded instance generation for the four experiment families, and the
//! NMWTS to heterogeneous-partitioning reduction.

pub mod rng;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PipelineApp, Platform};
use crate::oracle::Hetero1DInstance;
pub use rng::XorShift64Star;

/// Link bandwidth used by every experiment family.
pub const BANDWIDTH: f64 = 10.0;
/// Processor speeds are integers drawn from this inclusive range.
pub const SPEED_RANGE: (u64, u64) = (1, 20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Balanced, homogeneous communications: every data size is 10, work in 1..=20.
    E1,
    /// Balanced, heterogeneous communications: data in 1..=100, work in 1..=20.
    E2,
    /// Large computations: data in 1..=20, work in 10..=1000.
    E3,
    /// Small computations: data in 1..=20, work real in [0.01, 10).
    E4,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::E1, Family::E2, Family::E3, Family::E4];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::E1 => "e1",
            Family::E2 => "e2",
            Family::E3 => "e3",
            Family::E4 => "e4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown experiment family `{0}` (expected e1, e2, e3 or e4)")]
pub struct UnknownFamily(String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "e1" | "1" => Ok(Family::E1),
            "e2" | "2" => Ok(Family::E2),
            "e3" | "3" => Ok(Family::E3),
            "e4" | "4" => Ok(Family::E4),
            _ => Err(UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExperimentConfig {
    pub family: Family,
    pub stages: usize,
    pub processors: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(family: Family, stages: usize, processors: usize, seed: u64) -> Self {
        assert!(stages >= 1 && processors >= 1);
        Self {
            family,
            stages,
            processors,
            seed,
        }
    }

    /// Config of instance `k` in a batch starting at this config's seed.
    pub fn nth(&self, k: u64) -> Self {
        Self {
            seed: self.seed.wrapping_add(k),
            ..*self
        }
    }

    /// `e<f>_n<N>_p<P>_s<seed>.pipe`
    pub fn file_name(&self) -> String {
        format!(
            "{}_n{}_p{}_s{}.pipe",
            self.family, self.stages, self.processors, self.seed
        )
    }
}

/// Draws one instance. The stream order is: the `n + 1` data sizes, then the
/// `n` works, then the `p` speeds.
pub fn generate(config: &ExperimentConfig) -> (PipelineApp, Platform) {
    let mut rng = XorShift64Star::new(config.seed);
    let n = config.stages;
    let ints = |count: usize, lo: u64, hi: u64, rng: &mut XorShift64Star| -> Vec<f64> {
        (0..count).map(|_| rng.int_in(lo, hi) as f64).collect()
    };
    let (data, work) = match config.family {
        Family::E1 => (vec![10.0; n + 1], ints(n, 1, 20, &mut rng)),
        Family::E2 => {
            let d = ints(n + 1, 1, 100, &mut rng);
            (d, ints(n, 1, 20, &mut rng))
        }
        Family::E3 => {
            let d = ints(n + 1, 1, 20, &mut rng);
            (d, ints(n, 10, 1000, &mut rng))
        }
        Family::E4 => {
            let d = ints(n + 1, 1, 20, &mut rng);
            (d, (0..n).map(|_| rng.real_in(0.01, 10.0)).collect())
        }
    };
    let speeds = ints(config.processors, SPEED_RANGE.0, SPEED_RANGE.1, &mut rng);
    (
        PipelineApp::new(work, data).expect("generated application is valid"),
        Platform::new(speeds, BANDWIDTH).expect("generated platform is valid"),
    )
}

/// `count` instances; instance `k` is generated from seed `config.seed + k`.
pub fn generate_batch(config: &ExperimentConfig, count: u64) -> Vec<(ExperimentConfig, PipelineApp, Platform)> {
    (0..count)
        .map(|k| {
            let c = config.nth(k);
            let (app, platform) = generate(&c);
            (c, app, platform)
        })
        .collect()
}

/// Numerical Matching with Target Sums: are there permutations `a`, `b`
/// with `x[i] + y[a(i)] == z[b(i)]` for all `i`?
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NmwtsInstance {
    pub x: Vec<u64>,
    pub y: Vec<u64>,
    pub z: Vec<u64>,
}

impl NmwtsInstance {
    pub fn new(x: Vec<u64>, y: Vec<u64>, z: Vec<u64>) -> Self {
        assert!(!x.is_empty() && x.len() == y.len() && y.len() == z.len());
        Self { x, y, z }
    }

    /// A YES-instance: `z[b[i]] = x[i] + y[a[i]]`.
    pub fn from_matching(x: Vec<u64>, y: Vec<u64>, a: &[usize], b: &[usize]) -> Self {
        let mut z = vec![0; x.len()];
        for i in 0..x.len() {
            z[b[i]] = x[i] + y[a[i]];
        }
        Self::new(x, y, z)
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn max_value(&self) -> u64 {
        self.x
            .iter()
            .chain(&self.y)
            .chain(&self.z)
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn sums_match(&self) -> bool {
        self.x.iter().sum::<u64>() + self.y.iter().sum::<u64>() == self.z.iter().sum::<u64>()
    }

    /// Exhaustive check over both permutations; for small `m` only.
    pub fn has_matching(&self) -> bool {
        let m = self.m();
        let mut z_left: Vec<u64> = self.z.clone();
        z_left.sort_unstable();
        let mut y_used = vec![false; m];
        fn go(inst: &NmwtsInstance, i: usize, y_used: &mut [bool], z_left: &mut Vec<u64>) -> bool {
            if i == inst.m() {
                return true;
            }
            for j in 0..inst.m() {
                if y_used[j] {
                    continue;
                }
                let target = inst.x[i] + inst.y[j];
                if let Some(pos) = z_left.iter().position(|&z| z == target) {
                    y_used[j] = true;
                    let z = z_left.remove(pos);
                    let ok = go(inst, i + 1, y_used, z_left);
                    z_left.insert(pos, z);
                    y_used[j] = false;
                    if ok {
                        return true;
                    }
                }
            }
            false
        }
        go(self, 0, &mut y_used, &mut z_left)
    }
}

/// Builds the heterogeneous partitioning instance whose answer (bound 1)
/// equals the NMWTS answer when the sums match.
///
/// With `M = max(x, y, z)`, `B = 2M`, `C = 5M`, `D = 7M`, block `i` of
/// `M + 3` tasks is `B + x[i]`, `M` ones, `C`, `D`. Speeds are `B + z[i]`,
/// then `C + M - y[i]`, then `m` copies of `D`.
pub fn build_reduction_instance(nmwts: &NmwtsInstance) -> Hetero1DInstance {
    assert!(
        nmwts.x.iter().chain(&nmwts.y).chain(&nmwts.z).all(|&v| v >= 1),
        "NMWTS values must be positive"
    );
    let m = nmwts.m();
    let big_m = nmwts.max_value();
    let (b, c, d) = (2 * big_m, 5 * big_m, 7 * big_m);

    let mut weights = Vec::with_capacity((big_m as usize + 3) * m);
    for &x in &nmwts.x {
        weights.push((b + x) as f64);
        weights.extend(std::iter::repeat_n(1.0, big_m as usize));
        weights.push(c as f64);
        weights.push(d as f64);
    }
    let speeds = nmwts
        .z
        .iter()
        .map(|&z| (b + z) as f64)
        .chain(nmwts.y.iter().map(|&y| (c + big_m - y) as f64))
        .chain(std::iter::repeat_n(d as f64, m))
        .collect();
    Hetero1DInstance {
        weights,
        speeds,
        bound: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn e1_has_homogeneous_communications() {
        for seed in 0..20 {
            let (app, platform) = generate(&ExperimentConfig::new(Family::E1, 7, 4, seed));
            assert!(app.data().iter().all(|&d| d == 10.0));
            assert_eq!(platform.bandwidth(), 10.0);
            assert!(app.work().iter().all(|&w| (1.0..=20.0).contains(&w) && w.fract() == 0.0));
        }
    }

    #[test]
    fn family_ranges() {
        for seed in 0..20 {
            let cfg = |f| ExperimentConfig::new(f, 12, 6, seed);
            let (a2, p2) = generate(&cfg(Family::E2));
            assert!(a2.data().iter().all(|&d| (1.0..=100.0).contains(&d)));
            assert!(p2.speeds().iter().all(|&s| (1.0..=20.0).contains(&s) && s.fract() == 0.0));
            let (a3, _) = generate(&cfg(Family::E3));
            assert!(a3.work().iter().all(|&w| (10.0..=1000.0).contains(&w)));
            assert!(a3.data().iter().all(|&d| (1.0..=20.0).contains(&d)));
            let (a4, _) = generate(&cfg(Family::E4));
            assert!(a4.work().iter().all(|&w| (0.01..10.0).contains(&w)));
            assert!(a4.data().iter().all(|&d| (1.0..=20.0).contains(&d)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = ExperimentConfig::new(Family::E4, 9, 5, 1234);
        assert_eq!(generate(&c), generate(&c));
        assert_ne!(generate(&c), generate(&c.nth(1)));
        let batch = generate_batch(&c, 3);
        assert_eq!(batch[2].0.seed, 1236);
        assert_eq!((batch[2].1.clone(), batch[2].2.clone()), generate(&c.nth(2)));
    }

    #[test]
    fn file_names() {
        let c = ExperimentConfig::new(Family::E3, 20, 100, 7);
        assert_eq!(c.file_name(), "e3_n20_p100_s7.pipe");
        assert_eq!("E2".parse::<Family>().unwrap(), Family::E2);
        assert!("e5".parse::<Family>().is_err());
    }

    #[test]
    fn reduction_of_smallest_instance() {
        let inst = build_reduction_instance(&NmwtsInstance::new(vec![1], vec![1], vec![2]));
        assert_eq!(inst.weights, vec![5.0, 1.0, 1.0, 10.0, 14.0]);
        assert_eq!(inst.speeds, vec![6.0, 11.0, 14.0]);
        assert_eq!(inst.bound, 1.0);
    }

    #[test]
    fn nmwts_matching_check() {
        let yes = NmwtsInstance::from_matching(vec![1, 2], vec![3, 1], &[1, 0], &[0, 1]);
        assert_eq!(yes.z, vec![2, 5]);
        assert!(yes.has_matching());
        let no = NmwtsInstance::new(vec![1, 1], vec![1, 3], vec![3, 3]);
        assert!(no.sums_match());
        assert!(!no.has_matching());
    }

    proptest! {
        #[test]
        fn reduction_shape_and_speed_separation(
            x in prop::collection::vec(1u64..8, 1..4),
            seed in any::<u64>(),
        ) {
            let m = x.len();
            let mut rng = XorShift64Star::new(seed);
            let y: Vec<u64> = (0..m).map(|_| rng.int_in(1, 7)).collect();
            let z: Vec<u64> = (0..m).map(|_| rng.int_in(1, 7)).collect();
            let nm = NmwtsInstance::new(x, y, z);
            let big_m = nm.max_value() as f64;
            let inst = build_reduction_instance(&nm);
            prop_assert_eq!(inst.weights.len(), (nm.max_value() as usize + 3) * m);
            prop_assert_eq!(inst.speeds.len(), 3 * m);
            for i in 0..m {
                prop_assert!(inst.speeds[i] <= 3.0 * big_m);
                prop_assert!(5.0 * big_m <= inst.speeds[m + i] && inst.speeds[m + i] <= 6.0 * big_m);
                prop_assert!(inst.speeds[i] < inst.speeds[m + i]);
                prop_assert_eq!(inst.speeds[2 * m + i], 7.0 * big_m);
            }
        }

        #[test]
        fn generated_instances_are_valid(f in 0usize..4, n in 1usize..30, p in 1usize..30, seed in any::<u64>()) {
            // generate() panics on an invalid instance
            let (app, platform) = generate(&ExperimentConfig::new(Family::ALL[f], n, p, seed));
            prop_assert_eq!(app.stages(), n);
            prop_assert_eq!(platform.processors(), p);
        }
    }
}
