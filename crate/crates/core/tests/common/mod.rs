#![allow(dead_code)]

use pipemap::gen::rng::XorShift64Star;
use pipemap::gen::{generate, ExperimentConfig, Family};
use pipemap::model::{evaluate, CostReport, IntervalMapping, PipelineApp, Platform};

pub const FAMILIES: [Family; 4] = [Family::E1, Family::E2, Family::E3, Family::E4];

/// Instance `k` of a small batch: family, n in 3..=8, p in 2..=4.
pub fn small_instance(k: u64) -> (ExperimentConfig, PipelineApp, Platform) {
    let mut rng = XorShift64Star::new(0x5eed_0000 + k);
    let family = FAMILIES[(k % 4) as usize];
    let n = rng.int_in(3, 8) as usize;
    let p = rng.int_in(2, 4) as usize;
    let config = ExperimentConfig::new(family, n, p, 1000 + k);
    let (app, platform) = generate(&config);
    (config, app, platform)
}

pub fn random_mapping(rng: &mut XorShift64Star, n: usize, p: usize) -> IntervalMapping {
    let m = rng.int_in(1, n.min(p) as u64) as usize;
    // m - 1 distinct cut positions among 1..n
    let mut cuts: Vec<usize> = (1..n).collect();
    for i in 0..m - 1 {
        let j = rng.int_in(i as u64, (cuts.len() - 1) as u64) as usize;
        cuts.swap(i, j);
    }
    let mut ends: Vec<usize> = cuts[..m - 1].iter().map(|c| c - 1).collect();
    ends.sort_unstable();
    ends.push(n - 1);
    let mut procs: Vec<usize> = (0..p).collect();
    for i in 0..m {
        let j = rng.int_in(i as u64, (p - 1) as u64) as usize;
        procs.swap(i, j);
    }
    IntervalMapping::from_ends(&ends, procs[..m].to_vec())
}

/// Every valid interval mapping, built without the oracle's enumerator.
pub fn all_mappings(n: usize, p: usize) -> Vec<IntervalMapping> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << (n - 1)) {
        let mut ends: Vec<usize> = (0..n - 1).filter(|i| mask & (1 << i) != 0).collect();
        ends.push(n - 1);
        let m = ends.len();
        if m > p {
            continue;
        }
        let mut alloc = Vec::with_capacity(m);
        let mut used = vec![false; p];
        assignments(&ends, p, &mut alloc, &mut used, &mut out);
    }
    out
}

fn assignments(
    ends: &[usize],
    p: usize,
    alloc: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<IntervalMapping>,
) {
    if alloc.len() == ends.len() {
        out.push(IntervalMapping::from_ends(ends, alloc.clone()));
        return;
    }
    for u in 0..p {
        if !used[u] {
            used[u] = true;
            alloc.push(u);
            assignments(ends, p, alloc, used, out);
            alloc.pop();
            used[u] = false;
        }
    }
}

pub fn all_costs(app: &PipelineApp, platform: &Platform) -> Vec<(IntervalMapping, CostReport)> {
    all_mappings(app.stages(), platform.processors())
        .into_iter()
        .map(|m| {
            let c = evaluate(app, platform, &m).unwrap();
            (m, c)
        })
        .collect()
}
