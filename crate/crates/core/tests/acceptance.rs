//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed even when an earlier criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use common::{all_costs, random_mapping, small_instance};
use pipemap::gen::rng::XorShift64Star;
use pipemap::gen::{build_reduction_instance, generate, ExperimentConfig, Family, NmwtsInstance};
use pipemap::harness::{failure_threshold, run_sweep, write_csv, Grid, SweepSpec};
use pipemap::heuristics::{Heuristic, HeuristicError, Mode};
use pipemap::model::{evaluate, within_bound, IntervalMapping, PipelineApp, Platform};
use pipemap::oracle::{
    brute_force_min_period, hetero_1d_partition_decide, min_period_with_intervals,
    optimal_latency, pareto_front, Hetero1DInstance, IntervalCount,
};
use pipemap::sim;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn cost_model_soundness() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (_, app, platform) = small_instance(k);
        let mut rng = XorShift64Star::new(k);
        for _ in 0..3 {
            let m = random_mapping(&mut rng, app.stages(), platform.processors());
            let datasets = sim::min_datasets(m.len()).max(20);
            let (report, cost) =
                sim::compare(&app, &platform, &m, datasets).map_err(|e| e.to_string())?;
            let (ep, el) = report.relative_error(&cost);
            worst = worst.max(ep).max(el);
            if ep > 1e-9 || el > 1e-9 {
                return Err(format!("instance {k}, {m}: rel err period {ep:e} latency {el:e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("300 mappings, max rel err {worst:e}, {elapsed:.2?}"))
}

fn optimal_latency_exact() -> Outcome {
    for k in 0..200 {
        let (_, app, platform) = small_instance(k);
        let (l, witness) = optimal_latency(&app, &platform);
        let best = all_costs(&app, &platform)
            .iter()
            .map(|(_, c)| c.latency)
            .fold(f64::INFINITY, f64::min);
        if l != best {
            return Err(format!("instance {k}: closed form {l} vs exhaustive {best}"));
        }
        if evaluate(&app, &platform, &witness).unwrap().latency != l {
            return Err(format!("instance {k}: witness does not reach {l}"));
        }
    }
    Ok("200 instances, exact equality".into())
}

/// Feasible heuristic results on the small batch, 16 thresholds each.
fn small_batch_results(
    app: &PipelineApp,
    platform: &Platform,
) -> Vec<(Heuristic, f64, Result<IntervalMapping, HeuristicError>)> {
    let grid = Grid::Auto { count: 16 }.values(app, platform);
    let mut out = Vec::new();
    for h in Heuristic::ALL {
        for &t in &grid {
            out.push((h, t, h.run(app, platform, t)));
        }
    }
    out
}

fn oracle_dominance() -> Outcome {
    let mut checked = 0;
    for k in 0..200 {
        let (_, app, platform) = small_instance(k);
        let front = pareto_front(&app, &platform, false).map_err(|e| e.to_string())?;
        let (min_period, _) = brute_force_min_period(&app, &platform, false).unwrap();
        for (h, t, r) in small_batch_results(&app, &platform) {
            let Ok(m) = r else { continue };
            let c = evaluate(&app, &platform, &m).unwrap();
            checked += 1;
            if !front.covers(c.period, c.latency, 1e-9) {
                return Err(format!("instance {k}, {h} at {t}: ({}, {}) not covered", c.period, c.latency));
            }
            if c.period < min_period {
                return Err(format!("instance {k}, {h} at {t}: period {} below optimum {min_period}", c.period));
            }
        }
    }
    Ok(format!("{checked} feasible results covered by the front"))
}

fn constraint_honesty() -> Outcome {
    let (mut ok, mut infeasible) = (0, 0);
    for k in 0..200 {
        let (_, app, platform) = small_instance(k);
        let (l_opt, _) = optimal_latency(&app, &platform);
        for (h, t, r) in small_batch_results(&app, &platform) {
            match r {
                Ok(m) => {
                    ok += 1;
                    let c = evaluate(&app, &platform, &m).map_err(|e| e.to_string())?;
                    let value = match h.mode() {
                        Mode::Period => c.period,
                        Mode::Latency => c.latency,
                    };
                    if !within_bound(value, t) {
                        return Err(format!("instance {k}, {h}: {value} exceeds {t}"));
                    }
                }
                Err(HeuristicError::PeriodUnreachable { best_period }) => {
                    infeasible += 1;
                    if h.mode() != Mode::Period || within_bound(best_period, t) {
                        return Err(format!("instance {k}, {h}: bogus failure at {t} ({best_period})"));
                    }
                }
                Err(HeuristicError::LatencyBelowOptimal { optimal_latency }) => {
                    infeasible += 1;
                    if h.mode() != Mode::Latency || optimal_latency != l_opt || t >= l_opt {
                        return Err(format!("instance {k}, {h}: bogus failure at {t}"));
                    }
                }
                Err(e) => return Err(format!("instance {k}, {h}: {e}")),
            }
        }
    }
    Ok(format!("{ok} feasible and {infeasible} infeasible results re-checked"))
}

fn reduction() -> Outcome {
    let start = Instant::now();
    let mut rng = XorShift64Star::new(7);
    let shuffle = |rng: &mut XorShift64Star, m: usize| {
        let mut v: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            v.swap(i, rng.int_in(0, i as u64) as usize);
        }
        v
    };
    for case in 0..20 {
        let m = 1 + case % 3;
        let (a, b) = (shuffle(&mut rng, m), shuffle(&mut rng, m));
        // x[i] + y[a[i]] <= 6 keeps every value within 6
        let x: Vec<u64> = (0..m).map(|_| rng.int_in(1, 5)).collect();
        let mut y = vec![0; m];
        for i in 0..m {
            y[a[i]] = rng.int_in(1, 6 - x[i]);
        }
        let nmwts = NmwtsInstance::from_matching(x, y, &a, &b);
        assert!(nmwts.max_value() <= 6);
        let inst = build_reduction_instance(&nmwts);
        let w = hetero_1d_partition_decide(&inst, false)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("YES-instance {nmwts:?} rejected"))?;
        let ratio = w.max_ratio(&inst);
        if ratio > 1.0 + 1e-12 {
            return Err(format!("YES-instance {nmwts:?}: witness ratio {ratio}"));
        }
    }
    let mut no = 0;
    while no < 10 {
        let v: Vec<u64> = (0..6).map(|_| rng.int_in(1, 6)).collect();
        let nmwts = NmwtsInstance::new(v[0..2].to_vec(), v[2..4].to_vec(), v[4..6].to_vec());
        if !nmwts.sums_match() || nmwts.has_matching() {
            continue;
        }
        no += 1;
        let inst = build_reduction_instance(&nmwts);
        if hetero_1d_partition_decide(&inst, false).map_err(|e| e.to_string())?.is_some() {
            return Err(format!("NO-instance {nmwts:?} accepted"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("20 YES and 10 NO instances decided, {elapsed:.2?}"))
}

fn failure_ordering() -> Outcome {
    let config = ExperimentConfig::new(Family::E1, 10, 10, 0);
    let grid = Grid::Auto { count: 16 };
    let summary = |h| failure_threshold(&config, h, &grid, 50).map_err(|e| e.to_string());
    let (h1, h2a) = (summary(Heuristic::H1)?, summary(Heuristic::H2a)?);
    if h1.mean > h2a.mean {
        return Err(format!("h1 mean {} > h2a mean {}", h1.mean, h2a.mean));
    }
    let mut agree = 0;
    for k in 0..50 {
        let (app, platform) = generate(&config.nth(k));
        let values = grid.values(&app, &platform);
        let feasible = |h: Heuristic| -> Vec<bool> {
            values.iter().map(|&t| h.run(&app, &platform, t).is_ok()).collect()
        };
        if feasible(Heuristic::H4) == feasible(Heuristic::H5) {
            agree += 1;
        }
    }
    if agree < 45 {
        return Err(format!("h4/h5 agree on {agree}/50 instances"));
    }
    Ok(format!(
        "h1 mean {:.4} <= h2a mean {:.4}; h4/h5 grids agree on {agree}/50",
        h1.mean, h2a.mean
    ))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let spec = SweepSpec {
        configs: vec![ExperimentConfig::new(Family::E1, 10, 10, 0)],
        instances: 50,
        heuristics: Heuristic::ALL.to_vec(),
        period_grid: Some(Grid::Auto { count: 16 }),
        latency_grid: Some(Grid::Auto { count: 16 }),
    };
    let first = write_csv(&run_sweep(&spec).map_err(|e| e.to_string())?, false);
    let second = write_csv(&run_sweep(&spec).map_err(|e| e.to_string())?, false);
    let elapsed = start.elapsed();
    if first != second {
        return Err("CSV output differs between runs".into());
    }
    if first.lines().count() != 1 + 50 * 6 * 16 {
        return Err(format!("unexpected row count {}", first.lines().count()));
    }
    if elapsed > Duration::from_secs(120) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} bytes identical across two runs, {elapsed:.2?}", first.len()))
}

fn small_instance_strategy(
    max_stages: usize,
    max_procs: usize,
) -> impl Strategy<Value = (PipelineApp, Platform)> {
    (1..=max_stages, 1..=max_procs, prop_oneof![Just(1.0), Just(2.0), Just(10.0)])
        .prop_flat_map(|(n, p, b)| {
            (
                prop::collection::vec(1u32..=100, n),
                prop::collection::vec(0u32..=50, n + 1),
                prop::collection::vec(1u32..=20, p),
                Just(b),
            )
        })
        .prop_map(|(w, d, s, b)| {
            (
                PipelineApp::new(
                    w.into_iter().map(f64::from).collect(),
                    d.into_iter().map(f64::from).collect(),
                )
                .unwrap(),
                Platform::new(s.into_iter().map(f64::from).collect(), b).unwrap(),
            )
        })
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn property_suite() -> Outcome {
    run_property(
        "scale invariance",
        (small_instance_strategy(8, 4), any::<u64>(), -6i32..=6, 0.02f64..2.0),
        |((app, platform), seed, exp, target)| {
            let c = 2f64.powi(exp);
            let scaled = app.scaled(c).unwrap();
            let mut rng = XorShift64Star::new(seed);
            let m = random_mapping(&mut rng, app.stages(), platform.processors());
            let (a, b) = (
                evaluate(&app, &platform, &m).unwrap(),
                evaluate(&scaled, &platform, &m).unwrap(),
            );
            prop_assert_eq!(b.period, c * a.period);
            prop_assert_eq!(b.latency, c * a.latency);
            let (l_opt, _) = optimal_latency(&app, &platform);
            for h in Heuristic::ALL {
                let k = match h.mode() {
                    Mode::Period => target * l_opt,
                    Mode::Latency => (1.0 + target) * l_opt,
                };
                let x = h.run(&app, &platform, k).ok();
                let y = h.run(&scaled, &platform, c * k).ok();
                prop_assert_eq!(x, y, "{} at {}", h, k);
            }
            Ok(())
        },
    )?;
    run_property(
        "strict bottleneck decrease",
        (small_instance_strategy(10, 6), 0.01f64..1.5),
        |((app, platform), target)| {
            let (l_opt, _) = optimal_latency(&app, &platform);
            for h in [Heuristic::H1, Heuristic::H2a, Heuristic::H2b] {
                let Ok((_, steps)) = h.run_traced(&app, &platform, target * l_opt) else {
                    continue;
                };
                prop_assert!(steps.len() < platform.processors());
                let mut period = f64::INFINITY;
                for s in &steps {
                    prop_assert!(s.cycle_after < s.cycle_before, "{}: {:?}", h, s);
                    prop_assert!(s.period_after <= period);
                    period = s.period_after;
                }
            }
            for h in [Heuristic::H4, Heuristic::H5] {
                let k = l_opt * (1.0 + target);
                let (_, steps) = h.run_traced(&app, &platform, k).unwrap();
                let (mut period, mut latency) = (f64::INFINITY, l_opt);
                for s in &steps {
                    prop_assert!(s.period_after <= period * (1.0 + 1e-12));
                    prop_assert!(s.latency_after >= latency * (1.0 - 1e-12));
                    prop_assert!(within_bound(s.latency_after, k));
                    period = s.period_after;
                    latency = s.latency_after;
                }
            }
            Ok(())
        },
    )?;
    run_property(
        "pareto non-domination",
        small_instance_strategy(6, 4),
        |(app, platform)| {
            let front = pareto_front(&app, &platform, false).unwrap();
            for pair in front.points().windows(2) {
                prop_assert!(pair[0].period < pair[1].period);
                prop_assert!(pair[0].latency > pair[1].latency);
            }
            for pt in front.points() {
                let c = evaluate(&app, &platform, &pt.witness).unwrap();
                prop_assert_eq!((c.period, c.latency), (pt.period, pt.latency));
            }
            for (m, c) in all_costs(&app, &platform) {
                prop_assert!(front.dominates_or_equals(c.period, c.latency), "{} not covered", m);
                for pt in front.points() {
                    let strictly = c.period <= pt.period
                        && c.latency <= pt.latency
                        && (c.period < pt.period || c.latency < pt.latency);
                    prop_assert!(!strictly, "{} dominates a front point", m);
                }
            }
            Ok(())
        },
    )?;
    run_property(
        "decision monotonicity",
        (
            prop::collection::vec(1u32..=30, 1..=9),
            prop::collection::vec(1u32..=10, 1..=4),
            0.05f64..3.0,
            1.0f64..3.0,
        ),
        |(w, s, k, stretch)| {
            let weights: Vec<f64> = w.into_iter().map(f64::from).collect();
            let speeds: Vec<f64> = s.into_iter().map(f64::from).collect();
            let inst = |bound| Hetero1DInstance {
                weights: weights.clone(),
                speeds: speeds.clone(),
                bound,
            };
            let lo = hetero_1d_partition_decide(&inst(k), false).unwrap();
            let hi = hetero_1d_partition_decide(&inst(k * stretch), false).unwrap();
            if lo.is_some() {
                prop_assert!(hi.is_some());
            }
            if speeds.len() <= weights.len() {
                let app = PipelineApp::new(weights.clone(), vec![0.0; weights.len() + 1]).unwrap();
                let platform = Platform::new(speeds.clone(), 1.0).unwrap();
                let best = min_period_with_intervals(
                    &app,
                    &platform,
                    IntervalCount::Exactly(speeds.len()),
                    false,
                )
                .unwrap()
                .map(|(v, _)| v)
                .unwrap();
                prop_assert_eq!(lo.is_some(), best <= k, "optimum {} bound {}", best, k);
            }
            Ok(())
        },
    )?;
    Ok("4 properties x 500 cases".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("1 cost-model soundness", cost_model_soundness),
        ("2 optimal latency", optimal_latency_exact),
        ("3 oracle dominance", oracle_dominance),
        ("4 constraint honesty", constraint_honesty),
        ("5 partition reduction", reduction),
        ("6 failure threshold ordering", failure_ordering),
        ("7 sweep determinism", determinism),
        ("8 property suite", property_suite),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {}/8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
