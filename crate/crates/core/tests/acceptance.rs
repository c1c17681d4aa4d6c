//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.
#![allow(clippy::needless_range_loop)]

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use ndarray::Array1;
use neural_lasso::harness::{render_csv, run_experiment, ExperimentConfig, Metric, ReportTable};
use neural_lasso::lasso::{cd_linear, cd_logistic, lambda_max};
use neural_lasso::model::{LabeledDataset, Method, Task};
use neural_lasso::neural::{gradient, loss, loss_linear, loss_logistic, zero_condition, NeuralParams};
use neural_lasso::rng::seeded;
use neural_lasso::training::{refit_unpenalized, VoteTally};
use rand::Rng;

const BASE_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean(table: &ReportTable, method: Method, metric: Metric) -> f64 {
    table.row(method, metric).map(|r| r.mean).unwrap_or(f64::NAN)
}

fn benchmark(p: usize, reps: usize, methods: &str) -> (ReportTable, Duration) {
    let mut cfg = ExperimentConfig::default();
    cfg.set("repetitions", &reps.to_string()).unwrap();
    cfg.set("p", &p.to_string()).unwrap();
    cfg.set("methods", methods).unwrap();
    cfg.base_seed = BASE_SEED;
    let start = Instant::now();
    let table = run_experiment(&cfg).expect("benchmark runs");
    (table, start.elapsed())
}

fn criterion_1(t: &ReportTable, elapsed: Duration) -> Outcome {
    let (mse, prec, rec) = (
        mean(t, Method::Statistical, Metric::Mse),
        mean(t, Method::Statistical, Metric::Precision),
        mean(t, Method::Statistical, Metric::Recall),
    );
    outcome(
        (1.15..=1.45).contains(&mse) && (0.55..=0.80).contains(&prec) && rec >= 0.99,
        format!(
            "statistical mse {mse:.3}, precision {prec:.3}, recall {rec:.3} (all methods took {elapsed:.1?})"
        ),
    )
}

fn criterion_2(t: &ReportTable) -> Outcome {
    let stat_mse = mean(t, Method::Statistical, Metric::Mse);
    let vote = t.row(Method::VotingNeural, Metric::Mse).unwrap();
    let stat_prec = mean(t, Method::Statistical, Metric::Precision);
    let vote_prec = mean(t, Method::VotingNeural, Metric::Precision);
    let p = vote.p_value.unwrap_or(f64::NAN);
    outcome(
        vote.mean < stat_mse && vote_prec >= stat_prec + 0.15 && p < 0.05,
        format!(
            "voting mse {:.3} vs {stat_mse:.3} (p = {p:.4}), precision {vote_prec:.3} vs {stat_prec:.3}",
            vote.mean
        ),
    )
}

fn criterion_3(t: &ReportTable) -> Outcome {
    let (s, r) = (
        mean(t, Method::Statistical, Metric::Mse),
        mean(t, Method::RestrictedNeural, Metric::Mse),
    );
    outcome(
        (r - s).abs() <= 0.05,
        format!("restricted mse {r:.3} vs statistical {s:.3}"),
    )
}

fn criterion_4(t: &ReportTable) -> Outcome {
    let (s, d) = (
        mean(t, Method::Statistical, Metric::Mse),
        mean(t, Method::StandardNeural, Metric::Mse),
    );
    outcome(d > s, format!("standard mse {d:.3} vs statistical {s:.3}"))
}

fn criterion_5() -> Outcome {
    let (t, elapsed) = benchmark(100, 10, "statistical,voting");
    let (prec, rec) = (
        mean(&t, Method::VotingNeural, Metric::Precision),
        mean(&t, Method::VotingNeural, Metric::Recall),
    );
    outcome(
        prec >= 0.90 && rec >= 0.95 && elapsed < Duration::from_secs(600),
        format!("p=100 voting precision {prec:.3}, recall {rec:.3}, {elapsed:.1?}"),
    )
}

fn random_params(rng: &mut impl Rng, p: usize, task: Task, away_from_zero: bool) -> NeuralParams {
    let mut params = NeuralParams::init(p, rng.random_range(0.0..1.0));
    params.w = Array1::from_shape_fn(p, |_| {
        let v: f64 = rng.random_range(-0.5..0.5);
        if away_from_zero && v.abs() < 1e-2 {
            1e-2_f64.copysign(v)
        } else {
            v
        }
    });
    params.gamma = rng.random_range(0.2..2.0);
    if task == Task::Logistic {
        params.b0 = rng.random_range(-1.0..1.0);
    }
    params
}

/// Sigmoid and its complement evaluated without cancellation.
fn sig_pair(eta: f64) -> (f64, f64) {
    (naive_sigmoid(eta), naive_sigmoid(-eta))
}

fn criterion_6() -> Outcome {
    let mut rng = seeded(6);
    let lin = instance(40, 6, Task::Linear, 61);
    let log = instance(40, 6, Task::Logistic, 62);
    let (mut worst_lin, mut worst_log) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let params = random_params(&mut rng, 6, Task::Linear, false);
        let beta: Vec<f64> = params.w.iter().map(|w| params.gamma * w).collect();
        let want = naive_objective(&lin, Task::Linear, &beta, 0.0, params.l1 / params.gamma);
        worst_lin = worst_lin.max((loss_linear(&lin, &params).unwrap() - want).abs());

        let params = random_params(&mut rng, 6, Task::Logistic, false);
        let beta: Vec<f64> = params.w.iter().map(|w| params.gamma * w).collect();
        let eta = naive_eta(&log, &beta, params.b0);
        let n = log.n() as f64;
        let bce = -eta
            .iter()
            .zip(log.y())
            .map(|(&e, &y)| {
                let (s, c) = sig_pair(e);
                y * s.ln() + (1.0 - y) * c.ln()
            })
            .sum::<f64>()
            / n;
        let l1 = params.l1 * params.w.iter().map(|w| w.abs()).sum::<f64>();
        worst_log = worst_log.max((loss_logistic(&log, &params).unwrap() - (bce + l1)).abs());
    }
    outcome(
        worst_lin < 1e-12 && worst_log < 1e-10,
        format!("max |diff| linear {worst_lin:.1e}, logistic {worst_log:.1e} over 1000 points each"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = seeded(7);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for config in 0..20 {
        for task in [Task::Linear, Task::Logistic] {
            let ds = instance(30, 5, task, 700 + config);
            let params = random_params(&mut rng, 5, task, true);
            let g = gradient(task, &ds, &params).unwrap();
            let f = |p: &NeuralParams| loss(task, &ds, p).unwrap();
            let mut checks: Vec<(f64, f64)> = Vec::new();
            for j in 0..5 {
                let (mut up, mut down) = (params.clone(), params.clone());
                up.w[j] += h;
                down.w[j] -= h;
                checks.push((g.w[j], (f(&up) - f(&down)) / (2.0 * h)));
            }
            let (mut up, mut down) = (params.clone(), params.clone());
            up.gamma += h;
            down.gamma -= h;
            checks.push((g.gamma, (f(&up) - f(&down)) / (2.0 * h)));
            if task == Task::Logistic {
                let (mut up, mut down) = (params.clone(), params.clone());
                up.b0 += h;
                down.b0 -= h;
                checks.push((g.b0, (f(&up) - f(&down)) / (2.0 * h)));
            }
            for (analytic, numeric) in checks {
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
    }
    outcome(
        worst < 1e-5,
        format!("max relative error {worst:.1e} over 20 configurations per task"),
    )
}

fn cd_fit(ds: &LabeledDataset, task: Task, lambda: f64) -> (Vec<f64>, f64) {
    let m = match task {
        Task::Linear => cd_linear(ds, lambda, 1e-12, 100_000).unwrap(),
        Task::Logistic => cd_logistic(ds, lambda, 1e-12, 1000).unwrap(),
    };
    (m.beta.to_vec(), m.intercept)
}

fn criterion_8() -> Outcome {
    let mut rng = seeded(8);
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let task = if i % 2 == 0 { Task::Linear } else { Task::Logistic };
        let n = rng.random_range(20..120);
        let p = rng.random_range(2..(if task == Task::Linear { 60 } else { 15 }));
        let ds = instance(n, p, task, 800 + i);
        let lambda = rng.random_range(0.05..1.2) * lambda_max(&ds, task);
        let (beta, b0) = cd_fit(&ds, task, lambda);
        worst = worst.max(kkt_violation(&ds, task, &beta, b0, lambda));
    }
    outcome(
        worst < 1e-6,
        format!("max stationarity violation {worst:.1e} over 50 instances"),
    )
}

fn criterion_9() -> Outcome {
    let mut mismatches = 0;
    let mut boundary = 0;
    for task in [Task::Linear, Task::Logistic] {
        for i in 0..20u64 {
            let ds = instance(60, 10, task, 900 + i);
            let lambda = (0.1 + 0.04 * i as f64) * lambda_max(&ds, task);
            let (beta, b0) = cd_fit(&ds, task, lambda);
            let mut params = NeuralParams::init(10, lambda);
            params.w = Array1::from(beta.clone());
            params.b0 = b0;
            let report = zero_condition(task, &ds, &params).unwrap();
            for j in 0..10 {
                if report.zeroed[j] != (beta[j] == 0.0) {
                    if (report.stat[j].abs() - lambda).abs() <= 1e-6 {
                        boundary += 1;
                    } else {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches, {boundary} within the boundary tolerance, 20 instances per task"),
    )
}

/// Minimizes the p=2 lasso objective by grid search: a coarse pass locates
/// the minimum, a dense step-1e-3 pass searches around it, then the window
/// shrinks tenfold per round.
fn brute_force(ds: &LabeledDataset, lambda: f64) -> f64 {
    let n = ds.n() as f64;
    let (x0, x1, y) = (ds.column(0), ds.column(1), ds.y());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>() / n;
    let y_s = y.as_slice().unwrap();
    let (a00, a01, a11) = (dot(x0, x0), dot(x0, x1), dot(x1, x1));
    let (c0, c1, yy) = (dot(x0, y_s), dot(x1, y_s), dot(y_s, y_s));
    let f = |b0: f64, b1: f64| {
        yy - 2.0 * (b0 * c0 + b1 * c1)
            + a00 * b0 * b0
            + 2.0 * a01 * b0 * b1
            + a11 * b1 * b1
            + lambda * (b0.abs() + b1.abs())
    };
    let bound = yy / lambda;
    let search = |center: (f64, f64), half: f64, step: f64| {
        let k = (half / step).ceil() as i64;
        let mut best = (f(center.0, center.1), center);
        for i in -k..=k {
            for j in -k..=k {
                let b = (center.0 + i as f64 * step, center.1 + j as f64 * step);
                let v = f(b.0, b.1);
                if v < best.0 {
                    best = (v, b);
                }
            }
        }
        best
    };
    let coarse = search((0.0, 0.0), bound, bound / 200.0);
    let mut best = search(coarse.1, 4.0 * bound / 200.0, 1e-3);
    let mut step = 1e-3;
    while step > 1e-10 {
        best = search(best.1, 5.0 * step, step / 10.0);
        step /= 10.0;
    }
    best.0
}

fn criterion_10() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let ds = instance(10, 2, Task::Linear, 1000 + i);
        for frac in [0.05, 0.3, 0.7] {
            let lambda = frac * lambda_max(&ds, Task::Linear);
            let (beta, _) = cd_fit(&ds, Task::Linear, lambda);
            let got = naive_objective(&ds, Task::Linear, &beta, 0.0, lambda);
            worst = worst.max((got - brute_force(&ds, lambda)).abs());
        }
    }
    outcome(
        worst < 1e-6,
        format!("max objective gap {worst:.1e} over 30 problems"),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_neural-lasso"))
            .args([
                "experiment",
                "--repetitions",
                "6",
                "--seed",
                "11",
                "--threads",
                threads,
                "--out",
            ])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "4");
    outcome(
        a == b && a == c && !a.is_empty(),
        format!(
            "{} report bytes; sequential reruns equal: {}, 4-thread run equal: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn criterion_12() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    for (k, want) in [(2, 2), (3, 2), (4, 3), (5, 3)] {
        for votes in 0..=k {
            let supports: Vec<Vec<bool>> = (0..k).map(|f| vec![f < votes]).collect();
            let tally = VoteTally::from_supports(&supports).unwrap();
            check(tally.majority_threshold == want, &format!("threshold K={k}"));
            check(
                tally.selected[0] == (votes >= want),
                &format!("K={k} with {votes} votes"),
            );
        }
    }
    let same = vec![vec![true, false, true, false]; 5];
    check(
        VoteTally::from_supports(&same).unwrap().selected == same[0],
        "unanimity",
    );

    let split = vec![
        vec![true, false, false],
        vec![false, true, false],
        vec![false, false, true],
        vec![true, false, false],
        vec![false, true, false],
    ];
    let tally = VoteTally::from_supports(&split).unwrap();
    check(tally.is_empty(), "empty majority");
    let ds = common::raw_instance(30, 3, Task::Linear, 12);
    let model = refit_unpenalized(&ds, &tally.selected, Task::Linear).unwrap();
    let ybar = ds.y().sum() / 30.0;
    let pred = model.predict(ds.x()).unwrap();
    check(
        model.support_size() == 0 && pred.iter().all(|v| (v - ybar).abs() < 1e-12),
        "intercept-only model on empty majority",
    );
    let detail = if failures.is_empty() {
        "K in {2,3,4,5}, unanimity and empty majority".to_string()
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    let (table, elapsed) = benchmark(20, 30, "statistical,standard,restricted,voting");
    eprintln!("{}", render_csv(&table));
    let results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1(&table, elapsed)),
        (2, criterion_2(&table)),
        (3, criterion_3(&table)),
        (4, criterion_4(&table)),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
        (9, criterion_9()),
        (10, criterion_10()),
        (11, criterion_11()),
        (12, criterion_12()),
    ];
    let mut failed = 0;
    for (id, o) in &results {
        println!(
            "criterion {id:>2}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
