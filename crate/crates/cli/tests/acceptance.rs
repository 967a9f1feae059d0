//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::f64::consts::{E, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};

use cri_core::analytic::constants::{c_s, claimed_gamma_bound, k_epsilon, kappa_order_stat, s_max};
use cri_core::analytic::distributions::{
    cap_probability, inner_cdf, inner_density, order_stat_cdf, OrderStatSpec,
};
use cri_core::analytic::special::integrate;
use cri_core::harness::{run_coherence_audit, run_decoupling_audit, run_order_stat_audit, upper_claim_verdict, Verdict};
use cri_core::linalg::{gram_deviation, sigma_min, submatrix};
use cri_core::selection::{
    brute_force_inf, constrained_select, estimate_gamma, greedy_outer, monotonicity_check, SelectionConfig,
};
use cri_core::sphere::{build_eps_net, sample_sphere_matrix, sample_unit_vector};
use cri_core::stats::ks_statistic;
use cri_core::{ColumnMatrix, IndexSet, RngStream};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn distribution_correctness() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let z = i as f64 / 999.0;
        worst = worst.max((inner_cdf(z, 3).unwrap() - z).abs());
    }
    ensure(worst <= 1e-10, || format!("inner_cdf(z, 3) deviates from z by {worst:e}"))?;

    let mut mass_err = 0.0f64;
    for n in 2..=50u32 {
        // z = sin(t) keeps the integrand smooth at z = 1
        let mass = 2.0 * integrate(|t| inner_density(t.sin(), n).unwrap() * t.cos(), 0.0, PI / 2.0, 1e-13);
        mass_err = mass_err.max((mass - 1.0).abs());
    }
    ensure(mass_err <= 1e-10, || format!("2 * integral of g misses 1 by {mass_err:e}"))?;

    let mut ks_max = 0.0f64;
    for (k, n) in [3usize, 6, 20].into_iter().enumerate() {
        let mut rng = RngStream::new(101, k as u64).rng();
        let mut xs: Vec<f64> = (0..100_000)
            .map(|_| sample_unit_vector(n, &mut rng).unwrap()[0].abs())
            .collect();
        let ks = ks_statistic(&mut xs, |z| inner_cdf(z, n as u32).unwrap());
        ks_max = ks_max.max(ks);
        ensure(ks <= 0.005, || format!("KS {ks:.5} > 0.005 at n = {n}"))?;
    }
    Ok(format!("grid err {worst:.1e}, mass err {mass_err:.1e}, max KS {ks_max:.4}"))
}

fn order_statistic_law() -> Outcome {
    let p = 20u64;
    let mut worst = 0.0f64;
    for r in [1u64, 5, 20] {
        let spec = OrderStatSpec::new(p, r, 3).unwrap();
        let beta = Beta::new(r as f64, (p - r + 1) as f64).unwrap();
        for i in 0..=200 {
            let z = i as f64 / 200.0;
            worst = worst.max((order_stat_cdf(z, &spec).unwrap() - beta.cdf(z)).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("analytic CDF deviates from Beta CDF by {worst:e}"))?;
    let mut ks_max = 0.0f64;
    for r in [1usize, 5, 20] {
        let rep = run_order_stat_audit(3, 20, r, 10_000, 202).unwrap();
        let ks = rep.summary["ks"];
        ks_max = ks_max.max(ks);
        ensure(ks <= 0.02, || format!("empirical Z_({r}) KS {ks:.4} > 0.02"))?;
    }
    Ok(format!("Beta err {worst:.1e}, max KS {ks_max:.4}"))
}

fn cap_identity() -> Outcome {
    let mut worst = 0.0f64;
    for n in 3..=30u32 {
        for i in 0..=100 {
            let h = i as f64 / 100.0;
            let lhs = 2.0 * cap_probability(h, n).unwrap();
            let rhs = 1.0 - inner_cdf(h, n).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("cap identity error {worst:e}"))?;

    let draws = 100_000;
    let mut worst_sigma = 0.0f64;
    for (k, (h, n)) in [(0.2, 3usize), (0.5, 6), (0.1, 20)].into_iter().enumerate() {
        let mut rng = RngStream::new(303, k as u64).rng();
        let hits = (0..draws)
            .filter(|_| sample_unit_vector(n, &mut rng).unwrap()[0] >= h)
            .count();
        let q = cap_probability(h, n as u32).unwrap();
        let sd = (q * (1.0 - q) / draws as f64).sqrt();
        let z = (hits as f64 / draws as f64 - q).abs() / sd;
        worst_sigma = worst_sigma.max(z);
        ensure(z <= 3.0, || format!("cap frequency off by {z:.2} sigma at h = {h}, n = {n}"))?;
    }
    let archimedes = cap_probability(0.5, 3).unwrap();
    ensure((archimedes - 0.25).abs() <= 1e-15, || format!("n = 3, h = 0.5 gives {archimedes}"))?;
    Ok(format!("identity err {worst:.1e}, worst MC deviation {worst_sigma:.2} sigma"))
}

fn spectral_oracles() -> Outcome {
    let mut rng = RngStream::new(404, 0).rng();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let theta: f64 = rng.random_range(0.0..PI);
        let x = ColumnMatrix::from_columns(2, &[vec![1.0, 0.0], vec![theta.cos(), theta.sin()]]).unwrap();
        let expected = (1.0 - theta.cos().abs()).sqrt();
        worst = worst.max((sigma_min(&x).unwrap() - expected).abs());
    }
    ensure(worst <= 1e-10, || format!("two-column sigma_min error {worst:e}"))?;
    for i in 0..1000 {
        let n = rng.random_range(2..8usize);
        let p = rng.random_range(2..12usize);
        let s = rng.random_range(1..=p.min(n));
        let x = sample_sphere_matrix(n, p, &mut rng).unwrap();
        let mut idx: Vec<usize> = (0..p).collect();
        for k in 0..s {
            let j = rng.random_range(k..p);
            idx.swap(k, j);
        }
        let xs = submatrix(&x, &IndexSet::new(idx[..s].to_vec()).unwrap()).unwrap();
        let sm = sigma_min(&xs).unwrap();
        let dev = gram_deviation(&xs).unwrap();
        ensure((1.0 - sm * sm).abs() <= dev + 1e-12, || format!("sandwich fails on submatrix {i}"))?;
    }
    Ok(format!("sigma_min err {worst:.1e}, 1000 sandwiches hold"))
}

fn greedy_brute_force_sandwich() -> Outcome {
    let cfg = SelectionConfig {
        s: 2,
        rho_minus: 0.5,
        kappa: 3.0,
        ..SelectionConfig::default()
    };
    let m = cfg.outer_size(12).unwrap();
    let mut violations = Vec::new();
    for t in 0..500u64 {
        let mut rng = RngStream::new(505, t).rng();
        let x = sample_sphere_matrix(4, 12, &mut rng).unwrap();
        let v = sample_unit_vector(4, &mut rng).unwrap();
        let vals = x.abs_inner_products(&v);
        let mut order: Vec<usize> = (0..12).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let oracle = IndexSet::new(order[..m].to_vec()).unwrap();
        let z_m = vals[order[m - 1]];
        if greedy_outer(&x, &v, m).unwrap() != oracle {
            violations.push(format!("instance {t}: greedy differs from sort"));
        }
        let out = constrained_select(&x, &v, &cfg, &mut rng).unwrap();
        let exact = brute_force_inf(&x, &v, 2, 0.5, 1000).unwrap();
        if exact > out.attained_value {
            violations.push(format!("instance {t}: exact {exact} > attained {}", out.attained_value));
        }
        if out.attained_value > z_m {
            violations.push(format!("instance {t}: attained {} > Z_(m) {z_m}", out.attained_value));
        }
    }
    ensure(violations.is_empty(), || violations.join("; "))?;
    Ok("500 instances, 0 violations".into())
}

fn certificate_validity() -> Outcome {
    let probes = 100_000;
    let mut net_rng = RngStream::new(606, u64::MAX).rng();
    let net = build_eps_net(4, 0.25, 20_000, &mut net_rng).unwrap();

    let big = SelectionConfig {
        s: 2,
        rho_minus: 0.5,
        epsilon: 0.25,
        brute_force_limit: 0,
        ..SelectionConfig::default()
    };
    let mut slack = f64::INFINITY;
    for t in 0..20u64 {
        let stream = RngStream::new(606, t);
        let x = sample_sphere_matrix(4, 200, &mut stream.rng()).unwrap();
        let est = estimate_gamma(&x, &big, &net, probes, stream.substream(0)).unwrap();
        ensure(est.probe_attained_max <= est.certified_upper, || {
            format!(
                "p = 200 instance {t}: probe attained {} > certificate {}",
                est.probe_attained_max, est.certified_upper
            )
        })?;
        slack = slack.min(est.certified_upper - est.probe_attained_max);
    }

    let small = SelectionConfig {
        kappa: 3.0,
        brute_force_limit: 1000,
        ..big
    };
    for t in 0..20u64 {
        let stream = RngStream::new(607, t);
        let x = sample_sphere_matrix(4, 12, &mut stream.rng()).unwrap();
        let est = estimate_gamma(&x, &small, &net, probes, stream.substream(0)).unwrap();
        ensure(est.oracle_exact, || "p = 12 oracle was not exact".into())?;
        ensure(est.heuristic_lower <= est.certified_upper, || {
            format!(
                "p = 12 instance {t}: exact inf {} > certificate {}",
                est.heuristic_lower, est.certified_upper
            )
        })?;
        ensure(est.probe_attained_max <= est.certified_upper, || {
            format!("p = 12 instance {t}: probe attained value above certificate")
        })?;
        slack = slack.min(est.certified_upper - est.heuristic_lower);
    }
    Ok(format!("40 instances x 1e5 probes, 0 violations, min slack {slack:.4}, net size {}", net.len()))
}

fn monotonicity() -> Outcome {
    let cfg = SelectionConfig {
        s: 2,
        rho_minus: 0.5,
        kappa: 2.0,
        ..SelectionConfig::default()
    };
    let mut rng = RngStream::new(707, 0).rng();
    let dirs: Vec<Vec<f64>> = (0..50).map(|_| sample_unit_vector(4, &mut rng).unwrap()).collect();
    let mut strict = 0;
    for t in 0..100u64 {
        let mut rng = RngStream::new(707, t + 1).rng();
        let x = sample_sphere_matrix(4, 8, &mut rng).unwrap();
        let extra = sample_sphere_matrix(4, 4, &mut rng).unwrap();
        let res = monotonicity_check(&x, &extra, &cfg, &dirs).unwrap();
        ensure(res.satisfied, || {
            format!("instance {t}: gamma([X, X']) = {} > gamma(X) = {}", res.gamma_concat, res.gamma_x)
        })?;
        if res.gamma_concat < res.gamma_x {
            strict += 1;
        }
    }
    Ok(format!("100 instances, 0 violations ({strict} strict decreases)"))
}

fn decoupling() -> Outcome {
    let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let rep = run_decoupling_audit(8, 24, 4.0, 3, &grid, 5000, 808).unwrap();
    let bad: Vec<&str> = rep
        .checks
        .iter()
        .filter(|c| c.verdict != Verdict::Supported)
        .map(|c| c.label.as_str())
        .collect();
    ensure(bad.is_empty(), || format!("chains rejected: {}", bad.join(", ")))?;
    let tightest = rep
        .checks
        .iter()
        .filter_map(|c| c.upper)
        .fold(f64::INFINITY, f64::min);
    Ok(format!("{} chain checks hold at 95%, smallest upper CI end {tightest:.4}", rep.checks.len()))
}

fn constants_transcription() -> Outcome {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);

    // K_eps(0.5, 1) with ln(1/4) written as -2 ln 2
    let k2 = (2.0 * PI).sqrt() / 6.0 * (2.0 * 5f64.ln() + 1.0 - 2.0 * 2f64.ln());
    let k1 = k_epsilon(0.5, 1.0);
    ensure(rel(k1, k2) <= 1e-12, || format!("K_eps {k1} vs {k2}"))?;

    // 4 e^{-2(ln 2 - 1)} = 4 e^2 / 4
    let kap2 = E * E;
    ensure(rel(kappa_order_stat(), kap2) <= 1e-12, || format!("kappa branch {} vs {kap2}", kappa_order_stat()))?;

    let cs2 = |rho: f64, eps: f64, ck: f64, c: f64| {
        let k = (2.0 * PI).sqrt() / 6.0 * ((1.0 + ck) * ((eps + 2.0) / eps).ln() + ck + ck.ln() - 4f64.ln());
        let ratio = c * (1.0 - rho) * (1.0 - eps).powi(4) / (1.0 + k);
        ratio * ratio * ck / (4.0 * E.powi(3) * (1.0 + ck) * (1.0 + ck))
    };
    for &(rho, eps, ck, c) in &[(0.5, 0.5, 1.0, 0.5), (0.1, 0.3, 2.0, 1.0), (0.9, 0.05, 0.5, 0.25)] {
        let a = c_s(rho, eps, ck, c);
        let b = cs2(rho, eps, ck, c);
        ensure(rel(a, b) <= 1e-12, || format!("C_s {a} vs {b}"))?;
    }

    for &(n, p) in &[(1e12_f64, 1000.0_f64), (1e15, 50.0), (1e9, 20.0)] {
        let second = (cs2(0.1, 0.3, 1.0, 0.5) * n / p.ln().powi(2) / n.ln()).floor() as u64;
        let first = s_max(n as u64, p as u64, 0.1, 0.3, 1.0, 0.5).unwrap();
        ensure(first == second, || format!("s_max {first} vs {second} at n = {n}, p = {p}"))?;
    }

    for &p in &[11.0, 200.0, 1000.0, 2000.0, 1e6] {
        let a = claimed_gamma_bound(p);
        let b = 80.0 / p * std::f64::consts::LN_10 * f64::log10(p);
        ensure(rel(a, b) <= 1e-12, || format!("gamma bound {a} vs {b} at p = {p}"))?;
    }
    Ok(format!("K_eps = {k1:.6}, kappa = {:.6}, all within 1e-12", kappa_order_stat()))
}

fn claim_audit_honesty() -> Outcome {
    let rep = run_coherence_audit(6, 50, 1000, 1010).unwrap();
    rep.validate().map_err(|e| e.to_string())?;
    let cell = rep.cell("coherence > p^-2/2").ok_or("claim cell missing")?;
    let claimed = cell.claimed.ok_or("claim value missing")?;
    let (expected, _) = upper_claim_verdict(&cell.interval, cell.trials, claimed);
    ensure(cell.verdict == Some(expected) && rep.verdict == expected, || "verdict not mechanical".into())?;
    ensure(expected == Verdict::Violated, || format!("verdict {:?}, expected violated", expected))?;

    let json = serde_json::to_value(&rep).map_err(|e| e.to_string())?;
    for key in ["experiment", "master_seed", "confidence_level", "parameters", "cells", "verdict"] {
        ensure(json.get(key).is_some(), || format!("report lacks '{key}'"))?;
    }
    let c = &json["cells"][0];
    for key in ["frequency", "interval", "claimed", "verdict"] {
        ensure(c.get(key).is_some(), || format!("cell lacks '{key}'"))?;
    }
    ensure(c["interval"]["level"] == 0.95, || "interval level not recorded".into())?;
    ensure(json["verdict"] == "violated", || format!("serialized verdict {}", json["verdict"]))?;
    Ok(format!(
        "frequency {:.3} in [{:.3}, {:.3}] vs claimed {claimed:.2e}: violated",
        cell.frequency, cell.interval.lower, cell.interval.upper
    ))
}

fn run_cli(dir: &Path, threads: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cri"))
        .args(args)
        .current_dir(dir)
        .env("CRI_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("cri {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn reproducibility() -> Outcome {
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["gen", "--n", "4", "--p", "30", "--seed", "5", "--out", "m.csv"], vec!["m.csv"]),
        (
            vec!["select", "--matrix", "m.csv", "--v-random", "--s", "2", "--kappa", "3", "--oracle", "--seed", "6", "--out", "sel.json"],
            vec!["sel.json"],
        ),
        (
            vec!["gamma", "--matrix", "m.csv", "--s", "2", "--kappa", "3", "--net-eps", "0.5", "--probes", "2000", "--seed", "7", "--out", "g.json"],
            vec!["g.json"],
        ),
        (vec!["constants", "--n", "20", "--p", "500", "--out", "c.txt"], vec!["c.txt"]),
        (vec!["constants", "--n", "20", "--p", "500", "--format", "json", "--out", "c.json"], vec!["c.json"]),
        (
            vec!["experiment", "order-stat", "--trials", "2000", "--seed", "8", "--out", "os"],
            vec!["os.json", "os.csv"],
        ),
        (
            vec!["experiment", "coherence", "--trials", "300", "--seed", "8", "--out", "co"],
            vec!["co.json", "co.csv"],
        ),
        (
            vec!["experiment", "norm", "--trials", "200", "--seed", "8", "--out", "no"],
            vec!["no.json", "no.csv"],
        ),
        (
            vec!["experiment", "decoupling", "--trials", "500", "--seed", "8", "--out", "de"],
            vec!["de.json", "de.csv"],
        ),
        (
            vec!["experiment", "theorem", "--n", "3", "--p", "40", "--net-eps", "0.5", "--probes", "200", "--trials", "20", "--seed", "8", "--out", "th"],
            vec!["th.json", "th.csv"],
        ),
        (
            vec!["experiment", "chernoff", "--trials", "2000", "--seed", "8", "--out", "ch"],
            vec!["ch.json", "ch.csv"],
        ),
    ];

    let mut runs: Vec<Vec<Vec<u8>>> = Vec::new();
    let mut dirs = Vec::new();
    for threads in ["1", "8", "1", "8"] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut artifacts = Vec::new();
        for (args, files) in &commands {
            artifacts.push(run_cli(dir.path(), threads, args)?);
            for f in files {
                artifacts.push(std::fs::read(dir.path().join(f)).map_err(|e| format!("{f}: {e}"))?);
            }
        }
        runs.push(artifacts);
        dirs.push(dir);
    }
    for (k, run) in runs.iter().enumerate().skip(1) {
        for (i, (a, b)) in runs[0].iter().zip(run).enumerate() {
            ensure(a == b, || format!("artifact {i} differs between run 0 and run {k}"))?;
        }
    }
    Ok(format!("{} artifacts byte-identical across 4 runs (CRI_THREADS 1, 8)", runs[0].len()))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("distribution correctness", Duration::from_secs(30), distribution_correctness),
        ("order-statistic law", Duration::from_secs(60), order_statistic_law),
        ("cap identity", Duration::from_secs(30), cap_identity),
        ("spectral oracles", Duration::from_secs(20), spectral_oracles),
        ("greedy/brute-force sandwich", Duration::from_secs(60), greedy_brute_force_sandwich),
        ("certificate validity", Duration::from_secs(300), certificate_validity),
        ("monotonicity", Duration::from_secs(120), monotonicity),
        ("decoupling/poissonization", Duration::from_secs(180), decoupling),
        ("constants transcription", Duration::from_secs(1), constants_transcription),
        ("claim-audit honesty", Duration::from_secs(60), claim_audit_honesty),
        ("reproducibility", Duration::from_secs(120), reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; runtime {elapsed:.1?} over budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {why} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
