use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use cri_core::analytic::constants::kappa_order_stat;
use cri_core::analytic::{BoundConstants, BoundInputs};
use cri_core::harness::{self, ExperimentReport, NET_STALL_BUDGET};
use cri_core::selection::{brute_force_inf, constrained_select, estimate_gamma, SelectionConfig};
use cri_core::sphere::{build_eps_net, sample_sphere_matrix, sample_unit_vector};
use cri_core::RngStream;

use crate::config::{ConfigFile, Resolver};
use crate::error::CliError;
use crate::format::{g17, matrix_to_csv, read_matrix, read_vector};
use crate::{
    Common, ConstantsArgs, ExperimentArgs, ExperimentName, GammaArgs, GenArgs, OutputFormat, SelectArgs,
    SelectionFlags,
};

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| CliError::io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| CliError::io(format!("stdout: {e}"))),
    }
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn load_config(common: &Common) -> Result<ConfigFile, CliError> {
    ConfigFile::load(common.config.as_deref())
}

fn path_setting(r: &mut Resolver, key: &str, flag: &Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
    let flag = flag.as_ref().map(|p| p.to_string_lossy().into_owned());
    Ok(r.optional::<String>(key, flag)?.map(PathBuf::from))
}

fn positive(name: &str, value: u64) -> Result<usize, CliError> {
    if value == 0 {
        return Err(CliError::usage(format!("--{name} must be at least 1")));
    }
    usize::try_from(value).map_err(|_| CliError::usage(format!("--{name} is too large")))
}

fn selection_config(r: &mut Resolver, flags: &SelectionFlags) -> Result<SelectionConfig, CliError> {
    let d = SelectionConfig::default();
    let cfg = SelectionConfig {
        s: positive("s", r.get("s", flags.s, d.s as u64)?)?,
        rho_minus: r.get("rho", flags.rho, d.rho_minus)?,
        kappa: r.get("kappa", flags.kappa, kappa_order_stat())?,
        max_attempts: positive("max-attempts", r.get("max-attempts", flags.max_attempts, d.max_attempts as u64)?)?,
        brute_force_limit: r.get("brute-force-limit", flags.brute_force_limit, d.brute_force_limit as u64)? as u128,
        ..d
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn gen(a: GenArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let n = positive("n", r.get("n", a.n, 4)?)?;
    let p = positive("p", r.get("p", a.p, 10)?)?;
    let seed = r.get("seed", a.common.seed, 0)?;
    let out = path_setting(&mut r, "out", &a.common.out)?;
    let x = sample_sphere_matrix(n, p, &mut RngStream::new(seed, 0).rng())?;
    emit(out.as_deref(), &matrix_to_csv(&x, seed))
}

pub fn select(a: SelectArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let matrix = path_setting(&mut r, "matrix", &a.matrix)?.ok_or_else(|| CliError::usage("--matrix is required"))?;
    let v_path = path_setting(&mut r, "v", &a.v)?;
    let v_random = r.switch("v-random", a.v_random)?;
    let oracle = r.switch("oracle", a.oracle)?;
    let seed = r.get("seed", a.common.seed, 0)?;
    let out = path_setting(&mut r, "out", &a.common.out)?;
    let cfg = selection_config(&mut r, &a.selection)?;

    let x = read_matrix(&matrix)?;
    let v = match (v_path, v_random) {
        (Some(path), false) => read_vector(&path, x.n())?,
        (None, true) => sample_unit_vector(x.n(), &mut RngStream::new(seed, 0).rng())?,
        (Some(_), true) => return Err(CliError::usage("--v and --v-random are mutually exclusive")),
        (None, false) => return Err(CliError::usage("a direction is required: --v <file> or --v-random")),
    };
    let outcome = constrained_select(&x, &v, &cfg, &mut RngStream::new(seed, 1).rng())?;

    let mut doc = json!({
        "command": "select",
        "config": r.effective(),
        "n": x.n(),
        "p": x.p(),
        "direction": v,
        "outer": outcome.outer_set,
        "inner": outcome.inner_set,
        "sigma_min": outcome.sigma_min_achieved,
        "attained_value": finite(outcome.attained_value),
        "outer_value": outcome.outer_value,
        "attempts": outcome.attempts_used,
    });
    if oracle {
        let exact = brute_force_inf(&x, &v, cfg.s, cfg.rho_minus, cfg.brute_force_limit)?;
        if exact > outcome.attained_value {
            return Err(CliError::domain(format!(
                "exact infimum {exact} exceeds the attained value {}",
                outcome.attained_value
            )));
        }
        doc["oracle_inf"] = finite(exact);
    }
    emit(out.as_deref(), &to_json(&doc))
}

pub fn gamma(a: GammaArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let matrix = path_setting(&mut r, "matrix", &a.matrix)?.ok_or_else(|| CliError::usage("--matrix is required"))?;
    let net_eps = r.get("net-eps", a.net_eps, 0.5)?;
    let probes = r.get("probes", a.probes, 1000)? as usize;
    let seed = r.get("seed", a.common.seed, 0)?;
    let out = path_setting(&mut r, "out", &a.common.out)?;
    let mut cfg = selection_config(&mut r, &a.selection)?;
    if !(net_eps > 0.0 && net_eps < 1.0) {
        return Err(CliError::usage(format!("--net-eps {net_eps} outside (0, 1)")));
    }
    cfg.epsilon = net_eps;

    let x = read_matrix(&matrix)?;
    let net = build_eps_net(x.n(), net_eps, NET_STALL_BUDGET, &mut RngStream::new(seed, 0).rng())?;
    let est = estimate_gamma(&x, &cfg, &net, probes, RngStream::new(seed, 1))?;
    if est.oracle_exact && est.heuristic_lower > est.certified_upper + 1e-9 {
        return Err(CliError::domain(format!(
            "lower estimate {} exceeds the certificate {}",
            est.heuristic_lower, est.certified_upper
        )));
    }
    let doc = json!({
        "command": "gamma",
        "config": r.effective(),
        "n": x.n(),
        "p": x.p(),
        "certified_upper": finite(est.certified_upper),
        "heuristic_lower": finite(est.heuristic_lower),
        "oracle_exact": est.oracle_exact,
        "probe_attained_max": finite(est.probe_attained_max),
        "directions_tested": est.directions_tested,
        "feasibility_rate": est.feasibility_rate,
        "net": est.net,
    });
    emit(out.as_deref(), &to_json(&doc))?;
    if est.feasibility_rate == 0.0 {
        return Err(CliError::domain("no net direction admitted a well-conditioned subset"));
    }
    Ok(())
}

fn constants_text(c: &BoundConstants) -> String {
    let opt = |x: Option<f64>| x.map_or("undefined".to_string(), g17);
    let mut lines = vec![
        format!(
            "# n={} p={} s={} rho={} epsilon={} c_kappa={} c={}",
            c.n,
            c.p,
            c.s,
            g17(c.inputs.rho_minus),
            g17(c.inputs.epsilon),
            g17(c.inputs.c_kappa),
            g17(c.inputs.c_subgauss)
        ),
        format!("k_epsilon = {}", g17(c.k_epsilon)),
        format!("kappa_constant = {}", g17(c.kappa.constant)),
        format!("kappa_scaling = {}", g17(c.kappa.scaling)),
        format!("kappa = {}", g17(c.kappa.value)),
        format!("c_s = {}", g17(c.c_s)),
        format!("s_max = {}", c.s_max.map_or("undefined".to_string(), |s| s.to_string())),
        format!("c_v = {}", g17(c.c_v)),
        format!("r_prime = {}", g17(c.r_prime)),
        format!("u_norm = {}", g17(c.u_norm)),
        format!("u_split = {}", g17(c.u_split)),
        format!("v_split = {}", g17(c.v_split)),
        format!("h_cap = {}", g17(c.h_cap)),
        format!("z0 = {}", opt(c.z0)),
        format!("gamma_bound = {}", g17(c.gamma_bound)),
        format!("success_probability = {}", g17(c.success_probability)),
        "ledger:".to_string(),
    ];
    for check in cri_core::analytic::constants::constraint_check(c.n, c.p, c.s, &c.inputs) {
        lines.push(format!(
            "  [{}] {}: {} <= {}",
            if check.satisfied { "ok" } else { "FAIL" },
            check.name,
            g17(check.lhs),
            g17(check.rhs)
        ));
    }
    lines.join("\n") + "\n"
}

pub fn constants(a: ConstantsArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let d = BoundInputs::default();
    let n = r.get("n", a.n, 100)?;
    let p = r.get("p", a.p, 1000)?;
    let s = r.get("s", a.s, 1)?;
    let inputs = BoundInputs {
        rho_minus: r.get("rho", a.rho, d.rho_minus)?,
        epsilon: r.get("epsilon", a.epsilon, d.epsilon)?,
        c_kappa: r.get("c-kappa", a.c_kappa, d.c_kappa)?,
        c_subgauss: r.get("c", a.c, d.c_subgauss)?,
    };
    let format = r.get("format", a.common.format, OutputFormat::Text)?;
    let out = path_setting(&mut r, "out", &a.common.out)?;
    if n == 0 || p == 0 {
        return Err(CliError::usage("--n and --p must be at least 1"));
    }
    let c = BoundConstants::derive(inputs, n, p, s).map_err(|e| CliError::usage(e.to_string()))?;
    let content = match format {
        OutputFormat::Text => constants_text(&c),
        OutputFormat::Json => {
            let ledger = cri_core::analytic::constants::constraint_check(n, p, s, &inputs);
            to_json(&json!({
                "command": "constants",
                "config": r.effective(),
                "constants": c,
                "ledger": ledger,
            }))
        }
        OutputFormat::Csv => return Err(CliError::usage("constants supports --format text or json")),
    };
    emit(out.as_deref(), &content)
}

fn parse_binomials(raw: &[String]) -> Result<Vec<(u64, f64)>, CliError> {
    raw.iter()
        .map(|item| {
            let (k, q) = item
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("binomial '{item}' is not count:probability")))?;
            let k = k.trim().parse().map_err(|_| CliError::usage(format!("bad count in '{item}'")))?;
            let q = q.trim().parse().map_err(|_| CliError::usage(format!("bad probability in '{item}'")))?;
            Ok((k, q))
        })
        .collect()
}

fn records_csv(report: &ExperimentReport, effective: &serde_json::Map<String, Value>) -> Result<String, CliError> {
    let mut header_line = format!("# experiment={} seed={}", report.experiment, report.master_seed);
    for (k, v) in effective.iter().filter(|(k, _)| !matches!(k.as_str(), "experiment" | "seed")) {
        let v = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        header_line.push_str(&format!(" {k}={}", v.replace(' ', "")));
    }
    header_line.push('\n');

    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(e.to_string());
    let mut header = vec!["trial_index".to_string(), "seed".to_string(), "stream".to_string()];
    if let Some(first) = report.records.first() {
        header.extend(first.values.iter().map(|(k, _)| k.clone()));
    }
    wtr.write_record(&header).map_err(io)?;
    for rec in &report.records {
        let mut row = vec![rec.trial_index.to_string(), rec.seed.to_string(), rec.stream.to_string()];
        row.extend(rec.values.iter().map(|(_, v)| g17(*v)));
        wtr.write_record(&row).map_err(io)?;
    }
    let body = wtr.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    Ok(header_line + &String::from_utf8(body).expect("utf-8 csv"))
}

pub fn experiment(a: ExperimentArgs) -> Result<(), CliError> {
    let file = load_config(&a.common)?;
    let mut r = Resolver::new(&file);
    let name = a.name;
    let label = match name {
        ExperimentName::OrderStat => "order-stat",
        ExperimentName::Coherence => "coherence",
        ExperimentName::Norm => "norm",
        ExperimentName::Decoupling => "decoupling",
        ExperimentName::Theorem => "theorem",
        ExperimentName::Chernoff => "chernoff",
    };
    r.record("experiment", label);
    let seed = r.get("seed", a.common.seed, 0)?;
    let format = r.optional("format", a.common.format)?;
    if format == Some(OutputFormat::Text) {
        return Err(CliError::usage("experiment supports --format json or csv (default: both)"));
    }
    let report = match name {
        ExperimentName::OrderStat => {
            let n = positive("n", r.get("n", a.n, 3)?)?;
            let p = positive("p", r.get("p", a.p, 20)?)?;
            let k = positive("r", r.get("r", a.r, 5)?)?;
            let trials = r.get("trials", a.trials, 10_000)?;
            harness::run_order_stat_audit(n, p, k, trials, seed)?
        }
        ExperimentName::Coherence => {
            let n = positive("n", r.get("n", a.n, 6)?)?;
            let p = positive("p", r.get("p", a.p, 50)?)?;
            let trials = r.get("trials", a.trials, 1000)?;
            harness::run_coherence_audit(n, p, trials, seed)?
        }
        ExperimentName::Norm => {
            let n = positive("n", r.get("n", a.n, 6)?)?;
            let p = positive("p", r.get("p", a.p, 50)?)?;
            let kappa_s = positive("kappa-s", r.get("kappa-s", a.kappa_s, 12)?)?;
            let eps = r.get("epsilon", a.epsilon, 0.5)?;
            let trials = r.get("trials", a.trials, 1000)?;
            harness::run_norm_audit(n, p, kappa_s, eps, trials, seed)?
        }
        ExperimentName::Decoupling => {
            let n = positive("n", r.get("n", a.n, 8)?)?;
            let p = positive("p", r.get("p", a.p, 24)?)?;
            let kappa = r.get("kappa", a.kappa, 4.0)?;
            let s = positive("s", r.get("s", a.s, 3)?)?;
            let grid = r.list("r-grid", a.r_grid, &harness::DEFAULT_R_GRID)?;
            let trials = r.get("trials", a.trials, 5000)?;
            harness::run_decoupling_audit(n, p, kappa, s, &grid, trials, seed)?
        }
        ExperimentName::Theorem => {
            let n = positive("n", r.get("n", a.n, 4)?)?;
            let p = positive("p", r.get("p", a.p, 200)?)?;
            let s = positive("s", r.get("s", a.s, 2)?)?;
            let rho = r.get("rho", a.rho, 0.5)?;
            let net_eps = r.get("net-eps", a.net_eps, 0.25)?;
            let probes = r.get("probes", a.probes, 1000)? as usize;
            let trials = r.get("trials", a.trials, 20)?;
            harness::run_theorem_audit(n, p, s, rho, net_eps, probes, trials, seed)?
        }
        ExperimentName::Chernoff => {
            let default: Vec<String> = harness::DEFAULT_CHERNOFF_BINOMIALS
                .iter()
                .map(|(k, q)| format!("{k}:{q}"))
                .collect();
            let binomials = parse_binomials(&r.list("binomials", a.binomials, &default)?)?;
            let eps = r.list("eps-grid", a.eps_grid, &harness::DEFAULT_CHERNOFF_EPS)?;
            let trials = r.get("trials", a.trials, 10_000)?;
            harness::run_chernoff_audit(&binomials, &eps, trials, seed)?
        }
    };
    report.validate()?;

    let prefix = path_setting(&mut r, "out", &a.common.out)?.unwrap_or_else(|| PathBuf::from(label));
    let effective: serde_json::Map<String, Value> = r.effective().clone().into_iter().collect();
    let mut written = Vec::new();
    if matches!(format, None | Some(OutputFormat::Json)) {
        let path = prefix.with_extension("json");
        let doc = json!({ "config": effective, "report": report });
        emit(Some(&path), &to_json(&doc))?;
        written.push(path);
    }
    if matches!(format, None | Some(OutputFormat::Csv)) {
        let path = prefix.with_extension("csv");
        emit(Some(&path), &records_csv(&report, &effective)?)?;
        written.push(path);
    }
    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    println!("{label}: verdict {}; wrote {}", report.verdict.as_str(), files.join(", "));
    Ok(())
}
