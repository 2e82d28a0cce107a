use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use smooth_smc::certificate::{build_certificate, convergence_estimate, BlockCheck, ConvergenceInputs};
use smooth_smc::experiment::{run_cell, CellOutcome, Experiment, Method, RunConfig};
use smooth_smc::laws::{check_gain_condition, critical_k4, GainConfig, GainStatus};
use smooth_smc::metrics::{comparison_csv, ExperimentReport};

use crate::spec::RunSpec;
use crate::{CertifyArgs, CliError, CompareArgs, RunArgs, SweepArgs, SweepParam, EXIT_OK, EXIT_ORDERING, EXIT_UNCERTIFIED};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `trajectory.csv`, `report.json` and `config.json` into
/// `<out>/<experiment>_<method>/`.
pub fn write_cell(out: &Path, outcome: &CellOutcome) -> Result<PathBuf, CliError> {
    let dir = out.join(outcome.config.cell_id());
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let csv_path = dir.join("trajectory.csv");
    let file = fs::File::create(&csv_path).map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
    let mut w = BufWriter::new(file);
    outcome.trajectory.write_csv(&mut w)?;
    w.flush()?;
    write_json(&dir.join("report.json"), &outcome.report)?;
    write_json(&dir.join("config.json"), &outcome.config)?;
    Ok(dir)
}

fn settled_text(r: &ExperimentReport) -> String {
    match r.settling_time.time() {
        Some(t) => format!("settled at {t:.4} s"),
        None => "not settled".into(),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let spec = args.overrides.spec(args.experiment, args.method)?;
    let cfg = spec.resolve()?;
    let outcome = run_cell(&cfg)?;
    let dir = write_cell(&spec.out_dir(), &outcome)?;
    let r = &outcome.report;
    println!(
        "{}: {}, ultimate bound {:.4e}, chattering {:.4e}, final L0 {:.4}, gains {} -> {}",
        cfg.cell_id(),
        settled_text(r),
        r.ultimate_bound,
        r.chattering_index,
        r.final_l0,
        r.gain_status,
        dir.display()
    );
    Ok(EXIT_OK)
}

fn block_json(b: &BlockCheck) -> serde_json::Value {
    json!({
        "positive_definite": b.positive_definite,
        "lambda_min": b.eigen.lambda_min,
        "lambda_max": b.eigen.lambda_max,
        "spectrum": b.eigen.spectrum,
        "matrix": b.block.to_rows(),
    })
}

/// Certificate report for `gains` and whether the gains are certified.
pub fn certify(gains: &GainConfig, args: &CertifyArgs) -> Result<(serde_json::Value, bool), CliError> {
    if !(gains.m > 1.0) {
        return Err(CliError::Usage(format!("m must exceed 1, got {}", gains.m)));
    }
    gains.validate()?;
    let check = check_gain_condition(gains);
    let mut report = json!({
        "gains": gains,
        "gain_status": check.status,
        "gain_lhs": check.lhs,
        "gain_rhs": check.rhs,
    });
    if check.status == GainStatus::BaselineExempt {
        report["note"] = json!("m = 2 is the super-twisting baseline; the gain condition applies to m > 2 only");
        return Ok((report, true));
    }
    let cert = build_certificate(gains)?;
    let inputs = ConvergenceInputs {
        l0: args.l0.unwrap_or(gains.l0_init),
        l0_dot: args.l0_dot,
        v0: args.v0,
        delta: args.delta,
        theta1: None,
        theta2: None,
    };
    let estimate = convergence_estimate(&cert, inputs)?;
    report["critical_k4"] = json!(critical_k4(gains));
    report["blocks"] = json!({
        "P": block_json(&cert.p),
        "Q": block_json(&cert.q),
        "Omega1": block_json(&cert.omega1),
        "Omega2": block_json(&cert.omega2),
    });
    report["p1"] = json!(cert.p1);
    report["constants"] = json!(cert.constants);
    report["convergence"] = json!(estimate);
    let certified = cert.is_valid();
    report["certified"] = json!(certified);
    Ok((report, certified))
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<i32, CliError> {
    let spec = args.overrides.spec(None, None)?;
    let gains = spec.gains();
    let (report, certified) = certify(&gains, args)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    if let Some(out) = &spec.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("certificate.json"), &report)?;
    }
    Ok(if certified { EXIT_OK } else { EXIT_UNCERTIFIED })
}

fn run_all(cfgs: &[RunConfig]) -> Result<Vec<CellOutcome>, CliError> {
    cfgs.par_iter()
        .map(|c| run_cell(c).map_err(CliError::from))
        .collect()
}

/// Smooth/baseline pairs whose chattering order is checked.
const PAIRS: [(Method, Method); 2] = [
    (Method::Amssosmc, Method::AmstsmcBaseline),
    (Method::Amsdo, Method::AmdoBaseline),
];

/// Messages for every expected ordering that does not hold.
pub fn ordering_failures(reports: &[ExperimentReport]) -> Vec<String> {
    let mut failures = Vec::new();
    for r in reports {
        if !r.ultimate_bound.is_finite() || !r.chattering_index.is_finite() {
            failures.push(format!("{}: non-finite metrics", r.method_id));
        }
    }
    let find = |m: Method| reports.iter().find(|r| r.method_id == m.id());
    for (smooth, base) in PAIRS {
        if let (Some(s), Some(b)) = (find(smooth), find(base)) {
            if !(s.chattering_index < b.chattering_index) {
                failures.push(format!(
                    "chattering of {} ({:e}) is not below {} ({:e})",
                    s.method_id, s.chattering_index, b.method_id, b.chattering_index
                ));
            }
        }
    }
    failures
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32, CliError> {
    let spec = args.overrides.spec(args.experiment, None)?;
    let experiment = spec
        .experiment
        .ok_or_else(|| CliError::Usage("no experiment given (--experiment or config file)".into()))?;
    let methods = if args.methods.is_empty() {
        experiment.reference_methods()
    } else {
        args.methods.clone()
    };
    if methods.len() < 2 {
        return Err(CliError::Usage("compare needs at least two methods".into()));
    }
    if methods.iter().collect::<HashSet<_>>().len() != methods.len() {
        return Err(CliError::Usage("duplicate method in --methods".into()));
    }
    let cfgs = methods
        .iter()
        .map(|m| spec.resolve_for(*m, true))
        .collect::<Result<Vec<_>, _>>()?;

    let outcomes = run_all(&cfgs)?;
    let out = spec.out_dir();
    for o in &outcomes {
        write_cell(&out, o)?;
    }
    let reports: Vec<ExperimentReport> = outcomes.into_iter().map(|o| o.report).collect();
    let csv = comparison_csv(&reports);
    fs::write(out.join(format!("{}_comparison.csv", experiment.id())), &csv)?;
    write_json(
        &out.join(format!("{}_comparison.json", experiment.id())),
        &json!({ "configs": cfgs, "reports": reports }),
    )?;
    print!("{csv}");

    let failures = ordering_failures(&reports);
    if failures.is_empty() {
        eprintln!("expected orderings hold");
        Ok(EXIT_OK)
    } else {
        for f in &failures {
            eprintln!("ordering failed: {f}");
        }
        Ok(EXIT_ORDERING)
    }
}

/// Grid from `--values` or `--range start:stop:count`.
pub fn sweep_grid(values: &[f64], range: Option<&str>) -> Result<Vec<f64>, CliError> {
    let grid = match range {
        None => values.to_vec(),
        Some(r) => {
            let bad = || CliError::Usage(format!("range must be start:stop:count, got {r:?}"));
            let parts: Vec<&str> = r.split(':').collect();
            let [a, b, n] = parts[..] else { return Err(bad()) };
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        }
    };
    if grid.is_empty() {
        return Err(CliError::Usage("empty sweep grid".into()));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("non-finite grid value {v}")));
    }
    Ok(grid)
}

pub const SWEEP_HEADER: &str =
    "param,value,experiment,method,certificate,gain_lhs,gain_rhs,settled,settling_time,ultimate_bound,chattering_index,final_L0,dt";

/// `certified`, `uncertified` or `baseline-exempt`, counting both the gain
/// condition and the positive-definiteness of every certificate block.
pub fn certificate_status(gains: &GainConfig) -> Result<GainStatus, CliError> {
    let check = check_gain_condition(gains);
    if check.status == GainStatus::BaselineExempt {
        return Ok(check.status);
    }
    Ok(if build_certificate(gains)?.is_valid() {
        GainStatus::Certified
    } else {
        GainStatus::Uncertified
    })
}

fn set_param(spec: &mut RunSpec, param: SweepParam, v: f64) {
    match param {
        SweepParam::M => spec.gains.m = Some(v),
        SweepParam::K4 => spec.gains.k4 = Some(v),
        SweepParam::Kappa => spec.gains.kappa = Some(v),
        SweepParam::Epsilon => spec.gains.epsilon = Some(v),
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let grid = sweep_grid(&args.values, args.range.as_deref())?;
    let mut spec = args.overrides.spec(args.experiment, args.method)?;
    let experiment = *spec.experiment.get_or_insert(Experiment::Exp1);
    let method = *spec.method.get_or_insert(experiment.reference_methods()[0]);

    let cfgs = grid
        .iter()
        .map(|v| {
            let mut s = spec.clone();
            set_param(&mut s, args.param, *v);
            s.resolve_for(method, false)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let statuses = cfgs
        .iter()
        .map(|c| certificate_status(&c.gains))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = run_all(&cfgs)?;

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for ((v, status), o) in grid.iter().zip(&statuses).zip(&outcomes) {
        let r = &o.report;
        let check = check_gain_condition(&o.config.gains);
        csv.push_str(&format!(
            "{},{},{},{},{},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:e}\n",
            args.param.name(),
            v,
            experiment.id(),
            method.id(),
            status,
            check.lhs,
            check.rhs,
            r.settled,
            r.settling_time,
            r.ultimate_bound,
            r.chattering_index,
            r.final_l0,
            r.dt_used
        ));
    }

    let out = spec.out_dir();
    fs::create_dir_all(&out)?;
    let stem = format!("sweep_{}_{}", experiment.id(), args.param.name());
    fs::write(out.join(format!("{stem}.csv")), &csv)?;
    let reports: Vec<&ExperimentReport> = outcomes.iter().map(|o| &o.report).collect();
    write_json(
        &out.join(format!("{stem}.json")),
        &json!({ "param": args.param.name(), "values": grid, "configs": cfgs, "reports": reports }),
    )?;
    print!("{csv}");
    Ok(EXIT_OK)
}
