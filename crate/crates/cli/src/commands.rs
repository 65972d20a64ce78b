//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use koopman_core::model_io::{model_document, sign};
use koopman_core::prediction::{
    compare_to_truth, diagonal_crossings, one_step_map, predict, PredictionTrace,
};
use koopman_core::reprojection::{ml_weight_from_covariance, newton_project, ProjectionResult};
use koopman_core::training::train;
use koopman_core::{
    load_model, CovarianceSurrogate, KoopmanModel, Mode, NewtonOptions, PredictorConfig, Schedule,
};
use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::output::{fmt_vec, write_csv, write_file, write_json, CliResult, Failure};

pub const MODEL_FILE: &str = "model.json";

fn prepare_dir(r: &Resolved) -> CliResult<PathBuf> {
    let dir = r.output_dir().to_path_buf();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Numerical(format!("cannot create {}: {e}", dir.display())))?;
    let mut echoed = r.config.clone();
    echoed.output_dir = None;
    write_json(
        &dir.join("config.json"),
        &r.hash,
        json!({ "config": echoed }),
    )?;
    Ok(dir)
}

fn load_checked(
    r: &Resolved,
    path: &Path,
) -> CliResult<(KoopmanModel, Option<CovarianceSurrogate>)> {
    let ctx = path.display().to_string();
    let (model, q) = load_model(path).map_err(|e| Failure::Config(format!("{ctx}: {e}")))?;
    if model.dict.basis() != r.dict.basis() || model.dict.dim() != r.dict.dim() {
        return Err(Failure::Config(format!(
            "{ctx}: model dictionary does not match the configured one"
        )));
    }
    if model.m() != r.system.n_params() {
        return Err(Failure::Config(format!(
            "{ctx}: model has {} parameters, system `{}` has {}",
            model.m(),
            r.system.name,
            r.system.n_params()
        )));
    }
    if model.t != r.config.t {
        return Err(Failure::Config(format!(
            "{ctx}: model time step {} differs from configured t = {}",
            model.t, r.config.t
        )));
    }
    Ok((model, q))
}

fn require_q(
    q: Option<&CovarianceSurrogate>,
    predictors: &[&PredictorConfig],
    what: &str,
) -> CliResult<()> {
    let needs = predictors
        .iter()
        .any(|p| p.mode == Mode::MaxLikelihood || p.schedule == Schedule::Adaptive);
    if needs && q.is_none() {
        return Err(Failure::Config(format!(
            "{what}: the model file has no covariance surrogate"
        )));
    }
    Ok(())
}

fn predictor_label(k: usize, p: &PredictorConfig) -> String {
    match p.schedule {
        Schedule::EveryStep => format!("{k}_{}", p.mode.name()),
        Schedule::Adaptive => format!("{k}_{}_adaptive", p.mode.name()),
    }
}

fn schedule_name(s: Schedule) -> &'static str {
    match s {
        Schedule::EveryStep => "every_step",
        Schedule::Adaptive => "adaptive",
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn fit(r: &Resolved) -> CliResult<()> {
    let dir = prepare_dir(r)?;
    let started = Instant::now();
    let trained = train(&r.system, &r.training()).map_err(|e| Failure::from_core("fit", e))?;
    let report = &trained.report;
    let mut doc = model_document(&trained.model, Some(&trained.q))
        .map_err(|e| Failure::from_core("fit", e))?;
    doc["config_hash"] = json!(r.hash);
    sign(&mut doc).map_err(|e| Failure::from_core("fit", e))?;
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON value");
    text.push('\n');
    let model_path = dir.join(MODEL_FILE);
    write_file(&model_path, text.as_bytes())?;
    write_json(
        &dir.join("fit_report.json"),
        &r.hash,
        json!({
            "system": r.system.name,
            "n_features": trained.model.n_features(),
            "n_params": trained.model.m(),
            "n_samples": report.n_samples,
            "n_columns": report.n_columns,
            "condition_number": finite_or_null(report.condition_number),
            "scaled_ridge": report.scaled_ridge,
            "fallback_used": report.fallback_used,
            "residual_rms": report.residual_rms,
            "model_file": MODEL_FILE,
        }),
    )?;
    if report.fallback_used {
        warn!(
            "least squares was singular; fitted with scaled ridge {:e}",
            report.scaled_ridge
        );
    }
    println!(
        "fit {}: M = {}, m = {}, N = {}, cond = {:.3e}, residual rms = {:.3e}, ridge fallback = {} ({:.2?})",
        r.system.name,
        trained.model.n_features(),
        trained.model.m(),
        report.n_samples,
        report.condition_number,
        report.residual_rms,
        report.fallback_used,
        started.elapsed()
    );
    println!("wrote {}", model_path.display());
    Ok(())
}

struct RunOutcome {
    summary: Value,
    failed: bool,
}

fn finish_batch(failed: usize, total: usize) -> CliResult<()> {
    match failed {
        0 => Ok(()),
        f if f == total => Err(Failure::Numerical(format!("all {total} runs failed"))),
        f => Err(Failure::Partial { failed: f, total }),
    }
}

fn trace_summary(trace: &PredictionTrace, errors: &[f64], lifted: bool) -> Value {
    let complete = errors.len() == trace.steps.len();
    json!({
        "terminal_state": trace.final_state().map(|x| x.as_slice().to_vec()),
        "terminal_error": if complete { errors.last().copied().map(finite_or_null) } else { None },
        "max_error": errors.iter().copied().fold(None, |a: Option<f64>, e| Some(a.map_or(e, |a| a.max(e)))).map(finite_or_null),
        "error_space": if lifted { "lifted" } else { "state" },
        "reprojections": trace.reprojection_steps().len(),
        "newton_max_iterations": trace.steps.iter().map(|s| s.newton_iterations).max().unwrap_or(0),
        "newton_unconverged": trace.steps.iter().filter(|s| !s.newton_converged).count(),
    })
}

pub fn predict_cmd(r: &Resolved, model_path: &Path) -> CliResult<()> {
    let spec = r
        .config
        .prediction
        .as_ref()
        .ok_or_else(|| Failure::Config("config has no `prediction` section".into()))?;
    let (model, q) = load_checked(r, model_path)?;
    require_q(
        q.as_ref(),
        &spec.predictors.iter().collect::<Vec<_>>(),
        "prediction",
    )?;
    let dir = prepare_dir(r)?;

    let mut jobs = Vec::new();
    for (k, pc) in spec.predictors.iter().enumerate() {
        for (i, p) in spec.params.iter().enumerate() {
            for (j, x0) in spec.initial_states.iter().enumerate() {
                jobs.push((k, pc, i, p, j, x0));
            }
        }
    }
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(k, pc, i, p, j, x0)| {
            let file = format!("trace_{}_p{i}_x{j}.csv", predictor_label(k, pc));
            let run = || -> CliResult<Value> {
                let ctx = format!("predictor {k}, p[{i}], x0[{j}]");
                let trace = predict(
                    &model,
                    q.as_ref(),
                    pc,
                    &DVector::from_column_slice(x0),
                    p,
                    spec.n_steps,
                )
                .map_err(|e| Failure::from_core(&ctx, e))?;
                let errs = compare_to_truth(&trace, &r.system, &model, &r.config.integrator)
                    .map_err(|e| Failure::from_core(&ctx, e))?;
                if let Some((k, why)) = &errs.truncated {
                    warn!("{ctx}: reference trajectory stopped at step {k}: {why}");
                }
                write_csv(
                    &dir.join(&file),
                    &r.hash,
                    &[
                        ("system", r.system.name.clone()),
                        ("mode", pc.mode.name().into()),
                        ("schedule", schedule_name(pc.schedule).into()),
                        ("p", fmt_vec(p)),
                        ("x0", fmt_vec(x0)),
                    ],
                    &trace.to_csv(spec.include_lifted, Some(&errs.errors)),
                )?;
                Ok(trace_summary(&trace, &errs.errors, errs.lifted))
            };
            let base = json!({
                "predictor": k,
                "mode": pc.mode.name(),
                "schedule": schedule_name(pc.schedule),
                "p": p,
                "x0": x0,
            });
            match run() {
                Ok(mut s) => {
                    merge(&mut s, base);
                    s["status"] = "ok".into();
                    s["file"] = file.into();
                    RunOutcome {
                        summary: s,
                        failed: false,
                    }
                }
                Err(e) => {
                    warn!("{e}");
                    let mut s = base;
                    s["status"] = "failed".into();
                    s["error"] = e.to_string().into();
                    RunOutcome {
                        summary: s,
                        failed: true,
                    }
                }
            }
        })
        .collect();

    let failed = outcomes.iter().filter(|o| o.failed).count();
    let runs: Vec<Value> = outcomes.into_iter().map(|o| o.summary).collect();
    write_json(
        &dir.join("predict_summary.json"),
        &r.hash,
        json!({ "system": r.system.name, "n_steps": spec.n_steps, "t": model.t, "runs": runs }),
    )?;
    println!(
        "predict: {} runs, {failed} failed, outputs in {}",
        runs.len(),
        dir.display()
    );
    finish_batch(failed, runs.len())
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

pub fn bifurcation(r: &Resolved, model_path: &Path) -> CliResult<()> {
    let spec = r
        .config
        .bifurcation
        .as_ref()
        .ok_or_else(|| Failure::Config("config has no `bifurcation` section".into()))?;
    let (model, q) = load_checked(r, model_path)?;
    require_q(
        q.as_ref(),
        &spec.predictors.iter().collect::<Vec<_>>(),
        "bifurcation",
    )?;
    let dir = prepare_dir(r)?;
    let [lo, hi] = spec.range.expect("filled in by resolve");
    let n = spec.grid_points;
    let xs: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let states: Vec<DVector<f64>> = xs.iter().map(|&x| DVector::from_element(1, x)).collect();

    struct Sweep {
        rows: String,
        summary: Value,
        failures: usize,
        groups: usize,
    }
    let sweeps: Vec<Sweep> = spec
        .params
        .par_iter()
        .map(|p| {
            let mut rows = String::new();
            let mut failures = 0;
            let truth: Option<Vec<f64>> = r
                .system
                .combined_field(p)
                .and_then(|f| {
                    states
                        .iter()
                        .map(|x| r.config.integrator.integrate(&f, x, model.t).map(|y| y[0]))
                        .collect()
                })
                .map_err(|e| warn!("p = {p:?}: reference map failed: {e}"))
                .ok();
            let mut predictors = Vec::new();
            for (k, pc) in spec.predictors.iter().enumerate() {
                match one_step_map(&model, q.as_ref(), pc, &states, p) {
                    Ok(fx) => {
                        let fx: Vec<f64> = fx.iter().map(|v| v.as_ref().map_or(f64::NAN, |v| v[0])).collect();
                        for (idx, x) in xs.iter().enumerate() {
                            let t = truth.as_ref().map_or(f64::NAN, |t| t[idx]);
                            let _ = writeln!(rows, "{},{k},{},{x},{},{t}", fmt_params(p), pc.mode.name(), fx[idx]);
                        }
                        predictors.push(json!({
                            "predictor": k,
                            "mode": pc.mode.name(),
                            "status": "ok",
                            "crossings": diagonal_crossings(&xs, &fx),
                        }));
                    }
                    Err(e) => {
                        failures += 1;
                        warn!("p = {p:?}, predictor {k}: {e}");
                        predictors.push(json!({
                            "predictor": k,
                            "mode": pc.mode.name(),
                            "status": "failed",
                            "error": e.to_string(),
                        }));
                    }
                }
            }
            let truth_crossings = truth.as_ref().map(|t| diagonal_crossings(&xs, t));
            if truth.is_none() {
                failures += 1;
            }
            Sweep {
                rows,
                summary: json!({ "p": p, "truth_crossings": truth_crossings, "predictors": predictors }),
                failures,
                groups: spec.predictors.len() + 1,
            }
        })
        .collect();

    let mut body = String::new();
    let m = r.system.n_params();
    let pcols: Vec<String> = (0..m).map(|i| format!("p{i}")).collect();
    let _ = writeln!(
        body,
        "{},predictor,mode,x,prediction,truth",
        pcols.join(",")
    );
    for s in &sweeps {
        body.push_str(&s.rows);
    }
    write_csv(
        &dir.join("bifurcation.csv"),
        &r.hash,
        &[
            ("system", r.system.name.clone()),
            ("grid_points", n.to_string()),
        ],
        &body,
    )?;
    let failed: usize = sweeps.iter().map(|s| s.failures).sum();
    let total: usize = sweeps.iter().map(|s| s.groups).sum();
    write_json(
        &dir.join("bifurcation_summary.json"),
        &r.hash,
        json!({
            "system": r.system.name,
            "grid": { "lo": lo, "hi": hi, "points": n },
            "sweeps": sweeps.into_iter().map(|s| s.summary).collect::<Vec<_>>(),
        }),
    )?;
    println!(
        "bifurcation: {} parameters, outputs in {}",
        spec.params.len(),
        dir.display()
    );
    finish_batch(failed, total)
}

fn fmt_params(p: &[f64]) -> String {
    p.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Largest `v_{k+1} / v_k^1.5` over the last three step norms.
pub fn superlinear_constant(norms: &[f64]) -> Option<f64> {
    let tail = &norms[norms.len().saturating_sub(3)..];
    tail.windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0].powf(1.5))
        .fold(None, |a: Option<f64>, c| Some(a.map_or(c, |a| a.max(c))))
}

fn solve_json(r: &ProjectionResult) -> Value {
    json!({
        "iterations": r.iterations,
        "converged": r.converged,
        "step_norms": r.step_norms,
        "superlinear_constant": superlinear_constant(&r.step_norms),
        "objective": r.objective,
        "x": r.x.as_slice(),
    })
}

pub fn newton_bench(r: &Resolved, model_path: &Path) -> CliResult<()> {
    let spec = r
        .config
        .newton_bench
        .as_ref()
        .ok_or_else(|| Failure::Config("config has no `newton_bench` section".into()))?;
    let (model, q) = load_checked(r, model_path)?;
    require_q(q.as_ref(), &[&spec.predictor], "newton_bench")?;
    let q = q.expect("checked");
    let dir = prepare_dir(r)?;
    let pc = &spec.predictor;
    let ctx = "newton_bench";
    let num = |e| Failure::from_core(ctx, e);

    let trace = predict(
        &model,
        Some(&q),
        pc,
        &DVector::from_column_slice(&spec.x0),
        &spec.param,
        spec.n_steps,
    )
    .map_err(num)?;
    let k_mat = model.matrix_at(&spec.param).map_err(num)?;
    let w = ml_weight_from_covariance(
        &q.eval(&spec.param).map_err(num)?,
        &model.feature_scale,
        pc.ridge,
    )
    .map_err(num)?;
    let mut opts = NewtonOptions::new(pc.newton_tol, pc.newton_k_max);
    if let (Some(domain), Some(f)) = (&model.state_domain, pc.domain_inflation) {
        opts.bounds = Some(domain.scaled(f));
    }
    let cold_x =
        DVector::from_column_slice(spec.cold_start.as_ref().expect("filled in by resolve"));

    let checkpoints: Vec<usize> = (spec.every..=spec.n_steps).step_by(spec.every).collect();
    let results: Vec<(usize, ProjectionResult, ProjectionResult)> = checkpoints
        .par_iter()
        .map(|&k| {
            let prev = &trace.steps[k - 1];
            let z = &k_mat * DVector::from_column_slice(&prev.z);
            let warm_x = DVector::from_column_slice(prev.x.as_ref().expect("reprojected trace"));
            let warm = newton_project(&model.dict, &w, &z, &warm_x, &opts)?;
            let cold = newton_project(&model.dict, &w, &z, &cold_x, &opts)?;
            Ok((k, warm, cold))
        })
        .collect::<koopman_core::Result<_>>()
        .map_err(num)?;

    let mut body = String::from("step,start,iteration,step_norm\n");
    let mut entries = Vec::new();
    for (k, warm, cold) in &results {
        for (label, res) in [("warm", warm), ("cold", cold)] {
            for (it, v) in res.step_norms.iter().enumerate() {
                let _ = writeln!(body, "{k},{label},{},{v}", it + 1);
            }
        }
        entries.push(json!({ "step": k, "warm": solve_json(warm), "cold": solve_json(cold) }));
    }
    write_csv(
        &dir.join("newton_bench.csv"),
        &r.hash,
        &[
            ("system", r.system.name.clone()),
            ("p", fmt_vec(&spec.param)),
            ("x0", fmt_vec(&spec.x0)),
        ],
        &body,
    )?;
    let max_warm = results
        .iter()
        .map(|(_, w, _)| w.iterations)
        .max()
        .unwrap_or(0);
    let max_cold = results
        .iter()
        .map(|(_, _, c)| c.iterations)
        .max()
        .unwrap_or(0);
    let all_warm = results.iter().all(|(_, w, _)| w.converged);
    write_json(
        &dir.join("newton_bench_summary.json"),
        &r.hash,
        json!({
            "system": r.system.name,
            "tolerance": pc.newton_tol,
            "max_warm_iterations": max_warm,
            "max_cold_iterations": max_cold,
            "all_warm_converged": all_warm,
            "trace_unconverged_steps": trace.steps.iter().filter(|s| !s.newton_converged).count(),
            "checkpoints": entries,
        }),
    )?;
    println!(
        "newton-bench: {} checkpoints, max iterations warm {max_warm} / cold {max_cold}, all warm converged: {all_warm}",
        results.len()
    );
    Ok(())
}

/// Median gap between reprojections (lower median for even counts).
pub fn realized_interval(intervals: &[usize]) -> Option<usize> {
    let mut v = intervals.to_vec();
    v.sort_unstable();
    v.get((v.len().max(1) - 1) / 2).copied()
}

pub fn multistep(r: &Resolved, model_path: &Path) -> CliResult<()> {
    let spec = r
        .config
        .multistep
        .as_ref()
        .ok_or_else(|| Failure::Config("config has no `multistep` section".into()))?;
    let (model, q) = load_checked(r, model_path)?;
    let configs: Vec<PredictorConfig> = spec
        .factors
        .iter()
        .map(|&f| PredictorConfig::adaptive(spec.mode, spec.measure, f))
        .collect();
    require_q(q.as_ref(), &configs.iter().collect::<Vec<_>>(), "multistep")?;
    let dir = prepare_dir(r)?;
    let x0 = DVector::from_column_slice(&spec.x0);

    let outcomes: Vec<RunOutcome> = configs
        .par_iter()
        .enumerate()
        .map(|(i, pc)| {
            let file = format!("multistep_f{i}.csv");
            let run = || -> CliResult<Value> {
                let ctx = format!("factor {}", pc.trigger_factor);
                let trace = predict(&model, q.as_ref(), pc, &x0, &spec.param, spec.n_steps)
                    .map_err(|e| Failure::from_core(&ctx, e))?;
                let errs = compare_to_truth(&trace, &r.system, &model, &r.config.integrator)
                    .map_err(|e| Failure::from_core(&ctx, e))?;
                write_csv(
                    &dir.join(&file),
                    &r.hash,
                    &[
                        ("system", r.system.name.clone()),
                        ("mode", pc.mode.name().into()),
                        ("trigger_factor", pc.trigger_factor.to_string()),
                        ("p", fmt_vec(&spec.param)),
                        ("x0", fmt_vec(&spec.x0)),
                    ],
                    &trace.to_csv(false, Some(&errs.errors)),
                )?;
                let intervals = trace.reprojection_intervals();
                let mut s = trace_summary(&trace, &errs.errors, errs.lifted);
                merge(
                    &mut s,
                    json!({
                        "reprojection_steps": trace.reprojection_steps(),
                        "intervals": intervals,
                        "realized_interval": realized_interval(&intervals),
                    }),
                );
                Ok(s)
            };
            let base = json!({ "factor": pc.trigger_factor });
            match run() {
                Ok(mut s) => {
                    merge(&mut s, base);
                    s["status"] = "ok".into();
                    s["file"] = file.into();
                    RunOutcome {
                        summary: s,
                        failed: false,
                    }
                }
                Err(e) => {
                    warn!("{e}");
                    let mut s = base;
                    s["status"] = "failed".into();
                    s["error"] = e.to_string().into();
                    RunOutcome {
                        summary: s,
                        failed: true,
                    }
                }
            }
        })
        .collect();

    let failed = outcomes.iter().filter(|o| o.failed).count();
    let runs: Vec<Value> = outcomes.into_iter().map(|o| o.summary).collect();
    let realized: Vec<Option<u64>> = runs
        .iter()
        .map(|s| s.get("realized_interval").and_then(Value::as_u64))
        .collect();
    let increasing = realized
        .windows(2)
        .all(|w| matches!(w, [Some(a), Some(b)] if b > a));
    for (f, i) in spec.factors.iter().zip(&realized) {
        info!("factor {f}: realized interval {i:?}");
    }
    write_json(
        &dir.join("multistep_summary.json"),
        &r.hash,
        json!({
            "system": r.system.name,
            "mode": spec.mode.name(),
            "measure": spec.measure,
            "runs": runs,
            "realized_intervals": realized,
            "strictly_increasing": increasing,
        }),
    )?;
    println!("multistep: realized intervals {realized:?} (strictly increasing: {increasing})");
    finish_batch(failed, runs.len())
}

pub fn simulate(r: &Resolved) -> CliResult<()> {
    let spec = r
        .config
        .prediction
        .as_ref()
        .ok_or_else(|| Failure::Config("config has no `prediction` section".into()))?;
    let dir = prepare_dir(r)?;
    let d = r.system.dim();
    let mut jobs = Vec::new();
    for (i, p) in spec.params.iter().enumerate() {
        for (j, x0) in spec.initial_states.iter().enumerate() {
            jobs.push((i, p, j, x0));
        }
    }
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(i, p, j, x0)| {
            let file = format!("truth_p{i}_x{j}.csv");
            let run = || -> koopman_core::Result<String> {
                let field = r.system.combined_field(p)?;
                let mut body = String::from("k,time");
                for c in 0..d {
                    let _ = write!(body, ",x{c}");
                }
                body.push('\n');
                let mut x = DVector::from_column_slice(x0);
                for k in 0..=spec.n_steps {
                    if k > 0 {
                        x = r.config.integrator.integrate(&field, &x, r.config.t)?;
                    }
                    let _ = write!(body, "{k},{}", k as f64 * r.config.t);
                    for v in x.iter() {
                        let _ = write!(body, ",{v}");
                    }
                    body.push('\n');
                }
                Ok(body)
            };
            let base = json!({ "p": p, "x0": x0 });
            let result = run()
                .map_err(|e| Failure::from_core(&format!("p[{i}], x0[{j}]"), e))
                .and_then(|body| {
                    write_csv(
                        &dir.join(&file),
                        &r.hash,
                        &[
                            ("system", r.system.name.clone()),
                            ("p", fmt_vec(p)),
                            ("x0", fmt_vec(x0)),
                        ],
                        &body,
                    )
                });
            let mut s = base;
            match result {
                Ok(()) => {
                    s["status"] = "ok".into();
                    s["file"] = file.into();
                    RunOutcome {
                        summary: s,
                        failed: false,
                    }
                }
                Err(e) => {
                    warn!("{e}");
                    s["status"] = "failed".into();
                    s["error"] = e.to_string().into();
                    RunOutcome {
                        summary: s,
                        failed: true,
                    }
                }
            }
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.failed).count();
    let runs: Vec<Value> = outcomes.into_iter().map(|o| o.summary).collect();
    write_json(
        &dir.join("simulate_summary.json"),
        &r.hash,
        json!({ "system": r.system.name, "t": r.config.t, "n_steps": spec.n_steps, "runs": runs }),
    )?;
    println!(
        "simulate: {} trajectories, {failed} failed, outputs in {}",
        runs.len(),
        dir.display()
    );
    finish_batch(failed, runs.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superlinear_constant_uses_last_three_norms() {
        assert_eq!(superlinear_constant(&[1.0]), None);
        let c = superlinear_constant(&[10.0, 1e-2, 1e-4, 1e-7]).unwrap();
        assert!((c - 1e-4 / 1e-2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn realized_interval_is_lower_median() {
        assert_eq!(realized_interval(&[]), None);
        assert_eq!(realized_interval(&[5]), Some(5));
        assert_eq!(realized_interval(&[2, 9, 3, 3]), Some(3));
    }
}
