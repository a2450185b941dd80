//! Command implementations shared by the binary and the tests.

use std::path::Path;

use log::warn;
use qotto_core::cycle::{carnot_cycle, find_crossing_time, run_otto_cycle, two_step_protocol, CycleReport};
use qotto_core::dynamics::{evolve, propagator_for};
use qotto_core::thermo::{excited_population, TwoLevelState};
use rayon::prelude::*;

use crate::error::{CliError, Result, EXIT_INFEASIBLE, EXIT_OK};
use crate::output::{
    format_float, to_json, write_trajectory_csv, CarnotDocument, CycleDocument, TwoStepDocument,
};
use crate::scenario::{value_label, ScenarioFile, SweepPoint, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BathSelector {
    Hot,
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRequest {
    pub bath: BathSelector,
    pub t_max: Option<f64>,
    /// Stop at the first time `x = ω/T_eff` reaches this value.
    pub until_crossing: Option<f64>,
    pub reference_columns: bool,
}

/// Document text and the exit code it should be reported with.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub body: String,
    pub exit_code: i32,
}

/// CSV of the contact trajectory starting from the bath's equilibrium state.
pub fn cmd_trajectory(s: &ScenarioFile, req: &TrajectoryRequest) -> Result<String> {
    let otto = s.to_otto()?;
    let (omega, bath) = match req.bath {
        BathSelector::Hot => (otto.omega_h, otto.hot),
        BathSelector::Cold => (otto.omega_c, otto.cold),
    };
    let mut cfg = otto.contact_config(omega, &bath)?;
    if let Some(t) = req.t_max {
        cfg = cfg.with_horizon(t)?;
    }
    let initial = TwoLevelState::thermal(omega, bath.temperature)?;
    if let Some(target) = req.until_crossing {
        let prop = propagator_for(omega, &bath, cfg)?;
        let crossing = find_crossing_time(&*prop, &initial, target, &otto.crossing)?;
        cfg = cfg.with_horizon(crossing.time)?;
    }
    let traj = evolve(&initial, &bath, &cfg)?;
    let reference = req.reference_columns.then(|| (otto.hot_x(), otto.cold_x()));
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &traj, reference)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Runs the Otto cycle. Infeasible scenarios still produce a report, with
/// crossing-dependent fields empty when no crossing exists.
pub fn cycle_report(s: &ScenarioFile) -> Result<(CycleReport, i32)> {
    let otto = s.to_otto()?;
    match run_otto_cycle(&otto) {
        Ok(r) => {
            let code = if r.engine_condition_met { EXIT_OK } else { EXIT_INFEASIBLE };
            Ok((r, code))
        }
        Err(e) if e.is_infeasible() => {
            warn!("{e}");
            Ok((CycleReport::outline(&otto)?, EXIT_INFEASIBLE))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_cycle(s: &ScenarioFile) -> Result<CommandOutput> {
    let (report, exit_code) = cycle_report(s)?;
    let body = to_json(&CycleDocument { report: &report, scenario: s })?;
    Ok(CommandOutput { body, exit_code })
}

pub fn cmd_carnot(s: &ScenarioFile) -> Result<String> {
    let report = carnot_cycle(&s.to_otto()?)?;
    to_json(&CarnotDocument { report: &report, scenario: s })
}

/// Two-step preparation of the hot-contact endpoint from the hot equilibrium state.
pub fn cmd_two_step(s: &ScenarioFile) -> Result<String> {
    let otto = s.to_otto()?;
    let start = TwoLevelState::thermal(otto.omega_h, otto.hot.temperature)?;
    let target = TwoLevelState::diagonal(otto.omega_h, excited_population(otto.cold_x()))?;
    let report = two_step_protocol(&start, &target, otto.hot.temperature)?;
    to_json(&TwoStepDocument { report: &report, scenario: s })
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub index: usize,
    pub file_name: String,
    pub labels: Vec<String>,
    /// `ok`, `infeasible` or an error message.
    pub status: String,
    pub report: Option<CycleReport>,
    pub document: Option<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub points: usize,
    pub failed: usize,
    pub exit_code: i32,
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || "._-+".contains(c) { c } else { '_' }).collect()
}

fn run_point(spec: &SweepSpec, point: &SweepPoint) -> PointResult {
    let labels: Vec<String> = point.values.iter().map(value_label).collect();
    let mut file_name = format!("point_{:04}", point.index);
    for (axis, label) in spec.axes.iter().zip(&labels) {
        file_name.push_str(&format!("__{}={}", axis.path, sanitize(label)));
    }
    file_name.push_str(".json");
    let outcome = match &point.scenario {
        Err(reason) => Err((reason.clone(), crate::error::EXIT_CONFIG)),
        Ok(s) => cycle_report(s)
            .and_then(|(r, code)| Ok((r, code, to_json(&CycleDocument { report: &r, scenario: s })?)))
            .map_err(|e| (e.to_string(), e.exit_code())),
    };
    match outcome {
        Ok((report, code, document)) => PointResult {
            index: point.index,
            file_name,
            labels,
            status: if code == EXIT_OK { "ok".into() } else { "infeasible".into() },
            report: Some(report),
            document: Some(document),
            exit_code: code,
        },
        Err((reason, code)) => PointResult {
            index: point.index,
            file_name,
            labels,
            status: format!("error: {reason}"),
            report: None,
            document: None,
            exit_code: code,
        },
    }
}

/// Evaluates every grid point on a pool of `jobs` workers, then writes the
/// reports and `index.csv` in grid order.
pub fn cmd_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepSummary> {
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let results: Vec<PointResult> = pool.install(|| points.par_iter().map(|p| run_point(spec, p)).collect());

    let out = &spec.out;
    std::fs::create_dir_all(out).map_err(|source| CliError::Write { path: out.clone(), source })?;
    let index_path = out.join("index.csv");
    let mut index = csv::Writer::from_path(&index_path)?;
    let mut header = vec!["point".to_owned()];
    header.extend(spec.axes.iter().map(|a| a.path.clone()));
    header.extend(["status", "tau1", "tau2", "w", "eta", "w_tilde", "feasible", "file"].map(String::from));
    index.write_record(&header)?;

    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    let mut failed = 0;
    let mut exit_code = EXIT_OK;
    for r in &results {
        if let Some(doc) = &r.document {
            write_file(&out.join(&r.file_name), doc)?;
        } else {
            failed += 1;
            exit_code = exit_code.max(r.exit_code);
        }
        let mut row = vec![r.index.to_string()];
        row.extend(r.labels.iter().cloned());
        row.push(r.status.clone());
        match &r.report {
            Some(rep) => {
                let feasible = rep.engine_condition_met && rep.tau1.is_some();
                row.extend([opt(rep.tau1), opt(rep.tau2), opt(rep.w), opt(rep.eta), opt(rep.w_tilde)]);
                row.push(feasible.to_string());
                row.push(r.file_name.clone());
            }
            None => row.extend(["", "", "", "", "", "", ""].map(String::from)),
        }
        index.write_record(&row)?;
    }
    index.flush().map_err(|source| CliError::Write { path: index_path, source })?;
    Ok(SweepSummary { points: results.len(), failed, exit_code })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.to_owned(), source })
}
