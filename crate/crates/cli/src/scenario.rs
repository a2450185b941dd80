//! TOML scenario files and sweep specifications.

use std::path::{Path, PathBuf};

use qotto_core::bath::{BathSpec, DynamicsModel, SpectralDensity};
use qotto_core::cycle::{CrossingConfig, CrossingSelection, OttoScenario, DEFAULT_BISECT_TOL};
use qotto_core::dynamics::default_dt;
use qotto_core::quadrature::QuadConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Overrides both quadrature tolerances when set.
pub const QUAD_TOL_ENV: &str = "QOTTO_QUAD_TOL";

/// Default cutoff in units of the contact frequency.
const CUTOFF_PER_OMEGA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    pub hot_bath: BathSection,
    pub cold_bath: BathSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub crossing: CrossingSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega_h: f64,
    pub omega_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub temperature: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub model: DynamicsModel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisect_tol: Option<f64>,
}

/// Parses and validates a scenario, filling in every default.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let raw: ScenarioFile = toml::from_str(text).map_err(|e| CliError::config("scenario", e.to_string()))?;
    raw.resolve()
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    parse_scenario(&read(path)?)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })
}

fn check_positive(path: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be positive and finite, got {value}")))
    }
}

fn check_optional(path: &str, value: Option<f64>) -> Result<()> {
    value.map_or(Ok(()), |v| check_positive(path, v))
}

impl ScenarioFile {
    /// Applies defaults and checks every field; the result is a fixed point.
    pub fn resolve(&self) -> Result<ScenarioFile> {
        let mut s = self.clone();
        let SystemSection { omega_h, omega_c } = s.system;
        check_positive("system.omega_h", omega_h)?;
        check_positive("system.omega_c", omega_c)?;
        if omega_c >= omega_h {
            return Err(CliError::config(
                "system.omega_c",
                format!("omega_c = {omega_c} must be below omega_h = {omega_h}"),
            ));
        }
        for (name, bath, omega) in
            [("hot_bath", &mut s.hot_bath, omega_h), ("cold_bath", &mut s.cold_bath, omega_c)]
        {
            check_positive(&format!("{name}.temperature"), bath.temperature)?;
            check_positive(&format!("{name}.gamma"), bath.gamma)?;
            check_optional(&format!("{name}.lambda"), bath.lambda)?;
            bath.lambda.get_or_insert(CUTOFF_PER_OMEGA * omega);
        }
        if s.cold_bath.temperature > s.hot_bath.temperature {
            return Err(CliError::config(
                "cold_bath.temperature",
                format!(
                    "T_c = {} exceeds hot_bath.temperature = {}",
                    s.cold_bath.temperature, s.hot_bath.temperature
                ),
            ));
        }
        let i = &mut s.integration;
        check_optional("integration.dt", i.dt)?;
        check_optional("integration.t_max", i.t_max)?;
        check_optional("integration.quad_abs_tol", i.quad_abs_tol)?;
        check_optional("integration.quad_rel_tol", i.quad_rel_tol)?;
        let dt = *i.dt.get_or_insert(default_dt(omega_h));
        let defaults = QuadConfig::default();
        i.quad_abs_tol.get_or_insert(defaults.abs_tol);
        i.quad_rel_tol.get_or_insert(defaults.rel_tol);
        let c = &mut s.crossing;
        check_optional("crossing.scan_dt", c.scan_dt)?;
        check_optional("crossing.bisect_tol", c.bisect_tol)?;
        c.scan_dt.get_or_insert(dt);
        c.bisect_tol.get_or_insert(DEFAULT_BISECT_TOL);
        s.to_otto()?;
        Ok(s)
    }

    /// Sets both quadrature tolerances.
    pub fn with_quad_tolerance(&self, tol: f64) -> Result<ScenarioFile> {
        check_positive(QUAD_TOL_ENV, tol)?;
        let mut s = self.clone();
        s.integration.quad_abs_tol = Some(tol);
        s.integration.quad_rel_tol = Some(tol);
        Ok(s)
    }

    /// Applies `QOTTO_QUAD_TOL` if it is set.
    pub fn with_env_overrides(&self) -> Result<ScenarioFile> {
        match std::env::var(QUAD_TOL_ENV) {
            Ok(v) => {
                let tol = v
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::config(QUAD_TOL_ENV, format!("`{v}`: {e}")))?;
                self.with_quad_tolerance(tol)
            }
            Err(_) => Ok(self.clone()),
        }
    }

    /// Simulation inputs; the file must have been resolved.
    pub fn to_otto(&self) -> Result<OttoScenario> {
        let bath = |name: &str, b: &BathSection, omega: f64| -> Result<BathSpec> {
            let lambda = b.lambda.unwrap_or(CUTOFF_PER_OMEGA * omega);
            let sd =
                SpectralDensity::new(b.gamma, lambda).map_err(|e| CliError::config(name, e.to_string()))?;
            BathSpec::new(b.temperature, sd, b.model).map_err(|e| CliError::config(name, e.to_string()))
        };
        let hot = bath("hot_bath", &self.hot_bath, self.system.omega_h)?;
        let cold = bath("cold_bath", &self.cold_bath, self.system.omega_c)?;
        let defaults = QuadConfig::default();
        let quad = QuadConfig {
            abs_tol: self.integration.quad_abs_tol.unwrap_or(defaults.abs_tol),
            rel_tol: self.integration.quad_rel_tol.unwrap_or(defaults.rel_tol),
            ..defaults
        };
        let dt = self.integration.dt.unwrap_or(default_dt(self.system.omega_h));
        let crossing = CrossingConfig {
            scan_dt: self.crossing.scan_dt.unwrap_or(dt),
            bisect_tol: self.crossing.bisect_tol.unwrap_or(DEFAULT_BISECT_TOL),
            selection: CrossingSelection::FirstCrossing,
        };
        let s = OttoScenario {
            omega_h: self.system.omega_h,
            omega_c: self.system.omega_c,
            hot,
            cold,
            dt,
            t_max: self.integration.t_max,
            quad,
            crossing,
        };
        s.validate().map_err(|e| match e {
            qotto_core::QottoError::InvalidParameter { name, reason } => CliError::config(name, reason),
            other => other.into(),
        })?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }
}

/// One swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted key such as `hot_bath.gamma`; `baths.<key>` sets both baths.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxesFile {
    #[serde(default = "default_max_points")]
    max_points: usize,
    #[serde(default)]
    axes: Vec<Axis>,
}

fn default_max_points() -> usize {
    10_000
}

/// Cartesian grid of scenario overrides around a base file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: toml::Table,
    pub axes: Vec<Axis>,
    pub out: PathBuf,
}

/// One grid point: its index, the override values and the resulting scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<toml::Value>,
    pub scenario: Result<ScenarioFile, String>,
}

impl SweepSpec {
    pub fn parse(base_text: &str, axes_text: &str, out: PathBuf) -> Result<SweepSpec> {
        let base: toml::Table =
            base_text.parse().map_err(|e: toml::de::Error| CliError::config("scenario", e.to_string()))?;
        // The base must be valid on its own.
        parse_scenario(base_text)?;
        let axes: AxesFile =
            toml::from_str(axes_text).map_err(|e| CliError::config("axes", e.to_string()))?;
        if axes.axes.is_empty() {
            return Err(CliError::config("axes", "at least one axis is required"));
        }
        let mut size = 1usize;
        for (i, axis) in axes.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(CliError::config(format!("axes[{i}].values"), "must not be empty"));
            }
            expand_path(&axis.path).map_err(|r| CliError::config(format!("axes[{i}].path"), r))?;
            size = size.saturating_mul(axis.values.len());
        }
        if size > axes.max_points {
            return Err(CliError::config(
                "axes",
                format!("{size} grid points exceed max_points = {}", axes.max_points),
            ));
        }
        Ok(SweepSpec { base, axes: axes.axes, out })
    }

    pub fn load(base: &Path, axes: &Path, out: PathBuf) -> Result<SweepSpec> {
        Self::parse(&read(base)?, &read(axes)?, out)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order, the first axis varying slowest.
    pub fn points(&self) -> Vec<SweepPoint> {
        (0..self.len())
            .map(|index| {
                let mut rem = index;
                let mut values = vec![toml::Value::Boolean(false); self.axes.len()];
                for (k, axis) in self.axes.iter().enumerate().rev() {
                    values[k] = axis.values[rem % axis.values.len()].clone();
                    rem /= axis.values.len();
                }
                let scenario = self.scenario_at(&values);
                SweepPoint { index, values, scenario }
            })
            .collect()
    }

    fn scenario_at(&self, values: &[toml::Value]) -> Result<ScenarioFile, String> {
        let mut table = self.base.clone();
        for (axis, value) in self.axes.iter().zip(values) {
            for path in expand_path(&axis.path)? {
                set_path(&mut table, &path, coerce(value))?;
            }
        }
        let raw: ScenarioFile = toml::Value::Table(table).try_into().map_err(|e| e.to_string())?;
        raw.resolve().map_err(|e| e.to_string())
    }
}

/// Integers are accepted wherever floats are expected.
fn coerce(value: &toml::Value) -> toml::Value {
    match value {
        toml::Value::Integer(i) => toml::Value::Float(*i as f64),
        other => other.clone(),
    }
}

const SECTIONS: [&str; 5] = ["system", "hot_bath", "cold_bath", "integration", "crossing"];

fn expand_path(path: &str) -> Result<Vec<Vec<String>>, String> {
    let parts: Vec<String> = path.split('.').map(str::to_owned).collect();
    if parts.len() != 2 || parts.iter().any(String::is_empty) {
        return Err(format!("`{path}` is not of the form section.key"));
    }
    if parts[0] == "baths" {
        return Ok(vec![
            vec!["hot_bath".to_owned(), parts[1].clone()],
            vec!["cold_bath".to_owned(), parts[1].clone()],
        ]);
    }
    if !SECTIONS.contains(&parts[0].as_str()) {
        return Err(format!("unknown section `{}`", parts[0]));
    }
    Ok(vec![parts])
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), String> {
    let section = table.entry(path[0].clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match section {
        toml::Value::Table(t) => {
            t.insert(path[1].clone(), value);
            Ok(())
        }
        _ => Err(format!("`{}` is not a table", path[0])),
    }
}

/// File-name fragment for an axis value.
pub fn value_label(value: &toml::Value) -> String {
    match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(f) => format!("{f}"),
        toml::Value::Integer(i) => format!("{}", *i as f64),
        other => other.to_string(),
    }
}
