//! Serialization of trajectories and reports.

use std::io::Write;

use qotto_core::cycle::{CarnotReport, CycleReport, TwoStepReport};
use qotto_core::dynamics::Trajectory;
use serde::Serialize;

use crate::error::Result;
use crate::scenario::ScenarioFile;

/// Shortest representation that parses back to the same `f64`; exponent
/// notation outside `[1e-4, 1e15)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub const TRAJECTORY_HEADER: [&str; 6] =
    ["t", "sigma_z", "x_ratio", "T_eff", "rel_entropy_to_eq", "von_neumann_entropy"];

/// Writes one row per sample; `reference` appends constant `x_hot_eq,x_cold_eq` columns.
pub fn write_trajectory_csv<W: Write>(
    out: W,
    traj: &Trajectory,
    reference: Option<(f64, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = TRAJECTORY_HEADER.to_vec();
    if reference.is_some() {
        header.extend(["x_hot_eq", "x_cold_eq"]);
    }
    w.write_record(&header)?;
    let t_eff = traj.effective_temperatures();
    for (i, t_eff) in t_eff.into_iter().enumerate() {
        let mut row = vec![
            traj.times[i],
            traj.sigma_z[i],
            traj.x_ratio[i],
            t_eff,
            traj.rel_entropy_to_eq[i],
            traj.s_von_neumann[i],
        ];
        if let Some((hot, cold)) = reference {
            row.extend([hot, cold]);
        }
        w.write_record(row.into_iter().map(format_float))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CycleDocument<'a> {
    #[serde(flatten)]
    pub report: &'a CycleReport,
    pub scenario: &'a ScenarioFile,
}

#[derive(Debug, Serialize)]
pub struct CarnotDocument<'a> {
    #[serde(flatten)]
    pub report: &'a CarnotReport,
    pub scenario: &'a ScenarioFile,
}

#[derive(Debug, Serialize)]
pub struct TwoStepDocument<'a> {
    #[serde(flatten)]
    pub report: &'a TwoStepReport,
    pub scenario: &'a ScenarioFile,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [2.6, 0.1 + 0.2, 1e-30, -3.5e20, 0.0, 12345.678901234567, 1.0 / 3.0] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(2.6), "2.6");
        assert_eq!(format_float(1e-30), "1e-30");
    }
}
