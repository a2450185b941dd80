//! Otto cycle built from two finite-time bath contacts and two instantaneous
//! adiabats, with the raw and cost-corrected energy ledgers and the Carnot
//! cycle that shares its endpoint states.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::bath::{lindblad_rates, BathSpec};
use crate::dynamics::{default_dt, propagator_for, IntegratorConfig, Propagator, Trajectory};
use crate::error::{require_positive, QottoError, Result};
use crate::quadrature::QuadConfig;
use crate::thermo::{binary_entropy, excited_population, log_odds, relative_entropy, TwoLevelState};

/// Default time resolution of the crossing bisection.
pub const DEFAULT_BISECT_TOL: f64 = 1e-13;

/// Bisection continues past `bisect_tol` until `|x − target|` falls below this.
const X_RESIDUAL_TOL: f64 = 1e-14;
const MAX_BISECTIONS: usize = 200;
/// Default contact horizon in units of the asymptotic relaxation time.
const RELAXATION_TIMES: f64 = 100.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingSelection {
    /// Earliest time at which `x` reaches the target.
    #[default]
    FirstCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingConfig {
    pub scan_dt: f64,
    pub bisect_tol: f64,
    pub selection: CrossingSelection,
}

impl CrossingConfig {
    pub fn new(scan_dt: f64, bisect_tol: f64) -> Result<Self> {
        require_positive("scan_dt", scan_dt)?;
        require_positive("bisect_tol", bisect_tol)?;
        if bisect_tol >= scan_dt {
            return Err(QottoError::invalid(
                "bisect_tol",
                format!("{bisect_tol} must be smaller than scan_dt = {scan_dt}"),
            ));
        }
        Ok(CrossingConfig { scan_dt, bisect_tol, selection: CrossingSelection::FirstCrossing })
    }
}

/// Located crossing of `x = ω/T_eff` through a target value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub time: f64,
    pub state: TwoLevelState,
    /// `x(time) − target`.
    pub residual: f64,
    /// `dx/dt` across the bracketing scan interval.
    pub slope: f64,
}

fn x_of_sigma(sigma_z: f64, t: f64) -> Result<f64> {
    if sigma_z >= 0.0 {
        return Err(QottoError::UndefinedTemperature(format!(
            "population inversion at t = {t} (<sigma_z> = {sigma_z})"
        )));
    }
    log_odds(0.5 * (1.0 + sigma_z))
}

fn substeps(h: f64, max_step: f64) -> usize {
    ((h / max_step) - 1e-9).ceil().max(1.0) as usize
}

/// Earliest `t > 0` at which `x(t)` reaches `target_x`, found by a scan at
/// `scan_dt` followed by bisection inside the first bracketing interval.
pub fn find_crossing_time<P: Propagator + ?Sized>(
    propagator: &P,
    initial: &TwoLevelState,
    target_x: f64,
    cfg: &CrossingConfig,
) -> Result<Crossing> {
    if initial.omega() != propagator.omega() {
        return Err(QottoError::invalid(
            "initial",
            format!("state has omega = {} but the contact uses {}", initial.omega(), propagator.omega()),
        ));
    }
    if !target_x.is_finite() {
        return Err(QottoError::invalid("target_x", format!("must be finite, got {target_x}")));
    }
    let start_x = initial.x_ratio()?;
    if start_x == target_x {
        return Err(QottoError::invalid("target_x", format!("equals the starting value {start_x}")));
    }
    let side = (start_x - target_x).signum();
    let horizon = propagator.horizon();
    let max_step = propagator.max_step();

    let mut t0 = 0.0;
    let mut s0 = initial.sigma_z();
    let mut x0 = start_x;
    let mut k = 0usize;
    let (t1, s1, x1) = loop {
        let t1 = ((k + 1) as f64 * cfg.scan_dt).min(horizon);
        let s1 = propagator.advance(t0, s0, t1 - t0, substeps(t1 - t0, max_step))?;
        let x1 = x_of_sigma(s1, t1)?;
        if (x1 - target_x) * side <= 0.0 {
            break (t1, s1, x1);
        }
        if t1 >= horizon {
            return Err(QottoError::NoCrossing { target: target_x, start: start_x, horizon });
        }
        t0 = t1;
        s0 = s1;
        x0 = x1;
        k += 1;
    };
    let slope = (x1 - x0) / (t1 - t0);

    // Every probe restarts from the scan point t0 so x(t) is one continuous function.
    let (mut lo, mut r_lo, mut s_lo) = (t0, x0 - target_x, s0);
    let (mut hi, mut r_hi, mut s_hi) = (t1, x1 - target_x, s1);
    for _ in 0..MAX_BISECTIONS {
        let settled = hi - lo <= cfg.bisect_tol && r_lo.abs().min(r_hi.abs()) <= X_RESIDUAL_TOL;
        if settled || r_hi == 0.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s_mid = propagator.advance(t0, s0, mid - t0, substeps(mid - t0, max_step))?;
        let r_mid = x_of_sigma(s_mid, mid)? - target_x;
        if r_mid * side > 0.0 {
            (lo, r_lo, s_lo) = (mid, r_mid, s_mid);
        } else {
            (hi, r_hi, s_hi) = (mid, r_mid, s_mid);
        }
    }
    let (time, residual, sigma_z) =
        if r_lo.abs() < r_hi.abs() && lo > 0.0 { (lo, r_lo, s_lo) } else { (hi, r_hi, s_hi) };
    debug!("crossing of x = {target_x} at t = {time} (residual {residual:e})");
    Ok(Crossing { time, state: TwoLevelState::from_sigma_z(propagator.omega(), sigma_z)?, residual, slope })
}

/// Two-stroke-pair Otto engine: hot contact at `omega_h`, cold contact at `omega_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OttoScenario {
    pub omega_h: f64,
    pub omega_c: f64,
    pub hot: BathSpec,
    pub cold: BathSpec,
    /// Integration step shared by both contacts.
    pub dt: f64,
    /// Contact horizon; `None` uses `100/a∞` of each contact.
    pub t_max: Option<f64>,
    pub quad: QuadConfig,
    pub crossing: CrossingConfig,
}

impl OttoScenario {
    /// Scenario with the default step `2π/(80ω_h)` and crossing settings.
    pub fn new(omega_h: f64, omega_c: f64, hot: BathSpec, cold: BathSpec) -> Result<Self> {
        let dt = default_dt(require_positive("omega_h", omega_h)?);
        let s = OttoScenario {
            omega_h,
            omega_c,
            hot,
            cold,
            dt,
            t_max: None,
            quad: QuadConfig::default(),
            crossing: CrossingConfig::new(dt, DEFAULT_BISECT_TOL)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("omega_h", self.omega_h)?;
        require_positive("omega_c", self.omega_c)?;
        if self.omega_c >= self.omega_h {
            return Err(QottoError::invalid(
                "omega_c",
                format!("omega_c = {} must be below omega_h = {}", self.omega_c, self.omega_h),
            ));
        }
        if self.cold.temperature > self.hot.temperature {
            return Err(QottoError::invalid(
                "cold_bath.temperature",
                format!("T_c = {} exceeds T_h = {}", self.cold.temperature, self.hot.temperature),
            ));
        }
        CrossingConfig::new(self.crossing.scan_dt, self.crossing.bisect_tol)?;
        self.contact_config(self.omega_h, &self.hot)?;
        self.contact_config(self.omega_c, &self.cold)?;
        Ok(())
    }

    /// `ω_h/T_h`, the target of the cold contact.
    pub fn hot_x(&self) -> f64 {
        self.omega_h / self.hot.temperature
    }

    /// `ω_c/T_c`, the target of the hot contact.
    pub fn cold_x(&self) -> f64 {
        self.omega_c / self.cold.temperature
    }

    /// `ω_h/T_h ≥ ω_c/T_c`.
    pub fn engine_condition_met(&self) -> bool {
        self.hot_x() >= self.cold_x()
    }

    pub fn contact_config(&self, omega: f64, bath: &BathSpec) -> Result<IntegratorConfig> {
        let t_max = match self.t_max {
            Some(t) => t,
            None => RELAXATION_TIMES / lindblad_rates(omega, bath).0,
        };
        IntegratorConfig::new(self.dt, t_max, 1, 1e-6, self.quad, self.omega_h)
    }

    pub fn hot_propagator(&self) -> Result<Box<dyn Propagator>> {
        propagator_for(self.omega_h, &self.hot, self.contact_config(self.omega_h, &self.hot)?)
    }

    pub fn cold_propagator(&self) -> Result<Box<dyn Propagator>> {
        propagator_for(self.omega_c, &self.cold, self.contact_config(self.omega_c, &self.cold)?)
    }

    fn populations(&self) -> (f64, f64) {
        (excited_population(self.hot_x()), excited_population(self.cold_x()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarnotReport {
    pub q_h_c: f64,
    pub q_c_c: f64,
    pub w_c: f64,
    pub omega_h_prime: f64,
    pub omega_c_prime: f64,
    pub k_h: f64,
    pub k_c: f64,
    pub eta_c: f64,
    /// `Q_h^C` evaluated from the log-odds `k_h`, `k_c`.
    pub q_h_c_k_form: f64,
}

/// Carnot cycle between the same pair of equilibrium states as the Otto cycle.
pub fn carnot_cycle(s: &OttoScenario) -> Result<CarnotReport> {
    s.validate()?;
    let (t_h, t_c) = (s.hot.temperature, s.cold.temperature);
    let (p_h, p_c) = s.populations();
    let delta_s_v = binary_entropy(p_c) - binary_entropy(p_h);
    let k_h = log_odds(p_h)?;
    let k_c = log_odds(p_c)?;
    let q_h_c = t_h * delta_s_v;
    let q_c_c = -t_c * delta_s_v;
    let q_h_c_k_form = (s.omega_h / k_h) * (p_c * k_c - p_h * k_h + ((-p_h).ln_1p() - (-p_c).ln_1p()));
    Ok(CarnotReport {
        q_h_c,
        q_c_c,
        w_c: q_h_c + q_c_c,
        omega_h_prime: s.omega_c * t_h / t_c,
        omega_c_prime: s.omega_h * t_c / t_h,
        k_h,
        k_c,
        eta_c: 1.0 - t_c / t_h,
        q_h_c_k_form,
    })
}

/// Energies are positive when absorbed by the working medium (heats) or
/// delivered by it (work).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub q_h: Option<f64>,
    pub q_c: Option<f64>,
    pub w: Option<f64>,
    pub eta: Option<f64>,
    pub cost_h: f64,
    pub cost_c: f64,
    pub q_h_tilde: Option<f64>,
    pub q_c_tilde: Option<f64>,
    pub w_tilde: Option<f64>,
    pub eta_tilde: Option<f64>,
    pub delta_s_v: f64,
    pub eta_carnot: f64,
    pub engine_condition_met: bool,
    pub carnot: CarnotReport,
    /// `1 − ω_c/ω_h`.
    pub eta_otto: f64,
    /// `1 − sqrt(T_c T_c′ / (T_h T_h′))` from the crossing temperatures.
    pub eta_from_temperatures: Option<f64>,
    /// `−Q_h/T_h + ΔS_v` after the hot contact.
    pub delta_s_tot_hot: Option<f64>,
    /// Same with the preparation cost removed from `Q_h`.
    pub delta_s_tot_hot_corrected: Option<f64>,
    /// Effective temperature reached at the end of the hot contact, `ω_h/x(τ₁)`.
    pub t_h_prime: Option<f64>,
    /// Effective temperature reached at the end of the cold contact, `ω_c/x(τ₂)`.
    pub t_c_prime: Option<f64>,
    /// Effective temperature after the first adiabat, `ω_c/x(τ₁)`.
    pub t_h_double_prime: Option<f64>,
    /// Effective temperature after the second adiabat, `ω_h/x(τ₂)`.
    pub t_c_double_prime: Option<f64>,
    pub crossing_residual_hot: Option<f64>,
    pub crossing_residual_cold: Option<f64>,
    /// Whether the cold contact started from the exact cold equilibrium state.
    pub cold_start_snapped: Option<bool>,
}

impl CycleReport {
    /// Report with every crossing-dependent field left empty.
    pub fn outline(s: &OttoScenario) -> Result<Self> {
        let carnot = carnot_cycle(s)?;
        let (t_h, t_c) = (s.hot.temperature, s.cold.temperature);
        let (p_h, p_c) = s.populations();
        let rho_h = TwoLevelState::diagonal(s.omega_h, p_h)?;
        let rho_c = TwoLevelState::diagonal(s.omega_h, p_c)?;
        Ok(CycleReport {
            tau1: None,
            tau2: None,
            q_h: None,
            q_c: None,
            w: None,
            eta: None,
            cost_h: t_h * relative_entropy(&rho_c, &rho_h)?,
            cost_c: t_c * relative_entropy(&rho_h, &rho_c)?,
            q_h_tilde: None,
            q_c_tilde: None,
            w_tilde: None,
            eta_tilde: None,
            delta_s_v: binary_entropy(p_c) - binary_entropy(p_h),
            eta_carnot: 1.0 - t_c / t_h,
            engine_condition_met: s.engine_condition_met(),
            carnot,
            eta_otto: 1.0 - s.omega_c / s.omega_h,
            eta_from_temperatures: None,
            delta_s_tot_hot: None,
            delta_s_tot_hot_corrected: None,
            t_h_prime: None,
            t_c_prime: None,
            t_h_double_prime: None,
            t_c_double_prime: None,
            crossing_residual_hot: None,
            crossing_residual_cold: None,
            cold_start_snapped: None,
        })
    }

    /// `W − (Q_h + Q_c)`, when the cycle completed.
    pub fn first_law_residual(&self) -> Option<f64> {
        Some(self.w? - (self.q_h? + self.q_c?))
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Runs the four strokes: hot contact from the hot equilibrium state until
/// `x = ω_c/T_c`, adiabat to `ω_c`, cold contact from the cold equilibrium
/// state until `x = ω_h/T_h`, adiabat back to `ω_h`.
pub fn run_otto_cycle(s: &OttoScenario) -> Result<CycleReport> {
    let mut report = CycleReport::outline(s)?;
    let (t_h, t_c) = (s.hot.temperature, s.cold.temperature);
    let (omega_h, omega_c) = (s.omega_h, s.omega_c);
    let a = TwoLevelState::thermal(omega_h, t_h)?;
    let cold_eq = TwoLevelState::thermal(omega_c, t_c)?;

    let (tau1, tau2, b, c, d, residuals, snapped) = if s.hot_x() == s.cold_x() {
        // Both contacts start at their own targets: nothing moves.
        (0.0, 0.0, a, cold_eq, cold_eq.with_omega(omega_h)?, (0.0, 0.0), true)
    } else {
        let hot = find_crossing_time(&*s.hot_propagator()?, &a, s.cold_x(), &s.crossing)?;
        let b = hot.state;
        let snap_window = 10.0 * s.crossing.bisect_tol * hot.slope.abs();
        let snapped = hot.residual.abs() <= snap_window;
        let c = if snapped {
            debug!("cold contact starts from equilibrium (hot residual {:e})", hot.residual);
            cold_eq
        } else {
            warn!(
                "hot crossing residual {:e} exceeds {snap_window:e}; cold contact starts from the propagated state",
                hot.residual
            );
            b.with_omega(omega_c)?
        };
        let cold = find_crossing_time(&*s.cold_propagator()?, &c, s.hot_x(), &s.crossing)?;
        let d = cold.state.with_omega(omega_h)?;
        (hot.time, cold.time, b, c, d, (hot.residual, cold.residual), snapped)
    };

    let w1 = b.energy_at(omega_h) - b.energy_at(omega_c);
    let w2 = d.energy_at(omega_c) - d.energy_at(omega_h);
    let q_h = b.energy_at(omega_h) - a.energy_at(omega_h);
    let q_c = d.energy_at(omega_c) - c.energy_at(omega_c);
    let w = w1 + w2;

    let canonical = (omega_h - omega_c) * (b.p_excited() - d.p_excited());
    if (canonical - w).abs() > 1e-9 {
        warn!("work {w} disagrees with population form {canonical}");
    }

    let q_h_tilde = q_h - report.cost_h;
    let q_c_tilde = q_c - report.cost_c;
    let w_tilde = q_h_tilde + q_c_tilde;
    let x_b = b.x_ratio()?;
    let x_d = d.x_ratio()?;
    let t_h_prime = omega_h / x_b;
    let t_c_prime = omega_c / x_d;

    report.tau1 = Some(tau1);
    report.tau2 = Some(tau2);
    report.q_h = Some(q_h);
    report.q_c = Some(q_c);
    report.w = Some(w);
    report.eta = ratio(w, q_h);
    report.q_h_tilde = Some(q_h_tilde);
    report.q_c_tilde = Some(q_c_tilde);
    report.w_tilde = Some(w_tilde);
    report.eta_tilde = ratio(w_tilde, q_h_tilde);
    report.eta_from_temperatures = Some(1.0 - (t_c * t_c_prime / (t_h * t_h_prime)).sqrt());
    report.delta_s_tot_hot = Some(-q_h / t_h + report.delta_s_v);
    report.delta_s_tot_hot_corrected = Some(-q_h_tilde / t_h + report.delta_s_v);
    report.t_h_prime = Some(t_h_prime);
    report.t_c_prime = Some(t_c_prime);
    report.t_h_double_prime = Some(omega_c / x_b);
    report.t_c_double_prime = Some(omega_h / x_d);
    report.crossing_residual_hot = Some(residuals.0);
    report.crossing_residual_cold = Some(residuals.1);
    report.cold_start_snapped = Some(snapped);
    Ok(report)
}

/// Steady state of a cycle with fixed contact durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCycleReport {
    pub tau1: f64,
    pub tau2: f64,
    /// `<σz>` at the end of the hot contact.
    pub sigma_z_hot: f64,
    /// `<σz>` at the end of the cold contact.
    pub sigma_z_cold: f64,
    pub q_h: f64,
    pub q_c: f64,
    pub w: f64,
}

/// Each contact acts on `<σz>` as an affine map `σ ↦ φσ + ψ` (the bath is
/// fresh at every contact), so the limit cycle follows from the two maps.
pub fn run_periodic_cycle(s: &OttoScenario, tau1: f64, tau2: f64) -> Result<PeriodicCycleReport> {
    require_positive("tau1", tau1)?;
    require_positive("tau2", tau2)?;
    let affine = |p: &dyn Propagator, tau: f64| -> Result<(f64, f64)> {
        let n = substeps(tau, p.max_step());
        let at_zero = p.advance(0.0, 0.0, tau, n)?;
        let at_half = p.advance(0.0, -0.5, tau, n)?;
        Ok((2.0 * (at_zero - at_half), at_zero))
    };
    let (phi_h, psi_h) = affine(&*s.hot_propagator()?, tau1)?;
    let (phi_c, psi_c) = affine(&*s.cold_propagator()?, tau2)?;
    let denom = 1.0 - phi_h * phi_c;
    if denom == 0.0 {
        return Err(QottoError::invalid("tau", "contacts do not relax; no limit cycle"));
    }
    let sigma_hot = (phi_h * psi_c + psi_h) / denom;
    let sigma_cold = phi_c * sigma_hot + psi_c;
    let dp = 0.5 * (sigma_hot - sigma_cold);
    Ok(PeriodicCycleReport {
        tau1,
        tau2,
        sigma_z_hot: sigma_hot,
        sigma_z_cold: sigma_cold,
        q_h: s.omega_h * dp,
        q_c: -s.omega_c * dp,
        w: (s.omega_h - s.omega_c) * dp,
    })
}

/// Splits `E(final) − E(initial)` into `(T ΔD, T ΔS_v)`, where `D` is the
/// relative entropy to the equilibrium state at `bath_t`.
pub fn entropy_decomposition(
    initial: &TwoLevelState,
    fin: &TwoLevelState,
    bath_t: f64,
) -> Result<(f64, f64)> {
    require_positive("bath_t", bath_t)?;
    if initial.omega() != fin.omega() {
        return Err(QottoError::invalid(
            "final",
            format!("omega {} differs from initial omega {}", fin.omega(), initial.omega()),
        ));
    }
    if !initial.is_diagonal() || !fin.is_diagonal() {
        return Err(QottoError::invalid("initial", "states must be diagonal"));
    }
    let eq = TwoLevelState::thermal(initial.omega(), bath_t)?;
    let d = relative_entropy(fin, &eq)? - relative_entropy(initial, &eq)?;
    let s = fin.von_neumann_entropy() - initial.von_neumann_entropy();
    Ok((bath_t * d, bath_t * s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStepReport {
    /// Spacing at which the target populations are thermal.
    pub omega_in: f64,
    #[serde(rename = "delta_F")]
    pub delta_f: f64,
    pub isothermal_heat: f64,
    pub isothermal_work: f64,
    pub adiabatic_work: f64,
    pub total_work: f64,
}

/// `ln(2 cosh(x/2))`.
fn log_partition(x: f64) -> f64 {
    0.5 * x.abs() + (-x.abs()).exp().ln_1p()
}

/// Prepares `target` from the equilibrium state `start` by a quasi-static
/// isothermal change of the spacing to `ω_in`, then a sudden return to `ω`.
/// Work is counted as done on the system.
pub fn two_step_protocol(
    start: &TwoLevelState,
    target: &TwoLevelState,
    temperature: f64,
) -> Result<TwoStepReport> {
    require_positive("temperature", temperature)?;
    let omega = start.omega();
    if target.omega() != omega {
        return Err(QottoError::invalid(
            "target",
            format!("omega {} differs from start omega {omega}", target.omega()),
        ));
    }
    if !start.is_diagonal() || !target.is_diagonal() {
        return Err(QottoError::invalid("target", "states must be diagonal"));
    }
    let x_start = omega / temperature;
    if (start.x_ratio()? - x_start).abs() > 1e-9 * x_start.max(1.0) {
        return Err(QottoError::invalid(
            "start",
            format!("not the equilibrium state at omega = {omega}, T = {temperature}"),
        ));
    }
    let x_target = target.x_ratio()?;
    if x_target <= 0.0 {
        return Err(QottoError::invalid(
            "target",
            format!("p_excited = {} is not thermal at positive spacing", target.p_excited()),
        ));
    }
    let (omega_in, x_in) = if target.p_excited() == start.p_excited() {
        (omega, x_start)
    } else {
        (temperature * x_target, x_target)
    };
    let delta_f = temperature * (log_partition(x_start) - log_partition(x_in));
    Ok(TwoStepReport {
        omega_in,
        delta_f,
        isothermal_heat: temperature * (target.von_neumann_entropy() - start.von_neumann_entropy()),
        isothermal_work: delta_f,
        adiabatic_work: target.energy_at(omega) - target.energy_at(omega_in),
        total_work: temperature * relative_entropy(target, start)?,
    })
}

/// `max_t T·S(ρ(t)||ρ_eq)`, the largest work extractable along the trajectory.
pub fn nm_lower_bound(traj: &Trajectory, bath_t: f64) -> f64 {
    traj.rel_entropy_to_eq.iter().fold(0.0, |m, &d| m.max(bath_t * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{DynamicsModel, SpectralDensity};
    use crate::dynamics::{evolve_markovian, MarkovPropagator, RatePropagator};

    const P25: f64 = 0.075_858_180_021_243_55;
    const P26: f64 = 0.069_138_420_343_346_81;
    const COST_H: f64 = 6.815_513_544_890_936e-4;
    const COST_C: f64 = 3.312_002_905_451_277e-4;
    const DELTA_S_V: f64 = 0.017_130_599_485_286_975;

    fn bath(t: f64, lambda: f64, model: DynamicsModel) -> BathSpec {
        BathSpec::new(t, SpectralDensity::new(0.1, lambda).unwrap(), model).unwrap()
    }

    fn reference(model: DynamicsModel) -> OttoScenario {
        OttoScenario::new(5.2, 2.5, bath(2.0, 20.8, model), bath(1.0, 10.0, model)).unwrap()
    }

    #[test]
    fn scenario_validation() {
        let hot = bath(2.0, 20.8, DynamicsModel::Tcl2);
        let cold = bath(1.0, 10.0, DynamicsModel::Tcl2);
        assert!(OttoScenario::new(2.5, 5.2, hot, cold).is_err());
        assert!(OttoScenario::new(5.2, 2.5, cold, hot).is_err());
        assert!(CrossingConfig::new(0.01, 0.01).is_err());
        let s = reference(DynamicsModel::Tcl2);
        assert!(s.engine_condition_met());
        assert_eq!(s.crossing.scan_dt, s.dt);
    }

    #[test]
    fn carnot_numbers() {
        let c = carnot_cycle(&reference(DynamicsModel::Tcl2)).unwrap();
        assert!((c.q_h_c - 2.0 * DELTA_S_V).abs() < 1e-13);
        assert!((c.w_c - DELTA_S_V).abs() < 1e-13);
        assert!((c.q_h_c - c.q_h_c_k_form).abs() < 1e-12);
        assert!((c.eta_c - 0.5).abs() < 1e-15);
        assert!((c.omega_h_prime - 5.0).abs() < 1e-15);
        assert!((c.omega_c_prime - 2.6).abs() < 1e-15);
        assert!((c.k_h - 2.6).abs() < 1e-13 && (c.k_c - 2.5).abs() < 1e-13);
    }

    #[test]
    fn carnot_at_equal_temperatures_does_no_work() {
        let b = bath(1.0, 10.0, DynamicsModel::Tcl2);
        let c = carnot_cycle(&OttoScenario::new(2.6, 2.5, b, b).unwrap()).unwrap();
        assert_eq!(c.w_c, 0.0);
        assert_eq!(c.eta_c, 0.0);
    }

    #[test]
    fn outline_costs() {
        let r = CycleReport::outline(&reference(DynamicsModel::Tcl2)).unwrap();
        assert!((r.cost_h - COST_H).abs() < 1e-16);
        assert!((r.cost_c - COST_C).abs() < 1e-16);
        assert!((r.delta_s_v - DELTA_S_V).abs() < 1e-15);
        assert!(r.w.is_none() && r.first_law_residual().is_none());
    }

    #[test]
    fn reference_cycle() {
        let r = run_otto_cycle(&reference(DynamicsModel::Tcl2)).unwrap();
        let w_exact = 2.7 * (P25 - P26);
        assert!((r.w.unwrap() - w_exact).abs() < 1e-12);
        assert!((r.q_h.unwrap() - 5.2 * (P25 - P26)).abs() < 1e-12);
        assert!(r.first_law_residual().unwrap().abs() < 1e-12);
        assert!((r.eta.unwrap() - (1.0 - 2.5 / 5.2)).abs() < 1e-9);
        assert!((r.eta_tilde.unwrap() - 0.5).abs() < 1e-12);
        assert!((r.w_tilde.unwrap() - DELTA_S_V).abs() < 1e-12);
        assert!(r.delta_s_tot_hot_corrected.unwrap().abs() < 1e-12);
        assert!((r.eta_from_temperatures.unwrap() - r.eta_otto).abs() < 1e-9);
        assert!(r.tau1.unwrap() > 0.0 && r.tau2.unwrap() > 0.0);
        assert_eq!(r.cold_start_snapped, Some(true));
    }

    #[test]
    fn degenerate_ratio_gives_zero_work() {
        let hot = bath(2.0, 20.8, DynamicsModel::Tcl2);
        let cold = bath(1.0, 10.0, DynamicsModel::Tcl2);
        let r = run_otto_cycle(&OttoScenario::new(5.0, 2.5, hot, cold).unwrap()).unwrap();
        assert_eq!(r.w, Some(0.0));
        assert_eq!(r.tau1, Some(0.0));
        assert_eq!(r.eta, None);
    }

    #[test]
    fn markovian_first_crossing_never_happens() {
        let err = run_otto_cycle(&reference(DynamicsModel::Lindblad)).unwrap_err();
        assert!(matches!(err, QottoError::NoCrossing { .. }));
    }

    #[test]
    fn crossing_rejects_trivial_target() {
        let s = reference(DynamicsModel::Tcl2);
        let eq = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let err = find_crossing_time(&*s.hot_propagator().unwrap(), &eq, 2.6, &s.crossing).unwrap_err();
        assert!(matches!(err, QottoError::InvalidParameter { .. }));
    }

    #[test]
    fn markovian_crossing_toward_equilibrium() {
        let s = reference(DynamicsModel::Lindblad);
        let cfg = s.contact_config(5.2, &s.hot).unwrap();
        let prop = MarkovPropagator::new(5.2, s.hot, cfg);
        let init = TwoLevelState::with_x_ratio(5.2, 2.0).unwrap();
        let c = find_crossing_time(&prop, &init, 2.5, &s.crossing).unwrap();
        // x(t) = log-odds of σ_eq + (σ₀ − σ_eq)e^{−at}; invert for the time.
        let (a, b) = lindblad_rates(5.2, &s.hot);
        let target = 2.0 * excited_population(2.5) - 1.0;
        let eq = -b / a;
        let exact = ((init.sigma_z() - eq) / (target - eq)).ln() / a;
        assert!((c.time - exact).abs() < 1e-11, "{} vs {exact}", c.time);
        assert!(c.residual.abs() <= 1e-14);
    }

    #[test]
    fn inversion_is_reported() {
        let s = reference(DynamicsModel::Tcl2);
        let cfg = s.contact_config(5.2, &s.hot).unwrap();
        let prop = RatePropagator::new(
            crate::dynamics::ConstantRates(crate::dynamics::Rates {
                decay_a: 1.0,
                drift_b: -0.9,
                damping: num_complex::Complex64::new(0.5, 0.0),
            }),
            5.2,
            s.hot,
            cfg,
        );
        let init = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let err = find_crossing_time(&prop, &init, 3.0, &s.crossing).unwrap_err();
        assert!(matches!(err, QottoError::UndefinedTemperature(_)));
    }

    #[test]
    fn markovian_periodic_cycle_at_equal_temperature() {
        let b = bath(1.0, 10.0, DynamicsModel::Lindblad);
        let s = OttoScenario::new(2.6, 2.5, b, b).unwrap();
        for (t1, t2) in [(0.1, 0.1), (0.5, 2.0), (3.0, 0.2)] {
            let r = run_periodic_cycle(&s, t1, t2).unwrap();
            assert!(r.w <= 0.0, "{r:?}");
            assert!((r.w - (r.q_h + r.q_c)).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_cycle_matches_direct_iteration() {
        let s = reference(DynamicsModel::Lindblad);
        let (hot, cold) = (s.hot_propagator().unwrap(), s.cold_propagator().unwrap());
        let mut sigma = -0.3;
        for _ in 0..200 {
            sigma = hot.advance(0.0, sigma, 0.4, 1).unwrap();
            sigma = cold.advance(0.0, sigma, 0.7, 1).unwrap();
        }
        let r = run_periodic_cycle(&s, 0.4, 0.7).unwrap();
        assert!((r.sigma_z_cold - sigma).abs() < 1e-12);
    }

    #[test]
    fn entropy_decomposition_cases() {
        let init = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let fin = TwoLevelState::diagonal(5.2, P25).unwrap();
        let (td, ts) = entropy_decomposition(&init, &fin, 2.0).unwrap();
        assert!((td - COST_H).abs() < 1e-15);
        assert!((ts - 2.0 * DELTA_S_V).abs() < 1e-14);
        assert!((td + ts - (fin.mean_energy() - init.mean_energy())).abs() < 1e-15);

        let other = TwoLevelState::diagonal(5.2, 0.3).unwrap();
        let (td, ts) = entropy_decomposition(&other, &init, 2.0).unwrap();
        assert!((td + ts - (init.mean_energy() - other.mean_energy())).abs() < 1e-14);
        assert_eq!(entropy_decomposition(&other, &other, 2.0).unwrap(), (0.0, 0.0));
        let wrong = TwoLevelState::diagonal(2.5, 0.3).unwrap();
        assert!(entropy_decomposition(&other, &wrong, 2.0).is_err());
    }

    #[test]
    fn two_step_examples() {
        let start = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let target = TwoLevelState::diagonal(5.2, P25).unwrap();
        let r = two_step_protocol(&start, &target, 2.0).unwrap();
        assert!((r.omega_in - 5.0).abs() < 1e-13);
        assert!((r.total_work - COST_H).abs() < 1e-15);
        assert!((r.isothermal_work + r.adiabatic_work - r.total_work).abs() < 1e-12);
        assert!((r.isothermal_heat - 2.0 * DELTA_S_V).abs() < 1e-14);

        let z = two_step_protocol(&start, &start, 2.0).unwrap();
        assert_eq!(
            [z.delta_f, z.isothermal_heat, z.isothermal_work, z.adiabatic_work, z.total_work],
            [0.0; 5]
        );
        let inverted = TwoLevelState::diagonal(5.2, 0.7).unwrap();
        assert!(two_step_protocol(&start, &inverted, 2.0).is_err());
        assert!(two_step_protocol(&target, &start, 2.0).is_err());
    }

    #[test]
    fn lower_bound_is_linear_in_temperature() {
        let b = bath(2.0, 20.8, DynamicsModel::Lindblad);
        let init = TwoLevelState::diagonal(5.2, 0.2).unwrap();
        let cfg = IntegratorConfig::new(default_dt(5.2), 2.0, 1, 1e-6, QuadConfig::default(), 5.2).unwrap();
        let traj = evolve_markovian(&init, &b, 5.2, &cfg).unwrap();
        let bound = nm_lower_bound(&traj, 2.0);
        assert!(bound > 0.0);
        assert_eq!(nm_lower_bound(&traj, 4.0), 2.0 * bound);
        let eq = TwoLevelState::thermal(5.2, 2.0).unwrap();
        assert!(nm_lower_bound(&evolve_markovian(&eq, &b, 5.2, &cfg).unwrap(), 2.0) < 1e-15);
    }
}
