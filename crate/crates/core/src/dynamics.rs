//! Time evolution of the two-level state during a bath contact.
//!
//! `<σz>` obeys the linear equation `d<σz>/dt = −a(t)<σz> − b(t)` and the
//! coherence `d<σ->/dt = −iω<σ-> − g(t)<σ->` with `g = Γ₁ + Γ₂*`. Under TCL2
//! the rates come from [`Tcl2Kernel`]; the Lindblad reference freezes them at
//! their asymptotic values, where the equations have closed-form solutions.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{lindblad_rates, BathSpec, DynamicsModel, Tcl2Coefficients, Tcl2Kernel};
use crate::error::{require_positive, QottoError, Result};
use crate::quadrature::QuadConfig;
use crate::thermo::{log_odds, relative_entropy, TwoLevelState};

/// `|<σz>|` may exceed 1 by this much before the step is reported as a positivity breach.
pub const POSITIVITY_SLACK: f64 = 1e-9;

/// Default steps per period of the system frequency.
const STEPS_PER_PERIOD: f64 = 80.0;
/// Coarsest step accepted, in steps per period of the largest frequency.
const MIN_STEPS_PER_PERIOD: f64 = 40.0;
/// Default horizon in units of the asymptotic relaxation time.
const RELAXATION_TIMES: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Keep every `sample_every`-th step (the final step is always kept).
    pub sample_every: usize,
    /// Agreement required between the stepper and the integrating-factor oracle.
    pub oracle_tol: f64,
    pub quad: QuadConfig,
}

impl IntegratorConfig {
    /// Validates `dt` against the fastest frequency the configuration will see.
    pub fn new(
        dt: f64,
        t_max: f64,
        sample_every: usize,
        oracle_tol: f64,
        quad: QuadConfig,
        omega_max: f64,
    ) -> Result<Self> {
        require_positive("dt", dt)?;
        require_positive("t_max", t_max)?;
        require_positive("oracle_tol", oracle_tol)?;
        require_positive("omega_max", omega_max)?;
        if t_max < dt {
            return Err(QottoError::invalid("t_max", format!("{t_max} is shorter than dt = {dt}")));
        }
        let limit = 2.0 * PI / (MIN_STEPS_PER_PERIOD * omega_max);
        if dt > limit {
            return Err(QottoError::invalid(
                "dt",
                format!("{dt} under-resolves omega = {omega_max}; must be <= {limit}"),
            ));
        }
        if sample_every == 0 {
            return Err(QottoError::invalid("sample_every", "must be at least 1"));
        }
        Ok(IntegratorConfig { dt, t_max, sample_every, oracle_tol, quad })
    }

    /// `dt = 2π/(80ω)`, `t_max = 100/a∞`.
    pub fn for_contact(omega_a: f64, bath: &BathSpec, quad: QuadConfig) -> Result<Self> {
        let (a_inf, _) = lindblad_rates(require_positive("omega_a", omega_a)?, bath);
        Self::new(default_dt(omega_a), RELAXATION_TIMES / a_inf, 1, 1e-6, quad, omega_a)
    }

    /// Same step with a new horizon; a horizon shorter than `dt` becomes a single step.
    pub fn with_horizon(&self, t_max: f64) -> Result<Self> {
        require_positive("t_max", t_max)?;
        Ok(IntegratorConfig { t_max, dt: self.dt.min(t_max), ..*self })
    }

    /// Step count and the time of step `k`; the last step is shortened to land on `t_max`.
    fn grid(&self) -> (usize, impl Fn(usize) -> f64 + '_) {
        let n = ((self.t_max / self.dt) - 1e-9).ceil().max(1.0) as usize;
        let time = move |k: usize| if k == n { self.t_max } else { k as f64 * self.dt };
        (n, time)
    }
}

pub fn default_dt(omega_a: f64) -> f64 {
    2.0 * PI / (STEPS_PER_PERIOD * omega_a)
}

/// Sampled evolution along one bath contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub omega: f64,
    pub bath_temperature: f64,
    pub times: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub coherence: Vec<Complex64>,
    pub x_ratio: Vec<f64>,
    /// `D(t) = S(ρ(t)||ρ_eq)`.
    pub rel_entropy_to_eq: Vec<f64>,
    pub s_von_neumann: Vec<f64>,
}

impl Trajectory {
    pub fn from_samples(
        omega: f64,
        bath_temperature: f64,
        samples: impl IntoIterator<Item = (f64, f64, Complex64)>,
    ) -> Result<Self> {
        let equilibrium = TwoLevelState::thermal(omega, bath_temperature)?;
        let mut traj = Trajectory {
            omega,
            bath_temperature,
            times: Vec::new(),
            sigma_z: Vec::new(),
            coherence: Vec::new(),
            x_ratio: Vec::new(),
            rel_entropy_to_eq: Vec::new(),
            s_von_neumann: Vec::new(),
        };
        for (t, sigma_z, coherence) in samples {
            if let Some(&last) = traj.times.last() {
                if t.is_nan() || t <= last {
                    return Err(QottoError::invalid(
                        "times",
                        format!("sample times must increase ({t} after {last})"),
                    ));
                }
            }
            let p = 0.5 * (1.0 + sigma_z);
            let state = TwoLevelState::new(omega, p, coherence)?;
            traj.times.push(t);
            traj.sigma_z.push(sigma_z);
            traj.coherence.push(coherence);
            traj.x_ratio.push(log_odds(p)?);
            traj.rel_entropy_to_eq.push(relative_entropy(&state, &equilibrium)?);
            traj.s_von_neumann.push(state.von_neumann_entropy());
        }
        Ok(traj)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> Result<TwoLevelState> {
        TwoLevelState::new(self.omega, 0.5 * (1.0 + self.sigma_z[i]), self.coherence[i])
    }

    pub fn last_state(&self) -> Result<TwoLevelState> {
        self.state(self.len() - 1)
    }

    /// `T_eff = ω / x` per sample.
    pub fn effective_temperatures(&self) -> Vec<f64> {
        self.x_ratio.iter().map(|x| self.omega / x).collect()
    }
}

/// Instantaneous rates entering the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub decay_a: f64,
    pub drift_b: f64,
    /// `Γ₁ + Γ₂*`.
    pub damping: Complex64,
}

impl From<Tcl2Coefficients> for Rates {
    fn from(c: Tcl2Coefficients) -> Self {
        Rates { decay_a: c.decay_a, drift_b: c.drift_b, damping: c.coherence_damping() }
    }
}

/// Time-dependent rates for the `<σz>` and `<σ->` equations.
pub trait RateSource {
    fn rates(&self, t: f64) -> Result<Rates>;
}

impl RateSource for Tcl2Kernel {
    fn rates(&self, t: f64) -> Result<Rates> {
        self.coefficients(t).map(Rates::from)
    }
}

/// Time-independent rates; reproduces the Lindblad reference when fed its asymptotic values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRates(pub Rates);

impl RateSource for ConstantRates {
    fn rates(&self, _t: f64) -> Result<Rates> {
        Ok(self.0)
    }
}

/// Remembers the last few evaluations so RK4 stages and the bisection
/// of a crossing search reuse rates at repeated times.
#[derive(Debug)]
pub struct CachedRates<R> {
    inner: R,
    recent: RefCell<Vec<(u64, Rates)>>,
}

const CACHE_SLOTS: usize = 4;

impl<R: RateSource> CachedRates<R> {
    pub fn new(inner: R) -> Self {
        CachedRates { inner, recent: RefCell::new(Vec::with_capacity(CACHE_SLOTS)) }
    }

    pub fn inner(&self) -> &R {
        &self.inner
    }
}

impl<R: RateSource> RateSource for CachedRates<R> {
    fn rates(&self, t: f64) -> Result<Rates> {
        let key = t.to_bits();
        if let Some(&(_, r)) = self.recent.borrow().iter().find(|(k, _)| *k == key) {
            return Ok(r);
        }
        let r = self.inner.rates(t)?;
        let mut recent = self.recent.borrow_mut();
        if recent.len() == CACHE_SLOTS {
            recent.remove(0);
        }
        recent.push((key, r));
        Ok(r)
    }
}

/// One classical RK4 step for `<σz>` and the rotating-frame coherence `u`,
/// where `<σ-> = e^{−iωt} u`. `start` holds the rates at `t`.
fn rk4_step<R: RateSource>(
    source: &R,
    t: f64,
    sigma_z: f64,
    u: Complex64,
    h: f64,
    start: Rates,
) -> Result<(f64, Complex64, Rates)> {
    let mid = source.rates(t + 0.5 * h)?;
    let end = source.rates(t + h)?;
    let fz = |r: &Rates, s: f64| -r.decay_a * s - r.drift_b;
    let fu = |r: &Rates, v: Complex64| -r.damping * v;

    let k1 = fz(&start, sigma_z);
    let k2 = fz(&mid, sigma_z + 0.5 * h * k1);
    let k3 = fz(&mid, sigma_z + 0.5 * h * k2);
    let k4 = fz(&end, sigma_z + h * k3);
    let sigma_next = sigma_z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    let l1 = fu(&start, u);
    let l2 = fu(&mid, u + 0.5 * h * l1);
    let l3 = fu(&mid, u + 0.5 * h * l2);
    let l4 = fu(&end, u + h * l3);
    let u_next = u + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);

    Ok((sigma_next, u_next, end))
}

fn check_positivity(t: f64, sigma_z: f64, omega: f64, bath: &BathSpec) -> Result<()> {
    if sigma_z.is_finite() && sigma_z.abs() <= 1.0 + POSITIVITY_SLACK {
        Ok(())
    } else {
        Err(QottoError::PositivityBreach {
            t,
            sigma_z,
            omega,
            temperature: bath.temperature,
            gamma: bath.spectral.gamma,
            lambda: bath.spectral.lambda,
        })
    }
}

fn rotate(u: Complex64, omega: f64, t: f64) -> Complex64 {
    u * Complex64::from_polar(1.0, -omega * t)
}

fn check_contact(initial: &TwoLevelState, omega_a: f64) -> Result<()> {
    if initial.omega() != omega_a {
        return Err(QottoError::invalid(
            "omega_a",
            format!("state has omega = {} but contact uses {omega_a}", initial.omega()),
        ));
    }
    Ok(())
}

/// Fixed-step RK4 evolution under arbitrary rates.
pub fn evolve_with_rates<R: RateSource>(
    source: &R,
    initial: &TwoLevelState,
    bath: &BathSpec,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let omega = initial.omega();
    let (n, time) = cfg.grid();
    let mut sigma_z = initial.sigma_z();
    let mut u = initial.coherence();
    let mut rates = source.rates(0.0)?;
    let mut samples = vec![(0.0, sigma_z, u)];
    for k in 0..n {
        let (t0, t1) = (time(k), time(k + 1));
        let (s, v, end) = rk4_step(source, t0, sigma_z, u, t1 - t0, rates)?;
        check_positivity(t1, s, omega, bath)?;
        sigma_z = s;
        u = v;
        rates = end;
        if (k + 1) % cfg.sample_every == 0 || k + 1 == n {
            samples.push((t1, sigma_z, rotate(u, omega, t1)));
        }
    }
    Trajectory::from_samples(omega, bath.temperature, samples)
}

/// TCL2 evolution of a state in contact with `bath`.
pub fn evolve_nonmarkovian(
    initial: &TwoLevelState,
    bath: &BathSpec,
    omega_a: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_contact(initial, omega_a)?;
    if bath.model != DynamicsModel::Tcl2 {
        return Err(QottoError::invalid("model", "non-Markovian evolution needs a TCL2 bath"));
    }
    let kernel = Tcl2Kernel::new(omega_a, *bath, cfg.quad)?;
    evolve_with_rates(&kernel, initial, bath, cfg)
}

/// Coherence `<σ->(t)` sampled on the trajectory grid.
pub fn evolve_coherence(
    initial: &TwoLevelState,
    bath: &BathSpec,
    omega_a: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Complex64>> {
    let traj = match bath.model {
        DynamicsModel::Tcl2 => evolve_nonmarkovian(initial, bath, omega_a, cfg)?,
        DynamicsModel::Lindblad => evolve_markovian(initial, bath, omega_a, cfg)?,
    };
    Ok(traj.coherence)
}

/// Exact relaxation under the Lindblad reference:
/// `<σz>(t) = σ_eq + (<σz>₀ − σ_eq) e^{−a∞ t}` and `<σ->(t) = c₀ e^{−iωt − a∞ t/2}`.
pub fn evolve_markovian(
    initial: &TwoLevelState,
    bath: &BathSpec,
    omega_a: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_contact(initial, omega_a)?;
    if bath.model != DynamicsModel::Lindblad {
        return Err(QottoError::invalid("model", "Markovian evolution needs a Lindblad bath"));
    }
    let relax = MarkovRelaxation::new(omega_a, bath);
    let (n, time) = cfg.grid();
    let c0 = initial.coherence();
    let s0 = initial.sigma_z();
    let samples = (0..=n).filter(|&k| k == 0 || k % cfg.sample_every == 0 || k == n).map(|k| {
        let t = time(k);
        (t, relax.sigma_z(s0, t), relax.coherence(c0, t))
    });
    Trajectory::from_samples(omega_a, bath.temperature, samples)
}

/// Dispatches on the bath model.
pub fn evolve(initial: &TwoLevelState, bath: &BathSpec, cfg: &IntegratorConfig) -> Result<Trajectory> {
    match bath.model {
        DynamicsModel::Tcl2 => evolve_nonmarkovian(initial, bath, initial.omega(), cfg),
        DynamicsModel::Lindblad => evolve_markovian(initial, bath, initial.omega(), cfg),
    }
}

/// Closed-form Lindblad relaxation with the asymptotic TCL2 rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovRelaxation {
    pub omega: f64,
    pub decay: f64,
    pub sigma_eq: f64,
}

impl MarkovRelaxation {
    pub fn new(omega: f64, bath: &BathSpec) -> Self {
        let (a, b) = lindblad_rates(omega, bath);
        MarkovRelaxation { omega, decay: a, sigma_eq: -b / a }
    }

    pub fn sigma_z(&self, sigma_0: f64, t: f64) -> f64 {
        self.sigma_eq + (sigma_0 - self.sigma_eq) * (-self.decay * t).exp()
    }

    pub fn coherence(&self, c0: Complex64, t: f64) -> Complex64 {
        c0 * Complex64::from_polar((-0.5 * self.decay * t).exp(), -self.omega * t)
    }
}

/// Independent solution of the `<σz>` equation through its integrating factor,
/// `σ(t) = e^{−A(t)}[σ(0) − ∫₀ᵗ e^{A(s)} b(s) ds]` with `A(t) = ∫₀ᵗ a`.
///
/// The factor is applied interval by interval on the stepper's grid, so both
/// solutions can be compared sample for sample. Each interval uses an
/// 8-point Gauss–Legendre rule; `A` at the interior nodes comes from the
/// spectral integration matrix of the same rule.
pub fn oracle_with_rates<R: RateSource>(
    source: &R,
    initial: &TwoLevelState,
    bath: &BathSpec,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !initial.is_diagonal() {
        return Err(QottoError::invalid("initial", "the oracle covers diagonal states only"));
    }
    let omega = initial.omega();
    let rule = GaussLegendre::new(ORACLE_NODES);
    let (n, time) = cfg.grid();
    let mut sigma_z = initial.sigma_z();
    let mut samples = vec![(0.0, sigma_z, Complex64::new(0.0, 0.0))];
    for k in 0..n {
        let (t0, t1) = (time(k), time(k + 1));
        let half = 0.5 * (t1 - t0);
        let mut a = [0.0; ORACLE_NODES];
        let mut b = [0.0; ORACLE_NODES];
        for (i, x) in rule.nodes.iter().enumerate() {
            let r = source.rates(t0 + half * (1.0 + x))?;
            a[i] = r.decay_a;
            b[i] = r.drift_b;
        }
        let total: f64 = half * rule.weights.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
        let mut forced = 0.0;
        for ((cumulative, w), b) in rule.cumulative.iter().zip(&rule.weights).zip(&b) {
            let partial: f64 = half * cumulative.iter().zip(&a).map(|(s, v)| s * v).sum::<f64>();
            forced += half * w * (partial - total).exp() * b;
        }
        sigma_z = (-total).exp() * sigma_z - forced;
        check_positivity(t1, sigma_z, omega, bath)?;
        if (k + 1) % cfg.sample_every == 0 || k + 1 == n {
            samples.push((t1, sigma_z, Complex64::new(0.0, 0.0)));
        }
    }
    Trajectory::from_samples(omega, bath.temperature, samples)
}

/// Integrating-factor oracle for the TCL2 equations.
pub fn evolve_oracle(
    initial: &TwoLevelState,
    bath: &BathSpec,
    omega_a: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_contact(initial, omega_a)?;
    let kernel = Tcl2Kernel::new(omega_a, *bath, cfg.quad)?;
    oracle_with_rates(&kernel, initial, bath, cfg)
}

const ORACLE_NODES: usize = 8;

/// Gauss–Legendre rule on [-1, 1] with its integration matrix
/// `cumulative[i][j] = ∫_{-1}^{x_i} ℓ_j(x) dx`.
struct GaussLegendre {
    nodes: [f64; ORACLE_NODES],
    weights: [f64; ORACLE_NODES],
    cumulative: [[f64; ORACLE_NODES]; ORACLE_NODES],
}

/// `(P_0(x), …, P_n(x))` by the three-term recurrence.
fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0, x];
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        p.push(next);
    }
    p.truncate(n + 1);
    p
}

impl GaussLegendre {
    fn new(n: usize) -> Self {
        assert_eq!(n, ORACLE_NODES);
        let mut nodes = [0.0; ORACLE_NODES];
        let mut weights = [0.0; ORACLE_NODES];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let p = legendre_all(n, x);
                let dp = n as f64 * (x * p[n] - p[n - 1]) / (x * x - 1.0);
                let dx = p[n] / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let p = legendre_all(n, x);
            let dp = n as f64 * (x * p[n] - p[n - 1]) / (x * x - 1.0);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        // ℓ_j = Σ_k c_jk P_k with c_jk = w_j P_k(x_j)(2k+1)/2, and
        // ∫_{-1}^{x} P_k = (P_{k+1} − P_{k−1})/(2k+1), ∫_{-1}^{x} P_0 = x + 1.
        let mut cumulative = [[0.0; ORACLE_NODES]; ORACLE_NODES];
        for (i, &xi) in nodes.iter().enumerate() {
            let pi = legendre_all(n + 1, xi);
            let integral: Vec<f64> = (0..n)
                .map(|k| if k == 0 { xi + 1.0 } else { (pi[k + 1] - pi[k - 1]) / (2 * k + 1) as f64 })
                .collect();
            for j in 0..n {
                let pj = legendre_all(n, nodes[j]);
                cumulative[i][j] =
                    (0..n).map(|k| weights[j] * pj[k] * (2 * k + 1) as f64 / 2.0 * integral[k]).sum();
            }
        }
        GaussLegendre { nodes, weights, cumulative }
    }
}

/// `<σz>` propagation used by the crossing search.
pub trait Propagator {
    fn omega(&self) -> f64;
    fn bath(&self) -> &BathSpec;
    /// Largest step the propagator takes internally.
    fn max_step(&self) -> f64;
    /// Time after which the search gives up.
    fn horizon(&self) -> f64;
    /// `<σz>(t + h)` from `<σz>(t)`, using `substeps` equal internal steps.
    fn advance(&self, t: f64, sigma_z: f64, h: f64, substeps: usize) -> Result<f64>;
}

/// RK4 propagation under time-dependent rates.
pub struct RatePropagator<R: RateSource> {
    source: CachedRates<R>,
    omega: f64,
    bath: BathSpec,
    cfg: IntegratorConfig,
}

impl<R: RateSource> RatePropagator<R> {
    pub fn new(source: R, omega: f64, bath: BathSpec, cfg: IntegratorConfig) -> Self {
        RatePropagator { source: CachedRates::new(source), omega, bath, cfg }
    }
}

impl RatePropagator<Tcl2Kernel> {
    pub fn tcl2(omega: f64, bath: BathSpec, cfg: IntegratorConfig) -> Result<Self> {
        Ok(Self::new(Tcl2Kernel::new(omega, bath, cfg.quad)?, omega, bath, cfg))
    }
}

impl<R: RateSource> Propagator for RatePropagator<R> {
    fn omega(&self) -> f64 {
        self.omega
    }

    fn bath(&self) -> &BathSpec {
        &self.bath
    }

    fn max_step(&self) -> f64 {
        self.cfg.dt
    }

    fn horizon(&self) -> f64 {
        self.cfg.t_max
    }

    fn advance(&self, t: f64, sigma_z: f64, h: f64, substeps: usize) -> Result<f64> {
        let n = substeps.max(1);
        let step = h / n as f64;
        let mut s = sigma_z;
        let mut rates = self.source.rates(t)?;
        let zero = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let t0 = t + step * i as f64;
            let (next, _, end) = rk4_step(&self.source, t0, s, zero, step, rates)?;
            check_positivity(t0 + step, next, self.omega, &self.bath)?;
            s = next;
            rates = end;
        }
        Ok(s)
    }
}

/// Exact Lindblad propagation.
pub struct MarkovPropagator {
    relax: MarkovRelaxation,
    bath: BathSpec,
    cfg: IntegratorConfig,
}

impl MarkovPropagator {
    pub fn new(omega: f64, bath: BathSpec, cfg: IntegratorConfig) -> Self {
        MarkovPropagator { relax: MarkovRelaxation::new(omega, &bath), bath, cfg }
    }
}

impl Propagator for MarkovPropagator {
    fn omega(&self) -> f64 {
        self.relax.omega
    }

    fn bath(&self) -> &BathSpec {
        &self.bath
    }

    fn max_step(&self) -> f64 {
        self.cfg.dt
    }

    fn horizon(&self) -> f64 {
        self.cfg.t_max
    }

    fn advance(&self, _t: f64, sigma_z: f64, h: f64, _substeps: usize) -> Result<f64> {
        Ok(self.relax.sigma_z(sigma_z, h))
    }
}

/// Propagator matching the bath model.
pub fn propagator_for(omega: f64, bath: &BathSpec, cfg: IntegratorConfig) -> Result<Box<dyn Propagator>> {
    Ok(match bath.model {
        DynamicsModel::Tcl2 => Box::new(RatePropagator::tcl2(omega, *bath, cfg)?),
        DynamicsModel::Lindblad => Box::new(MarkovPropagator::new(omega, *bath, cfg)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::SpectralDensity;

    fn bath(t: f64, lambda: f64, model: DynamicsModel) -> BathSpec {
        BathSpec::new(t, SpectralDensity::new(0.1, lambda).unwrap(), model).unwrap()
    }

    fn short_cfg(omega: f64, t_max: f64) -> IntegratorConfig {
        IntegratorConfig::new(default_dt(omega), t_max, 1, 1e-6, QuadConfig::default(), omega).unwrap()
    }

    #[test]
    fn config_validation() {
        let q = QuadConfig::default();
        assert!(IntegratorConfig::new(0.0, 1.0, 1, 1e-6, q, 1.0).is_err());
        assert!(IntegratorConfig::new(0.1, 0.05, 1, 1e-6, q, 1.0).is_err());
        assert!(IntegratorConfig::new(0.2, 1.0, 1, 1e-6, q, 1.0).is_err());
        assert!(IntegratorConfig::new(0.1, 1.0, 0, 1e-6, q, 1.0).is_err());
        let cfg = IntegratorConfig::for_contact(5.2, &bath(2.0, 20.8, DynamicsModel::Tcl2), q).unwrap();
        assert!((cfg.dt - 2.0 * PI / (80.0 * 5.2)).abs() < 1e-15);
        assert!((cfg.t_max - 100.0 / 3.561_820_604_125_142).abs() < 1e-9);
    }

    #[test]
    fn grid_lands_on_horizon() {
        let cfg = short_cfg(5.2, 0.1);
        let (n, time) = cfg.grid();
        assert_eq!(time(n), 0.1);
        assert!(time(n) - time(n - 1) <= cfg.dt);
        let cfg = IntegratorConfig { dt: 0.25, t_max: 1.0, ..cfg };
        assert_eq!(cfg.grid().0, 4);
    }

    #[test]
    fn equilibrium_is_not_invariant_under_tcl2() {
        let b = bath(2.0, 20.8, DynamicsModel::Tcl2);
        let eq = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let traj = evolve_nonmarkovian(&eq, &b, 5.2, &short_cfg(5.2, 1.0)).unwrap();
        assert!((traj.x_ratio[0] - eq.x_ratio().unwrap()).abs() < 1e-14);
        assert!(traj.rel_entropy_to_eq.iter().any(|&d| d > 1e-8));
        assert!(traj.x_ratio.iter().any(|&x| x <= 2.5));
    }

    #[test]
    fn diagonal_states_stay_diagonal() {
        let b = bath(2.0, 20.8, DynamicsModel::Tcl2);
        let eq = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let c = evolve_coherence(&eq, &b, 5.2, &short_cfg(5.2, 0.5)).unwrap();
        assert!(c.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn coherence_first_step_decay() {
        let b = bath(2.0, 20.8, DynamicsModel::Tcl2);
        let c0 = Complex64::new(0.15, 0.05);
        let init = TwoLevelState::new(5.2, 0.3, c0).unwrap();
        let cfg = short_cfg(5.2, 0.2);
        let c = evolve_coherence(&init, &b, 5.2, &cfg).unwrap();
        let kernel = Tcl2Kernel::new(5.2, b, cfg.quad).unwrap();
        // Only Re g changes the modulus: |c(dt)| = |c₀| exp(−∫₀^dt Re g).
        let dt = cfg.dt;
        let g_avg = (kernel.rates(0.0).unwrap().damping.re
            + 4.0 * kernel.rates(0.5 * dt).unwrap().damping.re
            + kernel.rates(dt).unwrap().damping.re)
            / 6.0;
        let expected = c0.norm() * (-g_avg * dt).exp();
        assert!((c[1].norm() - expected).abs() < 1e-9 * c0.norm(), "{} vs {expected}", c[1].norm());
    }

    #[test]
    fn coherence_free_rotation_without_bath() {
        let zero = ConstantRates(Rates { decay_a: 0.0, drift_b: 0.0, damping: Complex64::new(0.0, 0.0) });
        let c0 = Complex64::new(0.2, -0.1);
        let init = TwoLevelState::new(3.0, 0.4, c0).unwrap();
        let b = bath(1.0, 12.0, DynamicsModel::Tcl2);
        let traj = evolve_with_rates(&zero, &init, &b, &short_cfg(3.0, 2.0)).unwrap();
        for (t, c) in traj.times.iter().zip(&traj.coherence) {
            let exact = c0 * Complex64::from_polar(1.0, -3.0 * t);
            assert!((c - exact).norm() < 1e-14);
        }
    }

    #[test]
    fn markovian_equilibrium_is_stationary() {
        let b = bath(2.0, 20.8, DynamicsModel::Lindblad);
        let eq = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let traj = evolve_markovian(&eq, &b, 5.2, &short_cfg(5.2, 3.0)).unwrap();
        assert!(traj.rel_entropy_to_eq.iter().all(|&d| d <= 1e-15));
        assert!(traj.x_ratio.iter().all(|&x| (x - 2.6).abs() < 1e-12));
    }

    #[test]
    fn markovian_x_ratio_is_monotone() {
        let b = bath(2.0, 20.8, DynamicsModel::Lindblad);
        for p in [0.01, 0.2, 0.45] {
            let init = TwoLevelState::diagonal(5.2, p).unwrap();
            let traj = evolve_markovian(&init, &b, 5.2, &short_cfg(5.2, 3.0)).unwrap();
            let up = traj.x_ratio[0] < 2.6;
            for w in traj.x_ratio.windows(2) {
                assert!(if up { w[1] >= w[0] } else { w[1] <= w[0] });
                assert!(if up { w[1] <= 2.6 + 1e-12 } else { w[1] >= 2.6 - 1e-12 });
            }
        }
    }

    #[test]
    fn model_mismatch_is_rejected() {
        let eq = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let cfg = short_cfg(5.2, 0.1);
        assert!(evolve_markovian(&eq, &bath(2.0, 20.8, DynamicsModel::Tcl2), 5.2, &cfg).is_err());
        assert!(evolve_nonmarkovian(&eq, &bath(2.0, 20.8, DynamicsModel::Lindblad), 5.2, &cfg).is_err());
        assert!(evolve_nonmarkovian(&eq, &bath(2.0, 20.8, DynamicsModel::Tcl2), 2.5, &cfg).is_err());
    }

    #[test]
    fn oracle_matches_constant_rate_closed_form() {
        let rates = Rates { decay_a: 1.7, drift_b: 0.9, damping: Complex64::new(0.85, 0.0) };
        let init = TwoLevelState::diagonal(2.0, 0.1).unwrap();
        let b = bath(1.0, 8.0, DynamicsModel::Tcl2);
        let cfg = short_cfg(2.0, 4.0);
        let traj = oracle_with_rates(&ConstantRates(rates), &init, &b, &cfg).unwrap();
        let eq = -0.9 / 1.7;
        for (t, s) in traj.times.iter().zip(&traj.sigma_z) {
            let exact = eq + (init.sigma_z() - eq) * (-1.7 * t).exp();
            assert!((s - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_keeps_zero_without_drive() {
        let rates = Rates { decay_a: 0.7, drift_b: 0.0, damping: Complex64::new(0.0, 0.0) };
        let init = TwoLevelState::diagonal(2.0, 0.5).unwrap();
        let b = bath(1.0, 8.0, DynamicsModel::Tcl2);
        let traj = oracle_with_rates(&ConstantRates(rates), &init, &b, &short_cfg(2.0, 3.0)).unwrap();
        assert!(traj.sigma_z.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn gauss_legendre_rule_is_exact() {
        let rule = GaussLegendre::new(ORACLE_NODES);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // ∫_{-1}^{x_i} t^5 dt = (x_i^6 − 1)/6
        for (i, &x) in rule.nodes.iter().enumerate() {
            let got: f64 = rule.cumulative[i].iter().zip(&rule.nodes).map(|(s, n)| s * n.powi(5)).sum();
            assert!((got - (x.powi(6) - 1.0) / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn positivity_breach_is_reported() {
        // Negative relaxation drives <σz> out of [-1, 1].
        let rates = Rates { decay_a: -5.0, drift_b: 0.0, damping: Complex64::new(0.0, 0.0) };
        let init = TwoLevelState::diagonal(2.0, 0.9).unwrap();
        let b = bath(1.0, 8.0, DynamicsModel::Tcl2);
        let err = evolve_with_rates(&ConstantRates(rates), &init, &b, &short_cfg(2.0, 2.0)).unwrap_err();
        assert!(matches!(err, QottoError::PositivityBreach { .. }));
    }

    #[test]
    fn propagators_agree_with_trajectories() {
        let b = bath(2.0, 20.8, DynamicsModel::Tcl2);
        let eq = TwoLevelState::thermal(5.2, 2.0).unwrap();
        let cfg = short_cfg(5.2, 0.3);
        let traj = evolve_nonmarkovian(&eq, &b, 5.2, &cfg).unwrap();
        let prop = RatePropagator::tcl2(5.2, b, cfg).unwrap();
        let mut s = eq.sigma_z();
        for k in 0..traj.len() - 1 {
            s = prop.advance(traj.times[k], s, traj.times[k + 1] - traj.times[k], 1).unwrap();
            assert_eq!(s, traj.sigma_z[k + 1]);
        }
        let markov = MarkovPropagator::new(5.2, b.with_model(DynamicsModel::Lindblad), cfg);
        let s1 = markov.advance(0.0, -0.5, 0.7, 1).unwrap();
        let relax = MarkovRelaxation::new(5.2, &b);
        assert_eq!(s1, relax.sigma_z(-0.5, 0.7));
    }
}
