//! Bosonic reservoir: spectral density, thermal occupation and the
//! time-dependent second-order (TCL2) rates.
//!
//! The rates are double integrals over the memory time and the bath
//! frequency. The memory-time integral is done in closed form, which leaves
//!
//! ```text
//! Γ₁(t) = ∫₀^∞ dω (n(ω)+1) J(ω) [sin(Δt)/Δ + i(1 − cos Δt)/Δ],   Δ = ω_A − ω
//! Γ₂(t) = ∫₀^∞ dω  n(ω)    J(ω) [sin(Δt)/Δ − i(1 − cos Δt)/Δ]
//! ```
//!
//! evaluated by adaptive Gauss–Kronrod quadrature on `[0, 8λ]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, QottoError, Result};
use crate::quadrature::{integrate, panel_layout, QuadConfig};

/// Couplings above this leave the weak-coupling regime the TCL2 rates assume.
pub const WEAK_COUPLING_ADVISORY: f64 = 0.2;

/// Gaussian cutoffs beyond `8λ` contribute below `e^{-64}`.
const CUTOFF_MULTIPLE: f64 = 8.0;

/// Beyond `6λ` the integrand is below `1e-14` and needs no oscillation resolution.
const RESOLVED_MULTIPLE: f64 = 6.0;

/// Below this `|Δ|·t` the kernels switch to their Taylor series.
const SERIES_THRESHOLD: f64 = 1e-6;

/// Frequency-domain description of the system–bath coupling.
pub trait Spectrum {
    /// `J(ω)`.
    fn density(&self, omega: f64) -> f64;
    /// `J(ω)/ω`, finite at `ω = 0` for Ohmic-type densities.
    fn density_per_frequency(&self, omega: f64) -> f64;
    /// Frequency beyond which `J` is negligible.
    fn integration_limit(&self) -> f64;
    /// Characteristic frequency used for the initial panel layout.
    fn cutoff(&self) -> f64;
}

/// Ohmic density with Gaussian cutoff, `J(ω) = γ ω exp(−ω²/λ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub gamma: f64,
    pub lambda: f64,
}

impl SpectralDensity {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        require_positive("gamma", gamma)?;
        require_positive("lambda", lambda)?;
        Ok(SpectralDensity { gamma, lambda })
    }

    pub fn weak_coupling_advisory(&self) -> bool {
        self.gamma > WEAK_COUPLING_ADVISORY
    }
}

impl Spectrum for SpectralDensity {
    fn density(&self, omega: f64) -> f64 {
        omega * self.density_per_frequency(omega)
    }

    fn density_per_frequency(&self, omega: f64) -> f64 {
        let r = omega / self.lambda;
        self.gamma * (-r * r).exp()
    }

    fn integration_limit(&self) -> f64 {
        CUTOFF_MULTIPLE * self.lambda
    }

    fn cutoff(&self) -> f64 {
        self.lambda
    }
}

/// `J(ω)` with a domain check.
pub fn spectral_density(omega: f64, sd: &SpectralDensity) -> Result<f64> {
    if omega.is_nan() || omega < 0.0 {
        return Err(QottoError::invalid("omega", format!("must be non-negative, got {omega}")));
    }
    Ok(sd.density(omega))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsModel {
    /// Second-order time-convolutionless master equation.
    #[default]
    Tcl2,
    /// Markovian reference with the asymptotic TCL2 rates.
    Lindblad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub temperature: f64,
    pub spectral: SpectralDensity,
    pub model: DynamicsModel,
}

impl BathSpec {
    pub fn new(temperature: f64, spectral: SpectralDensity, model: DynamicsModel) -> Result<Self> {
        require_positive("temperature", temperature)?;
        Ok(BathSpec { temperature, spectral, model })
    }

    pub fn with_model(&self, model: DynamicsModel) -> Self {
        BathSpec { model, ..*self }
    }
}

/// Mean thermal occupation `1/(e^{ω/T} − 1)`.
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    require_positive("omega", omega)?;
    require_positive("temperature", temperature)?;
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// `n(ω) J(ω)`, including the `ω → 0` limit `γ T`.
pub fn weighted_emission(omega: f64, bath: &BathSpec) -> f64 {
    emission_density(omega, bath.temperature, &bath.spectral)
}

fn emission_density<S: Spectrum>(omega: f64, temperature: f64, spectrum: &S) -> f64 {
    temperature * planck(omega / temperature) * spectrum.density_per_frequency(omega)
}

/// `x / (e^x − 1)`, which tends to 1 as x → 0 and to 0 as x → ∞.
fn planck(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x > 700.0 {
        x * (-x).exp()
    } else {
        x / x.exp_m1()
    }
}

/// TCL2 rates at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tcl2Coefficients {
    pub t: f64,
    pub gamma1: Complex64,
    pub gamma2: Complex64,
    /// `2 Re[Γ₁ + Γ₂]`, the relaxation rate of `<σz>`.
    pub decay_a: f64,
    /// `2 Re[Γ₁ − Γ₂]`, the inhomogeneous drive of `<σz>`.
    pub drift_b: f64,
    /// Quadrature error estimate (largest component).
    pub error_estimate: f64,
}

impl Tcl2Coefficients {
    fn from_gammas(t: f64, gamma1: Complex64, gamma2: Complex64, error_estimate: f64) -> Self {
        Tcl2Coefficients {
            t,
            gamma1,
            gamma2,
            decay_a: 2.0 * (gamma1.re + gamma2.re),
            drift_b: 2.0 * (gamma1.re - gamma2.re),
            error_estimate,
        }
    }

    /// `Γ₁ + Γ₂*`, the complex damping of `<σ->`.
    pub fn coherence_damping(&self) -> Complex64 {
        self.gamma1 + self.gamma2.conj()
    }

    /// Instantaneous fixed point `−b/a` of the `<σz>` equation.
    pub fn fixed_point(&self) -> f64 {
        -self.drift_b / self.decay_a
    }
}

/// `(sin(Δt)/Δ, (1 − cos Δt)/Δ)` with the removable singularity at `Δ = 0`.
fn memory_kernels(detuning: f64, t: f64) -> (f64, f64) {
    let phase = detuning * t;
    if phase.abs() < SERIES_THRESHOLD {
        (t * (1.0 - phase * phase / 6.0), 0.5 * phase * t)
    } else {
        let half = (0.5 * phase).sin();
        (phase.sin() / detuning, 2.0 * half * half / detuning)
    }
}

/// Evaluates TCL2 rates for one system frequency and bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tcl2Kernel {
    pub omega_a: f64,
    pub bath: BathSpec,
    pub quad: QuadConfig,
}

impl Tcl2Kernel {
    pub fn new(omega_a: f64, bath: BathSpec, quad: QuadConfig) -> Result<Self> {
        require_positive("omega_a", omega_a)?;
        Ok(Tcl2Kernel { omega_a, bath, quad })
    }

    pub fn coefficients(&self, t: f64) -> Result<Tcl2Coefficients> {
        if !t.is_finite() || t < 0.0 {
            return Err(QottoError::invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        let zero = Complex64::new(0.0, 0.0);
        if t == 0.0 {
            return Ok(Tcl2Coefficients::from_gammas(0.0, zero, zero, 0.0));
        }
        let spectrum = &self.bath.spectral;
        let temperature = self.bath.temperature;
        let omega_a = self.omega_a;
        let integrand = |w: f64| -> [f64; 4] {
            let (sine, cosine) = memory_kernels(omega_a - w, t);
            let per_frequency = spectrum.density_per_frequency(w);
            let emission = temperature * planck(w / temperature) * per_frequency;
            let absorption = emission + w * per_frequency;
            [absorption * sine, absorption * cosine, emission * sine, -emission * cosine]
        };
        // Oscillation period in ω is 2π/t; panels span at most half of it
        // wherever the Gaussian still matters. The tail is left to adaptivity.
        let coarse = 0.5 * spectrum.cutoff();
        let resolved = (RESOLVED_MULTIPLE * spectrum.cutoff()).min(spectrum.integration_limit());
        let mut breaks = panel_layout(0.0, resolved, (PI / t).min(coarse), &[omega_a]);
        let tail = panel_layout(resolved, spectrum.integration_limit(), coarse, &[]);
        breaks.extend_from_slice(&tail[1..]);
        let r = integrate(integrand, &breaks, &self.quad).map_err(|f| QottoError::QuadratureFailure {
            t,
            estimate: f.estimate,
            tolerance: f.tolerance,
        })?;
        let [g1_re, g1_im, g2_re, g2_im] = r.value;
        Ok(Tcl2Coefficients::from_gammas(
            t,
            Complex64::new(g1_re, g1_im),
            Complex64::new(g2_re, g2_im),
            r.error,
        ))
    }

    /// Rates approached as `t → ∞`; see [`lindblad_rates`].
    pub fn asymptotic_rates(&self) -> (f64, f64) {
        lindblad_rates(self.omega_a, &self.bath)
    }
}

/// TCL2 rates with the default quadrature tolerances.
pub fn tcl2_coefficients(t: f64, omega_a: f64, bath: &BathSpec) -> Result<Tcl2Coefficients> {
    Tcl2Kernel::new(omega_a, *bath, QuadConfig::default())?.coefficients(t)
}

/// `t → ∞` limits of `(decay_a, drift_b)`: the sine kernel tends to `π δ(Δ)`,
/// giving `2πJ(ω_A)(2n(ω_A) + 1)` and `2πJ(ω_A)`.
pub fn lindblad_rates(omega_a: f64, bath: &BathSpec) -> (f64, f64) {
    let j = bath.spectral.density(omega_a);
    let nj = weighted_emission(omega_a, bath);
    (2.0 * PI * (j + 2.0 * nj), 2.0 * PI * j)
}
