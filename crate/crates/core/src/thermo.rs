//! Closed-form thermodynamics of a two-level system (k_B = ħ = 1).
//!
//! A state is stored as its level spacing, its excited-state population and
//! the off-diagonal amplitude `<σ->`. Populations and coherences never mix
//! under the dynamics used in this crate, so the 2×2 density matrix is never
//! materialized.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, QottoError, Result};

/// Slack allowed on the positivity bound `|c|² ≤ P(1 − P)`.
const POSITIVITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelState {
    omega: f64,
    p_excited: f64,
    coherence: Complex64,
}

/// Entropies of a state, the second one relative to a reference state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyLedger {
    pub von_neumann: f64,
    pub rel_entropy_to_ref: f64,
}

impl TwoLevelState {
    pub fn new(omega: f64, p_excited: f64, coherence: Complex64) -> Result<Self> {
        require_positive("omega", omega)?;
        if !(0.0..=1.0).contains(&p_excited) {
            return Err(QottoError::invalid("p_excited", format!("must lie in [0, 1], got {p_excited}")));
        }
        if !(coherence.re.is_finite() && coherence.im.is_finite())
            || coherence.norm_sqr() > p_excited * (1.0 - p_excited) + POSITIVITY_SLACK
        {
            return Err(QottoError::invalid(
                "coherence",
                format!(
                    "|c|^2 = {} exceeds P(1-P) = {}",
                    coherence.norm_sqr(),
                    p_excited * (1.0 - p_excited)
                ),
            ));
        }
        Ok(TwoLevelState { omega, p_excited, coherence })
    }

    /// State diagonal in the energy basis.
    pub fn diagonal(omega: f64, p_excited: f64) -> Result<Self> {
        Self::new(omega, p_excited, Complex64::new(0.0, 0.0))
    }

    /// Diagonal state with the given `<σz>`.
    pub fn from_sigma_z(omega: f64, sigma_z: f64) -> Result<Self> {
        Self::diagonal(omega, 0.5 * (1.0 + sigma_z))
    }

    /// Canonical state `exp(-H/T)/Z` for `H = (ω/2)σz`.
    pub fn thermal(omega: f64, temperature: f64) -> Result<Self> {
        require_positive("omega", omega)?;
        require_positive("temperature", temperature)?;
        Self::diagonal(omega, excited_population(omega / temperature))
    }

    /// Diagonal state at spacing `omega` whose `ω/T_eff` equals `x`.
    pub fn with_x_ratio(omega: f64, x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(QottoError::invalid("x", format!("must be finite, got {x}")));
        }
        Self::diagonal(omega, excited_population(x))
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn p_excited(&self) -> f64 {
        self.p_excited
    }

    pub fn coherence(&self) -> Complex64 {
        self.coherence
    }

    pub fn is_diagonal(&self) -> bool {
        self.coherence.norm_sqr() == 0.0
    }

    /// Same populations and coherence at a different spacing (an instantaneous adiabat).
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(omega, self.p_excited, self.coherence)
    }

    pub fn sigma_z(&self) -> f64 {
        2.0 * self.p_excited - 1.0
    }

    /// `ω/T_eff = −2 atanh<σz>`, evaluated as `ln((1 − P)/P)`.
    pub fn x_ratio(&self) -> Result<f64> {
        if !self.is_diagonal() {
            return Err(QottoError::UndefinedTemperature(format!(
                "state carries coherence {}",
                self.coherence
            )));
        }
        log_odds(self.p_excited)
    }

    pub fn effective_temperature(&self) -> Result<f64> {
        Ok(self.omega / self.x_ratio()?)
    }

    /// `Tr[ρH] = (ω/2)(2P − 1)`.
    pub fn mean_energy(&self) -> f64 {
        0.5 * self.omega * self.sigma_z()
    }

    /// Mean energy this state would have at spacing `omega`.
    pub fn energy_at(&self, omega: f64) -> f64 {
        0.5 * omega * self.sigma_z()
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        if self.is_diagonal() {
            return binary_entropy(self.p_excited);
        }
        let bloch = (self.sigma_z().powi(2) + 4.0 * self.coherence.norm_sqr()).sqrt().min(1.0);
        binary_entropy(0.5 * (1.0 + bloch))
    }

    pub fn entropy_ledger(&self, reference: &TwoLevelState) -> Result<EntropyLedger> {
        Ok(EntropyLedger {
            von_neumann: self.von_neumann_entropy(),
            rel_entropy_to_ref: relative_entropy(self, reference)?,
        })
    }
}

/// Canonical excited population `1/(1 + e^x)` for `x = ω/T`.
pub fn excited_population(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `ln((1 − p)/p)`; errors where it diverges.
pub fn log_odds(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QottoError::DivergentRatio { p_excited: p });
    }
    Ok((-p).ln_1p() - p.ln())
}

/// Binary entropy in nats with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    -(xlnx(p) + xlnx(1.0 - p))
}

fn xlnx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln()
    }
}

/// `p ln(p/q)` with the support conventions of the Kullback–Leibler divergence.
fn kl_term(p: f64, q: f64) -> Option<f64> {
    if p <= 0.0 {
        Some(0.0)
    } else if q <= 0.0 {
        None
    } else {
        Some(p * (p / q).ln())
    }
}

pub fn thermal_state(omega: f64, temperature: f64) -> Result<TwoLevelState> {
    TwoLevelState::thermal(omega, temperature)
}

/// `S(a||b) = −Tr[a ln b] − S_v[a]`.
///
/// The reference `b` must be diagonal. A coherent `a` is allowed since only
/// its populations enter `Tr[a ln b]`.
pub fn relative_entropy(a: &TwoLevelState, b: &TwoLevelState) -> Result<f64> {
    if !b.is_diagonal() {
        return Err(QottoError::invalid("reference", "relative entropy needs a diagonal reference state"));
    }
    let (pa, pb) = (a.p_excited, b.p_excited);
    let divergent = || QottoError::DivergentRelativeEntropy { state: pa, reference: pb };
    let excited = kl_term(pa, pb).ok_or_else(divergent)?;
    let ground = kl_term(1.0 - pa, 1.0 - pb).ok_or_else(divergent)?;
    let diagonal_part = excited + ground;
    if a.is_diagonal() {
        return Ok(diagonal_part.max(0.0));
    }
    // Coherence lowers S_v[a] below the binary entropy of its populations.
    Ok((diagonal_part + binary_entropy(pa) - a.von_neumann_entropy()).max(0.0))
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn effective_temperature_roundtrip(omega in 0.1f64..10.0, t in 0.1f64..10.0) {
            let s = thermal_state(omega, t).unwrap();
            let back = s.effective_temperature().unwrap();
            prop_assert!((back - t).abs() <= 1e-12 * t);
        }

        #[test]
        fn entropies_nonnegative(p in 0.0f64..=1.0, q in 1e-9f64..(1.0 - 1e-9)) {
            let a = TwoLevelState::diagonal(1.0, p).unwrap();
            let b = TwoLevelState::diagonal(1.0, q).unwrap();
            prop_assert!(a.von_neumann_entropy() >= 0.0);
            prop_assert!(relative_entropy(&a, &b).unwrap() >= 0.0);
            prop_assert!(relative_entropy(&b, &b).unwrap() <= 1e-12);
        }

        #[test]
        fn x_ratio_strictly_decreasing(p in 1e-6f64..0.499, dp in 1e-6f64..1e-3) {
            let q = (p + dp).min(0.5);
            let lo = TwoLevelState::diagonal(1.0, p).unwrap().x_ratio().unwrap();
            let hi = TwoLevelState::diagonal(1.0, q).unwrap().x_ratio().unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn thermal_mean_energy_identity(omega in 0.1f64..10.0, t in 0.1f64..10.0) {
            let e = thermal_state(omega, t).unwrap().mean_energy();
            prop_assert!((e + 0.5 * omega * (omega / (2.0 * t)).tanh()).abs() <= 1e-12);
        }
    }
}
