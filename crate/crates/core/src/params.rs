//! Hamiltonian constants and Fock-space truncation.
//!
//! All energies are angular frequencies with ħ = 1. The figure presets
//! measure everything in units of |γ|.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of the two-photon Kerr Hamiltonian.
///
/// The detuning α = E2 − E1 − ω1 − ω2 is derived on demand from the level
/// energies and mode frequencies and is never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Energy of the lower level |g⟩.
    pub e1: f64,
    /// Energy of the upper level |e⟩.
    pub e2: f64,
    pub w1: f64,
    pub w2: f64,
    /// |γ|
    pub gamma_mod: f64,
    /// arg γ in radians.
    #[serde(default)]
    pub gamma_phase: f64,
    pub chi1: f64,
    pub chi2: f64,
}

impl ModelParams {
    /// Unit mode frequencies, E1 = 0 and E2 chosen so that α = `detuning`.
    pub fn with_detuning(gamma_mod: f64, chi1: f64, chi2: f64, detuning: f64) -> Self {
        let (w1, w2, e1) = (1.0, 1.0, 0.0);
        Self {
            e1,
            e2: e1 + w1 + w2 + detuning,
            w1,
            w2,
            gamma_mod,
            gamma_phase: 0.0,
            chi1,
            chi2,
        }
    }

    pub fn resonant(gamma_mod: f64, chi1: f64, chi2: f64) -> Self {
        Self::with_detuning(gamma_mod, chi1, chi2, 0.0)
    }

    /// α = E2 − E1 − ω1 − ω2
    pub fn detuning(&self) -> f64 {
        self.e2 - self.e1 - self.w1 - self.w2
    }

    /// Moves E2 so that the detuning becomes `alpha`.
    pub fn set_detuning(&mut self, alpha: f64) {
        self.e2 = self.e1 + self.w1 + self.w2 + alpha;
    }

    pub fn gamma(&self) -> Complex64 {
        Complex64::from_polar(self.gamma_mod, self.gamma_phase)
    }

    /// √(χ1 χ2), strength of the bilinear mode-mode Kerr term.
    pub fn cross_kerr(&self) -> f64 {
        (self.chi1 * self.chi2).sqrt()
    }

    /// ε1 = χ1 + √(χ1 χ2)
    pub fn epsilon1(&self) -> f64 {
        self.chi1 + self.cross_kerr()
    }

    /// ε2 = χ2 + √(χ1 χ2)
    pub fn epsilon2(&self) -> f64 {
        self.chi2 + self.cross_kerr()
    }

    /// Kerr energy χ1 n1(n1−1) + χ2 n2(n2−1) + 2√(χ1χ2) n1 n2 of a number state.
    pub fn kerr_energy(&self, n1: usize, n2: usize) -> f64 {
        let (x, y) = (n1 as f64, n2 as f64);
        self.chi1 * x * (x - 1.0) + self.chi2 * y * (y - 1.0) + 2.0 * self.cross_kerr() * x * y
    }

    /// Effective detuning of the (n, m) excitation block,
    /// α − 2(nχ1 + mχ2 + (n+m+1)√(χ1χ2)).
    pub fn block_detuning(&self, n: usize, m: usize) -> f64 {
        let (x, y) = (n as f64, m as f64);
        self.detuning()
            - 2.0 * (x * self.chi1 + y * self.chi2 + (x + y + 1.0) * self.cross_kerr())
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.e1,
            self.e2,
            self.w1,
            self.w2,
            self.gamma_mod,
            self.gamma_phase,
            self.chi1,
            self.chi2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model constant".into()));
        }
        if self.chi1 < 0.0 || self.chi2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Kerr susceptibilities must be non-negative (chi1 = {}, chi2 = {})",
                self.chi1, self.chi2
            )));
        }
        if self.gamma_mod < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "coupling magnitude must be non-negative (got {})",
                self.gamma_mod
            )));
        }
        Ok(())
    }
}

/// Maximum photon number kept in each mode (inclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub nmax1: usize,
    pub nmax2: usize,
}

impl Truncation {
    pub fn new(nmax1: usize, nmax2: usize) -> Result<Self> {
        let t = Self { nmax1, nmax2 };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nmax1 < 1 || self.nmax2 < 1 {
            return Err(Error::InvalidTruncation(format!(
                "need nmax >= 1 per mode, got ({}, {})",
                self.nmax1, self.nmax2
            )));
        }
        Ok(())
    }

    /// ⌈n̄ + 8√n̄⌉ for a mode with mean photon number `mean`, at least 1.
    pub fn nmax_for_mean(mean: f64) -> usize {
        let mean = mean.max(0.0);
        ((mean + 8.0 * mean.sqrt()).ceil() as usize).max(1)
    }

    pub fn from_means(mean1: f64, mean2: f64) -> Self {
        Self {
            nmax1: Self::nmax_for_mean(mean1),
            nmax2: Self::nmax_for_mean(mean2),
        }
    }

    /// 2 (nmax1 + 1)(nmax2 + 1)
    pub fn dim(&self) -> usize {
        2 * (self.nmax1 + 1) * (self.nmax2 + 1)
    }
}
