// Scenario settings from a TOML file merged with command-line flags.
//
// Every key is optional; flags win over the file and the file wins over
// the built-in defaults.

use std::path::Path;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use kerr_jcm::hierarchy::Envelope;
use kerr_jcm::scenario::{Engine, RunConfig};
use kerr_jcm::series::SeriesForm;
use kerr_jcm::{FieldStateSpec, Level, ModelParams, Truncation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Coherent,
    Squeezed,
    Pair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineArg {
    Oracle,
    Series,
    Hierarchy,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Oracle => Engine::Oracle,
            EngineArg::Series => Engine::Series,
            EngineArg::Hierarchy => Engine::Hierarchy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AtomArg {
    Excited,
    Ground,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FormArg {
    Corrected,
    Printed,
}

/// Scenario keys shared by the config file and the flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ScenarioArgs {
    /// Engine: exact block propagator, closed-form series or operator hierarchy
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// Initial field state
    #[arg(long, value_enum)]
    pub field: Option<FieldKind>,
    /// Mean photon number per mode (⟨n2⟩ for pair coherent states)
    #[arg(long)]
    pub mean_photons: Option<f64>,
    /// Photon-number difference q of a pair coherent state
    #[arg(long)]
    pub pair_q: Option<usize>,
    /// Initial atomic level
    #[arg(long, value_enum)]
    pub atom: Option<AtomArg>,
    #[arg(long)]
    pub chi1: Option<f64>,
    #[arg(long)]
    pub chi2: Option<f64>,
    /// Detuning α = E2 − E1 − ω1 − ω2
    #[arg(long, allow_hyphen_values = true)]
    pub detuning: Option<f64>,
    /// Coupling magnitude |γ|
    #[arg(long)]
    pub gamma: Option<f64>,
    /// End of the time window (start is 0)
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Hierarchy cutoff K
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Fock truncation nmax used for both modes by the oracle and the series
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Series variant
    #[arg(long, value_enum)]
    pub series_form: Option<FormArg>,
    /// Relative tolerance of the hierarchy integrator
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the hierarchy integrator
    #[arg(long)]
    pub atol: Option<f64>,
    /// Also run the hierarchy at cutoff K − 2 and report the difference
    #[arg(long)]
    #[serde(default)]
    pub closure_check: bool,
    /// Coupling envelope T(t); file only
    #[arg(skip)]
    pub envelope: Option<Envelope>,
}

impl ScenarioArgs {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let parsed: Self = toml::from_str(&text)
            .map_err(|e| kerr_jcm::Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        Ok(parsed)
    }

    /// `self` with every key that `over` sets replaced.
    pub fn overlay(self, over: &Self) -> Self {
        Self {
            engine: over.engine.or(self.engine),
            field: over.field.or(self.field),
            mean_photons: over.mean_photons.or(self.mean_photons),
            pair_q: over.pair_q.or(self.pair_q),
            atom: over.atom.or(self.atom),
            chi1: over.chi1.or(self.chi1),
            chi2: over.chi2.or(self.chi2),
            detuning: over.detuning.or(self.detuning),
            gamma: over.gamma.or(self.gamma),
            tmax: over.tmax.or(self.tmax),
            samples: over.samples.or(self.samples),
            cutoff: over.cutoff.or(self.cutoff),
            nmax: over.nmax.or(self.nmax),
            series_form: over.series_form.or(self.series_form),
            rtol: over.rtol.or(self.rtol),
            atol: over.atol.or(self.atol),
            closure_check: over.closure_check || self.closure_check,
            envelope: over.envelope.or(self.envelope),
        }
    }

    pub fn to_run_config(&self) -> Result<RunConfig> {
        let mean = self.mean_photons.unwrap_or(10.0);
        let atom = match self.atom.unwrap_or(AtomArg::Excited) {
            AtomArg::Excited => Level::Excited,
            AtomArg::Ground => Level::Ground,
        };
        let field = match self.field.unwrap_or(FieldKind::Coherent) {
            FieldKind::Coherent => FieldStateSpec::coherent(mean, mean, atom),
            FieldKind::Squeezed => FieldStateSpec::squeezed(mean, atom),
            FieldKind::Pair => FieldStateSpec::pair_coherent(mean, self.pair_q.unwrap_or(0), atom)?,
        };
        let chi1 = self.chi1.unwrap_or(0.0);
        let params = ModelParams::with_detuning(
            self.gamma.unwrap_or(1.0),
            chi1,
            self.chi2.unwrap_or(chi1),
            self.detuning.unwrap_or(0.0),
        );
        let mut c = RunConfig::new(params, field, self.tmax.unwrap_or(25.0), self.samples.unwrap_or(500));
        c.engine = self.engine.map(Engine::from).unwrap_or_default();
        c.envelope = self.envelope.unwrap_or_default();
        c.cutoff = self.cutoff;
        c.truncation = self.nmax.map(|n| Truncation { nmax1: n, nmax2: n });
        c.series_form = match self.series_form {
            Some(FormArg::Printed) => SeriesForm::Printed,
            _ => SeriesForm::Corrected,
        };
        c.rtol = self.rtol;
        c.atol = self.atol;
        c.closure_check = self.closure_check;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: ScenarioArgs = toml::from_str("chi1 = 0.5\nsamples = 40\nfield = \"squeezed\"").unwrap();
        let flags = ScenarioArgs { chi1: Some(1.0), ..Default::default() };
        let merged = file.overlay(&flags);
        assert_eq!(merged.chi1, Some(1.0));
        assert_eq!(merged.samples, Some(40));
        let c = merged.to_run_config().unwrap();
        assert_eq!(c.params.chi2, 1.0);
        assert_eq!(c.samples, 40);
    }

    #[test]
    fn envelope_from_file() {
        let file: ScenarioArgs = toml::from_str(
            "engine = \"hierarchy\"\n[envelope]\nkind = \"rect_pulse\"\nvalue = 1.0\nt_on = 1.0\nt_off = 2.0\n",
        )
        .unwrap();
        let c = file.to_run_config().unwrap();
        assert_eq!(c.envelope, Envelope::RectPulse { value: 1.0, t_on: 1.0, t_off: 2.0 });
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<ScenarioArgs>("chi3 = 1.0").is_err());
    }
}
