//! Configurable runs of the three engines, engine comparison, χ sweeps and
//! the figure presets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{initial_state, mean_photons, suggest_truncation, FieldStateSpec};
use crate::hierarchy::{init_ro, integrate, Envelope, HierarchyOptions};
use crate::hilbert::{energy, EvolveOptions, Level, Propagator, StateVector};
use crate::observables::ObservableSeries;
use crate::params::{ModelParams, Truncation};
use crate::series::{DiagonalSeries, SeriesForm};

/// Tail mass allowed beyond the automatic truncation.
pub const DEFAULT_TAIL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Oracle,
    Series,
    Hierarchy,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Oracle => "oracle",
            Engine::Series => "series",
            Engine::Hierarchy => "hierarchy",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Engine::Oracle),
            "series" => Ok(Engine::Series),
            "hierarchy" => Ok(Engine::Hierarchy),
            _ => Err(Error::InvalidParameter(format!("unknown engine '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub engine: Engine,
    pub params: ModelParams,
    pub field: FieldStateSpec,
    #[serde(default)]
    pub envelope: Envelope,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    /// Fock truncation for the oracle and the series cutoff; automatic when absent.
    #[serde(default)]
    pub truncation: Option<Truncation>,
    /// Hierarchy cutoff K; automatic when absent, see [`RunConfig::resolved_cutoff`].
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub series_form: SeriesForm,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
    #[serde(default)]
    pub closure_check: bool,
}

impl RunConfig {
    pub fn new(params: ModelParams, field: FieldStateSpec, t_end: f64, samples: usize) -> Self {
        Self {
            engine: Engine::Oracle,
            params,
            field,
            envelope: Envelope::default(),
            t_start: 0.0,
            t_end,
            samples,
            truncation: None,
            cutoff: None,
            series_form: SeriesForm::Corrected,
            rtol: None,
            atol: None,
            closure_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.field.validate()?;
        self.envelope.validate()?;
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_end <= self.t_start {
            return Err(Error::InvalidParameter(format!(
                "need t_end > t_start (got {} .. {})",
                self.t_start, self.t_end
            )));
        }
        if self.samples < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 samples, got {}", self.samples)));
        }
        if let Some(t) = self.truncation {
            t.validate()?;
        }
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParameter(format!("{name} must be positive")));
                }
            }
        }
        match self.engine {
            Engine::Series if self.envelope.constant_value() != Some(1.0) => Err(
                Error::InvalidParameter("the series engine needs the constant envelope T = 1".into()),
            ),
            Engine::Oracle if matches!(self.envelope, Envelope::Sinusoidal { .. }) => Err(
                Error::InvalidParameter("the oracle handles piecewise-constant envelopes only".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Uniform grid t_start .. t_end with `samples` points.
    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.samples;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.t_end
                } else {
                    self.t_start + (self.t_end - self.t_start) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn resolved_truncation(&self) -> Result<Truncation> {
        match self.truncation {
            Some(t) => Ok(t),
            None => suggest_truncation(&self.field, DEFAULT_TAIL),
        }
    }

    /// K = max(⌈n̄ + 6√n̄⌉, nmax) + 4, where nmax is the automatic Fock
    /// truncation. The photon-number tail term matters at small n̄, where
    /// ⌈n̄ + 6√n̄⌉ alone leaves closure errors near 1e-6.
    pub fn resolved_cutoff(&self) -> Result<usize> {
        match self.cutoff {
            Some(k) => Ok(k),
            None => {
                let (a, b) = mean_photons(&self.field)?;
                let n = a.max(b);
                let t = suggest_truncation(&self.field, DEFAULT_TAIL)?;
                let by_mean = (n + 6.0 * n.sqrt()).ceil() as usize;
                Ok(by_mean.max(t.nmax1).max(t.nmax2) + 4)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub engine: Engine,
    pub samples: usize,
    pub truncation: Option<Truncation>,
    pub cutoff: Option<usize>,
    pub max_residual_norm: f64,
    pub max_residual_charge: f64,
    /// max |E(t) − E(0)| / |E(0)|, oracle only.
    pub energy_drift: Option<f64>,
    /// Population change when the hierarchy cutoff drops by two.
    pub closure_error: Option<f64>,
    /// Initial weight on edge states whose coupling is truncated away.
    pub cut_weight: Option<f64>,
    pub ode_steps: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub series: ObservableSeries,
    pub summary: RunSummary,
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let grid = config.time_grid();
    match config.engine {
        Engine::Oracle => run_oracle(config, &grid),
        Engine::Series => run_series(config, &grid),
        Engine::Hierarchy => run_hierarchy(config, &grid),
    }
}

fn run_oracle(config: &RunConfig, grid: &[f64]) -> Result<RunOutput> {
    let trunc = config.resolved_truncation()?;
    let psi0 = initial_state(&config.field, trunc)?;
    let opts = EvolveOptions::default();
    let p = &config.params;

    // Piecewise-constant envelope: restart the closed-form propagator at each jump.
    let mut edges: Vec<f64> = config
        .envelope
        .breakpoints()
        .into_iter()
        .filter(|b| *b > config.t_start && *b < config.t_end)
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges.insert(0, config.t_start);
    edges.push(config.t_end);

    let mut states: Vec<StateVector> = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    let mut start = psi0.clone();
    let mut cut_weight = 0.0f64;
    let mut next = 0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let value = config.envelope.value(0.5 * (a + b));
        let prop = Propagator::new(p, &start, value, &opts)?;
        cut_weight = cut_weight.max(prop.cut_weight());
        while next < grid.len() && grid[next] <= b {
            states.push(prop.state_at(grid[next] - a));
            values.push(value);
            next += 1;
        }
        start = prop.state_at(b - a);
    }

    let series = ObservableSeries::from_states(&states, grid);
    let energy_drift = if config.envelope.breakpoints().is_empty() {
        let e0 = energy(p, &psi0, values[0]);
        let scale = e0.abs().max(1e-300);
        Some(
            states
                .iter()
                .zip(&values)
                .map(|(s, v)| (energy(p, s, *v) - e0).abs() / scale)
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let summary = RunSummary {
        engine: Engine::Oracle,
        samples: grid.len(),
        truncation: Some(trunc),
        cutoff: None,
        max_residual_norm: series.max_residual_norm(),
        max_residual_charge: series.max_residual_charge(),
        energy_drift,
        closure_error: None,
        cut_weight: Some(cut_weight),
        ode_steps: None,
    };
    Ok(RunOutput { series, summary })
}

fn run_series(config: &RunConfig, grid: &[f64]) -> Result<RunOutput> {
    let trunc = config.resolved_truncation()?;
    let k = trunc.nmax1.max(trunc.nmax2);
    let series = match config.series_form {
        SeriesForm::Corrected => {
            let s = DiagonalSeries::for_field(&config.params, &config.field, k)?;
            ObservableSeries::from_series(&s, grid)
        }
        SeriesForm::Printed => printed_series(config, grid, k)?,
    };
    let summary = RunSummary {
        engine: Engine::Series,
        samples: grid.len(),
        truncation: Some(trunc),
        max_residual_norm: series.max_residual_norm(),
        max_residual_charge: series.max_residual_charge(),
        ..Default::default()
    };
    Ok(RunOutput { series, summary })
}

/// Uncorrected closed-form population sums; only pop_e is available this way.
fn printed_series(config: &RunConfig, grid: &[f64], k: usize) -> Result<ObservableSeries> {
    use crate::field::FieldState;
    use crate::series::{population_coherent, population_pair_coherent, population_squeezed};
    if config.field.atom != Level::Excited {
        return Err(Error::InvalidParameter(
            "the printed series assume an initially excited atom".into(),
        ));
    }
    let p = &config.params;
    let form = SeriesForm::Printed;
    let pop_e: Vec<f64> = match config.field.field {
        FieldState::Coherent { alpha1, alpha2 } => grid
            .iter()
            .map(|&t| population_coherent(t, p, alpha1.norm(), alpha2.norm(), k, form))
            .collect::<Result<_>>()?,
        FieldState::SqueezedVacuum { r, .. } => grid
            .iter()
            .map(|&t| population_squeezed(t, p, r, k, form))
            .collect::<Result<_>>()?,
        FieldState::PairCoherent { xi, q } => grid
            .iter()
            .map(|&t| population_pair_coherent(t, p, xi.norm(), q, k, form))
            .collect::<Result<_>>()?,
    };
    let n = grid.len();
    let nan = vec![f64::NAN; n];
    let mut s = ObservableSeries {
        t: grid.to_vec(),
        pop_g: pop_e.iter().map(|v| 1.0 - v).collect(),
        pop_e,
        g2_12: vec![None; n],
        n1: nan.clone(),
        n2: nan.clone(),
        n1n2: nan.clone(),
        residual_norm: vec![0.0; n],
        residual_charge1: nan.clone(),
        residual_charge2: nan,
    };
    s.residual_norm = s.pop_e.iter().zip(&s.pop_g).map(|(a, b)| (a + b - 1.0).abs()).collect();
    Ok(s)
}

fn run_hierarchy(config: &RunConfig, grid: &[f64]) -> Result<RunOutput> {
    let k = config.resolved_cutoff()?;
    let ro0 = init_ro(&config.field, k)?;
    let defaults = HierarchyOptions::default();
    let opts = HierarchyOptions {
        rtol: config.rtol.unwrap_or(defaults.rtol),
        atol: config.atol.unwrap_or(defaults.atol),
        closure_check: config.closure_check,
        ..defaults
    };
    let run = integrate(&ro0, &config.params, &config.envelope, grid, &opts)?;
    let series = ObservableSeries::from_hierarchy(&run);
    let summary = RunSummary {
        engine: Engine::Hierarchy,
        samples: grid.len(),
        cutoff: Some(k),
        max_residual_norm: series.max_residual_norm(),
        max_residual_charge: series.max_residual_charge(),
        closure_error: run.closure_error,
        ode_steps: Some(run.stats.accepted),
        ..Default::default()
    };
    Ok(RunOutput { series, summary })
}

/// Deviation between two engines on one observable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Deviation {
    pub max_abs: f64,
    pub mean_abs: f64,
}

impl Deviation {
    fn between(a: &[f64], b: &[f64]) -> Self {
        let d: Vec<f64> = a
            .iter()
            .zip(b)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| (x - y).abs())
            .collect();
        if d.is_empty() {
            return Self::default();
        }
        Self {
            max_abs: d.iter().fold(0.0, |m, v| m.max(*v)),
            mean_abs: d.iter().sum::<f64>() / d.len() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub engines: (Engine, Engine),
    pub pop_e: Deviation,
    pub pop_g: Deviation,
    pub n1: Deviation,
    pub n2: Deviation,
    pub g2_12: Deviation,
}

/// Runs `config` with both engines on the same grid and reports deviations.
pub fn compare(config: &RunConfig, engines: (Engine, Engine)) -> Result<CompareReport> {
    let with = |e: Engine| RunConfig { engine: e, ..config.clone() };
    let (a, b) = rayon::join(|| run(&with(engines.0)), || run(&with(engines.1)));
    let (a, b) = (a?.series, b?.series);
    let g2 = |s: &ObservableSeries| -> Vec<f64> { s.g2_12.iter().map(|v| v.unwrap_or(f64::NAN)).collect() };
    Ok(CompareReport {
        engines,
        pop_e: Deviation::between(&a.pop_e, &b.pop_e),
        pop_g: Deviation::between(&a.pop_g, &b.pop_g),
        n1: Deviation::between(&a.n1, &b.n1),
        n2: Deviation::between(&a.n2, &b.n2),
        g2_12: Deviation::between(&g2(&a), &g2(&b)),
    })
}

/// Independent runs in parallel; results keep the input order.
pub fn run_all(configs: &[RunConfig]) -> Vec<Result<RunOutput>> {
    configs.par_iter().map(run).collect()
}

/// Runs `config` once per χ (applied to both modes), in parallel.
pub fn sweep(config: &RunConfig, chis: &[f64]) -> Vec<Result<RunOutput>> {
    chis.par_iter()
        .map(|&chi| {
            let mut c = config.clone();
            c.params.chi1 = chi;
            c.params.chi2 = chi;
            run(&c)
        })
        .collect()
}

/// χ values of the figure presets.
pub const PRESET_CHIS: [f64; 3] = [0.0, 0.5, 1.0];

pub const PRESET_NAMES: [&str; 3] = ["fig1", "fig2", "fig3"];

/// Field of a figure preset: ten photons per mode, atom excited.
pub fn preset_field(name: &str) -> Result<FieldStateSpec> {
    match name {
        "fig1" => Ok(FieldStateSpec::coherent(10.0, 10.0, Level::Excited)),
        "fig2" => Ok(FieldStateSpec::squeezed(10.0, Level::Excited)),
        "fig3" => FieldStateSpec::pair_coherent(10.0, 0, Level::Excited),
        _ => Err(Error::InvalidParameter(format!(
            "unknown preset '{name}' (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Labelled configurations of a preset, one per χ: resonant, |γ| = 1,
/// T ≡ 1, t ∈ [0, 25] with 500 samples.
pub fn preset(name: &str) -> Result<Vec<(String, RunConfig)>> {
    let field = preset_field(name)?;
    Ok(PRESET_CHIS
        .iter()
        .map(|&chi| {
            let params = ModelParams::resonant(1.0, chi, chi);
            (format!("{name}_chi{chi}"), RunConfig::new(params, field, 25.0, 500))
        })
        .collect())
}
