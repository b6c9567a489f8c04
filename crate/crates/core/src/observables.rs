//! Physical observables derived from any of the engines, revival
//! detection and CSV output.

use std::io::Write;

use crate::error::{Error, Result};
use crate::hierarchy::HierarchyRun;
use crate::hilbert::{charges, Propagator, StateVector};
use crate::series::DiagonalSeries;

/// Below this value of ⟨n1⟩⟨n2⟩ the intermode coherence is left undefined.
pub const G2_GUARD: f64 = 1e-12;

/// g²₁₂ = ⟨n1 n2⟩ / (⟨n1⟩⟨n2⟩) − 1, or `None` when a mode is (nearly) empty.
pub fn g2_intermodes(n1n2: f64, n1: f64, n2: f64) -> Option<f64> {
    let denom = n1 * n2;
    if !denom.is_finite() || denom.abs() < G2_GUARD {
        None
    } else {
        Some(n1n2 / denom - 1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    /// ⟨N̂₂⁰⁰⟩
    pub pop_e: Vec<f64>,
    /// ⟨N̂₁⁰⁰⟩
    pub pop_g: Vec<f64>,
    pub g2_12: Vec<Option<f64>>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    pub n1n2: Vec<f64>,
    /// |pop_e + pop_g − initial total|, or |‖ψ‖² − 1| for state vectors.
    pub residual_norm: Vec<f64>,
    /// |Q_i(t) − Q_i(0)| with Q_i = ⟨a_i†a_i⟩ + ⟨|e⟩⟨e|⟩.
    pub residual_charge1: Vec<f64>,
    pub residual_charge2: Vec<f64>,
}

impl ObservableSeries {
    fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            pop_e: Vec::with_capacity(n),
            pop_g: Vec::with_capacity(n),
            g2_12: Vec::with_capacity(n),
            n1: Vec::with_capacity(n),
            n2: Vec::with_capacity(n),
            n1n2: Vec::with_capacity(n),
            residual_norm: Vec::with_capacity(n),
            residual_charge1: Vec::with_capacity(n),
            residual_charge2: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Builds the series from raw samples with reference totals taken at `t[0]`
    /// unless given.
    #[allow(clippy::too_many_arguments)]
    fn from_moments(
        t: &[f64],
        pop_e: Vec<f64>,
        pop_g: Vec<f64>,
        n1: Vec<f64>,
        n2: Vec<f64>,
        n1n2: Vec<f64>,
        norm_ref: f64,
        charge_ref: Option<(f64, f64)>,
    ) -> Self {
        let mut s = Self::with_capacity(t.len());
        let (q1, q2) = charge_ref.unwrap_or_else(|| match (n1.first(), n2.first(), pop_e.first()) {
            (Some(a), Some(b), Some(e)) => (a + e, b + e),
            _ => (0.0, 0.0),
        });
        for i in 0..t.len() {
            s.t.push(t[i]);
            s.pop_e.push(pop_e[i]);
            s.pop_g.push(pop_g[i]);
            s.g2_12.push(g2_intermodes(n1n2[i], n1[i], n2[i]));
            s.n1.push(n1[i]);
            s.n2.push(n2[i]);
            s.n1n2.push(n1n2[i]);
            s.residual_norm.push((pop_e[i] + pop_g[i] - norm_ref).abs());
            s.residual_charge1.push((n1[i] + pop_e[i] - q1).abs());
            s.residual_charge2.push((n2[i] + pop_e[i] - q2).abs());
        }
        s
    }

    pub fn from_oracle(prop: &Propagator, t_grid: &[f64]) -> Self {
        let states: Vec<StateVector> = t_grid.iter().map(|&t| prop.state_at(t)).collect();
        Self::from_states(&states, t_grid)
    }

    /// Series from state vectors sampled at `t_grid`; charges are referred to the first state.
    pub fn from_states(states: &[StateVector], t_grid: &[f64]) -> Self {
        let mut s = Self::with_capacity(t_grid.len());
        let mut q0 = None;
        for (psi, &t) in states.iter().zip(t_grid) {
            let m = psi.photon_moments();
            let q = charges(psi);
            let (q1, q2) = *q0.get_or_insert(q);
            s.t.push(t);
            s.pop_e.push(m.pop_e);
            s.pop_g.push(m.pop_g);
            s.g2_12.push(g2_intermodes(m.n1n2, m.n1, m.n2));
            s.n1.push(m.n1);
            s.n2.push(m.n2);
            s.n1n2.push(m.n1n2);
            s.residual_norm.push((psi.norm_sqr() - 1.0).abs());
            s.residual_charge1.push((q.0 - q1).abs());
            s.residual_charge2.push((q.1 - q2).abs());
        }
        s
    }

    pub fn from_series(series: &DiagonalSeries, t_grid: &[f64]) -> Self {
        let samples: Vec<_> = t_grid.iter().map(|&t| series.evaluate(t)).collect();
        let init = series.initial();
        Self::from_moments(
            t_grid,
            samples.iter().map(|s| s.pop_e).collect(),
            samples.iter().map(|s| s.pop_g).collect(),
            samples.iter().map(|s| s.n1).collect(),
            samples.iter().map(|s| s.n2).collect(),
            samples.iter().map(|s| s.n1n2).collect(),
            init.pop_e + init.pop_g,
            Some((init.n1 + init.pop_e, init.n2 + init.pop_e)),
        )
    }

    pub fn from_hierarchy(run: &HierarchyRun) -> Self {
        Self::from_moments(
            &run.t,
            run.pop_e.clone(),
            run.pop_g.clone(),
            run.n1.clone(),
            run.n2.clone(),
            run.n1n2.clone(),
            1.0,
            None,
        )
    }

    pub fn max_residual_norm(&self) -> f64 {
        max_of(&self.residual_norm)
    }

    pub fn max_residual_charge(&self) -> f64 {
        max_of(&self.residual_charge1).max(max_of(&self.residual_charge2))
    }

    /// Writes the series as CSV with shortest round-trip float formatting.
    /// Undefined g² samples are written as `NaN`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for i in 0..self.len() {
            let g2 = self.g2_12[i].unwrap_or(f64::NAN);
            let row = [
                self.t[i],
                self.pop_e[i],
                self.pop_g[i],
                g2,
                self.n1[i],
                self.n2[i],
                self.residual_norm[i],
                self.residual_charge1[i],
                self.residual_charge2[i],
            ];
            out.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Csv(e.to_string()))
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "pop_e",
    "pop_g",
    "g2_12",
    "n1",
    "n2",
    "residual_norm",
    "residual_charge1",
    "residual_charge2",
];

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(*x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevivalOptions {
    /// Smoothing window in samples (made odd); zero or one disables smoothing.
    pub window: usize,
    /// Minimum topographic prominence as a fraction of max − min of the input.
    pub prominence: f64,
}

impl RevivalOptions {
    /// Window of one collapse time 2/(|γ|√n̄) on a grid with spacing `dt`.
    pub fn for_collapse(gamma_mod: f64, mean_photons: f64, dt: f64) -> Self {
        let collapse = 2.0 / (gamma_mod * mean_photons.sqrt());
        Self {
            window: (collapse / dt).round() as usize,
            prominence: 0.1,
        }
    }
}

impl Default for RevivalOptions {
    fn default() -> Self {
        Self { window: 1, prominence: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Revival {
    pub index: usize,
    pub t: f64,
    /// Largest raw value within half a window of the peak.
    pub height: f64,
}

/// Revival peaks of a uniformly sampled population curve.
///
/// The curve is first replaced by its running maximum and then by the
/// running mean of that, both over `window` samples, which turns each
/// revival into a single smooth bump. Local maxima of the result with
/// enough prominence are reported.
pub fn detect_revivals(t: &[f64], pop: &[f64], opts: &RevivalOptions) -> Result<Vec<Revival>> {
    if t.len() != pop.len() {
        return Err(Error::InvalidParameter(format!(
            "time grid has {} samples, series has {}",
            t.len(),
            pop.len()
        )));
    }
    let window = opts.window.max(1) | 1;
    if pop.len() < window || pop.len() < 3 {
        return Err(Error::SeriesTooShort { len: pop.len(), window });
    }
    let h = window / 2;
    let n = pop.len();
    let span = |i: usize| (i.saturating_sub(h), (i + h + 1).min(n));
    let runmax: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = span(i);
            pop[a..b].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        })
        .collect();
    let env: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = span(i);
            runmax[a..b].iter().sum::<f64>() / (b - a) as f64
        })
        .collect();

    let (lo, hi) = pop.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| (l.min(*v), u.max(*v)));
    let threshold = opts.prominence * (hi - lo);
    let mut peaks = Vec::new();
    if hi - lo <= 0.0 {
        return Ok(peaks);
    }
    for i in 1..n - 1 {
        if !(env[i] >= env[i - 1] && env[i] > env[i + 1]) {
            continue;
        }
        let mut left_min = env[i];
        let mut j = i;
        while j > 0 && env[j - 1] <= env[i] {
            j -= 1;
            left_min = left_min.min(env[j]);
        }
        let mut right_min = env[i];
        j = i;
        while j < n - 1 && env[j + 1] <= env[i] {
            j += 1;
            right_min = right_min.min(env[j]);
        }
        if env[i] - left_min.max(right_min) >= threshold {
            let (a, b) = span(i);
            let height = pop[a..b].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            peaks.push(Revival { index: i, t: t[i], height });
        }
    }
    Ok(peaks)
}

/// Coefficient of variation (population standard deviation over mean) of
/// the spacings between consecutive revivals; `None` with fewer than three.
pub fn spacing_cv(peaks: &[Revival]) -> Option<f64> {
    if peaks.len() < 3 {
        return None;
    }
    let d: Vec<f64> = peaks.windows(2).map(|w| w[1].t - w[0].t).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
    Some(var.sqrt() / mean)
}
