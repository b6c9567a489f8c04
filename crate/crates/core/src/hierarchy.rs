//! Closed hierarchy of relevant-operator expectation values.
//!
//! The seven families N̂₁, N̂₂, Δ̂₁, Δ̂₂, Î, F̂, N̂₂₁ with indices
//! 0 ≤ n, m ≤ K are integrated as one real ODE system. Their equations of
//! motion reach one index beyond K; that outer "ghost" layer is frozen at its
//! initial value, which is exact to within the initial weight on photon
//! numbers above K.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{factorial_moment, FieldStateSpec};
use crate::hilbert::{ro_expectation, Level, RoFamily, StateVector};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::params::ModelParams;

/// Time dependence T(t) of the atom–field coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Constant { value: f64 },
    /// `value` on [t_on, t_off), zero elsewhere.
    RectPulse { value: f64, t_on: f64, t_off: f64 },
    /// amplitude · sin(frequency · t + phase)
    Sinusoidal { amplitude: f64, frequency: f64, phase: f64 },
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope::Constant { value: 1.0 }
    }
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant { value } => value,
            Envelope::RectPulse { value, t_on, t_off } => {
                if t >= t_on && t < t_off {
                    value
                } else {
                    0.0
                }
            }
            Envelope::Sinusoidal { amplitude, frequency, phase } => {
                amplitude * (frequency * t + phase).sin()
            }
        }
    }

    /// Times where T(t) jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Envelope::RectPulse { t_on, t_off, .. } => vec![t_on, t_off],
            _ => Vec::new(),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            Envelope::Constant { value } => Some(value),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Envelope::Constant { value } => value.is_finite(),
            Envelope::RectPulse { value, t_on, t_off } => {
                value.is_finite() && t_on.is_finite() && t_off.is_finite() && t_on <= t_off
            }
            Envelope::Sinusoidal { amplitude, frequency, phase } => {
                amplitude.is_finite() && frequency.is_finite() && phase.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid envelope {self:?}")))
        }
    }
}

/// Square table of one family, indices 0..=K+1.
#[derive(Clone, Debug, PartialEq)]
pub struct RoTable {
    size: usize,
    data: Vec<f64>,
}

impl RoTable {
    fn zeros(size: usize) -> Self {
        Self { size, data: vec![0.0; size * size] }
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.data[n * self.size + m]
    }

    pub fn set(&mut self, n: usize, m: usize, v: f64) {
        self.data[n * self.size + m] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Relevant-operator expectation values for 0 ≤ n, m ≤ K + 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RoState {
    cutoff: usize,
    pub n1: RoTable,
    pub n2: RoTable,
    pub d1: RoTable,
    pub d2: RoTable,
    pub i: RoTable,
    pub f: RoTable,
    pub n21: RoTable,
}

const FAMILIES: usize = 7;

impl RoState {
    pub fn zeros(cutoff: usize) -> Self {
        let t = RoTable::zeros(cutoff + 2);
        Self {
            cutoff,
            n1: t.clone(),
            n2: t.clone(),
            d1: t.clone(),
            d2: t.clone(),
            i: t.clone(),
            f: t.clone(),
            n21: t,
        }
    }

    /// K: the largest dynamically evolved index.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn table(&self, family: RoFamily) -> &RoTable {
        match family {
            RoFamily::N1 => &self.n1,
            RoFamily::N2 => &self.n2,
            RoFamily::Delta1 => &self.d1,
            RoFamily::Delta2 => &self.d2,
            RoFamily::I => &self.i,
            RoFamily::F => &self.f,
            RoFamily::N21 => &self.n21,
        }
    }

    fn table_mut(&mut self, k: usize) -> &mut RoTable {
        match k {
            0 => &mut self.n1,
            1 => &mut self.n2,
            2 => &mut self.d1,
            3 => &mut self.d2,
            4 => &mut self.i,
            5 => &mut self.f,
            _ => &mut self.n21,
        }
    }

    pub fn get(&self, family: RoFamily, n: usize, m: usize) -> f64 {
        self.table(family).get(n, m)
    }

    /// Values computed directly from a state vector. Needs the state's
    /// truncation to be at least K + 2 in each mode.
    pub fn from_state_vector(psi: &StateVector, gamma: num_complex::Complex64, cutoff: usize) -> Result<Self> {
        let mut s = Self::zeros(cutoff);
        for (k, family) in RoFamily::ALL.iter().enumerate() {
            for n in 0..=cutoff + 1 {
                for m in 0..=cutoff + 1 {
                    let v = ro_expectation(psi, gamma, *family, n, m)?;
                    s.table_mut(k).set(n, m, v);
                }
            }
        }
        Ok(s)
    }

    fn dynamic_len(&self) -> usize {
        FAMILIES * (self.cutoff + 1) * (self.cutoff + 1)
    }

    fn pack(&self) -> Vec<f64> {
        let k = self.cutoff;
        let mut y = Vec::with_capacity(self.dynamic_len());
        for fam in RoFamily::ALL {
            let t = self.table(fam);
            for n in 0..=k {
                for m in 0..=k {
                    y.push(t.get(n, m));
                }
            }
        }
        y
    }

    /// Copy of `self` with the dynamic entries replaced by `y`.
    fn unpack(&self, y: &[f64]) -> Self {
        let mut s = self.clone();
        let k = self.cutoff;
        let block = (k + 1) * (k + 1);
        for f in 0..FAMILIES {
            let t = s.table_mut(f);
            for n in 0..=k {
                for m in 0..=k {
                    t.set(n, m, y[f * block + n * (k + 1) + m]);
                }
            }
        }
        s
    }
}

/// Initial relevant-operator values for a field state with the atom in a
/// definite level. All values come from factorial moments of the field.
pub fn init_ro(spec: &FieldStateSpec, cutoff: usize) -> Result<RoState> {
    spec.validate()?;
    let mut s = RoState::zeros(cutoff);
    let size = cutoff + 2;
    let mut moment = vec![0.0; (size + 1) * (size + 1)];
    for n in 0..=size {
        for m in 0..=size {
            moment[n * (size + 1) + m] = factorial_moment(spec, n, m)?;
        }
    }
    let mom = |n: usize, m: usize| moment[n * (size + 1) + m];
    for n in 0..size {
        for m in 0..size {
            match spec.atom {
                Level::Ground => s.n1.set(n, m, mom(n, m)),
                Level::Excited => s.n2.set(n, m, mom(n, m)),
            }
            s.d1.set(n, m, mom(n + 1, m));
            s.d2.set(n, m, mom(n, m + 1));
        }
    }
    Ok(s)
}

/// Time derivative of every dynamic entry (ghost layer excluded) at
/// coupling envelope `envelope`.
pub fn rhs(state: &RoState, params: &ModelParams, envelope: f64) -> RoState {
    let mut d = RoState::zeros(state.cutoff);
    let k = state.cutoff;
    let lambda0 = params.detuning();
    let s = params.cross_kerr();
    let (e1, e2) = (params.epsilon1(), params.epsilon2());
    let g2 = params.gamma_mod.powi(2);
    let tt = envelope;
    let (f, i, n1, n2, n21) = (&state.f, &state.i, &state.n1, &state.n2, &state.n21);
    for n in 0..=k {
        for m in 0..=k {
            let (x, y) = (n as f64, m as f64);
            let fv = f.get(n, m);
            let f_nm1 = if n > 0 { f.get(n - 1, m) } else { 0.0 };
            let f_mm1 = if m > 0 { f.get(n, m - 1) } else { 0.0 };
            let f_both = if n > 0 && m > 0 { f.get(n - 1, m - 1) } else { 0.0 };
            d.n1.set(n, m, tt * (fv + x * f_nm1 + y * f_mm1 + x * y * f_both));
            d.n2.set(n, m, -tt * fv);
            let f_up_dn = if m > 0 { f.get(n + 1, m - 1) } else { 0.0 };
            d.d1.set(n, m, tt * ((x + 1.0) * fv + y * f_up_dn + (x + 1.0) * y * f_mm1));
            let f_dn_up = if n > 0 { f.get(n - 1, m + 1) } else { 0.0 };
            d.d2.set(n, m, tt * ((y + 1.0) * fv + x * f_dn_up + x * (y + 1.0) * f_nm1));

            let lambda = lambda0 - 2.0 * (x * params.chi1 + y * params.chi2 + (x + y + 1.0) * s);
            d.i.set(
                n,
                m,
                lambda * fv - 2.0 * e1 * f.get(n + 1, m) - 2.0 * e2 * f.get(n, m + 1),
            );
            let (a, b) = (x + 1.0, y + 1.0);
            let pop = |p: usize, q: usize| n2.get(p, q) - n21.get(p, q);
            let bracket = a * b * pop(n, m) + a * pop(n, m + 1) + b * pop(n + 1, m)
                + pop(n + 1, m + 1)
                - (n1.get(n + 1, m + 1) - n21.get(n + 1, m + 1));
            d.f.set(
                n,
                m,
                -lambda * i.get(n, m)
                    + 2.0 * e1 * i.get(n + 1, m)
                    + 2.0 * e2 * i.get(n, m + 1)
                    + 2.0 * g2 * tt * bracket,
            );
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HierarchyOptions {
    pub rtol: f64,
    /// Absolute tolerance relative to the initial size of each (n, m) entry.
    pub atol: f64,
    pub max_steps: usize,
    /// Also integrate with cutoff K − 2 and report the largest difference
    /// in the level populations.
    pub closure_check: bool,
    /// Fail with `TruncationDominated` when the closure difference exceeds this.
    pub closure_budget: Option<f64>,
    pub keep_states: bool,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 2_000_000,
            closure_check: false,
            closure_budget: None,
            keep_states: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HierarchyRun {
    pub t: Vec<f64>,
    /// ⟨N̂₁⁰⁰⟩
    pub pop_g: Vec<f64>,
    /// ⟨N̂₂⁰⁰⟩
    pub pop_e: Vec<f64>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    /// ⟨n1 n2⟩ = ⟨Δ̂₁⁰¹⟩, available when K ≥ 1.
    pub n1n2: Vec<f64>,
    pub states: Option<Vec<RoState>>,
    pub closure_error: Option<f64>,
    pub stats: OdeStats,
}

/// Integrates the hierarchy from `state0` at `t_grid[0]` and samples it on `t_grid`.
pub fn integrate(
    state0: &RoState,
    params: &ModelParams,
    envelope: &Envelope,
    t_grid: &[f64],
    opts: &HierarchyOptions,
) -> Result<HierarchyRun> {
    params.validate()?;
    envelope.validate()?;
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be non-decreasing".into()));
    }
    let mut run = integrate_once(state0, params, envelope, t_grid, opts)?;
    if opts.closure_check {
        let k = state0.cutoff();
        if k < 3 {
            return Err(Error::InvalidTruncation(format!(
                "closure check needs K >= 3, got {k}"
            )));
        }
        let coarse_state = truncate_state(state0, k - 2);
        let coarse_opts = HierarchyOptions { keep_states: false, closure_check: false, ..*opts };
        let coarse = integrate_once(&coarse_state, params, envelope, t_grid, &coarse_opts)?;
        let err = run
            .pop_e
            .iter()
            .zip(&coarse.pop_e)
            .chain(run.pop_g.iter().zip(&coarse.pop_g))
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if let Some(budget) = opts.closure_budget {
            if err > budget {
                return Err(Error::TruncationDominated { tail: err });
            }
        }
        run.closure_error = Some(err);
    }
    Ok(run)
}

/// Restriction to a smaller cutoff; the new ghost layer takes the old
/// values at index K' + 1.
fn truncate_state(state: &RoState, cutoff: usize) -> RoState {
    let mut s = RoState::zeros(cutoff);
    for f in 0..FAMILIES {
        let src = state.table(RoFamily::ALL[f]).clone();
        let dst = s.table_mut(f);
        for n in 0..=cutoff + 1 {
            for m in 0..=cutoff + 1 {
                dst.set(n, m, src.get(n, m));
            }
        }
    }
    s
}

fn integrate_once(
    state0: &RoState,
    params: &ModelParams,
    envelope: &Envelope,
    t_grid: &[f64],
    opts: &HierarchyOptions,
) -> Result<HierarchyRun> {
    let k = state0.cutoff();
    let y0 = state0.pack();
    let block = (k + 1) * (k + 1);
    let mut scale = vec![1.0; y0.len()];
    for n in 0..=k {
        for m in 0..=k {
            let size = (state0.n1.get(n, m) + state0.n2.get(n, m))
                .abs()
                .max(state0.d1.get(n, m).abs())
                .max(state0.d2.get(n, m).abs())
                .max(1.0);
            for f in 0..FAMILIES {
                scale[f * block + n * (k + 1) + m] = size;
            }
        }
    }
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        max_steps: opts.max_steps,
        h0: None,
    };

    // Split at envelope jumps so that no step straddles one.
    let t0 = t_grid[0];
    let t_end = *t_grid.last().unwrap();
    let mut cuts: Vec<f64> = envelope
        .breakpoints()
        .into_iter()
        .filter(|&b| b > t0 && b < t_end)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![t0];
    edges.extend(cuts);
    edges.push(t_end);

    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(t_grid.len());
    let mut y = y0;
    let mut stats = OdeStats::default();
    let mut next = 0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let seg_value = envelope.value(mid);
        let piecewise = matches!(envelope, Envelope::RectPulse { .. } | Envelope::Constant { .. });
        let mut outs: Vec<f64> = Vec::new();
        while next < t_grid.len() && t_grid[next] <= b {
            outs.push(t_grid[next]);
            next += 1;
        }
        let record = outs.len();
        outs.push(b);
        let template = state0.clone();
        let f = |t: f64, yv: &[f64], dy: &mut [f64]| {
            let tt = if piecewise { seg_value } else { envelope.value(t) };
            let st = template.unpack(yv);
            let d = rhs(&st, params, tt);
            dy.copy_from_slice(&d.pack());
        };
        let (ys, st) = ode::solve(f, a, &y, &outs, Some(&scale), &ode_opts)?;
        stats += st;
        y = ys[record].clone();
        samples.extend(ys.into_iter().take(record));
    }

    let mut run = HierarchyRun {
        t: t_grid.to_vec(),
        pop_g: Vec::with_capacity(samples.len()),
        pop_e: Vec::with_capacity(samples.len()),
        n1: Vec::with_capacity(samples.len()),
        n2: Vec::with_capacity(samples.len()),
        n1n2: Vec::with_capacity(samples.len()),
        states: opts.keep_states.then(Vec::new),
        closure_error: None,
        stats,
    };
    let at = |yv: &[f64], f: usize, n: usize, m: usize| yv[f * block + n * (k + 1) + m];
    for yv in &samples {
        run.pop_g.push(at(yv, 0, 0, 0));
        run.pop_e.push(at(yv, 1, 0, 0));
        run.n1.push(at(yv, 2, 0, 0));
        run.n2.push(at(yv, 3, 0, 0));
        run.n1n2.push(if k >= 1 { at(yv, 2, 0, 1) } else { f64::NAN });
        if let Some(states) = run.states.as_mut() {
            states.push(state0.unpack(yv));
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coherent_start(mean: f64, k: usize) -> RoState {
        init_ro(&FieldStateSpec::coherent(mean, mean, Level::Excited), k).unwrap()
    }

    #[test]
    fn envelope_values() {
        let e = Envelope::RectPulse { value: 2.0, t_on: 1.0, t_off: 3.0 };
        assert_eq!(e.value(0.5), 0.0);
        assert_eq!(e.value(1.0), 2.0);
        assert_eq!(e.value(3.0), 0.0);
        assert_eq!(e.breakpoints(), vec![1.0, 3.0]);
        assert!(Envelope::RectPulse { value: 1.0, t_on: 2.0, t_off: 1.0 }.validate().is_err());
    }

    #[test]
    fn initial_values_from_moments() {
        let s = coherent_start(2.0, 6);
        assert!((s.n2.get(0, 0) - 1.0).abs() < 1e-14);
        assert_eq!(s.n1.get(0, 0), 0.0);
        assert!((s.d1.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((s.d1.get(0, 1) - 4.0).abs() < 1e-13);
        assert!((s.n2.get(2, 3) - 32.0).abs() < 1e-11);
        // ghost layer is populated too
        assert!((s.n2.get(7, 0) - 128.0).abs() < 1e-9);
    }

    #[test]
    fn zero_envelope_freezes_populations() {
        let s = coherent_start(1.0, 8);
        let p = ModelParams::resonant(1.0, 0.5, 0.5);
        let ts: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let run = integrate(&s, &p, &Envelope::Constant { value: 0.0 }, &ts, &Default::default()).unwrap();
        for v in &run.pop_e {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn rhs_matches_expectation_derivative() {
        use crate::hilbert::Propagator;
        use crate::params::Truncation;
        let p = ModelParams::with_detuning(0.8, 0.3, 0.6, 0.4);
        let trunc = Truncation::new(24, 24).unwrap();
        let spec = FieldStateSpec::coherent(0.7, 1.1, Level::Excited);
        let psi0 = crate::field::initial_state(&spec, trunc).unwrap();
        let prop = Propagator::new(&p, &psi0, 1.0, &Default::default()).unwrap();
        let (t, h) = (0.9, 1e-4);
        let k = 4;
        let at = |t| RoState::from_state_vector(&prop.state_at(t), p.gamma(), k).unwrap();
        let d = rhs(&at(t), &p, 1.0);
        let (plus, minus) = (at(t + h), at(t - h));
        for fam in RoFamily::ALL {
            for n in 0..=k {
                for m in 0..=k {
                    let fd = (plus.get(fam, n, m) - minus.get(fam, n, m)) / (2.0 * h);
                    let an = d.get(fam, n, m);
                    let tol = 1e-5 * (1.0 + an.abs());
                    assert!((fd - an).abs() < tol, "{} ({n},{m}): {fd} vs {an}", fam.name());
                }
            }
        }
    }

    #[test]
    fn rect_pulse_freezes_outside_window() {
        let s = coherent_start(1.0, 14);
        let p = ModelParams::resonant(1.0, 0.0, 0.0);
        let ts: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let env = Envelope::RectPulse { value: 1.0, t_on: 2.0, t_off: 5.0 };
        let run = integrate(&s, &p, &env, &ts, &Default::default()).unwrap();
        for (t, v) in ts.iter().zip(&run.pop_e) {
            if *t <= 2.0 {
                assert_eq!(*v, 1.0);
            }
        }
        let after: Vec<f64> = ts.iter().zip(&run.pop_e).filter(|(t, _)| **t >= 5.0).map(|(_, v)| *v).collect();
        for v in &after {
            assert!((v - after[0]).abs() < 1e-12);
        }
        assert!(after[0] < 0.999);
    }

    #[test]
    fn closure_check_reports_small_difference() {
        let s = coherent_start(0.5, 16);
        let p = ModelParams::resonant(1.0, 0.5, 0.5);
        let ts: Vec<f64> = (0..=5).map(|i| i as f64).collect();
        let opts = HierarchyOptions { closure_check: true, ..Default::default() };
        let run = integrate(&s, &p, &Envelope::default(), &ts, &opts).unwrap();
        assert!(run.closure_error.unwrap() < 1e-6);
        let strict = HierarchyOptions { closure_budget: Some(0.0), ..opts };
        let r = integrate(&coherent_start(3.0, 4), &p, &Envelope::default(), &ts, &strict);
        assert!(matches!(r, Err(Error::TruncationDominated { .. })));
    }
}
