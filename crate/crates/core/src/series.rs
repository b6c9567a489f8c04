//! Closed-form time evolution for photon-number-diagonal initial states.
//!
//! For a constant envelope every (n, m) block is a two-level Rabi problem
//! with frequency β_{n,m}, where
//!
//! β²_{n,m} = [α − 2(nχ1 + mχ2 + (n+m+1)√(χ1χ2))]² + 4|γ|²(n+1)(m+1).
//!
//! Starting from |n, m, e⟩ the probability of having moved to
//! |n+1, m+1, g⟩ is R_{n,m}(t) = −2|γ|²(n+1)(m+1) C_{n,m}(t) / β²_{n,m}
//! with C = cos(βt) − 1, and the populations are weighted sums of these.
//!
//! Two evaluators are provided for each closed form. [`SeriesForm::Corrected`]
//! is the block solution above and agrees with the exact propagator.
//! [`SeriesForm::Printed`] evaluates the uncorrected closed forms as they are
//! usually quoted:
//! the coherent-state sum lacks the (j+1)(k+1) weight, the squeezed-vacuum
//! sum uses tanh² r where tanh^{2k} r is meant, and the pair-coherent sum
//! has N_q instead of N_q², no 1/β² and β_{k,k} in place of β_{k+q,k}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldState, FieldStateSpec};
use crate::hierarchy::RoState;
use crate::hilbert::Level;
use crate::params::ModelParams;
use crate::sum::NeumaierSum;

/// Largest tolerated photon-distribution mass beyond the series cutoff.
pub const TAIL_BOUND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesForm {
    #[default]
    Corrected,
    Printed,
}

pub fn beta_squared(n: usize, m: usize, params: &ModelParams) -> f64 {
    let lambda = params.block_detuning(n, m);
    lambda * lambda + 4.0 * params.gamma_mod.powi(2) * ((n + 1) * (m + 1)) as f64
}

/// β²_{n,m} cached for 0 ≤ n ≤ k1, 0 ≤ m ≤ k2.
#[derive(Clone, Debug)]
pub struct RabiTable {
    params: ModelParams,
    k2: usize,
    beta2: Vec<f64>,
}

impl RabiTable {
    pub fn new(params: &ModelParams, k1: usize, k2: usize) -> Self {
        let mut beta2 = Vec::with_capacity((k1 + 1) * (k2 + 1));
        for n in 0..=k1 {
            for m in 0..=k2 {
                beta2.push(beta_squared(n, m, params));
            }
        }
        Self { params: *params, k2, beta2 }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn beta2(&self, n: usize, m: usize) -> f64 {
        self.beta2[n * (self.k2 + 1) + m]
    }

    pub fn beta(&self, n: usize, m: usize) -> f64 {
        self.beta2(n, m).sqrt()
    }
}

/// S_{j,k} = sin(β t)
pub fn sin_term(beta: f64, t: f64) -> f64 {
    (beta * t).sin()
}

/// C_{j,k} = cos(β t) − 1, evaluated as −2 sin²(βt/2).
pub fn cos_term(beta: f64, t: f64) -> f64 {
    -2.0 * (0.5 * beta * t).sin().powi(2)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// a^{n,m}_{j,k} = (−1)^{n+m+j+k+1} / [(n−j)! j! (m−k)! k!], zero unless n ≥ j and m ≥ k.
pub fn series_coefficient(n: usize, m: usize, j: usize, k: usize) -> f64 {
    if n < j || m < k {
        return 0.0;
    }
    let sign = if (n + m + j + k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    sign / (factorial(n - j) * factorial(j) * factorial(m - k) * factorial(k))
}

#[derive(Clone, Copy, Debug)]
struct BlockTerm {
    n: usize,
    m: usize,
    beta: f64,
    /// 2|γ|²(n+1)(m+1)/β² · [p_e(n,m) − p_g(n+1,m+1)]
    amplitude: f64,
}

/// Populations and photon moments at one instant from a series engine.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SeriesSample {
    pub pop_e: f64,
    pub pop_g: f64,
    pub n1: f64,
    pub n2: f64,
    pub n1n2: f64,
}

/// Block series for an initial state diagonal in photon number with the
/// atom in |g⟩ or |e⟩.
#[derive(Clone, Debug)]
pub struct DiagonalSeries {
    terms: Vec<BlockTerm>,
    initial: SeriesSample,
}

impl DiagonalSeries {
    /// `weight(n, m)` is the initial probability of |n, m⟩ for atom `level`,
    /// for n ≤ k1, m ≤ k2.
    pub fn new(
        params: &ModelParams,
        level: Level,
        k1: usize,
        k2: usize,
        weight: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let table = RabiTable::new(params, k1, k2);
        let g2 = params.gamma_mod.powi(2);
        let mut initial = SeriesSample::default();
        let mut terms = Vec::new();
        for n in 0..=k1 {
            for m in 0..=k2 {
                let p = weight(n, m);
                if p == 0.0 {
                    continue;
                }
                match level {
                    Level::Excited => initial.pop_e += p,
                    Level::Ground => initial.pop_g += p,
                }
                initial.n1 += p * n as f64;
                initial.n2 += p * m as f64;
                initial.n1n2 += p * (n * m) as f64;
                // block partner: |n,m,e⟩ ↔ |n+1,m+1,g⟩
                let (bn, bm, sign) = match level {
                    Level::Excited => (n, m, 1.0),
                    Level::Ground if n > 0 && m > 0 => (n - 1, m - 1, -1.0),
                    Level::Ground => continue,
                };
                let b2 = table.beta2(bn, bm);
                if b2 == 0.0 {
                    continue;
                }
                let depth = 2.0 * g2 * ((bn + 1) * (bm + 1)) as f64 / b2;
                terms.push(BlockTerm {
                    n: bn,
                    m: bm,
                    beta: b2.sqrt(),
                    amplitude: sign * depth * p,
                });
            }
        }
        terms.sort_by(|a, b| a.amplitude.abs().total_cmp(&b.amplitude.abs()));
        Self { terms, initial }
    }

    /// Series for one of the implemented field families with cutoff `k`
    /// in each mode.
    pub fn for_field(params: &ModelParams, spec: &FieldStateSpec, k: usize) -> Result<Self> {
        spec.validate()?;
        let level = spec.atom;
        match spec.field {
            FieldState::Coherent { alpha1, alpha2 } => {
                let p1 = poisson_weights(alpha1.norm_sqr(), k)?;
                let p2 = poisson_weights(alpha2.norm_sqr(), k)?;
                Ok(Self::new(params, level, k, k, |n, m| p1[n] * p2[m]))
            }
            FieldState::SqueezedVacuum { r, .. } => {
                let p = squeezed_weights(r, k)?;
                Ok(Self::new(params, level, k, k, |n, m| if n == m { p[n] } else { 0.0 }))
            }
            FieldState::PairCoherent { xi, q } => {
                let p = pair_weights(xi.norm_sqr(), q, k)?;
                Ok(Self::new(params, level, k + q, k, |n, m| {
                    if n == m + q {
                        p[m]
                    } else {
                        0.0
                    }
                }))
            }
        }
    }

    pub fn initial(&self) -> SeriesSample {
        self.initial
    }

    pub fn evaluate(&self, t: f64) -> SeriesSample {
        let mut transfer = NeumaierSum::new();
        let mut n1n2 = NeumaierSum::new();
        for term in &self.terms {
            let r = -term.amplitude * cos_term(term.beta, t);
            transfer += r;
            n1n2 += r * (term.n + term.m + 1) as f64;
        }
        let d = transfer.value();
        let s = self.initial;
        SeriesSample {
            pop_e: s.pop_e - d,
            pop_g: s.pop_g + d,
            n1: s.n1 + d,
            n2: s.n2 + d,
            n1n2: s.n1n2 + n1n2.value(),
        }
    }
}

/// Poisson(μ) probabilities for n ≤ k, failing when the tail beyond k
/// reaches `TAIL_BOUND`.
fn poisson_weights(mu: f64, k: usize) -> Result<Vec<f64>> {
    let mut p = Vec::with_capacity(k + 1);
    let mut ln_fact = 0.0;
    for n in 0..=k {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        p.push(if mu == 0.0 {
            if n == 0 { 1.0 } else { 0.0 }
        } else {
            (-mu + n as f64 * mu.ln() - ln_fact).exp()
        });
    }
    let tail = poisson_tail(mu, k);
    if tail >= TAIL_BOUND {
        return Err(Error::ConvergenceNotReached { tail, bound: TAIL_BOUND });
    }
    Ok(p)
}

/// P(N > k) for N ~ Poisson(μ), summed directly.
fn poisson_tail(mu: f64, k: usize) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let ln_fact: f64 = (1..=k + 1).map(|n| (n as f64).ln()).sum();
    let mut term = (-mu + (k + 1) as f64 * mu.ln() - ln_fact).exp();
    let mut sum = 0.0f64;
    let mut n = k + 1;
    while term > 1e-30 * sum.max(1e-300) || (n as f64) < mu {
        sum += term;
        n += 1;
        term *= mu / n as f64;
        if n > k + 100_000 {
            break;
        }
    }
    sum
}

fn squeezed_weights(r: f64, k: usize) -> Result<Vec<f64>> {
    let x = r.tanh().powi(2);
    let w: Vec<f64> = (0..=k).map(|n| (1.0 - x) * x.powi(n as i32)).collect();
    let tail = x.powi(k as i32 + 1);
    if tail >= TAIL_BOUND {
        return Err(Error::ConvergenceNotReached { tail, bound: TAIL_BOUND });
    }
    Ok(w)
}

/// Normalized pair-coherent probabilities N_q² |ξ|^{2n}/(n!(n+q)!) for n ≤ k.
fn pair_weights(xi2: f64, q: usize, k: usize) -> Result<Vec<f64>> {
    let norm2 = crate::field::pair_coherent_norm(num_complex::Complex64::new(xi2.sqrt(), 0.0), q)?
        .powi(2);
    let mut w = Vec::with_capacity(k + 1);
    let mut term = norm2 / factorial(q);
    for n in 0..=k {
        if n > 0 {
            term *= xi2 / (n * (n + q)) as f64;
        }
        w.push(term);
    }
    let tail = (1.0 - w.iter().sum::<f64>()).max(0.0);
    if tail >= TAIL_BOUND {
        return Err(Error::ConvergenceNotReached { tail, bound: TAIL_BOUND });
    }
    Ok(w)
}

/// Excited-level population for coherent fields |α1⟩|α2⟩ and an excited atom.
pub fn population_coherent(
    t: f64,
    params: &ModelParams,
    alpha1: f64,
    alpha2: f64,
    k: usize,
    form: SeriesForm,
) -> Result<f64> {
    let (mu1, mu2) = (alpha1 * alpha1, alpha2 * alpha2);
    match form {
        SeriesForm::Corrected => {
            let spec = FieldStateSpec::coherent(mu1, mu2, Level::Excited);
            Ok(DiagonalSeries::for_field(params, &spec, k)?.evaluate(t).pop_e)
        }
        SeriesForm::Printed => {
            let p1 = poisson_weights(mu1, k)?;
            let p2 = poisson_weights(mu2, k)?;
            let table = RabiTable::new(params, k, k);
            let mut acc = NeumaierSum::new();
            for j in 0..=k {
                for l in 0..=k {
                    acc += p1[j] * p2[l] * cos_term(table.beta(j, l), t) / table.beta2(j, l);
                }
            }
            Ok(1.0 + 2.0 * params.gamma_mod.powi(2) * acc.value())
        }
    }
}

/// Excited-level population for the two-mode squeezed vacuum and an excited atom.
pub fn population_squeezed(
    t: f64,
    params: &ModelParams,
    r: f64,
    k: usize,
    form: SeriesForm,
) -> Result<f64> {
    match form {
        SeriesForm::Corrected => {
            let spec = FieldStateSpec::new(FieldState::SqueezedVacuum { r, phi: 0.0 }, Level::Excited);
            Ok(DiagonalSeries::for_field(params, &spec, k)?.evaluate(t).pop_e)
        }
        SeriesForm::Printed => {
            let th2 = r.tanh().powi(2);
            let table = RabiTable::new(params, k, k);
            let mut acc = NeumaierSum::new();
            for n in 0..=k {
                acc += ((n + 1) * (n + 1)) as f64 * th2 * cos_term(table.beta(n, n), t)
                    / table.beta2(n, n);
            }
            Ok(1.0 + 2.0 * params.gamma_mod.powi(2) / r.cosh().powi(2) * acc.value())
        }
    }
}

/// Excited-level population for a pair coherent field |ξ, q⟩ and an excited atom.
pub fn population_pair_coherent(
    t: f64,
    params: &ModelParams,
    xi: f64,
    q: usize,
    k: usize,
    form: SeriesForm,
) -> Result<f64> {
    match form {
        SeriesForm::Corrected => {
            let spec = FieldStateSpec::new(
                FieldState::PairCoherent { xi: num_complex::Complex64::new(xi, 0.0), q },
                Level::Excited,
            );
            Ok(DiagonalSeries::for_field(params, &spec, k)?.evaluate(t).pop_e)
        }
        SeriesForm::Printed => {
            let nq = crate::field::pair_coherent_norm(num_complex::Complex64::new(xi, 0.0), q)?;
            let table = RabiTable::new(params, k, k);
            let xi2 = xi * xi;
            let mut acc = NeumaierSum::new();
            let mut w = 1.0 / factorial(q);
            for n in 0..=k {
                if n > 0 {
                    w *= xi2 / (n * (n + q)) as f64;
                }
                acc += ((n + 1) * (n + q + 1)) as f64 * w * cos_term(table.beta(n, n), t);
            }
            Ok(1.0 + 2.0 * params.gamma_mod.powi(2) * nq * acc.value())
        }
    }
}

/// Level populations returned by the general relevant-operator series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelPopulations {
    /// ⟨N̂₁⁰⁰⟩
    pub ground: f64,
    /// ⟨N̂₂⁰⁰⟩
    pub excited: f64,
}

/// Level populations from the initial relevant-operator moments alone.
///
/// The photon distribution of each level is recovered from its factorial
/// moments with the coefficients a^{n,m}_{j,k}. That inversion is an
/// alternating sum, so accuracy degrades quickly with photon number:
/// beyond a few photons per mode use [`DiagonalSeries`] instead. For the
/// two-mode squeezed vacuum the inversion diverges as K grows once
/// ⟨n⟩ exceeds about 0.17 (tanh²r > (3 − √5)²/4).
#[derive(Clone, Debug)]
pub struct GeneralRoSeries {
    table: RabiTable,
    /// Σ_{n,m} a^{n,m}_{j,k} B^{n,m}, indexed like `table`.
    weights: Vec<f64>,
    cutoff: usize,
    form: SeriesForm,
    initial: LevelPopulations,
}

impl GeneralRoSeries {
    pub fn new(params: &ModelParams, ro0: &RoState, form: SeriesForm) -> Result<Self> {
        params.validate()?;
        let k = ro0.cutoff();
        let scale = ro0.n1.max_abs().max(ro0.n2.max_abs()).max(1.0);
        let coherence = ro0.i.max_abs().max(ro0.f.max_abs());
        if coherence > 1e-12 * scale {
            return Err(Error::NonDiagonalInitialState(coherence));
        }
        let g2 = params.gamma_mod.powi(2);
        // B^{n,m}: the |γ|² bracket driving dF^{n,m}/dt, for n, m ≤ k
        let bracket = |n: usize, m: usize| -> f64 {
            let (a, b) = ((n + 1) as f64, (m + 1) as f64);
            let n2 = |x, y| ro0.n2.get(x, y);
            let n21 = |x, y| ro0.n21.get(x, y);
            let common = a * b * (n2(n, m) - n21(n, m)) + a * (n2(n, m + 1) - n21(n, m + 1))
                + n2(n + 1, m + 1)
                - ro0.n1.get(n + 1, m + 1);
            let v = match form {
                SeriesForm::Corrected => common + b * (n2(n + 1, m) - n21(n + 1, m)),
                SeriesForm::Printed => common,
            };
            2.0 * g2 * v
        };
        let mut b = vec![0.0; (k + 1) * (k + 1)];
        for n in 0..=k {
            for m in 0..=k {
                b[n * (k + 1) + m] = bracket(n, m);
            }
        }
        let table = RabiTable::new(params, k, k);
        let mut weights = vec![0.0; (k + 1) * (k + 1)];
        for j in 0..=k {
            for l in 0..=k {
                let mut terms: Vec<f64> = Vec::new();
                for n in j..=k {
                    for m in l..=k {
                        let v = b[n * (k + 1) + m];
                        if v != 0.0 {
                            terms.push(series_coefficient(n, m, j, l) * v);
                        }
                    }
                }
                weights[j * (k + 1) + l] = crate::sum::sum_ascending(&mut terms);
            }
        }
        Ok(Self {
            table,
            weights,
            cutoff: k,
            form,
            initial: LevelPopulations {
                ground: ro0.n1.get(0, 0),
                excited: ro0.n2.get(0, 0),
            },
        })
    }

    pub fn evaluate(&self, t: f64) -> LevelPopulations {
        let k = self.cutoff;
        let mut terms = Vec::with_capacity((k + 1) * (k + 1));
        for j in 0..=k {
            for l in 0..=k {
                let w = self.weights[j * (k + 1) + l];
                if w != 0.0 {
                    let b2 = self.table.beta2(j, l);
                    terms.push(cos_term(b2.sqrt(), t) / b2 * w);
                }
            }
        }
        let s = crate::sum::sum_ascending(&mut terms);
        let ground = match self.form {
            SeriesForm::Corrected => self.initial.ground + s,
            SeriesForm::Printed => self.initial.ground - s,
        };
        LevelPopulations {
            ground,
            excited: self.initial.ground + self.initial.excited - ground,
        }
    }
}

/// ⟨N̂₁⁰⁰⟩(t) and ⟨N̂₂⁰⁰⟩(t) from initial moments, see [`GeneralRoSeries`].
pub fn general_ro_series(
    t: f64,
    params: &ModelParams,
    ro0: &RoState,
    form: SeriesForm,
) -> Result<LevelPopulations> {
    Ok(GeneralRoSeries::new(params, ro0, form)?.evaluate(t))
}
