//! Initial two-mode field states and their photon statistics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{falling_factorial, Level, StateVector};
use crate::params::Truncation;

/// Relative size below which a series term no longer matters.
const TERM_EPS: f64 = 1e-17;
const MAX_TERMS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldState {
    /// |α1⟩ ⊗ |α2⟩
    Coherent { alpha1: Complex64, alpha2: Complex64 },
    /// (cosh r)⁻¹ Σ (e^{iφ} tanh r)ⁿ |n, n⟩
    SqueezedVacuum { r: f64, phi: f64 },
    /// N_q Σ ξⁿ / √(n!(n+q)!) |n+q, n⟩
    PairCoherent { xi: Complex64, q: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldStateSpec {
    pub field: FieldState,
    pub atom: Level,
}

impl FieldStateSpec {
    pub fn new(field: FieldState, atom: Level) -> Self {
        Self { field, atom }
    }

    /// Coherent state with |α1|² = n1 and |α2|² = n2, real amplitudes.
    pub fn coherent(n1: f64, n2: f64, atom: Level) -> Self {
        Self::new(
            FieldState::Coherent {
                alpha1: Complex64::new(n1.max(0.0).sqrt(), 0.0),
                alpha2: Complex64::new(n2.max(0.0).sqrt(), 0.0),
            },
            atom,
        )
    }

    /// Two-mode squeezed vacuum with sinh² r = `mean`.
    pub fn squeezed(mean: f64, atom: Level) -> Self {
        Self::new(
            FieldState::SqueezedVacuum { r: squeezing_for_mean(mean), phi: 0.0 },
            atom,
        )
    }

    /// Pair coherent state with real ξ calibrated so that ⟨n2⟩ = `mean`.
    pub fn pair_coherent(mean: f64, q: usize, atom: Level) -> Result<Self> {
        let xi = pair_coherent_xi_for_mean(mean, q)?;
        Ok(Self::new(
            FieldState::PairCoherent { xi: Complex64::new(xi, 0.0), q },
            atom,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.field {
            FieldState::Coherent { alpha1, alpha2 } => {
                alpha1.is_finite() && alpha2.is_finite()
            }
            FieldState::SqueezedVacuum { r, phi } => r.is_finite() && r >= 0.0 && phi.is_finite(),
            FieldState::PairCoherent { xi, .. } => xi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid field state {:?}", self.field)))
        }
    }
}

/// Fock amplitudes c(n1, n2) of a field state, truncated and renormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPhotonDistribution {
    pub nmax1: usize,
    pub nmax2: usize,
    amps: Vec<Complex64>,
    /// Probability of the untruncated state lying outside the table.
    pub tail_mass: f64,
}

impl JointPhotonDistribution {
    pub fn amplitude(&self, n1: usize, n2: usize) -> Complex64 {
        self.amps[n1 * (self.nmax2 + 1) + n2]
    }

    pub fn probability(&self, n1: usize, n2: usize) -> f64 {
        self.amplitude(n1, n2).norm_sqr()
    }

    pub fn total_probability(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// ⟨(a1†)ⁿ(a2†)ᵐ a2ᵐ a1ⁿ⟩ summed over the table.
    ///
    /// Fails when the last two rows and columns of the table contribute more
    /// than 1e-8 of the result, since the moment then depends on the cut.
    pub fn factorial_moment(&self, n: usize, m: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut edge = 0.0;
        for x in 0..=self.nmax1 {
            for y in 0..=self.nmax2 {
                let p = self.probability(x, y);
                if p == 0.0 {
                    continue;
                }
                let v = p * falling_factorial(x, n) * falling_factorial(y, m);
                total += v;
                if x + 2 > self.nmax1 || y + 2 > self.nmax2 {
                    edge += v;
                }
            }
        }
        if total > 0.0 && edge > 1e-8 * total {
            return Err(Error::TruncationDominated { tail: edge / total });
        }
        Ok(total)
    }
}

/// ln n! for n = 0, 1, ..., len − 1.
fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    for k in 0..len {
        if k > 0 {
            acc += (k as f64).ln();
        }
        out.push(acc);
    }
    out
}

/// Normalized coherent-state amplitudes e^{−|α|²/2} αⁿ / √(n!) for n ≤ nmax.
fn coherent_amplitudes(alpha: Complex64, nmax: usize, lnf: &[f64]) -> Vec<Complex64> {
    let mu = alpha.norm_sqr();
    (0..=nmax)
        .map(|n| {
            if mu == 0.0 {
                return Complex64::new(if n == 0 { 1.0 } else { 0.0 }, 0.0);
            }
            let ln_mag = -0.5 * mu + n as f64 * alpha.norm().ln() - 0.5 * lnf[n];
            Complex64::from_polar(ln_mag.exp(), n as f64 * alpha.arg())
        })
        .collect()
}

/// Unnormalized pair-coherent weights |ξ|^{2k} / (k!(k+q)!) up to convergence;
/// returns (weights, sum).
fn pair_weights(xi_abs2: f64, q: usize) -> Result<(Vec<f64>, f64)> {
    let mut term = 1.0 / (1..=q).fold(1.0, |acc, k| acc * k as f64);
    let mut weights = vec![term];
    let mut sum = term;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= xi_abs2 / (k as f64 * (k + q) as f64);
        weights.push(term);
        sum += term;
        // past the peak once the ratio drops below one
        let past_peak = xi_abs2 < (k * (k + q)) as f64;
        if past_peak && term < TERM_EPS * sum {
            break;
        }
        if k > MAX_TERMS {
            return Err(Error::TruncationDominated { tail: term / sum });
        }
    }
    Ok((weights, sum))
}

/// N_q = [Σ |ξ|^{2n} / (n!(n+q)!)]^{−1/2}
pub fn pair_coherent_norm(xi: Complex64, q: usize) -> Result<f64> {
    let (_, sum) = pair_weights(xi.norm_sqr(), q)?;
    Ok(sum.powf(-0.5))
}

/// Photon-number distribution of the diagonal families: returns
/// (offset q, p(k) for occupation |k+q, k⟩).
fn diagonal_distribution(field: &FieldState) -> Result<Option<(usize, Vec<f64>)>> {
    match *field {
        FieldState::Coherent { .. } => Ok(None),
        FieldState::SqueezedVacuum { r, .. } => {
            let x = r.tanh().powi(2);
            let mut p = Vec::new();
            let mut term = 1.0 - x;
            let mut sum = 0.0;
            loop {
                p.push(term);
                sum += term;
                if term <= TERM_EPS * sum || x == 0.0 {
                    break;
                }
                if p.len() > MAX_TERMS {
                    return Err(Error::TruncationDominated { tail: term });
                }
                term *= x;
            }
            Ok(Some((0, p)))
        }
        FieldState::PairCoherent { xi, q } => {
            let (w, sum) = pair_weights(xi.norm_sqr(), q)?;
            Ok(Some((q, w.into_iter().map(|v| v / sum).collect())))
        }
    }
}

/// Poisson probabilities for mean `mu` until the tail is negligible.
fn poisson_pmf(mu: f64) -> Vec<f64> {
    if mu == 0.0 {
        return vec![1.0];
    }
    let mut out = Vec::new();
    let mut ln_fact = 0.0;
    let mut sum = 0.0;
    for k in 0.. {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let p = (-mu + k as f64 * mu.ln() - ln_fact).exp();
        out.push(p);
        sum += p;
        if k as f64 > mu && p < TERM_EPS * sum {
            break;
        }
    }
    out
}

/// Truncated, renormalized Fock amplitudes of `spec`.
pub fn amplitudes(spec: &FieldStateSpec, trunc: Truncation) -> Result<JointPhotonDistribution> {
    spec.validate()?;
    trunc.validate()?;
    let (n1max, n2max) = (trunc.nmax1, trunc.nmax2);
    let mut amps = vec![Complex64::new(0.0, 0.0); (n1max + 1) * (n2max + 1)];
    let idx = |a: usize, b: usize| a * (n2max + 1) + b;
    match spec.field {
        FieldState::Coherent { alpha1, alpha2 } => {
            let lnf = ln_factorials(n1max.max(n2max) + 1);
            let c1 = coherent_amplitudes(alpha1, n1max, &lnf);
            let c2 = coherent_amplitudes(alpha2, n2max, &lnf);
            for (a, &x) in c1.iter().enumerate() {
                for (b, &y) in c2.iter().enumerate() {
                    amps[idx(a, b)] = x * y;
                }
            }
        }
        FieldState::SqueezedVacuum { r, phi } => {
            let ratio = Complex64::from_polar(r.tanh(), phi);
            let mut c = Complex64::new(1.0 / r.cosh(), 0.0);
            for k in 0..=n1max.min(n2max) {
                amps[idx(k, k)] = c;
                c *= ratio;
            }
        }
        FieldState::PairCoherent { xi, q } => {
            let norm = pair_coherent_norm(xi, q)?;
            // ξᵏ / √(k!(k+q)!) by recurrence
            let mut c = Complex64::new(norm / (1..=q).fold(1.0, |a, k| a * k as f64).sqrt(), 0.0);
            let mut k = 0;
            while k + q <= n1max && k <= n2max {
                amps[idx(k + q, k)] = c;
                k += 1;
                c *= xi / ((k * (k + q)) as f64).sqrt();
            }
        }
    }
    let captured: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    if !(captured > 0.0 && captured.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "field state {:?} has no weight inside truncation ({n1max}, {n2max})",
            spec.field
        )));
    }
    let scale = captured.sqrt();
    for c in &mut amps {
        *c /= scale;
    }
    Ok(JointPhotonDistribution {
        nmax1: n1max,
        nmax2: n2max,
        amps,
        tail_mass: (1.0 - captured).max(0.0),
    })
}

/// Field state ⊗ atomic level as a normalized state vector.
pub fn initial_state(spec: &FieldStateSpec, trunc: Truncation) -> Result<StateVector> {
    let dist = amplitudes(spec, trunc)?;
    let mut psi = StateVector::zeros(trunc);
    for n1 in 0..=trunc.nmax1 {
        for n2 in 0..=trunc.nmax2 {
            psi.set(n1, n2, spec.atom, dist.amplitude(n1, n2));
        }
    }
    Ok(psi)
}

/// Normally ordered cross moment ⟨(a1†)ⁿ(a2†)ᵐ a2ᵐ a1ⁿ⟩ of the untruncated state.
pub fn factorial_moment(spec: &FieldStateSpec, n: usize, m: usize) -> Result<f64> {
    spec.validate()?;
    match spec.field {
        FieldState::Coherent { alpha1, alpha2 } => {
            Ok(alpha1.norm_sqr().powi(n as i32) * alpha2.norm_sqr().powi(m as i32))
        }
        FieldState::SqueezedVacuum { r, .. } => {
            let x = r.tanh().powi(2);
            let start = n.max(m);
            if x == 0.0 {
                return Ok(if start == 0 { 1.0 } else { 0.0 });
            }
            // (1−x) Σ_k x^k f_n(k) f_m(k); terms grow until k ≈ (n+m)/(−ln x)
            let peak = (n + m) as f64 / -x.ln();
            let mut sum = 0.0;
            let mut k = start;
            let mut xk = x.powi(start as i32);
            loop {
                let term = (1.0 - x) * xk * falling_factorial(k, n) * falling_factorial(k, m);
                sum += term;
                if k as f64 > peak && term <= TERM_EPS * sum {
                    break;
                }
                if k > MAX_TERMS {
                    return Err(Error::TruncationDominated { tail: term / sum });
                }
                k += 1;
                xk *= x;
            }
            Ok(sum)
        }
        FieldState::PairCoherent { xi, q } => {
            let (_, p) = diagonal_distribution(&spec.field)?.expect("diagonal family");
            // p(k) stops where it is negligible on its own; high moments need
            // the tail extended through p(k+1)/p(k) = |ξ|²/((k+1)(k+1+q))
            let x = xi.norm_sqr();
            let mut total = 0.0;
            let mut pk = 0.0;
            for (k, &v) in p.iter().enumerate() {
                pk = v;
                total += pk * falling_factorial(k + q, n) * falling_factorial(k, m);
            }
            let mut k = p.len();
            let mut prev = f64::INFINITY;
            loop {
                pk *= x / (k * (k + q)) as f64;
                let term = pk * falling_factorial(k + q, n) * falling_factorial(k, m);
                total += term;
                if term <= TERM_EPS * total && term < prev {
                    break;
                }
                if k > MAX_TERMS {
                    return Err(Error::TruncationDominated { tail: term / total });
                }
                prev = term;
                k += 1;
            }
            Ok(total)
        }
    }
}

/// (⟨n1⟩, ⟨n2⟩) of the untruncated state.
pub fn mean_photons(spec: &FieldStateSpec) -> Result<(f64, f64)> {
    match spec.field {
        FieldState::Coherent { alpha1, alpha2 } => Ok((alpha1.norm_sqr(), alpha2.norm_sqr())),
        FieldState::SqueezedVacuum { r, .. } => {
            let n = r.sinh().powi(2);
            Ok((n, n))
        }
        FieldState::PairCoherent { q, .. } => {
            let n2 = factorial_moment(spec, 0, 1)?;
            Ok((n2 + q as f64, n2))
        }
    }
}

/// r with sinh² r = `mean`.
pub fn squeezing_for_mean(mean: f64) -> f64 {
    mean.max(0.0).sqrt().asinh()
}

/// Real ξ ≥ 0 for which the pair coherent state has ⟨n2⟩ = `mean`, by bisection.
pub fn pair_coherent_xi_for_mean(mean: f64, q: usize) -> Result<f64> {
    let n2_of = |xi: f64| -> Result<f64> {
        let spec = FieldStateSpec::new(
            FieldState::PairCoherent { xi: Complex64::new(xi, 0.0), q },
            Level::Excited,
        );
        factorial_moment(&spec, 0, 1)
    };
    let (lo, hi) = (0.0, 4.0 * mean + 2.0 * q as f64 + 10.0);
    if !mean.is_finite() || mean < 0.0 || n2_of(hi)? < mean {
        return Err(Error::BisectionFailed { target: mean, lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if n2_of(mid)? < mean {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-15 * b.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Marginal photon-number distributions (mode 1, mode 2) of the untruncated state.
fn marginals(spec: &FieldStateSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    match spec.field {
        FieldState::Coherent { alpha1, alpha2 } => {
            Ok((poisson_pmf(alpha1.norm_sqr()), poisson_pmf(alpha2.norm_sqr())))
        }
        _ => {
            let (q, p) = diagonal_distribution(&spec.field)?.expect("diagonal family");
            let mut p1 = vec![0.0; q];
            p1.extend_from_slice(&p);
            Ok((p1, p))
        }
    }
}

/// Smallest nmax with P(n ≥ nmax − 1) < `tail_tol`, and not below ⌈n̄ + 8√n̄⌉.
fn nmax_for_pmf(pmf: &[f64], tail_tol: f64) -> usize {
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let mut survival = vec![0.0; pmf.len() + 1];
    for k in (0..pmf.len()).rev() {
        survival[k] = survival[k + 1] + pmf[k];
    }
    let mut nmax = Truncation::nmax_for_mean(mean).max(2);
    while nmax - 1 < survival.len() && survival[nmax - 1] >= tail_tol {
        nmax += 1;
    }
    nmax
}

/// Truncation whose marginal tails within two photons of the edge stay below
/// `tail_tol`.
pub fn suggest_truncation(spec: &FieldStateSpec, tail_tol: f64) -> Result<Truncation> {
    spec.validate()?;
    let (p1, p2) = marginals(spec)?;
    Truncation::new(nmax_for_pmf(&p1, tail_tol), nmax_for_pmf(&p2, tail_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(r: f64) -> FieldStateSpec {
        FieldStateSpec::new(FieldState::SqueezedVacuum { r, phi: 0.0 }, Level::Excited)
    }

    fn pc(xi: f64, q: usize) -> FieldStateSpec {
        FieldStateSpec::new(
            FieldState::PairCoherent { xi: Complex64::new(xi, 0.0), q },
            Level::Excited,
        )
    }

    #[test]
    fn unsqueezed_vacuum() {
        let d = amplitudes(&sv(0.0), Truncation::new(4, 4).unwrap()).unwrap();
        assert_eq!(d.amplitude(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(d.total_probability(), 1.0);
    }

    #[test]
    fn coherent_mean_photons() {
        let spec = FieldStateSpec::coherent(10.0, 10.0, Level::Excited);
        let (a, b) = mean_photons(&spec).unwrap();
        assert!((a - 10.0).abs() < 1e-14 && (b - 10.0).abs() < 1e-14);
        let t = suggest_truncation(&spec, 1e-12).unwrap();
        let d = amplitudes(&spec, t).unwrap();
        let n1: f64 = (0..=t.nmax1)
            .flat_map(|x| (0..=t.nmax2).map(move |y| (x, y)))
            .map(|(x, y)| x as f64 * d.probability(x, y))
            .sum();
        assert!((n1 - 10.0).abs() < 1e-9);
        assert!((d.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_coherent_normalization() {
        // brute force: [Σ_{n≤40} 1/(n!)²]^{-1/2}
        let mut s = 0.0;
        let mut f = 1.0;
        for n in 0..=40 {
            if n > 0 {
                f *= n as f64;
            }
            s += 1.0 / (f * f);
        }
        let expect = s.powf(-0.5);
        let nq = pair_coherent_norm(Complex64::new(1.0, 0.0), 0).unwrap();
        assert!((nq - expect).abs() < 1e-15);
        // the quoted five-digit value 0.66231 is 1.6e-5 below the sum
        assert!((nq - 0.66231).abs() < 2e-5);
    }

    #[test]
    fn pair_coherent_offset() {
        let spec = pc(1.7, 3);
        let t = Truncation::new(30, 30).unwrap();
        let d = amplitudes(&spec, t).unwrap();
        for x in 0..=30 {
            for y in 0..=30 {
                if d.probability(x, y) > 0.0 {
                    assert_eq!(x, y + 3);
                }
            }
        }
        let (n1, n2) = mean_photons(&spec).unwrap();
        assert!((n1 - n2 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_factorial_moment() {
        let spec = FieldStateSpec::coherent(10.0, 10.0, Level::Excited);
        assert!((factorial_moment(&spec, 1, 1).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn squeezed_moments() {
        let r = 0.8f64;
        let spec = sv(r);
        assert!((factorial_moment(&spec, 1, 0).unwrap() - r.sinh().powi(2)).abs() < 1e-13);
        // marginal is geometric with ratio tanh² r
        let t = Truncation::new(120, 120).unwrap();
        let d = amplitudes(&spec, t).unwrap();
        let x = r.tanh().powi(2);
        for k in 0..20 {
            let expect = (1.0 - x) * x.powi(k as i32);
            assert!((d.probability(k, k) - expect).abs() < 1e-15);
        }
        let spec10 = FieldStateSpec::squeezed(10.0, Level::Excited);
        let (a, b) = mean_photons(&spec10).unwrap();
        assert!((a - 10.0).abs() < 1e-12 && (b - 10.0).abs() < 1e-12);
    }

    #[test]
    fn pair_coherent_moment_brute_force() {
        // p(n) ∝ 1/(n!)², moment(1,1) = Σ n² p(n), mean = Σ n p(n), to n = 40
        let mut w = Vec::new();
        let mut f = 1.0;
        for n in 0..=40 {
            if n > 0 {
                f *= n as f64;
            }
            w.push(1.0 / (f * f));
        }
        let z: f64 = w.iter().sum();
        let m11: f64 = w.iter().enumerate().map(|(n, p)| (n * n) as f64 * p / z).sum();
        let mean: f64 = w.iter().enumerate().map(|(n, p)| n as f64 * p / z).sum();
        let spec = pc(1.0, 0);
        assert!((factorial_moment(&spec, 1, 1).unwrap() - m11).abs() < 1e-14);
        let (a, b) = mean_photons(&spec).unwrap();
        assert!((a - mean).abs() < 1e-14 && (b - mean).abs() < 1e-14);
    }

    #[test]
    fn xi_calibration() {
        let xi = pair_coherent_xi_for_mean(10.0, 0).unwrap();
        let (_, n2) = mean_photons(&pc(xi, 0)).unwrap();
        assert!((n2 - 10.0).abs() < 1e-10);
        assert!(pair_coherent_xi_for_mean(-1.0, 0).is_err());
        assert_eq!(squeezing_for_mean(10.0).sinh().powi(2).round(), 10.0);
    }

    #[test]
    fn table_moment_flags_truncation() {
        let spec = FieldStateSpec::coherent(10.0, 10.0, Level::Excited);
        let d = amplitudes(&spec, Truncation::new(12, 12).unwrap()).unwrap();
        assert!(matches!(d.factorial_moment(1, 0), Err(Error::TruncationDominated { .. })));
        assert!(d.tail_mass > 1e-3);
    }

    #[test]
    fn truncation_follows_tail() {
        let t = suggest_truncation(&FieldStateSpec::squeezed(10.0, Level::Excited), 1e-12).unwrap();
        let x: f64 = 10.0 / 11.0;
        assert!(x.powi(t.nmax1 as i32 - 1) < 1e-12);
        assert!(x.powi(t.nmax1 as i32 - 2) >= 1e-12);
        let tc = suggest_truncation(&FieldStateSpec::coherent(10.0, 10.0, Level::Excited), 1e-12).unwrap();
        assert!(tc.nmax1 >= 36);
    }
}
