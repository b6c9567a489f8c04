//! Stark-shift model with the same relevant-operator dynamics as the Kerr model.
//!
//! The Stark Hamiltonian replaces the Kerr energy by
//! (a1†a1 + a2†a2)(η1 |g⟩⟨g| + η2 |e⟩⟨e|) and uses shifted mode frequencies
//! ω_{s1}, ω_{s2}. Within each (n, m) block only the level gap matters, and
//! the two gaps agree for every block exactly when
//!
//! η1 − η2 = 2ε  and  ω_{s1} + ω_{s2} = ω1 + ω2 + 2√(χ1χ2) − 2η1,
//!
//! with ε = χ + √(χ1χ2) and χ1 = χ2 = χ. [`MatchingRule::Corrected`] splits the
//! second condition as ω_{si} = ω_i + √(χ1χ2) − η1. [`MatchingRule::Printed`]
//! uses ω_{si} = ω_i + √(χ1χ2) − η_i instead, whose gaps are off by 2ε in
//! every block, so it breaks the equivalence whenever χ > 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{initial_state, suggest_truncation, FieldStateSpec};
use crate::hilbert::{quadrature, ro_expectation, EvolveOptions, Hamiltonian, Level, Propagator, RoFamily};
use crate::params::{ModelParams, Truncation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarkParams {
    pub ws1: f64,
    pub ws2: f64,
    /// Stark coefficient of the lower level.
    pub eta1: f64,
    /// Stark coefficient of the upper level.
    pub eta2: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingRule {
    #[default]
    Corrected,
    Printed,
}

/// Tolerance for the matching conditions; they hold up to rounding.
const MATCH_TOL: f64 = 1e-12;

pub fn map_kerr_to_stark(params: &ModelParams, gauge_eta2: f64) -> Result<StarkParams> {
    map_kerr_to_stark_with(params, gauge_eta2, MatchingRule::Corrected)
}

pub fn map_kerr_to_stark_with(
    params: &ModelParams,
    gauge_eta2: f64,
    rule: MatchingRule,
) -> Result<StarkParams> {
    params.validate()?;
    if !gauge_eta2.is_finite() {
        return Err(Error::InvalidParameter("non-finite gauge".into()));
    }
    if params.chi1 != params.chi2 {
        return Err(Error::KerrAsymmetry { chi1: params.chi1, chi2: params.chi2 });
    }
    let s = params.cross_kerr();
    let eta2 = gauge_eta2;
    let eta1 = eta2 + 2.0 * params.epsilon1();
    let sp = match rule {
        MatchingRule::Corrected => StarkParams {
            ws1: params.w1 + s - eta1,
            ws2: params.w2 + s - eta1,
            eta1,
            eta2,
        },
        MatchingRule::Printed => StarkParams {
            ws1: params.w1 + s - eta1,
            ws2: params.w2 + s - eta2,
            eta1,
            eta2,
        },
    };
    if rule == MatchingRule::Corrected {
        sp.check(params)?;
    }
    Ok(sp)
}

impl StarkParams {
    /// Checks that every block gap of the Stark model equals the Kerr one.
    pub fn check(&self, params: &ModelParams) -> Result<()> {
        let s = params.cross_kerr();
        let sum = self.ws1 + self.ws2 - (params.w1 + params.w2 + 2.0 * s - 2.0 * self.eta1);
        let slope = self.eta1 - self.eta2 - 2.0 * params.epsilon1();
        let asym = params.epsilon1() - params.epsilon2();
        let worst = sum.abs().max(slope.abs()).max(asym.abs());
        if worst > MATCH_TOL * (1.0 + params.w1.abs() + params.w2.abs()) {
            return Err(Error::InvalidParameter(format!(
                "Stark parameters do not match the Kerr model (mismatch {worst:e})"
            )));
        }
        Ok(())
    }
}

/// Stark Hamiltonian sharing level energies and coupling with a Kerr model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StarkModel {
    pub e1: f64,
    pub e2: f64,
    pub gamma: Complex64,
    pub stark: StarkParams,
}

impl StarkModel {
    pub fn new(params: &ModelParams, stark: StarkParams) -> Self {
        Self { e1: params.e1, e2: params.e2, gamma: params.gamma(), stark }
    }
}

impl Hamiltonian for StarkModel {
    fn validate(&self) -> Result<()> {
        let s = self.stark;
        let all = [self.e1, self.e2, self.gamma.re, self.gamma.im, s.ws1, s.ws2, s.eta1, s.eta2];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("non-finite Stark constant".into()))
        }
    }

    fn diagonal(&self, n1: usize, n2: usize, level: Level) -> f64 {
        let s = self.stark;
        let (x, y) = (n1 as f64, n2 as f64);
        let (e, eta) = match level {
            Level::Ground => (self.e1, s.eta1),
            Level::Excited => (self.e2, s.eta2),
        };
        e + s.ws1 * x + s.ws2 * y + (x + y) * eta
    }

    fn coupling(&self) -> Complex64 {
        self.gamma
    }
}

/// Largest index (in each mode) compared by [`verify_equivalence`].
pub const COMPARED_INDEX: usize = 3;

/// Per-time deviations between the Kerr and Stark evolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceRow {
    pub t: f64,
    /// max over 0 ≤ n, m ≤ 3 of |RO_kerr − RO_stark|, in `RoFamily::ALL` order.
    pub families: [f64; 7],
    /// |⟨a_i + a_i†⟩_kerr − ⟨a_i + a_i†⟩_stark|
    pub quadrature: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
}

impl EquivalenceReport {
    pub fn max_family(&self, family: RoFamily) -> f64 {
        let k = RoFamily::ALL.iter().position(|f| *f == family).unwrap();
        self.rows.iter().fold(0.0, |a, r| a.max(r.families[k]))
    }

    /// Largest deviation over all relevant-operator families.
    pub fn max_ro(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.families).fold(0.0, f64::max)
    }

    pub fn max_quadrature(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.quadrature).fold(0.0, f64::max)
    }

    /// First time at which the relevant-operator deviation exceeds `level`.
    pub fn first_exceeding(&self, level: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.families.iter().any(|v| *v > level))
            .map(|r| r.t)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(RoFamily::ALL.iter().map(|f| f.name().to_string()));
        header.push("quad1".into());
        header.push("quad2".into());
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![format!("{:?}", r.t)];
            rec.extend(r.families.iter().map(|v| format!("{v:?}")));
            rec.extend(r.quadrature.iter().map(|v| format!("{v:?}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Evolves `spec` exactly under both Hamiltonians and compares the relevant
/// operators with indices up to 3 and the two field quadratures.
pub fn verify_equivalence(
    params: &ModelParams,
    stark: &StarkParams,
    spec: &FieldStateSpec,
    t_grid: &[f64],
) -> Result<EquivalenceReport> {
    let suggested = suggest_truncation(spec, 1e-14)?;
    let floor = COMPARED_INDEX + 3;
    let trunc = Truncation::new(suggested.nmax1.max(floor), suggested.nmax2.max(floor))?;
    let psi0 = initial_state(spec, trunc)?;
    let opts = EvolveOptions::default();
    let kerr = Propagator::new(params, &psi0, 1.0, &opts)?;
    let model = StarkModel::new(params, *stark);
    let starkp = Propagator::new(&model, &psi0, 1.0, &opts)?;
    let gamma = params.gamma();
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (a, b) = (kerr.state_at(t), starkp.state_at(t));
        let mut families = [0.0f64; 7];
        for (k, fam) in RoFamily::ALL.iter().enumerate() {
            for n in 0..=COMPARED_INDEX {
                for m in 0..=COMPARED_INDEX {
                    let d = ro_expectation(&a, gamma, *fam, n, m)? - ro_expectation(&b, gamma, *fam, n, m)?;
                    families[k] = families[k].max(d.abs());
                }
            }
        }
        let quadrature = [
            (quadrature(&a, 1) - quadrature(&b, 1)).abs(),
            (quadrature(&a, 2) - quadrature(&b, 2)).abs(),
        ];
        rows.push(EquivalenceRow { t, families, quadrature });
    }
    Ok(EquivalenceReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kerr_map() {
        let p = ModelParams::resonant(1.0, 0.0, 0.0);
        let s = map_kerr_to_stark(&p, 0.3).unwrap();
        assert_eq!(s.eta1, 0.3);
        assert_eq!(s.eta2, 0.3);
        assert!((s.ws1 - (p.w1 - 0.3)).abs() < 1e-15);
        assert!((s.ws2 - (p.w2 - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn half_kerr_map() {
        let p = ModelParams::resonant(1.0, 0.5, 0.5);
        let s = map_kerr_to_stark(&p, 0.0).unwrap();
        assert_eq!(s.eta1, 2.0);
        assert_eq!(s.eta2, 0.0);
        assert!((s.ws1 - (p.w1 + 0.5 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_kerr_rejected() {
        let p = ModelParams::resonant(1.0, 0.5, 0.4);
        assert!(matches!(map_kerr_to_stark(&p, 0.0), Err(Error::KerrAsymmetry { .. })));
    }

    #[test]
    fn block_gaps_agree() {
        let p = ModelParams::with_detuning(1.0, 0.7, 0.7, 0.2);
        let s = StarkModel::new(&p, map_kerr_to_stark(&p, -0.4).unwrap());
        for n in 0..8 {
            for m in 0..8 {
                let kerr = p.diagonal(n, m, Level::Excited) - p.diagonal(n + 1, m + 1, Level::Ground);
                let st = s.diagonal(n, m, Level::Excited) - s.diagonal(n + 1, m + 1, Level::Ground);
                assert!((kerr - st).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn printed_rule_shifts_gaps() {
        let p = ModelParams::resonant(1.0, 0.5, 0.5);
        let sp = map_kerr_to_stark_with(&p, 0.0, MatchingRule::Printed).unwrap();
        assert!(sp.check(&p).is_err());
        let s = StarkModel::new(&p, sp);
        let kerr = p.diagonal(1, 2, Level::Excited) - p.diagonal(2, 3, Level::Ground);
        let st = s.diagonal(1, 2, Level::Excited) - s.diagonal(2, 3, Level::Ground);
        assert!((kerr - st - 2.0 * p.epsilon1()).abs() < 1e-12);
    }
}
