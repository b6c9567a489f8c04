//! Truncated Fock space |n1, n2⟩ ⊗ {|g⟩, |e⟩} and exact propagation.
//!
//! The interaction γ a1 a2 |e⟩⟨g| + h.c. only connects |n1, n2, e⟩ with
//! |n1+1, n2+1, g⟩, so the Hamiltonian splits into 2×2 blocks (plus
//! 1×1 remainders) labelled by the charges M1 = n1 + e and M2 = n2 + e.
//! Each block is propagated in closed form, which makes this module the
//! reference against which the series and hierarchy engines are checked.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, Truncation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[serde(alias = "g")]
    Ground,
    #[serde(alias = "e")]
    Excited,
}

impl Level {
    fn bit(self) -> usize {
        match self {
            Level::Ground => 0,
            Level::Excited => 1,
        }
    }

    /// Atomic excitation number (0 for |g⟩, 1 for |e⟩).
    pub fn excitation(self) -> usize {
        self.bit()
    }
}

/// Anything whose matrix is diagonal in |n1, n2, level⟩ apart from the
/// two-photon exchange term with constant γ.
pub trait Hamiltonian: Sync {
    fn validate(&self) -> Result<()>;
    /// Diagonal matrix element on |n1, n2, level⟩.
    fn diagonal(&self, n1: usize, n2: usize, level: Level) -> f64;
    /// The coupling constant γ multiplying a1 a2 |e⟩⟨g|.
    fn coupling(&self) -> Complex64;
}

impl Hamiltonian for ModelParams {
    fn validate(&self) -> Result<()> {
        ModelParams::validate(self)
    }

    fn diagonal(&self, n1: usize, n2: usize, level: Level) -> f64 {
        let atom = match level {
            Level::Ground => self.e1,
            Level::Excited => self.e2,
        };
        atom + self.w1 * n1 as f64 + self.w2 * n2 as f64 + self.kerr_energy(n1, n2)
    }

    fn coupling(&self) -> Complex64 {
        self.gamma()
    }
}

/// x (x−1) ⋯ (x−n+1), zero when n > x.
pub fn falling_factorial(x: usize, n: usize) -> f64 {
    if n > x {
        return 0.0;
    }
    ((x - n + 1)..=x).fold(1.0, |acc, k| acc * k as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    trunc: Truncation,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(trunc: Truncation) -> Self {
        Self {
            trunc,
            amps: vec![Complex64::new(0.0, 0.0); trunc.dim()],
        }
    }

    pub fn basis(trunc: Truncation, n1: usize, n2: usize, level: Level) -> Result<Self> {
        trunc.validate()?;
        if n1 > trunc.nmax1 || n2 > trunc.nmax2 {
            return Err(Error::IndexOutOfRange { n: n1, m: n2 });
        }
        let mut psi = Self::zeros(trunc);
        psi.set(n1, n2, level, Complex64::new(1.0, 0.0));
        Ok(psi)
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    #[inline]
    pub fn index(&self, n1: usize, n2: usize, level: Level) -> usize {
        ((n1 * (self.trunc.nmax2 + 1) + n2) << 1) | level.bit()
    }

    #[inline]
    pub fn get(&self, n1: usize, n2: usize, level: Level) -> Complex64 {
        self.amps[self.index(n1, n2, level)]
    }

    pub fn set(&mut self, n1: usize, n2: usize, level: Level, value: Complex64) {
        let i = self.index(n1, n2, level);
        self.amps[i] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            for c in &mut self.amps {
                *c /= norm;
            }
        }
    }

    /// Iterates over (n1, n2, level, amplitude).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Level, Complex64)> + '_ {
        let stride = self.trunc.nmax2 + 1;
        self.amps.iter().enumerate().map(move |(i, &c)| {
            let level = if i & 1 == 1 { Level::Excited } else { Level::Ground };
            let cell = i >> 1;
            (cell / stride, cell % stride, level, c)
        })
    }

    /// Probability mass on states with n1 ≥ nmax1 − 1 or n2 ≥ nmax2 − 1.
    pub fn edge_weight(&self) -> f64 {
        let (e1, e2) = (
            self.trunc.nmax1.saturating_sub(1),
            self.trunc.nmax2.saturating_sub(1),
        );
        self.iter()
            .filter(|&(n1, n2, _, _)| n1 >= e1 || n2 >= e2)
            .map(|(_, _, _, c)| c.norm_sqr())
            .sum()
    }

    /// Σ conj(c(x,y,e)) w(x,y) √((x+1)(y+1)) c(x+1,y+1,g) over all pairs.
    fn exchange_sum(&self, weight: impl Fn(usize, usize) -> f64) -> Complex64 {
        let mut z = Complex64::new(0.0, 0.0);
        for x in 0..self.trunc.nmax1 {
            for y in 0..self.trunc.nmax2 {
                let ce = self.get(x, y, Level::Excited);
                let cg = self.get(x + 1, y + 1, Level::Ground);
                if ce == Complex64::new(0.0, 0.0) || cg == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let w = weight(x, y);
                if w != 0.0 {
                    z += ce.conj() * cg * (w * (((x + 1) * (y + 1)) as f64).sqrt());
                }
            }
        }
        z
    }

    /// Level populations and the photon-number moments needed for g²₁₂.
    pub fn photon_moments(&self) -> PhotonMoments {
        let mut m = PhotonMoments::default();
        for (n1, n2, level, c) in self.iter() {
            let p = c.norm_sqr();
            if p == 0.0 {
                continue;
            }
            match level {
                Level::Ground => m.pop_g += p,
                Level::Excited => m.pop_e += p,
            }
            m.n1 += p * n1 as f64;
            m.n2 += p * n2 as f64;
            m.n1n2 += p * (n1 * n2) as f64;
        }
        m
    }
}

/// Populations and photon-number moments of one state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhotonMoments {
    pub pop_e: f64,
    pub pop_g: f64,
    pub n1: f64,
    pub n2: f64,
    /// ⟨a1†a1 a2†a2⟩
    pub n1n2: f64,
}

/// Hamiltonian matrix over the truncated basis in `StateVector` index
/// order, with the coupling envelope frozen at `envelope`.
pub fn build_hamiltonian<H: Hamiltonian>(
    h: &H,
    trunc: Truncation,
    envelope: f64,
) -> Result<DMatrix<Complex64>> {
    h.validate()?;
    trunc.validate()?;
    if !envelope.is_finite() {
        return Err(Error::InvalidParameter("envelope value must be finite".into()));
    }
    let layout = StateVector::zeros(trunc);
    let dim = trunc.dim();
    let mut mat = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let g = h.coupling() * envelope;
    for n1 in 0..=trunc.nmax1 {
        for n2 in 0..=trunc.nmax2 {
            for level in [Level::Ground, Level::Excited] {
                let i = layout.index(n1, n2, level);
                mat[(i, i)] = Complex64::new(h.diagonal(n1, n2, level), 0.0);
            }
            if n1 < trunc.nmax1 && n2 < trunc.nmax2 {
                let ie = layout.index(n1, n2, Level::Excited);
                let ig = layout.index(n1 + 1, n2 + 1, Level::Ground);
                let v = g * (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                mat[(ie, ig)] = v;
                mat[(ig, ie)] = v.conj();
            }
        }
    }
    Ok(mat)
}

/// Invariant subspace of the Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub enum ExcitationBlock {
    /// Basis (|n1, n2, e⟩, |n1+1, n2+1, g⟩); `matrix` is Hermitian.
    Pair {
        n1: usize,
        n2: usize,
        matrix: [[Complex64; 2]; 2],
    },
    /// An uncoupled state. `cut` marks an excited state whose partner lies
    /// beyond the truncation, so its coupling was dropped.
    Single {
        n1: usize,
        n2: usize,
        level: Level,
        energy: f64,
        cut: bool,
    },
}

impl ExcitationBlock {
    pub fn dim(&self) -> usize {
        match self {
            ExcitationBlock::Pair { .. } => 2,
            ExcitationBlock::Single { .. } => 1,
        }
    }

    /// Basis states of the block as (n1, n2, level).
    pub fn states(&self) -> Vec<(usize, usize, Level)> {
        match *self {
            ExcitationBlock::Pair { n1, n2, .. } => {
                vec![(n1, n2, Level::Excited), (n1 + 1, n2 + 1, Level::Ground)]
            }
            ExcitationBlock::Single { n1, n2, level, .. } => vec![(n1, n2, level)],
        }
    }

    /// Conserved charges (M1, M2) = (n1 + e, n2 + e).
    pub fn charges(&self) -> (usize, usize) {
        let (n1, n2, level) = self.states()[0];
        (n1 + level.excitation(), n2 + level.excitation())
    }
}

pub fn block_decompose<H: Hamiltonian>(
    h: &H,
    trunc: Truncation,
    envelope: f64,
) -> Result<Vec<ExcitationBlock>> {
    h.validate()?;
    trunc.validate()?;
    if !envelope.is_finite() {
        return Err(Error::InvalidParameter("envelope value must be finite".into()));
    }
    let g = h.coupling() * envelope;
    let mut blocks = Vec::with_capacity(trunc.dim() / 2 + trunc.nmax1 + trunc.nmax2 + 2);
    for n1 in 0..=trunc.nmax1 {
        for n2 in 0..=trunc.nmax2 {
            if n1 == 0 || n2 == 0 {
                blocks.push(ExcitationBlock::Single {
                    n1,
                    n2,
                    level: Level::Ground,
                    energy: h.diagonal(n1, n2, Level::Ground),
                    cut: false,
                });
            }
            let e_energy = h.diagonal(n1, n2, Level::Excited);
            if n1 < trunc.nmax1 && n2 < trunc.nmax2 {
                let off = g * (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                let g_energy = h.diagonal(n1 + 1, n2 + 1, Level::Ground);
                blocks.push(ExcitationBlock::Pair {
                    n1,
                    n2,
                    matrix: [
                        [Complex64::new(e_energy, 0.0), off],
                        [off.conj(), Complex64::new(g_energy, 0.0)],
                    ],
                });
            } else {
                blocks.push(ExcitationBlock::Single {
                    n1,
                    n2,
                    level: Level::Excited,
                    energy: e_energy,
                    cut: true,
                });
            }
        }
    }
    Ok(blocks)
}

/// Dense matrix reassembled from blocks, in `StateVector` index order.
pub fn assemble_blocks(blocks: &[ExcitationBlock], trunc: Truncation) -> DMatrix<Complex64> {
    let layout = StateVector::zeros(trunc);
    let dim = trunc.dim();
    let mut mat = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for block in blocks {
        match *block {
            ExcitationBlock::Pair { n1, n2, matrix } => {
                let idx = [
                    layout.index(n1, n2, Level::Excited),
                    layout.index(n1 + 1, n2 + 1, Level::Ground),
                ];
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        mat[(i, j)] = matrix[a][b];
                    }
                }
            }
            ExcitationBlock::Single { n1, n2, level, energy, .. } => {
                let i = layout.index(n1, n2, level);
                mat[(i, i)] = Complex64::new(energy, 0.0);
            }
        }
    }
    mat
}

#[derive(Clone, Copy, Debug)]
enum BlockEvolution {
    Pair {
        ie: usize,
        ig: usize,
        center: f64,
        half_gap: f64,
        off: Complex64,
        omega: f64,
    },
    Single {
        i: usize,
        energy: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Largest tolerated probability within two photons of the truncation edge.
    pub leakage_threshold: f64,
    /// Largest tolerated |⟨ψ0|ψ0⟩ − 1|.
    pub norm_tolerance: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            leakage_threshold: 1e-8,
            norm_tolerance: 1e-10,
        }
    }
}

/// Closed-form propagator for a fixed initial state and constant envelope.
///
/// Only blocks carrying initial weight are kept, so evaluating a state
/// costs O(occupied blocks) plus the allocation of the output vector.
#[derive(Clone, Debug)]
pub struct Propagator {
    psi0: StateVector,
    blocks: Vec<BlockEvolution>,
    cut_weight: f64,
}

impl Propagator {
    pub fn new<H: Hamiltonian>(
        h: &H,
        psi0: &StateVector,
        envelope: f64,
        opts: &EvolveOptions,
    ) -> Result<Self> {
        let trunc = psi0.truncation();
        let deviation = (psi0.norm_sqr() - 1.0).abs();
        if deviation > opts.norm_tolerance {
            return Err(Error::NotNormalized { deviation });
        }
        let edge = psi0.edge_weight();
        if edge > opts.leakage_threshold {
            return Err(Error::TruncationLeakage {
                weight: edge,
                threshold: opts.leakage_threshold,
            });
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut blocks = Vec::new();
        let mut cut_weight = 0.0;
        for block in block_decompose(h, trunc, envelope)? {
            match block {
                ExcitationBlock::Pair { n1, n2, matrix } => {
                    let ie = psi0.index(n1, n2, Level::Excited);
                    let ig = psi0.index(n1 + 1, n2 + 1, Level::Ground);
                    if psi0.amps[ie] == zero && psi0.amps[ig] == zero {
                        continue;
                    }
                    let (a, d) = (matrix[0][0].re, matrix[1][1].re);
                    let half_gap = 0.5 * (a - d);
                    let off = matrix[0][1];
                    blocks.push(BlockEvolution::Pair {
                        ie,
                        ig,
                        center: 0.5 * (a + d),
                        half_gap,
                        off,
                        omega: half_gap.hypot(off.norm()),
                    });
                }
                ExcitationBlock::Single { n1, n2, level, energy, cut } => {
                    let i = psi0.index(n1, n2, level);
                    if psi0.amps[i] == zero {
                        continue;
                    }
                    if cut {
                        cut_weight += psi0.amps[i].norm_sqr();
                    }
                    blocks.push(BlockEvolution::Single { i, energy });
                }
            }
        }
        Ok(Self {
            psi0: psi0.clone(),
            blocks,
            cut_weight,
        })
    }

    /// Initial weight on excited states whose coupling was dropped at the edge.
    pub fn cut_weight(&self) -> f64 {
        self.cut_weight
    }

    pub fn state_at(&self, t: f64) -> StateVector {
        let mut out = StateVector::zeros(self.psi0.truncation());
        let src = &self.psi0.amps;
        let i_unit = Complex64::new(0.0, 1.0);
        for block in &self.blocks {
            match *block {
                BlockEvolution::Pair { ie, ig, center, half_gap, off, omega } => {
                    let (ce, cg) = (src[ie], src[ig]);
                    let cos = (omega * t).cos();
                    // sin(Ωt)/Ω → t as Ω → 0
                    let sinc = if omega > 0.0 {
                        (omega * t).sin() / omega
                    } else {
                        t
                    };
                    let phase = Complex64::from_polar(1.0, -center * t);
                    let new_e = (ce * Complex64::new(cos, -half_gap * sinc)
                        - i_unit * off * sinc * cg)
                        * phase;
                    let new_g = (cg * Complex64::new(cos, half_gap * sinc)
                        - i_unit * off.conj() * sinc * ce)
                        * phase;
                    out.amps[ie] = new_e;
                    out.amps[ig] = new_g;
                }
                BlockEvolution::Single { i, energy } => {
                    out.amps[i] = src[i] * Complex64::from_polar(1.0, -energy * t);
                }
            }
        }
        out
    }
}

/// Exact time evolution of `psi0` under constant envelope `envelope`,
/// sampled at `t_grid`.
pub fn evolve_exact<H: Hamiltonian>(
    psi0: &StateVector,
    h: &H,
    envelope: f64,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<StateVector>> {
    let prop = Propagator::new(h, psi0, envelope, opts)?;
    Ok(t_grid.iter().map(|&t| prop.state_at(t)).collect())
}

/// The seven relevant-operator families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoFamily {
    /// (a1†)ⁿ(a2†)ᵐ |g⟩⟨g| a2ᵐ a1ⁿ
    N1,
    /// (a1†)ⁿ(a2†)ᵐ |e⟩⟨e| a2ᵐ a1ⁿ
    N2,
    /// (a1†)ⁿ(a2†)ᵐ a1†a1 a2ᵐ a1ⁿ
    Delta1,
    /// (a1†)ⁿ(a2†)ᵐ a2†a2 a2ᵐ a1ⁿ
    Delta2,
    /// (a1†)ⁿ(a2†)ᵐ (γ a1a2 |e⟩⟨g| + h.c.) a2ᵐ a1ⁿ
    I,
    /// (a1†)ⁿ(a2†)ᵐ i(γ a1a2 |e⟩⟨g| − h.c.) a2ᵐ a1ⁿ
    F,
    /// (a1†)ⁿ(a2†)ᵐ b2†b2 b1†b1 a2ᵐ a1ⁿ, zero on a single two-level atom.
    N21,
}

impl RoFamily {
    pub const ALL: [RoFamily; 7] = [
        RoFamily::N1,
        RoFamily::N2,
        RoFamily::Delta1,
        RoFamily::Delta2,
        RoFamily::I,
        RoFamily::F,
        RoFamily::N21,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RoFamily::N1 => "N1",
            RoFamily::N2 => "N2",
            RoFamily::Delta1 => "D1",
            RoFamily::Delta2 => "D2",
            RoFamily::I => "I",
            RoFamily::F => "F",
            RoFamily::N21 => "N21",
        }
    }

    /// Highest photon numbers (mode 1, mode 2) the operator touches.
    fn reach(self, n: usize, m: usize) -> (usize, usize) {
        match self {
            RoFamily::Delta1 => (n + 1, m),
            RoFamily::Delta2 => (n, m + 1),
            RoFamily::I | RoFamily::F => (n + 1, m + 1),
            _ => (n, m),
        }
    }
}

/// ⟨ψ| Ô |ψ⟩ for the relevant operator `family` with indices (n, m).
/// `gamma` is the coupling constant appearing inside Î and F̂.
pub fn ro_expectation(
    psi: &StateVector,
    gamma: Complex64,
    family: RoFamily,
    n: usize,
    m: usize,
) -> Result<f64> {
    let trunc = psi.truncation();
    let (r1, r2) = family.reach(n, m);
    if r1 > trunc.nmax1 || r2 > trunc.nmax2 {
        return Err(Error::IndexOutOfRange { n, m });
    }
    let diag = |f: &dyn Fn(usize, usize, Level) -> f64| -> f64 {
        psi.iter()
            .map(|(x, y, level, c)| {
                let p = c.norm_sqr();
                if p == 0.0 {
                    0.0
                } else {
                    p * f(x, y, level)
                }
            })
            .sum()
    };
    let value = match family {
        RoFamily::N1 => diag(&|x, y, l| {
            if l == Level::Ground {
                falling_factorial(x, n) * falling_factorial(y, m)
            } else {
                0.0
            }
        }),
        RoFamily::N2 => diag(&|x, y, l| {
            if l == Level::Excited {
                falling_factorial(x, n) * falling_factorial(y, m)
            } else {
                0.0
            }
        }),
        RoFamily::Delta1 => diag(&|x, y, _| falling_factorial(x, n + 1) * falling_factorial(y, m)),
        RoFamily::Delta2 => diag(&|x, y, _| falling_factorial(x, n) * falling_factorial(y, m + 1)),
        RoFamily::N21 => 0.0,
        RoFamily::I | RoFamily::F => {
            let z = gamma * psi.exchange_sum(|x, y| falling_factorial(x, n) * falling_factorial(y, m));
            if family == RoFamily::I {
                2.0 * z.re
            } else {
                -2.0 * z.im
            }
        }
    };
    Ok(value)
}

/// ⟨H⟩ with the envelope frozen at `envelope`.
pub fn energy<H: Hamiltonian>(h: &H, psi: &StateVector, envelope: f64) -> f64 {
    let diag: f64 = psi
        .iter()
        .map(|(x, y, l, c)| {
            let p = c.norm_sqr();
            if p == 0.0 {
                0.0
            } else {
                p * h.diagonal(x, y, l)
            }
        })
        .sum();
    let z = h.coupling() * envelope * psi.exchange_sum(|_, _| 1.0);
    diag + 2.0 * z.re
}

/// Conserved charges (⟨a1†a1 + |e⟩⟨e|⟩, ⟨a2†a2 + |e⟩⟨e|⟩).
pub fn charges(psi: &StateVector) -> (f64, f64) {
    let m = psi.photon_moments();
    (m.n1 + m.pop_e, m.n2 + m.pop_e)
}

/// Field quadrature ⟨a_i + a_i†⟩ of mode 1 or 2.
pub fn quadrature(psi: &StateVector, mode: usize) -> f64 {
    let trunc = psi.truncation();
    let mut z = Complex64::new(0.0, 0.0);
    for level in [Level::Ground, Level::Excited] {
        for x in 0..=trunc.nmax1 {
            for y in 0..=trunc.nmax2 {
                let (lower, k) = match mode {
                    1 if x > 0 => ((x - 1, y), x),
                    2 if y > 0 => ((x, y - 1), y),
                    _ => continue,
                };
                z += psi.get(lower.0, lower.1, level).conj()
                    * psi.get(x, y, level)
                    * (k as f64).sqrt();
            }
        }
    }
    2.0 * z.re
}
