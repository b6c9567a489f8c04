// Randomized invariants of the exact engine and the series.

use num_complex::Complex64;
use proptest::prelude::*;

use kerr_jcm::field::FieldStateSpec;
use kerr_jcm::hilbert::{
    assemble_blocks, block_decompose, build_hamiltonian, charges, EvolveOptions, Level, Propagator, StateVector,
};
use kerr_jcm::params::{ModelParams, Truncation};
use kerr_jcm::scenario::{compare, Engine, RunConfig};

fn params() -> impl Strategy<Value = ModelParams> {
    (0.1..2.0f64, 0.0..1.5f64, 0.0..1.5f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(g, c1, c2, a, phase)| {
        let mut p = ModelParams::with_detuning(g, c1, c2, a);
        p.gamma_phase = phase;
        p
    })
}

const TRUNC: Truncation = Truncation { nmax1: 4, nmax2: 5 };

fn random_state() -> impl Strategy<Value = StateVector> {
    let dim = TRUNC.dim();
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim).prop_filter_map("zero vector", |v| {
        let mut psi = StateVector::zeros(TRUNC);
        let layout: Vec<_> = psi.iter().map(|(x, y, l, _)| (x, y, l)).collect();
        for ((x, y, l), (re, im)) in layout.into_iter().zip(v) {
            psi.set(x, y, l, Complex64::new(re, im));
        }
        if psi.norm_sqr() < 1e-6 {
            return None;
        }
        psi.normalize();
        Some(psi)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonian_is_hermitian(p in params(), envelope in -2.0..2.0f64) {
        let h = build_hamiltonian(&p, TRUNC, envelope).unwrap();
        prop_assert_eq!(h.adjoint(), h);
    }

    #[test]
    fn blocks_reassemble_to_full_matrix(p in params(), envelope in -2.0..2.0f64) {
        let full = build_hamiltonian(&p, TRUNC, envelope).unwrap();
        let blocks = block_decompose(&p, TRUNC, envelope).unwrap();
        let dims: usize = blocks.iter().map(|b| b.dim()).sum();
        prop_assert_eq!(dims, TRUNC.dim());
        let diff = (assemble_blocks(&blocks, TRUNC) - full).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        prop_assert!(diff < 1e-14, "reassembly off by {diff}");
    }

    #[test]
    fn evolution_keeps_norm_and_charges(p in params(), psi in random_state(), t in 0.0..30.0f64) {
        let opts = EvolveOptions { leakage_threshold: 1.0, ..Default::default() };
        let prop = Propagator::new(&p, &psi, 1.0, &opts).unwrap();
        let (q1, q2) = charges(&psi);
        let out = prop.state_at(t);
        let (r1, r2) = charges(&out);
        prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-12);
        prop_assert!((r1 - q1).abs() <= 1e-10 * q1.max(1.0));
        prop_assert!((r2 - q2).abs() <= 1e-10 * q2.max(1.0));
        let m = out.photon_moments();
        prop_assert!((m.pop_e + m.pop_g - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn squeezed_series_matches_oracle(mean in 0.2..3.0f64, chi in 0.0..1.0f64) {
        let field = FieldStateSpec::squeezed(mean, Level::Excited);
        let config = RunConfig::new(ModelParams::resonant(1.0, chi, chi), field, 25.0, 101);
        let r = compare(&config, (Engine::Oracle, Engine::Series)).unwrap();
        prop_assert!(r.pop_e.max_abs <= 1e-6, "deviation {}", r.pop_e.max_abs);
    }

    #[test]
    fn pair_coherent_series_matches_oracle(mean in 0.2..3.0f64, q in 0usize..3, chi in 0.0..1.0f64) {
        let field = FieldStateSpec::pair_coherent(mean, q, Level::Excited).unwrap();
        let config = RunConfig::new(ModelParams::resonant(1.0, chi, chi), field, 25.0, 101);
        let r = compare(&config, (Engine::Oracle, Engine::Series)).unwrap();
        prop_assert!(r.pop_e.max_abs <= 1e-6, "deviation {}", r.pop_e.max_abs);
    }
}
