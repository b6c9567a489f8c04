//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The lines go straight to stderr so they show up even for passing tests.

use std::io::Write;
use std::time::Instant;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kerr_jcm::field::{factorial_moment, FieldStateSpec};
use kerr_jcm::hierarchy::{init_ro, integrate, Envelope, HierarchyOptions};
use kerr_jcm::hilbert::{build_hamiltonian, Level, RoFamily, StateVector};
use kerr_jcm::observables::{detect_revivals, g2_intermodes, spacing_cv, ObservableSeries, RevivalOptions};
use kerr_jcm::params::{ModelParams, Truncation};
use kerr_jcm::scenario::{compare, preset, run, Engine, RunConfig, RunOutput};
use kerr_jcm::series::beta_squared;
use kerr_jcm::stark::{map_kerr_to_stark, verify_equivalence};

fn report(id: &str, what: &str, ok: bool, detail: &str) -> bool {
    let line = format!("[{}] {id} {what}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}

fn preset_runs(name: &str, engine: Engine) -> Vec<(f64, RunOutput)> {
    preset(name)
        .unwrap()
        .into_iter()
        .map(|(_, c)| {
            let chi = c.params.chi1;
            (chi, run(&RunConfig { engine, ..c }).unwrap())
        })
        .collect()
}

fn revivals(series: &ObservableSeries) -> Vec<kerr_jcm::observables::Revival> {
    let dt = series.t[1] - series.t[0];
    detect_revivals(&series.t, &series.pop_e, &RevivalOptions::for_collapse(1.0, 10.0, dt)).unwrap()
}

#[test]
fn criterion_1_block_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let trunc = Truncation::new(11, 11).unwrap();
    let layout = StateVector::zeros(trunc);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut p = ModelParams::with_detuning(
            rng.gen_range(0.1..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(-3.0..3.0),
        );
        p.gamma_phase = rng.gen_range(-3.0..3.0);
        let h = build_hamiltonian(&p, trunc, 1.0).unwrap();
        for n in 0..=10 {
            for m in 0..=10 {
                let ie = layout.index(n, m, Level::Excited);
                let ig = layout.index(n + 1, m + 1, Level::Ground);
                let block = Matrix2::new(h[(ie, ie)], h[(ie, ig)], h[(ig, ie)], h[(ig, ig)]);
                let ev = block.symmetric_eigenvalues();
                let gap2 = (ev[0] - ev[1]).powi(2);
                let b2 = beta_squared(n, m, &p);
                worst = worst.max((gap2 - b2).abs() / b2);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-10 && secs < 5.0;
    assert!(report(
        "1",
        "block identity",
        ok,
        &format!("max relative |gap² − β²|/β² = {worst:.2e} (limit 1e-10), {secs:.2} s (limit 5 s)")
    ));
}

fn series_vs_oracle(id: &str, name: &str, limit: f64) -> bool {
    let start = Instant::now();
    let mut all = true;
    for (label, config) in preset(name).unwrap() {
        let r = compare(&config, (Engine::Oracle, Engine::Series)).unwrap();
        let ok = r.pop_e.max_abs <= limit;
        all &= report(
            id,
            &format!("series/oracle {label}"),
            ok,
            &format!("max |Δpop_e| = {:.2e} (limit {limit:e})", r.pop_e.max_abs),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    all & report(id, &format!("{name} runtime"), secs < 60.0, &format!("{secs:.1} s (limit 60 s)"))
}

#[test]
fn criterion_2_series_oracle_coherent() {
    assert!(series_vs_oracle("2", "fig1", 1e-6));
}

#[test]
fn criterion_3_series_oracle_squeezed_and_pair() {
    let a = series_vs_oracle("3", "fig2", 1e-6);
    let b = series_vs_oracle("3", "fig3", 1e-6);
    assert!(a && b);
}

#[test]
fn criterion_4_hierarchy_oracle() {
    let p = ModelParams::resonant(1.0, 0.5, 0.5);
    let spec = FieldStateSpec::coherent(1.0, 1.0, Level::Excited);
    let mut config = RunConfig::new(p, spec, 10.0, 201);
    config.cutoff = Some(25);
    config.rtol = Some(1e-9);
    let r = compare(&config, (Engine::Oracle, Engine::Hierarchy)).unwrap();
    let dev = r.pop_e.max_abs.max(r.pop_g.max_abs);
    let ok_dev = report("4", "hierarchy/oracle populations", dev <= 1e-4, &format!("max deviation {dev:.2e} (limit 1e-4)"));

    let ro0 = init_ro(&spec, 25).unwrap();
    let opts = HierarchyOptions { rtol: 1e-9, keep_states: true, ..Default::default() };
    let run = integrate(&ro0, &p, &Envelope::default(), &config.time_grid(), &opts).unwrap();
    let states = run.states.unwrap();
    let n21 = states
        .iter()
        .map(|s| {
            let mut d = 0.0f64;
            for n in 0..=25 {
                for m in 0..=25 {
                    d = d.max((s.get(RoFamily::N21, n, m) - ro0.get(RoFamily::N21, n, m)).abs());
                }
            }
            d
        })
        .fold(0.0, f64::max);
    let ok_n21 = report("4", "N21 tables constant", n21 <= 1e-9, &format!("max drift {n21:.2e} (limit 1e-9)"));
    let norm = run
        .pop_g
        .iter()
        .zip(&run.pop_e)
        .map(|(g, e)| (g + e - 1.0).abs())
        .fold(0.0, f64::max);
    let ok_norm = report("4", "N1(0,0) + N2(0,0) = 1", norm <= 1e-8, &format!("max |sum − 1| = {norm:.2e} (limit 1e-8)"));
    assert!(ok_dev && ok_n21 && ok_norm);
}

#[test]
fn criterion_5_kerr_stark_equivalence() {
    let grid: Vec<f64> = (0..=250).map(|i| i as f64 * 0.1).collect();
    let spec = FieldStateSpec::coherent(2.0, 2.0, Level::Excited);
    let mut all = true;
    for chi in [0.25, 0.5, 1.0] {
        let p = ModelParams::resonant(1.0, chi, chi);
        let stark = map_kerr_to_stark(&p, 0.0).unwrap();
        let rep = verify_equivalence(&p, &stark, &spec, &grid).unwrap();
        let dev = rep.max_ro();
        all &= report("5", &format!("Kerr/Stark RO equivalence chi={chi}"), dev <= 1e-10, &format!("max deviation {dev:.2e} (limit 1e-10)"));
        let quad = rep.max_quadrature();
        all &= report("5", &format!("field quadrature differs chi={chi}"), quad > 1e-3, &format!("max |Δ⟨a+a†⟩| = {quad:.2e}"));

        let mut broken = stark;
        broken.eta1 += 0.1;
        let rep = verify_equivalence(&p, &broken, &spec, &grid).unwrap();
        let when = rep.first_exceeding(1e-3);
        all &= report(
            "5",
            &format!("negative control chi={chi}"),
            when.is_some_and(|t| t <= 10.0),
            &format!("deviation first exceeds 1e-3 at t = {when:?} (limit 10)"),
        );
    }
    assert!(all);
}

#[test]
fn criterion_6_conservation() {
    let mut all = true;
    for name in ["fig1", "fig2", "fig3"] {
        for (chi, out) in preset_runs(name, Engine::Oracle) {
            let s = &out.summary;
            let drift = s.energy_drift.unwrap();
            let ok = s.max_residual_norm <= 1e-12 && drift <= 1e-10 && s.max_residual_charge <= 1e-10;
            all &= report(
                "6",
                &format!("oracle conservation {name} chi={chi}"),
                ok,
                &format!(
                    "norm {:.1e} (1e-12), energy {:.1e} rel (1e-10), charges {:.1e} (1e-10)",
                    s.max_residual_norm, drift, s.max_residual_charge
                ),
            );
        }
    }
    assert!(all);
}

#[test]
fn criterion_7a_squeezed_revivals_regular() {
    let runs = preset_runs("fig2", Engine::Oracle);
    let (_, out) = runs.iter().find(|(chi, _)| *chi == 1.0).unwrap();
    let peaks = revivals(&out.series);
    let cv = spacing_cv(&peaks);
    let ok = cv.is_some_and(|v| v < 0.1);
    assert!(report(
        "7a",
        "squeezed vacuum chi=1 revival spacing",
        ok,
        &format!("{} peaks, coefficient of variation {cv:.3?} (limit 0.1)", peaks.len())
    ));
}

#[test]
fn criterion_7b_pair_coherent_recovery() {
    let mut all = true;
    let mut mins = Vec::new();
    for (chi, out) in preset_runs("fig3", Engine::Oracle) {
        let peaks = revivals(&out.series);
        let min = peaks.iter().map(|p| p.height).fold(f64::INFINITY, f64::min);
        all &= report(
            "7b",
            &format!("pair coherent chi={chi} revival heights"),
            !peaks.is_empty() && min > 0.8,
            &format!("{} peaks, lowest {min:.3} (limit 0.8)", peaks.len()),
        );
        mins.push(min);
    }
    let increasing = mins.windows(2).all(|w| w[1] > w[0]);
    all &= report("7b", "lowest revival height increases with chi", increasing, &format!("{mins:.3?}"));
    assert!(all);
}

fn min_g2(series: &ObservableSeries) -> f64 {
    series.g2_12.iter().flatten().fold(f64::INFINITY, |a, v| a.min(*v))
}

fn antibunching_attenuated(id: &str, name: &str) -> bool {
    let mins: Vec<(f64, f64)> = preset_runs(name, Engine::Oracle)
        .iter()
        .map(|(chi, out)| (*chi, min_g2(&out.series)))
        .collect();
    let negative = mins[0].1 < 0.0;
    let shrinking = mins.windows(2).all(|w| w[1].1.abs() < w[0].1.abs());
    let a = report(id, &format!("{name} min g2 negative at chi=0"), negative, &format!("min g2 = {:.4e}", mins[0].1));
    let b = report(
        id,
        &format!("{name} |min g2| decreases with chi"),
        shrinking,
        &format!("{:?}", mins.iter().map(|(c, v)| format!("chi={c}: {v:.4e}")).collect::<Vec<_>>()),
    );
    a && b
}

#[test]
fn criterion_7c_antibunching_coherent() {
    assert!(antibunching_attenuated("7c", "fig1"));
}

#[test]
fn criterion_7c_antibunching_pair_coherent() {
    assert!(antibunching_attenuated("7c", "fig3"));
}

#[test]
fn criterion_7d_squeezed_g2_recovers_at_peaks() {
    let mut all = true;
    for (chi, out) in preset_runs("fig2", Engine::Oracle) {
        let s = &out.series;
        let g0 = s.g2_12[0].unwrap();
        let peaks = revivals(s);
        let worst = peaks
            .iter()
            .map(|p| (s.g2_12[p.index].unwrap() - g0).abs() / g0.abs())
            .fold(0.0, f64::max);
        all &= report(
            "7d",
            &format!("squeezed vacuum chi={chi} g2 at revival peaks"),
            !peaks.is_empty() && worst < 0.05,
            &format!("{} peaks, max |g2 − g2(0)|/|g2(0)| = {worst:.3} (limit 0.05)", peaks.len()),
        );
    }
    assert!(all);
}

#[test]
fn criterion_8_g2_spot_checks() {
    let coh = FieldStateSpec::coherent(10.0, 10.0, Level::Excited);
    let m = |s: &FieldStateSpec, n, k| factorial_moment(s, n, k).unwrap();
    let g_coh = g2_intermodes(m(&coh, 1, 1), m(&coh, 1, 0), m(&coh, 0, 1)).unwrap();
    let a = report("8", "coherent g2(0)", g_coh == 0.0, &format!("{g_coh:e} (expected exactly 0)"));

    let sq = FieldStateSpec::squeezed(10.0, Level::Excited);
    let g_sq = g2_intermodes(m(&sq, 1, 1), m(&sq, 1, 0), m(&sq, 0, 1)).unwrap();
    // brute force over the geometric distribution p(n) = (1−x)xⁿ, x = tanh² r
    let r = 10f64.sqrt().asinh();
    let x = r.tanh().powi(2);
    let (mut s1, mut s2) = (0.0, 0.0);
    for n in 0..5000 {
        let p = (1.0 - x) * x.powi(n);
        s1 += p * n as f64;
        s2 += p * (n * n) as f64;
    }
    let brute = s2 / (s1 * s1) - 1.0;
    let b = report(
        "8",
        "squeezed vacuum g2(0)",
        (g_sq - 1.1).abs() <= 1e-9 && (brute - 1.1).abs() <= 1e-9,
        &format!("moments {g_sq:.12}, brute force {brute:.12} (expected 1.1 within 1e-9)"),
    );
    assert!(a && b);
}

#[test]
fn criterion_9_determinism() {
    let mut all = true;
    for name in ["fig1", "fig2", "fig3"] {
        for (label, config) in preset(name).unwrap() {
            let a = run(&config).unwrap().series.to_csv_string().unwrap();
            let b = run(&config).unwrap().series.to_csv_string().unwrap();
            all &= report("9", &format!("byte-identical CSV {label}"), a == b, &format!("{} bytes", a.len()));
        }
    }
    assert!(all);
}
