//! Monte Carlo and enumeration checks for the Glauber chain and its linearization.

use ising_kac_core::glauber::{
    cosimulate_linearization, drift_field, DynamicsParams, SpinConfiguration, REFRESH_INTERVAL,
};
use ising_kac_core::kernel::{build_kernel, build_periodized_kernel, KacKernel, Profile};
use ising_kac_core::lattice::TorusField;
use ising_kac_core::oracle::enumerate_gibbs;
use ising_kac_core::rng::replica_rng;
use ising_kac_core::stats::{batch_means, mean_and_se};

fn kernel() -> KacKernel {
    build_kernel(Profile::default(), 0.25, 16).unwrap()
}

#[test]
fn clock_has_rate_lambda() {
    let k = kernel();
    let p = DynamicsParams::with_beta(&k, 1.0, 0.0);
    let mut s = SpinConfiguration::random(&k, replica_rng(11, 0));
    let dts: Vec<f64> = (0..100_000).map(|_| s.step(&p).dt).collect();
    let (m, se) = mean_and_se(&dts);
    let expect = 1.0 / s.len() as f64;
    assert!((m - expect).abs() < 3.0 * se, "{m} vs {expect} ± {se}");
}

#[test]
fn local_field_survives_a_million_flips() {
    let k = kernel();
    let p = DynamicsParams::critical(&k, 0.0).unwrap();
    let mut s = SpinConfiguration::random(&k, replica_rng(12, 0));
    while s.flips() < REFRESH_INTERVAL - 1 {
        let before = s.magnetization();
        if s.step(&p).flipped {
            assert_eq!((s.magnetization() - before).abs(), 2);
        }
    }
    assert_eq!(s.refreshes(), 0);
    let err = s.local_field_error();
    assert!(err < 1e-9, "{err}");
    while s.flips() < REFRESH_INTERVAL {
        s.step(&p);
    }
    assert_eq!(s.refreshes(), 1);
    assert_eq!(s.local_field_error(), 0.0);
}

#[test]
fn seeded_runs_are_bit_identical() {
    let k = kernel();
    let p = DynamicsParams::critical(&k, 0.5).unwrap();
    let run = |seed| {
        let mut s = SpinConfiguration::random(&k, replica_rng(seed, 3));
        s.advance_macro(0.05, &p);
        s
    };
    let (a, b, c) = (run(7), run(7), run(8));
    assert_eq!(a.spins(), b.spins());
    assert_eq!(a.rings(), b.rings());
    assert_eq!(a.t_micro().to_bits(), b.t_micro().to_bits());
    let ha: Vec<u64> = a.local_field().iter().map(|v| v.to_bits()).collect();
    let hb: Vec<u64> = b.local_field().iter().map(|v| v.to_bits()).collect();
    assert_eq!(ha, hb);
    assert_ne!(a.spins(), c.spins());
}

#[test]
fn fluctuation_field_preserves_the_mean() {
    let k = kernel();
    let p = DynamicsParams::critical(&k, 0.0).unwrap();
    for seed in 0..5 {
        let s = SpinConfiguration::random(&k, replica_rng(13, seed));
        let x = s.fluctuation_field(&p);
        let eps = k.epsilon();
        let expect = eps * eps * s.magnetization() as f64 / k.gamma();
        assert!((x.integral() - expect).abs() < 1e-12);
    }
}

#[test]
fn monte_carlo_drift_matches_compensator() {
    let k = kernel();
    let p = DynamicsParams::critical(&k, 0.0).unwrap();
    let mut start = SpinConfiguration::random(&k, replica_rng(14, 0));
    start.advance_macro(0.02, &p);
    let x0 = start.fluctuation_field(&p);
    let drift = drift_field(&x0, &p, &k).unwrap();
    let site = 137;
    let dt = 1e-3;
    let replicas = 10_000;
    let rates: Vec<f64> = (0..replicas)
        .map(|r| {
            let mut s =
                SpinConfiguration::from_spins(&k, start.spins().to_vec(), replica_rng(15, r))
                    .unwrap();
            s.advance_macro(dt, &p);
            (s.fluctuation_field(&p).values()[site] - x0.values()[site]) / dt
        })
        .collect();
    let (m, se) = mean_and_se(&rates);
    let d = drift.values()[site];
    println!("MC drift {m} ± {se}, compensator {d}");
    assert!((m - d).abs() < 3.0 * se);
}

#[test]
fn centered_field_averages_to_zero() {
    let k = build_periodized_kernel(Profile::default(), 0.5, 2).unwrap();
    let (beta, b) = (0.9, 0.3);
    let exact = enumerate_gibbs(&k, beta, b).unwrap();
    let m = exact.magnetization(0);
    assert!(m > 0.0);
    let p = DynamicsParams::with_beta(&k, beta, b);
    let mut s = SpinConfiguration::random(&k, replica_rng(16, 1));
    s.advance_to(100.0, &p, |_, _| {});
    let mut samples = Vec::with_capacity(100_000);
    for i in 1..=100_000 {
        s.advance_to(100.0 + 0.5 * i as f64, &p, |_, _| {});
        samples.push(s.centered_spin_field(&p, m).integral() / 4.0);
    }
    let bm = batch_means(&samples).unwrap();
    println!("centered mean {} ± {} (m = {m})", bm.mean, bm.stderr);
    assert!(bm.mean.abs() < 3.0 * bm.stderr);
}

#[test]
fn nearest_neighbour_correlation_matches_enumeration() {
    let k = build_periodized_kernel(Profile::default(), 0.5, 2).unwrap();
    let exact = enumerate_gibbs(&k, 0.9, 0.0).unwrap();
    let target = exact.exact_expectation(|c| {
        ising_kac_core::oracle::spin(c, 0) * ising_kac_core::oracle::spin(c, 1)
    });
    let p = DynamicsParams::with_beta(&k, 0.9, 0.0);
    let mut s = SpinConfiguration::random(&k, replica_rng(17, 0));
    s.advance_to(50.0, &p, |_, _| {});
    let mut samples = Vec::with_capacity(200_000);
    for _ in 0..200_000 {
        s.step(&p);
        samples.push((s.spins()[0] * s.spins()[1]) as f64);
    }
    let bm = batch_means(&samples).unwrap();
    assert!((bm.mean - target).abs() < 3.0 * bm.stderr, "{} vs {target}", bm.mean);
}

fn cosim_final(window: f64) -> TorusField {
    let k = kernel();
    let p = DynamicsParams::critical(&k, 0.0).unwrap();
    let mut s = SpinConfiguration::random(&k, replica_rng(18, 0));
    cosimulate_linearization(&mut s, &p, &k, window, 0.1, None, |_| {}).unwrap()
}

#[test]
fn cosimulation_converges_at_first_order() {
    let reference = cosim_final(0.00125);
    let errs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&w| {
            let z = cosim_final(w);
            z.zip_with(&reference, |a, b| a - b).unwrap().lp_norm(2.0)
        })
        .collect();
    println!("cosim errors {errs:?}");
    for pair in errs.windows(2) {
        let r = pair[0] / pair[1];
        assert!(r > 1.5 && r < 3.0, "ratio {r}");
    }
}
