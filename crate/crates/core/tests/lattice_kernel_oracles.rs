//! Direct-summation oracles for the Fourier conventions, the extension operator and the kernel.

use std::f64::consts::PI;

use ising_kac_core::kernel::{
    build_kernel, build_periodized_kernel, renorm_constant_from_spectrum, verify_kernel_bounds,
    KacKernel, Profile,
};
use ising_kac_core::lattice::{representative, TorusField};
use ising_kac_core::rng::replica_rng;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn random_field(n: usize, seed: u64) -> TorusField {
    let mut rng = replica_rng(seed, 0);
    TorusField::new(n, (0..4 * n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `f̂(ω) = Σ_x ε² f(x) e^{−iπω·x}` by brute force.
fn direct_dft(f: &TorusField) -> Vec<Complex64> {
    let n = f.n();
    let side = 2 * n;
    let eps = 1.0 / n as f64;
    let mut out = vec![Complex64::default(); side * side];
    for (w, o) in out.iter_mut().enumerate() {
        let (w1, w2) = (representative(w / side, n) as f64, representative(w % side, n) as f64);
        for (x, v) in f.values().iter().enumerate() {
            let [x1, x2] = f.point(x);
            *o += Complex64::from_polar(eps * eps * v, -PI * (w1 * x1 + w2 * x2));
        }
    }
    out
}

fn direct_inverse(spec: &[Complex64], n: usize) -> Vec<f64> {
    let side = 2 * n;
    let probe = TorusField::zeros(n);
    (0..side * side)
        .map(|x| {
            let [x1, x2] = probe.point(x);
            0.25 * spec
                .iter()
                .enumerate()
                .map(|(w, s)| {
                    let w1 = representative(w / side, n) as f64;
                    let w2 = representative(w % side, n) as f64;
                    (s * Complex64::from_polar(1.0, PI * (w1 * x1 + w2 * x2))).re
                })
                .sum::<f64>()
        })
        .collect()
}

#[test]
fn forward_transform_matches_direct_dft() {
    let f = random_field(8, 1);
    let fast = f.fourier_forward();
    let slow = direct_dft(&f);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).norm() < 1e-12);
    }
    let back = direct_inverse(&fast, 8);
    for (a, b) in back.iter().zip(f.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    let again = TorusField::from_spectrum(8, 2, &fast).unwrap();
    for (a, b) in again.values().iter().zip(f.values()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn spectrum_is_hermitian() {
    let f = random_field(5, 2);
    let side = 10;
    let s = f.spectrum();
    for i in 0..side {
        for j in 0..side {
            let m = ((side - i) % side) * side + (side - j) % side;
            assert!((s[i * side + j] - s[m].conj()).norm() < 1e-13);
        }
    }
}

/// `Ext f(x) = Σ_z ε² f(z) Π_j ½ sin(πN a_j) cot(πa_j/2)`, `a = x − z`.
fn dirichlet_extension(f: &TorusField, x: [f64; 2]) -> f64 {
    let n = f.n() as f64;
    let eps = f.epsilon();
    let d = |a: f64| {
        if (a / 2.0).fract().abs() < 1e-15 {
            n
        } else {
            0.5 * (PI * n * a).sin() / (PI * a / 2.0).tan()
        }
    };
    f.values()
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let z = f.point(idx);
            eps * eps * v * d(x[0] - z[0]) * d(x[1] - z[1])
        })
        .sum()
}

#[test]
fn extension_matches_closed_form_kernel() {
    let f = random_field(4, 3);
    let eps = f.epsilon();
    for x in [[0.5 * eps, 0.5 * eps], [0.125, -0.625], [0.3, 0.71], [-1.0 + 0.5 * eps, 0.0]] {
        let a = f.extend_evaluate(&x);
        let b = dirichlet_extension(&f, x);
        assert!((a - b).abs() < 1e-10, "{x:?}: {a} vs {b}");
    }
    for idx in [0, 5, 17, 63] {
        let p = f.point(idx);
        assert!((f.extend_evaluate(&p) - f.values()[idx]).abs() < 1e-12);
    }
}

#[test]
fn refinement_keeps_coefficients() {
    let f = random_field(4, 4);
    let fine = f.refine(2).unwrap();
    for w1 in -3_i64..=4 {
        for w2 in -3_i64..=4 {
            let c = f.spectral_value([w1, w2]);
            let expect = match (w1 == 4, w2 == 4) {
                (false, false) => c,
                (true, true) => c * 0.25,
                _ => c * 0.5,
            };
            assert!((fine.spectral_value([w1, w2]) - expect).norm() < 1e-12);
        }
    }
    for w1 in -7_i64..=8 {
        for w2 in -7_i64..=8 {
            if w1.abs() > 4 || w2.abs() > 4 {
                assert!(fine.spectral_value([w1, w2]).norm() < 1e-12);
            }
        }
    }
    // Restriction of the refined field to Λ_ε gives back f.
    for (idx, v) in f.values().iter().enumerate() {
        let p = f.point(idx);
        let k1 = (p[0] * 8.0).round() as i64;
        let k2 = (p[1] * 8.0).round() as i64;
        assert!((fine.get([k1, k2]) - v).abs() < 1e-12);
    }
}

#[test]
fn convolution_matches_direct_sum() {
    let n = 8;
    let f = random_field(n, 5);
    let g = random_field(n, 6);
    let c = f.convolve(&g).unwrap();
    let side = 2 * n as i64;
    let eps2 = 1.0 / (n * n) as f64;
    for x in 0..(side * side) as usize {
        let (x1, x2) = (x as i64 / side, x as i64 % side);
        let mut acc = 0.0;
        for y in 0..(side * side) as usize {
            let (y1, y2) = (y as i64 / side, y as i64 % side);
            let d = ((x1 - y1).rem_euclid(side) * side + (x2 - y2).rem_euclid(side)) as usize;
            acc += eps2 * f.values()[d] * g.values()[y];
        }
        assert!((c.values()[x] - acc).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 32,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn parseval(seed in any::<u64>(), n in 1usize..7) {
        let f = random_field(n, seed);
        let lhs = f.lp_norm(2.0).powi(2);
        let rhs = 0.25 * f.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>();
        prop_assert!((lhs - rhs).abs() < 1e-10 * lhs.max(1.0));
    }

    #[test]
    fn convolution_is_commutative_and_bilinear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let f = random_field(4, seed);
        let g = random_field(4, seed ^ 1);
        let h = random_field(4, seed ^ 2);
        let fg = f.convolve(&g).unwrap();
        let gf = g.convolve(&f).unwrap();
        for (x, y) in fg.values().iter().zip(gf.values()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let lin = f.zip_with(&h, |u, v| a * u + v).unwrap().convolve(&g).unwrap();
        let hg = h.convolve(&g).unwrap();
        for ((l, x), y) in lin.values().iter().zip(fg.values()).zip(hg.values()) {
            prop_assert!((l - (a * x + y)).abs() < 1e-10);
        }
    }
}

/// `C_γ` from an O(N⁴) DFT of the kernel and a plain loop.
fn direct_renorm_constant(k: &KacKernel) -> f64 {
    let n = k.n();
    let side = 2 * n;
    let g = k.gamma();
    let mut total = 0.0;
    for w in 1..side * side {
        let (w1, w2) = (representative(w / side, n) as f64, representative(w % side, n) as f64);
        let mut khat = 0.0;
        for (z, v) in k.kappa().iter().enumerate() {
            let (z1, z2) = (representative(z / side, n) as f64, representative(z % side, n) as f64);
            khat += v * (PI * (w1 * z1 + w2 * z2) / n as f64).cos();
        }
        total += khat * khat / ((n * n) as f64 * g * g * (1.0 - khat));
    }
    0.25 * total
}

#[test]
fn renorm_constant_matches_direct_summation() {
    let k = build_periodized_kernel(Profile::default(), 0.5, 4).unwrap();
    let fast = k.renorm_constant().unwrap();
    let slow = direct_renorm_constant(&k);
    assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
    let k = build_kernel(Profile::default(), 0.25, 16).unwrap();
    assert!((k.renorm_constant().unwrap() - direct_renorm_constant(&k)).abs() < 1e-10);
}

#[test]
fn renorm_constant_grows_as_gamma_shrinks() {
    let c = |g: f64| {
        let n = (1.0 / (g * g)).round() as usize;
        let k = build_kernel(Profile::default(), g, n).unwrap();
        direct_renorm_constant(&k)
    };
    assert!(c(0.125) > c(0.25));
}

#[test]
fn spectrum_is_real_even_and_bounded() {
    for k in [
        build_kernel(Profile::default(), 0.25, 16).unwrap(),
        build_kernel(Profile::Bump, 0.125, 64).unwrap(),
        build_periodized_kernel(Profile::default(), 0.5, 2).unwrap(),
    ] {
        let kf = k.macroscopic();
        assert!(kf.spectrum().iter().all(|c| c.im.abs() < 1e-13));
        let side = k.side();
        let s = k.spectrum();
        for i in 0..side {
            for j in 0..side {
                let m = ((side - i) % side) * side + (side - j) % side;
                assert!((s[i * side + j] - s[m]).abs() < 1e-14);
            }
        }
        assert!((s[0] - 1.0).abs() < 1e-13);
        assert!(s.iter().all(|v| v.abs() <= 1.0 + 1e-13));
        assert_eq!(k.kappa()[0], 0.0);
        let r = 3.0 / k.gamma();
        for ([z1, z2], _) in k.support() {
            assert!(((z1 * z1 + z2 * z2) as f64).sqrt() <= r + 1e-12 || k.n() as f64 <= r);
        }
    }
}

#[test]
fn synthetic_spectrum_with_no_interaction() {
    let mut spec = vec![0.0; 256];
    spec[0] = 1.0;
    assert_eq!(renorm_constant_from_spectrum(&spec, 8, 0.35).unwrap(), 0.0);
}

#[test]
fn kernel_bounds_sweep() {
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    for g in [0.5, 0.25, 0.125] {
        let n = (1.0 / (g * g)) as usize;
        let k = build_periodized_kernel(Profile::default(), g, n).unwrap();
        let b = verify_kernel_bounds(&k);
        println!("γ = {g}: C = {:.4}, c = {:.4}, anisotropy = {:.4}", b.upper, b.lower, b.anisotropy);
        assert!(b.passed);
        lowers.push(b.lower);
        uppers.push(b.upper);
    }
    let spread = |v: &[f64]| {
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    assert!(spread(&lowers) <= 2.0 && spread(&uppers) <= 2.0);
}

fn log_fit(profile: Profile) -> ising_kac_core::stats::LinearFit {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for g in [0.5, 0.25, 0.125, 0.0625] {
        let n = (1.0 / (g * g)) as usize;
        let k = build_periodized_kernel(profile.clone(), g, n).unwrap();
        x.push((1.0 / g).ln());
        y.push(k.renorm_constant().unwrap());
    }
    println!("{}: C_γ = {y:?}", profile.id());
    ising_kac_core::stats::linear_regression(&x, &y).unwrap()
}

#[test]
fn renorm_constant_is_logarithmic() {
    let bump = log_fit(Profile::Bump);
    println!("bump: slope = {:.4}, R² = {:.5}", bump.slope, bump.r2);
    assert!(bump.r2 >= 0.99);
    // The wider unit-diffusion profile is still pre-asymptotic at γ = 0.5.
    let unit = log_fit(Profile::default());
    println!("unit-diffusion: slope = {:.4}, R² = {:.5}", unit.slope, unit.r2);
    assert!(unit.slope > 0.0 && unit.r2 > 0.9);
    let k = build_periodized_kernel(Profile::Bump, 0.5, 4).unwrap();
    assert!((k.renorm_constant().unwrap() - direct_renorm_constant(&k)).abs() < 1e-10);
}
