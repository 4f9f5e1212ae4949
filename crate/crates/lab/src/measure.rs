//! Lattice choice, pairings and field observables.

use std::f64::consts::PI;

use ising_kac_core::besov::{besov_norm, build_block_bank, BesovSpec, PaleyLittlewoodBank};
use ising_kac_core::glauber::{wick_observable, DynamicsParams, SpinConfiguration};
use ising_kac_core::kernel::{build_periodized_kernel, KacKernel, Profile};
use ising_kac_core::lattice::TorusField;
use ising_kac_core::rng::replica_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::TestFunction;
use crate::error::{LabError, LabResult};

/// Regularity and time weight of the Wick-power observable.
pub const WICK_NU: f64 = 0.1;
pub const WICK_TIME_EXPONENT: f64 = 0.1;

/// Integer lattice used for a given `γ` under the critical scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeChoice {
    pub gamma: f64,
    pub n: usize,
    pub epsilon: f64,
    pub gamma_sq: f64,
    /// `ε − γ²`, nonzero whenever `γ^{-2}` is not an integer.
    pub eps_mismatch: f64,
}

/// `N = round(γ^{-2})`, `ε = 1/N`.
pub fn critical_lattice(gamma: f64) -> LabResult<LatticeChoice> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LabError::Param(format!("γ = {gamma} is not in (0, 1)")));
    }
    let n = (1.0 / (gamma * gamma)).round().max(1.0) as usize;
    let epsilon = 1.0 / n as f64;
    Ok(LatticeChoice { gamma, n, epsilon, gamma_sq: gamma * gamma, eps_mismatch: epsilon - gamma * gamma })
}

/// Kernel, dynamics parameters and norm machinery for one `γ`.
#[derive(Debug, Clone)]
pub struct GammaSetup {
    pub lattice: LatticeChoice,
    pub kernel: KacKernel,
    pub params: DynamicsParams,
    pub c_gamma: f64,
}

impl GammaSetup {
    /// Critical scaling with mass `a`, or an explicit `beta` when given.
    pub fn new(profile: &Profile, gamma: f64, a: f64, beta: Option<f64>, b: f64) -> LabResult<Self> {
        let lattice = critical_lattice(gamma)?;
        let kernel = build_periodized_kernel(profile.clone(), gamma, lattice.n)?;
        let params = match beta {
            Some(beta) => DynamicsParams::with_beta(&kernel, beta, b),
            None => DynamicsParams { b, ..DynamicsParams::critical(&kernel, a)? },
        };
        let c_gamma = kernel.renorm_constant()?;
        Ok(Self { lattice, kernel, params, c_gamma })
    }

    pub fn bank(&self) -> LabResult<PaleyLittlewoodBank> {
        Ok(build_block_bank(self.lattice.n)?)
    }
}

/// `⟨f, φ⟩ = Σ ε² f(x) φ(x)` over the lattice of `f`.
pub fn pair_with_test_function(field: &TorusField, phi: &TestFunction) -> LabResult<f64> {
    Ok(field.inner_product(&phi.sample(field.n()))?)
}

/// Spin pairing `⟨δ^{-1}σ, φ⟩` next to the smoothed `⟨X_γ, φ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinPairing {
    pub spin: f64,
    pub smoothed: f64,
    pub difference: f64,
}

pub fn spin_pairing(s: &SpinConfiguration, p: &DynamicsParams, phi: &TestFunction) -> LabResult<SpinPairing> {
    let spin = pair_with_test_function(&s.centered_spin_field(p, 0.0), phi)?;
    let smoothed = pair_with_test_function(&s.fluctuation_field(p), phi)?;
    Ok(SpinPairing { spin, smoothed, difference: spin - smoothed })
}

/// `‖H_j(z, c)‖` in `B^{-ν}_{∞,∞}` with `ν = 0.1`.
pub fn wick_norm(z: &TorusField, j: usize, c: f64, bank: &PaleyLittlewoodBank) -> LabResult<f64> {
    let h = wick_observable(z, j, c)?;
    Ok(besov_norm(&h, &BesovSpec::discrete(-WICK_NU, f64::INFINITY, f64::INFINITY), bank)?)
}

/// Independent spins with `E σ(x) = γ cos(πx₁)`: a mesoscopic profile of
/// order `γ` under microscopic noise.
pub fn biased_spins(kernel: &KacKernel, rng: &mut ChaCha8Rng) -> Vec<i8> {
    let n = kernel.n();
    let side = kernel.side();
    let g = kernel.gamma();
    let profile = TorusField::from_fn(n, |x, _| g * (PI * x).cos());
    (0..side * side)
        .map(|i| if rng.random::<f64>() < 0.5 * (1.0 + profile.values()[i]) { 1 } else { -1 })
        .collect()
}

/// Fixed fields for inequality checks: smooth (`seed % 3 == 0`), smooth plus
/// i.i.d. noise (`1`), smooth plus the indicator of a disc (`2`).
pub fn corpus_field(n: usize, seed: u64) -> TorusField {
    let mut rng = replica_rng(seed, 0);
    let coeffs: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(-4.0_f64..4.0).round(),
                rng.random_range(-4.0_f64..4.0).round(),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let smooth = move |x: f64, y: f64| {
        coeffs.iter().map(|(a, w1, w2, ph)| a * (PI * (w1 * x + w2 * y) + ph).cos()).sum::<f64>()
    };
    match seed % 3 {
        0 => TorusField::from_fn(n, smooth),
        1 => {
            let mut noise = replica_rng(seed, 1);
            let base = TorusField::from_fn(n, smooth);
            let vals = base.values().iter().map(|v| v + noise.random_range(-1.0..1.0)).collect();
            TorusField::new(n, vals).expect("consistent size")
        }
        _ => {
            let r = rng.random_range(0.2..0.8);
            TorusField::from_fn(n, move |x, y| smooth(x, y) + if x * x + y * y < r * r { 1.0 } else { 0.0 })
        }
    }
}

pub fn corpus_kind(seed: u64) -> &'static str {
    match seed % 3 {
        0 => "smooth",
        1 => "rough",
        _ => "discontinuous",
    }
}
