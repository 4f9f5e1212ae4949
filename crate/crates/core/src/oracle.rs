//! Exact enumeration of the Ising-Kac Gibbs measure on tiny tori.
//!
//! Configuration `s` is a bit pattern: bit `i` set means spin `+1` at the site
//! with periodic storage index `i`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::glauber::{flip_rate, DynamicsParams};
use crate::kernel::KacKernel;
use crate::numeric::{compensated_sum, Accumulator};
use crate::rng::replica_rng;

/// Largest number of spins accepted by [`enumerate_gibbs`].
pub const MAX_SPINS: usize = 20;

#[inline]
pub fn spin(config: u32, site: usize) -> f64 {
    if config >> site & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Exact Gibbs weights `P(σ) ∝ exp(H(σ))` with
/// `H(σ) = (β/2) Σ_{x,y} κ(x − y) σ_x σ_y + b Σ_x σ_x`.
#[derive(Debug, Clone)]
pub struct ExactGibbs {
    kernel: KacKernel,
    beta: f64,
    b: f64,
    sites: usize,
    probs: Vec<f64>,
    log_partition: f64,
}

fn local_fields(kernel: &KacKernel, config: u32, out: &mut [f64]) {
    let side = kernel.side();
    let kappa = kernel.kappa();
    let sites = out.len();
    for (x, h) in out.iter_mut().enumerate() {
        let (x1, x2) = (x / side, x % side);
        let mut acc = 0.0;
        for z in 0..sites {
            let d1 = (x1 + side - z / side) % side;
            let d2 = (x2 + side - z % side) % side;
            acc += kappa[d1 * side + d2] * spin(config, z);
        }
        *h = acc;
    }
}

/// `H(σ)` evaluated from scratch.
pub fn hamiltonian(kernel: &KacKernel, beta: f64, b: f64, config: u32) -> f64 {
    let sites = kernel.side() * kernel.side();
    let mut h = vec![0.0; sites];
    local_fields(kernel, config, &mut h);
    (0..sites).map(|x| spin(config, x) * (0.5 * beta * h[x] + b)).sum()
}

pub fn enumerate_gibbs(kernel: &KacKernel, beta: f64, b: f64) -> Result<ExactGibbs> {
    let sites = kernel.side() * kernel.side();
    if sites > MAX_SPINS {
        return Err(Error::Budget { spins: sites, max: MAX_SPINS });
    }
    let count = 1usize << sites;
    let log_w: Vec<f64> =
        (0..count).map(|c| hamiltonian(kernel, beta, b, c as u32)).collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mass = compensated_sum(log_w.iter().map(|l| (l - top).exp()));
    let log_partition = top + mass.ln();
    let probs = log_w.iter().map(|l| (l - log_partition).exp()).collect();
    Ok(ExactGibbs { kernel: kernel.clone(), beta, b, sites, probs, log_partition })
}

impl ExactGibbs {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn kernel(&self) -> &KacKernel {
        &self.kernel
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// `E[g(σ)]` for an observable given on configurations.
    pub fn exact_expectation(&self, g: impl Fn(u32) -> f64) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(c, p)| p * g(c as u32)))
    }

    pub fn magnetization(&self, x: usize) -> f64 {
        self.exact_expectation(|c| spin(c, x))
    }

    /// `E[σ_x; σ_y] = E[σ_x σ_y] − E[σ_x] E[σ_y]`.
    pub fn covariance(&self, x: usize, y: usize) -> Result<f64> {
        if x >= self.sites || y >= self.sites {
            return Err(Error::OutOfRange(format!("site out of range: {x}, {y}")));
        }
        let xy = self.exact_expectation(|c| spin(c, x) * spin(c, y));
        Ok(xy - self.magnetization(x) * self.magnetization(y))
    }

    fn check_params(&self, p: &DynamicsParams) -> Result<()> {
        if p.beta != self.beta || p.b != self.b {
            return Err(Error::Config(format!(
                "dynamics (β = {}, b = {}) differ from the measure (β = {}, b = {})",
                p.beta, p.b, self.beta, self.b
            )));
        }
        Ok(())
    }

    /// Max over test functions of `|Σ_σ P(σ) (L f)(σ)|` for the Glauber generator.
    ///
    /// The family is: constants, all `σ_x`, all `σ_x σ_y`, and `random` random
    /// ±1 functionals drawn from `seed`.
    pub fn check_invariance(&self, p: &DynamicsParams, random: usize, seed: u64) -> Result<f64> {
        self.check_params(p)?;
        let s = self.sites;
        let count = self.probs.len();
        let mut rng = replica_rng(seed, 0);
        let tables: Vec<Vec<f64>> = (0..random)
            .map(|_| (0..count).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
            .collect();
        let pairs: Vec<(usize, usize)> =
            (0..s).flat_map(|x| (x + 1..s).map(move |y| (x, y))).collect();
        let n_fun = s + pairs.len() + random;
        let mut terms = vec![Accumulator::default(); n_fun];
        let mut h = vec![0.0; s];
        let mut rates = vec![0.0; s];
        for c in 0..count {
            let config = c as u32;
            let prob = self.probs[c];
            local_fields(&self.kernel, config, &mut h);
            for z in 0..s {
                rates[z] = flip_rate(spin(config, z) as i8, h[z], p);
            }
            for x in 0..s {
                terms[x].add(prob * (-2.0 * rates[x] * spin(config, x)));
            }
            for (k, &(x, y)) in pairs.iter().enumerate() {
                let v = -2.0 * spin(config, x) * spin(config, y) * (rates[x] + rates[y]);
                terms[s + k].add(prob * v);
            }
            for (k, t) in tables.iter().enumerate() {
                let here = t[c];
                let lf: f64 = (0..s).map(|z| rates[z] * (t[c ^ (1 << z)] - here)).sum();
                terms[s + pairs.len() + k].add(prob * lf);
            }
        }
        Ok(terms.iter().map(|t| t.value().abs()).fold(0.0, f64::max))
    }
}

/// Max relative violation of `c(z, σ) e^{H(σ)} = c(z, σ^z) e^{H(σ^z)}` over all `(σ, z)`.
pub fn detailed_balance_violation(kernel: &KacKernel, p: &DynamicsParams) -> Result<f64> {
    let s = kernel.side() * kernel.side();
    if s > MAX_SPINS {
        return Err(Error::Budget { spins: s, max: MAX_SPINS });
    }
    let count = 1usize << s;
    let energy: Vec<f64> = (0..count).map(|c| hamiltonian(kernel, p.beta, p.b, c as u32)).collect();
    let mut h = vec![0.0; s];
    let mut hf = vec![0.0; s];
    let mut worst = 0.0_f64;
    for c in 0..count {
        let config = c as u32;
        local_fields(kernel, config, &mut h);
        for z in 0..s {
            let flipped = config ^ (1 << z);
            local_fields(kernel, flipped, &mut hf);
            let forward = flip_rate(spin(config, z) as i8, h[z], p);
            let backward = flip_rate(spin(flipped, z) as i8, hf[z], p);
            let log_gap =
                forward.ln() + energy[c] - backward.ln() - energy[flipped as usize];
            worst = worst.max(log_gap.exp_m1().abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_periodized_kernel, Profile};

    fn kernel(n: usize) -> KacKernel {
        build_periodized_kernel(Profile::default(), 0.5, n).unwrap()
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let g = enumerate_gibbs(&kernel(1), 0.0, 0.0).unwrap();
        assert!(g.probabilities().iter().all(|p| (p - 1.0 / 16.0).abs() < 1e-15));
        assert!(g.covariance(0, 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn strong_field_selects_all_plus() {
        let g = enumerate_gibbs(&kernel(1), 0.5, 20.0).unwrap();
        assert!(g.probabilities()[15] >= 1.0 - 1e-6);
    }

    #[test]
    fn symmetric_magnetization_vanishes() {
        let g = enumerate_gibbs(&kernel(1), 1.3, 0.0).unwrap();
        assert!(g.magnetization(0).abs() < 1e-15);
        let m = g.magnetization(2);
        assert!((g.covariance(2, 2).unwrap() - (1.0 - m * m)).abs() < 1e-14);
    }

    #[test]
    fn budget_is_enforced() {
        let k = build_periodized_kernel(Profile::default(), 0.5, 3).unwrap();
        assert!(matches!(enumerate_gibbs(&k, 1.0, 0.0), Err(Error::Budget { spins: 36, .. })));
    }

    #[test]
    fn invariance_at_infinite_temperature() {
        let k = kernel(1);
        let g = enumerate_gibbs(&k, 0.0, 0.0).unwrap();
        let p = DynamicsParams::with_beta(&k, 0.0, 0.0);
        assert!(g.check_invariance(&p, 4, 1).unwrap() < 1e-15);
        let wrong = DynamicsParams::with_beta(&k, 0.1, 0.0);
        assert!(g.check_invariance(&wrong, 0, 1).is_err());
    }

    #[test]
    fn balance_on_the_smallest_torus() {
        let k = kernel(1);
        let p = DynamicsParams::with_beta(&k, 0.9, 0.3);
        assert!(detailed_balance_violation(&k, &p).unwrap() < 1e-12);
    }
}
