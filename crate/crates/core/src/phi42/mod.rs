//! Galerkin sampler for the dynamical Φ⁴₂ equation
//! `∂_t X = ΔX + Σ_n a_n H_n(X, c_ε) + √2 ξ` on `T² = [-1, 1]²`.
//!
//! The solution is split as `X = Z̃ + V` with `Z̃ = e^{tΔ}X⁰ + Z`, where `Z` solves
//! the stochastic heat equation from zero and is advanced exactly mode by mode.
//! `V` solves `∂_t V = ΔV + Σ_n a_n(t) H_n(Z̃ + V, c_ε(t))` and is advanced with
//! an integrating-factor scheme. The decomposition is restarted periodically,
//! taking the current `X` as the new `X⁰`.
//!
//! Spectra follow the lattice convention on `Λ_M` (grid of side `2M`), so the
//! point value is `¼ Σ_ω f̂(ω) e^{iπω·x}`.

pub mod hermite;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft;
use crate::lattice::{frequency_norm_sq, resample_spectrum, TorusField};
use crate::numeric::{binomial, compensated_sum};

use hermite::{coefficient_shift, hermite_all};

const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

/// `c_ε(t) = Σ_{ω ∈ Λ_M∖{0}} (1 − e^{−2tπ²|ω|²}) / (4π²|ω|²)`.
pub fn renorm_c(t: f64, m: usize) -> f64 {
    let len = (2 * m) * (2 * m);
    compensated_sum((1..len).map(|i| {
        let lambda = PI2 * frequency_norm_sq(i, m, 2);
        -(-2.0 * t * lambda).exp_m1() / (4.0 * lambda)
    }))
}

/// `c_ε = Σ_{ω ∈ Λ_M∖{0}} 1 / (4π²|ω|²)`.
pub fn renorm_c_inf(m: usize) -> f64 {
    let len = (2 * m) * (2 * m);
    compensated_sum((1..len).map(|i| 1.0 / (4.0 * PI2 * frequency_norm_sq(i, m, 2))))
}

/// Time discretization of the remainder equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// `V ← e^{Δdt}(V + dt F(V))`, first order.
    ExponentialEuler,
    /// Second-order integrating-factor Heun step.
    #[default]
    LawsonHeun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phi42Params {
    /// Galerkin cutoff: frequencies `Λ_M`.
    pub m: usize,
    /// `coeffs[n]` multiplies `H_n(X, c_ε)`; Φ⁴₂ is `[0, A, 0, -1/3]`.
    pub coeffs: Vec<f64>,
    pub noise: bool,
    pub scheme: Scheme,
    /// Macroscopic time between restarts of the decomposition.
    pub restart_interval: f64,
    /// Half-size of the grid on which pointwise products are formed.
    pub pad_n: usize,
}

impl Phi42Params {
    /// `∂_t X = ΔX − ⅓X^{:3:} + AX + √2ξ` with 3/2 zero padding.
    pub fn phi4(m: usize, a: f64) -> Self {
        Self {
            m,
            coeffs: vec![0.0, a, 0.0, -1.0 / 3.0],
            noise: true,
            scheme: Scheme::default(),
            restart_interval: 1.0,
            pad_n: (3 * m).div_ceil(2),
        }
    }

    /// Only the linear term: an Ornstein-Uhlenbeck field with symbol `−π²|ω|² + A`.
    pub fn linear(m: usize, a: f64) -> Self {
        Self { coeffs: vec![0.0, a], ..Self::phi4(m, a) }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("Galerkin cutoff M must be positive".into()));
        }
        if self.coeffs.len() > hermite::MAX_DEGREE + 1 {
            return Err(Error::OutOfRange(format!(
                "polynomial degree {} exceeds {}",
                self.coeffs.len() - 1,
                hermite::MAX_DEGREE
            )));
        }
        if self.pad_n < self.m {
            return Err(Error::Config("padding grid smaller than the Galerkin grid".into()));
        }
        if !(self.restart_interval > 0.0) {
            return Err(Error::Config("restart interval must be positive".into()));
        }
        Ok(())
    }
}

/// Galerkin state of the decomposition `X = e^{tΔ}X⁰ + Z + V`.
#[derive(Debug, Clone)]
pub struct Phi42State {
    params: Phi42Params,
    /// Time since the last restart.
    t: f64,
    /// Total elapsed time.
    t_total: f64,
    z_hat: Vec<Complex64>,
    v_hat: Vec<Complex64>,
    x0_hat: Vec<Complex64>,
    mode_var: Vec<f64>,
    c_t: f64,
    c_inf: f64,
    lambda: Vec<f64>,
    conj: Vec<usize>,
    cache: Option<ForcingCache>,
}

/// Pointwise `Z̃^{:j:}` on the padded grid at the current time.
#[derive(Debug, Clone)]
struct ForcingCache {
    powers: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
}

impl Phi42State {
    /// Starts from `X⁰` (projected onto `Λ_M`), or from zero.
    pub fn new(params: Phi42Params, x0: Option<&TorusField>) -> Result<Self> {
        params.validate()?;
        let m = params.m;
        let side = 2 * m;
        let len = side * side;
        let x0_hat = match x0 {
            Some(f) if f.dim() == 2 => resample_spectrum(f.spectrum(), f.n(), m, 2),
            Some(_) => return Err(Error::Dimension("initial condition must be 2D".into())),
            None => vec![Complex64::default(); len],
        };
        let lambda = (0..len).map(|i| PI2 * frequency_norm_sq(i, m, 2)).collect();
        let conj = (0..len)
            .map(|i| ((side - i / side) % side) * side + (side - i % side) % side)
            .collect();
        let c_inf = if params.noise { renorm_c_inf(m) } else { 0.0 };
        Ok(Self {
            params,
            t: 0.0,
            t_total: 0.0,
            z_hat: vec![Complex64::default(); len],
            v_hat: vec![Complex64::default(); len],
            x0_hat,
            mode_var: vec![0.0; len],
            c_t: 0.0,
            c_inf,
            lambda,
            conj,
            cache: None,
        })
    }

    pub fn params(&self) -> &Phi42Params {
        &self.params
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    /// Time since the last restart of the decomposition.
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn c_t(&self) -> f64 {
        self.c_t
    }

    pub fn c_inf(&self) -> f64 {
        self.c_inf
    }

    pub fn z_hat(&self) -> &[Complex64] {
        &self.z_hat
    }

    pub fn v_hat(&self) -> &[Complex64] {
        &self.v_hat
    }

    pub fn x0_hat(&self) -> &[Complex64] {
        &self.x0_hat
    }

    /// Sum of the tracked per-mode variances, i.e. `c_ε(t)` maintained step by step.
    pub fn c_t_bookkeeping(&self) -> f64 {
        compensated_sum(self.mode_var.iter().skip(1).copied())
    }

    /// `Ẑ(−ω) = conj Ẑ(ω)` for every stored pair, exactly.
    pub fn z_is_hermitian(&self) -> bool {
        self.z_hat.iter().enumerate().all(|(i, z)| *z == self.z_hat[self.conj[i]].conj())
    }

    /// `e^{tΔ}X⁰` in spectral form.
    pub fn heat_initial(&self) -> Vec<Complex64> {
        self.x0_hat.iter().zip(&self.lambda).map(|(x, l)| x * (-l * self.t).exp()).collect()
    }

    /// Spectrum of `X = e^{tΔ}X⁰ + Z + V`.
    pub fn x_hat(&self) -> Vec<Complex64> {
        self.heat_initial()
            .iter()
            .zip(&self.z_hat)
            .zip(&self.v_hat)
            .map(|((p, z), v)| p + z + v)
            .collect()
    }

    pub fn field(&self) -> TorusField {
        TorusField::from_spectrum(self.params.m, 2, &self.x_hat()).expect("consistent size")
    }

    pub fn z_field(&self) -> TorusField {
        TorusField::from_spectrum(self.params.m, 2, &self.z_hat).expect("consistent size")
    }

    pub fn v_field(&self) -> TorusField {
        TorusField::from_spectrum(self.params.m, 2, &self.v_hat).expect("consistent size")
    }

    /// Exact Ornstein-Uhlenbeck transition of `Z` over `dt`.
    ///
    /// Per-mode noise is fixed by the point-variance identities: a nonzero mode
    /// contributes `(1 − e^{−2λt}) / (4λ)` to `E Z(t, x)²`, the zero mode `t/2`.
    pub fn ou_step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::OutOfRange(format!("time step must be positive, got {dt}")));
        }
        let len = self.z_hat.len();
        for i in 0..len {
            let j = self.conj[i];
            if j < i {
                continue;
            }
            let l = self.lambda[i];
            let decay = (-l * dt).exp();
            let (var, contrib_gain) = if i == 0 {
                (8.0 * dt, 0.0)
            } else {
                let g = -(-2.0 * l * dt).exp_m1();
                (4.0 * g / l, g / (4.0 * l))
            };
            let noise = if !self.params.noise {
                Complex64::default()
            } else if i == j {
                let x: f64 = rng.sample(StandardNormal);
                Complex64::new(x * var.sqrt(), 0.0)
            } else {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let s = (var / 2.0).sqrt();
                Complex64::new(a * s, b * s)
            };
            let next = self.z_hat[i] * decay + noise;
            self.z_hat[i] = next;
            self.z_hat[j] = next.conj();
            if self.params.noise && i != 0 {
                let r = (-2.0 * l * dt).exp();
                self.mode_var[i] = self.mode_var[i] * r + contrib_gain;
                if j != i {
                    self.mode_var[j] = self.mode_var[i];
                }
            }
        }
        self.t += dt;
        self.t_total += dt;
        self.c_t = if self.params.noise { renorm_c(self.t, self.params.m) } else { 0.0 };
        self.cache = None;
        Ok(())
    }

    fn pad_inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let pn = self.params.pad_n;
        let mut buf = resample_spectrum(spec, self.params.m, pn, 2);
        fft::inverse(&mut buf, 2 * pn, 2);
        buf.into_iter().map(|c| 0.25 * c.re).collect()
    }

    fn forcing_cache(&mut self) -> &ForcingCache {
        if self.cache.is_none() {
            let deg = self.params.coeffs.len().saturating_sub(1);
            let z = self.pad_inverse(&self.z_hat);
            let p = self.pad_inverse(&self.heat_initial());
            let c = self.c_t;
            let mut powers = vec![vec![0.0; z.len()]; deg + 1];
            let mut h = vec![0.0; deg + 1];
            let weights: Vec<Vec<f64>> =
                (0..=deg).map(|j| (0..=j).map(|i| binomial(j, i)).collect()).collect();
            for x in 0..z.len() {
                hermite_all(deg, z[x], c, &mut h);
                // Z̃^{:j:} = Σ_i C(j, i) P^{j−i} Z^{:i:}
                for j in 0..=deg {
                    let mut acc = 0.0;
                    let mut pw = 1.0;
                    for i in (0..=j).rev() {
                        acc += weights[j][i] * pw * h[i];
                        pw *= p[x];
                    }
                    powers[j][x] = acc;
                }
            }
            let coeffs = coefficient_shift(&self.params.coeffs, self.c_inf, self.c_t);
            self.cache = Some(ForcingCache { powers, coeffs });
        }
        self.cache.as_ref().expect("just filled")
    }

    /// `F = Σ_n a_n(t) Σ_j C(n, j) V^{n−j} Z̃^{:j:}`, dealiased, on `Λ_M`.
    fn forcing(&mut self, v_hat: &[Complex64]) -> Vec<Complex64> {
        let v = self.pad_inverse(v_hat);
        let pn = self.params.pad_n;
        let m = self.params.m;
        let cache = self.forcing_cache();
        let mut out = vec![Complex64::default(); v.len()];
        for x in 0..v.len() {
            let mut total = 0.0;
            for (n, &a) in cache.coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                let mut vp = 1.0;
                for j in (0..=n).rev() {
                    acc += binomial(n, j) * vp * cache.powers[j][x];
                    vp *= v[x];
                }
                total += a * acc;
            }
            out[x] = Complex64::new(total, 0.0);
        }
        fft::forward(&mut out, 2 * pn, 2);
        let w = 1.0 / (pn * pn) as f64;
        out.iter_mut().for_each(|c| *c *= w);
        resample_spectrum(&out, pn, m, 2)
    }

    /// One step of the full scheme: `Z` exactly, `V` by the configured integrator.
    pub fn dpd_step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::OutOfRange(format!("time step must be positive, got {dt}")));
        }
        let v0 = self.v_hat.clone();
        let f0 = self.forcing(&v0);
        self.ou_step(dt, rng)?;
        let decay: Vec<f64> = self.lambda.iter().map(|l| (-l * dt).exp()).collect();
        let euler: Vec<Complex64> =
            (0..v0.len()).map(|i| decay[i] * (v0[i] + dt * f0[i])).collect();
        self.v_hat = match self.params.scheme {
            Scheme::ExponentialEuler => euler,
            Scheme::LawsonHeun => {
                let f1 = self.forcing(&euler);
                (0..v0.len())
                    .map(|i| decay[i] * (v0[i] + 0.5 * dt * f0[i]) + 0.5 * dt * f1[i])
                    .collect()
            }
        };
        if self.t >= self.params.restart_interval - 1e-12 {
            self.restart();
        }
        Ok(())
    }

    /// Takes the current `X` as the new initial condition and resets `Z`, `V` and `t`.
    pub fn restart(&mut self) {
        self.x0_hat = self.x_hat();
        self.z_hat.iter_mut().for_each(|z| *z = Complex64::default());
        self.v_hat.iter_mut().for_each(|v| *v = Complex64::default());
        self.mode_var.iter_mut().for_each(|v| *v = 0.0);
        self.t = 0.0;
        self.c_t = 0.0;
        self.cache = None;
    }
}

/// Burn-in, sampling window and cadence of a long run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSchedule {
    pub dt: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub cadence: f64,
}

/// Runs the sampler and calls `observe(t, state)` every `cadence` after burn-in.
///
/// Times passed to the observer are measured from the end of burn-in.
pub fn run_phi42<R: Rng + ?Sized>(
    params: Phi42Params,
    x0: Option<&TorusField>,
    schedule: RunSchedule,
    rng: &mut R,
    mut observe: impl FnMut(f64, &Phi42State),
) -> Result<Phi42State> {
    let RunSchedule { dt, t_burn, t_sample, cadence } = schedule;
    if !(dt > 0.0 && cadence > 0.0 && t_burn >= 0.0 && t_sample >= 0.0) {
        return Err(Error::Config("dt and cadence must be positive, times nonnegative".into()));
    }
    let mut state = Phi42State::new(params, x0)?;
    let burn_steps = (t_burn / dt).round() as usize;
    for _ in 0..burn_steps {
        state.dpd_step(dt, rng)?;
    }
    let per_sample = ((cadence / dt).round() as usize).max(1);
    let samples = (t_sample / cadence).round() as usize;
    for k in 1..=samples {
        for _ in 0..per_sample {
            state.dpd_step(dt, rng)?;
        }
        observe(k as f64 * per_sample as f64 * dt, &state);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    #[test]
    fn renorm_examples() {
        assert_eq!(renorm_c(0.0, 4), 0.0);
        let expect = 5.0 / (8.0 * PI2);
        assert!((renorm_c_inf(1) - expect).abs() < 1e-15);
        let mut prev = 0.0;
        for t in [0.01, 0.1, 1.0, 10.0] {
            let c = renorm_c(t, 6);
            assert!(c > prev);
            prev = c;
        }
        assert!((renorm_c(50.0, 6) - renorm_c_inf(6)).abs() < 1e-12);
    }

    #[test]
    fn noiseless_ou_is_heat_decay() {
        let mut params = Phi42Params::linear(4, 0.0);
        params.noise = false;
        let x0 = TorusField::from_fn(4, |a, b| (std::f64::consts::PI * a).cos() + (b * 3.0).sin());
        let mut s = Phi42State::new(params, None).unwrap();
        s.z_hat = x0.fourier_forward();
        let start = s.z_hat.clone();
        s.ou_step(0.05, &mut replica_rng(0, 0)).unwrap();
        for (i, (a, b)) in s.z_hat.iter().zip(&start).enumerate() {
            assert!((a - b * (-s.lambda[i] * 0.05).exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn bookkeeping_and_symmetry() {
        let mut s = Phi42State::new(Phi42Params::phi4(6, 0.0), None).unwrap();
        let mut rng = replica_rng(1, 0);
        for _ in 0..20 {
            s.dpd_step(0.01, &mut rng).unwrap();
            assert!(s.z_is_hermitian());
            assert!((s.c_t_bookkeeping() - renorm_c(s.t(), 6)).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_heat_flow_without_coefficients() {
        let mut params = Phi42Params::phi4(4, 0.0);
        params.coeffs = vec![0.0; 4];
        params.noise = false;
        let x0 = TorusField::from_fn(4, |a, b| (a * 2.0).sin() * b);
        let mut s = Phi42State::new(params, Some(&x0)).unwrap();
        let mut rng = replica_rng(0, 0);
        for _ in 0..10 {
            s.dpd_step(0.01, &mut rng).unwrap();
        }
        let x = s.x_hat();
        for (i, (a, b)) in x.iter().zip(x0.spectrum()).enumerate() {
            assert!((a - b * (-s.lambda[i] * 0.1).exp()).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_steps() {
        let mut s = Phi42State::new(Phi42Params::phi4(2, 0.0), None).unwrap();
        assert!(s.ou_step(0.0, &mut replica_rng(0, 0)).is_err());
        assert!(s.dpd_step(-1.0, &mut replica_rng(0, 0)).is_err());
    }
}
