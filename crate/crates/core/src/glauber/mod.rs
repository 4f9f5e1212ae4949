//! Continuous-time Glauber dynamics of the Ising-Kac model.
//!
//! The chain is simulated event by event: a global clock with rate `|Λ_N|`
//! rings, a uniformly chosen site is proposed and flipped with probability
//! `c(z, σ) = ½(1 − σ_z tanh(βh_γ(z) + b))`. Time is microscopic; the
//! fluctuation field lives on macroscopic time `t = α s`.

mod cosim;

pub use cosim::{cosimulate_linearization, CosimStep};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::kernel::KacKernel;
use crate::lattice::{representative, TorusField};
use crate::phi42::hermite;

/// Number of flips between two full recomputations of the local field.
pub const REFRESH_INTERVAL: u64 = 1_000_000;

/// Inverse temperature, field and space-time scalings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub beta: f64,
    pub b: f64,
    pub a: f64,
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Forces every rate to zero (synthetic test mode).
    pub freeze: bool,
}

impl DynamicsParams {
    /// Critical scaling: `δ = γ`, `α = γ²`, `ε = 1/N`, `β = 1 + α(C_γ + A)`.
    pub fn critical(kernel: &KacKernel, a: f64) -> Result<Self> {
        let g = kernel.gamma();
        let c = kernel.renorm_constant()?;
        Ok(Self {
            beta: 1.0 + g * g * (c + a),
            b: 0.0,
            a,
            alpha: g * g,
            delta: g,
            epsilon: kernel.epsilon(),
            freeze: false,
        })
    }

    /// Explicit `β` and `b` with the critical field and time scalings.
    pub fn with_beta(kernel: &KacKernel, beta: f64, b: f64) -> Self {
        let g = kernel.gamma();
        Self { beta, b, a: 0.0, alpha: g * g, delta: g, epsilon: kernel.epsilon(), freeze: false }
    }
}

/// Flip probability of a spin `sigma` sitting in local field `h`.
///
/// Written as `1 / (1 + e^{2σ(βh + b)})`, which equals `½(1 − σ tanh(βh + b))`
/// and stays accurate when the rate is tiny.
#[inline]
pub fn flip_rate(sigma: i8, h: f64, p: &DynamicsParams) -> f64 {
    if p.freeze {
        return 0.0;
    }
    let u = p.beta * h + p.b;
    1.0 / (1.0 + (2.0 * sigma as f64 * u).exp())
}

/// Contiguous circular runs of kernel weights, one per row offset.
#[derive(Debug, Clone)]
pub(crate) struct KernelRows {
    side: usize,
    runs: Vec<(usize, usize, Vec<f64>)>,
}

impl KernelRows {
    pub(crate) fn new(kernel: &KacKernel) -> Self {
        let side = kernel.side();
        let n = kernel.n();
        let kappa = kernel.kappa();
        let mut runs = Vec::new();
        for dx in 0..side {
            let row = &kappa[dx * side..(dx + 1) * side];
            let reach = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, _)| representative(j, n).unsigned_abs() as usize)
                .max();
            let Some(reach) = reach else { continue };
            let (start, len) = if 2 * reach + 1 >= side {
                (0, side)
            } else {
                (side - reach, 2 * reach + 1)
            };
            let weights = (0..len).map(|t| row[(start + t) % side]).collect();
            runs.push((dx, start % side, weights));
        }
        Self { side, runs }
    }

    /// Calls `f(x, weight)` for every site `x = z + offset` with nonzero reach.
    #[inline]
    pub(crate) fn for_each(&self, z: usize, mut f: impl FnMut(usize, f64)) {
        let side = self.side;
        let (z1, z2) = (z / side, z % side);
        for (dx, start, weights) in &self.runs {
            let x1 = (z1 + dx) % side;
            let base = x1 * side;
            let col = (z2 + start) % side;
            let first = weights.len().min(side - col);
            for (t, &w) in weights[..first].iter().enumerate() {
                f(base + col + t, w);
            }
            for (t, &w) in weights[first..].iter().enumerate() {
                f(base + t, w);
            }
        }
    }

    /// `h[z + offset] += c κ(offset)` over the support.
    #[inline]
    fn axpy(&self, z: usize, c: f64, h: &mut [f64]) {
        let side = self.side;
        let (z1, z2) = (z / side, z % side);
        for (dx, start, weights) in &self.runs {
            let base = ((z1 + dx) % side) * side;
            let col = (z2 + start) % side;
            let first = weights.len().min(side - col);
            let (a, b) = weights.split_at(first);
            for (hv, &w) in h[base + col..base + col + first].iter_mut().zip(a) {
                *hv += c * w;
            }
            for (hv, &w) in h[base..base + b.len()].iter_mut().zip(b) {
                *hv += c * w;
            }
        }
    }
}

/// Outcome of one ring of the global clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub site: usize,
    /// Microscopic time elapsed since the previous event or target.
    pub dt: f64,
    pub flipped: bool,
    /// Spin value before the ring.
    pub old_spin: i8,
}

/// Spin configuration with cached local field and its own random stream.
#[derive(Debug, Clone)]
pub struct SpinConfiguration {
    n: usize,
    gamma: f64,
    spins: Vec<i8>,
    local_field: Vec<f64>,
    t_micro: f64,
    rng: ChaCha8Rng,
    next_ring: Option<f64>,
    rows: KernelRows,
    flips: u64,
    rings: u64,
    flips_since_refresh: u64,
    refreshes: u64,
}

impl SpinConfiguration {
    /// Explicit spins (periodic storage order, entries ±1).
    pub fn from_spins(kernel: &KacKernel, spins: Vec<i8>, rng: ChaCha8Rng) -> Result<Self> {
        let side = kernel.side();
        if spins.len() != side * side {
            return Err(Error::Dimension(format!(
                "expected {} spins, got {}",
                side * side,
                spins.len()
            )));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Config("spins must be ±1".into()));
        }
        let mut s = Self {
            n: kernel.n(),
            gamma: kernel.gamma(),
            local_field: vec![0.0; spins.len()],
            spins,
            t_micro: 0.0,
            rng,
            next_ring: None,
            rows: KernelRows::new(kernel),
            flips: 0,
            rings: 0,
            flips_since_refresh: 0,
            refreshes: 0,
        };
        s.local_field = s.recompute_local_field();
        Ok(s)
    }

    /// Independent fair coins, drawn from `rng` before the dynamics starts.
    pub fn random(kernel: &KacKernel, mut rng: ChaCha8Rng) -> Self {
        let len = kernel.side() * kernel.side();
        let spins = (0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self::from_spins(kernel, spins, rng).expect("consistent size")
    }

    pub fn uniform(kernel: &KacKernel, spin: i8, rng: ChaCha8Rng) -> Result<Self> {
        Self::from_spins(kernel, vec![spin; kernel.side() * kernel.side()], rng)
    }

    /// Rebuilds a chain from a checkpoint. The local field is recomputed, which
    /// matches a chain that called [`Self::refresh_local_field`] at capture time.
    pub fn restore(
        kernel: &KacKernel,
        spins: Vec<i8>,
        rng: ChaCha8Rng,
        t_micro: f64,
        pending_ring: Option<f64>,
    ) -> Result<Self> {
        if !(t_micro >= 0.0) || pending_ring.is_some_and(|t| !(t >= t_micro)) {
            return Err(Error::Config(format!(
                "inconsistent checkpoint times: t = {t_micro}, next ring {pending_ring:?}"
            )));
        }
        let mut s = Self::from_spins(kernel, spins, rng)?;
        s.t_micro = t_micro;
        s.next_ring = pending_ring;
        Ok(s)
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Time of the already drawn next ring, if any.
    pub fn pending_ring(&self) -> Option<f64> {
        self.next_ring
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn local_field(&self) -> &[f64] {
        &self.local_field
    }

    pub fn t_micro(&self) -> f64 {
        self.t_micro
    }

    pub fn flips(&self) -> u64 {
        self.flips
    }

    pub fn rings(&self) -> u64 {
        self.rings
    }

    /// Number of full local-field recomputations performed so far.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    pub(crate) fn rows(&self) -> &KernelRows {
        &self.rows
    }

    /// `Σ_z κ(x − z) σ_z` from scratch.
    pub fn recompute_local_field(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.spins.len()];
        for (z, &s) in self.spins.iter().enumerate() {
            self.rows.axpy(z, s as f64, &mut h);
        }
        h
    }

    /// Largest deviation of the cached local field from a full recomputation.
    pub fn local_field_error(&self) -> f64 {
        self.recompute_local_field()
            .iter()
            .zip(&self.local_field)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn refresh_local_field(&mut self) {
        self.local_field = self.recompute_local_field();
        self.flips_since_refresh = 0;
        self.refreshes += 1;
    }

    pub fn flip_rate(&self, z: usize, p: &DynamicsParams) -> f64 {
        flip_rate(self.spins[z], self.local_field[z], p)
    }

    /// Absolute microscopic time of the next ring; drawn once and kept pending.
    pub fn next_ring_time(&mut self) -> f64 {
        if let Some(t) = self.next_ring {
            return t;
        }
        let e: f64 = Exp1.sample(&mut self.rng);
        let t = self.t_micro + e / self.spins.len() as f64;
        self.next_ring = Some(t);
        t
    }

    /// Processes the pending ring: uniform site, flip with probability `c(z, σ)`.
    pub fn step(&mut self, p: &DynamicsParams) -> Ring {
        self.step_with(p, |_, _, _| {})
    }

    /// Like [`SpinConfiguration::step`]; `before_flip(self, site, t)` runs just
    /// before an accepted flip is applied.
    pub fn step_with(
        &mut self,
        p: &DynamicsParams,
        mut before_flip: impl FnMut(&Self, usize, f64),
    ) -> Ring {
        let t = self.next_ring_time();
        self.next_ring = None;
        let dt = t - self.t_micro;
        self.t_micro = t;
        self.rings += 1;
        let site = self.rng.random_range(0..self.spins.len());
        let u: f64 = self.rng.random();
        let old_spin = self.spins[site];
        let flipped = u < self.flip_rate(site, p);
        if flipped {
            before_flip(self, site, t);
            self.apply_flip(site);
        }
        Ring { site, dt, flipped, old_spin }
    }

    fn apply_flip(&mut self, z: usize) {
        let old = self.spins[z];
        self.spins[z] = -old;
        self.rows.axpy(z, -2.0 * old as f64, &mut self.local_field);
        self.flips += 1;
        self.flips_since_refresh += 1;
        if self.flips_since_refresh >= REFRESH_INTERVAL {
            self.refresh_local_field();
        }
    }

    /// Runs the chain up to microscopic time `target`, calling `on_ring` after each ring.
    ///
    /// The pending ring beyond `target` is kept, so splitting an interval into
    /// pieces yields the same trajectory as a single call.
    pub fn advance_to(&mut self, target: f64, p: &DynamicsParams, mut on_ring: impl FnMut(&Self, &Ring)) {
        while self.next_ring_time() <= target {
            let ring = self.step(p);
            on_ring(self, &ring);
        }
        if target > self.t_micro {
            self.t_micro = target;
        }
    }

    /// Advances by a macroscopic time span.
    pub fn advance_macro(&mut self, span: f64, p: &DynamicsParams) {
        let target = self.t_micro + span / p.alpha;
        self.advance_to(target, p, |_, _| {});
    }

    /// `X_γ(x) = δ^{-1} h_γ(ε^{-1}x)`.
    pub fn fluctuation_field(&self, p: &DynamicsParams) -> TorusField {
        TorusField::new(self.n, self.local_field.iter().map(|h| h / p.delta).collect())
            .expect("consistent size")
    }

    /// `δ^{-1}(σ − m)` on lattice points.
    pub fn centered_spin_field(&self, p: &DynamicsParams, m: f64) -> TorusField {
        TorusField::new(self.n, self.spins.iter().map(|&s| (s as f64 - m) / p.delta).collect())
            .expect("consistent size")
    }

    pub fn t_macro(&self, p: &DynamicsParams) -> f64 {
        self.t_micro * p.alpha
    }
}

/// Exact compensator `α^{-1}(K_γ ∗ δ^{-1} tanh(βδX + b) − X)`.
pub fn drift_field(x: &TorusField, p: &DynamicsParams, k: &KacKernel) -> Result<TorusField> {
    let t = x.map(|v| (p.beta * p.delta * v + p.b).tanh() / p.delta);
    let smoothed = k.smooth(&t)?;
    smoothed.zip_with(x, |s, v| (s - v) / p.alpha)
}

/// Third-order expansion `Δ_γX − ⅓(X³ − 3C_γX) + AX`.
pub fn expanded_drift(x: &TorusField, p: &DynamicsParams, k: &KacKernel) -> Result<TorusField> {
    let c = k.renorm_constant()?;
    let lap = laplacian(x, k)?;
    lap.zip_with(x, |l, v| l - (v * v * v - 3.0 * c * v) / 3.0 + p.a * v)
}

/// `Δ_γ f = ε^{-2}γ²(K_γ ∗ f − f)`.
pub fn laplacian(f: &TorusField, k: &KacKernel) -> Result<TorusField> {
    if f.n() != k.n() {
        return Err(Error::Dimension(format!("field N = {} vs kernel N = {}", f.n(), k.n())));
    }
    Ok(f.apply_multiplier(|i| k.laplacian_symbol(i)))
}

/// Pointwise `H_j(Z(x), c)` for `j ∈ {1, 2, 3}`.
pub fn wick_observable(z: &TorusField, j: usize, c: f64) -> Result<TorusField> {
    if !(1..=3).contains(&j) {
        return Err(Error::OutOfRange(format!("Wick power {j} is not in 1..=3")));
    }
    if c < 0.0 {
        return Err(Error::OutOfRange(format!("variance parameter {c} is negative")));
    }
    Ok(z.map(|v| hermite::hermite_unchecked(j, v, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, build_periodized_kernel, Profile};
    use crate::rng::replica_rng;

    fn kernel() -> KacKernel {
        build_kernel(Profile::default(), 0.25, 16).unwrap()
    }

    #[test]
    fn rate_examples() {
        let k = kernel();
        let p = DynamicsParams::with_beta(&k, 1.0, 0.0);
        assert_eq!(flip_rate(1, 0.0, &p), 0.5);
        let u: f64 = 0.37;
        let ratio = flip_rate(1, u, &p) / flip_rate(-1, u, &p);
        assert!((ratio - (-2.0 * u).exp()).abs() < 1e-15);
        assert!(flip_rate(1, 1e3, &p) < 1e-300);
        let frozen = DynamicsParams { freeze: true, ..p };
        assert_eq!(flip_rate(1, -5.0, &frozen), 0.0);
    }

    #[test]
    fn rows_reproduce_kernel() {
        let k = build_periodized_kernel(Profile::default(), 0.5, 2).unwrap();
        let rows = KernelRows::new(&k);
        let mut acc = vec![0.0; 16];
        rows.for_each(5, |x, w| acc[x] += w);
        let side = 4;
        for x in 0..16 {
            let d1 = (x / side + side - 5 / side) % side;
            let d2 = (x % side + side - 5 % side) % side;
            assert!((acc[x] - k.kappa()[d1 * side + d2]).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_fields() {
        let k = kernel();
        let p = DynamicsParams::with_beta(&k, 1.0, 0.0);
        let s = SpinConfiguration::uniform(&k, 1, replica_rng(1, 0)).unwrap();
        assert!(s.fluctuation_field(&p).values().iter().all(|v| (v - 4.0).abs() < 1e-12));
        let s = SpinConfiguration::uniform(&k, -1, replica_rng(1, 0)).unwrap();
        assert!(s.fluctuation_field(&p).values().iter().all(|v| (v + 4.0).abs() < 1e-12));
        assert!(s.centered_spin_field(&p, -1.0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejected_ring_changes_nothing() {
        let k = kernel();
        let p = DynamicsParams { freeze: true, ..DynamicsParams::with_beta(&k, 1.0, 0.0) };
        let mut s = SpinConfiguration::random(&k, replica_rng(3, 0));
        let spins = s.spins().to_vec();
        let h = s.local_field().to_vec();
        for _ in 0..100 {
            assert!(!s.step(&p).flipped);
        }
        assert_eq!(spins, s.spins());
        assert_eq!(h, s.local_field());
    }

    #[test]
    fn incremental_field_matches_recomputation() {
        let k = kernel();
        let p = DynamicsParams::with_beta(&k, 1.0, 0.0);
        let mut s = SpinConfiguration::random(&k, replica_rng(4, 0));
        let m0 = s.magnetization();
        for _ in 0..5000 {
            let m = s.magnetization();
            if s.step(&p).flipped {
                assert_eq!((s.magnetization() - m).abs(), 2);
            }
        }
        assert!(s.flips() > 0);
        assert!(s.local_field_error() < 1e-9);
        assert!(s.local_field().iter().all(|h| h.abs() <= 1.0 + 1e-12));
        let _ = m0;
    }

    #[test]
    fn chunked_advance_matches_single_advance() {
        let k = kernel();
        let p = DynamicsParams::with_beta(&k, 1.0, 0.0);
        let mut a = SpinConfiguration::random(&k, replica_rng(5, 2));
        let mut b = a.clone();
        a.advance_to(3.0, &p, |_, _| {});
        for i in 1..=30 {
            b.advance_to(0.1 * i as f64, &p, |_, _| {});
        }
        b.advance_to(3.0, &p, |_, _| {});
        assert_eq!(a.spins(), b.spins());
        assert_eq!(a.rings(), b.rings());
    }

    #[test]
    fn constant_drift() {
        let k = kernel();
        let p = DynamicsParams::critical(&k, 0.0).unwrap();
        let zero = TorusField::zeros(16);
        assert!(drift_field(&zero, &p, &k).unwrap().values().iter().all(|v| v.abs() < 1e-12));
        let c = 0.8;
        let x = TorusField::constant(16, c);
        let g = 0.25;
        let expect = ((p.beta * g * c).tanh() / g - c) / (g * g);
        let d = drift_field(&x, &p, &k).unwrap();
        assert!(d.values().iter().all(|v| (v - expect).abs() < 1e-10));
    }

    #[test]
    fn wick_examples() {
        let z = TorusField::constant(2, 2.0);
        assert_eq!(wick_observable(&z, 3, 1.0).unwrap().values()[0], 2.0);
        let one = TorusField::constant(2, 1.0);
        assert_eq!(wick_observable(&one, 2, 1.0).unwrap().values()[0], 0.0);
        assert!(wick_observable(&z, 4, 1.0).is_err());
    }
}
