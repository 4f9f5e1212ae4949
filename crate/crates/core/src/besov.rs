//! Paley-Littlewood blocks and Besov norms on the lattice torus.
//!
//! `χ̃` is radial, equal to 1 on `B(3/4)` and 0 outside `B(4/3)`, with a
//! `C^∞` transition `T(u) = ψ(u) / (ψ(u) + ψ(1 − u))`, `ψ(u) = e^{−1/u}`.
//! Setting `χ(ω) = χ̃(ω/2) − χ̃(ω)` makes the partition of unity telescope, so
//! `χ̃ + Σ_{k ≤ k_max} χ(2^{−k}·) = χ̃(2^{−k_max−1}·)`, which is identically 1
//! on every lattice frequency once `2^{k_max+1}·¾ ≥ max|ω|`.

use crate::error::{Error, Result};
use crate::kernel::KacKernel;
use crate::lattice::{frequency_norm_sq, TorusField};
use crate::numeric::compensated_sum;

const INNER: f64 = 0.75;
const OUTER: f64 = 4.0 / 3.0;

fn psi(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

fn transition(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = psi(u);
        a / (a + psi(1.0 - u))
    }
}

/// `χ̃(r)` for `r = |ω|`.
pub fn chi_tilde(r: f64) -> f64 {
    1.0 - transition((r - INNER) / (OUTER - INNER))
}

/// `χ(r) = χ̃(r/2) − χ̃(r)`.
pub fn chi(r: f64) -> f64 {
    chi_tilde(0.5 * r) - chi_tilde(r)
}

/// Block multipliers `χ_k(ω)`, `k = −1..=k_max`, sampled on `Λ_N^d`.
#[derive(Debug, Clone)]
pub struct PaleyLittlewoodBank {
    n: usize,
    dim: usize,
    k_max: i32,
    masks: Vec<Vec<f64>>,
}

/// Two-dimensional bank.
pub fn build_block_bank(n: usize) -> Result<PaleyLittlewoodBank> {
    build_block_bank_dim(n, 2)
}

pub fn build_block_bank_dim(n: usize, dim: usize) -> Result<PaleyLittlewoodBank> {
    if n == 0 {
        return Err(Error::Config("lattice half-size N must be positive".into()));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::Dimension(format!("unsupported dimension {dim}")));
    }
    let max_freq = (dim as f64).sqrt() * n as f64;
    let mut k_max = 0_i32;
    while 2f64.powi(k_max + 1) * INNER < max_freq {
        k_max += 1;
    }
    let len = (2 * n).pow(dim as u32);
    let radii: Vec<f64> = (0..len).map(|i| frequency_norm_sq(i, n, dim).sqrt()).collect();
    let mut masks = Vec::with_capacity(k_max as usize + 2);
    masks.push(radii.iter().map(|&r| chi_tilde(r)).collect());
    for k in 0..=k_max {
        let s = 2f64.powi(-k);
        masks.push(radii.iter().map(|&r| chi(s * r)).collect());
    }
    Ok(PaleyLittlewoodBank { n, dim, k_max, masks })
}

impl PaleyLittlewoodBank {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    /// `χ_k(ω)` over the frequency grid, `k ≥ −1`.
    pub fn mask(&self, k: i32) -> Result<&[f64]> {
        if k < -1 || k > self.k_max {
            return Err(Error::OutOfRange(format!("block {k} outside −1..={}", self.k_max)));
        }
        Ok(&self.masks[(k + 1) as usize])
    }

    /// Largest deviation of `Σ_k χ_k(ω)` from 1 over the grid.
    pub fn partition_defect(&self) -> f64 {
        let len = self.masks[0].len();
        (0..len)
            .map(|i| (self.masks.iter().map(|m| m[i]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `η_k(x) = 2^{−d} Σ_ω χ_k(ω) e^{iπω·x}` on lattice points.
    pub fn eta(&self, k: i32) -> Result<TorusField> {
        let spec: Vec<_> =
            self.mask(k)?.iter().map(|&v| num_complex::Complex64::new(v, 0.0)).collect();
        TorusField::from_spectrum(self.n, self.dim, &spec)
    }

    fn check_field(&self, f: &TorusField) -> Result<()> {
        if f.n() != self.n || f.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "bank for N = {}, d = {} applied to N = {}, d = {}",
                self.n,
                self.dim,
                f.n(),
                f.dim()
            )));
        }
        Ok(())
    }
}

/// `δ_k f`, the field with spectrum `χ_k(ω) f̂(ω)`.
pub fn project_block(f: &TorusField, k: i32, bank: &PaleyLittlewoodBank) -> Result<TorusField> {
    bank.check_field(f)?;
    let mask = bank.mask(k)?;
    Ok(f.apply_multiplier(|i| mask[i]))
}

/// Where the block `L^p` norms are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMode {
    /// `L^p(Λ_ε)`.
    Discrete,
    /// `L^p(T^d)` of the extension, sampled on a grid refined by `refine`.
    Continuous { refine: usize },
}

impl Default for NormMode {
    fn default() -> Self {
        NormMode::Discrete
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovSpec {
    pub nu: f64,
    pub p: f64,
    pub q: f64,
    pub mode: NormMode,
}

impl BesovSpec {
    pub fn discrete(nu: f64, p: f64, q: f64) -> Self {
        Self { nu, p, q, mode: NormMode::Discrete }
    }

    pub fn continuous(nu: f64, p: f64, q: f64) -> Self {
        Self { nu, p, q, mode: NormMode::Continuous { refine: 4 } }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.q >= 1.0) || self.nu.is_nan() {
            return Err(Error::OutOfRange(format!(
                "Besov parameters ν = {}, p = {}, q = {}",
                self.nu, self.p, self.q
            )));
        }
        if let NormMode::Continuous { refine: 0 } = self.mode {
            return Err(Error::OutOfRange("refinement factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// Conjugate exponent `p' = p / (p − 1)`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn block_lp(block: &TorusField, spec: &BesovSpec) -> Result<f64> {
    Ok(match spec.mode {
        NormMode::Discrete => block.lp_norm(spec.p),
        NormMode::Continuous { refine } => block.refine(refine)?.lp_norm(spec.p),
    })
}

/// `(Σ_k 2^{νkq} ‖δ_k f‖_p^q)^{1/q}`, or the supremum when `q = ∞`.
pub fn besov_norm(f: &TorusField, spec: &BesovSpec, bank: &PaleyLittlewoodBank) -> Result<f64> {
    spec.validate()?;
    bank.check_field(f)?;
    let mut terms = Vec::with_capacity(bank.k_max as usize + 2);
    for k in -1..=bank.k_max {
        let block = project_block(f, k, bank)?;
        terms.push(2f64.powf(spec.nu * k as f64) * block_lp(&block, spec)?);
    }
    Ok(if spec.q.is_infinite() {
        terms.into_iter().fold(0.0, f64::max)
    } else {
        compensated_sum(terms.iter().map(|t| t.powf(spec.q))).powf(1.0 / spec.q)
    })
}

/// Both sides of an inequality `lhs ≤ C · rhs` and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl InequalityReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        let ratio = if rhs == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            lhs / rhs
        };
        Self { lhs, rhs, ratio }
    }
}

/// `⟨f, g⟩` against `‖f‖_{B^α_{p,q}} ‖g‖_{B^{−α}_{p',q'}}` (discrete norms).
pub fn check_duality(
    f: &TorusField,
    g: &TorusField,
    alpha: f64,
    p: f64,
    q: f64,
    bank: &PaleyLittlewoodBank,
) -> Result<InequalityReport> {
    let lhs = f.inner_product(g)?;
    let a = besov_norm(f, &BesovSpec::discrete(alpha, p, q), bank)?;
    let b = besov_norm(g, &BesovSpec::discrete(-alpha, conjugate(p), conjugate(q)), bank)?;
    Ok(InequalityReport { lhs, rhs: a * b, ratio: InequalityReport::new(lhs.abs(), a * b).ratio })
}

/// `Σ_{x,y} ε⁴ K_γ(x − y) ε^{−1}γ |f(x) − f(y)|`, the kernel-weighted gradient.
pub fn kernel_gradient(f: &TorusField, k: &KacKernel) -> Result<f64> {
    if f.n() != k.n() || f.dim() != 2 {
        return Err(Error::Dimension("field and kernel sizes differ".into()));
    }
    let side = k.side();
    let vals = f.values();
    let eps = k.epsilon();
    let support = k.support();
    let mut acc = Vec::with_capacity(vals.len());
    for x in 0..vals.len() {
        let (x1, x2) = ((x / side) as i64, (x % side) as i64);
        let mut s = 0.0;
        for (off, w) in &support {
            let y1 = (x1 - off[0]).rem_euclid(side as i64) as usize;
            let y2 = (x2 - off[1]).rem_euclid(side as i64) as usize;
            s += w * (vals[x] - vals[y1 * side + y2]).abs();
        }
        acc.push(s);
    }
    Ok(eps * eps * k.gamma() / eps * compensated_sum(acc))
}

/// `‖f‖_{B^ν_{1,1}}` against `‖f‖₁^{1−2ν} D^{2ν} + ‖f‖₁` with `D` the kernel gradient.
pub fn check_regularity_bound(
    f: &TorusField,
    k: &KacKernel,
    nu: f64,
    bank: &PaleyLittlewoodBank,
) -> Result<InequalityReport> {
    if !(nu > 0.0 && nu < 0.5) {
        return Err(Error::OutOfRange(format!("ν = {nu} is not in (0, 1/2)")));
    }
    let lhs = besov_norm(f, &BesovSpec::discrete(nu, 1.0, 1.0), bank)?;
    let l1 = f.lp_norm(1.0);
    let d = kernel_gradient(f, k)?;
    Ok(InequalityReport::new(lhs, l1.powf(1.0 - 2.0 * nu) * d.powf(2.0 * nu) + l1))
}

/// `‖Ext f‖_{L^p(T²)}` against `‖f‖_p + ε^{−κ} ‖f‖_{2p−2}^{1−1/p} (Σ_{|x−y|=ε} ε²(f(y) − f(x))²)^{1/(2p)}`.
pub fn check_lp_extension(
    f: &TorusField,
    p: f64,
    kappa: f64,
    refine: usize,
) -> Result<InequalityReport> {
    if !(p > 1.0 && p.is_finite() && kappa > 0.0) {
        return Err(Error::OutOfRange(format!("p = {p}, κ = {kappa}")));
    }
    let lhs = f.refine(refine)?.lp_norm(p);
    let side = f.side();
    let eps = f.epsilon();
    let v = f.values();
    let mut grad = Vec::with_capacity(4 * v.len());
    for x in 0..v.len() {
        let (x1, x2) = (x / side, x % side);
        for y in [
            ((x1 + 1) % side) * side + x2,
            ((x1 + side - 1) % side) * side + x2,
            x1 * side + (x2 + 1) % side,
            x1 * side + (x2 + side - 1) % side,
        ] {
            grad.push(eps * eps * (v[y] - v[x]).powi(2));
        }
    }
    let g = compensated_sum(grad);
    let rhs = f.lp_norm(p)
        + eps.powf(-kappa) * f.lp_norm(2.0 * p - 2.0).powf(1.0 - 1.0 / p) * g.powf(0.5 / p);
    Ok(InequalityReport::new(lhs, rhs))
}

/// `‖f‖_{B^{−ν}_{∞,∞}}` against `‖f‖_{L^p}` (discrete), meaningful for `p ≥ d/ν`.
pub fn check_besov_lp_embedding(
    f: &TorusField,
    nu: f64,
    p: f64,
    bank: &PaleyLittlewoodBank,
) -> Result<InequalityReport> {
    if !(nu > 0.0) || p < f.dim() as f64 / nu {
        return Err(Error::OutOfRange(format!("need ν > 0 and p ≥ d/ν, got ν = {nu}, p = {p}")));
    }
    let lhs = besov_norm(f, &BesovSpec::discrete(-nu, f64::INFINITY, f64::INFINITY), bank)?;
    Ok(InequalityReport::new(lhs, f.lp_norm(p)))
}

/// Exploratory: `‖fg‖_{B^β_{p,q}}` against `‖f‖_{B^α_{p,q}} ‖g‖_{B^β_{p,q}}`, `β < 0 < α`.
pub fn check_product_estimate(
    f: &TorusField,
    g: &TorusField,
    alpha: f64,
    beta: f64,
    p: f64,
    q: f64,
    bank: &PaleyLittlewoodBank,
) -> Result<InequalityReport> {
    if !(beta < 0.0 && alpha > 0.0) {
        return Err(Error::OutOfRange(format!("need β < 0 < α, got α = {alpha}, β = {beta}")));
    }
    let fg = f.zip_with(g, |a, b| a * b)?;
    let lhs = besov_norm(&fg, &BesovSpec::discrete(beta, p, q), bank)?;
    let a = besov_norm(f, &BesovSpec::discrete(alpha, p, q), bank)?;
    let b = besov_norm(g, &BesovSpec::discrete(beta, p, q), bank)?;
    Ok(InequalityReport::new(lhs, a * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, Profile};

    #[test]
    fn cutoffs_have_the_right_support() {
        assert_eq!(chi_tilde(0.0), 1.0);
        assert_eq!(chi_tilde(0.75), 1.0);
        assert_eq!(chi_tilde(4.0 / 3.0), 0.0);
        assert_eq!(chi(0.7), 0.0);
        assert_eq!(chi(8.0 / 3.0), 0.0);
        assert!(chi(1.5) > 0.0);
    }

    #[test]
    fn unit_frequency_lives_in_first_two_blocks() {
        let bank = build_block_bank(8).unwrap();
        let idx = 16; // ω = (1, 0)
        for k in 1..=bank.k_max() {
            assert_eq!(bank.mask(k).unwrap()[idx], 0.0);
        }
        let zero: f64 = (0..=bank.k_max()).map(|k| bank.mask(k).unwrap()[0]).sum();
        assert_eq!(zero, 0.0);
        assert_eq!(bank.mask(-1).unwrap()[0], 1.0);
    }

    #[test]
    fn constant_field_norm() {
        let bank = build_block_bank(6).unwrap();
        let f = TorusField::constant(6, -1.5);
        for (nu, p, q) in [(0.3, 2.0, 2.0), (-0.1, 1.0, f64::INFINITY), (0.5, 4.0, 1.0)] {
            let got = besov_norm(&f, &BesovSpec::discrete(nu, p, q), &bank).unwrap();
            let expect = 2f64.powf(-nu) * 1.5 * 4f64.powf(1.0 / p);
            assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        }
        let zero = TorusField::zeros(6);
        assert_eq!(besov_norm(&zero, &BesovSpec::discrete(0.2, 2.0, 2.0), &bank).unwrap(), 0.0);
    }

    #[test]
    fn constant_duality_ratio_is_one() {
        let bank = build_block_bank(4).unwrap();
        let f = TorusField::constant(4, 0.7);
        let r = check_duality(&f, &f, 0.3, 3.0, 2.0, &bank).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_block() {
        let bank = build_block_bank(4).unwrap();
        let f = TorusField::zeros(4);
        assert!(project_block(&f, -2, &bank).is_err());
        assert!(project_block(&f, bank.k_max() + 1, &bank).is_err());
    }

    #[test]
    fn regularity_bound_edge_cases() {
        let k = build_kernel(Profile::default(), 0.25, 16).unwrap();
        let bank = build_block_bank(16).unwrap();
        let c = TorusField::constant(16, 2.0);
        let r = check_regularity_bound(&c, &k, 0.2, &bank).unwrap();
        assert_eq!(kernel_gradient(&c, &k).unwrap(), 0.0);
        assert!((r.lhs / c.lp_norm(1.0) - 2f64.powf(-0.2)).abs() < 1e-12);
        let z = check_regularity_bound(&TorusField::zeros(16), &k, 0.2, &bank).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        assert!(check_regularity_bound(&c, &k, 0.5, &bank).is_err());
    }
}
