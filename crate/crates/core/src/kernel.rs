//! Kac interaction kernel `κ_γ`, its spectrum and the renormalization constant `C_γ`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{frequency_norm_sq, periodic_index, representative, TorusField};
use crate::numeric::compensated_sum;

/// Radius of the support of every profile.
pub const SUPPORT_RADIUS: f64 = 3.0;

/// Radial shape function `𝔎(r)`, supported on `r ≤ 3`.
#[derive(Clone)]
pub enum Profile {
    /// `(u² + ⅔u³)(1 − u)³` with `u = r²/9`.
    ///
    /// Its continuum second moment `∫|x|²𝔎 / ∫𝔎` equals 4, so the rescaled
    /// operator `ε^{-2}γ²(K_γ ∗ f − f)` converges to the torus Laplacian.
    UnitDiffusion,
    /// `(1 − (r/3)²)³`. Second moment 9/5.
    Bump,
    /// Indicator of the closed ball. Not C²; kept as a synthetic test profile.
    Flat,
    /// User supplied profile; validated on construction of a kernel.
    Custom { id: String, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl Default for Profile {
    fn default() -> Self {
        Profile::UnitDiffusion
    }
}

impl Profile {
    pub fn custom(id: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Custom { id: id.into(), f: Arc::new(f) }
    }

    /// Parses the identifiers produced by [`Profile::id`] for the built-in shapes.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "unit-diffusion" => Ok(Profile::UnitDiffusion),
            "bump" => Ok(Profile::Bump),
            "flat" => Ok(Profile::Flat),
            other => Err(Error::Profile(format!("unknown profile id `{other}`"))),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Profile::UnitDiffusion => "unit-diffusion".into(),
            Profile::Bump => "bump".into(),
            Profile::Flat => "flat".into(),
            Profile::Custom { id, .. } => format!("custom:{id}"),
        }
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        if !(0.0..=SUPPORT_RADIUS).contains(&r) {
            return 0.0;
        }
        match self {
            Profile::UnitDiffusion => {
                let u = r * r / 9.0;
                (u * u + 2.0 / 3.0 * u * u * u) * (1.0 - u).powi(3)
            }
            Profile::Bump => (1.0 - r * r / 9.0).powi(3),
            Profile::Flat => 1.0,
            Profile::Custom { f, .. } => f(r),
        }
    }

    /// Checks nonnegativity and C² regularity of the radial extension by zero.
    ///
    /// Regularity is probed with finite differences at the origin (the radial
    /// function must be flat there) and at the support edge (value, slope and
    /// curvature must vanish).
    pub fn validate(&self) -> Result<()> {
        if matches!(self, Profile::Flat) {
            return Ok(());
        }
        let samples = 3000;
        let mut peak = 0.0_f64;
        for i in 0..=samples {
            let r = SUPPORT_RADIUS * i as f64 / samples as f64;
            let v = self.evaluate(r);
            if !v.is_finite() {
                return Err(Error::Profile(format!("non-finite value at r = {r}")));
            }
            if v < -1e-14 {
                return Err(Error::Profile(format!("negative value {v} at r = {r}")));
            }
            peak = peak.max(v);
        }
        if peak <= 0.0 {
            return Err(Error::Profile("profile vanishes identically".into()));
        }
        let h = 1e-3;
        let edge = SUPPORT_RADIUS;
        let f0 = self.evaluate(edge);
        let f1 = self.evaluate(edge - h);
        let f2 = self.evaluate(edge - 2.0 * h);
        let slope = (f0 - f1) / h;
        let curvature = (f0 - 2.0 * f1 + f2) / (h * h);
        let tol = 1e-6 * peak;
        if f0.abs() > tol {
            return Err(Error::Profile(format!("value {f0} at the support edge")));
        }
        if slope.abs() > 1e-2 * peak {
            return Err(Error::Profile(format!("slope {slope} at the support edge")));
        }
        if curvature.abs() > 1e-1 * peak {
            return Err(Error::Profile(format!("curvature {curvature} at the support edge")));
        }
        let origin_slope = (self.evaluate(h) - self.evaluate(0.0)) / h;
        if origin_slope.abs() > 1e-2 * peak {
            return Err(Error::Profile(format!("cusp at the origin (slope {origin_slope})")));
        }
        Ok(())
    }
}

/// Sampled kernel together with its spectrum and `C_γ`.
#[derive(Debug, Clone)]
pub struct KacKernel {
    gamma: f64,
    n: usize,
    profile: Profile,
    kappa: Vec<f64>,
    spectrum: Vec<f64>,
    c_gamma: Option<f64>,
}

/// Strict construction: requires `3/γ < N` so the support never wraps.
pub fn build_kernel(profile: Profile, gamma: f64, n: usize) -> Result<KacKernel> {
    check_gamma(gamma, n)?;
    if SUPPORT_RADIUS / gamma >= n as f64 {
        return Err(Error::Config(format!(
            "kernel support radius 3/γ = {} does not fit in N = {n}",
            SUPPORT_RADIUS / gamma
        )));
    }
    assemble(profile, gamma, n)
}

/// Construction on any torus: contributions of all periodic images are summed.
///
/// Coincides with [`build_kernel`] whenever `3/γ < N`. Images of the origin are
/// excluded, so `κ(0) = 0` still holds.
pub fn build_periodized_kernel(profile: Profile, gamma: f64, n: usize) -> Result<KacKernel> {
    check_gamma(gamma, n)?;
    assemble(profile, gamma, n)
}

fn check_gamma(gamma: f64, n: usize) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::OutOfRange(format!("γ = {gamma} is not in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::Config("lattice half-size N must be positive".into()));
    }
    Ok(())
}

fn assemble(profile: Profile, gamma: f64, n: usize) -> Result<KacKernel> {
    profile.validate()?;
    let side = 2 * n;
    let reach = (SUPPORT_RADIUS / gamma).floor() as i64;
    let mut raw = vec![0.0; side * side];
    for z1 in -reach..=reach {
        let i = periodic_index(z1, side);
        for z2 in -reach..=reach {
            let j = periodic_index(z2, side);
            if i == 0 && j == 0 {
                continue;
            }
            let r = gamma * ((z1 * z1 + z2 * z2) as f64).sqrt();
            if r <= SUPPORT_RADIUS {
                raw[i * side + j] += profile.evaluate(r);
            }
        }
    }
    let total = compensated_sum(raw.iter().copied());
    if total <= 0.0 {
        return Err(Error::Config(format!(
            "kernel with γ = {gamma} has no mass on the lattice N = {n}"
        )));
    }
    let mut kappa: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // One more pass removes the rounding left by the division.
    let residual = compensated_sum(kappa.iter().copied());
    kappa.iter_mut().for_each(|v| *v /= residual);
    KacKernel::assemble_from(gamma, n, profile, kappa)
}

impl KacKernel {
    /// Kernel from explicit microscopic weights in periodic storage order.
    ///
    /// Weights must be nonnegative, symmetric under `z ↦ −z`, vanish at the
    /// origin and sum to one.
    pub fn from_weights(gamma: f64, n: usize, kappa: Vec<f64>) -> Result<Self> {
        check_gamma(gamma, n)?;
        let side = 2 * n;
        if kappa.len() != side * side {
            return Err(Error::Dimension(format!(
                "expected {} kernel weights, got {}",
                side * side,
                kappa.len()
            )));
        }
        if kappa[0] != 0.0 {
            return Err(Error::Profile("κ(0) must vanish".into()));
        }
        if kappa.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Profile("kernel weights must be finite and nonnegative".into()));
        }
        for i in 0..side {
            for j in 0..side {
                let mirror = ((side - i) % side) * side + (side - j) % side;
                if (kappa[i * side + j] - kappa[mirror]).abs() > 1e-15 {
                    return Err(Error::Profile("kernel is not symmetric".into()));
                }
            }
        }
        let total = compensated_sum(kappa.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Profile(format!("kernel mass {total} differs from 1")));
        }
        Self::assemble_from(gamma, n, Profile::custom("weights", |_| 0.0), kappa)
    }

    fn assemble_from(gamma: f64, n: usize, profile: Profile, kappa: Vec<f64>) -> Result<Self> {
        let micro = TorusField::new(n, kappa.clone())?;
        let scale = (n * n) as f64;
        // K̂(ω) = Σ_z κ(z) e^{-iπω·z/N}; the ε² weight of the forward transform
        // cancels against the ε^{-2} of the macroscopic kernel.
        let spectrum = micro.spectrum().iter().map(|c| c.re * scale).collect();
        let mut k = Self { gamma, n, profile, kappa, spectrum, c_gamma: None };
        k.c_gamma = renorm_constant_from_spectrum(&k.spectrum, n, gamma).ok();
        Ok(k)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        2 * self.n
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Microscopic weights `κ_γ(z)` in periodic storage order.
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn kappa_at(&self, z: [i64; 2]) -> f64 {
        let side = self.side();
        self.kappa[periodic_index(z[0], side) * side + periodic_index(z[1], side)]
    }

    /// Real spectrum `K̂_γ(ω)` in periodic storage order.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Macroscopic kernel `K_γ(x) = ε^{-2} κ_γ(ε^{-1}x)`.
    pub fn macroscopic(&self) -> TorusField {
        let scale = (self.n * self.n) as f64;
        TorusField::new(self.n, self.kappa.iter().map(|v| v * scale).collect())
            .expect("consistent size")
    }

    /// Nonzero weights with their minimal-representative offsets.
    pub fn support(&self) -> Vec<([i64; 2], f64)> {
        let side = self.side();
        self.kappa
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(idx, &v)| {
                ([representative(idx / side, self.n), representative(idx % side, self.n)], v)
            })
            .collect()
    }

    /// `K_γ ∗ f`, i.e. `Σ_z κ_γ(x − z) f(z)` on lattice points.
    pub fn smooth(&self, f: &TorusField) -> Result<TorusField> {
        if f.n() != self.n || f.dim() != 2 {
            return Err(Error::Dimension(format!(
                "kernel on N = {} applied to a field on N = {}",
                self.n,
                f.n()
            )));
        }
        Ok(f.apply_multiplier(|i| self.spectrum[i]))
    }

    /// Symbol of `Δ_γ f = ε^{-2}γ²(K_γ ∗ f − f)`.
    pub fn laplacian_symbol(&self, idx: usize) -> f64 {
        let n2 = (self.n * self.n) as f64;
        n2 * self.gamma * self.gamma * (self.spectrum[idx] - 1.0)
    }

    /// `C_γ`, computed from the spectrum.
    pub fn renorm_constant(&self) -> Result<f64> {
        match self.c_gamma {
            Some(c) => Ok(c),
            None => renorm_constant_from_spectrum(&self.spectrum, self.n, self.gamma),
        }
    }
}

/// `C_γ = ¼ Σ_{ω≠0} K̂(ω)² / (ε^{-2}γ²(1 − K̂(ω)))` for an arbitrary real spectrum.
pub fn renorm_constant_from_spectrum(spectrum: &[f64], n: usize, gamma: f64) -> Result<f64> {
    let side = 2 * n;
    if spectrum.len() != side * side {
        return Err(Error::Dimension(format!(
            "spectrum of length {} does not match N = {n}",
            spectrum.len()
        )));
    }
    let prefactor = (n * n) as f64 * gamma * gamma;
    let mut terms = Vec::with_capacity(spectrum.len());
    for (idx, &k) in spectrum.iter().enumerate().skip(1) {
        let gap = 1.0 - k;
        if gap.abs() < 1e-14 {
            return Err(Error::DegenerateKernel([
                representative(idx / side, n),
                representative(idx % side, n),
            ]));
        }
        terms.push(k * k / (prefactor * gap));
    }
    Ok(0.25 * compensated_sum(terms))
}

/// Fitted constants of the two-sided spectral estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBounds {
    /// Smallest `C` with `|K̂(ω)| ≤ 1 ∧ Cγ^{-2}|ω|^{-2}`.
    pub upper: f64,
    /// Largest `c` with `1 − K̂(ω) ≥ c (|γω|² ∧ 1)` for `ω ≠ 0`.
    pub lower: f64,
    /// Largest `|K̂(ω)|` over all frequencies.
    pub sup_abs: f64,
    /// Max deviation of `K̂` from its radial interpolant over `|ω| ≤ γ^{-1}`; recorded only.
    pub anisotropy: f64,
    pub passed: bool,
}

pub fn verify_kernel_bounds(k: &KacKernel) -> KernelBounds {
    let n = k.n;
    let side = k.side();
    let g2 = k.gamma * k.gamma;
    let mut upper = 0.0_f64;
    let mut lower = f64::INFINITY;
    let mut sup_abs = 0.0_f64;
    for (idx, &v) in k.spectrum.iter().enumerate() {
        sup_abs = sup_abs.max(v.abs());
        if idx == 0 {
            continue;
        }
        let w2 = frequency_norm_sq(idx, n, 2);
        upper = upper.max(v.abs() * g2 * w2);
        lower = lower.min((1.0 - v) / (g2 * w2).min(1.0));
    }
    // Radial interpolant from the axis values K̂(m, 0).
    let axis: Vec<f64> = (0..=n).map(|m| k.spectrum[m * side]).collect();
    let radius = (1.0 / k.gamma).min(n as f64);
    let mut anisotropy = 0.0_f64;
    for idx in 0..k.spectrum.len() {
        let r = frequency_norm_sq(idx, n, 2).sqrt();
        if r > radius || r >= n as f64 {
            continue;
        }
        let m = r.floor() as usize;
        let t = r - m as f64;
        let interp = axis[m] * (1.0 - t) + axis[(m + 1).min(n)] * t;
        anisotropy = anisotropy.max((k.spectrum[idx] - interp).abs());
    }
    let passed = lower > 0.0 && upper.is_finite() && sup_abs <= 1.0 + 1e-12;
    KernelBounds { upper, lower, sup_abs, anisotropy, passed }
}
