//! Periodic lattice geometry and discrete Fourier conventions.
//!
//! The microscopic lattice is `Λ_N = {1-N, …, N}^d` and its macroscopic image is
//! `Λ_ε = ε Λ_N ⊂ T^d = [-1, 1]^d` with `ε = 1/N`. A field `f` on `Λ_ε` has
//!
//! ```text
//! f̂(ω) = Σ_{x ∈ Λ_ε} ε^d f(x) e^{-iπ ω·x},        ω ∈ Λ_N
//! f(x) = 2^{-d} Σ_{ω ∈ Λ_N} f̂(ω) e^{iπ ω·x},      x ∈ Λ_ε
//! ```
//!
//! Storage: the lattice point `k ∈ Λ_N` lives at periodic index `k mod 2N` on each
//! axis, row-major with the first coordinate slowest. Spectra use the same layout
//! with `ω mod 2N`. The on-disk snapshot layout differs and is handled by the IO crate.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::numeric::compensated_sum;

/// Representative in `{1-N, …, N}` of the periodic index `m ∈ {0, …, 2N-1}`.
#[inline]
pub fn representative(m: usize, n: usize) -> i64 {
    if m <= n {
        m as i64
    } else {
        m as i64 - 2 * n as i64
    }
}

/// Periodic index of an arbitrary integer coordinate on a ring of `side` sites.
#[inline]
pub fn periodic_index(k: i64, side: usize) -> usize {
    k.rem_euclid(side as i64) as usize
}

/// Squared Euclidean length of the frequency stored at flat index `idx`.
pub fn frequency_norm_sq(idx: usize, n: usize, dim: usize) -> f64 {
    let side = 2 * n;
    match dim {
        1 => (representative(idx, n) as f64).powi(2),
        _ => {
            let w1 = representative(idx / side, n) as f64;
            let w2 = representative(idx % side, n) as f64;
            w1 * w1 + w2 * w2
        }
    }
}

/// Moves a spectrum between frequency sets `Λ_{n_from}` and `Λ_{n_to}`.
///
/// Upsampling zero-pads and splits a Nyquist coefficient evenly between `±n_from`;
/// downsampling drops frequencies outside `Λ_{n_to}` and folds `−n_to` onto `n_to`.
/// Downsampling inverts upsampling. Values are continuum-normalized, so no rescaling
/// is needed.
pub fn resample_spectrum(spec: &[Complex64], n_from: usize, n_to: usize, dim: usize) -> Vec<Complex64> {
    let from_side = 2 * n_from;
    let to_side = 2 * n_to;
    let targets = |m: usize| -> Vec<(usize, f64)> {
        let w = representative(m, n_from);
        let nf = n_from as i64;
        let nt = n_to as i64;
        if n_to >= n_from {
            if w == nf && n_to > n_from {
                vec![(periodic_index(w, to_side), 0.5), (periodic_index(-w, to_side), 0.5)]
            } else {
                vec![(periodic_index(w, to_side), 1.0)]
            }
        } else if w.abs() <= nt {
            vec![(periodic_index(w, to_side), 1.0)]
        } else {
            Vec::new()
        }
    };
    let mut out = vec![Complex64::default(); to_side.pow(dim as u32)];
    match dim {
        1 => {
            for (m, s) in spec.iter().enumerate() {
                for (t, w) in targets(m) {
                    out[t] += s * w;
                }
            }
        }
        _ => {
            let cols: Vec<Vec<(usize, f64)>> = (0..from_side).map(targets).collect();
            for m1 in 0..from_side {
                for &(a, wa) in &cols[m1] {
                    for (m2, col) in cols.iter().enumerate() {
                        let s = spec[m1 * from_side + m2];
                        for &(b, wb) in col {
                            out[a * to_side + b] += s * (wa * wb);
                        }
                    }
                }
            }
        }
    }
    out
}

/// A real field on `Λ_ε` together with a lazily computed spectrum.
#[derive(Debug)]
pub struct TorusField {
    n: usize,
    dim: usize,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Clone for TorusField {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self { n: self.n, dim: self.dim, values: self.values.clone(), spectrum }
    }
}

impl PartialEq for TorusField {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.dim == other.dim && self.values == other.values
    }
}

impl TorusField {
    /// Two-dimensional field from values in periodic storage order.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_dim(n, 2, values)
    }

    pub fn with_dim(n: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("lattice half-size N must be positive".into()));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(format!("unsupported dimension {dim}")));
        }
        let expected = (2 * n).pow(dim as u32);
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} values for N = {n}, d = {dim}, got {}",
                values.len()
            )));
        }
        Ok(Self { n, dim, values, spectrum: OnceLock::new() })
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(n, vec![c; 4 * n * n]).expect("consistent size")
    }

    /// Samples `f(x₁, x₂)` at the macroscopic lattice points.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let side = 2 * n;
        let eps = 1.0 / n as f64;
        let mut values = Vec::with_capacity(side * side);
        for i in 0..side {
            let x1 = representative(i, n) as f64 * eps;
            for j in 0..side {
                values.push(f(x1, representative(j, n) as f64 * eps));
            }
        }
        Self::new(n, values).expect("consistent size")
    }

    /// One-dimensional analogue of [`TorusField::from_fn`].
    pub fn line_from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        let eps = 1.0 / n as f64;
        let values = (0..2 * n).map(|i| f(representative(i, n) as f64 * eps)).collect();
        Self::with_dim(n, 1, values).expect("consistent size")
    }

    /// Inverse transform: `f(x) = 2^{-d} Σ_ω f̂(ω) e^{iπω·x}`, keeping the real part.
    pub fn from_spectrum(n: usize, dim: usize, spectrum: &[Complex64]) -> Result<Self> {
        let side = 2 * n;
        if spectrum.len() != side.pow(dim as u32) {
            return Err(Error::Dimension(format!(
                "spectrum of length {} does not match N = {n}, d = {dim}",
                spectrum.len()
            )));
        }
        let mut buf = spectrum.to_vec();
        fft::inverse(&mut buf, side, dim);
        let norm = 0.5_f64.powi(dim as i32);
        Self::with_dim(n, dim, buf.into_iter().map(|c| c.re * norm).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        2 * self.n
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Volume of `T^d`, i.e. `2^d`.
    pub fn area(&self) -> f64 {
        2.0_f64.powi(self.dim as i32)
    }

    fn cell_volume(&self) -> f64 {
        self.epsilon().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Mutable access; drops any cached spectrum.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.spectrum = OnceLock::new();
        &mut self.values
    }

    /// Value at the lattice point with signed microscopic coordinates `k`.
    pub fn get(&self, k: [i64; 2]) -> f64 {
        let side = self.side();
        self.values[periodic_index(k[0], side) * side + periodic_index(k[1], side)]
    }

    /// Macroscopic coordinates of the point stored at `idx` (2D).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let side = self.side();
        let eps = self.epsilon();
        [
            representative(idx / side, self.n) as f64 * eps,
            representative(idx % side, self.n) as f64 * eps,
        ]
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "N = {}, d = {} versus N = {}, d = {}",
                self.n, self.dim, other.n, other.dim
            )));
        }
        Ok(())
    }

    /// Cached spectrum `f̂(ω)` in periodic storage order.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut buf: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft::forward(&mut buf, self.side(), self.dim);
            let w = self.cell_volume();
            buf.iter_mut().for_each(|c| *c *= w);
            buf
        })
    }

    /// `f̂` as an owned array over `Λ_N`.
    pub fn fourier_forward(&self) -> Vec<Complex64> {
        self.spectrum().to_vec()
    }

    /// `f̂(ω)` for a frequency given by its signed coordinates.
    pub fn spectral_value(&self, omega: [i64; 2]) -> Complex64 {
        let side = self.side();
        self.spectrum()[periodic_index(omega[0], side) * side + periodic_index(omega[1], side)]
    }

    /// Trigonometric extension `Ext(f)(x)` to a point of the continuous torus.
    ///
    /// The Nyquist coefficient `ω_j = N` is split evenly between `±N`, so the
    /// extension of a real field is real and interpolates `f` on `Λ_ε`.
    pub fn extend_evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension must match the field");
        let n = self.n;
        let side = self.side();
        let factors: Vec<Vec<Complex64>> = x
            .iter()
            .map(|&xj| {
                (0..side)
                    .map(|m| {
                        let w = representative(m, n);
                        if w == n as i64 {
                            Complex64::new((std::f64::consts::PI * w as f64 * xj).cos(), 0.0)
                        } else {
                            Complex64::from_polar(1.0, std::f64::consts::PI * w as f64 * xj)
                        }
                    })
                    .collect()
            })
            .collect();
        let spec = self.spectrum();
        let total = match self.dim {
            1 => spec.iter().zip(&factors[0]).map(|(s, g)| (s * g).re).sum::<f64>(),
            _ => {
                let mut acc = 0.0;
                for (m1, g1) in factors[0].iter().enumerate() {
                    let row = &spec[m1 * side..(m1 + 1) * side];
                    let inner: Complex64 = row.iter().zip(&factors[1]).map(|(s, g)| s * g).sum();
                    acc += (inner * g1).re;
                }
                acc
            }
        };
        total * 0.5_f64.powi(self.dim as i32)
    }

    /// Samples `Ext(f)` on the refined lattice `Λ_{ε/r}`.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::OutOfRange("refinement factor must be at least 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let fine = resample_spectrum(self.spectrum(), self.n, self.n * factor, self.dim);
        Self::from_spectrum(self.n * factor, self.dim, &fine)
    }

    /// Discrete `L^p(Λ_ε)` norm; `p = f64::INFINITY` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "L^p norm requires p >= 1");
        if p.is_infinite() {
            return self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        let w = self.cell_volume();
        let s = compensated_sum(self.values.iter().map(|v| w * v.abs().powf(p)));
        s.powf(1.0 / p)
    }

    /// `‖f‖_p^p` without taking the root (`p` finite).
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        let w = self.cell_volume();
        compensated_sum(self.values.iter().map(|v| w * v.abs().powf(p)))
    }

    /// `⟨f, g⟩ = Σ ε^d f(x) g(x)`.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        let w = self.cell_volume();
        Ok(compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| w * a * b)))
    }

    /// `(f ∗ g)(x) = Σ_y ε^d f(x - y) g(y)`, computed as `(f ∗ g)^ = f̂ ĝ`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let prod: Vec<Complex64> =
            self.spectrum().iter().zip(other.spectrum()).map(|(a, b)| a * b).collect();
        Self::from_spectrum(self.n, self.dim, &prod)
    }

    /// Applies a real Fourier multiplier `m(idx)` indexed by periodic frequency index.
    pub fn apply_multiplier(&self, multiplier: impl Fn(usize) -> f64) -> Self {
        let spec: Vec<Complex64> =
            self.spectrum().iter().enumerate().map(|(i, s)| s * multiplier(i)).collect();
        Self::from_spectrum(self.n, self.dim, &spec).expect("consistent size")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::with_dim(self.n, self.dim, self.values.iter().map(|&v| f(v)).collect())
            .expect("consistent size")
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other)?;
        Self::with_dim(
            self.n,
            self.dim,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// `ε^d Σ_x f(x)`, the pairing with the constant function 1.
    pub fn integral(&self) -> f64 {
        let w = self.cell_volume();
        compensated_sum(self.values.iter().map(|v| w * v))
    }
}
