//! Linearized process `Z_γ` driven by the jumps of the Glauber chain.
//!
//! Over a window `[t₀, t₁]` the martingale increment of `X_γ` is
//! `ΔM = X(t₁) − X(t₀) − δ^{-1} κ ∗ ∫ g ds` with `g_z = −2σ_z c(z, σ)`, the
//! exact compensator of the jump part. The integral is accumulated lazily: a
//! site's integrand only changes when its spin or its local field does. At the
//! window end `Z ← e^{Δ_γ w}(Z + ΔM)`, a splitting with error `O(w)`.

use super::{flip_rate, DynamicsParams, SpinConfiguration};
use crate::error::{Error, Result};
use crate::kernel::KacKernel;
use crate::lattice::TorusField;

/// State handed to the observer at each window boundary.
#[derive(Debug, Clone, Copy)]
pub struct CosimStep<'a> {
    /// Macroscopic time elapsed since the start of the cosimulation.
    pub elapsed: f64,
    pub z: &'a TorusField,
    pub spins: &'a SpinConfiguration,
}

fn integrand(s: &SpinConfiguration, x: usize, p: &DynamicsParams) -> f64 {
    let sigma = s.spins()[x];
    -2.0 * sigma as f64 * flip_rate(sigma, s.local_field()[x], p)
}

/// Runs the chain for macroscopic time `duration` while evolving `Z_γ`.
///
/// `z0` defaults to zero. The observer sees every window boundary; the final
/// `Z_γ` is returned.
pub fn cosimulate_linearization(
    s: &mut SpinConfiguration,
    p: &DynamicsParams,
    k: &KacKernel,
    window: f64,
    duration: f64,
    z0: Option<TorusField>,
    mut observer: impl FnMut(CosimStep<'_>),
) -> Result<TorusField> {
    if !(window > 0.0) {
        return Err(Error::Config(format!("window must be positive, got {window}")));
    }
    if !(duration >= 0.0) {
        return Err(Error::Config(format!("duration must be nonnegative, got {duration}")));
    }
    if s.n() != k.n() {
        return Err(Error::Dimension(format!("chain N = {} vs kernel N = {}", s.n(), k.n())));
    }
    let n = k.n();
    let mut z = match z0 {
        Some(z) if z.n() == n && z.dim() == 2 => z,
        Some(_) => return Err(Error::Dimension("initial Z has the wrong size".into())),
        None => TorusField::zeros(n),
    };
    let len = s.len();
    let start = s.t_micro();
    let end = start + duration / p.alpha;
    let windows = (duration / window - 1e-9).ceil().max(0.0) as usize;
    let mut integral = vec![0.0; len];
    let mut stamp = vec![0.0; len];
    for w in 0..windows {
        let t0 = s.t_micro();
        let t1 = if w + 1 == windows { end } else { start + (w + 1) as f64 * window / p.alpha };
        let h0 = s.local_field().to_vec();
        integral.iter_mut().for_each(|v| *v = 0.0);
        stamp.iter_mut().for_each(|v| *v = t0);
        while s.next_ring_time() <= t1 {
            s.step_with(p, |cfg, site, t| {
                let mut flush = |x: usize| {
                    integral[x] += integrand(cfg, x, p) * (t - stamp[x]);
                    stamp[x] = t;
                };
                flush(site);
                cfg.rows().for_each(site, |x, _| flush(x));
            });
        }
        s.advance_to(t1, p, |_, _| {});
        for x in 0..len {
            integral[x] += integrand(s, x, p) * (t1 - stamp[x]);
        }
        let compensator = k.smooth(&TorusField::new(n, integral.clone())?)?;
        let increment: Vec<f64> = s
            .local_field()
            .iter()
            .zip(&h0)
            .zip(compensator.values())
            .map(|((h1, h0), c)| (h1 - h0 - c) / p.delta)
            .collect();
        let span = (t1 - t0) * p.alpha;
        let forced = z.zip_with(&TorusField::new(n, increment)?, |a, b| a + b)?;
        z = forced.apply_multiplier(|i| (k.laplacian_symbol(i) * span).exp());
        observer(CosimStep { elapsed: (t1 - start) * p.alpha, z: &z, spins: s });
    }
    Ok(z)
}
