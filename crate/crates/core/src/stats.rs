//! Estimators with error bars, two-sample tests and small regressions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::numeric::compensated_sum;

pub fn mean(data: &[f64]) -> f64 {
    compensated_sum(data.iter().copied()) / data.len() as f64
}

/// Unbiased sample variance.
pub fn variance(data: &[f64]) -> f64 {
    let m = mean(data);
    compensated_sum(data.iter().map(|x| (x - m) * (x - m))) / (data.len() as f64 - 1.0)
}

/// Mean with the i.i.d. standard error.
pub fn mean_and_se(data: &[f64]) -> (f64, f64) {
    (mean(data), (variance(data) / data.len() as f64).sqrt())
}

/// Normalized autocorrelation `ρ(t)` for `t = 0..n`, computed by FFT.
pub fn autocorrelation(data: &[f64]) -> Vec<f64> {
    let n = data.len();
    if n == 0 {
        return Vec::new();
    }
    let m = mean(data);
    let len = 2 * n;
    let mut buf: Vec<Complex64> = data
        .iter()
        .map(|x| Complex64::new(x - m, 0.0))
        .chain(std::iter::repeat(Complex64::default()).take(len - n))
        .collect();
    fft::forward(&mut buf, len, 1);
    buf.iter_mut().for_each(|c| *c = Complex64::new(c.norm_sqr(), 0.0));
    fft::inverse(&mut buf, len, 1);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        let mut rho = vec![0.0; n];
        rho[0] = 1.0;
        return rho;
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Integrated autocorrelation time `τ = 1 + 2 Σ_{t ≤ W} ρ(t)` with Sokal's
/// self-consistent window `W ≥ 5τ`.
pub fn integrated_autocorrelation_time(data: &[f64]) -> f64 {
    let rho = autocorrelation(data);
    let mut tau = 1.0;
    for (w, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if w as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    pub stderr: f64,
    pub batch_len: usize,
    pub batches: usize,
    pub tau: f64,
}

/// Batch-means estimate with batch length `⌈10τ⌉`, capped to keep at least 20 batches.
pub fn batch_means(data: &[f64]) -> Result<BatchMeans> {
    if data.len() < 40 {
        return Err(Error::TooFewSamples { got: data.len(), need: 40 });
    }
    let tau = integrated_autocorrelation_time(data);
    let wanted = (10.0 * tau).ceil() as usize;
    let batch_len = wanted.clamp(1, data.len() / 20);
    batch_means_with(data, batch_len).map(|b| BatchMeans { tau, ..b })
}

/// Batch means with a fixed batch length; a trailing partial batch is dropped.
pub fn batch_means_with(data: &[f64], batch_len: usize) -> Result<BatchMeans> {
    let batches = if batch_len == 0 { 0 } else { data.len() / batch_len };
    if batches < 2 {
        return Err(Error::TooFewSamples { got: batches, need: 2 });
    }
    let means: Vec<f64> =
        data.chunks_exact(batch_len).take(batches).map(mean).collect();
    let (m, se) = mean_and_se(&means);
    Ok(BatchMeans { mean: m, stderr: se, batch_len, batches, tau: f64::NAN })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
    /// Asymptotic 1% critical value `1.628 √((n + m) / (nm))`.
    pub critical_01: f64,
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { got: a.len().min(b.len()), need: 1 });
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        critical_01: 1.628 * ((n + m) / (n * m)).sqrt(),
    })
}

/// `Q(λ) = 2 Σ_{k ≥ 1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub order: u32,
    pub value: f64,
    pub stderr: f64,
}

/// Raw moments `E[X^k]`, `k = 1..=4`, with i.i.d. standard errors.
pub fn moment_table(data: &[f64]) -> Vec<Moment> {
    (1..=4)
        .map(|k| {
            let powers: Vec<f64> = data.iter().map(|x| x.powi(k as i32)).collect();
            let (value, stderr) = mean_and_se(&powers);
            Moment { order: k, value, stderr }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionComparison {
    pub ks: KsResult,
    pub moments_a: Vec<Moment>,
    pub moments_b: Vec<Moment>,
}

/// KS statistic and moment tables for two samples of at least 100 values each.
pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<DistributionComparison> {
    let got = a.len().min(b.len());
    if got < 100 {
        return Err(Error::TooFewSamples { got, need: 100 });
    }
    Ok(DistributionComparison {
        ks: ks_two_sample(a, b)?,
        moments_a: moment_table(a),
        moments_b: moment_table(b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} abscissae, {} ordinates", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples { got: x.len(), need: 2 });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn identical_samples_have_zero_distance() {
        let a: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
    }

    #[test]
    fn shifted_samples_are_detected() {
        let mut rng = replica_rng(2, 0);
        let a: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..500).map(|_| rng.sample::<f64, _>(StandardNormal) + 1.0).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!(r.statistic > r.critical_01);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn too_few_samples() {
        let a = vec![0.0; 50];
        assert!(matches!(
            compare_distributions(&a, &a),
            Err(Error::TooFewSamples { got: 50, need: 100 })
        ));
    }

    #[test]
    fn regression_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_regression(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ar1_autocorrelation_time() {
        let phi: f64 = 0.8;
        let mut rng = replica_rng(3, 0);
        let mut x = 0.0;
        let data: Vec<f64> = (0..200_000)
            .map(|_| {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let tau = integrated_autocorrelation_time(&data);
        let exact = (1.0 + phi) / (1.0 - phi);
        assert!((tau - exact).abs() < 0.1 * exact, "{tau} vs {exact}");
        let bm = batch_means(&data).unwrap();
        assert!(bm.batch_len >= 80);
    }

    #[test]
    fn batch_stderr_shrinks_like_inverse_root() {
        let mut rng = replica_rng(4, 0);
        let data: Vec<f64> = (0..64_000).map(|_| rng.sample(StandardNormal)).collect();
        let short = batch_means_with(&data[..16_000], 100).unwrap().stderr;
        let long = batch_means_with(&data, 100).unwrap().stderr;
        let ratio = short / long;
        assert!(ratio > 1.5 && ratio < 2.6, "{ratio}");
    }
}
