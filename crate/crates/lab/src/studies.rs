//! Multi-run studies: scaling sweeps, cross-model comparison, Wick-norm
//! surrogate, oracle time averages and calibration runs.

use ising_kac_core::glauber::{cosimulate_linearization, DynamicsParams, SpinConfiguration};
use ising_kac_core::kernel::{KacKernel, Profile};
use ising_kac_core::oracle::{enumerate_gibbs, spin};
use ising_kac_core::phi42::{run_phi42, Phi42Params, RunSchedule};
use ising_kac_core::rng::replica_rng;
use ising_kac_core::stats::{
    batch_means, compare_distributions, ks_two_sample, linear_regression, mean_and_se, BatchMeans,
    DistributionComparison, LinearFit,
};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::TestFunction;
use crate::error::{LabError, LabResult};
use crate::measure::{
    biased_spins, pair_with_test_function, spin_pairing, wick_norm, GammaSetup, LatticeChoice, WICK_TIME_EXPONENT,
};
use crate::scheduler::run_replicas;

/// Shared settings of an equilibrium Glauber sweep.
#[derive(Debug, Clone)]
pub struct EquilibriumRun {
    pub profile: Profile,
    pub a: f64,
    pub seed: u64,
    pub replicas: usize,
    pub t_burn: f64,
    pub t_sample: f64,
    pub cadence: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpRow {
    pub lattice: LatticeChoice,
    pub p: f64,
    /// `E‖X_γ‖_p^p`.
    pub mean: f64,
    pub stderr: f64,
    /// `γ^{p/2} E‖X_γ‖_p^p`.
    pub normalized: f64,
    pub normalized_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpScaling {
    pub p: f64,
    pub rows: Vec<LpRow>,
    /// max/min of the normalized values over the sweep.
    pub ratio: f64,
    pub bounded: bool,
}

/// Largest max/min ratio accepted as bounded.
pub const LP_RATIO_LIMIT: f64 = 4.0;

fn check_even(p: f64) -> LabResult<()> {
    if !(p >= 2.0 && p.fract() == 0.0 && (p as u64) % 2 == 0) {
        return Err(LabError::Param(format!("p = {p} must be an even integer ≥ 2")));
    }
    Ok(())
}

/// Equilibrium `γ^{p/2}E‖X_γ‖_p^p` for every `p` in `ps`, one chain set per `γ`.
pub fn lp_scaling_table(gammas: &[f64], ps: &[f64], run: &EquilibriumRun) -> LabResult<Vec<LpScaling>> {
    for &p in ps {
        check_even(p)?;
    }
    if gammas.is_empty() {
        return Err(LabError::Param("empty γ sweep".into()));
    }
    let samples = (run.t_sample / run.cadence).round() as usize;
    let mut per_p: Vec<Vec<LpRow>> = vec![Vec::new(); ps.len()];
    for (gi, &g) in gammas.iter().enumerate() {
        let setup = GammaSetup::new(&run.profile, g, run.a, None, 0.0)?;
        let series = run_replicas(run.threads, run.replicas, |r| {
            let p = &setup.params;
            let rng = replica_rng(run.seed, ((gi as u64) << 32) | r as u64);
            let mut s = SpinConfiguration::random(&setup.kernel, rng);
            s.advance_macro(run.t_burn, p);
            let mut out = vec![Vec::with_capacity(samples); ps.len()];
            for _ in 0..samples {
                s.advance_macro(run.cadence, p);
                let x = s.fluctuation_field(p);
                for (v, &q) in out.iter_mut().zip(ps) {
                    v.push(x.lp_norm_pow(q));
                }
            }
            Ok(out)
        })?;
        for (pi, &q) in ps.iter().enumerate() {
            let per_replica: Vec<Vec<f64>> = series.iter().map(|s| s[pi].clone()).collect();
            let (m, se, _, _) = crate::experiments::aggregate(&per_replica);
            let w = g.powf(q / 2.0);
            per_p[pi].push(LpRow {
                lattice: setup.lattice,
                p: q,
                mean: m,
                stderr: se,
                normalized: w * m,
                normalized_stderr: w * se,
            });
        }
    }
    Ok(ps
        .iter()
        .zip(per_p)
        .map(|(&p, rows)| {
            let hi = rows.iter().map(|r| r.normalized).fold(f64::NEG_INFINITY, f64::max);
            let lo = rows.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
            let ratio = hi / lo;
            LpScaling { p, rows, ratio, bounded: lo > 0.0 && ratio <= LP_RATIO_LIMIT }
        })
        .collect())
}

pub fn lp_scaling_check(gammas: &[f64], p: f64, run: &EquilibriumRun) -> LabResult<LpScaling> {
    Ok(lp_scaling_table(gammas, &[p], run)?.remove(0))
}

/// Settings of the Glauber versus Φ⁴ comparison on `⟨·, Re e_{(1,0)}⟩`.
#[derive(Debug, Clone)]
pub struct CrossModelSettings {
    pub gamma: f64,
    pub m: usize,
    pub a: f64,
    pub profile: Profile,
    /// Samples per model.
    pub samples: usize,
    pub cadence: f64,
    pub t_burn: f64,
    pub dt: f64,
    pub seed: u64,
    /// Independent Glauber chains sharing the samples.
    pub replicas: usize,
    pub threads: usize,
}

/// Moment agreement with batch-means errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub order: u32,
    pub glauber: f64,
    pub glauber_se: f64,
    pub phi42: f64,
    pub phi42_se: f64,
    /// Difference in units of the combined standard error.
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct CrossModelReport {
    pub lattice: LatticeChoice,
    pub glauber: Vec<f64>,
    pub phi42: Vec<f64>,
    pub comparison: DistributionComparison,
    pub moments: Vec<MomentCheck>,
}

impl CrossModelReport {
    pub fn table(&self) -> Vec<(String, f64)> {
        let ks = &self.comparison.ks;
        let mut t = vec![
            ("ks_statistic".to_string(), ks.statistic),
            ("ks_p_value".to_string(), ks.p_value),
            ("ks_critical_01".to_string(), ks.critical_01),
        ];
        for m in &self.moments {
            let k = m.order;
            t.push((format!("moment_{k}_glauber"), m.glauber));
            t.push((format!("moment_{k}_glauber_se"), m.glauber_se));
            t.push((format!("moment_{k}_phi42"), m.phi42));
            t.push((format!("moment_{k}_phi42_se"), m.phi42_se));
            t.push((format!("moment_{k}_z"), m.z));
        }
        t
    }
}

fn moment_estimate(data: &[f64], k: i32) -> LabResult<BatchMeans> {
    let powers: Vec<f64> = data.iter().map(|x| x.powi(k)).collect();
    Ok(batch_means(&powers)?)
}

pub fn moment_checks(a: &[f64], b: &[f64]) -> LabResult<Vec<MomentCheck>> {
    (1..=4)
        .map(|k| {
            let x = moment_estimate(a, k)?;
            let y = moment_estimate(b, k)?;
            let se = (x.stderr * x.stderr + y.stderr * y.stderr).sqrt();
            Ok(MomentCheck {
                order: k as u32,
                glauber: x.mean,
                glauber_se: x.stderr,
                phi42: y.mean,
                phi42_se: y.stderr,
                z: (x.mean - y.mean) / se,
            })
        })
        .collect()
}

/// Equilibrium samples of `⟨X_γ, Re e_{(1,0)}⟩` and of `⟨Φ, Re e_{(1,0)}⟩`.
pub fn compare_models(s: &CrossModelSettings) -> LabResult<CrossModelReport> {
    if s.samples < 100 || s.replicas == 0 {
        return Err(LabError::Param("need at least 100 samples and one replica".into()));
    }
    let phi = TestFunction::Re([1, 0]);
    let setup = GammaSetup::new(&s.profile, s.gamma, s.a, None, 0.0)?;
    let per_chain = s.samples.div_ceil(s.replicas);
    let chains = run_replicas(s.threads, s.replicas, |r| {
        let p = &setup.params;
        let mut c = SpinConfiguration::random(&setup.kernel, replica_rng(s.seed, r as u64));
        c.advance_macro(s.t_burn, p);
        let mut out = Vec::with_capacity(per_chain);
        for _ in 0..per_chain {
            c.advance_macro(s.cadence, p);
            out.push(pair_with_test_function(&c.fluctuation_field(p), &phi)?);
        }
        Ok(out)
    })?;
    let mut glauber: Vec<f64> = chains.into_iter().flatten().collect();
    glauber.truncate(s.samples);

    let mut phi42 = Vec::with_capacity(s.samples);
    let phi_m = phi.sample(s.m);
    let schedule = RunSchedule { dt: s.dt, t_burn: s.t_burn, t_sample: s.samples as f64 * s.cadence, cadence: s.cadence };
    let mut rng = replica_rng(s.seed, 1 << 40);
    run_phi42(Phi42Params::phi4(s.m, s.a), None, schedule, &mut rng, |_, state| {
        phi42.push(state.field().inner_product(&phi_m).expect("same lattice"));
    })?;
    phi42.truncate(s.samples);

    let comparison = compare_distributions(&glauber, &phi42)?;
    let moments = moment_checks(&glauber, &phi42)?;
    Ok(CrossModelReport { lattice: setup.lattice, glauber, phi42, comparison, moments })
}

/// Grid supremum of `s^{0.1}‖H_j(Z_γ(s), C_γ)‖_{C^{-0.1}}` for `s ∈ {0.1, …, 1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WickSup {
    pub lattice: LatticeChoice,
    pub c_gamma: f64,
    pub per_replica: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

/// `Z_γ` starts from zero once the chain has been run for `t_burn`.
pub fn wick_norm_sup(
    gamma: f64,
    j: usize,
    profile: &Profile,
    replicas: usize,
    seed: u64,
    t_burn: f64,
    window: f64,
    threads: usize,
) -> LabResult<WickSup> {
    let setup = GammaSetup::new(profile, gamma, 0.0, None, 0.0)?;
    let bank = setup.bank()?;
    let per_replica = run_replicas(threads, replicas, |r| {
        let p = &setup.params;
        let mut c = SpinConfiguration::random(&setup.kernel, replica_rng(seed, r as u64));
        c.advance_macro(t_burn, p);
        let mut z = None;
        let mut sup = 0.0_f64;
        for step in 1..=10 {
            let zs = cosimulate_linearization(&mut c, p, &setup.kernel, window, 0.1, z.take(), |_| {})?;
            let s = 0.1 * step as f64;
            sup = sup.max(s.powf(WICK_TIME_EXPONENT) * wick_norm(&zs, j, setup.c_gamma, &bank)?);
            z = Some(zs);
        }
        Ok(sup)
    })?;
    let (mean, stderr) = if per_replica.len() >= 2 { mean_and_se(&per_replica) } else { (per_replica[0], f64::NAN) };
    Ok(WickSup { lattice: setup.lattice, c_gamma: setup.c_gamma, per_replica, mean, stderr })
}

/// Chain average of `σ₀σ_{e₁}` sampled just before each ring, against the exact value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleAverage {
    pub estimate: BatchMeans,
    pub exact: f64,
}

impl OracleAverage {
    pub fn deviation_in_se(&self) -> f64 {
        (self.estimate.mean - self.exact).abs() / self.estimate.stderr
    }
}

/// Rings arrive as a Poisson process, so states seen just before the rings
/// are distributed as the time-stationary law.
pub fn oracle_time_average(kernel: &KacKernel, beta: f64, b: f64, rings: usize, seed: u64) -> LabResult<OracleAverage> {
    let exact_law = enumerate_gibbs(kernel, beta, b)?;
    let e1 = kernel.side();
    let exact = exact_law.exact_expectation(|c| spin(c, 0) * spin(c, e1));
    let p = DynamicsParams::with_beta(kernel, beta, b);
    let mut s = SpinConfiguration::random(kernel, replica_rng(seed, 0));
    for _ in 0..rings / 100 {
        s.step(&p);
    }
    let mut values = Vec::with_capacity(rings);
    for _ in 0..rings {
        values.push(f64::from(s.spins()[0] * s.spins()[e1]));
        s.step(&p);
    }
    Ok(OracleAverage { estimate: batch_means(&values)?, exact })
}

/// RMS of `⟨δ^{-1}σ, φ⟩ − ⟨X_γ, φ⟩` over biased random configurations, per `γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingSweep {
    pub gammas: Vec<f64>,
    pub rms: Vec<f64>,
    /// Slope of `log rms` against `log γ`.
    pub slope: f64,
    pub r2: f64,
}

pub fn pairing_sweep(gammas: &[f64], phi: &TestFunction, draws: usize, seed: u64) -> LabResult<PairingSweep> {
    let mut rms = Vec::with_capacity(gammas.len());
    for (gi, &g) in gammas.iter().enumerate() {
        let setup = GammaSetup::new(&Profile::default(), g, 0.0, None, 0.0)?;
        let mut acc = 0.0;
        for d in 0..draws {
            let mut rng = replica_rng(seed, ((gi as u64) << 32) | d as u64);
            let spins = biased_spins(&setup.kernel, &mut rng);
            let c = SpinConfiguration::from_spins(&setup.kernel, spins, rng)?;
            acc += spin_pairing(&c, &setup.params, phi)?.difference.powi(2);
        }
        rms.push((acc / draws as f64).sqrt());
    }
    let x: Vec<f64> = gammas.iter().map(|g| g.ln()).collect();
    let y: Vec<f64> = rms.iter().map(|r| r.ln()).collect();
    let LinearFit { slope, r2, .. } = linear_regression(&x, &y)?;
    Ok(PairingSweep { gammas: gammas.to_vec(), rms, slope, r2 })
}

/// Fraction of repetitions in which two independent standard normal samples of
/// size `n` stay below the asymptotic 1% KS critical value.
pub fn ks_calibration(repetitions: usize, n: usize, seed: u64) -> LabResult<f64> {
    let mut below = 0;
    for r in 0..repetitions {
        let mut rng = replica_rng(seed, r as u64);
        let a: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ks = ks_two_sample(&a, &b)?;
        if ks.statistic <= ks.critical_01 {
            below += 1;
        }
    }
    Ok(below as f64 / repetitions as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_exponent_is_rejected() {
        let run = EquilibriumRun {
            profile: Profile::default(),
            a: 0.0,
            seed: 0,
            replicas: 1,
            t_burn: 0.0,
            t_sample: 0.1,
            cadence: 0.1,
            threads: 1,
        };
        assert!(lp_scaling_check(&[0.5], 3.0, &run).is_err());
        assert!(lp_scaling_check(&[0.5], 2.5, &run).is_err());
        assert!(lp_scaling_check(&[0.5], 0.0, &run).is_err());
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = compare_distributions(&xs, &xs).unwrap();
        assert_eq!(c.ks.statistic, 0.0);
        assert!(moment_checks(&xs, &xs).unwrap().iter().all(|m| m.z.abs() < 1e-12 || m.z.is_nan()));
    }
}
