//! Configured runs: trajectories, summaries and the per-mode reports.

use std::path::{Path, PathBuf};

use ising_kac_core::besov::{
    build_block_bank, check_besov_lp_embedding, check_duality, check_lp_extension, check_product_estimate,
    check_regularity_bound, PaleyLittlewoodBank,
};
use ising_kac_core::glauber::{cosimulate_linearization, SpinConfiguration};
use ising_kac_core::kernel::{verify_kernel_bounds, Profile};
use ising_kac_core::oracle::{detailed_balance_violation, enumerate_gibbs, spin};
use ising_kac_core::phi42::{Phi42Params, Phi42State};
use ising_kac_core::rng::replica_rng;
use ising_kac_core::stats::{batch_means, linear_regression, mean, mean_and_se, LinearFit};
use ising_kac_core::TorusField;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Mode, Observable};
use crate::error::{LabError, LabResult};
use crate::measure::{
    corpus_field, corpus_kind, critical_lattice, pair_with_test_function, spin_pairing, wick_norm, GammaSetup,
    LatticeChoice,
};
use crate::records::{fmt_real, write_plot_data, CsvSink, TrajectoryRow, SUMMARY_HEADER, TRAJECTORY_HEADER};
use crate::scheduler::run_replicas;
use crate::snapshot::dump_kernel;
use crate::studies::{compare_models, CrossModelSettings};

/// Aggregated estimate of one observable at one `γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub lattice: LatticeChoice,
    pub observable: String,
    pub mean: f64,
    pub stderr: f64,
    pub tau: f64,
    pub samples: usize,
    pub replicas: usize,
}

impl SummaryRow {
    fn fields(&self) -> Vec<String> {
        let l = &self.lattice;
        vec![
            self.run_id.clone(),
            fmt_real(l.gamma),
            l.n.to_string(),
            fmt_real(l.epsilon),
            fmt_real(l.gamma_sq),
            fmt_real(l.eps_mismatch),
            self.observable.clone(),
            fmt_real(self.mean),
            fmt_real(self.stderr),
            fmt_real(self.tau),
            self.samples.to_string(),
            self.replicas.to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: Vec<SummaryRow>,
}

/// Pooled estimate from per-replica series.
///
/// With at least 40 samples per replica every series gets its own batch-means
/// error and the errors are combined; otherwise replicas are treated as
/// independent draws.
pub fn aggregate(series: &[Vec<f64>]) -> (f64, f64, f64, usize) {
    let samples: usize = series.iter().map(Vec::len).sum();
    let r = series.len();
    if samples == 0 {
        return (f64::NAN, f64::NAN, f64::NAN, 0);
    }
    if series.iter().all(|s| s.len() >= 40) {
        let bms: Vec<_> = series.iter().map(|s| batch_means(s).expect("length checked")).collect();
        let m = bms.iter().map(|b| b.mean).sum::<f64>() / r as f64;
        let se = bms.iter().map(|b| b.stderr * b.stderr).sum::<f64>().sqrt() / r as f64;
        let tau = bms.iter().map(|b| b.tau).sum::<f64>() / r as f64;
        return (m, se, tau, samples);
    }
    let means: Vec<f64> = series.iter().filter(|s| !s.is_empty()).map(|s| mean(s)).collect();
    if means.len() >= 2 {
        let (m, se) = mean_and_se(&means);
        (m, se, f64::NAN, samples)
    } else {
        (means[0], f64::NAN, f64::NAN, samples)
    }
}

fn stream(gamma_index: usize, replica: usize) -> u64 {
    ((gamma_index as u64) << 32) | replica as u64
}

fn sample_count(cfg: &ExperimentConfig) -> usize {
    (cfg.t_sample / cfg.cadence).round() as usize
}

/// One replica of the Glauber chain: values of every observable at each sampling time.
fn glauber_replica(
    cfg: &ExperimentConfig,
    setup: &GammaSetup,
    bank: Option<&PaleyLittlewoodBank>,
    gamma_index: usize,
    replica: usize,
    observables: &[Observable],
) -> LabResult<Vec<Vec<f64>>> {
    let p = &setup.params;
    let mut s = SpinConfiguration::random(&setup.kernel, replica_rng(cfg.seed, stream(gamma_index, replica)));
    s.advance_macro(cfg.t_burn, p);
    let needs_z = observables.iter().any(|o| matches!(o, Observable::Wick(_)));
    let mut z: Option<TorusField> = None;
    let mut out = vec![Vec::new(); observables.len()];
    for _ in 0..sample_count(cfg) {
        if needs_z {
            z = Some(cosimulate_linearization(&mut s, p, &setup.kernel, cfg.window, cfg.cadence, z.take(), |_| {})?);
        } else {
            s.advance_macro(cfg.cadence, p);
        }
        let x = s.fluctuation_field(p);
        for (o, series) in observables.iter().zip(out.iter_mut()) {
            series.push(match o {
                Observable::Lp(q) => x.lp_norm_pow(*q),
                Observable::Pair(phi) => pair_with_test_function(&x, phi)?,
                Observable::SpinPair(phi) => spin_pairing(&s, p, phi)?.difference,
                Observable::Magnetization => s.magnetization() as f64 / s.len() as f64,
                Observable::Wick(j) => wick_norm(
                    z.as_ref().expect("co-simulated"),
                    *j,
                    setup.c_gamma,
                    bank.expect("bank built for Wick observables"),
                )?,
            });
        }
    }
    Ok(out)
}

/// Galerkin cutoff for Φ⁴ runs: the configured `m`, else the lattice `N`.
pub fn galerkin_cutoff(cfg: &ExperimentConfig, lattice: &LatticeChoice) -> usize {
    cfg.m.unwrap_or(lattice.n)
}

fn phi42_replica(
    cfg: &ExperimentConfig,
    m: usize,
    bank: Option<&PaleyLittlewoodBank>,
    gamma_index: usize,
    replica: usize,
    observables: &[Observable],
) -> LabResult<Vec<Vec<f64>>> {
    let mut rng = replica_rng(cfg.seed, stream(gamma_index, replica));
    let mut state = Phi42State::new(Phi42Params::phi4(m, cfg.a), None)?;
    for _ in 0..(cfg.t_burn / cfg.dt).round() as usize {
        state.dpd_step(cfg.dt, &mut rng)?;
    }
    let per_sample = ((cfg.cadence / cfg.dt).round() as usize).max(1);
    let mut out = vec![Vec::new(); observables.len()];
    for _ in 0..sample_count(cfg) {
        for _ in 0..per_sample {
            state.dpd_step(cfg.dt, &mut rng)?;
        }
        let x = state.field();
        for (o, series) in observables.iter().zip(out.iter_mut()) {
            series.push(match o {
                Observable::Lp(q) => x.lp_norm_pow(*q),
                Observable::Pair(phi) => pair_with_test_function(&x, phi)?,
                Observable::Magnetization => x.integral() / x.area(),
                Observable::Wick(j) => {
                    // c_t carries no zero mode, so neither does the argument.
                    let z = state.z_field();
                    let zm = z.integral() / z.area();
                    wick_norm(&z.map(|v| v - zm), *j, state.c_t(), bank.expect("bank built"))?
                }
                Observable::SpinPair(_) => unreachable!("rejected before the run"),
            });
        }
    }
    Ok(out)
}

fn write_info(out: &Path, cfg: &ExperimentConfig, extra: serde_json::Value) -> LabResult<()> {
    let info = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "mode": cfg.mode.id(),
        "config": cfg,
        "details": extra,
    });
    std::fs::write(out.join("run_info.json"), serde_json::to_string_pretty(&info)? + "\n")?;
    Ok(())
}

/// Runs the configured experiment and writes its outputs into `out`.
///
/// Output depends only on the configuration: replicas are scheduled on
/// `cfg.threads` workers but written in replica order.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    match cfg.mode {
        Mode::Glauber | Mode::Phi42 => run_trajectories(cfg, out),
        Mode::Oracle => run_oracle(cfg, out),
        Mode::Compare => run_compare(cfg, out),
        Mode::KernelScan => run_kernel_scan(cfg, out),
        Mode::BesovCorpus => run_besov_corpus(cfg, out),
    }
}

fn run_trajectories(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunSummary> {
    let observables = cfg.parsed_observables()?;
    let glauber = cfg.mode == Mode::Glauber;
    if !glauber && observables.iter().any(|o| matches!(o, Observable::SpinPair(_))) {
        return Err(LabError::Schema { key: "observables".into(), reason: "spin pairings need the Glauber chain".into() });
    }
    if !glauber && cfg.gammas.is_empty() && cfg.m.is_none() {
        return Err(LabError::Schema { key: "m".into(), reason: "set m or at least one γ".into() });
    }
    let mut traj = CsvSink::create(&out.join("trajectory.csv"), &TRAJECTORY_HEADER)?;
    let mut summary = CsvSink::create(&out.join("summary.csv"), &SUMMARY_HEADER)?;
    let profile = Profile::from_id(&cfg.profile)?;
    let needs_bank = observables.iter().any(|o| matches!(o, Observable::Wick(_)));
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut plots: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); observables.len()];

    // Φ⁴ without γ: a single run at the requested cutoff.
    let gammas: Vec<Option<f64>> =
        if cfg.gammas.is_empty() { vec![None] } else { cfg.gammas.iter().map(|&g| Some(g)).collect() };

    for (gi, gamma) in gammas.iter().enumerate() {
        let (lattice, series) = if glauber {
            let setup = GammaSetup::new(&profile, gamma.expect("checked"), cfg.a, cfg.beta, cfg.b)?;
            let bank = if needs_bank { Some(setup.bank()?) } else { None };
            details.push(json!({
                "lattice": setup.lattice,
                "beta": setup.params.beta,
                "c_gamma": setup.c_gamma,
                "profile": profile.id(),
            }));
            let series = run_replicas(cfg.threads, cfg.replicas, |r| {
                glauber_replica(cfg, &setup, bank.as_ref(), gi, r, &observables)
            })?;
            (setup.lattice, series)
        } else {
            let lattice = match gamma {
                Some(g) => critical_lattice(*g)?,
                None => {
                    let m = cfg.m.expect("checked");
                    LatticeChoice { gamma: f64::NAN, n: m, epsilon: 1.0 / m as f64, gamma_sq: f64::NAN, eps_mismatch: f64::NAN }
                }
            };
            let m = galerkin_cutoff(cfg, &lattice);
            let bank = if needs_bank { Some(build_block_bank(m)?) } else { None };
            details.push(json!({ "lattice": lattice, "m": m, "dt": cfg.dt }));
            let series = run_replicas(cfg.threads, cfg.replicas, |r| {
                phi42_replica(cfg, m, bank.as_ref(), gi, r, &observables)
            })?;
            (lattice, series)
        };
        for (r, per_obs) in series.iter().enumerate() {
            for k in 0..sample_count(cfg) {
                for (o, values) in observables.iter().zip(per_obs) {
                    let row = TrajectoryRow {
                        replica: r as u64,
                        t_macro: (k + 1) as f64 * cfg.cadence,
                        name: o.to_string(),
                        value: values[k],
                    };
                    traj.write_row(row.fields())?;
                }
            }
        }
        for (oi, o) in observables.iter().enumerate() {
            let per_replica: Vec<Vec<f64>> = series.iter().map(|s| s[oi].clone()).collect();
            let (m, se, tau, samples) = aggregate(&per_replica);
            let row = SummaryRow {
                run_id: cfg.mode.id().to_string(),
                lattice,
                observable: o.to_string(),
                mean: m,
                stderr: se,
                tau,
                samples,
                replicas: cfg.replicas,
            };
            summary.write_row(row.fields())?;
            plots[oi].push((gamma.unwrap_or(f64::NAN), m, se));
            rows.push(row);
        }
    }
    for (oi, points) in plots.iter().enumerate() {
        write_plot_data(&out.join(format!("plot_{oi}.csv")), points)?;
    }
    write_info(out, cfg, json!({ "gammas": details }))?;
    Ok(RunSummary { out_dir: out.to_path_buf(), rows })
}

/// Exact quantities for the configured small torus.
fn run_oracle(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunSummary> {
    let profile = Profile::from_id(&cfg.profile)?;
    let gamma = cfg.gammas.first().copied().unwrap_or(0.5);
    let kernel = ising_kac_core::kernel::build_periodized_kernel(profile, gamma, cfg.oracle_n)?;
    let beta = match cfg.beta {
        Some(b) => b,
        None => ising_kac_core::glauber::DynamicsParams::critical(&kernel, cfg.a)?.beta,
    };
    let g = enumerate_gibbs(&kernel, beta, cfg.b)?;
    let p = ising_kac_core::glauber::DynamicsParams::with_beta(&kernel, beta, cfg.b);
    let e1 = kernel.side();
    let entries = [
        ("log_partition", g.log_partition()),
        ("magnetization:0", g.magnetization(0)),
        ("correlation:0,e1", g.exact_expectation(|c| spin(c, 0) * spin(c, e1))),
        ("covariance:0,e1", g.covariance(0, e1)?),
        ("invariance_violation", g.check_invariance(&p, 8, cfg.seed)?),
        ("detailed_balance_violation", detailed_balance_violation(&kernel, &p)?),
    ];
    let mut sink = CsvSink::create(&out.join("oracle.csv"), &["N", "beta", "b", "observable", "exact_value"])?;
    for (name, v) in entries {
        sink.write_row([cfg.oracle_n.to_string(), fmt_real(beta), fmt_real(cfg.b), name.to_string(), fmt_real(v)])?;
    }
    write_info(out, cfg, json!({ "gamma": gamma, "beta": beta, "sites": g.sites() }))?;
    Ok(RunSummary { out_dir: out.to_path_buf(), rows: Vec::new() })
}

fn run_compare(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunSummary> {
    let gamma = *cfg.gammas.first().expect("validated");
    let settings = CrossModelSettings {
        gamma,
        m: cfg.m.unwrap_or(critical_lattice(gamma)?.n),
        a: cfg.a,
        profile: Profile::from_id(&cfg.profile)?,
        samples: sample_count(cfg),
        cadence: cfg.cadence,
        t_burn: cfg.t_burn,
        dt: cfg.dt,
        seed: cfg.seed,
        replicas: cfg.replicas,
        threads: cfg.threads,
    };
    let report = compare_models(&settings)?;
    let mut sink = CsvSink::create(&out.join("compare.csv"), &["quantity", "value"])?;
    for (k, v) in report.table() {
        sink.write_row([k, fmt_real(v)])?;
    }
    let mut samples = CsvSink::create(&out.join("compare_samples.csv"), &["model", "index", "value"])?;
    for (model, xs) in [("glauber", &report.glauber), ("phi42", &report.phi42)] {
        for (i, v) in xs.iter().enumerate() {
            samples.write_row([model.to_string(), i.to_string(), fmt_real(*v)])?;
        }
    }
    write_info(out, cfg, json!({ "lattice": report.lattice, "m": settings.m, "test_function": "re:1,0" }))?;
    Ok(RunSummary { out_dir: out.to_path_buf(), rows: Vec::new() })
}

/// Kernel constants across the configured `γ` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelScanRow {
    pub lattice: LatticeChoice,
    pub c_gamma: f64,
    pub upper: f64,
    pub lower: f64,
    pub sup_abs: f64,
    pub anisotropy: f64,
    pub passed: bool,
}

pub fn kernel_scan(profile: &Profile, gammas: &[f64]) -> LabResult<Vec<KernelScanRow>> {
    gammas
        .iter()
        .map(|&g| {
            let s = GammaSetup::new(profile, g, 0.0, None, 0.0)?;
            let b = verify_kernel_bounds(&s.kernel);
            Ok(KernelScanRow {
                lattice: s.lattice,
                c_gamma: s.c_gamma,
                upper: b.upper,
                lower: b.lower,
                sup_abs: b.sup_abs,
                anisotropy: b.anisotropy,
                passed: b.passed,
            })
        })
        .collect()
}

/// Least-squares fit of `C_γ` against `log(1/γ)`.
pub fn log_divergence_fit(rows: &[KernelScanRow]) -> LabResult<LinearFit> {
    let x: Vec<f64> = rows.iter().map(|r| (1.0 / r.lattice.gamma).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.c_gamma).collect();
    Ok(linear_regression(&x, &y)?)
}

fn run_kernel_scan(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunSummary> {
    let profile = Profile::from_id(&cfg.profile)?;
    let rows = kernel_scan(&profile, &cfg.gammas)?;
    let mut sink = CsvSink::create(
        &out.join("kernel_scan.csv"),
        &["profile", "gamma", "n", "epsilon", "eps_mismatch", "c_gamma", "upper", "lower", "sup_abs", "anisotropy", "passed"],
    )?;
    for r in &rows {
        let l = &r.lattice;
        sink.write_row([
            profile.id(),
            fmt_real(l.gamma),
            l.n.to_string(),
            fmt_real(l.epsilon),
            fmt_real(l.eps_mismatch),
            fmt_real(r.c_gamma),
            fmt_real(r.upper),
            fmt_real(r.lower),
            fmt_real(r.sup_abs),
            fmt_real(r.anisotropy),
            r.passed.to_string(),
        ])?;
        let k = GammaSetup::new(&profile, l.gamma, 0.0, None, 0.0)?.kernel;
        dump_kernel(out, &format!("kernel_{}", l.n), &k)?;
    }
    let fit = if rows.len() >= 2 { Some(log_divergence_fit(&rows)?) } else { None };
    write_plot_data(
        &out.join("plot_c_gamma.csv"),
        &rows.iter().map(|r| ((1.0 / r.lattice.gamma).ln(), r.c_gamma, 0.0)).collect::<Vec<_>>(),
    )?;
    write_info(
        out,
        cfg,
        json!({ "fit": fit.map(|f| json!({ "slope": f.slope, "intercept": f.intercept, "r2": f.r2 })) }),
    )?;
    Ok(RunSummary { out_dir: out.to_path_buf(), rows: Vec::new() })
}

/// Inequality ratios on the field corpus at one lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusRow {
    pub seed: u64,
    pub kind: &'static str,
    pub duality: f64,
    pub embedding: f64,
    pub regularity: f64,
    pub lp_extension: f64,
    pub product: f64,
}

pub fn besov_corpus(gamma: f64, nu: f64, count: usize, profile: &Profile) -> LabResult<(LatticeChoice, Vec<CorpusRow>)> {
    let setup = GammaSetup::new(profile, gamma, 0.0, None, 0.0)?;
    let n = setup.lattice.n;
    let bank = setup.bank()?;
    let rows = (0..count as u64)
        .map(|seed| {
            let f = corpus_field(n, seed);
            let g = corpus_field(n, seed + 1000);
            let smooth = corpus_field(n, 3 * seed);
            Ok(CorpusRow {
                seed,
                kind: corpus_kind(seed),
                duality: check_duality(&f, &g, 0.3, 3.0, 2.0, &bank)?.ratio,
                embedding: check_besov_lp_embedding(&f, 0.2, 20.0, &bank)?.ratio,
                regularity: check_regularity_bound(&f, &setup.kernel, nu, &bank)?.ratio,
                lp_extension: check_lp_extension(&f, 4.0, 0.1, 4)?.ratio,
                product: check_product_estimate(&smooth, &f, 0.6, -0.2, 2.0, 2.0, &bank)?.ratio,
            })
        })
        .collect::<LabResult<Vec<_>>>()?;
    Ok((setup.lattice, rows))
}

fn run_besov_corpus(cfg: &ExperimentConfig, out: &Path) -> LabResult<RunSummary> {
    let profile = Profile::from_id(&cfg.profile)?;
    let mut sink = CsvSink::create(
        &out.join("besov_corpus.csv"),
        &["gamma", "n", "seed", "kind", "duality", "embedding", "regularity", "lp_extension", "product"],
    )?;
    let mut lattices = Vec::new();
    for &g in &cfg.gammas {
        let (lattice, rows) = besov_corpus(g, cfg.nu, cfg.corpus_size, &profile)?;
        for r in rows {
            sink.write_row([
                fmt_real(g),
                lattice.n.to_string(),
                r.seed.to_string(),
                r.kind.to_string(),
                fmt_real(r.duality),
                fmt_real(r.embedding),
                fmt_real(r.regularity),
                fmt_real(r.lp_extension),
                fmt_real(r.product),
            ])?;
        }
        lattices.push(lattice);
    }
    write_info(out, cfg, json!({ "lattices": lattices, "product_estimate": "exploratory" }))?;
    Ok(RunSummary { out_dir: out.to_path_buf(), rows: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mode: Mode, observables: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            gammas: vec![0.5],
            replicas: 2,
            t_burn: 0.1,
            t_sample: 0.5,
            cadence: 0.1,
            observables: observables.iter().map(|s| s.to_string()).collect(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn aggregate_falls_back_to_replica_means() {
        let (m, se, _, n) = aggregate(&[vec![1.0, 3.0], vec![5.0]]);
        assert_eq!((m, n), (3.5, 3));
        assert!((se - 1.5).abs() < 1e-12);
        let (m, se, _, _) = aggregate(&[vec![2.0; 3]]);
        assert_eq!(m, 2.0);
        assert!(se.is_nan());
        assert!(aggregate(&[]).0.is_nan());
    }

    #[test]
    fn empty_observables_give_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&quick(Mode::Glauber, &[]), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert_eq!(text, "replica_id,t_macro,observable_name,value\n");
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1);
    }

    #[test]
    fn phi42_mode_rejects_spin_pairings() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(Mode::Phi42, &["spin-pair:const"]);
        assert!(matches!(run_experiment(&cfg, dir.path()), Err(LabError::Schema { .. })));
    }

    #[test]
    fn trajectory_times_increase_within_replicas() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(Mode::Phi42, &["lp:2", "wick:2"]);
        let s = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(s.rows.len(), 2);
        let mut rdr = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
        let mut last = (u64::MAX, f64::NEG_INFINITY);
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let r: u64 = rec[0].parse().unwrap();
            let t: f64 = rec[1].parse().unwrap();
            if r == last.0 {
                assert!(t >= last.1);
            }
            last = (r, t);
        }
    }
}
