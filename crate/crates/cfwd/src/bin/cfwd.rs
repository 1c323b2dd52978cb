//! Experiment driver.
//!
//! `cfwd <simulate|sample-xi|verify> --config FILE [--seed N] [--threads K]
//! [--out DIR]`. All parameters live in the TOML config; the flags override
//! the seed and output directory. Thread count falls back to the
//! `CFWD_THREADS` environment variable. Exit codes: 0 success, 2 invalid
//! config, 3 I/O or numerical failure, 4 verification suite failure.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use cfwd::bernstein::convergence_report;
use cfwd::config::{ExperimentConfig, Mode, Suite, VerifySection, XiConfig};
use cfwd::dynamics::{simulate, SimConfig};
use cfwd::output;
use cfwd::partition::MassVector;
use cfwd::seed::stream_rng;
use cfwd::stats::StatReport;
use cfwd::step_fn::StepFunction;
use cfwd::testfn::ScalarC2;
use cfwd::verify::{
    check_ibp_bank, default_ibp_bank, run_martingale, varadhan_pair, varadhan_single,
    IbpBankConfig, MartingaleConfig, PairConfig,
};
use cfwd::xi::{stratum_ball_bound, StratumSampler, WeightedSample};
use cfwd::{Error, Result};

#[derive(Parser)]
#[command(name = "cfwd", version, about = "Coalescing-fragmentating particle system lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one particle-system trajectory and persist it.
    Simulate(CommonArgs),
    /// Draw samples from one stratum of the ball-restricted invariant measure.
    SampleXi(CommonArgs),
    /// Run a statistical verification suite.
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: CFWD_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: `out` from the config, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, expected_modes): (&CommonArgs, &[Mode]) = match &cli.cmd {
        Cmd::Simulate(a) => (a, &[Mode::Simulate]),
        Cmd::SampleXi(a) => (a, &[Mode::SampleXi]),
        Cmd::Verify(a) => (a, &[Mode::Verify, Mode::Varadhan, Mode::Bernstein]),
    };
    match run(&cli.cmd, args, expected_modes) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification suite failed");
                ExitCode::from(4)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Invalid(_) => ExitCode::from(2),
                Error::Io(_) | Error::Numerical(_) => ExitCode::from(3),
            }
        }
    }
}

fn run(cmd: &Cmd, args: &CommonArgs, expected_modes: &[Mode]) -> Result<bool> {
    let start = Instant::now();
    let config_text = std::fs::read_to_string(&args.config)?;
    let cfg = ExperimentConfig::from_str(&config_text)?;
    if !expected_modes.contains(&cfg.mode) {
        return Err(Error::config(format!(
            "config mode {:?} does not match the subcommand",
            cfg.mode
        )));
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    init_threads(args.threads)?;
    std::fs::create_dir_all(&out_dir)?;

    let (mode_name, all_pass) = match cmd {
        Cmd::Simulate(_) => {
            let section = cfg.simulate.as_ref().expect("checked by schema");
            let sim = section.to_sim_config(seed)?;
            let traj = simulate(&sim)?;
            output::write_trajectory_csv(&out_dir, &traj)?;
            output::write_partitions_csv(&out_dir, &traj)?;
            output::write_measures_jsonl(&out_dir, &traj)?;
            if section.plot {
                output::write_plot_scripts(&out_dir)?;
            }
            let last = traj.snapshots.last().expect("at least one snapshot");
            println!(
                "simulated {} particles to t={} ({} snapshots, final atoms {})",
                sim.masses.len(),
                last.time,
                traj.snapshots.len(),
                last.atom_count
            );
            ("simulate", true)
        }
        Cmd::SampleXi(_) => {
            let section = cfg.sample_xi.as_ref().expect("checked by schema");
            let driver = section.xi.build()?;
            let sampler = StratumSampler::build(&driver, section.stratum, section.radius)?;
            let mut rng = stream_rng(seed, 0);
            let mut samples: Vec<WeightedSample> = Vec::with_capacity(section.samples as usize);
            let mut proposals = 0u64;
            while (samples.len() as u64) < section.samples {
                if proposals >= section.budget.saturating_mul(section.samples) {
                    return Err(Error::numerical(format!(
                        "rejection budget exhausted: {} accepted of {} proposals",
                        samples.len(),
                        proposals
                    )));
                }
                proposals += 1;
                if let Some(g) = sampler.propose(&mut rng) {
                    samples.push(WeightedSample { g, stratum: section.stratum, weight: 1.0 });
                }
            }
            output::write_samples_jsonl(&out_dir, &samples)?;
            println!(
                "drew {} samples from stratum {} in the radius-{} ball \
                 (acceptance rate {:.3})",
                samples.len(),
                section.stratum,
                section.radius,
                samples.len() as f64 / proposals as f64
            );
            ("sample-xi", true)
        }
        Cmd::Verify(_) => {
            let section = cfg.verify.as_ref().expect("checked by schema");
            let suite = cfg.effective_suite().expect("verify modes have a suite");
            let reports = run_suite(suite, section, seed)?;
            for r in &reports {
                println!("{}", r.line());
            }
            let suite_name = suite_name(suite);
            output::write_report_json(&out_dir, suite_name, &reports)?;
            (suite_name, reports.iter().all(|r| r.pass))
        }
    };
    let manifest = output::Manifest::new(
        mode_name,
        seed,
        &config_text,
        start.elapsed().as_secs_f64(),
    );
    output::write_manifest(&out_dir, &manifest)?;
    Ok(all_pass)
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let threads = flag.or_else(|| {
        std::env::var("CFWD_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(k) = threads {
        if k == 0 {
            return Err(Error::config("thread count must be positive"));
        }
        // Ignore the error when a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}

fn suite_name(suite: Suite) -> &'static str {
    match suite {
        Suite::Ibp => "ibp",
        Suite::Martingale => "martingale",
        Suite::Varadhan => "varadhan",
        Suite::Bernstein => "bernstein",
        Suite::XiBounds => "xi-bounds",
    }
}

fn run_suite(suite: Suite, v: &VerifySection, seed: u64) -> Result<Vec<StatReport>> {
    match suite {
        Suite::Ibp => {
            let (driver, funcs, pairs) = default_ibp_bank();
            let cfg = IbpBankConfig {
                driver,
                max_stratum: v.max_stratum,
                radius: v.radius,
                proposals: v.proposals,
                seed,
                z_threshold: v.z_threshold,
            };
            check_ibp_bank(&funcs, &pairs, &cfg)
        }
        Suite::Martingale => {
            let xi = v
                .xi
                .clone()
                .unwrap_or(XiConfig::Identity { resolution: 64 })
                .build()?;
            let masses = MassVector::uniform(v.particles);
            let levels = cfwd::dynamics::levels_from_driver(
                &cfwd::step_fn::MonotoneFn::Step(xi),
                &masses,
            );
            let sim = SimConfig {
                masses,
                levels,
                dt: v.dt,
                t_final: v.t_final,
                merge_tol: 1e-9,
                seed,
                record_every: 1,
                initial_positions: vec![],
            };
            let cfg = MartingaleConfig {
                sim,
                trajectories: v.trajectories,
                observables: observable_bank(),
                directions: vec![StepFunction::constant(1.0)],
                z_threshold: v.z_threshold,
                // statistical floor plus headroom
                qv_rel_limit: 0.05f64.max(2.4 * (2.0 * v.dt / v.t_final).sqrt()),
            };
            run_martingale(&cfg)
        }
        Suite::Varadhan => {
            // the oracle check needs a wide separation for the entropy
            // correction to be subleading at t = 1e-3
            let mut reports = vec![varadhan_single(0.25, 1.25, 1e-3, 0.10)];
            let pair = varadhan_pair(&PairConfig {
                rho: v.rho,
                center: v.center,
                t_values: v.t_values.clone(),
                dt: v.dt.min(5e-4),
                paths_per_t: v.paths_per_t,
                seed,
                tol: v.tol,
            })?;
            for (t, e, se) in &pair.points {
                println!("  exponent at t={t}: {e:.4} (se {se:.1e})");
            }
            reports.push(pair.report);
            Ok(reports)
        }
        Suite::Bernstein => Ok(bernstein_suite()),
        Suite::XiBounds => {
            let driver = v
                .xi
                .clone()
                .unwrap_or(XiConfig::Identity { resolution: 24 })
                .build()?;
            let span = driver.eval(1.0) - driver.eval(0.0);
            let mut reports = Vec::new();
            for n in 1..=v.max_stratum {
                for &r in &v.radii {
                    let sampler = StratumSampler::build(&driver, n, r)?;
                    let mut rng = stream_rng(seed, n as u64);
                    let m = sampler.estimate_mass(v.proposals, &mut rng);
                    let bound = stratum_ball_bound(n, r, span);
                    reports.push(StatReport::bound(
                        format!("stratum_mass_bound[n={n},r={r}]"),
                        m.ci99.0,
                        bound,
                        m.std_error,
                        v.proposals,
                    ));
                }
            }
            Ok(reports)
        }
    }
}

fn observable_bank() -> Vec<ScalarC2> {
    vec![
        ScalarC2::Linear { a: 1.0, b: 0.0 },
        ScalarC2::Quadratic { a: 0.5 },
        ScalarC2::Sin { freq: 1.5, phase: 0.2 },
        ScalarC2::SinBump { freq: 2.0, phase: 0.0, radius: 3.0 },
    ]
}

fn bernstein_suite() -> Vec<StatReport> {
    let degrees = [8usize, 16, 32, 64];
    let bank: Vec<(&str, fn(&[f64]) -> f64, fn(&[f64], usize) -> f64)> = vec![
        ("quadratic", |x| x[0] * x[0], |x, _| 2.0 * x[0]),
        ("sin", |x| x[0].sin(), |x, _| x[0].cos()),
        ("exp", |x| (0.5 * x[0]).exp(), |x, _| 0.5 * (0.5 * x[0]).exp()),
    ];
    let mut reports = Vec::new();
    for (name, f, df) in bank {
        let rows = convergence_report(f, df, 1, 1.0, &degrees, 201);
        let monotone = rows.windows(2).all(|w| {
            w[1].sup_error < w[0].sup_error && w[1].sup_grad_error < w[0].sup_grad_error
        });
        reports.push(StatReport::bound(
            format!("bernstein_decrease[{name}]"),
            if monotone { 0.0 } else { 1.0 },
            0.5,
            0.0,
            degrees.len() as u64,
        ));
        reports.push(StatReport::bound(
            format!("bernstein_final_error[{name}]"),
            rows.last().unwrap().sup_error,
            0.05,
            0.0,
            degrees.len() as u64,
        ));
    }
    reports
}
