//! Command-line front end: configuration, orchestration, deterministic
//! seeding, machine-readable outputs.
//!
//! Exit codes: 0 success, 2 configuration/usage, 3 I/O, 4 numerical
//! (domain, capability, or broken numerical contract).

use crate::analysis::{bootstrap_slope_band, fit_power_law, theoretical_exponent, predicted_variance};
use crate::bessel::{bessel_j_sequence, build_kernel};
use crate::config::{KernelModelName, OutputFormat, RunConfig};
use crate::engine::{
    master_variance_series, run_ensemble_detailed, schedule_variance, EngineKind,
    MomentumDistribution,
};
use crate::error::{Error, Result};
use crate::levy::{LevyParams, MeasurementSchedule};
use crate::output::{
    read_series_csv, write_json_pretty, write_manifest, write_series_csv, write_series_json,
    write_svg, FitReport,
};
use crate::rng::{derive_stream_seed, UniformStream};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Stream ids reserved for non-trajectory draws; trajectory streams use
/// 0..n_trajectories, so these cannot collide.
const BOOTSTRAP_STREAM: u64 = 0xB007_57A9_0000_0000;
const SWEEP_STREAM_BASE: u64 = 0x5357_4545_5000_0000;
const MASTER_CMD_STREAM: u64 = 0x4D57_5354_0000_0000;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "levy-rotor",
    version,
    about = "Kicked-rotor ensembles under Levy-distributed measurement times"
)]
pub struct Cli {
    /// Worker threads (fallback: env LEVY_ROTOR_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Kernel,
    Wavefunction,
}

impl From<EngineArg> for EngineKind {
    fn from(value: EngineArg) -> Self {
        match value {
            EngineArg::Kernel => EngineKind::ClosedFormKernel,
            EngineArg::Wavefunction => EngineKind::FullWavefunction,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConfigOverrides {
    /// Run configuration (flat JSON; an emitted manifest is also valid).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config's output format.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Override the config's evolution engine.
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one measurement ensemble; write series, fit report and manifest.
    Simulate(ConfigOverrides),
    /// Propagate the master equation along one sampled schedule and compare
    /// with the exact summed variance.
    Master {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Number of waiting intervals to draw.
        #[arg(long, default_value_t = 1000)]
        intervals: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Closed-form exponent and predicted variance table (no RNG).
    Theory {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 10)]
        t_min: u64,
        #[arg(long, default_value_t = 1_000_000)]
        t_max: u64,
        #[arg(long, default_value_t = 26)]
        points: usize,
        /// Also write the table into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a power law to a stored variance series CSV.
    Fit {
        /// Series CSV produced by `simulate`.
        input: PathBuf,
        /// Lower fit edge; default sqrt of the last sample time.
        #[arg(long)]
        t_min: Option<u64>,
        /// Also write fit.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Bessel identity suite and report maximum deviations.
    BesselCheck {
        /// Capability bound on the Bessel order.
        #[arg(long)]
        max_order: Option<u32>,
    },
    /// Run ensembles over the config's parameter lists and tabulate fitted
    /// against theoretical exponents.
    Sweep(ConfigOverrides),
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("LEVY_ROTOR_THREADS") {
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                Error::config(format!("LEVY_ROTOR_THREADS must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::config("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Master {
            alpha,
            kappa,
            intervals,
            seed,
            out,
        } => cmd_master(alpha, kappa, intervals, seed, &out),
        Command::Theory {
            alpha,
            beta,
            kappa,
            t_min,
            t_max,
            points,
            out,
        } => cmd_theory(alpha, beta, kappa, t_min, t_max, points, out.as_deref()),
        Command::Fit { input, t_min, out } => cmd_fit(&input, t_min, out.as_deref()),
        Command::BesselCheck { max_order } => cmd_bessel_check(max_order),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn load_config(args: &ConfigOverrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(format) = args.format {
        cfg.format = format.into();
    }
    if let Some(engine) = args.engine {
        cfg.engine = engine.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(args: ConfigOverrides) -> Result<()> {
    let cfg = load_config(&args)?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;

    let ensemble = cfg.ensemble()?;
    let result = run_ensemble_detailed(&ensemble)?;

    let t_min = cfg.effective_fit_t_min();
    let fit = fit_power_law(&result.series.times, &result.series.variance, t_min)?;
    let band = bootstrap_slope_band(
        &result,
        t_min,
        cfg.bootstrap_resamples,
        derive_stream_seed(cfg.master_seed, BOOTSTRAP_STREAM),
    )?;
    let theory = theoretical_exponent(cfg.alpha, cfg.effective_beta())?;
    let report = FitReport::new(&fit, band, 2.0 * theory.c, cfg.tolerance_2c);

    match cfg.format {
        OutputFormat::Csv => write_series_csv(&out_dir.join("series.csv"), &result.series)?,
        OutputFormat::Json => write_series_json(&out_dir.join("series.json"), &result.series)?,
    }
    write_json_pretty(&out_dir.join("fit.json"), &report)?;
    write_manifest(&out_dir.join("manifest.json"), &cfg.resolved(VERSION))?;
    if cfg.emit_svg {
        write_svg(&out_dir.join("plot.svg"), &result.series, Some(&fit))?;
    }

    println!(
        "alpha={} engine={:?} n={} horizon={}: fitted 2c = {:.4} (band [{:.4}, {:.4}]), theoretical 2c = {:.4}, {}",
        cfg.alpha,
        cfg.engine,
        cfg.n_trajectories,
        cfg.horizon,
        report.slope,
        report.bootstrap_band[0],
        report.bootstrap_band[1],
        report.theoretical_2c,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(())
}

fn cmd_master(alpha: f64, kappa: f64, intervals: usize, seed: u64, out: &Path) -> Result<()> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::config(format!("kappa must be positive, got {kappa}")));
    }
    let levy = LevyParams::new(alpha).map_err(|e| Error::config(e.to_string()))?;
    let mut stream = UniformStream::from_master(seed, MASTER_CMD_STREAM);
    let schedule = MeasurementSchedule::sample_count(&levy, intervals, &mut stream)?;
    let series = master_variance_series(&MomentumDistribution::delta(0), &schedule, kappa)?;

    std::fs::create_dir_all(out)?;
    let mut csv = String::from("epoch,t,variance,exact_variance\n");
    let mut exact_sum: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for (epoch, (t, var)) in series.iter().enumerate() {
        if epoch > 0 {
            let ti = schedule.intervals()[epoch - 1] as f64;
            exact_sum += kappa * kappa / 2.0 * ti * ti;
        }
        let _ = writeln!(csv, "{epoch},{t},{var},{exact_sum}");
        if exact_sum > 0.0 {
            worst = worst.max((var - exact_sum).abs() / exact_sum);
        }
    }
    std::fs::write(out.join("master.csv"), csv)?;

    let exact = schedule_variance(&schedule, kappa);
    let final_var = series.last().map(|p| p.1).unwrap_or(0.0);
    println!(
        "{} intervals, realized time {}: master variance {final_var:.6e}, exact {exact:.6e}, worst relative deviation {worst:.3e}",
        schedule.intervals().len(),
        schedule.realized_time()
    );
    if worst > 1e-8 {
        return Err(Error::numerical(format!(
            "master propagation deviates from the exact variance by {worst:.3e} (> 1e-8)"
        )));
    }
    Ok(())
}

fn cmd_theory(
    alpha: f64,
    beta: f64,
    kappa: f64,
    t_min: u64,
    t_max: u64,
    points: usize,
    out: Option<&Path>,
) -> Result<()> {
    if t_min < 1 || t_max <= t_min || points < 2 {
        return Err(Error::config("need 1 <= t_min < t_max and at least 2 points"));
    }
    let prediction =
        theoretical_exponent(alpha, beta).map_err(|e| Error::config(e.to_string()))?;
    let levy = LevyParams::new(alpha).map_err(|e| Error::config(e.to_string()))?;

    let mut csv = String::from("t,predicted_variance\n");
    let log_lo = (t_min as f64).ln();
    let log_hi = (t_max as f64).ln();
    for i in 0..points {
        let t = (log_lo + (log_hi - log_lo) * i as f64 / (points - 1) as f64).exp();
        // The kicked-rotor kernel carries the kappa^2/2 prefactor; a general
        // beta kernel has unit single-interval variance coefficient.
        let v = if beta == 2.0 {
            predicted_variance(alpha, kappa, t)?
        } else {
            levy.censored_moment(beta, t)? / levy.censored_moment(1.0, t)? * t
        };
        let _ = writeln!(csv, "{t:.6e},{v:.6e}");
    }

    println!(
        "alpha = {alpha}, beta = {beta}: c = {}, 2c = {}, regime = {:?}",
        prediction.c,
        2.0 * prediction.c,
        prediction.regime
    );
    print!("{csv}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("theory.csv"), csv)?;
    }
    Ok(())
}

fn cmd_fit(input: &Path, t_min: Option<u64>, out: Option<&Path>) -> Result<()> {
    let series = read_series_csv(input)?;
    let t_min = t_min.unwrap_or_else(|| {
        let last = series.times.last().copied().unwrap_or(1);
        ((last as f64).sqrt().round() as u64).max(1)
    });
    let fit = fit_power_law(&series.times, &series.variance, t_min)?;
    let text = serde_json::to_string_pretty(&fit)
        .map_err(|e| Error::numerical(format!("serialization failed: {e}")))?;
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("fit.json"), text + "\n")?;
    }
    Ok(())
}

fn cmd_bessel_check(max_order: Option<u32>) -> Result<()> {
    let max_order = max_order.unwrap_or(1 << 23);
    let xs: [f64; 6] = [0.0, 0.5, 1.0, 5.0, 20.0, 50.0];
    let mut worst_sum: f64 = 0.0;
    let mut worst_m2: f64 = 0.0;

    println!("x,orders,sum_deviation,m2_rel_deviation");
    for &x in &xs {
        let n = x.ceil() as usize + 40;
        if n as u64 > max_order as u64 {
            return Err(Error::capability(format!(
                "identity suite at x = {x} needs orders up to {n}, but max_order is {max_order}"
            )));
        }
        let seq = bessel_j_sequence(x, n);
        let mut sum = seq[0] * seq[0];
        let mut m2 = 0.0;
        for k in 1..=n {
            sum += 2.0 * seq[k] * seq[k];
            m2 += 2.0 * (k * k) as f64 * seq[k] * seq[k];
        }
        let sum_dev = (sum - 1.0).abs();
        let m2_dev = if x == 0.0 {
            m2.abs() // exact zeros at x = 0
        } else {
            (m2 - x * x / 2.0).abs() / (x * x / 2.0)
        };
        worst_sum = worst_sum.max(sum_dev);
        worst_m2 = worst_m2.max(m2_dev);
        println!("{x},{n},{sum_dev:.3e},{m2_dev:.3e}");
    }

    // Kernel invariants: bit-exact symmetry and m2 monotone in T.
    let kernel = build_kernel(1.7, 23, 1e-10)?;
    let symmetric = (0..=kernel.half_width() as i64)
        .all(|l| kernel.weight(l).to_bits() == kernel.weight(-l).to_bits());
    let mut monotone = true;
    let mut prev = -1.0;
    for t in 0..=32 {
        let m2 = build_kernel(1.0, t, 1e-10)?.moments().1;
        if m2 <= prev {
            monotone = false;
        }
        prev = m2;
    }
    println!("kernel_symmetry_bit_exact,{symmetric}");
    println!("kernel_m2_monotone,{monotone}");
    println!("max_sum_deviation,{worst_sum:.3e}");
    println!("max_m2_rel_deviation,{worst_m2:.3e}");

    if worst_sum >= 1e-9 || worst_m2 >= 1e-9 || !symmetric || !monotone {
        return Err(Error::numerical(format!(
            "Bessel identity suite failed: sum dev {worst_sum:.3e}, m2 dev {worst_m2:.3e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    alpha: f64,
    kappa: f64,
    beta: f64,
    fitted_2c: f64,
    slope_stderr: f64,
    bootstrap_lo: f64,
    bootstrap_hi: f64,
    theoretical_2c: f64,
}

fn cmd_sweep(args: ConfigOverrides) -> Result<()> {
    let cfg = load_config(&args)?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;

    let alphas = if cfg.alpha_values.is_empty() {
        vec![cfg.alpha]
    } else {
        cfg.alpha_values.clone()
    };
    let kappas = if cfg.kappa_values.is_empty() {
        vec![cfg.kappa]
    } else {
        cfg.kappa_values.clone()
    };
    let betas = match cfg.kernel_model {
        KernelModelName::Synthetic if !cfg.beta_values.is_empty() => cfg.beta_values.clone(),
        _ => vec![cfg.beta],
    };

    let mut rows = Vec::new();
    let mut index = 0u64;
    for &alpha in &alphas {
        for &kappa in &kappas {
            for &beta in &betas {
                let mut point = cfg.clone();
                point.alpha = alpha;
                point.kappa = kappa;
                point.beta = beta;
                // Each sweep point gets its own derived seed so points are
                // statistically independent yet reproducible.
                point.master_seed = derive_stream_seed(cfg.master_seed, SWEEP_STREAM_BASE + index);
                index += 1;

                let ensemble = point.ensemble()?;
                let result = run_ensemble_detailed(&ensemble)?;
                let t_min = point.effective_fit_t_min();
                let fit = fit_power_law(&result.series.times, &result.series.variance, t_min)?;
                let band = bootstrap_slope_band(
                    &result,
                    t_min,
                    point.bootstrap_resamples,
                    derive_stream_seed(point.master_seed, BOOTSTRAP_STREAM),
                )?;
                let theory = theoretical_exponent(alpha, point.effective_beta())?;
                rows.push(SweepRow {
                    alpha,
                    kappa,
                    beta: point.effective_beta(),
                    fitted_2c: fit.slope,
                    slope_stderr: fit.slope_stderr,
                    bootstrap_lo: band.0,
                    bootstrap_hi: band.1,
                    theoretical_2c: 2.0 * theory.c,
                });
            }
        }
    }

    let mut csv = String::from(
        "alpha,kappa,beta,fitted_2c,slope_stderr,bootstrap_lo,bootstrap_hi,theoretical_2c\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.alpha,
            r.kappa,
            r.beta,
            r.fitted_2c,
            r.slope_stderr,
            r.bootstrap_lo,
            r.bootstrap_hi,
            r.theoretical_2c
        );
    }
    match cfg.format {
        OutputFormat::Csv => std::fs::write(out_dir.join("sweep.csv"), &csv)?,
        OutputFormat::Json => write_json_pretty(&out_dir.join("sweep.json"), &rows)?,
    }
    write_manifest(&out_dir.join("manifest.json"), &cfg.resolved(VERSION))?;

    print!("{csv}");
    Ok(())
}
