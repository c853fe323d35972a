use levy_rotor::analysis::{fit_power_law, theoretical_exponent};
use levy_rotor::config::log_spaced_times;
use levy_rotor::engine::*;
use levy_rotor::evolution::ResonanceParams;
use levy_rotor::levy::LevyParams;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2.0);
    let n: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(200);
    let horizon: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1_000_000);
    let cfg = EnsembleConfig {
        n_trajectories: n,
        horizon,
        sample_times: log_spaced_times(horizon, 20),
        master_seed: 7,
        resonance: ResonanceParams::new(1, 1, 1.0).unwrap(),
        levy: LevyParams::new(alpha).unwrap(),
        engine: EngineKind::ClosedFormKernel,
        kernel_model: KernelModel::Bessel,
        mid_interval_sampling: false,
    };
    let start = Instant::now();
    let series = run_ensemble(&cfg).unwrap();
    let dt = start.elapsed();
    let fit = fit_power_law(&series.times, &series.variance, 1000).unwrap();
    let theory = 2.0 * theoretical_exponent(alpha, 2.0).unwrap().c;
    println!(
        "alpha={alpha} n={n} horizon={horizon}: {:.2?}, slope={:.4} (theory {theory}), stderr={:.4}",
        dt, fit.slope, fit.slope_stderr
    );
}
