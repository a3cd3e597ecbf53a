//! Wavelet ridge of noisy runs and phase slips of a small ensemble.
//!
//! ```text
//! cargo run --release --example noise_signatures
//! ```

use chronotax::integrate::{ensemble_sde, integrate_sde, NoiseSpec};
use chronotax::model::{CartesianState, FrozenParams, OscillatorParams};
use chronotax::signal::{count_slips, cwt, hz, log_freqs, ridge};
use chronotax::steady_state::find_fixed_points;

fn main() -> chronotax::Result<()> {
    let freqs = log_freqs(0.005, 2.0, 32)?;
    for (eps, sigma) in [(0.47, 0.3), (0.3, 0.1)] {
        let frozen = FrozenParams::new(eps, 0.5, OscillatorParams::default())?;
        let sys = frozen.system();
        let attractor = find_fixed_points(&frozen).into_iter().find(|p| p.kind.is_stable());
        let x0 = attractor.map_or(CartesianState::new(1.0, 0.0), |a| sys.to_lab(0.0, a.location));

        let run = integrate_sde(&sys, x0, 0.0, 1000.0, 1e-2, NoiseSpec::new(sigma, 1)?)?.subsample(10);
        let s = cwt(&run.first_component(), run.t0, run.dt, &freqs, 1.0)?;
        println!(
            "eps_a = {eps}, sigma = {sigma}: median ridge {:.4} Hz (drive {:.4} Hz)",
            ridge(&s).median_frequency(),
            hz(frozen.omega_p())
        );

        if let Some(a) = attractor {
            let runs = ensemble_sde(&sys, x0, 0.0, 500.0, 1e-2, NoiseSpec::new(sigma, 42)?, 20)?;
            let counts = runs
                .iter()
                .map(|r| count_slips(&r.to_rotating(&sys.drive), a.location.psi).map(|e| e.len()))
                .collect::<chronotax::Result<Vec<_>>>()?;
            println!("  slips per 500-unit run: {counts:?}");
        }
    }
    Ok(())
}
