//! Deterministic and noisy runs of the driven oscillator, printed as the
//! distance to the point attractor over time.
//!
//! ```text
//! cargo run --release --example simulate
//! ```

use chronotax::contraction::DEFAULT_BETA;
use chronotax::integrate::{integrate_det, integrate_sde, NoiseSpec};
use chronotax::model::{CartesianState, FrozenParams, OscillatorParams};
use chronotax::steady_state::contracting_attractor;

fn main() -> chronotax::Result<()> {
    let frozen = FrozenParams::new(1.2, 0.5, OscillatorParams::default())?;
    let sys = frozen.system();
    let attractor = contracting_attractor(&frozen, DEFAULT_BETA).expect("1.2 is chronotaxic at delta_omega = 0.5");

    let x0 = CartesianState::new(-1.5, 0.5);
    let det = integrate_det(&sys, x0, 0.0, 20.0, 1e-3)?;
    let noisy = integrate_sde(&sys, x0, 0.0, 20.0, 1e-3, NoiseSpec::new(0.1, 7)?)?;

    println!("{:>6} {:>14} {:>14}", "t", "det", "sigma=0.1");
    let (det_lab, noisy_lab) = (det.lab().unwrap(), noisy.lab().unwrap());
    for i in (0..det.len()).step_by(2000) {
        let t = det.time(i);
        let a = sys.to_lab(t, attractor.location);
        println!("{t:>6.1} {:>14.3e} {:>14.3e}", det_lab[i].distance(a), noisy_lab[i].distance(a));
    }
    Ok(())
}
