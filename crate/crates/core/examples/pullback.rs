//! Pullback convergence: states at a fixed time reached from ever earlier
//! starts settle on the point attractor.

use chronotax::contraction::DEFAULT_BETA;
use chronotax::integrate::pullback;
use chronotax::model::{CartesianState, OscillatorParams};
use chronotax::schedule::{DriveSchedule, Interp, SampledProfile};
use chronotax::steady_state::attractor_track;

fn main() -> chronotax::Result<()> {
    let osc = OscillatorParams::default();
    let eps: Vec<f64> = (0..=40).map(|k| 2.5 + (0.3 * k as f64).cos()).collect();
    let drive = DriveSchedule::new(SampledProfile::new(-20.0, 1.0, eps, Interp::Linear)?, 0.5, 0.0)?;
    let sys = chronotax::model::DrivenPoincare::new(osc, drive.clone());

    let t_eval = 20.0;
    let starts: Vec<f64> = (1..=8).map(|k| t_eval - 4.0 * k as f64).collect();
    let ends = pullback(&sys, CartesianState::new(0.0, 1.5), &starts, t_eval, 1e-3)?;
    let track = attractor_track(&drive, &osc, t_eval, t_eval, 0.1, DEFAULT_BETA)?;
    let xa = track.states[0];
    for (t0, x) in starts.iter().zip(&ends) {
        println!("start {t0:>6.1}: |x - x_A| = {:.3e}", x.distance(xa));
    }
    Ok(())
}
