//! Verifies a frozen drive and a slowly modulated one, then a modulation that
//! dips out of the chronotaxic region.

use chronotax::model::OscillatorParams;
use chronotax::schedule::{DriveSchedule, Interp, SampledProfile};
use chronotax::verify::{verify_schedule, VerifyConfig};

fn main() -> chronotax::Result<()> {
    let osc = OscillatorParams::default();
    let omega_p = osc.omega0 - 0.5;
    let cfg = VerifyConfig { t1: 60.0, ..VerifyConfig::default() };

    let frozen = DriveSchedule::constant(1.7, omega_p)?;
    let wave: Vec<f64> = (0..=60).map(|k| 3.0 + 1.2 * (0.2 * k as f64).sin()).collect();
    let modulated = DriveSchedule::new(SampledProfile::new(0.0, 1.0, wave.clone(), Interp::Linear)?, omega_p, 0.0)?;
    let dipped: Vec<f64> =
        wave.iter().enumerate().map(|(k, &v)| if (20..=40).contains(&k) { 0.3 } else { v }).collect();
    let dipping = DriveSchedule::new(SampledProfile::new(0.0, 1.0, dipped, Interp::Linear)?, omega_p, 0.0)?;

    for (name, d) in [("frozen 1.7", frozen), ("modulated", modulated), ("dip to 0.3", dipping)] {
        let r = verify_schedule(&d, &osc, &cfg)?;
        println!("{name}: chronotaxic = {}", r.chronotaxic);
        if let (Some(f), Some(p), Some(i)) = (r.forward_defect, r.pullback_defect, r.invariance_defect) {
            println!("  defects: forward {f:.2e}, pullback {p:.2e}, invariance {i:.2e}");
        }
        for [a, b] in &r.offending_intervals {
            println!("  no contracting attractor on [{a:.1}, {b:.1}]");
        }
    }
    Ok(())
}
