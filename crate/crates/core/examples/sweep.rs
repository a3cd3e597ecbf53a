//! Saddle-node thresholds along the coupling strength for a few frequency mismatches.

use chronotax::model::OscillatorParams;
use chronotax::steady_state::continuation_sweep;

fn main() -> chronotax::Result<()> {
    let osc = OscillatorParams::default();
    println!("{:>12} {:>10} {:>10} {:>6}", "delta_omega", "eps_c1", "eps_c2", "eps_c3");
    for dw in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let r = continuation_sweep(dw, 0.0, 8.0, 0.01, &osc)?;
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{dw:>12} {:>10} {:>10} {:>6}", show(r.eps_c1), show(r.eps_c2), r.eps_c3);
    }
    Ok(())
}
