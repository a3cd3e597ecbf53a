//! Scalogram and ridge of a chirp, written as CSV to stdout.
//!
//! ```text
//! cargo run --release --example cwt > ridge.csv
//! ```

use std::f64::consts::TAU;

use chronotax::signal::{cwt, log_freqs, ridge};

fn main() -> chronotax::Result<()> {
    let dt = 0.05;
    let n = 8000;
    // instantaneous frequency rises linearly from 0.1 to 0.5 Hz
    let series: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            (TAU * (0.1 * t + 0.2 * t * t / (n as f64 * dt))).sin()
        })
        .collect();
    let s = cwt(&series, 0.0, dt, &log_freqs(0.05, 1.0, 24)?, 1.0)?;
    let r = ridge(&s);
    r.write_csv(std::io::stdout().lock())?;
    eprintln!("median ridge {:.3} Hz", r.median_frequency());
    Ok(())
}
