//! Rotating-frame portrait at one coupling strength: contraction map, fixed
//! points and the closed curve Γ. Pass ε_A as the first argument.
//!
//! ```text
//! cargo run --release --example portrait -- 0.5
//! ```

use chronotax::contraction::{contraction_map, ContractionClass, Grid, DEFAULT_BETA};
use chronotax::model::{FrozenParams, OscillatorParams};
use chronotax::steady_state::{classify, find_fixed_points, trace_gamma};

fn main() -> chronotax::Result<()> {
    let eps_a: f64 = std::env::args().nth(1).map_or(Ok(0.5), |s| s.parse()).expect("eps_a must be a number");
    let frozen = FrozenParams::new(eps_a, 0.5, OscillatorParams::default())?;

    let map = contraction_map(&frozen.system(), Grid::square(2.5, 201), 0.0, DEFAULT_BETA)?;
    for class in [ContractionClass::BothNegative, ContractionClass::OneNegative, ContractionClass::NoneNegative] {
        println!("{class:>14}: {:5.1}%", 100.0 * map.count(class) as f64 / map.grid.len() as f64);
    }

    for p in find_fixed_points(&frozen) {
        println!(
            "{:>15} at r = {:.4}, psi = {:+.4}, lambda_max_sym = {:+.3}",
            p.kind, p.location.r, p.location.psi, p.lambda_max_sym
        );
    }

    let gamma = trace_gamma(&frozen)?;
    if gamma.exists {
        let r: Vec<f64> = gamma.polar().iter().map(|s| s.r).collect();
        let (lo, hi) = r.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        println!("Gamma: {} points, r in [{lo:.3}, {hi:.3}]", gamma.points.len());
    } else {
        println!("Gamma: none");
    }
    println!("class: {}", classify(&frozen)?);
    Ok(())
}
