//! Chronotaxic classes over the (Δω, ε_A) plane, drawn as characters.

use chronotax::contraction::DEFAULT_BETA;
use chronotax::model::OscillatorParams;
use chronotax::steady_state::{region_map, ChronotaxicClass};

fn glyph(c: ChronotaxicClass) -> char {
    match c {
        ChronotaxicClass::NotChronotaxic => ' ',
        ChronotaxicClass::TypeI => 'I',
        ChronotaxicClass::TypeII => ':',
        ChronotaxicClass::TypeIII => '#',
        ChronotaxicClass::ApproxGamma => 'g',
        ChronotaxicClass::ApproxNoGamma => 'n',
    }
}

fn main() -> chronotax::Result<()> {
    let map = region_map((0.0, 3.0), (0.0, 8.0), (31, 81), &OscillatorParams::default(), DEFAULT_BETA)?;
    println!("rows: delta_omega from 3 down to 0; columns: eps_a from 0 to 8");
    for i in (0..map.delta_omega.len()).rev() {
        let line: String = map.row(i).iter().map(|&c| glyph(c)).collect();
        println!("{:5.2} |{line}|", map.delta_omega[i]);
    }
    for c in map.labels_present() {
        println!("{} = {c}", glyph(c));
    }
    Ok(())
}
