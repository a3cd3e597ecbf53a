//! Two stable linear systems with the same kind of spectrum: only one of them
//! shrinks every separation.

use chronotax::contraction::{contraction_map, full_eigs, sym_eigs, ContractionClass, Grid, LinearField, DEFAULT_BETA};

fn main() -> chronotax::Result<()> {
    for (name, field) in
        [("transient growth", LinearField::TRANSIENT_GROWTH), ("contracting", LinearField::CONTRACTING)]
    {
        let [e1, e2] = full_eigs(field.0);
        let (l1, l2) = sym_eigs(field.0);
        let map = contraction_map(&field, Grid::square(1.0, 101), 0.0, DEFAULT_BETA)?;
        println!("{name}:");
        println!("  Jacobian eigenvalues      {:.3} {:.3}", e1.re, e2.re);
        println!("  symmetrised eigenvalues   {l1:.4} {l2:.4}");
        println!("  contracting cells         {} / {}", map.count(ContractionClass::BothNegative), map.grid.len());
    }
    Ok(())
}
