//! Writes the foliation of a quintic as CSV polylines and an SVG picture.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::cli::{polylines, render_svg, GridSpec};
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::numerics::QuadratureSettings;
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 1.0;
    let f = Arc::new(BoundaryFunction::from_name("quintic(1.5)")?);
    let (fol, _) = foliate(f, eps, QuadratureSettings::default(), BalanceOptions::default())?;
    let grid = GridSpec { x1_min: -3.0, x1_max: 2.0, ..GridSpec::default() };
    let lines = polylines(&fol, &grid)?;
    let dir = std::env::temp_dir();
    std::fs::write(dir.join("quintic.svg"), render_svg(&lines, eps))?;
    let mut csv = String::from("id,kind,x1,x2\n");
    for (id, l) in lines.iter().enumerate() {
        for p in &l.points {
            csv.push_str(&format!("{id},{},{},{}\n", l.kind, p.x1, p.x2));
        }
    }
    std::fs::write(dir.join("quintic_polylines.csv"), csv)?;
    println!("{} polylines written to {}", lines.len(), dir.display());
    Ok(())
}
