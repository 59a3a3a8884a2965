//! f = -(t - c)⁴: growing the cup by continuation and evaluating inside it.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::cups::grow_cup;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::geometry::Point;
use bmo_bellman::numerics::QuadratureSettings;
use std::sync::Arc;

fn main() -> Result<(), bmo_bellman::Error> {
    let (c, eps) = (0.3, 1.0);
    let f = Arc::new(BoundaryFunction::from_name("quartic-(0.3)")?);
    let cup = grow_cup(c, 2.0 * eps, f.clone(), eps, QuadratureSettings::default())?;
    let asym = cup.table.iter().map(|r| (2.0 * r.a + r.ell - 2.0 * c).abs()).fold(0.0, f64::max);
    println!("{} chords, full = {}, max |a + b - 2c| = {asym:.2e}", cup.table.len(), cup.full);
    let (fol, _) = foliate(f, eps, QuadratureSettings::default(), BalanceOptions::default())?;
    print!("{}", fol.document());
    println!();
    for s in [0.1, 0.5, 1.0] {
        let b = fol.eval(Point::new(c, c * c + s * s))?;
        println!("sigma = {s}: B = {b:.12}, -sigma^4 = {:.12}", -f64::powi(s, 4));
    }
    Ok(())
}
