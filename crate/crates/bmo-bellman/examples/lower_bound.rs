//! The step-function oracle: a lower bound for the Bellman function that never
//! uses the foliation.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::geometry::Point;
use bmo_bellman::numerics::QuadratureSettings;
use bmo_bellman::verify::lower_bound_search;
use std::sync::Arc;

fn main() -> Result<(), bmo_bellman::Error> {
    for (name, eps, x) in [
        ("quartic-(0)", 1.0, Point::new(0.0, 0.25)),
        ("exp+", 0.5, Point::new(0.0, 0.25)),
        ("quintic(1.5)", 1.0, Point::new(-1.0, 1.5)),
    ] {
        let f = Arc::new(BoundaryFunction::from_name(name)?);
        let (fol, _) = foliate(f.clone(), eps, QuadratureSettings::default(), BalanceOptions::default())?;
        let b = fol.eval(x)?;
        let lb = lower_bound_search(x, &f, eps, 20_000, 1)?;
        println!("{name:<13} B = {b:.10}  search = {lb:.10}  gap {:.2e}", b - lb);
    }
    Ok(())
}
