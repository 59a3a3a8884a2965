//! |t|³ and t⁴/24 - a t³/6: two tangent domains meeting in an angle whose vertex
//! sits where f''' changes sign.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::{foliate, Figure};
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::numerics::QuadratureSettings;
use std::sync::Arc;

fn main() -> Result<(), bmo_bellman::Error> {
    for (name, eps) in [("power 3", 1.0), ("quartic+(2)", 0.3), ("example6", 0.8)] {
        let f = Arc::new(BoundaryFunction::from_name(name)?);
        let (fol, _) = foliate(f, eps, QuadratureSettings::default(), BalanceOptions::default())?;
        for fig in &fol.figures {
            if let Figure::Angle { v, alpha1, alpha2, alpha0 } = fig {
                println!("{name:<12} eps {eps}: vertex {v:.10}, B = {alpha1:.6} x1 + {alpha2:.6} x2 + {alpha0:.6}");
            }
        }
    }
    Ok(())
}
