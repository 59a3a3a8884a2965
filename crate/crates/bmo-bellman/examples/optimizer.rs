//! Extremal test functions: their moments reproduce the point and ⟨f∘φ⟩ equals B.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::geometry::Point;
use bmo_bellman::numerics::QuadratureSettings;
use bmo_bellman::optimizers::{bmo_norm, build_optimizer, moments};
use std::sync::Arc;

fn main() -> Result<(), bmo_bellman::Error> {
    let eps = 1.0;
    let f = Arc::new(BoundaryFunction::from_name("quintic(1.5)")?);
    let (fol, _) = foliate(f.clone(), eps, QuadratureSettings::default(), BalanceOptions::default())?;
    for (x1, frac) in [(-2.5, 0.5), (-1.0, 0.3), (0.0, 0.9), (0.16, 0.99), (1.5, 0.4)] {
        let x = Point::new(x1, x1 * x1 + frac * eps * eps);
        let (b, tag) = fol.eval_tagged(x)?;
        let phi = build_optimizer(x, &fol)?;
        let m = moments(&phi, &f)?;
        println!(
            "({x1:5}, {:.3}) {tag:<5} pieces {:2}  m1 {:+.2e}  m2 {:+.2e}  <f(phi)> - B {:+.2e}  norm/eps {:.8}",
            x.x2,
            phi.pieces.len(),
            m.m1 - x.x1,
            m.m2 - x.x2,
            m.mf - b,
            bmo_norm(&phi, 512) / eps
        );
    }
    Ok(())
}
