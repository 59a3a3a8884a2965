//! The exponential boundary function: one L tangent domain fed from +∞ and
//! the sharp constant e^{-ε}/(1-ε) on the upper boundary.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::geometry::Point;
use bmo_bellman::numerics::QuadratureSettings;
use std::sync::Arc;

fn main() -> Result<(), bmo_bellman::Error> {
    let eps: f64 = 0.5;
    let f = Arc::new(BoundaryFunction::from_name("exp+")?);
    let (fol, _) = foliate(f, eps, QuadratureSettings::default(), BalanceOptions::default())?;
    println!("signature {}", fol.signature);
    for t in [-2.0f64, 0.0, 3.0] {
        let b = fol.eval(Point::upper(t, eps))?;
        let exact = t.exp() * (-eps).exp() / (1.0 - eps);
        println!("B on the upper boundary at x1 = {t}: {b:.12}   closed form {exact:.12}");
    }
    Ok(())
}
