//! f = t³: the candidate is linear along each tangent with slope 3u² + 6εu + 6ε².

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::geometry::Point;
use bmo_bellman::numerics::QuadratureSettings;
use std::sync::Arc;

fn main() -> Result<(), bmo_bellman::Error> {
    let eps = 1.0;
    let f = Arc::new(BoundaryFunction::from_name("cubic+")?);
    let (fol, _) = foliate(f, eps, QuadratureSettings::default(), BalanceOptions::default())?;
    for u in [-1.0f64, 0.0, 1.5] {
        // halfway along the tangent from (u, u²) to its contact point at u + ε
        let x1 = u + 0.5 * eps;
        let x = Point::new(x1, u * u + 2.0 * (u + eps) * (x1 - u));
        let exact = (6.0 * eps * eps + 3.0 * u * u + 6.0 * eps * u) * (x1 - u) + u.powi(3);
        println!("foot {u:5}: B = {:.12}  closed form {exact:.12}", fol.eval(x)?);
    }
    Ok(())
}
