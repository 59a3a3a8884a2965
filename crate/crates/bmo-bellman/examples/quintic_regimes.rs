//! t⁵/60 - d t³/6: the foliation changes shape as d/ε² grows, and the switch
//! between the two-figure and three-figure regimes is located by bisection.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::numerics::QuadratureSettings;
use bmo_bellman::verify::quintic_threshold;
use std::sync::Arc;

fn main() -> Result<(), bmo_bellman::Error> {
    for ratio in [0.9, 1.2, 1.5, 2.0] {
        let f = Arc::new(BoundaryFunction::from_name(&format!("quintic({ratio})"))?);
        let (fol, _) = foliate(f, 1.0, QuadratureSettings::default(), BalanceOptions::default())?;
        println!("d/eps^2 = {ratio}: signature {}", fol.signature);
    }
    let t = quintic_threshold(1.0, 1e-9)?;
    println!("LL/LRL threshold {t:.9} (1614/1225 = {:.9})", 1614.0 / 1225.0);
    Ok(())
}
