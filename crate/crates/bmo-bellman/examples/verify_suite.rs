//! Runs every invariant suite on one built-in function.
//!
//! cargo run --release --example verify_suite -- "quintic(1.5)" 1.0

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::foliate;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::numerics::QuadratureSettings;
use bmo_bellman::verify::{run_all, SuiteSizes};
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "quintic(1.5)".into());
    let eps: f64 = args.next().map_or(Ok(1.0), |s| s.parse())?;
    let f = Arc::new(BoundaryFunction::from_name(&name)?);
    let (fol, _) = foliate(f, eps, QuadratureSettings::default(), BalanceOptions::default())?;
    println!("{name} at eps = {eps}: signature {}", fol.signature);
    for report in run_all(&fol, SuiteSizes::default(), 7) {
        println!("{report}");
    }
    Ok(())
}
