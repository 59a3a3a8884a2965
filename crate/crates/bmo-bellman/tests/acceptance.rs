//! Acceptance criteria 1-10. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use bmo_bellman::boundary::BoundaryFunction;
use bmo_bellman::candidate::{foliate, Foliation};
use bmo_bellman::cups::grow_cup;
use bmo_bellman::forces::BalanceOptions;
use bmo_bellman::geometry::Point;
use bmo_bellman::numerics::QuadratureSettings;
use bmo_bellman::verify::{
    check_boundary, check_concavity, check_monge_ampere, check_optimizers, lower_bound_search, sample_span,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn build(name: &str, eps: f64) -> Result<Foliation, String> {
    let f = Arc::new(BoundaryFunction::from_name(name).map_err(|e| e.to_string())?);
    foliate(f, eps, QuadratureSettings::default(), BalanceOptions::default())
        .map(|(fol, _)| fol)
        .map_err(|e| format!("{name} at eps {eps}: {e}"))
}

fn eval(fol: &Foliation, x: Point) -> Result<f64, String> {
    fol.eval(x).map_err(|e| format!("eval at ({}, {}): {e}", x.x1, x.x2))
}

fn single_balance(fol: &Foliation) -> Result<f64, String> {
    match fol.balance_points.as_slice() {
        [v] => Ok(*v),
        other => Err(format!("expected one balance point, got {other:?}")),
    }
}

fn within(what: &str, err: f64, tol: f64) -> Outcome {
    if err <= tol {
        Ok(format!("{what}: max error {err:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("{what}: max error {err:.2e} > {tol:.0e}"))
    }
}

fn in_time(outcome: Outcome, start: Instant, limit: Duration) -> Outcome {
    let took = start.elapsed();
    let detail = outcome?;
    if took <= limit {
        Ok(format!("{detail}; {took:.2?}"))
    } else {
        Err(format!("{detail}; took {took:.2?} > {limit:?}"))
    }
}

/// Upper-boundary values of e^t.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let eps: f64 = 0.5;
    let fol = build("exp+", eps)?;
    let mut worst: f64 = 0.0;
    for t in [-2.0f64, 0.0, 3.0] {
        let exact = t.exp() * (-eps).exp() / (1.0 - eps);
        worst = worst.max((eval(&fol, Point::upper(t, eps))? / exact - 1.0).abs());
    }
    in_time(within("exp+ on the upper boundary", worst, 1e-8), start, Duration::from_secs(1))
}

/// t³ along L tangents over a 50 × 20 grid of (foot, position).
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for eps in [0.5, 1.0, 2.0] {
        let fol = build("cubic+", eps)?;
        for i in 0..50 {
            let u = -3.0 + 6.0 * i as f64 / 49.0;
            for j in 0..20 {
                let x1 = u + eps * j as f64 / 19.0;
                let x = Point::new(x1, u * u + 2.0 * (u + eps) * (x1 - u));
                let exact = (6.0 * eps * eps + 3.0 * u * u + 6.0 * eps * u) * (x1 - u) + u.powi(3);
                worst = worst.max((eval(&fol, x)? - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    in_time(within("cubic+ tangent values", worst, 1e-8), start, Duration::from_secs(5))
}

/// -(t - c)⁴: a symmetric cup, B = -σ⁴ along the chord over [c - σ, c + σ].
fn criterion_3() -> Outcome {
    let mut sym: f64 = 0.0;
    let mut val: f64 = 0.0;
    for (c, eps) in [(0.0, 1.0), (0.3, 0.5), (-1.2, 2.0)] {
        let name = format!("quartic-({c})");
        let f = Arc::new(BoundaryFunction::from_name(&name).map_err(|e| e.to_string())?);
        let cup = grow_cup(c, 2.0 * eps, f, eps, QuadratureSettings::default()).map_err(|e| e.to_string())?;
        for row in &cup.table {
            sym = sym.max((2.0 * row.a + row.ell - 2.0 * c).abs());
        }
        let fol = build(&name, eps)?;
        for s in [0.1 * eps, 0.5 * eps, eps] {
            for k in 0..=4 {
                // point on the chord from c - s to c + s, including (c, c² + s²)
                let x1 = c - s + 2.0 * s * k as f64 / 4.0;
                let x = Point::new(x1, 2.0 * c * x1 - c * c + s * s);
                val = val.max((eval(&fol, x)? + s.powi(4)).abs() / s.powi(4).max(1e-300).max(1.0));
            }
        }
    }
    let a = within("a + b - 2c over the cup table", sym, 1e-10)?;
    let b = within("B + sigma^4 on the chords", val, 1e-8)?;
    Ok(format!("{a}; {b}"))
}

/// t⁴/24 - a t³/6: the angle vertex sits at a.
fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in [-1.0, 0.0, 2.0] {
        for eps in [0.3, 1.0] {
            worst = worst.max((single_balance(&build(&format!("quartic+({a})"), eps)?)? - a).abs());
        }
    }
    within("quartic+ balance point", worst, 1e-8)
}

/// t⁵/60 - d t³/6: regimes and the threshold 1614/1225 between LL and LRL.
fn criterion_5() -> Outcome {
    let limit = Duration::from_secs(10);
    for (ratio, want) in [(0.9, "L"), (1.2, "LL"), (1.5, "LRL")] {
        let start = Instant::now();
        let sig = build(&format!("quintic({ratio})"), 1.0)?.signature;
        if sig != want {
            return Err(format!("d/eps^2 = {ratio}: signature {sig}, expected {want}"));
        }
        if start.elapsed() > limit {
            return Err(format!("d/eps^2 = {ratio} took {:?}", start.elapsed()));
        }
    }
    // bisection on ε at fixed d: d/ε² above the threshold gives LRL
    let d = 2.0;
    let (mut lo, mut hi) = ((d / 1.5f64).sqrt(), (d / 1.2f64).sqrt());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if build(&format!("quintic({d})"), mid)?.signature == "LRL" {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let eps_star = 0.5 * (lo + hi);
    let exact = 35.0 * d.sqrt() / 1614f64.sqrt();
    let ratio = d / (eps_star * eps_star);
    let a = within("eps* against 35 sqrt(d)/sqrt(1614)", (eps_star - exact).abs(), 1e-6)?;
    Ok(format!("signatures L, LL, LRL; {a}; d/eps*^2 = {ratio:.9}"))
}

/// e^t glued to a partner with f''' = -e^{t/α}.
fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    for eps in [0.5f64, 0.8] {
        let thr = eps / (2.0 - eps);
        let below = build(&format!("two-exp({})", thr - 1e-3), eps)?.signature;
        let above = build(&format!("two-exp({})", thr + 1e-3), eps)?.signature;
        if below != "L" || above == "L" {
            return Err(format!("eps {eps}: signatures {below} / {above} around alpha = {thr}"));
        }
        notes.push(format!("eps {eps}: {below}|{above}"));
    }
    let mut worst: f64 = 0.0;
    for (eps, alphas) in [(0.5f64, vec![0.4f64, 0.7, 1.0, 3.0]), (0.8, vec![0.9, 1.5, 4.0])] {
        for alpha in alphas {
            let exact = alpha * eps / (alpha - eps)
                * (2.0 * alpha * alpha * (1.0 - eps) / ((alpha + eps) * (2.0 * alpha - alpha * eps - eps))).ln();
            worst = worst.max((single_balance(&build(&format!("two-exp({alpha})"), eps)?)? - exact).abs());
        }
        let special = -eps * (eps + 1.0) / (2.0 * (1.0 - eps));
        worst = worst.max((single_balance(&build(&format!("two-exp({eps})"), eps)?)? - special).abs());
    }
    let a = within("balance point closed form", worst, 1e-7)?;
    Ok(format!("{}; {a}", notes.join(", ")))
}

/// -t⁵/60 ∨ t⁴/24: the balance point solves a Lambert equation.
fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    for eps in [0.5f64, 0.8, 1.5] {
        let v = single_balance(&build("example6", eps)?)?;
        if v < 0.0 {
            return Err(format!("eps {eps}: balance point {v} should be nonnegative"));
        }
        worst = worst.max(((v / eps) * (v / eps).exp() - (eps - 0.5)).abs());
    }
    for eps in [0.1f64, 0.3, 0.45] {
        let v = single_balance(&build("example6", eps)?)?;
        if v >= 0.0 {
            return Err(format!("eps {eps}: balance point {v} should be negative"));
        }
        worst = worst.max(((v / eps).exp() * (2.0 * eps * eps + eps) - 4.0 * eps * eps - 2.0 * v * v).abs());
    }
    within("Lambert residuals", worst, 1e-9)
}

/// |t|³: the angle vertex is the origin for every ε.
fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for eps in [0.5, 1.0, 2.0] {
        worst = worst.max(single_balance(&build("power 3", eps)?)?.abs());
    }
    within("power 3 balance point", worst, 1e-9)
}

const BUILTINS: [(&str, [f64; 3]); 10] = [
    ("exp+", [0.3, 0.5, 0.8]),
    ("exp-", [0.3, 0.5, 0.8]),
    ("cubic+", [0.5, 1.0, 2.0]),
    ("cubic-", [0.5, 1.0, 2.0]),
    ("power 3", [0.5, 1.0, 2.0]),
    ("quartic+(0.5)", [0.3, 1.0, 2.0]),
    ("quartic-(0)", [0.5, 1.0, 2.0]),
    ("quintic(1.5)", [0.8, 1.0, 1.2]),
    ("two-exp(1)", [0.3, 0.5, 0.8]),
    ("example6", [0.3, 0.8, 1.5]),
];

/// Invariant suites on every built-in and ε.
fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    for (name, sweep) in BUILTINS {
        for eps in sweep {
            let fol = build(name, eps)?;
            for r in [
                check_boundary(&fol, 500),
                check_concavity(&fol, 1000, 9),
                check_monge_ampere(&fol, 100, 9),
                check_optimizers(&fol, 12, 512, 9),
            ] {
                if !r.pass {
                    return Err(format!("{name} at eps {eps}: {r}"));
                }
            }
            runs += 1;
        }
    }
    in_time(Ok(format!("{runs} foliations pass boundary, concavity, Monge-Ampere and optimizer suites")), start, Duration::from_secs(120))
}

/// The step-function oracle never beats the candidate and is tight on cups and the lower boundary.
fn criterion_10() -> Outcome {
    let mut over: f64 = f64::NEG_INFINITY;
    let mut tight: f64 = 0.0;
    let mut cups = 0;
    for (k, (name, sweep)) in BUILTINS.iter().enumerate() {
        let eps = sweep[1];
        let fol = build(name, eps)?;
        let f = fol.function();
        let (lo, hi) = sample_span(&fol);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        for j in 0..50 {
            let x1 = rng.gen_range(lo..hi);
            let x = Point::new(x1, x1 * x1 + eps * eps * rng.gen_range(0.01..0.99));
            let (b, tag) = fol.eval_tagged(x).map_err(|e| e.to_string())?;
            let lb = lower_bound_search(x, f, eps, 10_000, j).map_err(|e| e.to_string())?;
            let s = f.scale(x.x1, eps);
            over = over.max((lb - b) / s);
            if tag == "cup" {
                cups += 1;
                tight = tight.max((b - lb) / s);
            }
        }
        for t in [-1.0, 0.0, 0.7] {
            let x = Point::lower(t);
            let lb = lower_bound_search(x, f, eps, 10_000, 1).map_err(|e| e.to_string())?;
            tight = tight.max((eval(&fol, x)? - lb).abs() / f.scale(t, eps));
        }
    }
    if cups == 0 {
        return Err("no cup points were sampled".into());
    }
    let a = within("search - B over 500 points", over.max(0.0), 1e-6)?;
    let b = within(&format!("gap on {cups} cup points and lower-boundary points"), tight, 1e-4)?;
    Ok(format!("{a}; {b}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("exponential upper-boundary constant", criterion_1),
        ("cubic tangent formula", criterion_2),
        ("quartic cup symmetry and values", criterion_3),
        ("quartic angle vertex", criterion_4),
        ("quintic regimes and threshold", criterion_5),
        ("two-exponential regimes and balance point", criterion_6),
        ("glued quintic-quartic balance equations", criterion_7),
        ("power function angle vertex", criterion_8),
        ("invariant suites on every built-in", criterion_9),
        ("lower-bound oracle one-sidedness", criterion_10),
    ];
    let mut failed = 0;
    for (k, (what, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {what}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {what}: {detail}", k + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
