//! Cups: families of extremal chords [a(ℓ), b(ℓ)] growing out of a point c
//! where f''' changes sign from + to −.

use crate::boundary::BoundaryFunction;
use crate::error::{Error, Result};
use crate::geometry::{chord_height, Point};
use crate::numerics::{find_root_monotone, Integrator, QuadratureSettings};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chord {
    pub a: f64,
    pub b: f64,
}

impl Chord {
    pub fn ell(&self) -> f64 {
        self.b - self.a
    }
}

/// One tabulated chord with the slope a'(ℓ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CupRow {
    pub ell: f64,
    pub a: f64,
    pub da: f64,
}

/// Φ(a, ℓ) = ℓ(f'(a) + f'(a+ℓ)) − 2(f(a+ℓ) − f(a)), by the direct formula.
pub fn chord_mismatch(a: f64, ell: f64, f: &BoundaryFunction) -> f64 {
    let b = a + ell;
    ell * (f.f1(a) + f.f1(b)) - 2.0 * (f.f(b) - f.f(a))
}

/// D_L = f''(a) − ⟨f''⟩ and D_R = f''(b) − ⟨f''⟩ on [a, b], by the direct formulas.
pub fn differentials(a: f64, b: f64, f: &BoundaryFunction) -> Result<(f64, f64)> {
    if !(a < b) {
        return Err(Error::Argument(format!("differentials need a < b, got a = {a}, b = {b}")));
    }
    let mean = (f.f1(b) - f.f1(a)) / (b - a);
    Ok((f.f2(a) - mean, f.f2(b) - mean))
}

/// The three moments of f''' behind Φ and D: ∫f'''(t−a)(b−t), ∫f'''(t−a), ∫f'''(b−t).
///
/// These are free of the cancellation that the direct formulas suffer for short chords.
fn moments(a: f64, b: f64, f: &BoundaryFunction, q: &Integrator) -> Result<[f64; 3]> {
    if a == b {
        return Ok([0.0; 3]);
    }
    let j0 = q.integrate(&|t| f.f3(t) * (t - a) * (b - t), a, b, None)?;
    let j1 = q.integrate(&|t| f.f3(t) * (t - a), a, b, None)?;
    let j2 = q.integrate(&|t| f.f3(t) * (b - t), a, b, None)?;
    Ok([j0, j1, j2])
}

/// Φ(a, ℓ) through its integral form.
pub fn mismatch_integral(a: f64, ell: f64, f: &BoundaryFunction, q: &Integrator) -> Result<f64> {
    if ell == 0.0 {
        return Ok(0.0);
    }
    q.integrate(&|t| f.f3(t) * (t - a) * (a + ell - t), a, a + ell, None)
}

/// (D_L, D_R) through their integral forms; zero for a degenerate chord.
pub fn differentials_integral(a: f64, b: f64, f: &BoundaryFunction, q: &Integrator) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let [_, j1, j2] = moments(a, b, f, q)?;
    let l = b - a;
    Ok((-j2 / l, j1 / l))
}

/// Newton on a bracketed root with bisection whenever a step leaves the bracket.
/// `h` returns (value, derivative); the value is positive at `pos` and negative at `neg`.
fn bracketed_newton(h: &dyn Fn(f64) -> Result<(f64, f64)>, pos: f64, neg: f64, x0: f64) -> Result<f64> {
    let (mut p, mut n) = (pos, neg);
    let mut x = if (x0 - p) * (x0 - n) < 0.0 { x0 } else { 0.5 * (p + n) };
    let tol = 4e-16 * (1.0 + p.abs().max(n.abs()));
    for _ in 0..100 {
        let (v, dv) = h(x)?;
        if v == 0.0 {
            return Ok(x);
        }
        if v > 0.0 {
            p = x;
        } else {
            n = x;
        }
        if (p - n).abs() <= tol {
            return Ok(0.5 * (p + n));
        }
        let step = v / dv;
        let mut next = x - step;
        if !next.is_finite() || (next - p) * (next - n) >= 0.0 {
            next = 0.5 * (p + n);
        }
        if (next - x).abs() <= tol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// A cup with origin c, tabulated up to its top chord of length `ell_max`.
#[derive(Debug, Clone)]
pub struct CupFamily {
    pub origin_c: f64,
    pub eps: f64,
    pub ell_max: f64,
    pub full: bool,
    pub table: Vec<CupRow>,
    f: Arc<BoundaryFunction>,
    settings: QuadratureSettings,
}

impl CupFamily {
    fn q(&self) -> Integrator {
        self.f.integrator(self.settings)
    }

    pub fn function(&self) -> &BoundaryFunction {
        &self.f
    }

    /// Chord start a for length ℓ ∈ [0, ℓ_max]: interpolated, then polished by Newton on Φ.
    pub fn a_of(&self, ell: f64) -> Result<f64> {
        if ell <= 0.0 {
            return Ok(self.origin_c);
        }
        if ell > self.ell_max * (1.0 + 1e-12) {
            return Err(Error::Argument(format!("ell = {ell} exceeds the cup's {}", self.ell_max)));
        }
        let ell = ell.min(self.ell_max);
        let guess = self.interpolate(ell);
        solve_a(&self.f, &self.q(), self.origin_c, ell, guess)
    }

    pub fn chord(&self, ell: f64) -> Result<Chord> {
        let a = self.a_of(ell)?;
        Ok(Chord { a, b: a + ell })
    }

    pub fn top(&self) -> Result<Chord> {
        self.chord(self.ell_max)
    }

    fn interpolate(&self, ell: f64) -> f64 {
        let t = &self.table;
        let k = t.partition_point(|r| r.ell <= ell).clamp(1, t.len() - 1);
        let (r0, r1) = (t[k - 1], t[k]);
        let h = r1.ell - r0.ell;
        let s = ((ell - r0.ell) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * r0.a + h10 * h * r0.da + h01 * r1.a + h11 * h * r1.da
    }

    /// Right end b̃(a) of the family chord starting at a ∈ [a(ℓ_max), c].
    pub fn partner_b(&self, a: f64) -> Result<f64> {
        let c = self.origin_c;
        if a >= c {
            return Ok(c);
        }
        let top = *self.table.last().expect("cup table is never empty");
        let tol = 1e-12 * (1.0 + a.abs() + self.eps);
        if (a - top.a).abs() <= tol {
            return Ok(top.a + top.ell);
        }
        let q = self.q();
        let f = &self.f;
        let hi = a + self.ell_max;
        let guess = self.guess_by_table(|r| r.a, a).map(|ell| a + ell).unwrap_or(0.5 * (c + hi));
        // Φ(a, b − a) is positive at b = c and negative at the family's far end.
        let h = |b: f64| -> Result<(f64, f64)> {
            let [j0, j1, _] = moments(a, b, f, &q)?;
            Ok((j0, j1))
        };
        let (end, _) = h(hi)?;
        if end > 0.0 {
            return Err(Error::Argument(format!("a = {a} lies outside the cup grown from {c}")));
        }
        bracketed_newton(&h, c, hi, guess)
    }

    /// Left end ã(b) of the family chord ending at b ∈ [c, b(ℓ_max)].
    pub fn partner_a(&self, b: f64) -> Result<f64> {
        let c = self.origin_c;
        if b <= c {
            return Ok(c);
        }
        let top = *self.table.last().expect("cup table is never empty");
        let tol = 1e-12 * (1.0 + b.abs() + self.eps);
        if (b - top.a - top.ell).abs() <= tol {
            return Ok(top.a);
        }
        let q = self.q();
        let f = &self.f;
        let lo = b - self.ell_max;
        let guess = self.guess_by_table(|r| r.a + r.ell, b).map(|ell| b - ell).unwrap_or(0.5 * (c + lo));
        let h = |a: f64| -> Result<(f64, f64)> {
            let [j0, _, j2] = moments(a, b, f, &q)?;
            // dΦ/da at fixed b is −∫f'''(b − t)
            Ok((j0, -j2))
        };
        let (end, _) = h(lo)?;
        if end < 0.0 {
            return Err(Error::Argument(format!("b = {b} lies outside the cup grown from {c}")));
        }
        bracketed_newton(&h, lo, c, guess)
    }

    /// Table lookup of ℓ such that key(row) = target, linear between rows.
    fn guess_by_table(&self, key: impl Fn(&CupRow) -> f64, target: f64) -> Option<f64> {
        let t = &self.table;
        for w in t.windows(2) {
            let (k0, k1) = (key(&w[0]), key(&w[1]));
            if (k0 - target) * (k1 - target) <= 0.0 && k0 != k1 {
                let s = (target - k0) / (k1 - k0);
                return Some(w[0].ell + s * (w[1].ell - w[0].ell));
            }
        }
        None
    }

    /// Whether x lies in the closed region between the lower parabola and the top chord.
    pub fn contains(&self, x: Point, top: Chord) -> bool {
        let tol = 1e-12 * (1.0 + x.x1 * x.x1);
        x.x1 >= top.a - tol && x.x1 <= top.b + tol && x.x2 <= chord_height(top.a, top.b, x.x1) + tol
    }

    /// The family chord through x, for x under the chord of length `ell_top`.
    pub fn locate_chord_within(&self, x: Point, ell_top: f64) -> Result<Chord> {
        let top = self.chord(ell_top)?;
        if !self.contains(x, top) {
            return Err(Error::Dispatch { x1: x.x1, x2: x.x2 });
        }
        let g = |ell: f64| -> f64 {
            match self.chord(ell) {
                Ok(ch) if ell > 0.0 => chord_height(ch.a, ch.b, x.x1) - x.x2,
                _ => {
                    let c = self.origin_c;
                    2.0 * c * x.x1 - c * c - x.x2
                }
            }
        };
        let g_top = chord_height(top.a, top.b, x.x1) - x.x2;
        if g_top <= 0.0 {
            return Ok(top);
        }
        let g0 = g(0.0);
        if g0 >= 0.0 {
            // x is the origin itself
            return Ok(Chord { a: self.origin_c, b: self.origin_c });
        }
        let ell = find_root_monotone(&g, 0.0, ell_top, 1e-14 * (1.0 + self.eps))?;
        self.chord(ell)
    }

    pub fn locate_chord(&self, x: Point) -> Result<Chord> {
        self.locate_chord_within(x, self.ell_max)
    }

    /// Linear interpolation of f along the family chord through x.
    pub fn eval_within(&self, x: Point, ell_top: f64) -> Result<f64> {
        let ch = self.locate_chord_within(x, ell_top)?;
        Ok(interpolate_on_chord(&self.f, ch, x.x1))
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        self.eval_within(x, self.ell_max)
    }
}

/// Value on the chord [A, B] at abscissa x₁, written as a convex combination.
pub fn interpolate_on_chord(f: &BoundaryFunction, ch: Chord, x1: f64) -> f64 {
    let l = ch.b - ch.a;
    if l <= 0.0 {
        return f.f(ch.a);
    }
    let wa = ((ch.b - x1) / l).clamp(0.0, 1.0);
    wa * f.f(ch.a) + (1.0 - wa) * f.f(ch.b)
}

/// Root a ∈ [c − ℓ, c] of Φ(·, ℓ).
fn solve_a(f: &BoundaryFunction, q: &Integrator, c: f64, ell: f64, guess: f64) -> Result<f64> {
    let h = |a: f64| -> Result<(f64, f64)> {
        let [j0, j1, j2] = moments(a, a + ell, f, q)?;
        Ok((j0, j1 - j2))
    };
    let (lo, _) = h(c - ell)?;
    let (hi, _) = h(c)?;
    if !(lo > 0.0 && hi < 0.0) {
        return Err(Error::Continuation {
            last_good: ell,
            reason: format!("chord equation not bracketed at ell = {ell} (Φ = {lo:e}, {hi:e})"),
        });
    }
    bracketed_newton(&h, c - ell, c, guess)
}

/// Grows the cup from c up to `ell_max` by predictor-corrector continuation.
///
/// The predictor follows a' = −D_R/(D_L + D_R); the corrector is Newton on
/// Φ(·, ℓ) inside the bracket [c − ℓ, c]. Every row is checked against the
/// monotonicity and sign properties of a genuine cup.
pub fn grow_cup(
    c: f64,
    ell_max: f64,
    f: Arc<BoundaryFunction>,
    eps: f64,
    settings: QuadratureSettings,
) -> Result<CupFamily> {
    if !(ell_max > 0.0 && ell_max <= 2.0 * eps * (1.0 + 1e-12)) {
        return Err(Error::Argument(format!("ell_max = {ell_max} must lie in (0, 2·eps]")));
    }
    let q = f.integrator(settings);
    let ell0 = 1e-4 * eps;
    let max_step = 2.0 * eps / 256.0;
    let mut ells = vec![ell0];
    // geometric ramp from the seed to the uniform spacing
    while *ells.last().unwrap() < ell_max {
        let last = *ells.last().unwrap();
        let next = (last * 2.0).min(last + max_step).min(ell_max);
        if ell_max - next < 1e-3 * max_step {
            ells.push(ell_max);
            break;
        }
        ells.push(next);
    }
    let scale = 1.0 + c.abs() + eps;
    let mut rows = vec![CupRow { ell: 0.0, a: c, da: -0.5 }];
    let mut a_prev = c;
    let mut da_prev = -0.5;
    let mut ell_prev = 0.0;
    for &ell in &ells {
        let pred = a_prev + da_prev * (ell - ell_prev);
        let a = solve_a(&f, &q, c, ell, pred).map_err(|e| match e {
            Error::Continuation { reason, .. } => Error::Continuation { last_good: ell_prev, reason },
            other => other,
        })?;
        let b = a + ell;
        let (dl, dr) = differentials_integral(a, b, &f, &q)?;
        let den = dl + dr;
        if den.abs() < 1e-300 {
            return Err(Error::Continuation { last_good: ell_prev, reason: "singular Jacobian D_L + D_R = 0".into() });
        }
        let da = -dr / den;
        let residual = mismatch_integral(a, ell, &f, &q)?;
        let fscale = ell.powi(3) * (f.f3(a).abs() + f.f3(b).abs() + 1e-300);
        let bad = if !(a < c && c < b) {
            Some(format!("origin {c} not inside chord [{a}, {b}]"))
        } else if a >= a_prev + 1e-15 * scale && ell_prev > 0.0 {
            Some("a(ℓ) failed to decrease".into())
        } else if !(dl < 0.0 && dr < 0.0) {
            Some(format!("differentials not negative: D_L = {dl:e}, D_R = {dr:e}"))
        } else if !(-1.0 - 1e-9 < da && da < 1e-9) {
            Some(format!("slope a' = {da} outside (−1, 0)"))
        } else if residual.abs() > 1e-10 * fscale.max(1e-300) + 1e-13 * scale.powi(3) {
            Some(format!("chord residual {residual:e}"))
        } else {
            None
        };
        if let Some(reason) = bad {
            return Err(Error::Continuation { last_good: ell_prev, reason });
        }
        if rows.len() == 1 {
            rows[0].da = (a - c) / ell;
        }
        rows.push(CupRow { ell, a, da });
        a_prev = a;
        da_prev = da;
        ell_prev = ell;
    }
    let full = (ell_max - 2.0 * eps).abs() <= 1e-12 * eps;
    Ok(CupFamily { origin_c: c, eps, ell_max, full, table: rows, f, settings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn func(name: &str) -> Arc<BoundaryFunction> {
        Arc::new(BoundaryFunction::from_name(name).unwrap())
    }

    fn settings() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn symmetric_quartic_chord_is_a_root() {
        let f = func("quartic-(0)");
        for s in [0.1, 0.5, 1.0] {
            assert!(chord_mismatch(-s, 2.0 * s, &f).abs() < 1e-14);
        }
    }

    #[test]
    fn quintic_closed_form_partner_is_a_root() {
        // ã(b) = (−2b − √(30d − 5b²))/3 for the quintic with d = 1
        let f = func("quintic(1)");
        let b: f64 = 0.5;
        let a = (-2.0 * b - (30.0 - 5.0 * b * b).sqrt()) / 3.0;
        assert!(chord_mismatch(a, b - a, &f).abs() < 1e-13);
        let q = f.integrator(settings());
        assert!(mismatch_integral(a, b - a, &f, &q).unwrap().abs() < 1e-13);
    }

    #[test]
    fn cubic_has_no_chord_solutions() {
        let f = func("cubic+");
        for i in 0..20 {
            for j in 1..20 {
                let a = -2.0 + 0.2 * i as f64;
                let l = 0.1 * j as f64;
                assert!(chord_mismatch(a, l, &f).abs() > 1e-6);
            }
        }
    }

    #[test]
    fn quintic_differential_closed_form() {
        let f = func("quintic(1)");
        let q = f.integrator(settings());
        let cup = grow_cup(-1.0, 2.0, f.clone(), 1.0, settings()).unwrap();
        for ell in [0.3, 1.1, 2.0] {
            let ch = cup.chord(ell).unwrap();
            let (_, dr) = differentials(ch.a, ch.b, &f).unwrap();
            let (_, dri) = differentials_integral(ch.a, ch.b, &f, &q).unwrap();
            let closed = (ch.b - ch.a).powi(2) * (3.0 * ch.b + 2.0 * ch.a) / 30.0;
            assert!((dr - closed).abs() < 1e-10, "{dr} vs {closed}");
            assert!((dri - closed).abs() < 1e-12, "{dri} vs {closed}");
        }
    }

    #[test]
    fn linear_second_derivative_gives_opposite_differentials() {
        let f = func("cubic+");
        let (dl, dr) = differentials(-0.3, 0.8, &f).unwrap();
        assert!((dl + dr).abs() < 1e-13);
        let f = func("quartic-(0.2)");
        let (dl, dr) = differentials(-0.5, 0.9, &f).unwrap();
        assert!(dl < 0.0 || dr < 0.0);
    }

    #[test]
    fn negative_quartic_cup_is_symmetric() {
        let c = 0.4;
        let f = func(&format!("quartic-({c})"));
        let cup = grow_cup(c, 2.0, f, 1.0, settings()).unwrap();
        assert!(cup.full);
        for r in &cup.table {
            assert!((r.a + (r.a + r.ell) - 2.0 * c).abs() < 1e-10, "{r:?}");
        }
        for ell in [0.013, 0.77, 1.5] {
            let ch = cup.chord(ell).unwrap();
            assert!((ch.a - (c - ell / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn quintic_right_end_closed_form() {
        let d: f64 = 1.0;
        let f = func("quintic(1)");
        let cup = grow_cup(-1.0, 2.0, f, 1.0, settings()).unwrap();
        for ell in [1e-3, 0.25, 1.0, 1.9, 2.0] {
            let b = cup.chord(ell).unwrap().b;
            let closed = ell / 2.0 - (d - ell * ell / 20.0).sqrt();
            assert!((b - closed).abs() < 1e-11, "ell {ell}: {b} vs {closed}");
        }
    }

    #[test]
    fn chord_shrinks_to_origin() {
        let f = func("quintic(2)");
        let c = -(2f64.sqrt());
        let cup = grow_cup(c, 0.7, f, 0.5, settings()).unwrap();
        let ch = cup.chord(1e-7).unwrap();
        assert!((ch.a - c).abs() < 1e-6 && (ch.b - c).abs() < 1e-6);
        assert!(!cup.full);
    }

    #[test]
    fn table_invariants_hold() {
        for (name, c, eps) in [("quartic-(0)", 0.0, 1.0), ("quintic(1.5)", -(1.5f64.sqrt()), 1.0)] {
            let f = func(name);
            let q = f.integrator(settings());
            let cup = grow_cup(c, 2.0 * eps, f.clone(), eps, settings()).unwrap();
            for w in cup.table.windows(2) {
                let (r0, r1) = (w[0], w[1]);
                assert!(r1.a < r0.a && r1.a + r1.ell > r0.a + r0.ell);
                assert!(-1.0 < r1.da && r1.da < 0.0);
                // D_R b' + D_L a' = 0
                let (dl, dr) = differentials_integral(r1.a, r1.a + r1.ell, &f, &q).unwrap();
                assert!((dr * (1.0 + r1.da) + dl * r1.da).abs() < 1e-8);
                // consecutive chords do not cross above the lower parabola
                let (a0, b0, a1, b1) = (r0.a, r0.a + r0.ell, r1.a, r1.a + r1.ell);
                let x = if (a0 + b0 - a1 - b1).abs() > 1e-15 { (a0 * b0 - a1 * b1) / (a0 + b0 - a1 - b1) } else { f64::NAN };
                assert!(!(x > a0 && x < b0 && x > a1 && x < b1), "chords cross at {x}");
            }
        }
    }

    #[test]
    fn locate_and_eval_on_negative_quartic() {
        let f = func("quartic-(0)");
        let cup = grow_cup(0.0, 2.0, f.clone(), 1.0, settings()).unwrap();
        let ch = cup.locate_chord(Point::new(0.0, 0.25)).unwrap();
        assert!((ch.a + 0.5).abs() < 1e-12 && (ch.b - 0.5).abs() < 1e-12);
        assert!((cup.eval(Point::new(0.0, 0.25)).unwrap() + 1.0 / 16.0).abs() < 1e-12);
        assert!((cup.eval(Point::new(0.25, 0.25)).unwrap() + 1.0 / 16.0).abs() < 1e-12);
        assert!((cup.eval(Point::lower(-0.6)).unwrap() - f.f(-0.6)).abs() < 1e-12);
        let top = cup.locate_chord(Point::new(0.3, 1.0)).unwrap();
        assert!((top.ell() - 2.0).abs() < 1e-12);
        assert!(matches!(cup.locate_chord(Point::new(0.0, 1.01)), Err(Error::Dispatch { .. })));
    }

    #[test]
    fn partners_invert_each_other() {
        let f = func("quintic(1.5)");
        let c = -(1.5f64.sqrt());
        let cup = grow_cup(c, 2.0, f, 1.0, settings()).unwrap();
        for ell in [0.2, 1.0, 1.8] {
            let ch = cup.chord(ell).unwrap();
            assert!((cup.partner_b(ch.a).unwrap() - ch.b).abs() < 1e-12);
            assert!((cup.partner_a(ch.b).unwrap() - ch.a).abs() < 1e-12);
        }
    }

    #[test]
    fn x2_derivative_is_half_mean_second_derivative() {
        let f = func("quintic(1.5)");
        let c = -(1.5f64.sqrt());
        let cup = grow_cup(c, 2.0, f.clone(), 1.0, settings()).unwrap();
        let ch = cup.chord(1.2).unwrap();
        let x = Point::new(ch.a + 0.4 * ch.ell(), chord_height(ch.a, ch.b, ch.a + 0.4 * ch.ell()));
        let h = 1e-5;
        let d = (cup.eval(Point::new(x.x1, x.x2 + h)).unwrap() - cup.eval(Point::new(x.x1, x.x2 - h)).unwrap()) / (2.0 * h);
        let expect = (f.f1(ch.b) - f.f1(ch.a)) / (2.0 * ch.ell());
        assert!((d - expect).abs() < 1e-6, "{d} vs {expect}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn quartic_cups_stay_symmetric(c in -2.0f64..2.0, eps in 0.2f64..1.5, s in 0.01f64..1.0) {
            let f = func(&format!("quartic-({c})"));
            let cup = grow_cup(c, 2.0 * eps, f, eps, settings()).unwrap();
            let ch = cup.chord(2.0 * eps * s).unwrap();
            prop_assert!((ch.a + ch.b - 2.0 * c).abs() < 1e-10);
        }
    }
}
