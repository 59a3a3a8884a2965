//! Boundary functions f with analytic derivatives, their sign-change
//! patterns, and the affine normalizations of the Bellman function.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::numerics::{find_root_monotone, Ext, Integrator, QuadratureSettings};
use serde::{Deserialize, Serialize};

/// Points where f''' changes sign.
///
/// `c_points` are the + to − changes (the first may be −∞ and the last +∞),
/// `v_points` the − to + changes; they interleave as c₀ < v₁ < c₁ < … < c_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignPattern {
    pub c_points: Vec<Ext>,
    pub v_points: Vec<f64>,
}

impl SignPattern {
    pub fn new(c_points: Vec<Ext>, v_points: Vec<f64>) -> Result<Self> {
        let p = SignPattern { c_points, v_points };
        p.check_interleaving()?;
        Ok(p)
    }

    fn check_interleaving(&self) -> Result<()> {
        if self.c_points.len() != self.v_points.len() + 1 {
            return Err(Error::Pattern(format!(
                "{} c-points need {} v-points, got {}",
                self.c_points.len(),
                self.c_points.len().saturating_sub(1),
                self.v_points.len()
            )));
        }
        for (k, v) in self.v_points.iter().enumerate() {
            let lo = self.c_points[k].value();
            let hi = self.c_points[k + 1].value();
            if !(lo < *v && *v < hi) || !v.is_finite() {
                return Err(Error::Pattern(format!("v-point {v} is not between {lo} and {hi}")));
            }
        }
        for (k, c) in self.c_points.iter().enumerate() {
            let interior = k > 0 && k + 1 < self.c_points.len();
            if interior && !c.is_finite() {
                return Err(Error::Pattern("only the outer c-points may be infinite".into()));
            }
            if k == 0 && *c == Ext::PosInf && self.c_points.len() > 1 {
                return Err(Error::Pattern("c₀ = +∞ leaves no room for further points".into()));
            }
        }
        Ok(())
    }

    /// Number of v-points (the N of the class).
    pub fn n(&self) -> usize {
        self.v_points.len()
    }

    /// Smallest distance between a finite c-point and a v-point.
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for c in &self.c_points {
            if let Ext::Finite(c) = c {
                for v in &self.v_points {
                    m = m.min((c - v).abs());
                }
            }
        }
        m
    }

    /// Hard gate |c_k − v_j| ≥ 2ε for the given c-points.
    pub fn check_separation_for(&self, sources: &[Ext], eps: f64) -> Result<()> {
        for c in sources {
            if let Ext::Finite(c) = c {
                for v in &self.v_points {
                    let gap = (c - v).abs();
                    if gap < 2.0 * eps * (1.0 - 1e-12) {
                        return Err(Error::ClassGate(format!(
                            "|c - v| = {gap} < 2·eps = {} for c = {c}, v = {v}",
                            2.0 * eps
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_separation(&self, eps: f64) -> Result<()> {
        self.check_separation_for(&self.c_points, eps)
    }
}

/// A real polynomial, coefficients in increasing powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Antiderivative taking the value `at_value` at `at`.
    pub fn integrate(&self, at: f64, at_value: f64) -> Poly {
        let mut c = vec![0.0];
        for (k, a) in self.0.iter().enumerate() {
            c.push(a / (k + 1) as f64);
        }
        let mut p = Poly(c);
        p.0[0] = at_value - p.eval(at);
        p
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }
}

/// Piecewise polynomial f''' integrated three times from anchor data at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pub knots: Vec<f64>,
    /// `[f, f', f'', f''']` on each of the `knots.len() + 1` intervals.
    pieces: Vec<[Poly; 4]>,
}

impl PiecewisePoly {
    pub fn new(knots: Vec<f64>, f3: Vec<Vec<f64>>, f0: f64, f1_0: f64, f2_0: f64) -> Result<Self> {
        if f3.len() != knots.len() + 1 {
            return Err(Error::Config(format!(
                "{} knots need {} f''' pieces, got {}",
                knots.len(),
                knots.len() + 1,
                f3.len()
            )));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::Config("knots must be finite and strictly increasing".into()));
        }
        let home = knots.iter().filter(|k| **k <= 0.0).count();
        let build = |p3: &Poly, at: f64, v: [f64; 3]| -> [Poly; 4] {
            let p2 = p3.integrate(at, v[2]);
            let p1 = p2.integrate(at, v[1]);
            let p0 = p1.integrate(at, v[0]);
            [p0, p1, p2, p3.clone()]
        };
        let mut pieces: Vec<Option<[Poly; 4]>> = vec![None; f3.len()];
        pieces[home] = Some(build(&Poly(f3[home].clone()), 0.0, [f0, f1_0, f2_0]));
        for i in home + 1..f3.len() {
            let k = knots[i - 1];
            let prev = pieces[i - 1].as_ref().unwrap();
            let vals = [prev[0].eval(k), prev[1].eval(k), prev[2].eval(k)];
            pieces[i] = Some(build(&Poly(f3[i].clone()), k, vals));
        }
        for i in (0..home).rev() {
            let k = knots[i];
            let next = pieces[i + 1].as_ref().unwrap();
            let vals = [next[0].eval(k), next[1].eval(k), next[2].eval(k)];
            pieces[i] = Some(build(&Poly(f3[i].clone()), k, vals));
        }
        Ok(PiecewisePoly { knots, pieces: pieces.into_iter().map(Option::unwrap).collect() })
    }

    fn deriv(&self, r: usize, t: f64) -> f64 {
        let i = self.knots.iter().filter(|k| **k <= t).count();
        self.pieces[i][r].eval(t)
    }

    /// True when f''' vanishes identically on some piece.
    pub fn has_flat_piece(&self) -> bool {
        self.pieces.iter().any(|p| p[3].is_zero())
    }
}

/// The analytic families shipped with the library plus user polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// e^{sign·t}
    Exp { sign: f64 },
    /// sign·t³
    Cubic { sign: f64 },
    /// |t|^p, p > 2
    Power { p: f64 },
    /// t⁴/24 − a t³/6
    QuarticPlus { a: f64 },
    /// −(t − c)⁴
    QuarticMinus { c: f64 },
    /// t⁵/60 − d t³/6
    Quintic { d: f64 },
    /// e^t glued at 0 to a C² partner with f''' = −e^{t/α}
    TwoExp { alpha: f64 },
    /// −t⁵/60 for t ≤ 0, t⁴/24 for t > 0
    Example6,
    Custom(PiecewisePoly),
}

/// A boundary function together with its growth parameter and sign pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction {
    pub family: Family,
    pub eps0: f64,
    pub pattern: SignPattern,
}

impl BoundaryFunction {
    /// Built-in family with its declared growth parameter and pattern.
    pub fn builtin(family: Family) -> Result<Self> {
        use Ext::*;
        let (eps0, c, v) = match &family {
            Family::Exp { sign } => {
                check_sign(*sign)?;
                (1.0, vec![if *sign > 0.0 { PosInf } else { NegInf }], vec![])
            }
            Family::Cubic { sign } => {
                check_sign(*sign)?;
                (f64::INFINITY, vec![if *sign > 0.0 { PosInf } else { NegInf }], vec![])
            }
            Family::Power { p } => {
                if !(*p > 2.0) {
                    return Err(Error::Config(format!("power needs p > 2, got {p}")));
                }
                (f64::INFINITY, vec![NegInf, PosInf], vec![0.0])
            }
            Family::QuarticPlus { a } => (f64::INFINITY, vec![NegInf, PosInf], vec![*a]),
            Family::QuarticMinus { c } => (f64::INFINITY, vec![Finite(*c)], vec![]),
            Family::Quintic { d } => {
                if *d > 0.0 {
                    (f64::INFINITY, vec![Finite(-d.sqrt()), PosInf], vec![d.sqrt()])
                } else {
                    (f64::INFINITY, vec![PosInf], vec![])
                }
            }
            Family::TwoExp { alpha } => {
                if !(*alpha > 0.0) {
                    return Err(Error::Config(format!("two-exp needs alpha > 0, got {alpha}")));
                }
                (1.0, vec![NegInf, PosInf], vec![0.0])
            }
            Family::Example6 => (f64::INFINITY, vec![NegInf, PosInf], vec![0.0]),
            Family::Custom(_) => {
                return Err(Error::Config("custom functions need an explicit pattern".into()));
            }
        };
        Ok(BoundaryFunction { family, eps0, pattern: SignPattern::new(c, v)? })
    }

    /// Custom piecewise polynomial; the pattern is detected on `search_box`
    /// and must contain exactly `declared_n` v-points.
    pub fn custom(poly: PiecewisePoly, eps0: f64, declared_n: usize, search_box: (f64, f64)) -> Result<Self> {
        let family = Family::Custom(poly);
        let mut f = BoundaryFunction { family, eps0, pattern: SignPattern { c_points: vec![], v_points: vec![] } };
        f.pattern = detect_pattern(&|t| f.f3(t), search_box, 4096, Some(declared_n))?;
        Ok(f)
    }

    /// Parses a registry name such as `exp+`, `power 3`, `quintic(1.5)`.
    pub fn from_name(spec: &str) -> Result<Self> {
        let s = spec.trim();
        let (name, arg) = match s.find(['(', ' ']) {
            Some(i) => {
                let rest = s[i..].trim().trim_start_matches('(').trim_end_matches(')').trim();
                (&s[..i], Some(rest))
            }
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| Error::Config(format!("{name} needs a parameter {what}")))?;
            a.parse::<f64>().map_err(|_| Error::Config(format!("bad parameter {a:?} for {name}")))
        };
        let family = match name {
            "exp+" | "exp" => Family::Exp { sign: 1.0 },
            "exp-" => Family::Exp { sign: -1.0 },
            "cubic+" | "cubic" => Family::Cubic { sign: 1.0 },
            "cubic-" => Family::Cubic { sign: -1.0 },
            "power" => Family::Power { p: num("p")? },
            "quartic+" => Family::QuarticPlus { a: num("a")? },
            "quartic-" => Family::QuarticMinus { c: num("c")? },
            "quintic" => Family::Quintic { d: num("d")? },
            "two-exp" => Family::TwoExp { alpha: num("alpha")? },
            "example6" => Family::Example6,
            _ => return Err(Error::Config(format!("unknown function {spec:?}"))),
        };
        BoundaryFunction::builtin(family)
    }

    /// Short display name.
    pub fn name(&self) -> String {
        match &self.family {
            Family::Exp { sign } => if *sign > 0.0 { "exp+" } else { "exp-" }.into(),
            Family::Cubic { sign } => if *sign > 0.0 { "cubic+" } else { "cubic-" }.into(),
            Family::Power { p } => format!("power({p})"),
            Family::QuarticPlus { a } => format!("quartic+({a})"),
            Family::QuarticMinus { c } => format!("quartic-({c})"),
            Family::Quintic { d } => format!("quintic({d})"),
            Family::TwoExp { alpha } => format!("two-exp({alpha})"),
            Family::Example6 => "example6".into(),
            Family::Custom(_) => "custom".into(),
        }
    }

    /// r-th derivative, r ∈ 0..=3.
    pub fn deriv(&self, r: usize, t: f64) -> f64 {
        match &self.family {
            Family::Exp { sign } => sign.powi(r as i32) * (sign * t).exp(),
            Family::Cubic { sign } => {
                sign * match r {
                    0 => t * t * t,
                    1 => 3.0 * t * t,
                    2 => 6.0 * t,
                    _ => 6.0,
                }
            }
            Family::Power { p } => {
                let a = t.abs();
                let s = if t > 0.0 {
                    1.0
                } else if t < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                match r {
                    0 => a.powf(*p),
                    1 => p * a.powf(p - 1.0) * s,
                    2 => p * (p - 1.0) * a.powf(p - 2.0),
                    _ => {
                        if t == 0.0 {
                            0.0
                        } else {
                            p * (p - 1.0) * (p - 2.0) * a.powf(p - 3.0) * s
                        }
                    }
                }
            }
            Family::QuarticPlus { a } => match r {
                0 => t.powi(4) / 24.0 - a * t.powi(3) / 6.0,
                1 => t.powi(3) / 6.0 - a * t * t / 2.0,
                2 => t * t / 2.0 - a * t,
                _ => t - a,
            },
            Family::QuarticMinus { c } => {
                let s = t - c;
                match r {
                    0 => -s.powi(4),
                    1 => -4.0 * s.powi(3),
                    2 => -12.0 * s * s,
                    _ => -24.0 * s,
                }
            }
            Family::Quintic { d } => match r {
                0 => t.powi(5) / 60.0 - d * t.powi(3) / 6.0,
                1 => t.powi(4) / 12.0 - d * t * t / 2.0,
                2 => t.powi(3) / 3.0 - d * t,
                _ => t * t - d,
            },
            Family::TwoExp { alpha } => {
                if t >= 0.0 {
                    t.exp()
                } else {
                    let a = *alpha;
                    let e = (t / a).exp();
                    match r {
                        0 => -a.powi(3) * e + t * t / 2.0 * (1.0 + a) + t * (1.0 + a * a) + 1.0 + a.powi(3),
                        1 => -a * a * e + t * (1.0 + a) + 1.0 + a * a,
                        2 => -a * e + 1.0 + a,
                        _ => -e,
                    }
                }
            }
            Family::Example6 => {
                if t <= 0.0 {
                    match r {
                        0 => -t.powi(5) / 60.0,
                        1 => -t.powi(4) / 12.0,
                        2 => -t.powi(3) / 3.0,
                        _ => -t * t,
                    }
                } else {
                    match r {
                        0 => t.powi(4) / 24.0,
                        1 => t.powi(3) / 6.0,
                        2 => t * t / 2.0,
                        _ => t,
                    }
                }
            }
            Family::Custom(p) => p.deriv(r, t),
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        self.deriv(0, t)
    }
    pub fn f1(&self, t: f64) -> f64 {
        self.deriv(1, t)
    }
    pub fn f2(&self, t: f64) -> f64 {
        self.deriv(2, t)
    }
    pub fn f3(&self, t: f64) -> f64 {
        self.deriv(3, t)
    }

    /// Points where some derivative loses smoothness.
    pub fn breaks(&self) -> Vec<f64> {
        match &self.family {
            Family::Power { .. } | Family::TwoExp { .. } | Family::Example6 => vec![0.0],
            Family::Custom(p) => p.knots.clone(),
            _ => vec![],
        }
    }

    /// Quadrature context aware of this function's breakpoints and growth.
    pub fn integrator(&self, settings: QuadratureSettings) -> Integrator {
        Integrator::new(settings, self.breaks(), self.eps0)
    }

    /// Typical magnitude of f near the pattern, used to scale tolerances.
    pub fn scale(&self, x1: f64, eps: f64) -> f64 {
        let mut s: f64 = 1.0;
        for k in [-1.0, 0.0, 1.0] {
            let t = x1 + k * eps;
            s = s.max(self.f(t).abs()).max((self.f1(t) * eps).abs());
        }
        s
    }

    /// Advisory class-membership findings; empty when nothing looks off.
    pub fn advisories(&self) -> Vec<String> {
        let mut out = Vec::new();
        let scale = 1.0;
        for &t in &[-2.3, -0.7, 0.45, 1.9] {
            if self.breaks().iter().any(|b| (b - t).abs() < 1e-3) {
                continue;
            }
            let h = 1e-5 * scale;
            for r in 0..3 {
                let fd = (self.deriv(r, t + h) - self.deriv(r, t - h)) / (2.0 * h);
                let an = self.deriv(r + 1, t);
                if (fd - an).abs() > 1e-5 * an.abs().max(1.0) {
                    out.push(format!("derivative {} disagrees with finite differences at t = {t}", r + 1));
                }
            }
        }
        if self.eps0.is_finite() {
            for r in 0..4 {
                for sign in [-1.0, 1.0] {
                    let w: Vec<f64> = [10.0, 20.0, 30.0]
                        .iter()
                        .map(|k| {
                            let t = sign * k * self.eps0;
                            self.deriv(r, t).abs() * (-t.abs() / self.eps0).exp()
                        })
                        .collect();
                    if !(w[1] <= w[0] && w[2] <= w[1]) {
                        out.push(format!("weighted derivative {r} does not decay toward {}∞", if sign > 0.0 { "+" } else { "-" }));
                    }
                }
            }
        }
        if let Family::Custom(p) = &self.family {
            if p.has_flat_piece() {
                out.push("f''' vanishes identically on an interval; the class requires f''' ≠ 0 a.e.".into());
            }
        }
        out
    }
}

fn check_sign(s: f64) -> Result<()> {
    if s == 1.0 || s == -1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("sign must be ±1, got {s}")))
    }
}

/// Locates the sign changes of `f3` on `search_box` by a grid scan plus bisection.
///
/// Each change is classified by the signs on either side; the far signs decide
/// whether c₀ = −∞ and whether the last c-point is +∞.
pub fn detect_pattern(
    f3: &dyn Fn(f64) -> f64,
    search_box: (f64, f64),
    grid: usize,
    declared_n: Option<usize>,
) -> Result<SignPattern> {
    let (lo, hi) = search_box;
    if !(lo < hi) || grid < 2 {
        return Err(Error::Argument("search box must be a nonempty interval with grid ≥ 2".into()));
    }
    let h = (hi - lo) / grid as f64;
    let scale = 1.0 + lo.abs().max(hi.abs());
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for k in 0..=grid {
        let t = lo + h * k as f64;
        let y = f3(t);
        if y != 0.0 {
            samples.push((t, y.signum()));
        }
    }
    if samples.is_empty() {
        return Err(Error::Pattern("f''' vanishes on the whole search box".into()));
    }
    let mut changes: Vec<(f64, bool)> = Vec::new();
    for w in samples.windows(2) {
        let (t0, s0) = w[0];
        let (t1, s1) = w[1];
        if s0 != s1 {
            let root = find_root_monotone(&|t| f3(t).signum(), t0, t1, 1e-12 * scale)?;
            changes.push((root, s0 > 0.0));
        }
    }
    let first = samples[0].1;
    let last = samples[samples.len() - 1].1;
    let mut c = Vec::new();
    let mut v = Vec::new();
    if first < 0.0 {
        c.push(Ext::NegInf);
    }
    for (t, plus_to_minus) in changes {
        if plus_to_minus {
            c.push(Ext::Finite(t));
        } else {
            v.push(t);
        }
    }
    if last > 0.0 {
        c.push(Ext::PosInf);
    }
    let p = SignPattern::new(c, v)?;
    if let Some(n) = declared_n {
        if p.n() != n {
            return Err(Error::Pattern(format!("declared {n} v-points, found {}", p.n())));
        }
    }
    Ok(p)
}

/// Value-side and argument-side normalizations.
///
/// The original function is `a·g(αt + β) + b t² + c t + d`, where the supplied
/// Bellman value is the one for `sign(a)·g` at the normalized point and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl AffineTransform {
    pub fn identity() -> Self {
        AffineTransform { a: 1.0, b: 0.0, c: 0.0, d: 0.0, alpha: 1.0, beta: 0.0 }
    }

    fn check(&self) -> Result<()> {
        if self.alpha == 0.0 || !self.alpha.is_finite() {
            return Err(Error::Argument("alpha must be nonzero".into()));
        }
        if self.a == 0.0 {
            return Err(Error::Argument("a must be nonzero".into()));
        }
        Ok(())
    }

    /// Point and radius of the normalized problem for an original (x, ε).
    pub fn forward_point(&self, x: Point, eps: f64) -> Result<(Point, f64)> {
        self.check()?;
        let (al, be) = (self.alpha, self.beta);
        let y = Point::new(al * x.x1 + be, al * al * x.x2 + 2.0 * al * be * x.x1 + be * be);
        Ok((y, al.abs() * eps))
    }

    /// Transform undoing this one: the original function expressed through the normalized one.
    pub fn inverse(&self) -> Result<AffineTransform> {
        self.check()?;
        // sign(a)·g(s) = (F(t) − b t² − c t − d)/|a| with t = (s − β)/α.
        let ia = 1.0 / self.alpha;
        let ib = -self.beta / self.alpha;
        let sa = 1.0 / self.a.abs();
        // −sa·(b t² + c t + d) rewritten in s.
        let b2 = -sa * self.b * ia * ia;
        let c2 = -sa * (2.0 * self.b * ia * ib + self.c * ia);
        let d2 = -sa * (self.b * ib * ib + self.c * ib + self.d);
        Ok(AffineTransform { a: sa, b: b2, c: c2, d: d2, alpha: ia, beta: ib })
    }
}

/// Bellman value, point and radius for the original function, given the
/// value `b_value` of the normalized problem at (`y`, `eps_n`).
pub fn affine_pushforward(b_value: f64, y: Point, t: &AffineTransform, eps_n: f64) -> Result<(f64, Point, f64)> {
    t.check()?;
    let (al, be) = (t.alpha, t.beta);
    let x1 = (y.x1 - be) / al;
    let x2 = (y.x2 - 2.0 * be * y.x1 + be * be) / (al * al);
    let value = t.a.abs() * b_value + t.b * x2 + t.c * x1 + t.d;
    Ok((value, Point::new(x1, x2), eps_n / al.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_builtins() -> Vec<BoundaryFunction> {
        [
            "exp+", "exp-", "cubic+", "cubic-", "power 3", "power 2.5", "quartic+(1)", "quartic-(0.5)",
            "quintic(1.5)", "two-exp(0.7)", "example6",
        ]
        .iter()
        .map(|n| BoundaryFunction::from_name(n).unwrap())
        .collect()
    }

    #[test]
    fn derivatives_are_consistent() {
        for f in all_builtins() {
            for &t in &[-1.7, -0.3, 0.6, 2.2] {
                let h = 1e-5;
                for r in 0..3 {
                    let fd = (f.deriv(r, t + h) - f.deriv(r, t - h)) / (2.0 * h);
                    let an = f.deriv(r + 1, t);
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "{} r={r} t={t}: {fd} vs {an}", f.name());
                }
            }
        }
    }

    #[test]
    fn builtins_have_no_advisories() {
        for f in all_builtins() {
            assert!(f.advisories().is_empty(), "{}: {:?}", f.name(), f.advisories());
        }
    }

    #[test]
    fn two_exp_is_c2_at_the_junction() {
        let f = BoundaryFunction::from_name("two-exp(0.4)").unwrap();
        for r in 0..3 {
            assert!((f.deriv(r, -1e-12) - f.deriv(r, 0.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn detection_reproduces_declared_patterns() {
        for f in all_builtins() {
            let got = detect_pattern(&|t| f.f3(t), (-7.3, 6.1), 2000, Some(f.pattern.n())).unwrap();
            assert_eq!(got.c_points.len(), f.pattern.c_points.len(), "{}", f.name());
            for (g, e) in got.c_points.iter().zip(&f.pattern.c_points) {
                match (g, e) {
                    (Ext::Finite(a), Ext::Finite(b)) => assert!((a - b).abs() < 1e-10, "{}", f.name()),
                    _ => assert_eq!(g, e, "{}", f.name()),
                }
            }
            for (g, e) in got.v_points.iter().zip(&f.pattern.v_points) {
                assert!((g - e).abs() < 1e-10, "{}: {g} vs {e}", f.name());
            }
        }
    }

    #[test]
    fn quartic_and_cubic_and_example6_patterns() {
        let p = detect_pattern(&|t| t - 1.0, (-5.0, 5.0), 100, Some(1)).unwrap();
        assert_eq!(p.c_points, vec![Ext::NegInf, Ext::PosInf]);
        assert!((p.v_points[0] - 1.0).abs() < 1e-11);
        let p = detect_pattern(&|_| 6.0, (-5.0, 5.0), 100, Some(0)).unwrap();
        assert_eq!(p.c_points, vec![Ext::PosInf]);
        let e6 = |t: f64| if t <= 0.0 { -t * t } else { t };
        let p = detect_pattern(&e6, (-5.0, 5.0), 101, Some(1)).unwrap();
        assert!(p.v_points[0].abs() < 1e-11);
    }

    #[test]
    fn declared_count_mismatch_is_a_pattern_error() {
        let r = detect_pattern(&|t| t - 1.0, (-5.0, 5.0), 100, Some(2));
        assert!(matches!(r, Err(Error::Pattern(_))));
    }

    #[test]
    fn separation_gate() {
        let f = BoundaryFunction::from_name("quintic(1)").unwrap();
        assert!(f.pattern.check_separation(1.0).is_ok());
        assert!(matches!(f.pattern.check_separation(1.1), Err(Error::ClassGate(_))));
    }

    #[test]
    fn custom_polynomial_reproduces_example6() {
        let p = PiecewisePoly::new(vec![0.0], vec![vec![0.0, 0.0, -1.0], vec![0.0, 1.0]], 0.0, 0.0, 0.0).unwrap();
        let f = BoundaryFunction::custom(p, f64::INFINITY, 1, (-5.0, 5.0)).unwrap();
        let g = BoundaryFunction::from_name("example6").unwrap();
        for &t in &[-2.0, -0.5, 0.3, 1.7] {
            for r in 0..4 {
                assert!((f.deriv(r, t) - g.deriv(r, t)).abs() < 1e-12, "r={r} t={t}");
            }
        }
    }

    #[test]
    fn custom_flat_piece_is_flagged() {
        let p = PiecewisePoly::new(vec![-1.0, 1.0], vec![vec![-1.0], vec![0.0], vec![1.0]], 0.0, 0.0, 0.0).unwrap();
        let f = BoundaryFunction::custom(p, f64::INFINITY, 1, (-5.0, 5.0)).unwrap();
        assert!(f.advisories().iter().any(|s| s.contains("vanishes")));
    }

    #[test]
    fn registry_rejects_unknown_and_bad_params() {
        assert!(matches!(BoundaryFunction::from_name("sine"), Err(Error::Config(_))));
        assert!(matches!(BoundaryFunction::from_name("power 1.5"), Err(Error::Config(_))));
        assert!(matches!(BoundaryFunction::from_name("quintic"), Err(Error::Config(_))));
    }

    #[test]
    fn pushforward_value_side_constant() {
        let t = AffineTransform { d: 5.0, ..AffineTransform::identity() };
        let (v, x, e) = affine_pushforward(2.0, Point::new(0.0, 1.0), &t, 1.0).unwrap();
        assert_eq!((v, x, e), (7.0, Point::new(0.0, 1.0), 1.0));
    }

    #[test]
    fn pushforward_reflection() {
        let t = AffineTransform { alpha: -1.0, ..AffineTransform::identity() };
        let (y, en) = t.forward_point(Point::new(1.0, 2.0), 1.0).unwrap();
        assert_eq!((y, en), (Point::new(-1.0, 2.0), 1.0));
        let (_, x, e) = affine_pushforward(0.0, y, &t, en).unwrap();
        assert_eq!((x, e), (Point::new(1.0, 2.0), 1.0));
    }

    #[test]
    fn pushforward_negative_amplitude_gives_flipped_infimum() {
        // For g = e^t the infimum on the upper boundary is e^{x₁+ε}/(1+ε);
        // the supremum for −e^t is its negative.
        let eps = 0.5;
        let x = Point::new(0.3, 0.09 + 0.25);
        let bmin = (x.x1 + eps).exp() / (1.0 + eps);
        let t = AffineTransform { a: -1.0, ..AffineTransform::identity() };
        let (v, _, _) = affine_pushforward(-bmin, x, &t, eps).unwrap();
        assert!((v + bmin).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_is_rejected() {
        let t = AffineTransform { alpha: 0.0, ..AffineTransform::identity() };
        assert!(matches!(affine_pushforward(1.0, Point::new(0.0, 0.0), &t, 1.0), Err(Error::Argument(_))));
    }

    proptest! {
        #[test]
        fn pushforward_then_inverse_is_identity(
            a in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0], b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
            al in prop_oneof![-2.0f64..-0.3, 0.3f64..2.0], be in -1.0f64..1.0,
            x1 in -1.0f64..1.0, h in 0.0f64..1.0, eps in 0.2f64..1.5, bv in -3.0f64..3.0,
        ) {
            let t = AffineTransform { a, b, c, d, alpha: al, beta: be };
            let x = Point::new(x1, x1 * x1 + h * eps * eps);
            let (y, en) = t.forward_point(x, eps).unwrap();
            let (v, x_back, e_back) = affine_pushforward(bv, y, &t, en).unwrap();
            prop_assert!((x_back.x1 - x.x1).abs() < 1e-14 * (1.0 + x.x1.abs()) * 4.0);
            prop_assert!((x_back.x2 - x.x2).abs() < 1e-13);
            prop_assert!((e_back - eps).abs() < 1e-15);
            // Undo through the inverse transform: value of the normalized problem comes back.
            let ti = t.inverse().unwrap();
            let (w, y_back, en_back) = affine_pushforward(v, x, &ti, eps).unwrap();
            prop_assert!((w - bv).abs() < 1e-12 * (1.0 + bv.abs() + v.abs()) * 10.0);
            prop_assert!((y_back.x1 - y.x1).abs() < 1e-13 * (1.0 + y.x1.abs()));
            prop_assert!((y_back.x2 - y.x2).abs() < 1e-12 * (1.0 + y.x2.abs()));
            prop_assert!((en_back - en).abs() < 1e-14);
        }
    }
}
