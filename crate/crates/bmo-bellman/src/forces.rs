//! Force functions, their tails and balance points, and the cleaning and
//! compression steps that turn the raw family into a completely balanced one.

use crate::boundary::BoundaryFunction;
use crate::cups::{differentials_integral, grow_cup, CupFamily};
use crate::error::{Error, Result};
use crate::geometry::Side;
use crate::numerics::{find_root_monotone, Ext, QuadratureSettings};
use crate::tangents::{Anchor, TangentCoefficient};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A force with its source c and current screen [a, b] (a = b = c when ℓ = 0).
#[derive(Debug, Clone)]
pub struct Force {
    pub source: Ext,
    pub cup: Option<Arc<CupFamily>>,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    f: Arc<BoundaryFunction>,
    settings: QuadratureSettings,
}

impl Force {
    /// A force from ±∞; its screen is empty.
    pub fn at_infinity(source: Ext, f: Arc<BoundaryFunction>, eps: f64, settings: QuadratureSettings) -> Result<Self> {
        if source.is_finite() {
            return Err(Error::Argument("expected an infinite source".into()));
        }
        let x = source.value();
        Ok(Force { source, cup: None, a: x, b: x, eps, f, settings })
    }

    /// A finite-source force with the full screen of its cup.
    pub fn with_cup(cup: Arc<CupFamily>, eps: f64, settings: QuadratureSettings) -> Result<Self> {
        let top = cup.top()?;
        let f = Arc::new(cup.function().clone());
        Ok(Force { source: Ext::Finite(cup.origin_c), cup: Some(cup), a: top.a, b: top.b, eps, f, settings })
    }

    /// Copy whose quadrature absolute tolerance is scaled by `size` (floored at 1e-15).
    fn with_abs_tol(&self, size: f64) -> Self {
        let mut g = self.clone();
        g.settings.abs_tol *= size.max(1e-15);
        g
    }

    pub fn ell(&self) -> f64 {
        if self.source.is_finite() {
            self.b - self.a
        } else {
            0.0
        }
    }

    pub fn is_full(&self) -> bool {
        self.cup.as_ref().is_some_and(|c| c.full && (self.ell() - c.ell_max).abs() <= 1e-12 * self.eps)
    }

    /// Coefficient of the L tangents left of the screen (or from +∞).
    pub fn left_branch(&self) -> Result<TangentCoefficient> {
        let anchor = match self.source {
            Ext::PosInf => Anchor::FromInfinity,
            Ext::Finite(_) => Anchor::ScreenEnd { a0: self.a, b0: self.b },
            Ext::NegInf => return Err(Error::Argument("a force from −∞ has no left branch".into())),
        };
        TangentCoefficient::new(self.f.clone(), Side::L, anchor, self.eps, self.settings)
    }

    /// Coefficient of the R tangents right of the screen (or from −∞).
    pub fn right_branch(&self) -> Result<TangentCoefficient> {
        let anchor = match self.source {
            Ext::NegInf => Anchor::FromInfinity,
            Ext::Finite(_) => Anchor::ScreenEnd { a0: self.a, b0: self.b },
            Ext::PosInf => return Err(Error::Argument("a force from +∞ has no right branch".into())),
        };
        TangentCoefficient::new(self.f.clone(), Side::R, anchor, self.eps, self.settings)
    }

    /// F(u, ℓ) for the current screen.
    pub fn value(&self, u: f64) -> Result<f64> {
        match self.source {
            Ext::PosInf => self.left_branch()?.force(u),
            Ext::NegInf => self.right_branch()?.force(u),
            Ext::Finite(c) => {
                if u < self.a {
                    self.left_branch()?.force(u)
                } else if u > self.b {
                    self.right_branch()?.force(u)
                } else {
                    self.on_screen(c, u)
                }
            }
        }
    }

    /// On the screen the force does not depend on ℓ: −D_L(u, b̃(u)) left of c, D_R(ã(u), u) right of it.
    fn on_screen(&self, c: f64, u: f64) -> Result<f64> {
        if u == c {
            return Ok(0.0);
        }
        let cup = self.cup.as_ref().expect("finite force carries a cup");
        let q = self.f.integrator(self.settings);
        if u < c {
            let b = cup.partner_b(u)?;
            Ok(-differentials_integral(u, b, &self.f, &q)?.0)
        } else {
            let a = cup.partner_a(u)?;
            Ok(differentials_integral(a, u, &self.f, &q)?.1)
        }
    }

    /// Shrinks the screen so that its left end is at `a`.
    pub fn set_left_end(&mut self, a: f64) -> Result<()> {
        let cup = self.cup.as_ref().ok_or_else(|| Error::Argument("infinite force has no screen".into()))?;
        self.b = cup.partner_b(a)?;
        self.a = a;
        Ok(())
    }

    /// Shrinks the screen so that its right end is at `b`.
    pub fn set_right_end(&mut self, b: f64) -> Result<()> {
        let cup = self.cup.as_ref().ok_or_else(|| Error::Argument("infinite force has no screen".into()))?;
        self.a = cup.partner_a(b)?;
        self.b = b;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tails {
    pub t_minus: Ext,
    pub t_plus: Ext,
}

impl Tails {
    /// Whether the point p (possibly infinite) lies in [t⁻, t⁺].
    pub fn contains(&self, p: Ext) -> bool {
        match p {
            Ext::NegInf => self.t_minus == Ext::NegInf,
            Ext::PosInf => self.t_plus == Ext::PosInf,
            Ext::Finite(x) => self.t_minus.value() <= x && x <= self.t_plus.value(),
        }
    }
}

/// Range beyond which a tail is declared infinite: 60ε past the outermost finite pattern point.
pub fn horizon(f: &BoundaryFunction, eps: f64) -> (f64, f64) {
    let mut pts: Vec<f64> = f.pattern.v_points.clone();
    pts.extend(f.pattern.c_points.iter().filter(|c| c.is_finite()).map(|c| c.value()));
    let lo = pts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = pts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo - 60.0 * eps, hi + 60.0 * eps)
    } else {
        (-60.0 * eps, 60.0 * eps)
    }
}

/// Marches away from the source until the force changes sign.
///
/// Steps of ε/16 use the one-step recursion of the force ODE; the first sign
/// violation is refined by bisection on the directly evaluated force.
pub fn tails(force: &Force, f: &BoundaryFunction) -> Result<Tails> {
    let (h_lo, h_hi) = horizon(f, force.eps);
    let first_v = f.pattern.v_points.first().copied();
    let last_v = f.pattern.v_points.last().copied();
    let t_minus = match force.source {
        Ext::NegInf => Ext::NegInf,
        Ext::PosInf => match last_v {
            None => Ext::NegInf,
            Some(v) => march(force, f, v, -1.0, h_lo)?,
        },
        Ext::Finite(_) => march(force, f, force.a, -1.0, h_lo)?,
    };
    let t_plus = match force.source {
        Ext::PosInf => Ext::PosInf,
        Ext::NegInf => match first_v {
            None => Ext::PosInf,
            Some(v) => march(force, f, v, 1.0, h_hi)?,
        },
        Ext::Finite(_) => march(force, f, force.b, 1.0, h_hi)?,
    };
    Ok(Tails { t_minus, t_plus })
}

fn march(force: &Force, f: &BoundaryFunction, start: f64, dir: f64, limit: f64) -> Result<Ext> {
    let eps = force.eps;
    let q = f.integrator(QuadratureSettings::default());
    let f3 = |t: f64| f.f3(t);
    // Sign the tail must keep: F ≥ 0 going left, F ≤ 0 going right.
    let want = -dir;
    let h = eps / 16.0;
    let decay = (-h / eps).exp();
    let mut u = start;
    let mut fu = force.value(u)?;
    let mut peak = fu.abs();
    // The homogeneous part decays like e^{-dist/ε}, so the noise floor is scaled the same way.
    let mut scale = 1.0_f64;
    let violated = |val: f64, peak: f64, scale: f64| want * val < -1e-12 * (1.0 + peak) * scale.max(1e-280);
    if violated(fu, peak, scale) {
        return Ok(Ext::Finite(start));
    }
    loop {
        let next = u + dir * h;
        if (dir < 0.0 && next < limit) || (dir > 0.0 && next > limit) {
            return Ok(if dir < 0.0 { Ext::NegInf } else { Ext::PosInf });
        }
        let step = if dir < 0.0 {
            q.weighted(&f3, Ext::Finite(next), Ext::Finite(u), -1.0, eps, next)?
        } else {
            q.weighted(&f3, Ext::Finite(u), Ext::Finite(next), 1.0, eps, next)?
        };
        let fnext = decay * fu + step;
        scale *= decay;
        peak = peak.max(fnext.abs() / scale.max(1e-280));
        if violated(fnext, peak, scale) {
            let g = |t: f64| force.value(t).map(|v| v * want).unwrap_or(f64::NAN);
            // the last accepted step may already sit on the zero
            if g(u) <= 0.0 {
                return Ok(Ext::Finite(u));
            }
            let root = find_root_monotone(&g, u, next, 1e-10)?;
            return Ok(Ext::Finite(root));
        }
        u = next;
        fu = fnext;
    }
}

/// Outcome of balancing two neighbouring forces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Balance {
    /// F₁(v) + F₂(v) = 0.
    At { v: f64 },
    /// The left force's tail swallows the right source.
    LeftDominates,
    /// The right force's tail swallows the left source.
    RightDominates,
    /// The tails do not meet.
    Gap { lo: f64, hi: f64 },
}

/// Root of F₁ + F₂ on the intersection of the right tail of F₁ and the left tail of F₂.
pub fn balance_point(f1: &Force, t1: &Tails, f2: &Force, t2: &Tails) -> Result<Balance> {
    if t1.contains(f2.source) {
        return Ok(Balance::LeftDominates);
    }
    if t2.contains(f1.source) {
        return Ok(Balance::RightDominates);
    }
    let lo = f1.source.value().max(t2.t_minus.value());
    let hi = f2.source.value().min(t1.t_plus.value());
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Ok(Balance::Gap { lo, hi });
    }
    let s = |u: f64| match (f1.value(u), f2.value(u)) {
        (Ok(a), Ok(b)) => a + b,
        _ => f64::NAN,
    };
    let tol = 1e-13 * (1.0 + lo.abs().max(hi.abs()));
    let v = find_root_monotone(&s, lo, hi, tol)?;
    // Far out both forces can be far below the quadrature's absolute floor;
    // redo the root with the floor scaled to their size.
    let size = f1.value(v).map(f64::abs).unwrap_or(1.0);
    if size < 1e-6 {
        let (g1, g2) = (f1.with_abs_tol(size), f2.with_abs_tol(size));
        let s = |u: f64| match (g1.value(u), g2.value(u)) {
            (Ok(a), Ok(b)) => a + b,
            _ => f64::NAN,
        };
        if let Ok(v) = find_root_monotone(&s, lo, hi, tol) {
            return Ok(Balance::At { v });
        }
    }
    Ok(Balance::At { v })
}

/// One step of the algorithm, for the diagnostic trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Removed { source: Ext, by: Ext },
    Compressed { source: Ext, direction: Direction, old_ell: f64, new_ell: f64, v: f64 },
    Balanced { pass: usize, points: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftPass,
    RightPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PassOrder {
    #[default]
    LeftFirst,
    RightFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Balanced,
    CompletelyBalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceOptions {
    pub order: PassOrder,
    pub max_passes: usize,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        BalanceOptions { order: PassOrder::LeftFirst, max_passes: 64 }
    }
}

#[derive(Debug, Clone)]
pub struct BalancedFamily {
    pub forces: Vec<Force>,
    pub tails: Vec<Tails>,
    pub balance_points: Vec<f64>,
    pub status: Status,
    pub eps: f64,
    pub trace: Vec<TraceEvent>,
}

/// Tolerance for "the balance point sits on a screen end".
pub fn end_tolerance(v: f64) -> f64 {
    1e-9 * (1.0 + v.abs())
}

/// Removes every force whose source lies in a tail of another remaining force.
pub fn clean(forces: Vec<Force>, f: &BoundaryFunction) -> Result<(Vec<Force>, Vec<TraceEvent>)> {
    let tails: Vec<Tails> = forces.iter().map(|x| tails(x, f)).collect::<Result<_>>()?;
    let (kept, _, events) = clean_with(forces, tails);
    Ok((kept, events))
}

fn clean_with(forces: Vec<Force>, tails: Vec<Tails>) -> (Vec<Force>, Vec<Tails>, Vec<TraceEvent>) {
    let mut alive = vec![true; forces.len()];
    let mut events = Vec::new();
    loop {
        let mut hit = None;
        'outer: for j in 0..forces.len() {
            if !alive[j] {
                continue;
            }
            for k in 0..forces.len() {
                if k != j && alive[k] && tails[k].contains(forces[j].source) {
                    hit = Some((j, k));
                    break 'outer;
                }
            }
        }
        match hit {
            Some((j, k)) => {
                alive[j] = false;
                events.push(TraceEvent::Removed { source: forces[j].source, by: forces[k].source });
            }
            None => break,
        }
    }
    let mut kf = Vec::new();
    let mut kt = Vec::new();
    for ((x, t), a) in forces.into_iter().zip(tails).zip(alive) {
        if a {
            kf.push(x);
            kt.push(t);
        }
    }
    (kf, kt, events)
}

/// Balance points of consecutive forces; dominance means cleaning is incomplete.
fn all_balances(forces: &[Force], tails: &[Tails]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for j in 0..forces.len().saturating_sub(1) {
        match balance_point(&forces[j], &tails[j], &forces[j + 1], &tails[j + 1])? {
            Balance::At { v } => out.push(v),
            Balance::Gap { lo, hi } => {
                return Err(Error::Construction(format!(
                    "tails of forces from {} and {} do not meet ([{lo}, {hi}])",
                    forces[j].source,
                    forces[j + 1].source
                )))
            }
            other => return Err(Error::Construction(format!("uncleaned pair: {other:?}"))),
        }
    }
    Ok(out)
}

/// Runs the whole balancing algorithm for f at radius ε.
pub fn balance_all(
    f: Arc<BoundaryFunction>,
    eps: f64,
    settings: QuadratureSettings,
    opts: BalanceOptions,
) -> Result<BalancedFamily> {
    if !(eps > 0.0 && eps < f.eps0) {
        return Err(Error::Divergent(format!("eps = {eps} must lie in (0, eps0 = {})", f.eps0)));
    }
    let mut trace = Vec::new();
    // Forces whose cups cannot be grown are kept aside: they must be cleaned away.
    let mut forces = Vec::new();
    let mut broken: Vec<(f64, Error)> = Vec::new();
    for c in &f.pattern.c_points {
        match c {
            Ext::Finite(x) => match grow_cup(*x, 2.0 * eps, f.clone(), eps, settings) {
                Ok(cup) => forces.push(Force::with_cup(Arc::new(cup), eps, settings)?),
                Err(e) => broken.push((*x, e)),
            },
            inf => forces.push(Force::at_infinity(*inf, f.clone(), eps, settings)?),
        }
    }
    let tl: Vec<Tails> = forces.iter().map(|x| tails(x, &f)).collect::<Result<_>>()?;
    for (x, e) in broken {
        match forces.iter().zip(&tl).find(|(_, t)| t.contains(Ext::Finite(x))) {
            Some((by, _)) => trace.push(TraceEvent::Removed { source: Ext::Finite(x), by: by.source }),
            None => return Err(e),
        }
    }
    let (mut forces, mut tl, ev) = clean_with(forces, tl);
    trace.extend(ev);
    let sources: Vec<Ext> = forces.iter().map(|x| x.source).collect();
    f.pattern.check_separation_for(&sources, eps)?;

    let passes: [Direction; 2] = match opts.order {
        PassOrder::LeftFirst => [Direction::LeftPass, Direction::RightPass],
        PassOrder::RightFirst => [Direction::RightPass, Direction::LeftPass],
    };
    for pass in 0..opts.max_passes {
        let mut changed = false;
        let mut bp = all_balances(&forces, &tl)?;
        for dir in passes {
            let order: Vec<usize> = match dir {
                Direction::LeftPass => (0..bp.len()).collect(),
                Direction::RightPass => (0..bp.len()).rev().collect(),
            };
            for j in order {
                let v = bp[j];
                let tol = end_tolerance(v);
                let target = match dir {
                    Direction::LeftPass => j + 1,
                    Direction::RightPass => j,
                };
                let fo = &forces[target];
                let Ext::Finite(c) = fo.source else { continue };
                let inside = match dir {
                    Direction::LeftPass => v > fo.a + tol && v < c,
                    Direction::RightPass => v > c && v < fo.b - tol,
                };
                if !inside {
                    continue;
                }
                let old_ell = fo.ell();
                let fo = &mut forces[target];
                match dir {
                    Direction::LeftPass => fo.set_left_end(v)?,
                    Direction::RightPass => fo.set_right_end(v)?,
                }
                trace.push(TraceEvent::Compressed { source: fo.source, direction: dir, old_ell, new_ell: fo.ell(), v });
                tl[target] = tails(&forces[target], &f)?;
                changed = true;
                let (kf, kt, ev) = clean_with(forces, tl);
                let removed = !ev.is_empty();
                forces = kf;
                tl = kt;
                trace.extend(ev);
                bp = all_balances(&forces, &tl)?;
                if removed {
                    break;
                }
            }
        }
        trace.push(TraceEvent::Balanced { pass, points: bp.clone() });
        if !changed {
            let status = completeness(&forces, &bp);
            if status != Status::CompletelyBalanced {
                return Err(Error::Construction("balancing settled without complete balance".into()));
            }
            return Ok(BalancedFamily { forces, tails: tl, balance_points: bp, status, eps, trace });
        }
    }
    Err(Error::NonTermination(opts.max_passes))
}

/// No balance point strictly inside a screen, and every shrunken screen ends at one.
fn completeness(forces: &[Force], bp: &[f64]) -> Status {
    for (j, &v) in bp.iter().enumerate() {
        for fo in [&forces[j], &forces[j + 1]] {
            if fo.source.is_finite() && v > fo.a + end_tolerance(v) && v < fo.b - end_tolerance(v) {
                return Status::Balanced;
            }
        }
    }
    for (j, fo) in forces.iter().enumerate() {
        if fo.source.is_finite() && !fo.is_full() {
            let left = j > 0 && (bp[j - 1] - fo.a).abs() <= end_tolerance(fo.a);
            let right = j < bp.len() && (bp[j] - fo.b).abs() <= end_tolerance(fo.b);
            if !(left || right) {
                return Status::Balanced;
            }
        }
    }
    Status::CompletelyBalanced
}

/// Result of running both pass orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderComparison {
    pub left_first: Vec<f64>,
    pub right_first: Vec<f64>,
    pub max_difference: f64,
    pub diverged: bool,
}

/// Runs both pass orders and reports how far the balance points and screens drift apart.
pub fn compare_orders(f: Arc<BoundaryFunction>, eps: f64, settings: QuadratureSettings) -> Result<OrderComparison> {
    let summary = |fam: &BalancedFamily| -> Vec<f64> {
        let mut v = fam.balance_points.clone();
        for fo in &fam.forces {
            if fo.source.is_finite() {
                v.push(fo.a);
                v.push(fo.b);
            }
        }
        v
    };
    let l = balance_all(f.clone(), eps, settings, BalanceOptions { order: PassOrder::LeftFirst, ..Default::default() })?;
    let r = balance_all(f, eps, settings, BalanceOptions { order: PassOrder::RightFirst, ..Default::default() })?;
    let (a, b) = (summary(&l), summary(&r));
    let max_difference = if a.len() == b.len() {
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(OrderComparison { diverged: max_difference > 1e-8, left_first: a, right_first: b, max_difference })
}
