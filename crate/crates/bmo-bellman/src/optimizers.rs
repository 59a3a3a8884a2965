//! Explicit test functions on [0, 1] that attain the candidate, their
//! moments and their BMO norm.

use crate::boundary::BoundaryFunction;
use crate::candidate::{Figure, Foliation};
use crate::error::{Error, Result};
use crate::forces::end_tolerance;
use crate::geometry::{classify, Point, Side, StripLocation};
use crate::numerics::{Ext, QuadratureSettings};
use crate::tangents::{Anchor, TangentCoefficient};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PieceKind {
    Constant { value: f64 },
    /// φ(s) = ε log((s − l)/(r − l)) + u1, with l ≤ lo.
    LogRampUp { l: f64, r: f64, u1: f64 },
    /// φ(s) = −ε log((r − s)/(r − l)) + u2, with r ≥ hi.
    LogRampDown { l: f64, r: f64, u2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub kind: PieceKind,
}

impl Piece {
    fn value(&self, s: f64, eps: f64) -> f64 {
        match self.kind {
            PieceKind::Constant { value } => value,
            PieceKind::LogRampUp { l, r, u1 } => eps * ((s - l) / (r - l)).ln() + u1,
            PieceKind::LogRampDown { l, r, u2 } => -eps * ((r - s) / (r - l)).ln() + u2,
        }
    }

    /// The piece after the change of variable s ↦ α + βs.
    fn mapped(&self, alpha: f64, beta: f64) -> Piece {
        let m = |t: f64| alpha + beta * t;
        let kind = match self.kind {
            PieceKind::Constant { value } => PieceKind::Constant { value },
            PieceKind::LogRampUp { l, r, u1 } => PieceKind::LogRampUp { l: m(l), r: m(r), u1 },
            PieceKind::LogRampDown { l, r, u2 } => PieceKind::LogRampDown { l: m(l), r: m(r), u2 },
        };
        Piece { lo: m(self.lo), hi: m(self.hi), kind }
    }

    /// ∫_lo^t φ and ∫_lo^t φ² for t ∈ [lo, hi], in closed form.
    fn partial(&self, t: f64, eps: f64) -> (f64, f64) {
        // antiderivatives of log y and log² y, continuous at y = 0
        let i1 = |y: f64| if y > 0.0 { y * y.ln() - y } else { 0.0 };
        let i2 = |y: f64| if y > 0.0 { y * y.ln().powi(2) - 2.0 * y * y.ln() + 2.0 * y } else { 0.0 };
        match self.kind {
            PieceKind::Constant { value } => ((t - self.lo) * value, (t - self.lo) * value * value),
            PieceKind::LogRampUp { l, r, u1 } => {
                let len = r - l;
                let (y0, y1) = ((self.lo - l) / len, (t - l) / len);
                let dy = y1 - y0;
                let j1 = i1(y1) - i1(y0);
                let j2 = i2(y1) - i2(y0);
                (len * (eps * j1 + u1 * dy), len * (eps * eps * j2 + 2.0 * eps * u1 * j1 + u1 * u1 * dy))
            }
            PieceKind::LogRampDown { l, r, u2 } => {
                let len = r - l;
                let (y0, y1) = ((r - t) / len, (r - self.lo) / len);
                let dy = y1 - y0;
                let j1 = i1(y1) - i1(y0);
                let j2 = i2(y1) - i2(y0);
                (len * (-eps * j1 + u2 * dy), len * (eps * eps * j2 - 2.0 * eps * u2 * j1 + u2 * u2 * dy))
            }
        }
    }
}

/// A piecewise test function on [0, 1]; ramps share the radius ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub eps: f64,
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTriple {
    pub m1: f64,
    pub m2: f64,
    pub mf: f64,
}

impl TestFunction {
    pub fn constant(eps: f64, value: f64) -> Self {
        TestFunction { eps, pieces: vec![Piece { lo: 0.0, hi: 1.0, kind: PieceKind::Constant { value } }] }
    }

    /// Places the parts side by side, part k on a subinterval of length weight_k.
    pub fn concat(eps: f64, parts: &[(f64, &TestFunction)]) -> Self {
        let mut pieces = Vec::new();
        let mut at = 0.0;
        for (k, (w, g)) in parts.iter().enumerate() {
            if *w <= 1e-15 {
                continue;
            }
            // the last part ends exactly at 1
            let w = if k + 1 == parts.len() { 1.0 - at } else { *w };
            for p in &g.pieces {
                let mut q = p.mapped(at, w);
                q.lo = q.lo.max(at);
                q.hi = q.hi.min(at + w);
                if q.hi > q.lo {
                    pieces.push(q);
                }
            }
            at += w;
        }
        if let Some(last) = pieces.last_mut() {
            last.hi = 1.0;
        }
        TestFunction { eps, pieces }
    }

    pub fn value(&self, s: f64) -> f64 {
        let p = self.pieces.iter().find(|p| s <= p.hi).unwrap_or_else(|| self.pieces.last().unwrap());
        p.value(s, self.eps)
    }

    /// Pieces cover [0, 1] in order without overlap.
    pub fn check_cover(&self) -> Result<()> {
        let mut at = 0.0;
        for p in &self.pieces {
            if (p.lo - at).abs() > 1e-12 || !(p.hi > p.lo) {
                return Err(Error::Construction(format!("piece [{}, {}] does not continue from {at}", p.lo, p.hi)));
            }
            at = p.hi;
        }
        if (at - 1.0).abs() > 1e-12 {
            return Err(Error::Construction(format!("pieces end at {at}")));
        }
        Ok(())
    }

    /// φ is non-decreasing: every piece is, and no piece starts below the previous end.
    pub fn is_non_decreasing(&self, tol: f64) -> bool {
        self.pieces.windows(2).all(|w| {
            let end = w[0].value(w[0].hi, self.eps);
            let start = w[1].value(w[1].lo, self.eps);
            start >= end - tol * (1.0 + end.abs())
        })
    }
}

/// (⟨φ⟩, ⟨φ²⟩, ⟨f∘φ⟩) over [0, 1].
pub fn moments(phi: &TestFunction, f: &BoundaryFunction) -> Result<MomentTriple> {
    let q = f.integrator(QuadratureSettings::default());
    let eps = phi.eps;
    let g = |t: f64| f.f(t);
    let (mut m1, mut m2, mut mf) = (0.0, 0.0, 0.0);
    for p in &phi.pieces {
        let (a, b) = p.partial(p.hi, eps);
        m1 += a;
        m2 += b;
        // on ramps substitute t = φ(s); ds turns into an exponential weight
        mf += match p.kind {
            PieceKind::Constant { value } => (p.hi - p.lo) * f.f(value),
            PieceKind::LogRampUp { l, r, u1 } => {
                let t0 = Ext::from_f64(p.value(p.lo, eps));
                let t1 = p.value(p.hi, eps);
                (r - l) / eps * q.weighted(&g, t0, Ext::Finite(t1), 1.0, eps, u1)?
            }
            PieceKind::LogRampDown { l, r, u2 } => {
                let t0 = p.value(p.lo, eps);
                let t1 = Ext::from_f64(p.value(p.hi, eps));
                (r - l) / eps * q.weighted(&g, Ext::Finite(t0), t1, -1.0, eps, u2)?
            }
        };
    }
    Ok(MomentTriple { m1, m2, mf })
}

/// Grid of `resolution` points per piece plus all piece ends.
pub fn norm_grid(phi: &TestFunction, resolution: usize) -> Vec<f64> {
    let n = resolution.max(1);
    let mut g = vec![0.0];
    for p in &phi.pieces {
        for k in 1..=n {
            g.push(p.lo + (p.hi - p.lo) * k as f64 / n as f64);
        }
    }
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup();
    g
}

/// Length, mean and centred second moment ∫(φ − mean)² of φ on [a, b] inside one piece.
fn cell_stats(p: &Piece, a: f64, b: f64, eps: f64) -> (f64, f64, f64) {
    let w = b - a;
    if let PieceKind::Constant { value } = p.kind {
        return (w, value, 0.0);
    }
    let pole = match p.kind {
        PieceKind::LogRampUp { l, .. } => a - l,
        PieceKind::LogRampDown { r, .. } => r - b,
        PieceKind::Constant { .. } => unreachable!(),
    };
    if w < 0.5 * pole {
        // far from the logarithmic pole: Gauss–Legendre is accurate and avoids cancellation
        let (c, h) = (0.5 * (a + b), 0.5 * w);
        let vals: Vec<(f64, f64)> = GL10.iter().map(|&(x, wt)| (p.value(c + h * x, eps), wt)).collect();
        let mean = vals.iter().map(|(v, wt)| v * wt).sum::<f64>() / 2.0;
        let m2 = h * vals.iter().map(|(v, wt)| (v - mean).powi(2) * wt).sum::<f64>();
        return (w, mean, m2);
    }
    let sub = Piece { lo: a, ..*p };
    let (s1, s2) = sub.partial(b, eps);
    let mean = s1 / w;
    (w, mean, (s2 - s1 * mean).max(0.0))
}

const GL10: [(f64, f64); 10] = [
    (-0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
    (-0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (-0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (-0.433_395_394_129_247_2, 0.269_266_719_309_996_35),
    (-0.148_874_338_981_631_2, 0.295_524_224_714_752_9),
    (0.148_874_338_981_631_2, 0.295_524_224_714_752_9),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_35),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
];

/// sup of the standard deviation over subintervals with ends on `grid`.
///
/// Cells between consecutive grid points (split further at piece ends) carry
/// centred moments, merged pairwise so narrow intervals keep full precision.
pub fn bmo_norm_on(phi: &TestFunction, grid: &[f64]) -> f64 {
    let eps = phi.eps;
    let mut cuts: Vec<(f64, bool)> = grid.iter().map(|&g| (g, true)).collect();
    cuts.extend(phi.pieces.iter().map(|p| (p.hi, false)));
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // a grid point and a piece end at the same place keep the grid flag
    let mut pts: Vec<(f64, bool)> = Vec::new();
    for (t, g) in cuts {
        match pts.last_mut() {
            Some(last) if last.0 == t => last.1 |= g,
            _ => pts.push((t, g)),
        }
    }
    let mut cells = Vec::with_capacity(pts.len());
    for win in pts.windows(2) {
        let (a, b) = (win[0].0, win[1].0);
        let mid = 0.5 * (a + b);
        let st = match phi.pieces.iter().find(|p| p.lo <= mid && mid <= p.hi) {
            Some(p) if b > a => cell_stats(p, a.max(p.lo), b.min(p.hi), eps),
            _ => (0.0, 0.0, 0.0),
        };
        cells.push((st, win[1].1));
    }
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        if !pts[i].1 {
            continue;
        }
        let (mut w, mut m, mut m2) = (0.0f64, 0.0f64, 0.0f64);
        for &((cw, cm, cm2), is_grid) in &cells[i..] {
            if cw > 0.0 {
                let tot = w + cw;
                let d = cm - m;
                m += d * cw / tot;
                m2 += cm2 + d * d * w * cw / tot;
                w = tot;
            }
            if is_grid && w > 0.0 {
                best = best.max(m2 / w);
            }
        }
    }
    best.sqrt()
}

pub fn bmo_norm(phi: &TestFunction, resolution: usize) -> f64 {
    bmo_norm_on(phi, &norm_grid(phi, resolution))
}

/// Clamps φ into [c, d], splitting ramps where they cross the levels.
pub fn truncate(phi: &TestFunction, c: f64, d: f64) -> Result<TestFunction> {
    if !(c < d) {
        return Err(Error::Argument(format!("truncation needs c < d, got [{c}, {d}]")));
    }
    let eps = phi.eps;
    let mut out = Vec::new();
    for p in &phi.pieces {
        match p.kind {
            PieceKind::Constant { value } => {
                out.push(Piece { kind: PieceKind::Constant { value: value.clamp(c, d) }, ..*p });
            }
            _ => {
                // ramps increase; find where they cross c and d
                let cross = |level: f64| -> f64 {
                    let s = match p.kind {
                        PieceKind::LogRampUp { l, r, u1 } => l + (r - l) * ((level - u1) / eps).exp(),
                        PieceKind::LogRampDown { l, r, u2 } => r - (r - l) * (-(level - u2) / eps).exp(),
                        PieceKind::Constant { .. } => unreachable!(),
                    };
                    s.clamp(p.lo, p.hi)
                };
                let (sc, sd) = (cross(c), cross(d));
                if sc > p.lo {
                    out.push(Piece { lo: p.lo, hi: sc, kind: PieceKind::Constant { value: c } });
                }
                if sd > sc {
                    out.push(Piece { lo: sc, hi: sd, kind: p.kind });
                }
                if p.hi > sd {
                    out.push(Piece { lo: sd, hi: p.hi, kind: PieceKind::Constant { value: d } });
                }
            }
        }
    }
    Ok(TestFunction { eps, pieces: out })
}

fn upper(t: f64, eps: f64) -> Point {
    Point::upper(t, eps)
}

/// Builds an optimizer for x from the foliation's figures.
pub fn build_optimizer(x: Point, fol: &Foliation) -> Result<TestFunction> {
    let eps = fol.eps;
    match classify(x, eps) {
        StripLocation::Outside => return Err(Error::Outside { x1: x.x1, x2: x.x2 }),
        StripLocation::LowerBoundary => return Ok(TestFunction::constant(eps, x.x1)),
        _ => {}
    }
    let r = fol.locate(x)?;
    let b = Builder { fol, eps };
    match &fol.figures[r.index] {
        Figure::Tangent { side, coeff, .. } => b.on_tangent(*side, coeff, r.u.expect("tangent figures report u"), x),
        Figure::Cup { cup, a, b: bb } => {
            let ch = cup.locate_chord_within(x, bb - a)?;
            Ok(step(eps, ch.a, ch.b, x.x1))
        }
        Figure::Angle { v, .. } => b.in_angle(r.index, *v, x),
        Figure::Trolleybus { .. } => b.in_trolleybus(r.index, x),
    }
}

/// a on the first part, b on the rest, with mean x1.
fn step(eps: f64, a: f64, b: f64, x1: f64) -> TestFunction {
    if b - a <= 0.0 {
        return TestFunction::constant(eps, a);
    }
    let alpha = ((b - x1) / (b - a)).clamp(0.0, 1.0);
    let ca = TestFunction::constant(eps, a);
    let cb = TestFunction::constant(eps, b);
    TestFunction::concat(eps, &[(alpha, &ca), (1.0 - alpha, &cb)])
}

struct Builder<'a> {
    fol: &'a Foliation,
    eps: f64,
}

impl Builder<'_> {
    /// x on the tangent with foot u: the constant u joined with the optimizer of the upper end.
    fn on_tangent(&self, side: Side, coeff: &TangentCoefficient, u: f64, x: Point) -> Result<TestFunction> {
        let eps = self.eps;
        // L tangents go right of u, R tangents left of it
        let lam = (side.sign() * (u - x.x1) / eps).clamp(0.0, 1.0);
        let cu = TestFunction::constant(eps, u);
        if lam <= 0.0 {
            return Ok(cu);
        }
        let w = u - side.sign() * eps;
        let top = self.on_upper(side, coeff, w)?;
        Ok(match side {
            Side::L => TestFunction::concat(eps, &[(1.0 - lam, &cu), (lam, &top)]),
            Side::R => TestFunction::concat(eps, &[(lam, &top), (1.0 - lam, &cu)]),
        })
    }

    /// Optimizer of the upper point over w: a log ramp from the figure's origin.
    fn on_upper(&self, side: Side, coeff: &TangentCoefficient, w: f64) -> Result<TestFunction> {
        let eps = self.eps;
        let ramp = |kind| TestFunction { eps, pieces: vec![Piece { lo: 0.0, hi: 1.0, kind }] };
        match (side, coeff.anchor) {
            (Side::L, Anchor::FromInfinity) => Ok(ramp(PieceKind::LogRampDown { l: 0.0, r: 1.0, u2: w - eps })),
            (Side::R, Anchor::FromInfinity) => Ok(ramp(PieceKind::LogRampUp { l: 0.0, r: 1.0, u1: w + eps })),
            (Side::L, Anchor::ScreenEnd { a0, b0 }) => {
                let p = a0 + eps;
                let kappa = (-(p - w).max(0.0) / eps).exp();
                let node = self.node(a0, b0, upper(p, eps))?;
                // the ramp −ε log(1 − s) + w − ε on [0, 1 − κ], stretched to [0, 1]
                let head = ramp(PieceKind::LogRampDown { l: 0.0, r: 1.0 / (1.0 - kappa), u2: w - eps });
                Ok(TestFunction::concat(eps, &[(1.0 - kappa, &head), (kappa, &node)]))
            }
            (Side::R, Anchor::ScreenEnd { a0, b0 }) => {
                let p = b0 - eps;
                let kappa = (-(w - p).max(0.0) / eps).exp();
                let node = self.node(a0, b0, upper(p, eps))?;
                // the ramp ε log s + w + ε on [κ, 1], stretched to [0, 1]
                let tail = ramp(PieceKind::LogRampUp { l: -kappa / (1.0 - kappa), r: 1.0, u1: w + eps });
                Ok(TestFunction::concat(eps, &[(kappa, &node), (1.0 - kappa, &tail)]))
            }
            (_, Anchor::FreeConstant { .. }) => {
                Err(Error::Construction("no optimizer for a free-constant tangent family".into()))
            }
        }
    }

    /// Optimizer at an entry node of the cup [a0, b0]: the chord step, or the trolleybus transit.
    fn node(&self, a0: f64, b0: f64, n: Point) -> Result<TestFunction> {
        let figs = &self.fol.figures;
        let k = figs
            .iter()
            .position(|f| matches!(f, Figure::Cup { a, .. } if (a - a0).abs() <= end_tolerance(a0)))
            .ok_or_else(|| Error::Construction(format!("no cup starts at {a0}")))?;
        if let Some(Figure::Trolleybus { .. }) = figs.get(k + 1) {
            return self.in_trolleybus(k + 1, n);
        }
        Ok(step(self.eps, a0, b0, n.x1))
    }

    fn tangent_ending_at(&self, side: Side, end: f64) -> Result<&TangentCoefficient> {
        self.fol
            .figures
            .iter()
            .find_map(|f| match f {
                Figure::Tangent { side: s, lo, hi, coeff } if *s == side => {
                    let e = if side == Side::R { *hi } else { *lo };
                    matches!(e, Ext::Finite(t) if (t - end).abs() <= end_tolerance(end)).then_some(coeff)
                }
                _ => None,
            })
            .ok_or_else(|| Error::Construction(format!("no {side} tangents meet {end}")))
    }

    /// Angle: split x along the line of slope 2x₁, which stays under the upper parabola.
    fn in_angle(&self, _k: usize, v: f64, x: Point) -> Result<TestFunction> {
        let eps = self.eps;
        let k = 2.0 * x.x1;
        let c = k * x.x1 - x.x2 - v * v;
        let tm = (c + 2.0 * eps * v) / (k - 2.0 * v + 2.0 * eps);
        let tp = (c - 2.0 * eps * v) / (k - 2.0 * v - 2.0 * eps);
        let line = |t: f64| Point::new(t, x.x2 + k * (t - x.x1));
        if !(tp > tm) {
            return Ok(TestFunction::constant(eps, v));
        }
        let alpha = ((tp - x.x1) / (tp - tm)).clamp(0.0, 1.0);
        let left = self.on_tangent(Side::R, self.tangent_ending_at(Side::R, v)?, v, line(tm))?;
        let right = self.on_tangent(Side::L, self.tangent_ending_at(Side::L, v)?, v, line(tp))?;
        Ok(TestFunction::concat(eps, &[(alpha, &left), (1.0 - alpha, &right)]))
    }

    /// Trolleybus: move along the line through x and the far chord end to the rear pole.
    fn in_trolleybus(&self, k: usize, x: Point) -> Result<TestFunction> {
        let eps = self.eps;
        let Figure::Trolleybus { side, a0, b0, .. } = self.fol.figures[k] else {
            return Err(Error::Construction("not a trolleybus".into()));
        };
        // far end E of the chord and the pole from the foot F to the upper point T
        let (e, foot, top) = match side {
            Side::R => (b0, a0, a0 - eps),
            Side::L => (a0, b0, b0 + eps),
        };
        let ep = Point::lower(e);
        let (f0, t0) = (Point::lower(foot), upper(top, eps));
        let d1 = Point::new(x.x1 - ep.x1, x.x2 - ep.x2);
        let d2 = Point::new(t0.x1 - f0.x1, t0.x2 - f0.x2);
        if d1.x1.abs() + d1.x2.abs() <= 1e-15 * (1.0 + e.abs()) {
            return Ok(TestFunction::constant(eps, e));
        }
        // solve E + μ'·d1 = F + t·d2
        let det = d1.x1 * (-d2.x2) - d1.x2 * (-d2.x1);
        if det.abs() < 1e-300 {
            return Err(Error::Construction("trolleybus line is parallel to its pole".into()));
        }
        let rx = f0.x1 - ep.x1;
        let ry = f0.x2 - ep.x2;
        let t = (d1.x1 * ry - d1.x2 * rx) / det;
        let t = t.clamp(0.0, 1.0);
        let p = Point::new(f0.x1 + t * d2.x1, f0.x2 + t * d2.x2);
        let coeff = self.tangent_ending_at(side, foot)?;
        let at_p = self.on_tangent(side, coeff, foot, p)?;
        let ce = TestFunction::constant(eps, e);
        Ok(match side {
            Side::R => {
                let mu = ((x.x1 - p.x1) / (e - p.x1)).clamp(0.0, 1.0);
                TestFunction::concat(eps, &[(1.0 - mu, &at_p), (mu, &ce)])
            }
            Side::L => {
                let mu = ((p.x1 - x.x1) / (p.x1 - e)).clamp(0.0, 1.0);
                TestFunction::concat(eps, &[(mu, &ce), (1.0 - mu, &at_p)])
            }
        })
    }
}
