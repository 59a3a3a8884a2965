//! The global candidate: figures laid out along the lower parabola, point
//! dispatch and evaluation.

use crate::boundary::BoundaryFunction;
use crate::cups::{chord_mismatch, CupFamily};
use crate::error::{Error, Result};
use crate::forces::{balance_all, end_tolerance, BalanceOptions, BalancedFamily};
use crate::geometry::{chord_height, classify, u_tangent, Point, Side, StripLocation};
use crate::numerics::{Ext, QuadratureSettings};
use crate::tangents::{Anchor, TangentCoefficient};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum Figure {
    /// Tangents of one family with feet in [lo, hi].
    Tangent { side: Side, lo: Ext, hi: Ext, coeff: TangentCoefficient },
    /// Cup under the chord [a, b] of its family.
    Cup { cup: Arc<CupFamily>, a: f64, b: f64 },
    /// Linear piece between the R and L tangents ending at (v, v²).
    Angle { v: f64, alpha1: f64, alpha2: f64, alpha0: f64 },
    /// Linear piece above the chord [a0, b0], between two tangents of `side`.
    Trolleybus { side: Side, a0: f64, b0: f64, beta1: f64, beta2: f64, beta0: f64 },
}

impl Figure {
    /// Tag used in CSV output.
    pub fn tag(&self) -> &'static str {
        match self {
            Figure::Tangent { side: Side::R, .. } => "R",
            Figure::Tangent { side: Side::L, .. } => "L",
            Figure::Cup { .. } => "cup",
            Figure::Angle { .. } => "angle",
            Figure::Trolleybus { side: Side::R, .. } => "trR",
            Figure::Trolleybus { side: Side::L, .. } => "trL",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Figure::Angle { .. } | Figure::Trolleybus { .. })
    }

    /// Range of tangent feet (or lower-parabola abscissas) the figure owns.
    pub fn u_span(&self) -> (Ext, Ext) {
        match self {
            Figure::Tangent { lo, hi, .. } => (*lo, *hi),
            Figure::Cup { a, b, .. } => (Ext::Finite(*a), Ext::Finite(*b)),
            Figure::Angle { v, .. } => (Ext::Finite(*v), Ext::Finite(*v)),
            Figure::Trolleybus { a0, b0, .. } => (Ext::Finite(*a0), Ext::Finite(*b0)),
        }
    }
}

/// (α₁, α₂, α₀) of the angle with vertex v, given both one-sided coefficients.
pub fn angle_coefficients(v: f64, m_r: f64, m_l: f64, f: &BoundaryFunction, eps: f64) -> Result<(f64, f64, f64)> {
    let gap = m_r + m_l - 2.0 * f.f1(v);
    if gap.abs() > 1e-7 * (1.0 + f.f1(v).abs() + m_r.abs() + m_l.abs()) {
        return Err(Error::Construction(format!("angle at {v}: m_R + m_L − 2f'(v) = {gap:e}")));
    }
    let alpha2 = (m_l - m_r) / (4.0 * eps);
    let alpha1 = 0.5 * (m_r + m_l) - v * (m_l - m_r) / (2.0 * eps);
    let alpha0 = f.f(v) - alpha1 * v - alpha2 * v * v;
    Ok((alpha1, alpha2, alpha0))
}

/// (β₁, β₂, β₀) of the plane through the chord [a0, b0] with slope ⟨f''⟩/2 in x₂.
pub fn trolleybus_coefficients(a0: f64, b0: f64, f: &BoundaryFunction) -> Result<(f64, f64, f64)> {
    if !(a0 < b0) {
        return Err(Error::Argument(format!("trolleybus needs a0 < b0, got [{a0}, {b0}]")));
    }
    let l = b0 - a0;
    let scale = 1.0 + f.f(a0).abs() + f.f(b0).abs() + l * (f.f1(a0).abs() + f.f1(b0).abs());
    let r = chord_mismatch(a0, l, f);
    if r.abs() > 1e-9 * scale {
        return Err(Error::Construction(format!("[{a0}, {b0}] is not a chord: residual {r:e}")));
    }
    let beta2 = 0.5 * (f.f1(b0) - f.f1(a0)) / l;
    let beta1 = (b0 * f.f1(a0) - a0 * f.f1(b0)) / l;
    let beta0 = f.f(a0) - beta1 * a0 - beta2 * a0 * a0;
    Ok((beta1, beta2, beta0))
}

#[derive(Debug, Clone)]
pub struct Foliation {
    pub figures: Vec<Figure>,
    pub signature: String,
    pub eps: f64,
    pub balance_points: Vec<f64>,
    f: Arc<BoundaryFunction>,
}

/// Runs the balancing algorithm and assembles the foliation.
pub fn foliate(
    f: Arc<BoundaryFunction>,
    eps: f64,
    settings: QuadratureSettings,
    opts: BalanceOptions,
) -> Result<(Foliation, BalancedFamily)> {
    let family = balance_all(f.clone(), eps, settings, opts)?;
    let fol = build_foliation(&family, f)?;
    Ok((fol, family))
}

fn near(x: f64, y: f64) -> bool {
    (x - y).abs() <= end_tolerance(y)
}

/// Assembles figures left to right from a completely balanced family.
pub fn build_foliation(family: &BalancedFamily, f: Arc<BoundaryFunction>) -> Result<Foliation> {
    let eps = family.eps;
    let forces = &family.forces;
    let bp = &family.balance_points;
    let mut figures = Vec::new();
    let push_tangent = |figs: &mut Vec<Figure>, side, lo: Ext, hi: Ext, coeff: TangentCoefficient| -> Result<()> {
        if lo.is_finite() && hi.is_finite() && hi.value() - lo.value() <= end_tolerance(hi.value()) {
            return Ok(());
        }
        coeff.certify(lo, hi, 48)?;
        figs.push(Figure::Tangent { side, lo, hi, coeff });
        Ok(())
    };
    for (j, fo) in forces.iter().enumerate() {
        // left of the force: its L tangents, down to the previous balance point
        if fo.source != Ext::NegInf {
            let lo = if j == 0 { Ext::NegInf } else { Ext::Finite(bp[j - 1]) };
            let hi = if fo.source.is_finite() { Ext::Finite(fo.a) } else { Ext::PosInf };
            let hi = if j + 1 < forces.len() && !fo.source.is_finite() { Ext::Finite(bp[j]) } else { hi };
            push_tangent(&mut figures, Side::L, lo, hi, fo.left_branch()?)?;
        }
        if let (Ext::Finite(_), Some(cup)) = (fo.source, &fo.cup) {
            figures.push(Figure::Cup { cup: cup.clone(), a: fo.a, b: fo.b });
            let tr_left = j > 0 && near(bp[j - 1], fo.a);
            let tr_right = j < bp.len() && near(bp[j], fo.b);
            if tr_left && tr_right {
                return Err(Error::Construction(format!(
                    "both screen ends of the cup at {} carry balance points",
                    cup.origin_c
                )));
            }
            if tr_left || tr_right {
                let side = if tr_left { Side::R } else { Side::L };
                let (beta1, beta2, beta0) = trolleybus_coefficients(fo.a, fo.b, &f)?;
                figures.push(Figure::Trolleybus { side, a0: fo.a, b0: fo.b, beta1, beta2, beta0 });
            }
        }
        // right of the force: its R tangents, up to the next balance point
        if fo.source != Ext::PosInf {
            let lo = if fo.source.is_finite() { Ext::Finite(fo.b) } else { Ext::NegInf };
            let hi = if j + 1 < forces.len() { Ext::Finite(bp[j]) } else { Ext::PosInf };
            push_tangent(&mut figures, Side::R, lo, hi, fo.right_branch()?)?;
        }
        if j + 1 < forces.len() {
            let v = bp[j];
            let next = &forces[j + 1];
            let at_end = (fo.source.is_finite() && near(v, fo.b)) || (next.source.is_finite() && near(v, next.a));
            if !at_end {
                let m_r = fo.right_branch()?.m_value(v)?;
                let m_l = next.left_branch()?.m_value(v)?;
                let (alpha1, alpha2, alpha0) = angle_coefficients(v, m_r, m_l, &f, eps)?;
                figures.push(Figure::Angle { v, alpha1, alpha2, alpha0 });
            }
        }
    }
    let signature = figures
        .iter()
        .filter_map(|fig| match fig {
            Figure::Tangent { side, .. } => Some(side.to_string()),
            _ => None,
        })
        .collect();
    Ok(Foliation { figures, signature, eps, balance_points: bp.clone(), f })
}

/// Figure index and the foot u used by it (if any).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureRef {
    pub index: usize,
    pub u: Option<f64>,
}

fn in_range(u: f64, lo: Ext, hi: Ext, rel: f64) -> bool {
    let tol = rel * (1.0 + u.abs());
    lo.value() - tol <= u && u <= hi.value() + tol
}

/// Foot clamped into a tangent domain's range; the slack comes from dispatch tolerance.
fn clamp_foot(u: f64, lo: Ext, hi: Ext) -> f64 {
    u.max(lo.value()).min(hi.value())
}

impl Foliation {
    pub fn function(&self) -> &BoundaryFunction {
        &self.f
    }

    pub fn function_arc(&self) -> Arc<BoundaryFunction> {
        self.f.clone()
    }

    /// The first figure, left to right, that claims x. A strict pass runs
    /// first so that rounding slack never steals a point from its true figure.
    pub fn locate(&self, x: Point) -> Result<FigureRef> {
        if classify(x, self.eps) == StripLocation::Outside {
            return Err(Error::Outside { x1: x.x1, x2: x.x2 });
        }
        let ur = u_tangent(Side::R, x, self.eps)?;
        let ul = u_tangent(Side::L, x, self.eps)?;
        for rel in [1e-14, 1e-10] {
            if let Some(r) = self.locate_with(x, ur, ul, rel) {
                return Ok(r);
            }
        }
        Err(Error::Dispatch { x1: x.x1, x2: x.x2 })
    }

    fn locate_with(&self, x: Point, ur: f64, ul: f64, rel: f64) -> Option<FigureRef> {
        let tol = rel * 1e-2 * (1.0 + x.x1 * x.x1);
        for (index, fig) in self.figures.iter().enumerate() {
            let hit = match fig {
                Figure::Tangent { side: Side::R, lo, hi, .. } => {
                    in_range(ur, *lo, *hi, rel).then_some(Some(clamp_foot(ur, *lo, *hi)))
                }
                Figure::Tangent { side: Side::L, lo, hi, .. } => {
                    in_range(ul, *lo, *hi, rel).then_some(Some(clamp_foot(ul, *lo, *hi)))
                }
                Figure::Cup { a, b, .. } => {
                    let inside = x.x1 >= *a - tol && x.x1 <= *b + tol && x.x2 <= chord_height(*a, *b, x.x1) + tol;
                    inside.then_some(None)
                }
                Figure::Angle { v, .. } => {
                    let t = rel * 1e-2 * (1.0 + v.abs());
                    (ur >= *v - t && ul <= *v + t).then_some(None)
                }
                Figure::Trolleybus { side, a0, b0, .. } => {
                    let u = if *side == Side::R { ur } else { ul };
                    let above = x.x2 >= chord_height(*a0, *b0, x.x1) - tol;
                    (above && in_range(u, Ext::Finite(*a0), Ext::Finite(*b0), rel)).then_some(None)
                }
            };
            if let Some(u) = hit {
                return Some(FigureRef { index, u });
            }
        }
        None
    }

    /// B(x) using the formula of figure `index`, without checking membership.
    pub fn eval_in(&self, index: usize, x: Point) -> Result<f64> {
        match &self.figures[index] {
            Figure::Tangent { side, coeff, lo, hi } => {
                let u = clamp_foot(u_tangent(*side, x, self.eps)?, *lo, *hi);
                coeff.eval_at(x, u)
            }
            Figure::Cup { cup, a, b, .. } => cup.eval_within(x, b - a),
            Figure::Angle { alpha1, alpha2, alpha0, .. } => Ok(alpha1 * x.x1 + alpha2 * x.x2 + alpha0),
            Figure::Trolleybus { beta1, beta2, beta0, .. } => Ok(beta1 * x.x1 + beta2 * x.x2 + beta0),
        }
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        let r = self.locate(x)?;
        match (&self.figures[r.index], r.u) {
            (Figure::Tangent { coeff, .. }, Some(u)) => coeff.eval_at(x, u),
            _ => self.eval_in(r.index, x),
        }
    }

    /// Value and figure tag at x.
    pub fn eval_tagged(&self, x: Point) -> Result<(f64, &'static str)> {
        let r = self.locate(x)?;
        Ok((self.eval(x)?, self.figures[r.index].tag()))
    }

    /// Finite abscissas where figures meet; handy for sampling ranges.
    pub fn landmarks(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for fig in &self.figures {
            let (lo, hi) = fig.u_span();
            for e in [lo, hi] {
                if let Ext::Finite(x) = e {
                    out.push(x);
                }
            }
        }
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup();
        out
    }

    pub fn document(&self) -> FoliationDoc {
        let figures = self
            .figures
            .iter()
            .map(|fig| match fig {
                Figure::Tangent { side, lo, hi, coeff } => FigureDoc::Tangent {
                    side: side.to_string(),
                    u_lo: *lo,
                    u_hi: *hi,
                    anchor: coeff.anchor,
                },
                Figure::Cup { cup, a, b } => FigureDoc::Cup { origin: cup.origin_c, a: *a, b: *b, ell: b - a, full: cup.full && (b - a - cup.ell_max).abs() < 1e-12 },
                Figure::Angle { v, alpha1, alpha2, alpha0 } => {
                    FigureDoc::Angle { v: *v, alpha1: *alpha1, alpha2: *alpha2, alpha0: *alpha0 }
                }
                Figure::Trolleybus { side, a0, b0, beta1, beta2, beta0 } => FigureDoc::Trolleybus {
                    side: side.to_string(),
                    a0: *a0,
                    b0: *b0,
                    ell: b0 - a0,
                    beta1: *beta1,
                    beta2: *beta2,
                    beta0: *beta0,
                },
            })
            .collect();
        FoliationDoc {
            function: self.f.name(),
            eps: self.eps,
            signature: self.signature.clone(),
            balance_points: self.balance_points.clone(),
            figures,
        }
    }
}

/// Serialized description of a foliation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliationDoc {
    pub function: String,
    pub eps: f64,
    pub signature: String,
    pub balance_points: Vec<f64>,
    pub figures: Vec<FigureDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FigureDoc {
    Tangent { side: String, u_lo: Ext, u_hi: Ext, anchor: Anchor },
    Cup { origin: f64, a: f64, b: f64, ell: f64, full: bool },
    Angle { v: f64, alpha1: f64, alpha2: f64, alpha0: f64 },
    Trolleybus { side: String, a0: f64, b0: f64, ell: f64, beta1: f64, beta2: f64, beta0: f64 },
}

impl std::fmt::Display for FoliationDoc {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(out, "function: {}  eps: {}", self.function, self.eps)?;
        for fig in &self.figures {
            match fig {
                FigureDoc::Tangent { side, u_lo, u_hi, .. } => writeln!(out, "  {side} tangents, u in [{u_lo}, {u_hi}]")?,
                FigureDoc::Cup { origin, a, b, full, .. } => {
                    writeln!(out, "  cup from {origin}: [{a}, {b}]{}", if *full { " (full)" } else { "" })?
                }
                FigureDoc::Angle { v, .. } => writeln!(out, "  angle at {v}")?,
                FigureDoc::Trolleybus { side, a0, b0, .. } => writeln!(out, "  {side}{side} trolleybus on [{a0}, {b0}]")?,
            }
        }
        write!(out, "signature: {}", self.signature)
    }
}
