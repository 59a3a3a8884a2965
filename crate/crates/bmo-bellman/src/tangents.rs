//! Tangent domains: the coefficient m(u) of a family of extremal tangents and
//! the candidate B = m(u)(x₁ − u) + f(u).
//!
//! Everything is computed through the force F = ε m''. On the R side
//! m = f' − εf'' + εF with εF' + F = εf''', on the L side m = f' + εf'' + εF
//! with −εF' + F = εf'''. Integrating the force ODE instead of the one for m
//! keeps the integrands as small as f''' itself.

use crate::boundary::BoundaryFunction;
use crate::cups::differentials_integral;
use crate::error::{Error, Result};
use crate::geometry::{u_tangent, Point, Side};
use crate::numerics::{Ext, Integrator, QuadratureSettings};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// How the integration constant of m is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Anchor {
    /// Minimal solution coming from −∞ (R) or +∞ (L).
    FromInfinity,
    /// Matched to a chord [a0, b0] of a cup: R starts at b0, L at a0.
    ScreenEnd { a0: f64, b0: f64 },
    /// m(at) = value; a test hook for non-minimal solutions.
    FreeConstant { value: f64, at: f64 },
}

#[derive(Debug, Clone)]
pub struct TangentCoefficient {
    pub side: Side,
    pub anchor: Anchor,
    pub eps: f64,
    f: Arc<BoundaryFunction>,
    settings: QuadratureSettings,
    /// Force value at a finite anchor.
    anchor_force: f64,
}

impl TangentCoefficient {
    pub fn new(
        f: Arc<BoundaryFunction>,
        side: Side,
        anchor: Anchor,
        eps: f64,
        settings: QuadratureSettings,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Argument(format!("eps must be positive, got {eps}")));
        }
        let q = f.integrator(settings);
        let anchor_force = match anchor {
            Anchor::FromInfinity => 0.0,
            Anchor::ScreenEnd { a0, b0 } => {
                let l = b0 - a0;
                if !(l >= 0.0 && l <= 2.0 * eps * (1.0 + 1e-12)) {
                    return Err(Error::Argument(format!("screen [{a0}, {b0}] must have length in [0, 2·eps]")));
                }
                let (dl, dr) = differentials_integral(a0, b0, &f, &q)?;
                match side {
                    Side::R => dr,
                    Side::L => -dl,
                }
            }
            Anchor::FreeConstant { value, at } => {
                (value - f.f1(at) + side.sign() * eps * f.f2(at)) / eps
            }
        };
        Ok(TangentCoefficient { side, anchor, eps, f, settings, anchor_force })
    }

    pub fn function(&self) -> &BoundaryFunction {
        &self.f
    }

    fn q(&self) -> Integrator {
        self.f.integrator(self.settings)
    }

    /// Abscissa where the coefficient is anchored.
    pub fn anchor_point(&self) -> Ext {
        match (self.anchor, self.side) {
            (Anchor::FromInfinity, Side::R) => Ext::NegInf,
            (Anchor::FromInfinity, Side::L) => Ext::PosInf,
            (Anchor::ScreenEnd { b0, .. }, Side::R) => Ext::Finite(b0),
            (Anchor::ScreenEnd { a0, .. }, Side::L) => Ext::Finite(a0),
            (Anchor::FreeConstant { at, .. }, _) => Ext::Finite(at),
        }
    }

    /// The force ε m''(u).
    pub fn force(&self, u: f64) -> Result<f64> {
        let eps = self.eps;
        let f3 = |t: f64| self.f.f3(t);
        let q = self.q();
        let at = self.anchor_point();
        let free = matches!(self.anchor, Anchor::FreeConstant { .. });
        match (self.side, at) {
            (Side::R, Ext::NegInf) => q.weighted(&f3, Ext::NegInf, Ext::Finite(u), 1.0, eps, u),
            (Side::L, Ext::PosInf) => q.weighted(&f3, Ext::Finite(u), Ext::PosInf, -1.0, eps, u),
            (Side::R, Ext::Finite(at)) => {
                let tol = 1e-12 * (1.0 + at.abs());
                if u < at - tol && !free {
                    return Err(Error::Argument(format!("u = {u} lies left of the R anchor {at}")));
                }
                let head = self.anchor_force * ((at - u) / eps).exp();
                Ok(head + q.weighted(&f3, Ext::Finite(at), Ext::Finite(u), 1.0, eps, u)?)
            }
            (Side::L, Ext::Finite(at)) => {
                let tol = 1e-12 * (1.0 + at.abs());
                if u > at + tol && !free {
                    return Err(Error::Argument(format!("u = {u} lies right of the L anchor {at}")));
                }
                let head = self.anchor_force * ((u - at) / eps).exp();
                Ok(head + q.weighted(&f3, Ext::Finite(u), Ext::Finite(at), -1.0, eps, u)?)
            }
            _ => unreachable!("anchor side mismatch"),
        }
    }

    pub fn m_value(&self, u: f64) -> Result<f64> {
        let f = &self.f;
        Ok(f.f1(u) - self.side.sign() * self.eps * f.f2(u) + self.eps * self.force(u)?)
    }

    pub fn m_second(&self, u: f64) -> Result<f64> {
        Ok(self.force(u)? / self.eps)
    }

    /// m'(u) from the first-order equation ±εm' + m = f'.
    pub fn m_prime(&self, u: f64) -> Result<f64> {
        let m = self.m_value(u)?;
        Ok(self.side.sign() * (self.f.f1(u) - m) / self.eps)
    }

    /// B(x) = m(u)(x₁ − u) + f(u) with u the foot of the tangent through x.
    pub fn eval(&self, x: Point) -> Result<f64> {
        let u = u_tangent(self.side, x, self.eps)?;
        self.eval_at(x, u)
    }

    pub fn eval_at(&self, x: Point, u: f64) -> Result<f64> {
        if x.x1 == u {
            return Ok(self.f.f(u));
        }
        Ok(self.m_value(u)? * (x.x1 - u) + self.f.f(u))
    }

    /// Checks the concavity sign of m'' (≤ 0 for R, ≥ 0 for L) at n samples of [lo, hi].
    pub fn certify(&self, lo: Ext, hi: Ext, n: usize) -> Result<()> {
        let span = 20.0 * self.eps;
        let (a, b) = match (lo, hi) {
            (Ext::Finite(a), Ext::Finite(b)) => (a, b),
            (Ext::Finite(a), _) => (a, a + span),
            (_, Ext::Finite(b)) => (b - span, b),
            _ => (-span, span),
        };
        let n = n.max(2);
        for k in 0..n {
            let u = a + (b - a) * k as f64 / (n - 1) as f64;
            let m2 = self.m_second(u)?;
            let tol = 1e-9 * (1.0 + self.f.f3(u).abs() + self.f.f2(u).abs() / self.eps);
            let bad = match self.side {
                Side::R => m2 > tol,
                Side::L => m2 < -tol,
            };
            if bad {
                return Err(Error::Construction(format!(
                    "{} tangents on [{lo}, {hi}] are not concave: m''({u}) = {m2:e}",
                    self.side
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tangent_segment;
    use proptest::prelude::*;

    fn tc(name: &str, side: Side, anchor: Anchor, eps: f64) -> TangentCoefficient {
        let f = Arc::new(BoundaryFunction::from_name(name).unwrap());
        TangentCoefficient::new(f, side, anchor, eps, QuadratureSettings::default()).unwrap()
    }

    #[test]
    fn exponential_left_from_infinity() {
        let t = tc("exp+", Side::L, Anchor::FromInfinity, 0.5);
        assert!((t.m_value(0.0).unwrap() - 2.0).abs() < 1e-12);
        for u in [-1.0, 0.5, 2.0] {
            let m2 = t.m_second(u).unwrap();
            assert!((m2 - 2.0 * f64::exp(u)).abs() < 1e-10 * m2, "{m2}");
        }
        let b = t.eval(Point::new(0.0, 0.25)).unwrap();
        let c = (-0.5f64).exp() / 0.5;
        assert!((b - c).abs() < 1e-12, "{b} vs {c}");
    }

    #[test]
    fn cubic_closed_forms() {
        let t = tc("cubic+", Side::L, Anchor::FromInfinity, 1.0);
        assert!((t.m_value(0.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((t.eval(Point::new(0.0, 1.0)).unwrap() - 2.0).abs() < 1e-12);
        for eps in [0.5, 2.0] {
            let t = tc("cubic+", Side::L, Anchor::FromInfinity, eps);
            for u in [-1.3, 0.2, 1.7] {
                let m = 6.0 * eps * eps + 3.0 * u * u + 6.0 * eps * u;
                assert!((t.m_value(u).unwrap() - m).abs() < 1e-11 * m.abs().max(1.0));
            }
        }
        // the R family would be convex: m'' = 6 > 0
        let r = tc("cubic+", Side::R, Anchor::FromInfinity, 1.0);
        assert!((r.m_second(0.3).unwrap() - 6.0).abs() < 1e-11);
        assert!(matches!(r.certify(Ext::NegInf, Ext::PosInf, 10), Err(Error::Construction(_))));
    }

    #[test]
    fn negative_quartic_screen_end() {
        for c in [0.0, 0.7] {
            let eps: f64 = 1.0;
            let t = tc(&format!("quartic-({c})"), Side::R, Anchor::ScreenEnd { a0: c - eps, b0: c + eps }, eps);
            assert!(t.m_value(c + eps).unwrap().abs() < 1e-12);
            for s in [1.0, 1.5, 3.0] {
                let u = c + s;
                let closed = -8.0 * eps.powi(3) * (1.0 - s / eps).exp() - 4.0 * s.powi(3) + 12.0 * eps * s * s
                    - 24.0 * eps * eps * s
                    + 24.0 * eps.powi(3);
                assert!((t.m_value(u).unwrap() - closed).abs() < 1e-10 * closed.abs().max(1.0));
            }
            let q = t.function().integrator(QuadratureSettings::default());
            let (_, dr) = differentials_integral(c - eps, c + eps, t.function(), &q).unwrap();
            assert!(dr < 0.0);
            assert!((t.m_second(c + eps).unwrap() - dr / eps).abs() < 1e-12);
            t.certify(Ext::Finite(c + eps), Ext::PosInf, 50).unwrap();
        }
    }

    #[test]
    fn screen_end_on_the_wrong_side_is_rejected() {
        let t = tc("quartic-(0)", Side::R, Anchor::ScreenEnd { a0: -1.0, b0: 1.0 }, 1.0);
        assert!(t.m_value(0.5).is_err());
    }

    #[test]
    fn free_constant_reproduces_its_value() {
        let t = tc("cubic+", Side::L, Anchor::FreeConstant { value: 3.0, at: 0.4 }, 0.7);
        assert!((t.m_value(0.4).unwrap() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn lower_boundary_collapses_to_f() {
        let t = tc("quintic(1.5)", Side::L, Anchor::FromInfinity, 1.0);
        for x1 in [-2.0, 0.0, 1.3] {
            assert_eq!(t.eval(Point::lower(x1)).unwrap(), t.function().f(x1));
        }
    }

    fn ode_residual(t: &TangentCoefficient, u: f64) -> f64 {
        let d = |h: f64| (t.m_value(u + h).unwrap() - t.m_value(u - h).unwrap()) / (2.0 * h);
        let dm = (4.0 * d(5e-5) - d(1e-4)) / 3.0;
        t.side.sign() * t.eps * dm + t.m_value(u).unwrap() - t.function().f1(u)
    }

    #[test]
    fn first_order_equation_holds() {
        let cases = [
            tc("exp+", Side::L, Anchor::FromInfinity, 0.5),
            tc("exp-", Side::R, Anchor::FromInfinity, 0.5),
            tc("power 3", Side::R, Anchor::FromInfinity, 1.0),
            tc("quartic-(0)", Side::L, Anchor::ScreenEnd { a0: -1.0, b0: 1.0 }, 1.0),
            tc("two-exp(0.6)", Side::L, Anchor::FromInfinity, 0.5),
        ];
        for t in &cases {
            for u in [-2.5, -1.2, -1.05] {
                let r = ode_residual(t, u);
                assert!(r.abs() < 1e-8 * (1.0 + t.m_value(u).unwrap().abs()), "{:?} {u}: {r}", t.side);
            }
        }
    }

    #[test]
    fn x2_derivative_is_constant_along_a_tangent() {
        let t = tc("exp+", Side::L, Anchor::FromInfinity, 0.5);
        let u = 0.3;
        let seg = tangent_segment(Side::L, u, 0.5);
        let h = 1e-6;
        let dx2 = |x: Point| (t.eval(Point::new(x.x1, x.x2 + h)).unwrap() - t.eval(Point::new(x.x1, x.x2 - h)).unwrap()) / (2.0 * h);
        let (p1, p2) = (seg.at(0.3), seg.at(0.7));
        let expect = t.m_prime(u).unwrap() / 2.0;
        assert!((dx2(p1) - dx2(p2)).abs() < 1e-7);
        assert!((dx2(p1) - expect).abs() < 1e-7, "{} vs {expect}", dx2(p1));
    }

    #[test]
    fn sign_certificates_on_known_domains() {
        tc("exp+", Side::L, Anchor::FromInfinity, 0.5).certify(Ext::NegInf, Ext::PosInf, 200).unwrap();
        tc("exp-", Side::R, Anchor::FromInfinity, 0.5).certify(Ext::NegInf, Ext::PosInf, 200).unwrap();
        tc("cubic-", Side::R, Anchor::FromInfinity, 1.0).certify(Ext::NegInf, Ext::PosInf, 200).unwrap();
        tc("power 3", Side::R, Anchor::FromInfinity, 1.0).certify(Ext::NegInf, Ext::Finite(0.0), 200).unwrap();
        tc("power 3", Side::L, Anchor::FromInfinity, 1.0).certify(Ext::Finite(0.0), Ext::PosInf, 200).unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn cubic_eval_matches_closed_form(x1 in -3.0f64..3.0, h in 0.0f64..1.0, eps in 0.3f64..2.0) {
            let t = tc("cubic+", Side::L, Anchor::FromInfinity, eps);
            let x = Point::new(x1, x1 * x1 + h * eps * eps);
            let u = u_tangent(Side::L, x, eps).unwrap();
            let closed = (6.0 * eps * eps + 3.0 * u * u + 6.0 * eps * u) * (x1 - u) + u.powi(3);
            let got = t.eval(x).unwrap();
            prop_assert!((got - closed).abs() <= 1e-10 * closed.abs().max(1.0));
        }
    }
}
