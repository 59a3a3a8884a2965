//! Geometry of the parabolic strip x₁² ≤ x₂ ≤ x₁² + ε².

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub fn new(x1: f64, x2: f64) -> Self {
        Point { x1, x2 }
    }

    /// Point on the lower parabola.
    pub fn lower(t: f64) -> Self {
        Point::new(t, t * t)
    }

    /// Point on the upper parabola.
    pub fn upper(t: f64, eps: f64) -> Self {
        Point::new(t, t * t + eps * eps)
    }

    pub fn lerp(self, q: Point, s: f64) -> Point {
        Point::new(self.x1 + s * (q.x1 - self.x1), self.x2 + s * (q.x2 - self.x2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StripLocation {
    Interior,
    LowerBoundary,
    UpperBoundary,
    Outside,
}

/// Tangent family: R tangents lie left of their foot on the lower parabola, L to the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    R,
    L,
}

impl Side {
    /// +1 for R, −1 for L.
    pub fn sign(self) -> f64 {
        match self {
            Side::R => 1.0,
            Side::L => -1.0,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::R => "R",
            Side::L => "L",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub p: Point,
    pub q: Point,
}

impl Segment {
    pub fn at(&self, s: f64) -> Point {
        self.p.lerp(self.q, s)
    }
}

/// Boundary tolerance, relative to 1 + x₁².
pub fn tolerance(x1: f64) -> f64 {
    1e-12 * (1.0 + x1 * x1)
}

pub fn classify(x: Point, eps: f64) -> StripLocation {
    let tol = tolerance(x.x1);
    let h = x.x2 - x.x1 * x.x1;
    let e2 = eps * eps;
    if h < -tol || h > e2 + tol {
        StripLocation::Outside
    } else if h.abs() <= tol {
        StripLocation::LowerBoundary
    } else if (h - e2).abs() <= tol {
        StripLocation::UpperBoundary
    } else {
        StripLocation::Interior
    }
}

/// Height above the lower parabola, clamped into [0, ε²]; errors when outside.
fn height(x: Point, eps: f64) -> Result<f64> {
    if classify(x, eps) == StripLocation::Outside {
        return Err(Error::Outside { x1: x.x1, x2: x.x2 });
    }
    Ok((x.x2 - x.x1 * x.x1).clamp(0.0, eps * eps))
}

/// Foot u of the tangent of the given family passing through x.
pub fn u_tangent(side: Side, x: Point, eps: f64) -> Result<f64> {
    let h = height(x, eps)?;
    let r = if classify(x, eps) == StripLocation::UpperBoundary { 0.0 } else { (eps * eps - h).max(0.0).sqrt() };
    Ok(x.x1 + side.sign() * (eps - r))
}

/// The tangent segment with foot u, from its upper end (R) or its foot (L).
pub fn tangent_segment(side: Side, u: f64, eps: f64) -> Segment {
    match side {
        Side::R => Segment { p: Point::upper(u - eps, eps), q: Point::lower(u) },
        Side::L => Segment { p: Point::lower(u), q: Point::upper(u + eps, eps) },
    }
}

/// Slope and intercept of the chord line through (a, a²) and (b, b²).
pub fn chord_line(a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a < b) {
        return Err(Error::Argument(format!("chord needs a < b, got a = {a}, b = {b}")));
    }
    Ok((a + b, -a * b))
}

/// x₂ of the chord line at x₁.
pub fn chord_height(a: f64, b: f64, x1: f64) -> f64 {
    (a + b) * x1 - a * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(Point::new(0.0, 0.0), 1.0), StripLocation::LowerBoundary);
        assert_eq!(classify(Point::new(0.0, 1.0), 1.0), StripLocation::UpperBoundary);
        assert_eq!(classify(Point::new(0.0, 2.0), 1.0), StripLocation::Outside);
        assert_eq!(classify(Point::new(0.0, 0.5), 1.0), StripLocation::Interior);
        assert_eq!(classify(Point::new(1.0, 0.9), 1.0), StripLocation::Outside);
    }

    #[test]
    fn u_tangent_examples() {
        let x = Point::new(0.0, 0.75);
        assert!((u_tangent(Side::R, x, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((u_tangent(Side::L, x, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(u_tangent(Side::R, Point::new(0.0, 0.0), 1.0).unwrap(), 0.0);
        assert!(matches!(u_tangent(Side::R, Point::new(0.0, 2.0), 1.0), Err(Error::Outside { .. })));
    }

    #[test]
    fn segment_examples() {
        let r = tangent_segment(Side::R, 0.0, 1.0);
        assert_eq!((r.p, r.q), (Point::new(-1.0, 2.0), Point::new(0.0, 0.0)));
        let l = tangent_segment(Side::L, 0.0, 1.0);
        assert_eq!((l.p, l.q), (Point::new(0.0, 0.0), Point::new(1.0, 2.0)));
        assert_eq!(classify(r.at(0.5), 1.0), StripLocation::Interior);
        assert_eq!(classify(l.at(0.5), 1.0), StripLocation::Interior);
    }

    #[test]
    fn chord_examples() {
        assert_eq!(chord_line(-1.0, 1.0).unwrap(), (0.0, 1.0));
        assert_eq!(chord_line(0.0, 2.0).unwrap(), (2.0, -0.0));
        assert!(chord_line(1.0, 1.0).is_err());
        // maximal chord touches the upper parabola at its midpoint
        let (a, b, eps) = (0.3, 0.3 + 2.0 * 0.7, 0.7);
        let m = 0.5 * (a + b);
        assert!((chord_height(a, b, m) - (m * m + eps * eps)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn families_agree_below_and_split_above(x1 in -5.0f64..5.0, eps in 0.1f64..3.0) {
            let lo = Point::lower(x1);
            let ur = u_tangent(Side::R, lo, eps).unwrap();
            let ul = u_tangent(Side::L, lo, eps).unwrap();
            prop_assert_eq!(ur, ul);
            let hi = Point::upper(x1, eps);
            let d = u_tangent(Side::R, hi, eps).unwrap() - u_tangent(Side::L, hi, eps).unwrap();
            prop_assert!((d - 2.0 * eps).abs() < 1e-9 * (1.0 + x1.abs()));
        }

        #[test]
        fn tangent_points_recover_their_foot(u in -4.0f64..4.0, eps in 0.1f64..2.0, s in 0.01f64..1.0) {
            for side in [Side::R, Side::L] {
                let x = tangent_segment(side, u, eps).at(s);
                let back = u_tangent(side, x, eps).unwrap();
                prop_assert!((back - u).abs() < 1e-10 * (1.0 + u.abs()), "{side} {back} vs {u}");
            }
        }

        #[test]
        fn chords_stay_inside_iff_short(a in -3.0f64..3.0, l in 0.01f64..4.0, eps in 0.2f64..1.5) {
            let b = a + l;
            let m = 0.5 * (a + b);
            // the chord rises highest above the lower parabola at its midpoint
            let gap = chord_height(a, b, m) - (m * m + eps * eps);
            prop_assert_eq!(gap <= 1e-12, l <= 2.0 * eps + 1e-12);
        }
    }
}
