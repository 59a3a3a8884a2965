//! Shared numeric kernel: adaptive Gauss-Kronrod quadrature, integrals against
//! exponential weights with truncated infinite tails, a bracketed root finder
//! and the exponential convolution of f'''.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { rel_tol: 1e-10, abs_tol: 1e-13, max_subdivisions: 2000 }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 10 {
            return Err(Error::Config("max_subdivisions must be at least 10".into()));
        }
        Ok(())
    }
}

/// Extended real number for sources and tails at infinity.
///
/// Serialized as a plain number, or as the strings `"-inf"` / `"+inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "ExtRepr", try_from = "ExtRepr")]
pub enum Ext {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Ext {
    pub fn value(self) -> f64 {
        match self {
            Ext::NegInf => f64::NEG_INFINITY,
            Ext::Finite(x) => x,
            Ext::PosInf => f64::INFINITY,
        }
    }

    pub fn from_f64(x: f64) -> Ext {
        if x == f64::INFINITY {
            Ext::PosInf
        } else if x == f64::NEG_INFINITY {
            Ext::NegInf
        } else {
            Ext::Finite(x)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Ext::Finite(_))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExtRepr {
    Num(f64),
    Tag(String),
}

impl From<Ext> for ExtRepr {
    fn from(e: Ext) -> Self {
        match e {
            Ext::Finite(x) => ExtRepr::Num(x),
            Ext::NegInf => ExtRepr::Tag("-inf".into()),
            Ext::PosInf => ExtRepr::Tag("+inf".into()),
        }
    }
}

impl TryFrom<ExtRepr> for Ext {
    type Error = String;
    fn try_from(r: ExtRepr) -> std::result::Result<Self, String> {
        match r {
            ExtRepr::Num(x) if x.is_finite() => Ok(Ext::Finite(x)),
            ExtRepr::Num(x) => Ok(Ext::from_f64(x)),
            ExtRepr::Tag(s) => match s.as_str() {
                "-inf" => Ok(Ext::NegInf),
                "+inf" | "inf" => Ok(Ext::PosInf),
                _ => Err(format!("expected a number or ±inf, got {s:?}")),
            },
        }
    }
}

impl std::fmt::Display for Ext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ext::NegInf => write!(f, "-inf"),
            Ext::PosInf => write!(f, "+inf"),
            Ext::Finite(x) => write!(f, "{x}"),
        }
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss-Kronrod panel; returns the Kronrod value and an error estimate.
pub fn gk15(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = g(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut fv = [(0.0, 0.0); 7];
    for (j, x) in XGK.iter().take(7).enumerate() {
        let f1 = g(c - h * x);
        let f2 = g(c + h * x);
        fv[j] = (f1, f2);
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let resasc = asc * h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (1.0f64).min((200.0 * err / resasc).powf(1.5));
    }
    (resk * h, err)
}

struct Panel {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive quadrature context: tolerances, points where the integrand may
/// lose smoothness, and the growth parameter bounding integrands at infinity.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub settings: QuadratureSettings,
    pub breaks: Vec<f64>,
    pub eps0: f64,
}

impl Integrator {
    pub fn new(settings: QuadratureSettings, breaks: Vec<f64>, eps0: f64) -> Self {
        Integrator { settings, breaks, eps0 }
    }

    /// Integral over a finite interval; `panel` caps the initial panel width.
    pub fn integrate(&self, g: &dyn Fn(f64) -> f64, a: f64, b: f64, panel: Option<f64>) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if a > b {
            return Ok(-self.integrate(g, b, a, panel)?);
        }
        let mut cuts = vec![a];
        for &br in &self.breaks {
            if br > a && br < b {
                cuts.push(br);
            }
        }
        cuts.push(b);
        let mut heap = BinaryHeap::new();
        let (mut total, mut total_err) = (0.0, 0.0);
        for w in cuts.windows(2) {
            let n = match panel {
                Some(p) if p > 0.0 => ((w[1] - w[0]) / p).ceil().max(1.0) as usize,
                _ => 1,
            };
            let h = (w[1] - w[0]) / n as f64;
            for k in 0..n {
                let lo = w[0] + h * k as f64;
                let hi = if k + 1 == n { w[1] } else { lo + h };
                let (val, err) = gk15(g, lo, hi);
                total += val;
                total_err += err;
                heap.push(Panel { a: lo, b: hi, val, err });
            }
        }
        let s = &self.settings;
        let mut splits = 0;
        while total_err > s.abs_tol.max(s.rel_tol * total.abs()) {
            if splits >= s.max_subdivisions {
                return Err(Error::Accuracy(splits));
            }
            let Some(p) = heap.pop() else { break };
            let mid = 0.5 * (p.a + p.b);
            if p.b - p.a <= 1e-14 * (1.0 + mid.abs()) {
                // Panel at roundoff scale: keep it and accept its estimate.
                total_err -= p.err;
                heap.push(Panel { err: 0.0, ..p });
                if heap.peek().map_or(true, |q| q.err == 0.0) {
                    break;
                }
                continue;
            }
            let (v1, e1) = gk15(g, p.a, mid);
            let (v2, e2) = gk15(g, mid, p.b);
            total += v1 + v2 - p.val;
            total_err += e1 + e2 - p.err;
            heap.push(Panel { a: p.a, b: mid, val: v1, err: e1 });
            heap.push(Panel { a: mid, b: p.b, val: v2, err: e2 });
            splits += 1;
        }
        // Re-sum to shed accumulated update drift.
        Ok(heap.iter().map(|p| p.val).sum())
    }

    /// ∫ g(t) e^{rate (t - anchor)/ε} dt over [lo, hi] with either end possibly infinite.
    pub fn weighted(
        &self,
        g: &dyn Fn(f64) -> f64,
        lo: Ext,
        hi: Ext,
        rate: f64,
        eps: f64,
        anchor: f64,
    ) -> Result<f64> {
        let w = |t: f64| g(t) * (rate * (t - anchor) / eps).exp();
        let panel = Some(eps);
        match (lo, hi) {
            (Ext::Finite(a), Ext::Finite(b)) => self.integrate(&w, a, b, panel),
            (Ext::Finite(a), Ext::PosInf) => {
                let t = self.horizon(g, a, 1.0, rate, eps, anchor)?;
                self.integrate(&w, a, t, panel)
            }
            (Ext::NegInf, Ext::Finite(b)) => {
                let t = self.horizon(g, b, -1.0, rate, eps, anchor)?;
                self.integrate(&w, t, b, panel)
            }
            (Ext::NegInf, Ext::PosInf) => {
                let left = self.weighted(g, Ext::NegInf, Ext::Finite(anchor), rate, eps, anchor)?;
                let right = self.weighted(g, Ext::Finite(anchor), Ext::PosInf, rate, eps, anchor)?;
                Ok(left + right)
            }
            _ => Err(Error::Argument(format!("empty integration range [{lo}, {hi}]"))),
        }
    }

    /// Truncation point for an infinite tail starting at `start` in direction `dir`.
    ///
    /// The weighted integrand is sampled at 5ε, 10ε and 15ε, an exponential
    /// envelope is fitted through the samples, and the tail is cut where the
    /// envelope's remaining mass drops below a tenth of the absolute tolerance.
    fn horizon(&self, g: &dyn Fn(f64) -> f64, start: f64, dir: f64, rate: f64, eps: f64, anchor: f64) -> Result<f64> {
        if rate * dir >= 0.0 {
            return Err(Error::Divergent("weight grows toward the infinite endpoint".into()));
        }
        let decay = rate.abs() / eps - 1.0 / self.eps0;
        if decay <= 0.0 {
            return Err(Error::Divergent(format!("eps = {eps} is not below eps0 = {}", self.eps0)));
        }
        let env = |t: f64| -> f64 {
            let mut m: f64 = 1e-300;
            for j in -1..=1 {
                let s = t + dir * j as f64 * eps / 4.0;
                m = m.max((g(s) * (rate * (s - anchor) / eps).exp()).abs());
            }
            m.ln()
        };
        let ks = [5.0, 10.0, 15.0];
        let ys: Vec<f64> = ks.iter().map(|k| env(start + dir * k * eps)).collect();
        let xs: Vec<f64> = ks.iter().map(|k| k * eps).collect();
        let xm = xs.iter().sum::<f64>() / 3.0;
        let ym = ys.iter().sum::<f64>() / 3.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let fitted = -sxy / sxx;
        let lambda = fitted.max(0.5 * decay).min(rate.abs() / eps);
        let log_c = ym + (-lambda) * (xs[2] - xm);
        let mut dist = xs[2] + ((log_c - (0.1 * lambda * self.settings.abs_tol).ln()) / lambda).max(0.0);
        dist = dist.max(20.0 * eps).min(2000.0 * eps);
        // Guard against an optimistic fit: the last panel must be negligible.
        let w = |t: f64| g(t) * (rate * (t - anchor) / eps).exp();
        let cap = 4000.0 * eps;
        loop {
            let t = start + dir * dist;
            let last = self.integrate(&w, t - dir * eps, t, None)?.abs();
            if last <= 0.1 * self.settings.abs_tol || dist >= cap {
                return Ok(t);
            }
            dist += 10.0 * eps;
        }
    }
}

/// ∫ g(t) e^{rate·t/ε} dt; evaluated in shifted form about the nearest finite endpoint.
pub fn weighted_integral(
    g: &dyn Fn(f64) -> f64,
    lo: Ext,
    hi: Ext,
    rate: f64,
    eps: f64,
    eps0: f64,
    s: &QuadratureSettings,
) -> Result<f64> {
    let anchor = match (lo, hi) {
        (Ext::Finite(a), Ext::Finite(b)) => {
            if rate >= 0.0 {
                b
            } else {
                a
            }
        }
        (Ext::Finite(a), _) => a,
        (_, Ext::Finite(b)) => b,
        _ => 0.0,
    };
    let q = Integrator::new(*s, Vec::new(), eps0);
    let v = q.weighted(g, lo, hi, rate, eps, anchor)?;
    Ok(v * (rate * anchor / eps).exp())
}

/// Bisection-secant hybrid for a continuous function with a sign change.
///
/// Each step tries an Illinois-weighted secant point and falls back to
/// bisection whenever two consecutive steps failed to halve the bracket.
pub fn find_root_monotone(h: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (mut fa, mut fb) = (h(a), h(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo: a, hi: b });
    }
    let mut side = 0i8;
    let mut width = b - a;
    let mut stalls = 0;
    for _ in 0..300 {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let mut x = if stalls >= 2 { mid } else { b - fb * (b - a) / (fb - fa) };
        if !(x > a && x < b) {
            x = mid;
        }
        if x == a || x == b {
            break;
        }
        let fx = h(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a > 0.5 * width {
            stalls += 1;
        } else {
            stalls = 0;
            width = b - a;
        }
    }
    Ok(0.5 * (a + b))
}

/// Zero-screen force from source `c`: the one-sided exponential integral of f'''.
pub fn convolve_force(f3: &dyn Fn(f64) -> f64, c: Ext, u: f64, eps: f64, q: &Integrator) -> Result<f64> {
    match c {
        Ext::PosInf => q.weighted(f3, Ext::Finite(u), Ext::PosInf, -1.0, eps, u),
        Ext::NegInf => q.weighted(f3, Ext::NegInf, Ext::Finite(u), 1.0, eps, u),
        Ext::Finite(c) if u <= c => q.weighted(f3, Ext::Finite(u), Ext::Finite(c), -1.0, eps, u),
        Ext::Finite(c) => q.weighted(f3, Ext::Finite(c), Ext::Finite(u), 1.0, eps, u),
    }
}

/// g_ε(u) = (f''' ∗ e^{-|·|/ε})(u), the sum of both forces from infinity.
pub fn g_eps(f3: &dyn Fn(f64) -> f64, u: f64, eps: f64, q: &Integrator) -> Result<f64> {
    Ok(convolve_force(f3, Ext::PosInf, u, eps, q)? + convolve_force(f3, Ext::NegInf, u, eps, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plain(eps0: f64) -> Integrator {
        Integrator::new(QuadratureSettings::default(), vec![], eps0)
    }

    #[test]
    fn kronrod_is_exact_on_high_degree_polynomials() {
        // degree 23 integrates exactly on a single panel
        let g = |t: f64| t.powi(22) + 3.0 * t.powi(23);
        let (v, _) = gk15(&g, -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn weighted_trivial_and_exp_inner_integral() {
        let s = QuadratureSettings::default();
        let one = |_: f64| 1.0;
        let v = weighted_integral(&one, Ext::NegInf, Ext::Finite(0.0), 1.0, 1.0, f64::INFINITY, &s).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        // ∫_u^∞ e^t e^{-t/ε} dt = e^{u(1-1/ε)} ε/(1-ε); times e^{u/ε} this is e^u at ε = 1/2
        let u = 0.7;
        let eps = 0.5;
        let g = |t: f64| t.exp();
        let v = weighted_integral(&g, Ext::Finite(u), Ext::PosInf, -1.0, eps, 1.0, &s).unwrap();
        let expect = (u * (1.0 - 1.0 / eps)).exp() * eps / (1.0 - eps);
        assert!((v - expect).abs() < 1e-11 * expect, "{v} vs {expect}");
        assert!((v * (u / eps).exp() - u.exp()).abs() < 1e-10);
    }

    #[test]
    fn weighted_cubic_second_derivative_gives_six_at_origin() {
        // m_L(0) for f = t³ at ε = 1 is ε^{-1}∫_0^∞ 3t² e^{-t} dt = 6
        let s = QuadratureSettings::default();
        let g = |t: f64| 3.0 * t * t;
        let v = weighted_integral(&g, Ext::Finite(0.0), Ext::PosInf, -1.0, 1.0, f64::INFINITY, &s).unwrap();
        assert!((v - 6.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn divergent_when_eps_reaches_eps0() {
        let s = QuadratureSettings::default();
        let g = |t: f64| t.exp();
        let r = weighted_integral(&g, Ext::Finite(0.0), Ext::PosInf, -1.0, 1.0, 1.0, &s);
        assert!(matches!(r, Err(Error::Divergent(_))));
    }

    #[test]
    fn extended_reals_round_trip_through_json() {
        for e in [Ext::NegInf, Ext::Finite(-1.5), Ext::PosInf] {
            let s = serde_json::to_string(&e).unwrap();
            assert_eq!(serde_json::from_str::<Ext>(&s).unwrap(), e, "{s}");
        }
        assert_eq!(serde_json::to_string(&Ext::PosInf).unwrap(), "\"+inf\"");
    }

    #[test]
    fn roots_of_examples() {
        assert!(find_root_monotone(&|u| u, -1.0, 1.0, 1e-14).unwrap().abs() < 1e-14);
        let h = |u: f64| u * u + 2.0 * u + 2.0 - 4.0;
        let r = find_root_monotone(&h, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - (3f64.sqrt() - 1.0)).abs() < 1e-13, "{r}");
        assert!(matches!(find_root_monotone(&|u| u * u + 1.0, -1.0, 1.0, 1e-12), Err(Error::Bracket { .. })));
    }

    #[test]
    fn root_of_steep_exponential() {
        let h = |u: f64| (20.0 * u).exp() - 2.0;
        let r = find_root_monotone(&h, -3.0, 3.0, 1e-15).unwrap();
        assert!((r - 2f64.ln() / 20.0).abs() < 1e-14);
    }

    #[test]
    fn linear_third_derivative_convolution() {
        // f''' = t - a gives g_ε = 2ε(u - a)
        let q = plain(f64::INFINITY);
        let a = 0.0;
        let f3 = move |t: f64| t - a;
        let v = g_eps(&f3, 1.0, 1.0, &q).unwrap();
        assert!((v - 2.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn quintic_force_from_infinity() {
        let q = plain(f64::INFINITY);
        let d = 4.0;
        let f3 = move |t: f64| t * t - d;
        let v = convolve_force(&f3, Ext::PosInf, 0.0, 1.0, &q).unwrap();
        assert!((v + 2.0).abs() < 1e-11, "{v}");
        for &u in &[-3.0, -0.4, 2.5] {
            let eps = 0.7;
            let v = convolve_force(&f3, Ext::PosInf, u, eps, &q).unwrap();
            let expect = eps * (u * u + 2.0 * u * eps + 2.0 * eps * eps - d);
            assert!((v - expect).abs() < 1e-11, "{u}: {v} vs {expect}");
        }
    }

    #[test]
    fn exponential_force_is_positive_closed_form() {
        let q = plain(1.0);
        let eps = 0.5;
        let f3 = |t: f64| t.exp();
        for &u in &[-2.0, 0.0, 3.0] {
            let v = convolve_force(&f3, Ext::PosInf, u, eps, &q).unwrap();
            let expect = u.exp() * eps / (1.0 - eps);
            assert!((v - expect).abs() < 1e-10 * expect.max(1.0), "{v} vs {expect}");
        }
    }

    #[test]
    fn zero_screen_force_vanishes_at_source() {
        let q = plain(f64::INFINITY);
        let f3 = |t: f64| -24.0 * t;
        assert_eq!(convolve_force(&f3, Ext::Finite(0.3), 0.3, 1.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn breakpoint_split_handles_jump() {
        let q = Integrator::new(QuadratureSettings::default(), vec![0.0], f64::INFINITY);
        let g = |t: f64| if t < 0.0 { -6.0 } else { 6.0 };
        let v = q.integrate(&g, -1.0, 2.0, None).unwrap();
        assert!((v - 6.0).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn additive_over_adjacent_intervals(a in -3.0f64..0.0, m in 0.0f64..1.0, b in 1.0f64..4.0, eps in 0.2f64..1.5) {
            let q = plain(f64::INFINITY);
            let g = |t: f64| (t * 1.3).sin() + t * t;
            let w = |x: f64, y: f64| q.weighted(&g, Ext::Finite(x), Ext::Finite(y), 1.0, eps, b).unwrap();
            let whole = w(a, b);
            let parts = w(a, m) + w(m, b);
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1.0));
        }

        #[test]
        fn root_is_deterministic(c in -0.9f64..0.9) {
            let h = |u: f64| u.powi(3) + u - c;
            let r1 = find_root_monotone(&h, -1.0, 1.0, 1e-14).unwrap();
            let r2 = find_root_monotone(&h, -1.0, 1.0, 1e-14).unwrap();
            prop_assert_eq!(r1.to_bits(), r2.to_bits());
            prop_assert!(h(r1).abs() < 1e-12);
        }
    }
}
