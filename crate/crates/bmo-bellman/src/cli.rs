//! Command-line front end. The binary only parses arguments and calls [`run`].

use crate::boundary::{BoundaryFunction, PiecewisePoly};
use crate::candidate::{foliate, Figure, Foliation};
use crate::error::{Error, Result};
use crate::forces::{compare_orders, BalanceOptions, BalancedFamily};
use crate::geometry::{Point, Side};
use crate::numerics::QuadratureSettings;
use crate::optimizers::{bmo_norm, build_optimizer, moments, MomentTriple, TestFunction};
use crate::verify::{examples_suite, run_all, Report, SuiteSizes};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Parser)]
#[command(name = "bmo-bellman", version, about = "Bellman functions on BMO via extremal foliations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the balancing trace and a comparison of both pass orders as JSON on stderr
    #[arg(long, global = true)]
    pub trace: bool,
    /// Seed for every randomized suite
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override a tolerance, e.g. rel_tol=1e-12 (repeatable)
    #[arg(long = "tol-override", value_name = "KEY=VAL", global = true)]
    pub tol_override: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the foliation, list its figures and write the JSON document
    Foliate,
    /// CSV grid x1,x2,B,figure
    Eval,
    /// Optimizer at one point with its moments and BMO norm
    Optimizer {
        #[arg(long, allow_negative_numbers = true)]
        x1: f64,
        #[arg(long, allow_negative_numbers = true)]
        x2: f64,
    },
    /// Run every verification suite
    Verify,
    /// Closed-form regression suite
    Examples,
    /// Polylines of extremals and figure boundaries, optionally rendered to SVG
    Plot {
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

/// Either a built-in name or a piecewise polynomial f''' with values of f, f', f'' at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub name: Option<String>,
    pub knots: Option<Vec<f64>>,
    pub f3: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub f0: f64,
    #[serde(default)]
    pub f1: f64,
    #[serde(default)]
    pub f2: f64,
    pub declared_n: Option<usize>,
    pub search: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x1_min: f64,
    pub x1_max: f64,
    /// abscissas
    pub n1: usize,
    /// fractions of the strip height at each abscissa
    pub n2: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x1_min: -3.0, x1_max: 3.0, n1: 61, n2: 11 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub verify: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { verify: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub max_passes: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let q = QuadratureSettings::default();
        Tolerances {
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            max_subdivisions: q.max_subdivisions,
            max_passes: BalanceOptions::default().max_passes,
        }
    }
}

impl Tolerances {
    pub fn quadrature(&self) -> QuadratureSettings {
        QuadratureSettings { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_subdivisions: self.max_subdivisions }
    }

    /// Applies one `KEY=VAL` override.
    pub fn apply(&mut self, kv: &str) -> Result<()> {
        let (key, val) = kv.split_once('=').ok_or_else(|| Error::Config(format!("override {kv:?} is not KEY=VAL")))?;
        let bad = || Error::Config(format!("bad value {val:?} for {key}"));
        match key.trim() {
            "rel_tol" => self.rel_tol = val.trim().parse().map_err(|_| bad())?,
            "abs_tol" => self.abs_tol = val.trim().parse().map_err(|_| bad())?,
            "max_subdivisions" => self.max_subdivisions = val.trim().parse().map_err(|_| bad())?,
            "max_passes" => self.max_passes = val.trim().parse().map_err(|_| bad())?,
            other => return Err(Error::Config(format!("unknown tolerance {other:?}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub function: FunctionSpec,
    pub eps: f64,
    pub eps0: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub verify: SuiteSizes,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The boundary function after checking ε against its growth parameter.
    pub fn boundary_function(&self) -> Result<BoundaryFunction> {
        let spec = &self.function;
        let f = match (&spec.name, &spec.knots, &spec.f3) {
            (Some(name), None, None) => {
                let f = BoundaryFunction::from_name(name)?;
                if let Some(e0) = self.eps0 {
                    if e0 > f.eps0 {
                        return Err(Error::Config(format!("eps0 = {e0} exceeds the growth bound {} of {name}", f.eps0)));
                    }
                    BoundaryFunction { eps0: e0, ..f }
                } else {
                    f
                }
            }
            (None, knots, Some(f3)) => {
                let poly = PiecewisePoly::new(knots.clone().unwrap_or_default(), f3.clone(), spec.f0, spec.f1, spec.f2)?;
                let n = spec.declared_n.ok_or_else(|| Error::Config("piecewise functions need declared_n".into()))?;
                let [lo, hi] = spec.search.unwrap_or([-10.0, 10.0]);
                BoundaryFunction::custom(poly, self.eps0.unwrap_or(f64::INFINITY), n, (lo, hi))?
            }
            _ => return Err(Error::Config("function needs either `name` or `f3` (with optional `knots`)".into())),
        };
        if !(self.eps > 0.0 && self.eps < f.eps0) {
            return Err(Error::Config(format!("eps = {} must lie in (0, eps0 = {})", self.eps, f.eps0)));
        }
        if self.grid.n1 < 2 || self.grid.n2 < 2 || !(self.grid.x1_min < self.grid.x1_max) {
            return Err(Error::Config("grid needs n1, n2 ≥ 2 and x1_min < x1_max".into()));
        }
        self.tolerances.quadrature().validate()?;
        Ok(f)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Config(format!("write failed: {e}"))
}

/// Configuration plus command-line overrides, ready to build from.
struct Setup {
    cfg: RunConfig,
    f: Arc<BoundaryFunction>,
}

impl Setup {
    fn new(cli: &Cli) -> Result<Self> {
        let path = cli.config.as_deref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
        let mut cfg = RunConfig::load(path)?;
        for kv in &cli.tol_override {
            cfg.tolerances.apply(kv)?;
        }
        if let Some(seed) = cli.seed {
            cfg.seeds.verify = seed;
        }
        let f = Arc::new(cfg.boundary_function()?);
        Ok(Setup { cfg, f })
    }

    fn opts(&self) -> BalanceOptions {
        BalanceOptions { max_passes: self.cfg.tolerances.max_passes, ..BalanceOptions::default() }
    }

    fn build(&self, trace: bool) -> Result<(Foliation, BalancedFamily)> {
        let settings = self.cfg.tolerances.quadrature();
        let (fol, family) = foliate(self.f.clone(), self.cfg.eps, settings, self.opts())?;
        if trace {
            let orders = compare_orders(self.f.clone(), self.cfg.eps, settings)?;
            let doc = serde_json::json!({ "trace": family.trace, "orders": orders });
            eprintln!("{doc}");
        }
        Ok((fol, family))
    }
}

/// Runs one command and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Examples => {
            let checks = examples_suite();
            let mut out = output(cli.out.as_deref())?;
            for c in &checks {
                writeln!(out, "{:<12} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail).map_err(io)?;
            }
            Ok(if checks.iter().all(|c| c.pass) { 0 } else { 5 })
        }
        Command::Foliate => {
            let setup = Setup::new(cli)?;
            let (fol, _) = setup.build(cli.trace)?;
            let doc = fol.document();
            println!("{doc}");
            if let Some(p) = &cli.out {
                let json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Construction(e.to_string()))?;
                std::fs::write(p, json + "\n").map_err(io)?;
            }
            Ok(0)
        }
        Command::Eval => {
            let setup = Setup::new(cli)?;
            let (fol, _) = setup.build(cli.trace)?;
            let rows = eval_grid(&fol, &setup.cfg.grid)?;
            let mut w = csv::Writer::from_writer(output(cli.out.as_deref())?);
            for r in &rows {
                w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
            }
            w.flush().map_err(io)?;
            Ok(0)
        }
        Command::Optimizer { x1, x2 } => {
            let setup = Setup::new(cli)?;
            let (fol, _) = setup.build(cli.trace)?;
            let report = optimizer_report(&fol, Point::new(*x1, *x2), setup.cfg.verify.resolution)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Construction(e.to_string()))?;
            writeln!(output(cli.out.as_deref())?, "{json}").map_err(io)?;
            Ok(0)
        }
        Command::Verify => {
            let setup = Setup::new(cli)?;
            let (fol, _) = setup.build(cli.trace)?;
            let reports = run_all(&fol, setup.cfg.verify, setup.cfg.seeds.verify);
            for r in &reports {
                println!("{r}");
            }
            if let Some(p) = &cli.out {
                let mut text = String::from(Report::CSV_HEADER);
                text.push('\n');
                for r in &reports {
                    text.push_str(&r.csv_row());
                    text.push('\n');
                }
                std::fs::write(p, text).map_err(io)?;
            }
            Ok(if reports.iter().all(|r| r.pass) { 0 } else { 5 })
        }
        Command::Plot { svg } => {
            let setup = Setup::new(cli)?;
            let (fol, _) = setup.build(cli.trace)?;
            let lines = polylines(&fol, &setup.cfg.grid)?;
            let mut w = csv::Writer::from_writer(output(cli.out.as_deref())?);
            for (id, pl) in lines.iter().enumerate() {
                for p in &pl.points {
                    w.serialize(PlotRow { id, kind: pl.kind, x1: p.x1, x2: p.x2 }).map_err(|e| Error::Config(e.to_string()))?;
                }
            }
            w.flush().map_err(io)?;
            if let Some(path) = svg {
                std::fs::write(path, render_svg(&lines, fol.eps)).map_err(io)?;
            }
            Ok(0)
        }
    }
}

/// One CSV row of `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub x1: f64,
    pub x2: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub figure: String,
}

/// B on the configured grid; x₂ runs over fractions of the strip height.
pub fn eval_grid(fol: &Foliation, grid: &GridSpec) -> Result<Vec<EvalRow>> {
    let (n1, n2) = (grid.n1, grid.n2);
    let eps = fol.eps;
    (0..n1 * n2)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n2, k % n2);
            let x1 = grid.x1_min + (grid.x1_max - grid.x1_min) * i as f64 / (n1 - 1) as f64;
            let x2 = x1 * x1 + eps * eps * j as f64 / (n2 - 1) as f64;
            let (b, tag) = fol.eval_tagged(Point::new(x1, x2))?;
            Ok(EvalRow { x1, x2, b, figure: tag.into() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub point: Point,
    #[serde(rename = "B")]
    pub b: f64,
    pub figure: String,
    pub test_function: TestFunction,
    pub moments: MomentTriple,
    pub bmo_norm: f64,
}

pub fn optimizer_report(fol: &Foliation, x: Point, resolution: usize) -> Result<OptimizerReport> {
    let (b, tag) = fol.eval_tagged(x)?;
    let phi = build_optimizer(x, fol)?;
    let m = moments(&phi, fol.function())?;
    let norm = bmo_norm(&phi, resolution);
    Ok(OptimizerReport { point: x, b, figure: tag.into(), test_function: phi, moments: m, bmo_norm: norm })
}

/// A labelled polyline for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub kind: &'static str,
    pub points: Vec<Point>,
}

#[derive(Debug, Serialize)]
struct PlotRow {
    id: usize,
    kind: &'static str,
    x1: f64,
    x2: f64,
}

/// Segment from the foot u on the lower parabola to its tangency point with the upper one.
fn tangent_segment(side: Side, u: f64, eps: f64) -> Polyline {
    let w = u - side.sign() * eps;
    Polyline { kind: "extremal", points: vec![Point::lower(u), Point::upper(w, eps)] }
}

fn chord(a: f64, b: f64, kind: &'static str) -> Polyline {
    Polyline { kind, points: vec![Point::lower(a), Point::lower(b)] }
}

/// Strip boundaries, a fan of extremals per figure and the figure boundaries,
/// restricted to the grid's x₁-range. Every vertex is checked to lie in the closed strip.
pub fn polylines(fol: &Foliation, grid: &GridSpec) -> Result<Vec<Polyline>> {
    let eps = fol.eps;
    let (lo, hi) = (grid.x1_min, grid.x1_max);
    let n = 200;
    let curve = |kind, lift: f64| Polyline {
        kind,
        points: (0..=n)
            .map(|k| {
                let t = lo + (hi - lo) * k as f64 / n as f64;
                Point::new(t, t * t + lift)
            })
            .collect(),
    };
    let mut out = vec![curve("lower", 0.0), curve("upper", eps * eps)];
    let fan = 12;
    for fig in &fol.figures {
        match fig {
            Figure::Tangent { side, lo: a, hi: b, .. } => {
                // feet whose segment meets the plotting window
                let a = if a.is_finite() { a.value() } else { lo - eps };
                let b = if b.is_finite() { b.value() } else { hi + eps };
                let (a, b) = (a.max(lo - eps), b.min(hi + eps));
                if a < b {
                    for k in 0..=fan {
                        out.push(tangent_segment(*side, a + (b - a) * k as f64 / fan as f64, eps));
                    }
                }
            }
            Figure::Cup { cup, a, b } => {
                for k in 1..=fan {
                    let ch = cup.chord((b - a) * k as f64 / fan as f64)?;
                    out.push(chord(ch.a, ch.b, if k == fan { "boundary" } else { "extremal" }));
                }
            }
            Figure::Angle { v, .. } => {
                for side in [Side::R, Side::L] {
                    out.push(Polyline { kind: "boundary", ..tangent_segment(side, *v, eps) });
                }
            }
            Figure::Trolleybus { side, a0, b0, .. } => {
                out.push(chord(*a0, *b0, "boundary"));
                for u in [*a0, *b0] {
                    out.push(Polyline { kind: "boundary", ..tangent_segment(*side, u, eps) });
                }
            }
        }
    }
    for pl in &out {
        for p in &pl.points {
            let tol = 1e-9 * (1.0 + p.x2.abs());
            if p.x2 < p.x1 * p.x1 - tol || p.x2 > p.x1 * p.x1 + eps * eps + tol {
                return Err(Error::Construction(format!("plot vertex ({}, {}) leaves the strip", p.x1, p.x2)));
            }
        }
    }
    Ok(out)
}

/// Minimal SVG rendering of the polylines.
pub fn render_svg(lines: &[Polyline], eps: f64) -> String {
    let (w, h, pad) = (900.0, 600.0, 20.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in lines.iter().flat_map(|l| l.points.iter()) {
        x0 = x0.min(p.x1);
        x1 = x1.max(p.x1);
        y0 = y0.min(p.x2);
        y1 = y1.max(p.x2);
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <title>parabolic strip, eps = {eps}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for l in lines {
        let (color, width) = match l.kind {
            "lower" | "upper" => ("black", 1.5),
            "boundary" => ("crimson", 1.2),
            _ => ("steelblue", 0.6),
        };
        let path: Vec<String> = l.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x1), sy(p.x2))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
            path.join(" ")
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
