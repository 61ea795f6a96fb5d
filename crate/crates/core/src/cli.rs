//! Command-line front end.
//!
//! A run is configured by an optional flat `key = value` file (`#` starts a
//! comment) overridden by flags. Every run writes `<out>/report.json` and
//! numeric tables under `<out>/series/`.
//!
//! `report.json` layout:
//!
//! ```text
//! { "header": { "tool", "version", "generated_unix" },
//!   "body":   { "command", "config", "outputs", "assertions": [{ "name", "passed", "detail" }],
//!               "converged", "passed", "error" } }
//! ```
//!
//! Only the header depends on the wall clock. Exit codes: 0 pass, 1 assertion
//! failure, 2 configuration error, 3 numerical non-convergence.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::barrier::{self, BarrierSpec};
use crate::closed_forms;
use crate::hopf::{self, HalfSpaceSetup, RegionSet};
use crate::solver::{self, Domain1D, GradedGrid, SolveOptions};
use crate::{Error, FracParams, QuadratureSpec, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    EigenVerify,
    BarrierCheck,
    ScaledLimit,
    Supersolution,
    Solve,
    ExponentFit,
    HopfSplit,
    HopfScan,
}

impl Command {
    fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default()
    }

    fn default_n(self) -> usize {
        match self {
            Command::ScaledLimit | Command::HopfSplit | Command::HopfScan => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestField {
    Flattened,
    Monotone,
    Even,
}

#[derive(Debug, Parser)]
#[command(name = "fracplap", version, about = "Numerical checks for the fractional p-Laplacian")]
pub struct Cli {
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long = "R")]
    pub r: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Geometric range `2^-4..2^-9` or a comma-separated list.
    #[arg(long)]
    pub deltas: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Constant source term for `solve` and `exponent-fit`.
    #[arg(long)]
    pub f: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long, value_enum)]
    pub field: Option<TestField>,
    #[arg(long)]
    pub inner_radius: Option<f64>,
    #[arg(long)]
    pub outer_radius: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Fully resolved configuration, echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub nu: f64,
    pub eta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub delta: f64,
    pub deltas: Vec<f64>,
    /// `None` selects each command's own default.
    pub tol: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub f: f64,
    pub cells: usize,
    pub layers: usize,
    pub field: TestField,
    pub quadrature: QuadratureSpec,
}

const KEYS: &[&str] = &[
    "command",
    "s",
    "p",
    "n",
    "nu",
    "eta",
    "R",
    "delta",
    "deltas",
    "tol",
    "out",
    "seed",
    "f",
    "cells",
    "layers",
    "field",
    "inner_radius",
    "outer_radius",
    "rel_tol",
];

/// Parses the flat key-value format; unknown keys are rejected.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if map.insert(k.to_owned(), v.to_owned()).is_some() {
            return Err(ConfigError(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(map)
}

/// `a^-i..a^-j` (ratio 1/a between terms) or a comma-separated list.
pub fn parse_deltas(text: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = || ConfigError(format!("cannot parse δ sequence '{text}'"));
    let out: Vec<f64> = if let Some((lo, hi)) = text.split_once("..") {
        let pow = |t: &str| -> Result<(f64, i32), ConfigError> {
            let (b, e) = t.trim().split_once('^').ok_or_else(bad)?;
            Ok((b.trim().parse().map_err(|_| bad())?, e.trim().parse().map_err(|_| bad())?))
        };
        let ((b1, e1), (b2, e2)) = (pow(lo)?, pow(hi)?);
        if b1 != b2 || !(b1 > 1.0) {
            return Err(bad());
        }
        let step = if e2 >= e1 { 1 } else { -1 };
        let mut v = Vec::new();
        let mut e = e1;
        loop {
            v.push(b1.powi(e));
            if e == e2 {
                break;
            }
            e += step;
        }
        v
    } else {
        text.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if out.is_empty() || out.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(bad());
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError(format!("invalid value '{v}' for '{key}'")))
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(command: Command, o: &Overrides) -> Result<Self, ConfigError> {
        let file = match &o.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(c) = file.get("command") {
            if *c != command.name() {
                return Err(ConfigError(format!("config file is for '{c}', not '{}'", command.name())));
            }
        }
        fn pick<T: std::str::FromStr + Clone>(
            flag: &Option<T>,
            file: &BTreeMap<String, String>,
            key: &str,
        ) -> Result<Option<T>, ConfigError> {
            match flag {
                Some(v) => Ok(Some(v.clone())),
                None => file.get(key).map(|v| parse_value(key, v)).transpose(),
            }
        }
        let s = pick(&o.s, &file, "s")?.unwrap_or(0.5);
        let field = match (&o.field, file.get("field")) {
            (Some(f), _) => *f,
            (None, Some(v)) => TestField::from_str(v, true).map_err(|_| ConfigError(format!("invalid value '{v}' for 'field'")))?,
            (None, None) => TestField::Flattened,
        };
        let deltas = match (&o.deltas, file.get("deltas")) {
            (Some(t), _) => parse_deltas(t)?,
            (None, Some(t)) => parse_deltas(t)?,
            (None, None) => parse_deltas("2^-4..2^-9")?,
        };
        let base = QuadratureSpec::default();
        let quadrature = QuadratureSpec {
            inner_radius: pick(&o.inner_radius, &file, "inner_radius")?.unwrap_or(base.inner_radius),
            outer_radius: pick(&o.outer_radius, &file, "outer_radius")?.unwrap_or(base.outer_radius),
            target_rel_tol: pick(&o.rel_tol, &file, "rel_tol")?.unwrap_or(base.target_rel_tol),
            ..base
        };
        let cfg = RunConfig {
            command,
            n: pick(&o.n, &file, "n")?.unwrap_or(command.default_n()),
            s,
            p: pick(&o.p, &file, "p")?.unwrap_or(3.0),
            nu: pick(&o.nu, &file, "nu")?.unwrap_or(0.5 * s),
            eta: pick(&o.eta, &file, "eta")?.unwrap_or(RegionSet::DEFAULT_ETA),
            r: pick(&o.r, &file, "R")?.unwrap_or(RegionSet::DEFAULT_R),
            delta: pick(&o.delta, &file, "delta")?.unwrap_or(2f64.powi(-6)),
            deltas,
            tol: pick(&o.tol, &file, "tol")?,
            out: pick(&o.out, &file, "out")?.unwrap_or_else(|| PathBuf::from("fracplap-out")),
            seed: pick(&o.seed, &file, "seed")?.unwrap_or(0),
            f: pick(&o.f, &file, "f")?.unwrap_or(1.0),
            cells: pick(&o.cells, &file, "cells")?.unwrap_or(32),
            layers: pick(&o.layers, &file, "layers")?.unwrap_or(12),
            field,
            quadrature,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        FracParams::new(self.n, self.s, self.p).map_err(|e| ConfigError(e.to_string()))?;
        self.quadrature.validate().map_err(|e| ConfigError(e.to_string()))?;
        if !(self.nu > 0.0 && self.nu <= self.s) {
            return err(format!("nu = {} must lie in (0, s]", self.nu));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return err(format!("tol = {t} must be positive"));
            }
        }
        if !self.f.is_finite() {
            return err("f must be finite".into());
        }
        if self.cells < 2 {
            return err("cells must be at least 2".into());
        }
        Ok(())
    }

    pub fn params(&self) -> FracParams {
        FracParams::new(self.n, self.s, self.p).expect("validated")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Assertion {
    Assertion {
        name: name.to_owned(),
        passed,
        detail,
    }
}

/// A numeric table written as `series/<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    fn new(name: &str, columns: &[&str]) -> Self {
        Series {
            name: name.to_owned(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    AssertionFailure = 1,
    ConfigError = 2,
    NonConvergence = 3,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub body: Value,
    pub series: Vec<Series>,
}

#[derive(Default)]
struct Collected {
    outputs: Value,
    assertions: Vec<Assertion>,
    series: Vec<Series>,
    converged: bool,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn quad_for(cfg: &RunConfig) -> QuadratureSpec {
    cfg.quadrature
}

fn seeded_ball_points(rng: &mut ChaCha8Rng, n: usize, count: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| loop {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
            if x.iter().map(|v| v * v).sum::<f64>() < radius * radius {
                break x;
            }
        })
        .collect()
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 0.1 && r <= 1.0 {
            break x.into_iter().map(|v| v / r).collect();
        }
    }
}

fn run_constants(cfg: &RunConfig) -> crate::Result<Collected> {
    let (s, p, nu) = (cfg.s, cfg.p, cfg.nu);
    let tail = closed_forms::left_tail(s, p);
    let tail_numeric = closed_forms::left_tail_numeric(s, p);
    let f1 = closed_forms::c_nu_formula1(s, p, nu)?;
    let f2 = closed_forms::c_nu_formula2(s, p, nu)?;
    let c_s = closed_forms::c_nu(s, p, s)?;
    let c = f1.value;
    let nd = if cfg.n >= 2 {
        Some(closed_forms::c_nu_n(s, p, nu, cfg.n)?)
    } else {
        None
    };
    let mut table = Series::new("c_nu", &["nu", "c_nu"]);
    for k in 1..=20 {
        let v = s * k as f64 / 20.0;
        table.rows.push(vec![v, closed_forms::c_nu(s, p, v)?]);
    }
    let mut a = vec![check(
        "left_tail",
        (tail_numeric.value - tail).abs() <= 1e-12 * tail,
        format!("numeric {} vs 1/(ps) = {tail}", tail_numeric.value),
    )];
    a.push(check("c_s_vanishes", c_s.abs() < 1e-6, format!("C_s = {c_s:e}")));
    if nu < s {
        a.push(check("c_nu_positive", c > 0.0, format!("C_nu = {c}")));
    }
    Ok(Collected {
        outputs: json!({
            "left_tail": tail,
            "left_tail_numeric": tail_numeric.value,
            "c_nu": c,
            "c_nu_error": f1.error,
            "c_nu_minus_c_s": f2.value,
            "c_s": c_s,
            "nu_threshold": closed_forms::nu_threshold(s, p),
            "eigen_constants_n": nd.as_ref().map(to_value),
        }),
        assertions: a,
        series: vec![table],
        converged: f1.converged && f2.converged && tail_numeric.converged,
    })
}

fn run_eigen(cfg: &RunConfig) -> crate::Result<Collected> {
    let params = cfg.params();
    let rep = closed_forms::verify_halfspace_eigen(&params, cfg.nu, &[0.5, 1.0, 2.0], &quad_for(cfg))?;
    let tol = cfg.tol.unwrap_or(1e-3);
    let a = if rep.degenerate {
        check(
            "degenerate_abs",
            rep.max_abs_deviation < 1e-4,
            format!("max abs deviation {:e}", rep.max_abs_deviation),
        )
    } else {
        check(
            "eigen_rel",
            rep.max_rel_deviation < tol,
            format!("max rel deviation {:e} (tol {tol:e})", rep.max_rel_deviation),
        )
    };
    let mut t = Series::new("eigen", &["x", "computed", "expected"]);
    t.rows = rep.probes.iter().map(|r| vec![r.x, r.computed, r.expected]).collect();
    Ok(Collected {
        converged: rep.all_evaluated,
        outputs: to_value(&rep),
        assertions: vec![a],
        series: vec![t],
    })
}

fn run_barrier(cfg: &RunConfig) -> crate::Result<Collected> {
    let params = cfg.params();
    let spec = BarrierSpec::with_nu(cfg.nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<Vec<f64>> = (1..=8)
        .map(|k| {
            let dist = spec.epsilon_shell * 2f64.powi(-k);
            let dir = if cfg.n == 1 {
                vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }]
            } else {
                unit_direction(&mut rng, cfg.n)
            };
            dir.into_iter().map(|v| v * (1.0 + dist)).collect()
        })
        .collect();
    let rep = barrier::barrier_lower_bound_check(&spec, &params, &samples, &quad_for(cfg))?;
    let mut t = Series::new("barrier", &["dist", "value", "ratio"]);
    t.rows = rep.samples.iter().map(|s| vec![s.dist, s.value, s.ratio]).collect();
    Ok(Collected {
        converged: rep.samples.iter().all(|s| s.failure.is_none()),
        assertions: vec![check(
            "bounded_away_from_zero",
            rep.bounded_away_from_zero,
            format!("min ratio {}", rep.min_ratio),
        )],
        outputs: to_value(&rep),
        series: vec![t],
    })
}

fn run_scaled_limit(cfg: &RunConfig) -> crate::Result<Collected> {
    let params = cfg.params();
    let spec = BarrierSpec::with_nu(cfg.nu)?;
    let ds: Vec<f64> = (2..=8).map(|k| 2f64.powi(-k)).collect();
    let rep = barrier::scaled_limit_scan(&spec, &params, &ds, &quad_for(cfg))?;
    let tol = cfg.tol.unwrap_or(0.05);
    let mut t = Series::new("scaled_limit", &["d", "v"]);
    t.rows = rep.d.iter().zip(&rep.v).map(|(d, v)| vec![*d, *v]).collect();
    Ok(Collected {
        converged: rep.v.iter().all(|v| v.is_finite()),
        assertions: vec![check(
            "limit",
            rep.rel_deviation < tol,
            format!("extrapolated {} vs {} (rel {:e})", rep.extrapolated, rep.target, rep.rel_deviation),
        )],
        outputs: to_value(&rep),
        series: vec![t],
    })
}

fn run_supersolution(cfg: &RunConfig) -> crate::Result<Collected> {
    let params = cfg.params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = seeded_ball_points(&mut rng, cfg.n, 20, 1.0);
    let rep = barrier::g_supersolution_check(&params, &samples, &quad_for(cfg), false)?;
    let mut t = Series::new("supersolution", &["x_n", "value"]);
    t.rows = rep.samples.iter().map(|g| vec![g.x[cfg.n - 1], g.i_value]).collect();
    Ok(Collected {
        converged: true,
        assertions: vec![check("positive", rep.all_positive, format!("min {}", rep.min))],
        outputs: to_value(&rep),
        series: vec![t],
    })
}

fn solve_for(cfg: &RunConfig) -> crate::Result<solver::SolveResult> {
    if cfg.n != 1 {
        return Err(Error::UnsupportedDimension {
            n: cfg.n,
            reason: "the solver works on intervals",
        });
    }
    let grid = GradedGrid::new(Domain1D::new(-1.0, 1.0)?, cfg.cells, 0.5, cfg.layers)?;
    let source = ScalarField::constant(1, cfg.f);
    let opts = SolveOptions {
        tol: cfg.tol,
        ..SolveOptions::default()
    };
    solver::solve(&grid, &source, &cfg.params(), &quad_for(cfg), &opts)
}

fn solution_series(res: &solver::SolveResult) -> Series {
    let dom = res.grid.domain();
    let mut t = Series::new("solution", &["x", "u", "dist"]);
    t.rows = res
        .grid
        .nodes()
        .iter()
        .zip(&res.values)
        .map(|(x, u)| vec![*x, *u, dom.dist_to_boundary(*x)])
        .collect();
    t
}

fn run_solve(cfg: &RunConfig) -> crate::Result<Collected> {
    let res = solve_for(cfg)?;
    let min = res.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut a = vec![check(
        "converged",
        res.converged,
        format!("residual {:e} (tol {:e})", res.residual_sup, res.tolerance),
    )];
    if cfg.f >= 0.0 {
        a.push(check("nonnegative", min >= -res.tolerance, format!("min {min:e}")));
    }
    Ok(Collected {
        converged: res.converged,
        outputs: json!({
            "sup_norm": res.sup_norm(),
            "residual_sup": res.residual_sup,
            "tolerance": res.tolerance,
            "iterations": res.iterations,
            "converged": res.converged,
            "log": to_value(&res.log),
        }),
        assertions: a,
        series: vec![solution_series(&res)],
    })
}

/// Fitting window for a grid: from the innermost node out to 2^-6 of the base cell.
pub fn innermost_window(grid: &GradedGrid) -> (f64, f64) {
    let nodes = grid.nodes();
    let h = nodes[grid.boundary_layers() + 1] - nodes[0];
    (h * 2f64.powi(-(grid.boundary_layers() as i32)) * 0.99, h * 2f64.powi(-6) * 1.01)
}

fn run_exponent_fit(cfg: &RunConfig) -> crate::Result<Collected> {
    let res = solve_for(cfg)?;
    let window = innermost_window(&res.grid);
    let fit = solver::fit_boundary_exponent(&res, window)?;
    let dom = res.grid.domain();
    let mut t = Series::new("boundary_profile", &["dist", "abs_u"]);
    t.rows = res
        .grid
        .nodes()
        .iter()
        .zip(&res.values)
        .map(|(x, u)| (dom.dist_to_boundary(*x), u.abs()))
        .filter(|(d, _)| *d > 0.0)
        .map(|(d, u)| vec![d, u])
        .collect();
    let upper = cfg.s + 0.05;
    let lower = if cfg.p == 2.0 { cfg.s - 0.05 } else { 0.0 };
    Ok(Collected {
        converged: res.converged,
        assertions: vec![
            check("converged", res.converged, format!("residual {:e}", res.residual_sup)),
            check(
                "exponent_bracket",
                fit.nu_hat > lower && fit.nu_hat <= upper,
                format!("nu_hat {} in ({lower}, {upper}]", fit.nu_hat),
            ),
            check("r_squared", fit.r_squared > 0.99, format!("r² {}", fit.r_squared)),
        ],
        outputs: json!({ "fit": to_value(&fit), "sup_norm": res.sup_norm(), "residual_sup": res.residual_sup }),
        series: vec![t],
    })
}

fn hopf_setup(cfg: &RunConfig) -> crate::Result<HalfSpaceSetup> {
    let u = match cfg.field {
        TestField::Flattened => hopf::fields::flattened(cfg.n),
        TestField::Monotone => hopf::fields::monotone(cfg.n),
        TestField::Even => hopf::fields::even(cfg.n),
    };
    HalfSpaceSetup::new(0.0, cfg.params(), u, ScalarField::zero(cfg.n))
}

fn normal_derivatives(setup: &HalfSpaceSetup) -> crate::Result<Vec<(f64, f64)>> {
    let w = hopf::w_lambda(setup.u(), setup.lambda());
    let n = setup.params().n();
    (0..10)
        .map(|k| {
            let t = -0.9 + 0.2 * k as f64;
            let mut b = vec![0.0; n];
            b[0] = setup.lambda();
            b[n - 1] = t;
            Ok((t, hopf::normal_derivative(&w, &b, 1e-4)?))
        })
        .collect()
}

fn run_hopf_split(cfg: &RunConfig) -> crate::Result<Collected> {
    let setup = hopf_setup(cfg)?;
    let regions = RegionSet::new(cfg.delta, cfg.eta, cfg.r)?;
    let x_bar = [setup.lambda() + cfg.delta, 0.0];
    let rep = hopf::split_i_ii(&setup, &x_bar, &regions, &quad_for(cfg), true)?;
    let tol = cfg.tol.unwrap_or(1e-6);
    let scale = rep.i_total.abs() + rep.ii_total.abs();
    let rem = rep.remainder.unwrap_or(f64::NAN).abs();
    let allowed = tol * scale + rep.error_estimate + rep.direct_error.unwrap_or(0.0) + 1e-12;
    let mut t = Series::new("split", &["delta", "i_total", "ii_total", "direct"]);
    t.rows
        .push(vec![rep.delta, rep.i_total, rep.ii_total, rep.direct.unwrap_or(f64::NAN)]);
    Ok(Collected {
        converged: rep.converged,
        assertions: vec![check(
            "split_matches_direct",
            rem <= allowed,
            format!("remainder {rem:e} (allowed {allowed:e})"),
        )],
        outputs: json!({ "regions": to_value(&regions), "split": to_value(&rep) }),
        series: vec![t],
    })
}

fn run_hopf_scan(cfg: &RunConfig) -> crate::Result<Collected> {
    let setup = hopf_setup(cfg)?;
    let rep = hopf::delta_scaling_scan(&setup, &cfg.deltas, cfg.eta, cfg.r, &quad_for(cfg), false)?;
    let nd = normal_derivatives(&setup)?;
    let mut t = Series::new("hopf_scan", &["delta", "i_total", "ii_total", "combined"]);
    t.rows = rep
        .records
        .iter()
        .map(|r| vec![r.delta, r.i_total, r.ii_total, r.combined])
        .collect();
    let mut nt = Series::new("normal_derivative", &["x_tangential", "dw_dnu"]);
    nt.rows = nd.iter().map(|(t, d)| vec![*t, *d]).collect();
    let a = if rep.degenerate {
        vec![check("degenerate", true, "all recorded quantities vanish".into())]
    } else {
        vec![
            check(
                "ii_slope",
                rep.ii_slope_ok,
                format!("slope {:?} (target ≥ {})", rep.ii_slope, rep.ii_slope_target),
            ),
            check("i_negative", rep.i_negative, format!("c = {}", rep.c_fit)),
            check("combined", rep.combined_ok, "I + II ≤ -(c/4)δ".into()),
            check("hypothesis_gate", rep.gate_conforming, "|c|·dist² → 0".into()),
        ]
    };
    Ok(Collected {
        converged: rep.converged,
        outputs: json!({
            "scan": to_value(&rep),
            "normal_derivative": nd.iter().map(|(t, d)| json!({"x_tangential": t, "value": d})).collect::<Vec<_>>(),
        }),
        assertions: a,
        series: vec![t, nt],
    })
}

fn exit_for_error(e: &Error) -> ExitStatus {
    match e {
        Error::NonFinite(_) | Error::InsufficientData(_) => ExitStatus::NonConvergence,
        _ => ExitStatus::ConfigError,
    }
}

/// Executes a resolved configuration without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> RunOutcome {
    let result = match cfg.command {
        Command::Constants => run_constants(cfg),
        Command::EigenVerify => run_eigen(cfg),
        Command::BarrierCheck => run_barrier(cfg),
        Command::ScaledLimit => run_scaled_limit(cfg),
        Command::Supersolution => run_supersolution(cfg),
        Command::Solve => run_solve(cfg),
        Command::ExponentFit => run_exponent_fit(cfg),
        Command::HopfSplit => run_hopf_split(cfg),
        Command::HopfScan => run_hopf_scan(cfg),
    };
    let (c, error, status) = match result {
        Ok(c) => {
            let all = c.assertions.iter().all(|a| a.passed);
            let status = if !c.converged {
                ExitStatus::NonConvergence
            } else if all {
                ExitStatus::Pass
            } else {
                ExitStatus::AssertionFailure
            };
            (c, None, status)
        }
        Err(e) => (Collected::default(), Some(e.to_string()), exit_for_error(&e)),
    };
    let body = json!({
        "command": cfg.command,
        "config": to_value(cfg),
        "outputs": c.outputs,
        "assertions": to_value(&c.assertions),
        "converged": c.converged,
        "passed": status == ExitStatus::Pass,
        "error": error,
    });
    RunOutcome {
        status,
        body,
        series: c.series,
    }
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Writes `report.json` and `series/*.csv` under `dir`.
pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> std::io::Result<()> {
    let series_dir = dir.join("series");
    fs::create_dir_all(&series_dir)?;
    let generated = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let report = json!({
        "header": { "tool": "fracplap", "version": env!("CARGO_PKG_VERSION"), "generated_unix": generated },
        "body": outcome.body,
    });
    let text = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
    write_atomic(&dir.join("report.json"), &(text + "\n"))?;
    for s in &outcome.series {
        write_atomic(&series_dir.join(format!("{}.csv", s.name)), &s.to_csv())?;
    }
    Ok(())
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitStatus::ConfigError as i32 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::resolve(cli.command, &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitStatus::ConfigError as i32;
        }
    };
    let outcome = execute(&cfg);
    if let Err(e) = write_outputs(&cfg.out, &outcome) {
        eprintln!("cannot write report to {}: {e}", cfg.out.display());
        return ExitStatus::ConfigError as i32;
    }
    for a in outcome.body["assertions"].as_array().into_iter().flatten() {
        let mark = if a["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
        println!(
            "{mark} {}: {}",
            a["name"].as_str().unwrap_or(""),
            a["detail"].as_str().unwrap_or("")
        );
    }
    if let Some(e) = outcome.body["error"].as_str() {
        eprintln!("error: {e}");
    }
    println!("report: {}", cfg.out.join("report.json").display());
    outcome.status as i32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deltas_parse() {
        let d = parse_deltas("2^-4..2^-9").unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d[0], 0.0625);
        assert_eq!(d[5], 2f64.powi(-9));
        assert_eq!(parse_deltas("0.1, 0.05").unwrap(), vec![0.1, 0.05]);
        assert!(parse_deltas("2^-4..3^-9").is_err());
        assert!(parse_deltas("-1").is_err());
    }

    #[test]
    fn config_text_strict() {
        let m = parse_config_text("# c\ns = 0.3\np=4 # trailing\n\n").unwrap();
        assert_eq!(m["s"], "0.3");
        assert_eq!(m["p"], "4");
        assert!(parse_config_text("bogus = 1").is_err());
        assert!(parse_config_text("s 0.3").is_err());
    }

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(Command::HopfScan, &Overrides::default()).unwrap();
        assert_eq!(c.n, 2);
        assert_eq!(c.deltas.len(), 6);
        assert_eq!(c.nu, 0.25);
        let bad = Overrides {
            s: Some(1.5),
            ..Default::default()
        };
        assert!(RunConfig::resolve(Command::Constants, &bad).is_err());
    }
}
