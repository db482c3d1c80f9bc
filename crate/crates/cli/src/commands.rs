use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use sheet_core::estimate::{
    corollary_check, davie_bound_with, direct_expectation, ibp_expectation, BumpFactor, Method,
};
use sheet_core::ibp::{crossing_set, expand, PermutationSpec};
use sheet_core::integrators::simplex::{default_c1, simplex_integral_mc, simplex_integral_quadrature};
use sheet_core::integrators::{corollary_rhs, simplex_singular_integral, BoundKind, TimeWindow};
use sheet_core::kernels::C0;
use sheet_core::sde::{
    cameron_martin_check, doleans_mean, girsanov_weak_expectation, malliavin_residual, malliavin_series_check,
    malliavin_solve, solve_euler, solve_picard, solver_expectation, ConstantDrift, DriftField, SignDrift, SineDrift,
    ZeroDrift,
};
use sheet_core::shuffle::{partition_scan, shuffle_identity_mc, RegionDescriptor, RegionKind};
use sheet_core::{perm, Cell, GridPartition, SheetSample};

use crate::record::{create, write_scalars_csv, ResultRecord};

/// Accepts plain integers and exact floating forms such as `1e6`.
pub fn parse_count(text: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    let x: f64 = text.parse().map_err(|_| format!("{text:?} is not a count"))?;
    if !(x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(63)) {
        return Err(format!("{text:?} is not a non-negative integer"));
    }
    Ok(x as u64)
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Master seed; every stochastic output is a function of it.
    #[arg(long, env = "SHEET_SEED", default_value_t = 0)]
    pub seed: u64,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the JSON record to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 32)]
    pub rows: usize,
    #[arg(long, default_value_t = 32)]
    pub cols: usize,
    #[arg(long, default_value_t = 1.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    /// Geometric knot spacing ratio; uniform when absent.
    #[arg(long)]
    pub ratio: Option<f64>,
}

impl GridArgs {
    fn build(&self) -> Result<GridPartition> {
        Ok(match self.ratio {
            Some(q) => GridPartition::geometric(self.rows, self.cols, self.s_max, self.t_max, q)?,
            None => GridPartition::uniform(self.rows, self.cols, self.s_max, self.t_max)?,
        })
    }

    fn echo(&self) -> Value {
        json!({"rows": self.rows, "cols": self.cols, "s_max": self.s_max, "t_max": self.t_max, "ratio": self.ratio})
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DriftKind {
    Zero,
    Constant,
    Sign,
    Sine,
}

#[derive(Debug, Clone, Args)]
pub struct DriftArgs {
    #[arg(long, value_enum, default_value_t = DriftKind::Sine)]
    pub drift: DriftKind,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Constant value, sign scale or sine amplitude.
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 2.0)]
    pub omega: f64,
    /// Coupling to the next component for the sine drift.
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    /// Switching point of the sign drift.
    #[arg(long, default_value_t = 0.0)]
    pub center: f64,
    /// Initial value, one entry or one per component.
    #[arg(long, value_parser = parse_list)]
    pub x0: Option<::std::vec::Vec<f64>>,
}

impl DriftArgs {
    fn build(&self) -> Result<Box<dyn DriftField>> {
        ensure!(self.dim >= 1, "--dim must be at least 1");
        let d = self.dim;
        Ok(match self.drift {
            DriftKind::Zero => Box::new(ZeroDrift { dim: d }),
            DriftKind::Constant => Box::new(ConstantDrift { value: vec![self.amplitude; d] }),
            DriftKind::Sign => Box::new(SignDrift { center: vec![self.center; d], scale: self.amplitude }),
            DriftKind::Sine => {
                Box::new(SineDrift { dim: d, amplitude: self.amplitude, omega: self.omega, kappa: self.kappa })
            }
        })
    }

    fn x0(&self) -> Result<Vec<f64>> {
        match &self.x0 {
            None => Ok(vec![0.0; self.dim]),
            Some(v) if v.len() == 1 => Ok(vec![v[0]; self.dim]),
            Some(v) if v.len() == self.dim => Ok(v.clone()),
            Some(v) => bail!("--x0 has {} entries, expected 1 or {}", v.len(), self.dim),
        }
    }

    fn echo(&self) -> Result<Value> {
        Ok(json!({
            "drift": format!("{:?}", self.drift).to_lowercase(),
            "dim": self.dim,
            "amplitude": self.amplitude,
            "omega": self.omega,
            "kappa": self.kappa,
            "center": self.center,
            "x0": self.x0()?,
        }))
    }
}

#[derive(Debug, Clone, Args)]
pub struct BumpArgs {
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.3)]
    pub center: f64,
    #[arg(long, default_value_t = 1.2)]
    pub half_width: f64,
}

impl BumpArgs {
    fn build(&self) -> Result<BumpFactor> {
        ensure!(self.half_width > 0.0, "--half-width must be positive");
        Ok(BumpFactor::new(self.amplitude, self.center, self.half_width))
    }
}

#[derive(Debug, Clone, Args)]
pub struct PointsArgs {
    #[arg(long, value_parser = perm::parse)]
    pub sigma: ::std::vec::Vec<usize>,
    /// Number of points; only checked against `--sigma`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Increasing `s` times; `1..=n` when absent.
    #[arg(long, value_parser = parse_list)]
    pub s_times: Option<::std::vec::Vec<f64>>,
    #[arg(long, value_parser = parse_list)]
    pub t_times: Option<::std::vec::Vec<f64>>,
}

impl PointsArgs {
    fn build(&self) -> Result<PermutationSpec> {
        let n = self.sigma.len();
        if let Some(expected) = self.n {
            ensure!(expected == n, "--n {expected} does not match --sigma of length {n}");
        }
        let unit: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let s = self.s_times.clone().unwrap_or_else(|| unit.clone());
        let t = self.t_times.clone().unwrap_or(unit);
        Ok(PermutationSpec::new(self.sigma.clone(), s, t)?)
    }
}

fn window_from(values: &[f64]) -> Result<TimeWindow> {
    let w = match values.len() {
        4 => TimeWindow::rect(values[0], values[1], values[2], values[3]),
        6 => TimeWindow { r_bar: values[0], r: values[1], s: values[2], u_bar: values[3], u: values[4], t: values[5] },
        k => bail!("--window takes 4 (r,s,u,t) or 6 (r̄,r,s,ū,u,t) values, got {k}"),
    };
    w.validate()?;
    Ok(w)
}

fn finish(record: ResultRecord, common: &Common) -> Result<ResultRecord> {
    if let Some(path) = &common.out {
        write_scalars_csv(path, &record.outputs)?;
    }
    Ok(record)
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct SampleSheetArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[command(flatten)]
    pub common: Common,
}

pub fn sample_sheet(a: &SampleSheetArgs) -> Result<ResultRecord> {
    let grid = a.grid.build()?;
    let sheet = SheetSample::sample(&grid, a.dim, a.common.seed)?;
    let terminal = sheet.value_at(grid.rows(), grid.cols())?.to_vec();
    let sum_sq: f64 = sheet.increments().iter().map(|z| z * z).sum();
    if let Some(path) = &a.common.out {
        let mut out = create(path)?;
        sheet.write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(ResultRecord::new(
        "sample-sheet",
        a.common.seed,
        json!({"grid": a.grid.echo(), "dim": a.dim}),
        json!({"terminal_value": terminal, "increment_sum_of_squares": sum_sq, "total_area": grid.s(grid.rows()) * grid.t(grid.cols())}),
        true,
    ))
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct ExpandIbpArgs {
    #[command(flatten)]
    pub points: PointsArgs,
    #[command(flatten)]
    pub common: Common,
}

pub fn expand_ibp(a: &ExpandIbpArgs) -> Result<ResultRecord> {
    let spec = a.points.build()?;
    let j = crossing_set(&spec);
    let terms = expand(&spec)?;
    let distinct = terms.iter().all(|t| {
        let mut c = t.b_columns();
        c.sort_unstable();
        c.dedup();
        c.len() == spec.n()
    });
    let pass = distinct && terms.len() == 1 << j.len();
    if let Some(path) = &a.common.out {
        let cells = |cs: Vec<Cell>| cs.iter().map(|c| format!("{}:{}", c.row, c.col)).collect::<Vec<_>>().join(" ");
        let mut out = create(path)?;
        writeln!(out, "k,sign,b_cells,e_cells")?;
        for t in &terms {
            let k: Vec<String> = t.k.iter().map(usize::to_string).collect();
            writeln!(out, "{},{},{},{}", k.join(" "), t.sign, cells(t.b_cells()), cells(t.e_cells()))?;
        }
        out.flush()?;
    }
    Ok(ResultRecord::new(
        "expand-ibp",
        a.common.seed,
        json!({"sigma": spec.sigma_slice(), "s_times": spec.s_times(), "t_times": spec.t_times()}),
        json!({
            "crossing_set": j.members,
            "term_count": terms.len(),
            "columns_distinct": distinct,
            "terms": terms.iter().map(|t| t.to_json()).collect::<Vec<_>>(),
        }),
        pass,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodKind {
    Mc,
    Quadrature,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct VerifyIbpArgs {
    #[command(flatten)]
    pub points: PointsArgs,
    #[arg(long, value_enum, default_value_t = MethodKind::Mc)]
    pub method: MethodKind,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
    /// Gauss–Hermite nodes per dimension.
    #[arg(long, default_value_t = 30)]
    pub nodes: usize,
    #[command(flatten)]
    pub bump: BumpArgs,
    /// Allowed gap in combined standard errors.
    #[arg(long, default_value_t = 4.0)]
    pub k_se: f64,
    /// Allowed relative gap for quadrature.
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

pub fn verify_ibp(a: &VerifyIbpArgs) -> Result<ResultRecord> {
    let spec = a.points.build()?;
    let factors = vec![a.bump.build()?; spec.n()];
    let method = match a.method {
        MethodKind::Mc => Method::MonteCarlo { samples: a.samples },
        MethodKind::Quadrature => Method::Quadrature { nodes: a.nodes },
    };
    let seed = a.common.seed;
    let direct = direct_expectation(&spec, &factors, method, seed)?;
    let ibp = ibp_expectation(&spec, &factors, method, sheet_core::rng::split(seed, 1))?;
    let gap = (direct.mean - ibp.total.mean).abs();
    let pass = match a.method {
        MethodKind::Mc => direct.agrees_with(&ibp.total, a.k_se),
        MethodKind::Quadrature => gap <= a.rel_tol * direct.mean.abs().max(f64::MIN_POSITIVE),
    };
    let record = ResultRecord::new(
        "verify-ibp",
        seed,
        json!({"sigma": spec.sigma_slice(), "s_times": spec.s_times(), "t_times": spec.t_times(), "method": method, "bump": factors[0], "k_se": a.k_se, "rel_tol": a.rel_tol}),
        json!({"direct": direct, "ibp": ibp.total, "terms": ibp.terms, "abs_gap": gap}),
        pass,
    );
    finish(record, &a.common)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundMode {
    Davie,
    Corollary,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct VerifyBoundArgs {
    #[arg(long, value_enum, default_value_t = BoundMode::Davie)]
    pub mode: BoundMode,
    /// Permutation for the Davie mode.
    #[arg(long, value_parser = perm::parse)]
    pub sigma: Option<::std::vec::Vec<usize>>,
    #[arg(long, value_parser = parse_list)]
    pub s_times: Option<::std::vec::Vec<f64>>,
    #[arg(long, value_parser = parse_list)]
    pub t_times: Option<::std::vec::Vec<f64>>,
    /// Number of points for the corollary mode.
    #[arg(long, default_value_t = 1)]
    pub points: usize,
    /// `r,s,u,t` for the corollary mode.
    #[arg(long, value_parser = parse_list)]
    pub window: Option<::std::vec::Vec<f64>>,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
    #[command(flatten)]
    pub bump: BumpArgs,
    #[arg(long, default_value_t = C0)]
    pub c0: f64,
    #[arg(long)]
    pub c1: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

pub fn verify_bound(a: &VerifyBoundArgs) -> Result<ResultRecord> {
    let bump = a.bump.build()?;
    let seed = a.common.seed;
    let record = match a.mode {
        BoundMode::Davie => {
            let sigma = a.sigma.clone().context("--sigma is required for --mode davie")?;
            let points = PointsArgs { sigma, n: None, s_times: a.s_times.clone(), t_times: a.t_times.clone() };
            let spec = points.build()?;
            let factors = vec![bump; spec.n()];
            let est = direct_expectation(&spec, &factors, Method::MonteCarlo { samples: a.samples }, seed)?;
            let bound = davie_bound_with(&spec, bump.sup_norm(), a.c0);
            let lhs = est.mean.abs() + 4.0 * est.std_error;
            ResultRecord::new(
                "verify-bound",
                seed,
                json!({"mode": "davie", "sigma": spec.sigma_slice(), "s_times": spec.s_times(), "t_times": spec.t_times(), "samples": a.samples, "bump": bump, "c0": a.c0}),
                json!({"estimate": est, "bound": bound, "lhs_with_margin": lhs, "ratio": lhs / bound}),
                lhs <= bound,
            )
        }
        BoundMode::Corollary => {
            let w = window_from(a.window.as_deref().unwrap_or(&[0.5, 1.0, 0.5, 1.0]))?;
            let report = corollary_check(a.points, &w, &bump, a.c1, a.samples, seed)?;
            ResultRecord::new(
                "verify-bound",
                seed,
                json!({"mode": "corollary", "points": a.points, "window": w, "samples": a.samples, "bump": bump, "c1": report.c1}),
                json!({"lhs": report.lhs, "rhs": report.rhs, "ratio": report.ratio}),
                report.holds(),
            )
        }
    };
    finish(record, &a.common)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionArg {
    Nabla,
    NablaTilde,
    Lambda,
    LambdaTilde,
}

impl From<RegionArg> for RegionKind {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::Nabla => RegionKind::Nabla,
            RegionArg::NablaTilde => RegionKind::NablaTilde,
            RegionArg::Lambda => RegionKind::Lambda,
            RegionArg::LambdaTilde => RegionKind::LambdaTilde,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct VerifyShuffleArgs {
    #[arg(long, value_enum, default_value_t = RegionArg::Nabla)]
    pub region: RegionArg,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Trailing points for the split regions.
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    /// `r̄,r,s,ū,u,t`.
    #[arg(long, value_parser = parse_list)]
    pub window: Option<::std::vec::Vec<f64>>,
    /// Points for the partition scan.
    #[arg(long, value_parser = parse_count, default_value = "10000")]
    pub points: u64,
    /// Samples for the product identity; 0 skips it.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
    #[arg(long, default_value_t = 4.0)]
    pub k_se: f64,
    #[command(flatten)]
    pub common: Common,
}

pub fn verify_shuffle(a: &VerifyShuffleArgs) -> Result<ResultRecord> {
    let w = window_from(a.window.as_deref().unwrap_or(&[0.1, 0.5, 1.0, 0.2, 0.6, 1.1]))?;
    let region = RegionDescriptor::new(a.region.into(), a.k, a.n, w)?;
    let seed = a.common.seed;
    let scan = partition_scan(&region, a.m, a.points, seed)?;
    let mut pass = scan.violations == 0 && scan.locate_mismatches == 0;
    let identity = if a.samples > 0 {
        let f = |s: f64, t: f64| 1.0 + 0.5 * (s + 2.0 * t).sin();
        let id = shuffle_identity_mc(&region, a.m, f, a.samples, sheet_core::rng::split(seed, 1))?;
        pass &= id.agrees(a.k_se);
        json!(id)
    } else {
        Value::Null
    };
    let record = ResultRecord::new(
        "verify-shuffle",
        seed,
        json!({"region": region, "m": a.m, "points": a.points, "samples": a.samples, "k_se": a.k_se}),
        json!({"scan": scan, "identity": identity}),
        pass,
    );
    finish(record, &a.common)
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct SimplexGammaArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0)]
    pub upper: f64,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
    #[arg(long, default_value_t = 64)]
    pub nodes: usize,
    /// Which right-hand side to evaluate alongside.
    #[arg(long, default_value = "md")]
    pub kind: BoundKind,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub norm_b: f64,
    #[arg(long)]
    pub c1: Option<f64>,
    /// `r,s,u,t` or `r̄,r,s,ū,u,t` for the bound.
    #[arg(long, value_parser = parse_list)]
    pub window: Option<::std::vec::Vec<f64>>,
    #[arg(long, default_value_t = 4.0)]
    pub k_se: f64,
    #[command(flatten)]
    pub common: Common,
}

pub fn simplex_gamma(a: &SimplexGammaArgs) -> Result<ResultRecord> {
    let seed = a.common.seed;
    let closed = simplex_singular_integral(a.n, a.lower, a.upper)?;
    let mc = simplex_integral_mc(a.n, a.lower, a.upper, a.samples, seed)?;
    let quad = simplex_integral_quadrature(a.n, a.lower, a.upper, a.nodes)?;
    let w = window_from(a.window.as_deref().unwrap_or(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]))?;
    let c1 = a.c1.unwrap_or_else(default_c1);
    let bound = corollary_rhs(a.kind, a.n, a.k, a.norm_b, c1, &w)?;
    let pass = (closed - mc.mean).abs() <= a.k_se * mc.std_error.max(f64::MIN_POSITIVE)
        || mc.std_error == 0.0 && closed == mc.mean;
    let pass = pass && (closed - quad).abs() <= 1e-10 * closed.abs();
    let record = ResultRecord::new(
        "simplex-gamma",
        seed,
        json!({"n": a.n, "lower": a.lower, "upper": a.upper, "samples": a.samples, "nodes": a.nodes, "kind": a.kind, "k": a.k, "norm_b": a.norm_b, "c1": c1, "window": w}),
        json!({"closed_form": closed, "monte_carlo": mc, "quadrature": quad, "bound": bound}),
        pass,
    );
    finish(record, &a.common)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Euler,
    Picard,
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct SolveSdeArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub drift: DriftArgs,
    #[arg(long, value_enum, default_value_t = Scheme::Euler)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[command(flatten)]
    pub common: Common,
}

pub fn solve_sde(a: &SolveSdeArgs) -> Result<ResultRecord> {
    let grid = a.grid.build()?;
    let drift = a.drift.build()?;
    let x0 = a.drift.x0()?;
    let sheet = SheetSample::sample(&grid, a.drift.dim, a.common.seed)?;
    let (sol, iterations) = match a.scheme {
        Scheme::Euler => (solve_euler(&grid, drift.as_ref(), &x0, &sheet)?, 0),
        Scheme::Picard => solve_picard(&grid, drift.as_ref(), &x0, &sheet, a.tol, a.max_iter)?,
    };
    if let Some(path) = &a.common.out {
        let mut out = create(path)?;
        sol.write_csv(&mut out)?;
        out.flush()?;
    }
    let terminal = sol.at(grid.rows(), grid.cols()).to_vec();
    Ok(ResultRecord::new(
        "solve-sde",
        a.common.seed,
        json!({"grid": a.grid.echo(), "drift": a.drift.echo()?, "scheme": format!("{:?}", a.scheme).to_lowercase(), "tol": a.tol, "max_iter": a.max_iter}),
        json!({"terminal_value": terminal, "iterations": iterations, "mesh": grid.mesh()}),
        true,
    ))
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct MalliavinCheckArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub drift: DriftArgs,
    /// Cell whose increment is differentiated.
    #[arg(long, default_value_t = 1)]
    pub base_row: usize,
    #[arg(long, default_value_t = 1)]
    pub base_col: usize,
    /// Size of the Cameron–Martin perturbation.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Allowed relative Cameron–Martin error.
    #[arg(long, default_value_t = 1e-2)]
    pub tolerance: f64,
    /// Terms of the Picard series.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[command(flatten)]
    pub common: Common,
}

pub fn malliavin_check(a: &MalliavinCheckArgs) -> Result<ResultRecord> {
    let grid = a.grid.build()?;
    let drift = a.drift.build()?;
    ensure!(drift.has_jacobian(), "the {:?} drift has no jacobian", a.drift.drift);
    let x0 = a.drift.x0()?;
    let d = a.drift.dim;
    let sheet = SheetSample::sample(&grid, d, a.common.seed)?;
    let sol = solve_euler(&grid, drift.as_ref(), &x0, &sheet)?;
    let base = Cell::new(a.base_row, a.base_col);
    let field = malliavin_solve(&grid, drift.as_ref(), &sol, base)?;
    let residual = malliavin_residual(&grid, drift.as_ref(), &sol, &field)?;
    let series = malliavin_series_check(&grid, drift.as_ref(), &sol, base, a.depth)?;
    let hdot: Vec<f64> = grid
        .cells()
        .flat_map(|c| {
            let (s, t) = (grid.s(c.row) - 0.5 * grid.ds(c.row), grid.t(c.col) - 0.5 * grid.dt(c.col));
            (0..d).map(move |l| (1.0 + l as f64 * s).cos() + s * t)
        })
        .collect();
    let cm = cameron_martin_check(drift.as_ref(), &x0, &sheet, &hdot, (grid.rows(), grid.cols()), a.eps)?;
    let pass = residual <= 1e-10 && series.within_tail() && cm.relative_error <= a.tolerance;
    let record = ResultRecord::new(
        "malliavin-check",
        a.common.seed,
        json!({"grid": a.grid.echo(), "drift": a.drift.echo()?, "base": [a.base_row, a.base_col], "eps": a.eps, "tolerance": a.tolerance, "depth": a.depth}),
        json!({
            "terminal_derivative": field.at(grid.rows(), grid.cols()),
            "residual": residual,
            "series": series,
            "cameron_martin": cm,
        }),
        pass,
    );
    finish(record, &a.common)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestFunction {
    /// `cos x_1 + x_1 / 2`
    CosLinear,
    /// `cos x_1`
    Cos,
    /// `x_1`
    Linear,
}

impl TestFunction {
    fn eval(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::CosLinear => x[0].cos() + 0.5 * x[0],
            TestFunction::Cos => x[0].cos(),
            TestFunction::Linear => x[0],
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct GirsanovCheckArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub drift: DriftArgs,
    #[arg(long, value_enum, default_value_t = TestFunction::CosLinear)]
    pub phi: TestFunction,
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
    #[arg(long, default_value_t = 4.0)]
    pub k_se: f64,
    #[command(flatten)]
    pub common: Common,
}

pub fn girsanov_check(a: &GirsanovCheckArgs) -> Result<ResultRecord> {
    let grid = a.grid.build()?;
    let drift = a.drift.build()?;
    let x0 = a.drift.x0()?;
    let target = (grid.rows(), grid.cols());
    let seed = a.common.seed;
    let split = sheet_core::rng::split;
    let phi = |x: &[f64]| a.phi.eval(x);
    let solver = solver_expectation(phi, drift.as_ref(), &x0, &grid, target, a.samples, split(seed, 0))?;
    let weighted = girsanov_weak_expectation(phi, drift.as_ref(), &x0, &grid, target, a.samples, split(seed, 1))?;
    let mean_m = doleans_mean(drift.as_ref(), &x0, &grid, a.samples, split(seed, 2))?;
    let m_ok = (mean_m.mean - 1.0).abs() <= a.k_se * mean_m.std_error || mean_m.std_error == 0.0 && mean_m.mean == 1.0;
    let pass = solver.agrees_with(&weighted, a.k_se) && m_ok;
    let record = ResultRecord::new(
        "girsanov-check",
        seed,
        json!({"grid": a.grid.echo(), "drift": a.drift.echo()?, "phi": format!("{:?}", a.phi), "samples": a.samples, "k_se": a.k_se}),
        json!({"solver": solver, "weighted": weighted, "doleans_mean": mean_m, "gap": (solver.mean - weighted.mean).abs()}),
        pass,
    );
    finish(record, &a.common)
}
