//! The plane SDE `dX = b(s, t, X) ds dt + dW` on a grid, its derivative
//! fields and the discrete Girsanov reweighting.
//!
//! All schemes evaluate the drift at the lower-left corner of a cell unless
//! stated otherwise. Matrices are stored row-major with `J[l][m] = ∂b_l/∂x_m`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Cell, GridPartition};
use crate::integrators::montecarlo::{monte_carlo, McEstimate};
use crate::sheet::SheetSample;

/// `b: [0,T]² x R^d → R^d`, optionally with its spatial Jacobian.
pub trait DriftField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, s: f64, t: f64, x: &[f64], out: &mut [f64]);

    fn sup_norm(&self) -> f64;

    fn has_jacobian(&self) -> bool {
        false
    }

    /// Writes `∂b_l/∂x_m` into `out[l * d + m]`. Only called when
    /// [`has_jacobian`](DriftField::has_jacobian) is true.
    fn jacobian(&self, _s: f64, _t: f64, _x: &[f64], _out: &mut [f64]) {
        unreachable!("drift has no jacobian")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroDrift {
    pub dim: usize,
}

impl DriftField for ZeroDrift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _s: f64, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn sup_norm(&self) -> f64 {
        0.0
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, _s: f64, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

#[derive(Debug, Clone)]
pub struct ConstantDrift {
    pub value: Vec<f64>,
}

impl DriftField for ConstantDrift {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn eval(&self, _s: f64, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.value);
    }

    fn sup_norm(&self) -> f64 {
        self.value.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, _s: f64, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `b_l(x) = scale · sign(x_l - center_l)` with `sign(0) = 0`.
#[derive(Debug, Clone)]
pub struct SignDrift {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl DriftField for SignDrift {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, _s: f64, _t: f64, x: &[f64], out: &mut [f64]) {
        for ((o, xi), c) in out.iter_mut().zip(x).zip(&self.center) {
            let d = xi - c;
            *o = if d > 0.0 {
                self.scale
            } else if d < 0.0 {
                -self.scale
            } else {
                0.0
            };
        }
    }

    fn sup_norm(&self) -> f64 {
        self.scale.abs()
    }
}

/// `b_l(x) = a · sin(ω x_l + κ x_{l+1 mod d})`.
#[derive(Debug, Clone, Copy)]
pub struct SineDrift {
    pub dim: usize,
    pub amplitude: f64,
    pub omega: f64,
    pub kappa: f64,
}

impl SineDrift {
    fn phase(&self, x: &[f64], l: usize) -> f64 {
        self.omega * x[l] + self.kappa * x[(l + 1) % self.dim]
    }
}

impl DriftField for SineDrift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _s: f64, _t: f64, x: &[f64], out: &mut [f64]) {
        for (l, o) in out.iter_mut().enumerate() {
            *o = self.amplitude * self.phase(x, l).sin();
        }
    }

    fn sup_norm(&self) -> f64 {
        self.amplitude.abs()
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, _s: f64, _t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        for l in 0..d {
            let c = self.amplitude * self.phase(x, l).cos();
            out[l * d + l] += c * self.omega;
            out[l * d + (l + 1) % d] += c * self.kappa;
        }
    }
}

/// Grid values `X(s_i, t_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionField {
    pub grid: GridPartition,
    pub dim: usize,
    pub x0: Vec<f64>,
    values: Vec<f64>,
}

impl SolutionField {
    fn filled(grid: &GridPartition, x0: &[f64]) -> Self {
        let points = (grid.rows() + 1) * (grid.cols() + 1);
        let values = x0.iter().copied().cycle().take(points * x0.len()).collect();
        Self { grid: grid.clone(), dim: x0.len(), x0: x0.to_vec(), values }
    }

    /// `x0 + W` on the sheet's grid.
    pub fn from_sheet(sheet: &SheetSample, x0: &[f64]) -> Result<Self> {
        if x0.len() != sheet.dim() {
            return Err(Error::DimensionMismatch { expected: sheet.dim(), got: x0.len() });
        }
        let mut f = Self::filled(sheet.grid(), x0);
        for i in 0..=f.grid.rows() {
            for j in 0..=f.grid.cols() {
                let w = sheet.value_unchecked(i, j);
                for (v, (a, b)) in f.at_mut(i, j).iter_mut().zip(x0.iter().zip(w)) {
                    *v = a + b;
                }
            }
        }
        Ok(f)
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (i * (self.grid.cols() + 1) + j) * self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.dim]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        &mut self.values[o..o + self.dim]
    }

    /// `max |X - Y|` over all grid points and components.
    pub fn sup_distance(&self, other: &SolutionField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Values at every `(fs, ft)`-th grid point.
    pub fn restrict(&self, fs: usize, ft: usize) -> Result<SolutionField> {
        let grid = self.grid.coarsen(fs, ft)?;
        let mut out = Self::filled(&grid, &self.x0);
        for i in 0..=grid.rows() {
            for j in 0..=grid.cols() {
                out.at_mut(i, j).copy_from_slice(self.at(i * fs, j * ft));
            }
        }
        Ok(out)
    }

    /// CSV with header `i,j,s,t,component,x`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,s,t,component,x")?;
        for i in 0..=self.grid.rows() {
            for j in 0..=self.grid.cols() {
                for (l, x) in self.at(i, j).iter().enumerate() {
                    writeln!(out, "{i},{j},{:.16e},{:.16e},{},{:.16e}", self.grid.s(i), self.grid.t(j), l + 1, x)?;
                }
            }
        }
        Ok(())
    }
}

fn check_setup(grid: &GridPartition, drift: &dyn DriftField, x0: &[f64], sheet: &SheetSample) -> Result<()> {
    if sheet.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if drift.dim() != sheet.dim() || x0.len() != sheet.dim() {
        return Err(Error::DimensionMismatch { expected: sheet.dim(), got: drift.dim().min(x0.len()) });
    }
    Ok(())
}

/// Lower-left corner Euler scheme `X(i,j) = x0 + W(i,j) + A(i,j)` with
/// `A(i,j) = A(i-1,j) + A(i,j-1) - A(i-1,j-1) + b(s_{i-1}, t_{j-1}, X(i-1,j-1)) a_{ij}`.
pub fn solve_euler(
    grid: &GridPartition,
    drift: &dyn DriftField,
    x0: &[f64],
    sheet: &SheetSample,
) -> Result<SolutionField> {
    check_setup(grid, drift, x0, sheet)?;
    let d = x0.len();
    let m = grid.cols();
    let mut x = SolutionField::from_sheet(sheet, x0)?;
    let mut acc = vec![0.0; (grid.rows() + 1) * (m + 1) * d];
    let idx = |i: usize, j: usize| (i * (m + 1) + j) * d;
    let mut b = vec![0.0; d];
    for i in 1..=grid.rows() {
        for j in 1..=m {
            drift.eval(grid.s(i - 1), grid.t(j - 1), x.at(i - 1, j - 1), &mut b);
            let area = grid.area(i, j);
            for l in 0..d {
                acc[idx(i, j) + l] =
                    acc[idx(i - 1, j) + l] + acc[idx(i, j - 1) + l] - acc[idx(i - 1, j - 1) + l] + b[l] * area;
            }
            for (l, v) in x.at_mut(i, j).iter_mut().enumerate() {
                *v += acc[idx(i, j) + l];
            }
        }
    }
    Ok(x)
}

/// One application of `X ↦ x0 + Σ_cells avg4(b(X)) a + W`, with `avg4` the
/// mean of the drift over the four cell corners.
fn picard_map(
    grid: &GridPartition,
    drift: &dyn DriftField,
    sheet: &SheetSample,
    prev: &SolutionField,
) -> SolutionField {
    let d = prev.dim;
    let mut next = SolutionField::from_sheet(sheet, &prev.x0).expect("checked dimensions");
    let (n, m) = (grid.rows(), grid.cols());
    let mut corner = vec![0.0; (n + 1) * (m + 1) * d];
    for i in 0..=n {
        for j in 0..=m {
            let o = (i * (m + 1) + j) * d;
            drift.eval(grid.s(i), grid.t(j), prev.at(i, j), &mut corner[o..o + d]);
        }
    }
    let mut acc = vec![0.0; (n + 1) * (m + 1) * d];
    let idx = |i: usize, j: usize| (i * (m + 1) + j) * d;
    for i in 1..=n {
        for j in 1..=m {
            let area = grid.area(i, j);
            for l in 0..d {
                let avg = 0.25
                    * (corner[idx(i - 1, j - 1) + l]
                        + corner[idx(i - 1, j) + l]
                        + corner[idx(i, j - 1) + l]
                        + corner[idx(i, j) + l]);
                acc[idx(i, j) + l] =
                    acc[idx(i - 1, j) + l] + acc[idx(i, j - 1) + l] - acc[idx(i - 1, j - 1) + l] + avg * area;
            }
            for (l, v) in next.at_mut(i, j).iter_mut().enumerate() {
                *v += acc[idx(i, j) + l];
            }
        }
    }
    next
}

/// Picard iteration from `initial` until successive iterates differ by at
/// most `tol`. Returns the fixed point and the number of map applications.
pub fn solve_picard_from(
    grid: &GridPartition,
    drift: &dyn DriftField,
    sheet: &SheetSample,
    initial: SolutionField,
    tol: f64,
    max_iter: usize,
) -> Result<(SolutionField, usize)> {
    check_setup(grid, drift, &initial.x0, sheet)?;
    if !drift.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    let mut current = initial;
    let mut change = f64::INFINITY;
    for iter in 1..=max_iter {
        let next = picard_map(grid, drift, sheet, &current);
        change = next.sup_distance(&current);
        current = next;
        if change <= tol {
            return Ok((current, iter));
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, last_change: change })
}

/// Picard iteration started from `x0 + W`.
pub fn solve_picard(
    grid: &GridPartition,
    drift: &dyn DriftField,
    x0: &[f64],
    sheet: &SheetSample,
    tol: f64,
    max_iter: usize,
) -> Result<(SolutionField, usize)> {
    check_setup(grid, drift, x0, sheet)?;
    let initial = SolutionField::from_sheet(sheet, x0)?;
    solve_picard_from(grid, drift, sheet, initial, tol, max_iter)
}

/// Matrix-valued field on the grid points `(i, j) ⪰ (p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalliavinField {
    /// Identity row and column of the field, as grid indices.
    pub base: (usize, usize),
    pub dim: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl MalliavinField {
    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (i * (self.cols + 1) + j) * self.dim * self.dim
    }

    /// Row-major `d x d` matrix at `(i, j)`; zero outside the base quadrant.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.dim * self.dim]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        let dd = self.dim * self.dim;
        &mut self.values[o..o + dd]
    }

    pub fn max_abs_diff(&self, other: &MalliavinField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for l in 0..d {
        m[l * d + l] = 1.0;
    }
    m
}

/// `out += a · (A B)` for `d x d` matrices.
fn mul_add(a_mat: &[f64], b_mat: &[f64], a: f64, d: usize, out: &mut [f64]) {
    for r in 0..d {
        for c in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a_mat[r * d + k] * b_mat[k * d + c];
            }
            out[r * d + c] += a * s;
        }
    }
}

fn jacobians(grid: &GridPartition, drift: &dyn DriftField, sol: &SolutionField) -> Result<Vec<f64>> {
    if !drift.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    if &sol.grid != grid {
        return Err(Error::GridMismatch);
    }
    let d = sol.dim;
    let (n, m) = (grid.rows(), grid.cols());
    let mut jac = vec![0.0; (n + 1) * (m + 1) * d * d];
    for i in 0..=n {
        for j in 0..=m {
            let o = (i * (m + 1) + j) * d * d;
            drift.jacobian(grid.s(i), grid.t(j), sol.at(i, j), &mut jac[o..o + d * d]);
        }
    }
    Ok(jac)
}

/// Forward recursion of the linear equation with identity on row `p` and
/// column `q`.
fn linear_field(
    grid: &GridPartition,
    drift: &dyn DriftField,
    sol: &SolutionField,
    p: usize,
    q: usize,
) -> Result<MalliavinField> {
    let jac = jacobians(grid, drift, sol)?;
    let d = sol.dim;
    let (n, m) = (grid.rows(), grid.cols());
    let mut f = MalliavinField { base: (p, q), dim: d, rows: n, cols: m, values: vec![0.0; (n + 1) * (m + 1) * d * d] };
    let id = identity(d);
    for i in p..=n {
        f.at_mut(i, q).copy_from_slice(&id);
    }
    for j in q..=m {
        f.at_mut(p, j).copy_from_slice(&id);
    }
    let mut cur = vec![0.0; d * d];
    for i in p + 1..=n {
        for j in q + 1..=m {
            for (k, c) in cur.iter_mut().enumerate() {
                *c = f.at(i - 1, j)[k] + f.at(i, j - 1)[k] - f.at(i - 1, j - 1)[k];
            }
            let o = ((i - 1) * (m + 1) + (j - 1)) * d * d;
            let prev = f.at(i - 1, j - 1).to_vec();
            mul_add(&jac[o..o + d * d], &prev, grid.area(i, j), d, &mut cur);
            f.at_mut(i, j).copy_from_slice(&cur);
        }
    }
    Ok(f)
}

/// Derivative of the Euler solution with respect to the increment of cell
/// `base`: identity on grid row `base.row` and column `base.col`, then
/// `D(i,j) = D(i-1,j) + D(i,j-1) - D(i-1,j-1) + b'(X(i-1,j-1)) D(i-1,j-1) a_{ij}`.
pub fn malliavin_solve(
    grid: &GridPartition,
    drift: &dyn DriftField,
    sol: &SolutionField,
    base: Cell,
) -> Result<MalliavinField> {
    grid.check_cell(base)?;
    linear_field(grid, drift, sol, base.row, base.col)
}

/// `∂X/∂x0` of the Euler solution: the same recursion from the axes.
pub fn flow_derivative(grid: &GridPartition, drift: &dyn DriftField, sol: &SolutionField) -> Result<MalliavinField> {
    linear_field(grid, drift, sol, 0, 0)
}

/// `T(M)(i,j) = Σ_{p<k≤i, q<l≤j} b'(X(k-1,l-1)) M(k-1,l-1) a_{kl}` via
/// two-dimensional prefix sums.
fn picard_operator(grid: &GridPartition, jac: &[f64], f: &MalliavinField) -> MalliavinField {
    let d = f.dim;
    let (p, q) = f.base;
    let (n, m) = (f.rows, f.cols);
    let mut out = MalliavinField { values: vec![0.0; f.values.len()], ..f.clone() };
    let mut term = vec![0.0; d * d];
    for i in p + 1..=n {
        for j in q + 1..=m {
            term.iter_mut().for_each(|v| *v = 0.0);
            let o = ((i - 1) * (m + 1) + (j - 1)) * d * d;
            mul_add(&jac[o..o + d * d], f.at(i - 1, j - 1), grid.area(i, j), d, &mut term);
            for (k, t) in term.iter().enumerate() {
                let v = out.at(i - 1, j)[k] + out.at(i, j - 1)[k] - out.at(i - 1, j - 1)[k] + t;
                out.at_mut(i, j)[k] = v;
            }
        }
    }
    out
}

/// Largest entry of `|D - (I + T(D))|` over the base quadrant, with the sum
/// evaluated cell by cell rather than through the recursion.
pub fn malliavin_residual(
    grid: &GridPartition,
    drift: &dyn DriftField,
    sol: &SolutionField,
    field: &MalliavinField,
) -> Result<f64> {
    let jac = jacobians(grid, drift, sol)?;
    let d = field.dim;
    let (p, q) = field.base;
    let m = grid.cols();
    let id = identity(d);
    let mut worst: f64 = 0.0;
    for i in p..=grid.rows() {
        for j in q..=m {
            let mut rhs = id.clone();
            for k in p + 1..=i {
                for l in q + 1..=j {
                    let o = ((k - 1) * (m + 1) + (l - 1)) * d * d;
                    mul_add(&jac[o..o + d * d], field.at(k - 1, l - 1), grid.area(k, l), d, &mut rhs);
                }
            }
            for (a, b) in field.at(i, j).iter().zip(&rhs) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesCheck {
    pub depth: usize,
    /// Largest entry of `|D - Σ_{k<depth} T^k(I)|`.
    pub max_difference: f64,
    /// `x^depth / (depth!)² · e^x` with `x = L (s_n - u)(t_m - v)` and `L` the
    /// largest row-sum norm of `b'` on the visited values.
    pub tail_bound: f64,
}

impl SeriesCheck {
    pub fn within_tail(&self) -> bool {
        self.max_difference <= self.tail_bound
    }
}

/// Compares the recursion with the first `depth` terms of its Picard series.
pub fn malliavin_series_check(
    grid: &GridPartition,
    drift: &dyn DriftField,
    sol: &SolutionField,
    base: Cell,
    depth: usize,
) -> Result<SeriesCheck> {
    let field = malliavin_solve(grid, drift, sol, base)?;
    let jac = jacobians(grid, drift, sol)?;
    let d = sol.dim;
    let mut term = linear_field(grid, &ZeroDrift { dim: d }, sol, base.row, base.col)?;
    let mut partial = term.clone();
    for _ in 1..depth {
        term = picard_operator(grid, &jac, &term);
        for (a, b) in partial.values.iter_mut().zip(&term.values) {
            *a += b;
        }
    }
    let norm = jac
        .chunks(d * d)
        .map(|m| (0..d).map(|r| (0..d).map(|c| m[r * d + c].abs()).sum::<f64>()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let x = norm * (grid.s(grid.rows()) - grid.s(base.row)) * (grid.t(grid.cols()) - grid.t(base.col));
    let fact: f64 = (1..=depth).map(|k| k as f64).product();
    let tail_bound = x.powi(depth as i32) / (fact * fact) * x.exp();
    Ok(SeriesCheck { depth, max_difference: field.max_abs_diff(&partial), tail_bound })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameronMartinCheck {
    pub finite_difference: Vec<f64>,
    pub predicted: Vec<f64>,
    pub relative_error: f64,
}

/// Central difference of `X(i,j)` along the shift `eps · hdot` against
/// `Σ_{cells ⪯ (i,j)} D_{cell} X(i,j) · hdot · area`.
pub fn cameron_martin_check(
    drift: &dyn DriftField,
    x0: &[f64],
    sheet: &SheetSample,
    hdot: &[f64],
    target: (usize, usize),
    eps: f64,
) -> Result<CameronMartinCheck> {
    let grid = sheet.grid();
    grid.check_point(target.0, target.1)?;
    let d = sheet.dim();
    let up = solve_euler(grid, drift, x0, &sheet.cameron_martin_shift(hdot, eps)?)?;
    let down = solve_euler(grid, drift, x0, &sheet.cameron_martin_shift(hdot, -eps)?)?;
    let (ti, tj) = target;
    let fd: Vec<f64> = (0..d).map(|l| (up.at(ti, tj)[l] - down.at(ti, tj)[l]) / (2.0 * eps)).collect();

    let sol = solve_euler(grid, drift, x0, sheet)?;
    let mut predicted = vec![0.0; d];
    for p in 1..=ti {
        for q in 1..=tj {
            let dm = malliavin_solve(grid, drift, &sol, Cell::new(p, q))?;
            let mat = dm.at(ti, tj);
            let area = grid.area(p, q);
            let h = &hdot[((p - 1) * grid.cols() + (q - 1)) * d..][..d];
            for r in 0..d {
                predicted[r] += area * (0..d).map(|c| mat[r * d + c] * h[c]).sum::<f64>();
            }
        }
    }
    let num: f64 = fd.iter().zip(&predicted).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = predicted.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(CameronMartinCheck { relative_error: num / den.max(f64::MIN_POSITIVE), finite_difference: fd, predicted })
}

/// Discrete Doléans-Dade exponential over the cells `[1..rows] x [1..cols]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoleansFactor {
    pub value: f64,
    pub log_value: f64,
}

/// Field at whose lower-left corner values the drift is frozen.
pub enum DoleansArgument<'a> {
    /// `x0 + W`.
    Sheet(&'a [f64]),
    Solution(&'a SolutionField),
}

/// `exp(Σ ⟨b(s_{i-1}, t_{j-1}, Y(i-1,j-1)), Z_{ij}⟩ - ½ Σ ‖b‖² a_{ij})`.
pub fn doleans_exponential_upto(
    drift: &dyn DriftField,
    sheet: &SheetSample,
    arg: DoleansArgument<'_>,
    rows: usize,
    cols: usize,
) -> Result<DoleansFactor> {
    let grid = sheet.grid();
    grid.check_point(rows, cols)?;
    let d = sheet.dim();
    if drift.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: drift.dim() });
    }
    let mut y = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut log = 0.0;
    for i in 1..=rows {
        for j in 1..=cols {
            match &arg {
                DoleansArgument::Sheet(x0) => {
                    for (l, v) in y.iter_mut().enumerate() {
                        *v = x0[l] + sheet.value_unchecked(i - 1, j - 1)[l];
                    }
                }
                DoleansArgument::Solution(sol) => y.copy_from_slice(sol.at(i - 1, j - 1)),
            }
            drift.eval(grid.s(i - 1), grid.t(j - 1), &y, &mut b);
            let z = sheet.increment_unchecked(i, j);
            let area = grid.area(i, j);
            for l in 0..d {
                log += b[l] * z[l] - 0.5 * b[l] * b[l] * area;
            }
        }
    }
    Ok(DoleansFactor { value: log.exp(), log_value: log })
}

pub fn doleans_exponential(
    drift: &dyn DriftField,
    sheet: &SheetSample,
    arg: DoleansArgument<'_>,
) -> Result<DoleansFactor> {
    let g = sheet.grid();
    doleans_exponential_upto(drift, sheet, arg, g.rows(), g.cols())
}

/// `E[φ(x0 + W(target)) M]` over fresh sheets; sample `k` uses sheet seed
/// `split(seed, k)`.
pub fn girsanov_weak_expectation<P>(
    phi: P,
    drift: &dyn DriftField,
    x0: &[f64],
    grid: &GridPartition,
    target: (usize, usize),
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate>
where
    P: Fn(&[f64]) -> f64 + Sync,
{
    grid.check_point(target.0, target.1)?;
    check_dims(drift, x0)?;
    let (ti, tj) = target;
    Ok(monte_carlo(
        |rng| {
            let sheet = SheetSample::sample(grid, x0.len(), rng.key()).expect("validated grid");
            let m = doleans_exponential(drift, &sheet, DoleansArgument::Sheet(x0)).expect("validated dims");
            let y: Vec<f64> = x0.iter().zip(sheet.value_unchecked(ti, tj)).map(|(a, w)| a + w).collect();
            phi(&y) * m.value
        },
        n_samples,
        seed,
    ))
}

/// `E[M]` alone.
pub fn doleans_mean(
    drift: &dyn DriftField,
    x0: &[f64],
    grid: &GridPartition,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    girsanov_weak_expectation(|_| 1.0, drift, x0, grid, (grid.rows(), grid.cols()), n_samples, seed)
}

/// `E[φ(X(target))]` with `X` the Euler solution on fresh sheets.
pub fn solver_expectation<P>(
    phi: P,
    drift: &dyn DriftField,
    x0: &[f64],
    grid: &GridPartition,
    target: (usize, usize),
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate>
where
    P: Fn(&[f64]) -> f64 + Sync,
{
    grid.check_point(target.0, target.1)?;
    check_dims(drift, x0)?;
    Ok(monte_carlo(
        |rng| {
            let sheet = SheetSample::sample(grid, x0.len(), rng.key()).expect("validated grid");
            let x = solve_euler(grid, drift, x0, &sheet).expect("validated setup");
            phi(x.at(target.0, target.1))
        },
        n_samples,
        seed,
    ))
}

fn check_dims(drift: &dyn DriftField, x0: &[f64]) -> Result<()> {
    if drift.dim() != x0.len() {
        return Err(Error::DimensionMismatch { expected: drift.dim(), got: x0.len() });
    }
    Ok(())
}

/// `E|D_{a}X(target) - D_{b}X(target)|²` (Frobenius) for pairs of base cells.
pub fn holder_diagnostic(
    drift: &dyn DriftField,
    x0: &[f64],
    grid: &GridPartition,
    target: (usize, usize),
    pairs: &[(Cell, Cell)],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<(f64, McEstimate)>> {
    if !drift.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    check_dims(drift, x0)?;
    pairs
        .iter()
        .map(|&(a, b)| {
            grid.check_cell(a)?;
            grid.check_cell(b)?;
            let dist = (grid.s(a.row) - grid.s(b.row)).abs() + (grid.t(a.col) - grid.t(b.col)).abs();
            let est = monte_carlo(
                |rng| {
                    let sheet = SheetSample::sample(grid, x0.len(), rng.key()).expect("validated grid");
                    let sol = solve_euler(grid, drift, x0, &sheet).expect("validated setup");
                    let da = malliavin_solve(grid, drift, &sol, a).expect("jacobian present");
                    let db = malliavin_solve(grid, drift, &sol, b).expect("jacobian present");
                    da.at(target.0, target.1).iter().zip(db.at(target.0, target.1)).map(|(x, y)| (x - y).powi(2)).sum()
                },
                n_samples,
                seed,
            );
            Ok((dist, est))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(d: usize) -> SineDrift {
        SineDrift { dim: d, amplitude: 0.8, omega: 1.3, kappa: 0.4 }
    }

    #[test]
    fn zero_drift_telescopes() {
        let g = GridPartition::geometric(6, 5, 1.0, 1.5, 1.2).unwrap();
        let w = SheetSample::sample(&g, 2, 4).unwrap();
        let x0 = [0.3, -1.0];
        let x = solve_euler(&g, &ZeroDrift { dim: 2 }, &x0, &w).unwrap();
        assert_eq!(x, SolutionField::from_sheet(&w, &x0).unwrap());
        for j in 0..=5 {
            assert_eq!(x.at(0, j), &x0);
        }
    }

    #[test]
    fn constant_drift_closed_form() {
        let g = GridPartition::uniform(8, 8, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 1, 2).unwrap();
        let c = 1.7;
        let x = solve_euler(&g, &ConstantDrift { value: vec![c] }, &[0.5], &w).unwrap();
        for i in 0..=8 {
            for j in 0..=8 {
                let exact = 0.5 + c * g.s(i) * g.t(j) + w.value_unchecked(i, j)[0];
                assert!((x.at(i, j)[0] - exact).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let g = GridPartition::uniform(4, 4, 1.0, 1.0).unwrap();
        let other = GridPartition::uniform(4, 5, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&other, 1, 0).unwrap();
        assert!(matches!(solve_euler(&g, &ZeroDrift { dim: 1 }, &[0.0], &w), Err(Error::GridMismatch)));
    }

    #[test]
    fn sine_jacobian_matches_finite_differences() {
        let b = sine(3);
        let x = [0.2, -0.7, 1.1];
        let mut jac = vec![0.0; 9];
        b.jacobian(0.0, 0.0, &x, &mut jac);
        let h = 1e-6;
        for m in 0..3 {
            let mut up = x;
            let mut dn = x;
            up[m] += h;
            dn[m] -= h;
            let (mut fu, mut fd) = (vec![0.0; 3], vec![0.0; 3]);
            b.eval(0.0, 0.0, &up, &mut fu);
            b.eval(0.0, 0.0, &dn, &mut fd);
            for l in 0..3 {
                assert!(((fu[l] - fd[l]) / (2.0 * h) - jac[l * 3 + m]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn picard_zero_drift_one_iteration() {
        let g = GridPartition::uniform(5, 5, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 1, 8).unwrap();
        let (x, iters) = solve_picard(&g, &ZeroDrift { dim: 1 }, &[0.0], &w, 1e-12, 10).unwrap();
        assert_eq!(iters, 1);
        assert_eq!(x, SolutionField::from_sheet(&w, &[0.0]).unwrap());
    }

    #[test]
    fn picard_fixed_point_is_unique() {
        let g = GridPartition::uniform(12, 12, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 2, 5).unwrap();
        let b = sine(2);
        let x0 = [0.1, 0.2];
        let tol = 1e-12;
        let (a, _) = solve_picard(&g, &b, &x0, &w, tol, 200).unwrap();
        let other = solve_euler(&g, &ConstantDrift { value: vec![3.0, -2.0] }, &x0, &w).unwrap();
        let (c, _) = solve_picard_from(&g, &b, &w, other, tol, 200).unwrap();
        assert!(a.sup_distance(&c) <= 2.0 * tol);
        assert!(solve_picard(&g, &SignDrift { center: x0.to_vec(), scale: 1.0 }, &x0, &w, tol, 10).is_err());
        assert!(matches!(solve_picard(&g, &b, &x0, &w, 0.0, 2), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn malliavin_zero_drift_is_identity() {
        let g = GridPartition::uniform(6, 6, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 2, 1).unwrap();
        let sol = solve_euler(&g, &ZeroDrift { dim: 2 }, &[0.0, 0.0], &w).unwrap();
        let f = malliavin_solve(&g, &ZeroDrift { dim: 2 }, &sol, Cell::new(2, 3)).unwrap();
        for i in 2..=6 {
            for j in 3..=6 {
                assert_eq!(f.at(i, j), &[1.0, 0.0, 0.0, 1.0]);
            }
        }
        assert_eq!(f.at(1, 6), &[0.0; 4]);
        let flow = flow_derivative(&g, &ZeroDrift { dim: 2 }, &sol).unwrap();
        assert_eq!(flow.at(6, 6), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn derivative_fields_refuse_sign_drift() {
        let g = GridPartition::uniform(3, 3, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 1, 1).unwrap();
        let b = SignDrift { center: vec![0.0], scale: 1.0 };
        let sol = solve_euler(&g, &b, &[0.0], &w).unwrap();
        assert!(matches!(malliavin_solve(&g, &b, &sol, Cell::new(1, 1)), Err(Error::MissingJacobian)));
        assert!(matches!(flow_derivative(&g, &b, &sol), Err(Error::MissingJacobian)));
    }

    #[test]
    fn malliavin_residual_and_series() {
        let g = GridPartition::uniform(10, 10, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 2, 3).unwrap();
        let b = sine(2);
        let sol = solve_euler(&g, &b, &[0.0, 0.5], &w).unwrap();
        let f = malliavin_solve(&g, &b, &sol, Cell::new(3, 2)).unwrap();
        assert!(malliavin_residual(&g, &b, &sol, &f).unwrap() <= 1e-12);
        let series = malliavin_series_check(&g, &b, &sol, Cell::new(3, 2), 4).unwrap();
        assert!(series.within_tail(), "{series:?}");
        assert!(series.max_difference > 0.0);
    }

    #[test]
    fn flow_matches_initial_value_differences() {
        let g = GridPartition::uniform(16, 16, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 2, 11).unwrap();
        let b = sine(2);
        let x0 = [0.2, -0.3];
        let sol = solve_euler(&g, &b, &x0, &w).unwrap();
        let flow = flow_derivative(&g, &b, &sol).unwrap();
        let delta = 1e-4;
        for c in 0..2 {
            let mut up = x0;
            let mut dn = x0;
            up[c] += delta;
            dn[c] -= delta;
            let xu = solve_euler(&g, &b, &up, &w).unwrap();
            let xd = solve_euler(&g, &b, &dn, &w).unwrap();
            for r in 0..2 {
                let fd = (xu.at(16, 16)[r] - xd.at(16, 16)[r]) / (2.0 * delta);
                let exact = flow.at(16, 16)[r * 2 + c];
                assert!((fd - exact).abs() <= 1e-2 * exact.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn doleans_zero_drift_is_one() {
        let g = GridPartition::uniform(4, 4, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 1, 1).unwrap();
        let m = doleans_exponential(&ZeroDrift { dim: 1 }, &w, DoleansArgument::Sheet(&[0.0])).unwrap();
        assert_eq!(m.value, 1.0);
    }

    #[test]
    fn constant_drift_log_weight_moments() {
        let g = GridPartition::uniform(4, 4, 1.0, 1.0).unwrap();
        let c = 0.7;
        let b = ConstantDrift { value: vec![c] };
        let n = 20_000u64;
        let (mut sum, mut sq) = (0.0, 0.0);
        for k in 0..n {
            let w = SheetSample::sample(&g, 1, crate::rng::split(21, k)).unwrap();
            let lm = doleans_exponential_upto(&b, &w, DoleansArgument::Sheet(&[0.0]), 4, 2).unwrap().log_value;
            sum += lm;
            sq += lm * lm;
        }
        let area = 0.5;
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        let sd = (c * c * area).sqrt();
        assert!((mean + 0.5 * c * c * area).abs() <= 4.0 * sd / (n as f64).sqrt());
        assert!((var - c * c * area).abs() <= 4.0 * c * c * area * (2.0 / n as f64).sqrt());
    }
}
