//! Rectangle-selection integration by parts.
//!
//! For sorted times `s_1 < ... < s_n`, `t_1 < ... < t_n` and a permutation
//! `σ`, the sheet value at `(s_i, t_{σ(i)})` is the sum of the cell
//! increments over the span `Λ_i = {1..i} x {1..σ(i)}`. The expectation of
//! `∏ b'(W(s_i, t_{σ(i)}))` is rewritten as a signed sum over subsets `K` of
//! the crossing set `J_σ`. Each term integrates by parts in exactly one cell
//! per row, and those cells occupy distinct columns.
//!
//! Rows in `J_σ` get a pair of cells `(γ_i, τ_i)` with `γ_i ≤ σ(i) < τ_i`.
//! The substitution `y_τ = z_τ + z_γ` removes `z_γ` from every other row's
//! sum. Rows in `K` differentiate at `γ_i`, rows in `J_σ \ K` at `τ_i`, and
//! rows outside `J_σ` at `γ_i` without substitution.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Cell, GridPartition};
use crate::perm;

/// Largest `n` accepted by [`expand`].
pub const MAX_POINTS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationSpec {
    sigma: Vec<usize>,
    s_times: Vec<f64>,
    t_times: Vec<f64>,
}

impl PermutationSpec {
    pub fn new(sigma: Vec<usize>, s_times: Vec<f64>, t_times: Vec<f64>) -> Result<Self> {
        perm::validate(&sigma)?;
        let n = sigma.len();
        if n == 0 {
            return Err(Error::InvalidPermutation("empty permutation".into()));
        }
        if s_times.len() != n || t_times.len() != n {
            return Err(Error::InvalidTimes(format!(
                "expected {n} times per axis, got {} and {}",
                s_times.len(),
                t_times.len()
            )));
        }
        for (name, times) in [("s", &s_times), ("t", &t_times)] {
            let mut prev = 0.0;
            for &x in times.iter() {
                if x <= prev || !x.is_finite() {
                    return Err(Error::InvalidTimes(format!("{name} times {times:?}")));
                }
                prev = x;
            }
        }
        Ok(Self { sigma, s_times, t_times })
    }

    /// Times `1, 2, ..., n` on both axes.
    pub fn unit(sigma: Vec<usize>) -> Result<Self> {
        let times: Vec<f64> = (1..=sigma.len()).map(|k| k as f64).collect();
        Self::new(sigma, times.clone(), times)
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// `σ(i)`, 1-based.
    #[inline]
    pub fn sigma(&self, i: usize) -> usize {
        self.sigma[i - 1]
    }

    pub fn sigma_slice(&self) -> &[usize] {
        &self.sigma
    }

    pub fn s_times(&self) -> &[f64] {
        &self.s_times
    }

    pub fn t_times(&self) -> &[f64] {
        &self.t_times
    }

    pub fn grid(&self) -> GridPartition {
        GridPartition::from_times(&self.s_times, &self.t_times).expect("validated times")
    }

    /// Whether cell `c` lies in the span of row `i`.
    #[inline]
    pub fn in_span(&self, c: Cell, i: usize) -> bool {
        c.row <= i && c.col <= self.sigma(i)
    }
}

/// `Λ_i = {1..i} x {1..σ(i)}`.
pub fn span(spec: &PermutationSpec, i: usize) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(i * spec.sigma(i));
    for r in 1..=i {
        for c in 1..=spec.sigma(i) {
            cells.push(Cell::new(r, c));
        }
    }
    cells
}

/// Rows whose evaluation point is strictly dominated by another one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossingSet {
    pub members: Vec<usize>,
}

impl CrossingSet {
    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn crossing_set(spec: &PermutationSpec) -> CrossingSet {
    let n = spec.n();
    let members = (1..=n).filter(|&i| (i + 1..=n).any(|k| spec.sigma(i) < spec.sigma(k))).collect();
    CrossingSet { members }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Integration-by-parts column `γ_i` (a maximum over admissible columns).
    Left,
    /// Substitution column `τ_i` (a minimum).
    Right,
}

/// One max/min selection step and the candidate set it ranged over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionCheck {
    pub row: usize,
    pub side: Side,
    pub candidates: Vec<usize>,
}

impl SelectionCheck {
    pub fn passed(&self) -> bool {
        !self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GammaTauAssignment {
    pub k: Vec<usize>,
    /// `γ_i` for every row, indexed by `i - 1`.
    pub gamma: Vec<usize>,
    /// `τ_i` for rows in `J_σ`, `None` elsewhere.
    pub tau: Vec<Option<usize>>,
}

fn check_subset(j: &CrossingSet, k: &[usize]) -> Result<BTreeSet<usize>> {
    let set: BTreeSet<usize> = k.iter().copied().collect();
    if set.len() != k.len() || !set.iter().all(|&i| j.contains(i)) {
        return Err(Error::InvalidTerm { k: k.to_vec(), reason: format!("not a subset of J = {:?}", j.members) });
    }
    Ok(set)
}

/// Runs the selection recursion, recording each candidate set. Empty sets
/// leave the column at 0 and are reported rather than raised.
fn select(spec: &PermutationSpec, j: &CrossingSet, k: &BTreeSet<usize>) -> (GammaTauAssignment, Vec<SelectionCheck>) {
    let n = spec.n();
    let mut gamma = vec![0usize; n];
    let mut tau = vec![None; n];
    let mut checks = Vec::new();
    let excluded = |upto: usize, gamma: &[usize], tau: &[Option<usize>]| -> BTreeSet<usize> {
        j.members[..upto].iter().map(|&m| if k.contains(&m) { gamma[m - 1] } else { tau[m - 1].unwrap_or(0) }).collect()
    };

    for (r, &i) in j.members.iter().enumerate() {
        let si = spec.sigma(i);
        let (left, right) = if r == 0 {
            (vec![si], vec![si + 1])
        } else {
            let excl = excluded(r, &gamma, &tau);
            let cols = j.members[..=r].iter().map(|&m| spec.sigma(m));
            let left: BTreeSet<usize> = cols.clone().filter(|&c| c <= si && !excl.contains(&c)).collect();
            let right: BTreeSet<usize> = cols.map(|c| c + 1).filter(|&c| c > si && !excl.contains(&c)).collect();
            (left.into_iter().collect(), right.into_iter().collect())
        };
        gamma[i - 1] = left.last().copied().unwrap_or(0);
        tau[i - 1] = Some(right.first().copied().unwrap_or(0));
        checks.push(SelectionCheck { row: i, side: Side::Left, candidates: left });
        checks.push(SelectionCheck { row: i, side: Side::Right, candidates: right });
    }

    let excl = excluded(j.len(), &gamma, &tau);
    for i in (1..=n).filter(|&i| !j.contains(i)) {
        let si = spec.sigma(i);
        let left: BTreeSet<usize> = j
            .members
            .iter()
            .map(|&m| spec.sigma(m))
            .chain(std::iter::once(si))
            .filter(|&c| c <= si && !excl.contains(&c))
            .collect();
        let left: Vec<usize> = left.into_iter().collect();
        gamma[i - 1] = left.last().copied().unwrap_or(0);
        checks.push(SelectionCheck { row: i, side: Side::Left, candidates: left });
    }

    let mut kv: Vec<usize> = k.iter().copied().collect();
    kv.sort_unstable();
    (GammaTauAssignment { k: kv, gamma, tau }, checks)
}

/// Columns `γ_i` and `τ_i` for the subset `K ⊆ J_σ`.
pub fn gamma_tau(spec: &PermutationSpec, k: &[usize]) -> Result<GammaTauAssignment> {
    let j = crossing_set(spec);
    let kset = check_subset(&j, k)?;
    let (assignment, checks) = select(spec, &j, &kset);
    if let Some(bad) = checks.iter().find(|c| !c.passed()) {
        let kind = match bad.side {
            Side::Left => "left-shift",
            Side::Right => "right-shift",
        };
        return Err(Error::EmptySelection { row: bad.row, kind });
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub k: Vec<usize>,
    pub checks: Vec<SelectionCheck>,
    pub failures: usize,
}

impl ShiftReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Verifies every selection step ranges over a nonempty candidate set.
pub fn assert_shift_lemmas(spec: &PermutationSpec, k: &[usize]) -> Result<ShiftReport> {
    let j = crossing_set(spec);
    let kset = check_subset(&j, k)?;
    let (_, checks) = select(spec, &j, &kset);
    let failures = checks.iter().filter(|c| !c.passed()).count();
    Ok(ShiftReport { k: kset.into_iter().collect(), checks, failures })
}

/// Cell(s) at which row `i` integrates by parts, before any selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum OrientationPoint {
    Single(Cell),
    Pair(Cell, Cell),
}

pub fn orientation_points(spec: &PermutationSpec) -> Vec<OrientationPoint> {
    let j = crossing_set(spec);
    (1..=spec.n())
        .map(|i| {
            let c = Cell::new(i, spec.sigma(i));
            if j.contains(i) {
                OrientationPoint::Pair(c, Cell::new(i, spec.sigma(i) + 1))
            } else {
                OrientationPoint::Single(c)
            }
        })
        .collect()
}

/// Which cell of the row carries the differentiated kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BKind {
    /// `B` at `(i, γ_i)` with argument `y_γ`.
    Gamma,
    /// `B` at `(i, τ_i)` with argument `y_τ - y_γ`.
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowFactor {
    pub row: usize,
    pub gamma: Cell,
    pub tau: Option<Cell>,
    pub b_kind: BKind,
}

impl RowFactor {
    pub fn b_cell(&self) -> Cell {
        match self.b_kind {
            BKind::Gamma => self.gamma,
            BKind::Tau => self.tau.expect("tau cell for tau factor"),
        }
    }

    /// Paired kernel without derivative, if the row is substituted.
    pub fn e_cell(&self) -> Option<Cell> {
        self.tau.map(|tau| match self.b_kind {
            BKind::Gamma => tau,
            BKind::Tau => self.gamma,
        })
    }
}

/// One signed summand `J_K` of the expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbpTerm {
    pub k: Vec<usize>,
    pub sign: i8,
    pub rows: Vec<RowFactor>,
    /// Cells whose substituted variables sum to the argument of `b_i`.
    pub b_arg_sets: Vec<Vec<Cell>>,
}

impl IbpTerm {
    pub fn b_cells(&self) -> Vec<Cell> {
        self.rows.iter().map(RowFactor::b_cell).collect()
    }

    pub fn e_cells(&self) -> Vec<Cell> {
        self.rows.iter().filter_map(RowFactor::e_cell).collect()
    }

    pub fn b_columns(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.b_cell().col).collect()
    }

    /// Machine-readable form `{K, sign, B_cells, E_cells, b_arg_sets}`.
    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |cells: &[Cell]| cells.iter().map(|c| [c.row, c.col]).collect::<Vec<_>>();
        serde_json::json!({
            "K": self.k,
            "sign": self.sign,
            "B_cells": pairs(&self.b_cells()),
            "E_cells": pairs(&self.e_cells()),
            "b_arg_sets": self.b_arg_sets.iter().map(|s| pairs(s)).collect::<Vec<_>>(),
        })
    }
}

fn build_term(spec: &PermutationSpec, j: &CrossingSet, a: &GammaTauAssignment) -> Result<IbpTerm> {
    let n = spec.n();
    let rows: Vec<RowFactor> = (1..=n)
        .map(|i| {
            let gamma = Cell::new(i, a.gamma[i - 1]);
            let tau = a.tau[i - 1].map(|c| Cell::new(i, c));
            let b_kind = if !j.contains(i) || a.k.contains(&i) { BKind::Gamma } else { BKind::Tau };
            RowFactor { row: i, gamma, tau, b_kind }
        })
        .collect();
    let invalid = |reason: String| Error::InvalidTerm { k: a.k.clone(), reason };

    let mut cols = BTreeSet::new();
    for r in &rows {
        if !cols.insert(r.b_cell().col) {
            return Err(invalid(format!("column {} carries two derivative kernels", r.b_cell().col)));
        }
    }

    // Shifting along row i's direction must leave every other row's sum fixed
    // and move row i's own sum.
    for r in &rows {
        let own_gamma = spec.in_span(r.gamma, r.row);
        let own_tau = r.tau.is_some_and(|c| spec.in_span(c, r.row));
        if !own_gamma || own_tau {
            return Err(invalid(format!("row {} does not own its direction", r.row)));
        }
        for other in (1..=n).filter(|&o| o != r.row) {
            let g = spec.in_span(r.gamma, other);
            let t = r.tau.is_some_and(|c| spec.in_span(c, other));
            if g != t {
                return Err(invalid(format!("direction of row {} leaks into row {other}", r.row)));
            }
        }
    }

    let substituted: BTreeSet<Cell> = rows.iter().filter(|r| r.tau.is_some()).map(|r| r.gamma).collect();
    let b_arg_sets = rows
        .iter()
        .map(|r| span(spec, r.row).into_iter().filter(|c| !substituted.contains(c) || (*c == r.gamma)).collect())
        .collect();

    let parity = a.k.len() + (n - j.len());
    let sign = if parity.is_multiple_of(2) { 1 } else { -1 };
    Ok(IbpTerm { k: a.k.clone(), sign, rows, b_arg_sets })
}

/// All `2^{#J_σ}` terms. Subsets are ordered by the bitmask whose most
/// significant bit is the first crossing row, descending.
pub fn expand(spec: &PermutationSpec) -> Result<Vec<IbpTerm>> {
    if spec.n() > MAX_POINTS {
        return Err(Error::Guard(format!("expansion supports n <= {MAX_POINTS}, got {}", spec.n())));
    }
    let j = crossing_set(spec);
    let q = j.len();
    (0..1usize << q)
        .rev()
        .map(|mask| {
            let k: Vec<usize> = (0..q).filter(|b| mask >> (q - 1 - b) & 1 == 1).map(|b| j.members[b]).collect();
            let a = gamma_tau(spec, &k)?;
            build_term(spec, &j, &a)
        })
        .collect()
}

/// Substituted variables: `y_c = z_c`, except `y_τ = z_τ + z_γ` for rows in `J_σ`.
/// `z` is indexed row-major over the `n x n` cells.
pub fn substitute(term: &IbpTerm, n: usize, z: &[f64]) -> Vec<f64> {
    let mut y = z.to_vec();
    for r in &term.rows {
        if let Some(tau) = r.tau {
            y[(tau.row - 1) * n + tau.col - 1] += z[(r.gamma.row - 1) * n + r.gamma.col - 1];
        }
    }
    y
}
