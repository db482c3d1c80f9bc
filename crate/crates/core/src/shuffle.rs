//! Block-increasing permutation families and the partitions they induce on
//! powers of ordered simplices in the plane.
//!
//! A point of a region is a chain of plane points `p_1, ..., p_N` with both
//! coordinates strictly decreasing in the index. Each region kind fixes an
//! interval for every coordinate; membership is the intervals plus the two
//! decreasing chains.
//!
//! Label conventions for the product of `m` copies:
//! * `σ`, `γ` give each point its descending rank among all `s` (resp. `t`)
//!   coordinates, so rank 1 is the largest.
//! * For the split regions, `π` and `ρ` rank the first `k` and the last `n`
//!   points of every block by ascending coordinate along the split axis, and
//!   send rank `p` to the `p`-th smallest index of the `ξ` (resp. `ζ`) set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PlanePoint;
use crate::integrators::montecarlo::{monte_carlo, McEstimate};
use crate::integrators::TimeWindow;
use crate::rng::{split, CounterRng};

/// Largest `m·k` (or `m·(k+n)`) accepted by the enumerations.
pub const MAX_ENUMERATION: usize = 12;

const MAX_REJECTIONS: usize = 1_000_000;

/// Permutations of `{1..mk}` increasing on each consecutive block of size `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockIncreasingFamily {
    pub m: usize,
    pub k: usize,
    pub members: Vec<Vec<usize>>,
}

pub fn enumerate_block_increasing(m: usize, k: usize) -> Result<BlockIncreasingFamily> {
    let total = m * k;
    if total > MAX_ENUMERATION {
        return Err(Error::Guard(format!("m*k = {total} exceeds {MAX_ENUMERATION}")));
    }
    let mut members = Vec::new();
    let mut current = vec![0usize; total];
    let mut used = vec![false; total + 1];
    fill_blocks(0, k, m, &mut current, &mut used, &mut members);
    Ok(BlockIncreasingFamily { m, k, members })
}

fn fill_blocks(block: usize, k: usize, m: usize, cur: &mut [usize], used: &mut [bool], out: &mut Vec<Vec<usize>>) {
    if block == m {
        out.push(cur.to_vec());
        return;
    }
    fill_subset(block, 0, 1, k, m, cur, used, out);
}

#[allow(clippy::too_many_arguments)]
fn fill_subset(
    block: usize,
    pos: usize,
    min: usize,
    k: usize,
    m: usize,
    cur: &mut [usize],
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    if pos == k {
        fill_blocks(block + 1, k, m, cur, used, out);
        return;
    }
    for v in min..=m * k {
        if !used[v] {
            used[v] = true;
            cur[block * k + pos] = v;
            fill_subset(block, pos + 1, v + 1, k, m, cur, used, out);
            used[v] = false;
        }
    }
}

/// `(mk)! / (k!)^m`.
pub fn block_increasing_count(m: usize, k: usize) -> u128 {
    let fact = |x: usize| (1..=x as u128).product::<u128>();
    fact(m * k) / fact(k).pow(m as u32)
}

/// The `ξ`/`ζ` index split of `{1..m(k+n)}` and its two label families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitIndexFamily {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// Sorted `ξ_{i,j} = j + i(k+n)`.
    pub xi: Vec<usize>,
    /// Sorted `ζ_{i,j} = k + j + i(k+n)`.
    pub zeta: Vec<usize>,
    /// Members of the `ξ` family; entry `p` is the image of `xi[p]`.
    pub star: Vec<Vec<usize>>,
    /// Members of the `ζ` family; entry `p` is the image of `zeta[p]`.
    pub star_star: Vec<Vec<usize>>,
}

pub fn xi(i: usize, j: usize, k: usize, n: usize) -> usize {
    j + i * (k + n)
}

pub fn zeta(i: usize, j: usize, k: usize, n: usize) -> usize {
    k + j + i * (k + n)
}

/// Block-decreasing permutations of `labels`, blocks of size `b`.
fn block_decreasing_on(labels: &[usize], m: usize, b: usize) -> Result<Vec<Vec<usize>>> {
    let fam = enumerate_block_increasing(m, b)?;
    Ok(fam
        .members
        .into_iter()
        .map(|mut p| {
            for chunk in p.chunks_mut(b) {
                chunk.reverse();
            }
            p.into_iter().map(|v| labels[v - 1]).collect()
        })
        .collect())
}

pub fn split_index_family(m: usize, k: usize, n: usize) -> Result<SplitIndexFamily> {
    if m * (k + n) > MAX_ENUMERATION {
        return Err(Error::Guard(format!("m(k+n) = {} exceeds {MAX_ENUMERATION}", m * (k + n))));
    }
    let xi_set: Vec<usize> = (0..m).flat_map(|i| (1..=k).map(move |j| xi(i, j, k, n))).collect();
    let zeta_set: Vec<usize> = (0..m).flat_map(|i| (1..=n).map(move |j| zeta(i, j, k, n))).collect();
    let star = block_decreasing_on(&xi_set, m, k)?;
    let star_star = block_decreasing_on(&zeta_set, m, n)?;
    Ok(SplitIndexFamily { m, k, n, xi: xi_set, zeta: zeta_set, star, star_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Nabla,
    NablaTilde,
    Lambda,
    LambdaTilde,
    Delta,
    DeltaTilde,
}

impl RegionKind {
    fn is_split(self) -> bool {
        !matches!(self, RegionKind::Nabla | RegionKind::NablaTilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionDescriptor {
    pub kind: RegionKind,
    pub k: usize,
    /// Number of trailing points for the split kinds; zero for the `∇` kinds.
    pub n: usize,
    pub bounds: TimeWindow,
}

impl RegionDescriptor {
    pub fn new(kind: RegionKind, k: usize, n: usize, bounds: TimeWindow) -> Result<Self> {
        let b = &bounds;
        let ordered = 0.0 <= b.r_bar && b.r_bar < b.r && b.r < b.s && 0.0 <= b.u_bar && b.u_bar < b.u && b.u < b.t;
        if !ordered {
            return Err(Error::InvalidParameter(format!("need r̄ < r < s and ū < u < t, got {bounds:?}")));
        }
        if k == 0 || (kind.is_split() && n == 0) || (!kind.is_split() && n != 0) {
            return Err(Error::InvalidParameter(format!("invalid sizes k={k}, n={n} for {kind:?}")));
        }
        Ok(Self { kind, k, n, bounds })
    }

    pub fn arity(&self) -> usize {
        self.k + self.n
    }

    /// Open interval for the `s` and `t` coordinate of point `j` (1-based).
    pub fn intervals(&self, j: usize) -> ((f64, f64), (f64, f64)) {
        let b = &self.bounds;
        let upper = j <= self.k;
        match self.kind {
            RegionKind::Nabla => ((b.r_bar, b.r), (b.u_bar, b.t)),
            RegionKind::NablaTilde => ((b.r, b.s), (b.u_bar, b.u)),
            RegionKind::Lambda => (if upper { (b.r, b.s) } else { (b.r_bar, b.r) }, (b.u_bar, b.t)),
            RegionKind::LambdaTilde => ((b.r_bar, b.s), if upper { (b.u, b.t) } else { (b.u_bar, b.u) }),
            RegionKind::Delta => {
                (if upper { (b.r, b.s) } else { (b.r_bar, b.r) }, if upper { (b.u, b.t) } else { (b.u_bar, b.t) })
            }
            RegionKind::DeltaTilde => {
                (if upper { (b.r, b.s) } else { (b.r_bar, b.s) }, if upper { (b.u, b.t) } else { (b.u_bar, b.u) })
            }
        }
    }

    /// Product of the coordinate interval lengths.
    pub fn box_volume(&self) -> f64 {
        (1..=self.arity())
            .map(|j| {
                let ((a, b), (c, d)) = self.intervals(j);
                (b - a) * (d - c)
            })
            .product()
    }

    fn contains_unchecked(&self, pts: &[PlanePoint]) -> bool {
        for (idx, p) in pts.iter().enumerate() {
            let ((a, b), (c, d)) = self.intervals(idx + 1);
            if !(a < p.s && p.s < b && c < p.t && p.t < d) {
                return false;
            }
        }
        pts.windows(2).all(|w| w[1].s < w[0].s && w[1].t < w[0].t)
    }

    pub fn contains(&self, pts: &[PlanePoint]) -> Result<bool> {
        if pts.len() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: pts.len() });
        }
        Ok(self.contains_unchecked(pts))
    }

    /// Uniform point of the region by rejection from the coordinate box.
    pub fn sample(&self, rng: &mut CounterRng) -> Result<Vec<PlanePoint>> {
        let mut pts = vec![PlanePoint::ORIGIN; self.arity()];
        for _ in 0..MAX_REJECTIONS {
            for (idx, p) in pts.iter_mut().enumerate() {
                let ((a, b), (c, d)) = self.intervals(idx + 1);
                *p = PlanePoint::new(rng.uniform_in(a, b), rng.uniform_in(c, d));
            }
            if self.contains_unchecked(&pts) {
                return Ok(pts);
            }
        }
        Err(Error::Guard(format!("rejection sampler for {:?} exceeded {MAX_REJECTIONS} tries", self.kind)))
    }
}

/// `membership(region, points)`.
pub fn membership(region: &RegionDescriptor, pts: &[PlanePoint]) -> Result<bool> {
    region.contains(pts)
}

fn check_product(region: &RegionDescriptor, m: usize, pts: &[PlanePoint]) -> Result<()> {
    let a = region.arity();
    if pts.len() != m * a {
        return Err(Error::ArityMismatch { expected: m * a, got: pts.len() });
    }
    let mut s: Vec<f64> = pts.iter().map(|p| p.s).collect();
    let mut t: Vec<f64> = pts.iter().map(|p| p.t).collect();
    s.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    if s.windows(2).any(|w| w[0] == w[1]) || t.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DegenerateTies);
    }
    if !pts.chunks(a).all(|block| region.contains_unchecked(block)) {
        return Err(Error::NotInProduct);
    }
    Ok(())
}

/// Rank of each value, 1 for the largest.
fn descending_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Cell `(σ, γ)` of the `m`-fold product of a `∇` region containing `pts`.
pub fn locate_cell(region: &RegionDescriptor, m: usize, pts: &[PlanePoint]) -> Result<(Vec<usize>, Vec<usize>)> {
    if region.kind.is_split() {
        return Err(Error::InvalidParameter("locate_cell needs a ∇ region".into()));
    }
    check_product(region, m, pts)?;
    let s: Vec<f64> = pts.iter().map(|p| p.s).collect();
    let t: Vec<f64> = pts.iter().map(|p| p.t).collect();
    Ok((descending_ranks(&s), descending_ranks(&t)))
}

/// Labels `(π, ρ, σ)` of a point in the `m`-fold product of a `Λ` region.
pub type SplitLabels = (Vec<usize>, Vec<usize>, Vec<usize>);

fn split_axes(kind: RegionKind) -> Result<bool> {
    match kind {
        RegionKind::Lambda => Ok(true),
        RegionKind::LambdaTilde => Ok(false),
        other => Err(Error::InvalidParameter(format!("locate_cell_split needs a Λ region, got {other:?}"))),
    }
}

pub fn locate_cell_split(region: &RegionDescriptor, m: usize, pts: &[PlanePoint]) -> Result<SplitLabels> {
    let split_on_s = split_axes(region.kind)?;
    check_product(region, m, pts)?;
    let (k, n) = (region.k, region.n);
    let (split, full): (Vec<f64>, Vec<f64>) =
        pts.iter().map(|p| if split_on_s { (p.s, p.t) } else { (p.t, p.s) }).unzip();
    let fam_xi: Vec<usize> = (0..m).flat_map(|i| (1..=k).map(move |j| xi(i, j, k, n))).collect();
    let fam_zeta: Vec<usize> = (0..m).flat_map(|i| (1..=n).map(move |j| zeta(i, j, k, n))).collect();
    let ascending = |labels: &[usize]| -> Vec<usize> {
        let vals: Vec<f64> = labels.iter().map(|&a| -split[a - 1]).collect();
        descending_ranks(&vals).into_iter().map(|r| labels[r - 1]).collect()
    };
    Ok((ascending(&fam_xi), ascending(&fam_zeta), descending_ranks(&full)))
}

/// A cell of one of the partitions, stored through the inverse orderings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellLabel {
    /// Point indices (0-based) by decreasing coordinate along the full axis,
    /// or along `s` for the `∇` kinds.
    first: Vec<usize>,
    /// Decreasing along `t` for `∇`; for split kinds, the `ξ` points by
    /// increasing split coordinate.
    second: Vec<usize>,
    /// Split kinds only: the `ζ` points by increasing split coordinate.
    third: Vec<usize>,
}

fn inverse_order(values: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; values.len()];
    for (a, &rank) in values.iter().enumerate() {
        inv[rank - 1] = a;
    }
    inv
}

/// Every cell of the partition of the `m`-fold product of `region`.
pub fn cell_labels(region: &RegionDescriptor, m: usize) -> Result<Vec<CellLabel>> {
    match region.kind {
        RegionKind::Nabla | RegionKind::NablaTilde => {
            let fam = enumerate_block_increasing(m, region.k)?;
            let inv: Vec<Vec<usize>> = fam.members.iter().map(|p| inverse_order(p)).collect();
            let mut out = Vec::with_capacity(inv.len() * inv.len());
            for a in &inv {
                for b in &inv {
                    out.push(CellLabel { first: a.clone(), second: b.clone(), third: Vec::new() });
                }
            }
            Ok(out)
        }
        RegionKind::Lambda | RegionKind::LambdaTilde => {
            let split = split_index_family(m, region.k, region.n)?;
            let full = enumerate_block_increasing(m, region.k + region.n)?;
            let mut out = Vec::new();
            for pi in &split.star {
                for rho in &split.star_star {
                    for sigma in &full.members {
                        out.push(CellLabel {
                            first: inverse_order(sigma),
                            second: order_by_image(&split.xi, pi),
                            third: order_by_image(&split.zeta, rho),
                        });
                    }
                }
            }
            Ok(out)
        }
        other => Err(Error::InvalidParameter(format!("{other:?} has no shuffle partition"))),
    }
}

/// Point indices (0-based) of `labels` sorted by their images.
fn order_by_image(labels: &[usize], image: &[usize]) -> Vec<usize> {
    let mut pairs: Vec<(usize, usize)> = labels.iter().zip(image).map(|(&a, &v)| (v, a - 1)).collect();
    pairs.sort_unstable();
    pairs.into_iter().map(|(_, a)| a).collect()
}

fn chain_within(order: &[usize], coord: &[f64], lo: f64, hi: f64, decreasing: bool) -> bool {
    if order.is_empty() {
        return true;
    }
    let vals = order.iter().map(|&a| coord[a]);
    let ok_bounds = vals.clone().all(|x| lo <= x && x <= hi);
    let v: Vec<f64> = vals.collect();
    ok_bounds && v.windows(2).all(|w| if decreasing { w[1] < w[0] } else { w[0] < w[1] })
}

/// Whether `pts` lies in the cell `label`.
pub fn cell_contains(region: &RegionDescriptor, label: &CellLabel, pts: &[PlanePoint]) -> bool {
    let b = &region.bounds;
    let s: Vec<f64> = pts.iter().map(|p| p.s).collect();
    let t: Vec<f64> = pts.iter().map(|p| p.t).collect();
    match region.kind {
        RegionKind::Nabla => {
            chain_within(&label.first, &s, b.r_bar, b.r, true) && chain_within(&label.second, &t, b.u_bar, b.t, true)
        }
        RegionKind::NablaTilde => {
            chain_within(&label.first, &s, b.r, b.s, true) && chain_within(&label.second, &t, b.u_bar, b.u, true)
        }
        RegionKind::Lambda => {
            chain_within(&label.first, &t, b.u_bar, b.t, true)
                && chain_within(&label.second, &s, b.r, b.s, false)
                && chain_within(&label.third, &s, b.r_bar, b.r, false)
        }
        RegionKind::LambdaTilde => {
            chain_within(&label.first, &s, b.r_bar, b.s, true)
                && chain_within(&label.second, &t, b.u, b.t, false)
                && chain_within(&label.third, &t, b.u_bar, b.u, false)
        }
        _ => false,
    }
}

/// Number of cells containing `pts`; one on the product, zero off it.
pub fn count_containing(region: &RegionDescriptor, labels: &[CellLabel], pts: &[PlanePoint]) -> usize {
    labels.iter().filter(|l| cell_contains(region, l, pts)).count()
}

/// Both sides of the product-power identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShuffleIdentity {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
}

impl ShuffleIdentity {
    pub fn agrees(&self, k_se: f64) -> bool {
        self.lhs.agrees_with(&self.rhs, k_se)
    }
}

/// `(∫_R ∏f)^m` from `m` independent estimates against `Σ_cells ∫_cell ∏f`
/// from uniform draws over the product box.
pub fn shuffle_identity_mc<F>(
    region: &RegionDescriptor,
    m: usize,
    f: F,
    samples: u64,
    seed: u64,
) -> Result<ShuffleIdentity>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let labels = cell_labels(region, m)?;
    let a = region.arity();
    let vol = region.box_volume();
    let draw = |rng: &mut CounterRng, pts: &mut [PlanePoint]| {
        for (idx, p) in pts.iter_mut().enumerate() {
            let ((lo_s, hi_s), (lo_t, hi_t)) = region.intervals(idx % a + 1);
            *p = PlanePoint::new(rng.uniform_in(lo_s, hi_s), rng.uniform_in(lo_t, hi_t));
        }
    };
    let weight = |pts: &[PlanePoint]| pts.iter().map(|p| f(p.s, p.t)).product::<f64>();

    let factors: Vec<McEstimate> = (0..m as u64)
        .map(|b| {
            monte_carlo(
                |rng| {
                    let mut pts = vec![PlanePoint::ORIGIN; a];
                    draw(rng, &mut pts);
                    if region.contains_unchecked(&pts) {
                        vol * weight(&pts)
                    } else {
                        0.0
                    }
                },
                samples,
                split(seed, b),
            )
        })
        .collect();
    let mean: f64 = factors.iter().map(|e| e.mean).product();
    let var: f64 = (0..m)
        .map(|i| {
            let others: f64 = factors.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, e)| e.mean).product();
            (others * factors[i].std_error).powi(2)
        })
        .sum();
    let lhs = McEstimate { mean, std_error: var.sqrt(), n_samples: samples * m as u64, seed };

    let vol_m = vol.powi(m as i32);
    let rhs = monte_carlo(
        |rng| {
            let mut pts = vec![PlanePoint::ORIGIN; m * a];
            draw(rng, &mut pts);
            let cells = count_containing(region, &labels, &pts);
            if cells == 0 {
                0.0
            } else {
                vol_m * cells as f64 * weight(&pts)
            }
        },
        samples,
        split(seed, m as u64),
    );
    Ok(ShuffleIdentity { lhs, rhs })
}

/// Outcome of sampling product points and scanning all cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PartitionScan {
    pub points: u64,
    pub cells: usize,
    /// Points contained in zero or several cells.
    pub violations: u64,
    /// Points whose located labels name a cell that does not contain them.
    pub locate_mismatches: u64,
}

/// Samples `points` product points and checks each lies in exactly one cell,
/// namely the one returned by the locator.
pub fn partition_scan(region: &RegionDescriptor, m: usize, points: u64, seed: u64) -> Result<PartitionScan> {
    let labels = cell_labels(region, m)?;
    let split_kind = region.kind.is_split();
    let (xi_set, zeta_set) = if split_kind {
        let fam = split_index_family(m, region.k, region.n)?;
        (fam.xi, fam.zeta)
    } else {
        (Vec::new(), Vec::new())
    };
    let mut violations = 0;
    let mut mismatches = 0;
    for p in 0..points {
        let mut rng = CounterRng::child(seed, p);
        let mut pts = Vec::with_capacity(m * region.arity());
        for _ in 0..m {
            pts.extend(region.sample(&mut rng)?);
        }
        let containing: Vec<&CellLabel> = labels.iter().filter(|l| cell_contains(region, l, &pts)).collect();
        if containing.len() != 1 {
            violations += 1;
            continue;
        }
        let located = if split_kind {
            let (pi, rho, sigma) = locate_cell_split(region, m, &pts)?;
            CellLabel {
                first: inverse_order(&sigma),
                second: order_by_image(&xi_set, &pi),
                third: order_by_image(&zeta_set, &rho),
            }
        } else {
            let (sigma, gamma) = locate_cell(region, m, &pts)?;
            CellLabel { first: inverse_order(&sigma), second: inverse_order(&gamma), third: Vec::new() }
        };
        if containing[0] != &located {
            mismatches += 1;
        }
    }
    Ok(PartitionScan { points, cells: labels.len(), violations, locate_mismatches: mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> TimeWindow {
        TimeWindow { r_bar: 0.0, r: 0.5, s: 1.0, u_bar: 0.0, u: 0.5, t: 1.0 }
    }

    #[test]
    fn small_families() {
        assert_eq!(enumerate_block_increasing(2, 1).unwrap().members.len(), 2);
        let f = enumerate_block_increasing(2, 2).unwrap();
        assert_eq!(f.members.len(), 6);
        for p in &f.members {
            assert!(p[0] < p[1] && p[2] < p[3]);
        }
        assert!(enumerate_block_increasing(4, 4).is_err());
        assert_eq!(block_increasing_count(4, 3), 369_600);
    }

    #[test]
    fn split_family_shapes() {
        let f = split_index_family(2, 2, 1).unwrap();
        assert_eq!(f.xi, vec![1, 2, 4, 5]);
        assert_eq!(f.zeta, vec![3, 6]);
        assert_eq!(f.star.len(), 6);
        assert_eq!(f.star_star.len(), 2);
        for pi in &f.star {
            assert!(pi[1] < pi[0] && pi[3] < pi[2]);
        }
    }

    #[test]
    fn nabla_membership() {
        let w = TimeWindow { r_bar: 0.0, r: 1.0, s: 2.0, u_bar: 0.0, u: 0.5, t: 1.0 };
        let r = RegionDescriptor::new(RegionKind::Nabla, 1, 0, w).unwrap();
        assert!(r.contains(&[PlanePoint::new(0.5, 0.5)]).unwrap());
        assert!(!r.contains(&[PlanePoint::new(0.5, 1.5)]).unwrap());
        assert!(r.contains(&[]).is_err());
    }

    #[test]
    fn delta_membership() {
        let r = RegionDescriptor::new(RegionKind::Delta, 1, 1, unit()).unwrap();
        let p = PlanePoint::new;
        assert!(r.contains(&[p(0.7, 0.8), p(0.3, 0.4)]).unwrap());
        assert!(r.contains(&[p(0.7, 0.8), p(0.3, 0.6)]).unwrap());
        assert!(!r.contains(&[p(0.7, 0.4), p(0.3, 0.3)]).unwrap());
        assert!(!r.contains(&[p(0.7, 0.8), p(0.6, 0.4)]).unwrap());
        assert!(!r.contains(&[p(0.7, 0.6), p(0.3, 0.7)]).unwrap());
    }

    #[test]
    fn locate_sorts_by_rank() {
        let w = TimeWindow { r_bar: 0.0, r: 1.0, s: 2.0, u_bar: 0.0, u: 0.5, t: 1.0 };
        let r = RegionDescriptor::new(RegionKind::Nabla, 1, 0, w).unwrap();
        let pts = [PlanePoint::new(0.3, 0.1), PlanePoint::new(0.2, 0.4)];
        let (sigma, gamma) = locate_cell(&r, 2, &pts).unwrap();
        assert_eq!(sigma, vec![1, 2]);
        assert_eq!(gamma, vec![2, 1]);
        let tie = [PlanePoint::new(0.3, 0.1), PlanePoint::new(0.3, 0.4)];
        assert!(matches!(locate_cell(&r, 2, &tie), Err(Error::DegenerateTies)));
        let out = [PlanePoint::new(0.3, 0.1), PlanePoint::new(1.2, 0.4)];
        assert!(matches!(locate_cell(&r, 2, &out), Err(Error::NotInProduct)));
    }

    #[test]
    fn single_block_has_unique_labels() {
        let r = RegionDescriptor::new(RegionKind::Lambda, 1, 1, unit()).unwrap();
        let pts = [PlanePoint::new(0.8, 0.9), PlanePoint::new(0.2, 0.3)];
        let (pi, rho, sigma) = locate_cell_split(&r, 1, &pts).unwrap();
        assert_eq!((pi, rho, sigma), (vec![1], vec![2], vec![1, 2]));
        let r2 = RegionDescriptor::new(RegionKind::Lambda, 2, 1, unit()).unwrap();
        let pts = [PlanePoint::new(0.9, 0.9), PlanePoint::new(0.7, 0.6), PlanePoint::new(0.2, 0.3)];
        let (pi, _, _) = locate_cell_split(&r2, 1, &pts).unwrap();
        assert_eq!(pi, split_index_family(1, 2, 1).unwrap().star[0]);
    }

    #[test]
    fn relocating_is_idempotent() {
        let r = RegionDescriptor::new(RegionKind::NablaTilde, 2, 0, unit()).unwrap();
        let labels = cell_labels(&r, 2).unwrap();
        let mut rng = CounterRng::new(4);
        for _ in 0..200 {
            let mut pts = r.sample(&mut rng).unwrap();
            pts.extend(r.sample(&mut rng).unwrap());
            let a = locate_cell(&r, 2, &pts).unwrap();
            let b = locate_cell(&r, 2, &pts).unwrap();
            assert_eq!(a, b);
            assert_eq!(count_containing(&r, &labels, &pts), 1);
        }
    }

    #[test]
    fn scans_are_clean() {
        for (kind, k, n, m) in [(RegionKind::Nabla, 2, 0, 2), (RegionKind::LambdaTilde, 1, 1, 2)] {
            let r = RegionDescriptor::new(kind, k, n, unit()).unwrap();
            let scan = partition_scan(&r, m, 2000, 1).unwrap();
            assert_eq!(scan.violations, 0);
            assert_eq!(scan.locate_mismatches, 0);
        }
    }
}
