//! Points, cells and rectangular partitions of the parameter square.
//!
//! Cell `(i, j)` is the rectangle `(s_{i-1}, s_i] x (t_{j-1}, t_j]`; indices
//! are 1-based and index 0 denotes the axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible gap between consecutive knots.
pub const MIN_KNOT_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub s: f64,
    pub t: f64,
}

impl PlanePoint {
    pub const ORIGIN: PlanePoint = PlanePoint { s: 0.0, t: 0.0 };

    pub fn new(s: f64, t: f64) -> Self {
        Self { s, t }
    }

    /// `self ⪯ other` (or `self ≺ other` when `strict`).
    pub fn precedes(&self, other: &PlanePoint, strict: bool) -> bool {
        precedes(*self, *other, strict)
    }
}

/// Coordinatewise partial order: non-strict `a.s <= b.s && a.t <= b.t`,
/// strict `a.s < b.s && a.t < b.t`.
pub fn precedes(a: PlanePoint, b: PlanePoint, strict: bool) -> bool {
    if strict {
        a.s < b.s && a.t < b.t
    } else {
        a.s <= b.s && a.t <= b.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "z_{{{},{}}}", self.row, self.col)
    }
}

#[derive(Deserialize)]
struct RawGrid {
    s_knots: Vec<f64>,
    t_knots: Vec<f64>,
}

/// Strictly increasing knot sequences `0 = s_0 < ... < s_n` and `0 = t_0 < ... < t_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridPartition {
    s_knots: Vec<f64>,
    t_knots: Vec<f64>,
}

impl TryFrom<RawGrid> for GridPartition {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridPartition::new(raw.s_knots, raw.t_knots)
    }
}

fn check_knots(name: &str, knots: &[f64]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::InvalidGrid(format!("{name} needs at least two knots")));
    }
    if knots[0] != 0.0 {
        return Err(Error::InvalidGrid(format!("{name} must start at 0, got {}", knots[0])));
    }
    for (k, w) in knots.windows(2).enumerate() {
        if !w[1].is_finite() || w[1] - w[0] < MIN_KNOT_GAP {
            return Err(Error::InvalidGrid(format!(
                "{name} not strictly increasing at index {}: {} -> {}",
                k + 1,
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

impl GridPartition {
    pub fn new(s_knots: Vec<f64>, t_knots: Vec<f64>) -> Result<Self> {
        check_knots("s_knots", &s_knots)?;
        check_knots("t_knots", &t_knots)?;
        Ok(Self { s_knots, t_knots })
    }

    /// Grid whose knots are `0` followed by the given (increasing) times.
    pub fn from_times(s_times: &[f64], t_times: &[f64]) -> Result<Self> {
        let prepend = |v: &[f64]| std::iter::once(0.0).chain(v.iter().copied()).collect();
        Self::new(prepend(s_times), prepend(t_times))
    }

    /// `n x m` equally spaced cells over `[0, s_max] x [0, t_max]`.
    pub fn uniform(n: usize, m: usize, s_max: f64, t_max: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidGrid("grid needs at least one cell per axis".into()));
        }
        let knots = |k: usize, max: f64| (0..=k).map(|i| max * i as f64 / k as f64).collect();
        Self::new(knots(n, s_max), knots(m, t_max))
    }

    /// Knots `x_i = max * (ratio^i - 1) / (ratio^k - 1)`; cells grow by `ratio`.
    pub fn geometric(n: usize, m: usize, s_max: f64, t_max: f64, ratio: f64) -> Result<Self> {
        if (ratio - 1.0).abs() < 1e-12 {
            return Self::uniform(n, m, s_max, t_max);
        }
        let knots = |k: usize, max: f64| {
            let denom = ratio.powi(k as i32) - 1.0;
            (0..=k).map(|i| max * (ratio.powi(i as i32) - 1.0) / denom).collect()
        };
        Self::new(knots(n, s_max), knots(m, t_max))
    }

    pub fn rows(&self) -> usize {
        self.s_knots.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.t_knots.len() - 1
    }

    pub fn s_knots(&self) -> &[f64] {
        &self.s_knots
    }

    pub fn t_knots(&self) -> &[f64] {
        &self.t_knots
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_knots[i]
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_knots[j]
    }

    pub fn ds(&self, i: usize) -> f64 {
        self.s_knots[i] - self.s_knots[i - 1]
    }

    pub fn dt(&self, j: usize) -> f64 {
        self.t_knots[j] - self.t_knots[j - 1]
    }

    pub fn point(&self, i: usize, j: usize) -> PlanePoint {
        PlanePoint::new(self.s_knots[i], self.t_knots[j])
    }

    pub fn check_cell(&self, c: Cell) -> Result<()> {
        if c.row == 0 || c.col == 0 || c.row > self.rows() || c.col > self.cols() {
            return Err(Error::CellOutOfRange { row: c.row, col: c.col, rows: self.rows(), cols: self.cols() });
        }
        Ok(())
    }

    pub fn check_point(&self, i: usize, j: usize) -> Result<()> {
        if i > self.rows() || j > self.cols() {
            return Err(Error::IndexOutOfRange { i, j, rows: self.rows(), cols: self.cols() });
        }
        Ok(())
    }

    /// `(s_i - s_{i-1}) (t_j - t_{j-1})`.
    pub fn cell_area(&self, c: Cell) -> Result<f64> {
        self.check_cell(c)?;
        Ok(self.area(c.row, c.col))
    }

    /// Unchecked cell area for hot loops.
    #[inline]
    pub fn area(&self, i: usize, j: usize) -> f64 {
        (self.s_knots[i] - self.s_knots[i - 1]) * (self.t_knots[j] - self.t_knots[j - 1])
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let m = self.cols();
        (1..=self.rows()).flat_map(move |i| (1..=m).map(move |j| Cell::new(i, j)))
    }

    /// Largest knot spacing in either direction.
    pub fn mesh(&self) -> f64 {
        let gap = |k: &[f64]| k.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        gap(&self.s_knots).max(gap(&self.t_knots))
    }

    /// Keeps every `fs`-th s-knot and `ft`-th t-knot.
    pub fn coarsen(&self, fs: usize, ft: usize) -> Result<Self> {
        if fs == 0 || ft == 0 || !self.rows().is_multiple_of(fs) || !self.cols().is_multiple_of(ft) {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {}x{} grid by ({fs}, {ft})",
                self.rows(),
                self.cols()
            )));
        }
        let pick = |k: &[f64], f: usize| k.iter().step_by(f).copied().collect();
        Self::new(pick(&self.s_knots, fs), pick(&self.t_knots, ft))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn precedes_examples() {
        let p = PlanePoint::new;
        assert!(precedes(p(0.0, 0.0), p(1.0, 1.0), false));
        assert!(precedes(p(1.0, 2.0), p(3.0, 3.0), true));
        assert!(!precedes(p(1.0, 3.0), p(3.0, 2.0), true));
        assert!(precedes(p(0.4, 0.7), p(0.4, 0.7), false));
        assert!(!precedes(p(0.4, 0.7), p(0.4, 0.7), true));
    }

    #[test]
    fn cell_area_examples() {
        let unit = GridPartition::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(unit.cell_area(Cell::new(1, 1)).unwrap(), 1.0);

        let g = GridPartition::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.25]).unwrap();
        assert_eq!(g.cell_area(Cell::new(2, 1)).unwrap(), 0.125);
        assert!(matches!(g.cell_area(Cell::new(3, 1)), Err(Error::CellOutOfRange { .. })));
        assert!(g.cell_area(Cell::new(0, 1)).is_err());
    }

    #[test]
    fn degenerate_knots_rejected() {
        assert!(GridPartition::new(vec![0.0, 0.5, 0.5], vec![0.0, 1.0]).is_err());
        assert!(GridPartition::new(vec![0.0, 0.5, 0.5 + 1e-14], vec![0.0, 1.0]).is_err());
        assert!(GridPartition::new(vec![0.1, 0.5], vec![0.0, 1.0]).is_err());
        assert!(GridPartition::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let g = GridPartition::uniform(2, 3, 1.0, 2.0).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: GridPartition = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
        let bad = r#"{"s_knots":[0.0,1.0,0.5],"t_knots":[0.0,1.0]}"#;
        assert!(serde_json::from_str::<GridPartition>(bad).is_err());
    }

    #[test]
    fn coarsen_keeps_every_other_knot() {
        let g = GridPartition::uniform(4, 6, 1.0, 1.0).unwrap();
        let c = g.coarsen(2, 3).unwrap();
        assert_eq!(c.rows(), 2);
        assert_eq!(c.cols(), 2);
        assert_eq!(c.s_knots(), &[0.0, 0.5, 1.0]);
        assert!(g.coarsen(3, 1).is_err());
    }

    fn point() -> impl Strategy<Value = PlanePoint> {
        (0.0..1.0f64, 0.0..1.0f64).prop_map(|(s, t)| PlanePoint::new(s, t))
    }

    fn knots() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01..1.0f64, 1..8).prop_map(|gaps| {
            let mut acc = 0.0;
            std::iter::once(0.0)
                .chain(gaps.into_iter().map(|g| {
                    acc += g;
                    acc
                }))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn partial_order_laws(a in point(), b in point(), c in point()) {
            prop_assert!(precedes(a, a, false));
            if precedes(a, b, false) && precedes(b, a, false) {
                prop_assert_eq!(a, b);
            }
            if precedes(a, b, false) && precedes(b, c, false) {
                prop_assert!(precedes(a, c, false));
            }
            if precedes(a, b, true) {
                prop_assert!(precedes(a, b, false));
            }
        }

        #[test]
        fn areas_sum_to_rectangle(s in knots(), t in knots()) {
            let g = GridPartition::new(s, t).unwrap();
            let total: f64 = g.cells().map(|c| g.cell_area(c).unwrap()).sum();
            let expected = g.s(g.rows()) * g.t(g.cols());
            prop_assert!((total - expected).abs() <= 1e-12 * expected.max(1.0));
        }

        #[test]
        fn grid_chains_strictly_ordered(s in knots(), t in knots()) {
            let g = GridPartition::new(s, t).unwrap();
            for i in 0..=g.rows() {
                for k in (i + 1)..=g.rows() {
                    for j in 0..=g.cols() {
                        for l in (j + 1)..=g.cols() {
                            prop_assert!(precedes(g.point(i, j), g.point(k, l), true));
                        }
                    }
                }
            }
        }
    }
}
