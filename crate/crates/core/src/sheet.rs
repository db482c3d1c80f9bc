//! Brownian sheet samples stored as independent rectangle increments.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{Cell, GridPartition};
use crate::rng::CounterRng;

/// One realization of a `dim`-dimensional Brownian sheet on a grid.
///
/// `increments` holds `Z^{(l)}_{i,j}` in row-major cell order with the
/// component index fastest. Cumulative values `W(s_i, t_j)` are tabulated
/// once on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetSample {
    grid: GridPartition,
    dim: usize,
    increments: Vec<f64>,
    values: Vec<f64>,
    seed: u64,
}

impl SheetSample {
    /// Draws `Z^{(l)}_{i,j} = sqrt(area) * N(0,1)`, each from its own stream
    /// keyed by the cell's linear index.
    pub fn sample(grid: &GridPartition, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("sheet dimension must be at least 1".into()));
        }
        let (n, m) = (grid.rows(), grid.cols());
        let mut increments = Vec::with_capacity(n * m * dim);
        for i in 1..=n {
            for j in 1..=m {
                let sd = grid.area(i, j).sqrt();
                for l in 0..dim {
                    let idx = (((i - 1) * m + (j - 1)) * dim + l) as u64;
                    increments.push(sd * CounterRng::child(seed, idx).normal());
                }
            }
        }
        Self::from_increments(grid.clone(), dim, increments, seed)
    }

    pub fn from_increments(grid: GridPartition, dim: usize, increments: Vec<f64>, seed: u64) -> Result<Self> {
        let expected = grid.rows() * grid.cols() * dim;
        if dim == 0 || increments.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: increments.len() });
        }
        let values = cumulative(&grid, dim, &increments);
        Ok(Self { grid, dim, increments, values, seed })
    }

    pub fn grid(&self) -> &GridPartition {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    #[inline]
    fn cell_offset(&self, i: usize, j: usize) -> usize {
        ((i - 1) * self.grid.cols() + (j - 1)) * self.dim
    }

    #[inline]
    fn point_offset(&self, i: usize, j: usize) -> usize {
        (i * (self.grid.cols() + 1) + j) * self.dim
    }

    /// `Z_{i,j}` as a slice of length `dim`.
    pub fn increment(&self, c: Cell) -> Result<&[f64]> {
        self.grid.check_cell(c)?;
        Ok(self.increment_unchecked(c.row, c.col))
    }

    #[inline]
    pub fn increment_unchecked(&self, i: usize, j: usize) -> &[f64] {
        let o = self.cell_offset(i, j);
        &self.increments[o..o + self.dim]
    }

    /// `W(s_i, t_j) = Σ_{k≤i, l≤j} Z_{k,l}`; zero on the axes.
    pub fn value_at(&self, i: usize, j: usize) -> Result<&[f64]> {
        self.grid.check_point(i, j)?;
        Ok(self.value_unchecked(i, j))
    }

    #[inline]
    pub fn value_unchecked(&self, i: usize, j: usize) -> &[f64] {
        let o = self.point_offset(i, j);
        &self.values[o..o + self.dim]
    }

    /// Rectangle increment `W(s_i,t_j) - W(s_{i-1},t_j) - W(s_i,t_{j-1}) + W(s_{i-1},t_{j-1})`
    /// rebuilt from the cumulative table.
    pub fn rectangle_increment(&self, c: Cell) -> Result<Vec<f64>> {
        self.grid.check_cell(c)?;
        let (i, j) = (c.row, c.col);
        let (a, b) = (self.value_unchecked(i, j), self.value_unchecked(i - 1, j));
        let (e, d) = (self.value_unchecked(i, j - 1), self.value_unchecked(i - 1, j - 1));
        Ok((0..self.dim).map(|l| a[l] - b[l] - e[l] + d[l]).collect())
    }

    /// Sample with increments `Z_{i,j} + eps * hdot(i,j) * area(i,j)`.
    /// `hdot` uses the same layout as the increments.
    pub fn cameron_martin_shift(&self, hdot: &[f64], eps: f64) -> Result<Self> {
        if hdot.len() != self.increments.len() {
            return Err(Error::DimensionMismatch { expected: self.increments.len(), got: hdot.len() });
        }
        let mut shifted = self.increments.clone();
        for c in self.grid.cells() {
            let area = self.grid.area(c.row, c.col);
            let o = self.cell_offset(c.row, c.col);
            for l in 0..self.dim {
                shifted[o + l] += eps * hdot[o + l] * area;
            }
        }
        Self::from_increments(self.grid.clone(), self.dim, shifted, self.seed)
    }

    /// Sums blocks of `fs x ft` increments onto the coarsened grid.
    pub fn aggregate(&self, fs: usize, ft: usize) -> Result<Self> {
        let coarse = self.grid.coarsen(fs, ft)?;
        let mut inc = vec![0.0; coarse.rows() * coarse.cols() * self.dim];
        for c in self.grid.cells() {
            let (ci, cj) = ((c.row - 1) / fs, (c.col - 1) / ft);
            let o = (ci * coarse.cols() + cj) * self.dim;
            for (l, z) in self.increment_unchecked(c.row, c.col).iter().enumerate() {
                inc[o + l] += z;
            }
        }
        Self::from_increments(coarse, self.dim, inc, self.seed)
    }

    /// CSV with header `i,j,component,z`; components are 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,component,z")?;
        for c in self.grid.cells() {
            for (l, z) in self.increment_unchecked(c.row, c.col).iter().enumerate() {
                writeln!(out, "{},{},{},{:.16e}", c.row, c.col, l + 1, z)?;
            }
        }
        Ok(())
    }
}

fn cumulative(grid: &GridPartition, dim: usize, inc: &[f64]) -> Vec<f64> {
    let (n, m) = (grid.rows(), grid.cols());
    let stride = (m + 1) * dim;
    let mut w = vec![0.0; (n + 1) * stride];
    for i in 1..=n {
        for j in 1..=m {
            let z = ((i - 1) * m + (j - 1)) * dim;
            for l in 0..dim {
                let here = i * stride + j * dim + l;
                w[here] = w[here - stride] + w[here - dim] - w[here - stride - dim] + inc[z + l];
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bitwise_identical() {
        let g = GridPartition::uniform(5, 7, 1.0, 1.0).unwrap();
        let a = SheetSample::sample(&g, 2, 42).unwrap();
        let b = SheetSample::sample(&g, 2, 42).unwrap();
        assert_eq!(a, b);
        let c = SheetSample::sample(&g, 2, 43).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn axes_vanish_and_corners_rebuild_increments() {
        let g = GridPartition::geometric(4, 3, 1.0, 2.0, 1.3).unwrap();
        let w = SheetSample::sample(&g, 3, 9).unwrap();
        for j in 0..=3 {
            assert!(w.value_at(0, j).unwrap().iter().all(|&x| x == 0.0));
        }
        for i in 0..=4 {
            assert!(w.value_at(i, 0).unwrap().iter().all(|&x| x == 0.0));
        }
        assert_eq!(w.value_at(1, 1).unwrap(), w.increment(Cell::new(1, 1)).unwrap());
        for c in g.cells() {
            let rebuilt = w.rectangle_increment(c).unwrap();
            let stored = w.increment(c).unwrap();
            for l in 0..3 {
                assert!((rebuilt[l] - stored[l]).abs() <= 1e-14);
            }
        }
        assert!(w.value_at(5, 0).is_err());
    }

    #[test]
    fn increment_variance_and_independence() {
        let g = GridPartition::new(vec![0.0, 1.0, 1.5], vec![0.0, 1.0]).unwrap();
        let n = 100_000;
        let (mut s11, mut s21, mut cross) = (0.0, 0.0, 0.0);
        for rep in 0..n {
            let w = SheetSample::sample(&g, 1, crate::rng::split(5, rep)).unwrap();
            let a = w.increment_unchecked(1, 1)[0];
            let b = w.increment_unchecked(2, 1)[0];
            s11 += a * a;
            s21 += b * b;
            cross += a * b;
        }
        let nf = n as f64;
        assert!((s11 / nf - 1.0).abs() <= 3.0 * (2.0 / nf).sqrt());
        assert!((s21 / nf - 0.5).abs() <= 3.0 * 0.5 * (2.0 / nf).sqrt());
        let corr = cross / nf / (0.5f64).sqrt();
        assert!(corr.abs() <= 3.0 / nf.sqrt());
    }

    #[test]
    fn shift_moves_values_by_summed_drift() {
        let g = GridPartition::uniform(3, 4, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 1, 1).unwrap();
        let hdot: Vec<f64> = (0..12).map(|k| (k as f64 * 0.37).sin()).collect();
        assert_eq!(w.cameron_martin_shift(&hdot, 0.0).unwrap(), w);
        assert_eq!(w.cameron_martin_shift(&[0.0; 12], 0.3).unwrap(), w);

        let eps = 0.25;
        let shifted = w.cameron_martin_shift(&hdot, eps).unwrap();
        for i in 0..=3 {
            for j in 0..=4 {
                let mut direct = 0.0;
                for k in 1..=i {
                    for l in 1..=j {
                        direct += hdot[(k - 1) * 4 + (l - 1)] * g.area(k, l);
                    }
                }
                let diff = shifted.value_unchecked(i, j)[0] - w.value_unchecked(i, j)[0];
                assert!((diff - eps * direct).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn aggregate_matches_coarse_values() {
        let g = GridPartition::uniform(4, 6, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 2, 77).unwrap();
        let c = w.aggregate(2, 3).unwrap();
        for i in 0..=2 {
            for j in 0..=2 {
                let fine = w.value_unchecked(2 * i, 3 * j);
                let coarse = c.value_unchecked(i, j);
                for l in 0..2 {
                    assert!((fine[l] - coarse[l]).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn csv_round_trips() {
        let g = GridPartition::uniform(2, 2, 1.0, 1.0).unwrap();
        let w = SheetSample::sample(&g, 1, 3).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i,j,component,z"));
        let parsed: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(parsed, w.increments());
    }
}
