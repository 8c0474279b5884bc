//! The local `3^{n_s}`-point grid and second-order difference operators on it.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Derivative weights of the quadratic through offsets (-h, 0, +h), evaluated at
/// each of the three offsets, in units of `1/(2h)`.
const LAGRANGE_D: [[f64; 3]; 3] = [[-3.0, 4.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -4.0, 3.0]];

/// `3^{n_s}` points `center + h * e` with `e` in `{-1, 0, 1}^{n_s}`, enumerated
/// lexicographically with the first axis varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGrid {
    center: DVector<f64>,
    h: f64,
    digits: Vec<Vec<u8>>,
}

impl LocalGrid {
    /// Builds the grid; `h` is clamped below at `1e3 * machine eps * (1 + |center|)`.
    pub fn new(center: DVector<f64>, h: f64) -> Self {
        let h = h.max(min_spacing(&center));
        let ns = center.len();
        let count = 3usize.pow(ns as u32);
        let digits = (0..count)
            .map(|mut k| {
                let mut d = vec![0u8; ns];
                for i in (0..ns).rev() {
                    d[i] = (k % 3) as u8;
                    k /= 3;
                }
                d
            })
            .collect();
        Self { center, h, digits }
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn center_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Offset of point `k` in units of `h`, each component in `{-1, 0, 1}`.
    pub fn offset(&self, k: usize) -> Vec<i32> {
        self.digits[k].iter().map(|&d| d as i32 - 1).collect()
    }

    pub fn point(&self, k: usize) -> DVector<f64> {
        let mut p = self.center.clone();
        for (i, &d) in self.digits[k].iter().enumerate() {
            p[i] += self.h * (d as f64 - 1.0);
        }
        p
    }

    pub fn points(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Index of the point equal to `k` except that axis `axis` has digit `digit`.
    pub fn with_digit(&self, k: usize, axis: usize, digit: u8) -> usize {
        let ns = self.dim();
        let stride = 3usize.pow((ns - 1 - axis) as u32);
        let cur = self.digits[k][axis] as usize;
        k - cur * stride + digit as usize * stride
    }

    /// The three (index, weight) pairs of the Lagrange derivative along `axis` at point `k`.
    pub fn stencil(&self, k: usize, axis: usize) -> [(usize, f64); 3] {
        let d = self.digits[k][axis] as usize;
        let s = 1.0 / (2.0 * self.h);
        [0u8, 1, 2].map(|j| (self.with_digit(k, axis, j), LAGRANGE_D[d][j as usize] * s))
    }

    /// Dense `len x len` matrix of the Lagrange derivative along `axis`.
    pub fn derivative_matrix(&self, axis: usize) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            for (j, w) in self.stencil(k, axis) {
                m[(k, j)] += w;
            }
        }
        m
    }
}

/// Lower bound on `h` below which differences are dominated by cancellation.
pub fn min_spacing(center: &DVector<f64>) -> f64 {
    1e3 * f64::EPSILON * (1.0 + center.norm())
}

/// `h = min(1e-2, 0.1 dtau^5 / eps^2)`: the grid error `eps^2 h^2` matched to the
/// local error of a fourth-order step.
pub fn choose_h(dtau: f64, epsilon: f64) -> f64 {
    (0.1 * dtau.abs().powi(5) / (epsilon * epsilon)).min(1e-2)
}

/// Central difference along `axis` at point `at`, which needs both neighbours
/// along that axis on the grid.
pub fn central_diff_axis(
    grid: &LocalGrid,
    values: &[DVector<f64>],
    at: usize,
    axis: usize,
) -> Result<DVector<f64>> {
    if values.len() != grid.len() || grid.offset(at)[axis] != 0 {
        return Err(Error::MissingNeighbor { point: at, axis });
    }
    let plus = grid.with_digit(at, axis, 2);
    let minus = grid.with_digit(at, axis, 0);
    Ok((&values[plus] - &values[minus]) / (2.0 * grid.h()))
}

/// Central-difference Jacobian at the grid center: column `i` is
/// `(f(c + h e_i) - f(c - h e_i)) / 2h`.
pub fn central_diff(grid: &LocalGrid, values: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let c = grid.center_index();
    let m = values.get(c).map(|v| v.len()).ok_or(Error::MissingNeighbor { point: c, axis: 0 })?;
    let mut out = DMatrix::zeros(m, grid.dim());
    for i in 0..grid.dim() {
        out.set_column(i, &central_diff_axis(grid, values, c, i)?);
    }
    Ok(out)
}

/// Lagrange derivative along `axis` at every grid point, for any linear-space sample type.
pub fn lagrange_diff_axis<T>(grid: &LocalGrid, values: &[T], axis: usize) -> Vec<T>
where
    T: Clone + Add<T, Output = T> + Mul<f64, Output = T>,
{
    (0..grid.len())
        .map(|k| {
            let [(i0, w0), (i1, w1), (i2, w2)] = grid.stencil(k, axis);
            values[i0].clone() * w0 + values[i1].clone() * w1 + values[i2].clone() * w2
        })
        .collect()
}

/// Lagrange Jacobian of a vector-valued sample at every grid point (`m x n_s` each).
pub fn lagrange_diff(grid: &LocalGrid, values: &[DVector<f64>]) -> Vec<DMatrix<f64>> {
    let m = values.first().map_or(0, |v| v.len());
    let mut out = vec![DMatrix::zeros(m, grid.dim()); grid.len()];
    for axis in 0..grid.dim() {
        for (k, col) in lagrange_diff_axis(grid, values, axis).into_iter().enumerate() {
            out[k].set_column(axis, &col);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn diff_1d(f: impl Fn(f64) -> f64, c: f64, h: f64) -> f64 {
        let grid = LocalGrid::new(dvector![c], h);
        let values: Vec<_> = grid.points().iter().map(|p| dvector![f(p[0])]).collect();
        central_diff(&grid, &values).unwrap()[(0, 0)]
    }

    #[test]
    fn central_examples() {
        assert_abs_diff_eq!(diff_1d(|x| x * x, 1.0, 0.1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(diff_1d(f64::cos, 0.0, 0.3), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(diff_1d(|x| x * x * x, 0.0, 0.1), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn grid_has_three_to_the_n_points() {
        let grid = LocalGrid::new(dvector![0.0, 1.0, 2.0], 0.5);
        assert_eq!(grid.len(), 27);
        assert_eq!(grid.point(grid.center_index()), dvector![0.0, 1.0, 2.0]);
    }

    #[test]
    fn edge_points_have_no_central_difference() {
        let grid = LocalGrid::new(dvector![0.0], 0.1);
        let values = grid.points();
        assert!(matches!(central_diff_axis(&grid, &values, 0, 0), Err(Error::MissingNeighbor { .. })));
    }

    #[test]
    fn choose_h_examples() {
        assert_eq!(choose_h(0.5, 1e-3), 1e-2);
        assert_abs_diff_eq!(choose_h(0.01, 1.0), 1e-11, epsilon = 1e-24);
        assert_eq!(choose_h(0.1, 1e-2), 1e-2);
    }
}
