//! Banded LU factorization with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` upper diagonals
//! hold the fill-in produced by row interchanges.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (off >= 0 && (off as usize) < self.width).then(|| i * self.width + off as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics if the entry lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let lo = i.saturating_sub(self.kl);
        assert!(j >= lo && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let s = self.slot(i, j).unwrap();
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.kl + self.ku).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    /// Factors in place.
    pub fn lu(mut self) -> Result<BandLu> {
        let n = self.n;
        let mut perm = vec![0usize; n];
        let mut mult = vec![0.0; n * self.kl.max(1)];
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0 && best.is_finite()) {
                return Err(Error::SingularJacobian);
            }
            perm[k] = p;
            let cmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=cmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let piv = self.get(k, k);
            for (r, i) in (k + 1..=last).enumerate() {
                let l = self.get(i, k) / piv;
                mult[k * self.kl.max(1) + r] = l;
                if l != 0.0 {
                    self.set(i, k, 0.0);
                    for j in k + 1..=cmax {
                        let v = self.get(i, j) - l * self.get(k, j);
                        self.set(i, j, v);
                    }
                }
            }
        }
        Ok(BandLu { u: self, perm, mult })
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        match self.slot(i, j) {
            Some(s) => self.data[s] = v,
            None => debug_assert!(v == 0.0, "fill outside storage at ({i}, {j})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    u: BandMatrix,
    perm: Vec<usize>,
    mult: Vec<f64>,
}

impl BandLu {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.u.n;
        let kl = self.u.kl;
        let stride = kl.max(1);
        let mut x = b.clone();
        for k in 0..n {
            let p = self.perm[k];
            if p != k {
                x.swap_rows(k, p);
            }
            let last = (k + kl).min(n - 1);
            for (r, i) in (k + 1..=last).enumerate() {
                x[i] -= self.mult[k * stride + r] * x[k];
            }
        }
        let reach = self.u.kl + self.u.ku;
        for k in (0..n).rev() {
            let cmax = (k + reach).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=cmax {
                s -= self.u.get(k, j) * x[j];
            }
            x[k] = s / self.u.get(k, k);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matches_dense_solve() {
        let (n, kl, ku) = (9, 2, 1);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal so partial pivoting has to swap rows
                let v = if i == j { 0.1 } else { 1.0 + ((3 * i + 5 * j) % 7) as f64 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b = DVector::from_fn(n, |i, _| (i as f64).sin());
        assert!((band.mul_vec(&b) - &dense * &b).amax() < 1e-14);
        let x = band.lu().unwrap().solve(&b);
        let want = dense.lu().solve(&b).unwrap();
        assert!((x - want).amax() < 1e-12);
    }
}
