//! Stable/unstable splitting of the fast linearization.
//!
//! The spectral projectors come from the matrix sign function,
//! `pi_s = (I - sign A) / 2` and `pi_u = (I + sign A) / 2`. These are the oblique
//! projectors along the invariant subspaces, so `pi_u v = 0` means that `v` lies
//! in the stable subspace.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so::ManifoldPoint;
use crate::system::SlowFastSystem;

pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSplit {
    pub a: DMatrix<f64>,
    /// Orthonormal columns spanning the stable subspace.
    pub basis_s: DMatrix<f64>,
    pub basis_u: DMatrix<f64>,
    pub pi_s: DMatrix<f64>,
    pub pi_u: DMatrix<f64>,
    /// Smallest decay rate `min |Re l|` over stable eigenvalues (infinite if none).
    pub lambda_s: f64,
    /// Smallest growth rate over unstable eigenvalues (infinite if none).
    pub lambda_u: f64,
}

impl SpectralSplit {
    pub fn n_stable(&self) -> usize {
        self.basis_s.ncols()
    }

    pub fn n_unstable(&self) -> usize {
        self.basis_u.ncols()
    }

    /// Rows mapping a vector to its coordinates along `[basis_s, basis_u]`;
    /// the first `n_stable` rows give the stable components.
    pub fn coordinate_rows(&self) -> DMatrix<f64> {
        let n = self.a.nrows();
        let mut w = DMatrix::zeros(n, n);
        w.view_mut((0, 0), (n, self.n_stable())).copy_from(&self.basis_s);
        w.view_mut((0, self.n_stable()), (n, self.n_unstable())).copy_from(&self.basis_u);
        w.try_inverse().expect("complementary invariant subspaces span the space")
    }

    pub fn stable_rows(&self) -> DMatrix<f64> {
        self.coordinate_rows().rows(0, self.n_stable()).into_owned()
    }

    pub fn unstable_rows(&self) -> DMatrix<f64> {
        self.coordinate_rows().rows(self.n_stable(), self.n_unstable()).into_owned()
    }
}

/// Fast linearization `A = -d_eta dX/dy + dY/dy` at a manifold point.
pub fn fast_linearization(sys: &dyn SlowFastSystem, mp: &ManifoldPoint) -> DMatrix<f64> {
    -&mp.d_eta * sys.dslow_dy(&mp.x, &mp.eta) + sys.dfast_dy(&mp.x, &mp.eta)
}

/// Splits `a` into stable and unstable parts; fails if an eigenvalue has `|Re l| < floor`.
pub fn split_spectrum(a: &DMatrix<f64>, floor: f64) -> Result<SpectralSplit> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("split_spectrum needs a square matrix".into()));
    }
    let eig = a.clone().complex_eigenvalues();
    let mut lambda_s = f64::INFINITY;
    let mut lambda_u = f64::INFINITY;
    let mut n_s = 0;
    for l in eig.iter() {
        if l.re.abs() < floor {
            return Err(Error::NonHyperbolic { real_part: l.re });
        }
        if l.re < 0.0 {
            n_s += 1;
            lambda_s = lambda_s.min(-l.re);
        } else {
            lambda_u = lambda_u.min(l.re);
        }
    }
    let sign = matrix_sign(a)?;
    let id = DMatrix::<f64>::identity(n, n);
    let pi_s = (&id - &sign) * 0.5;
    let pi_u = (&id + &sign) * 0.5;
    let basis_s = range_basis(&pi_s, n_s);
    let basis_u = range_basis(&pi_u, n - n_s);
    Ok(SpectralSplit { a: a.clone(), basis_s, basis_u, pi_s, pi_u, lambda_s, lambda_u })
}

/// Newton iteration `S <- (c S + (c S)^{-1}) / 2` with determinant scaling.
fn matrix_sign(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut s = a.clone();
    for it in 0..100 {
        let inv = s.clone().try_inverse().ok_or(Error::NonHyperbolic { real_part: 0.0 })?;
        let c = if it < 10 { (s.determinant().abs()).powf(-1.0 / n as f64) } else { 1.0 };
        let c = if c.is_finite() && c > 0.0 { c } else { 1.0 };
        let next = (&s * c + &inv / c) * 0.5;
        let change = (&next - &s).norm();
        s = next;
        if change <= 1e-14 * s.norm() {
            break;
        }
    }
    // one unscaled polish step
    let inv = s.clone().try_inverse().ok_or(Error::NonHyperbolic { real_part: 0.0 })?;
    Ok((&s + inv) * 0.5)
}

fn range_basis(p: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let n = p.nrows();
    if rank == 0 {
        return DMatrix::zeros(n, 0);
    }
    // column-pivoted QR puts the dominant columns first; nalgebra's 2x2 SVD
    // returned wrong singular vectors for some rank-one projectors
    let q = p.clone().col_piv_qr().q();
    q.columns(0, rank).into_owned()
}

/// `rate^{-1} log(r / tol)`: fast time for a deviation `r` decaying at `rate` to reach `tol`.
pub fn boundary_layer_time(rate: f64, r: f64, tol: f64) -> Result<f64> {
    if tol > r || !(tol > 0.0) {
        return Err(Error::InvalidTolerance { tol, r });
    }
    if !rate.is_finite() {
        return Ok(0.0);
    }
    Ok((r / tol).ln() / rate)
}

/// Decay check helper: `|exp(A t) v|` by scaling and squaring with a Taylor core.
pub fn expm_apply(a: &DMatrix<f64>, t: f64, v: &DVector<f64>) -> DVector<f64> {
    let m = a * t;
    let norm = m.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = &m / 2f64.powi(squarings);
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut e = term.clone();
    for k in 1..20 {
        term = &term * &scaled / k as f64;
        e += &term;
    }
    for _ in 0..squarings {
        e = &e * &e;
    }
    e * v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn layer_times() {
        assert_abs_diff_eq!(boundary_layer_time(1.0, 0.1, 1e-10).unwrap(), 1e9f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(boundary_layer_time(2.0, 1.0, 1e-8).unwrap(), 9.2103, epsilon = 1e-4);
        assert_eq!(boundary_layer_time(1.0, 0.5, 0.5).unwrap(), 0.0);
        assert!(matches!(boundary_layer_time(1.0, 0.1, 0.2), Err(Error::InvalidTolerance { .. })));
    }

    #[test]
    fn diagonal_saddle() {
        let s = split_spectrum(&dmatrix![-1.0, 0.0; 0.0, 2.0], DEFAULT_FLOOR).unwrap();
        assert_eq!((s.n_stable(), s.n_unstable()), (1, 1));
        assert_abs_diff_eq!(s.pi_s, dmatrix![1.0, 0.0; 0.0, 0.0], epsilon = 1e-14);
    }

    #[test]
    fn matrix_exponential() {
        let v = expm_apply(&dmatrix![-1.0, 0.0; 0.0, 0.5], 2.0, &dvector![1.0, 1.0]);
        assert_abs_diff_eq!(v, dvector![(-2f64).exp(), 1f64.exp()], epsilon = 1e-12);
    }
}
