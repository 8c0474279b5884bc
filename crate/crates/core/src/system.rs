//! Slow-fast systems `x' = X^eps(x, y)`, `y' = Y(x, y)` written in the fast time `t`.
//!
//! The slow field is stored as `X^eps` itself. Nothing assumes it factors as
//! `eps * X`, so systems whose slow and fast variables are only approximately
//! separated (the Lindemann chart) fit the same interface.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A slow-fast vector field together with its four Jacobian blocks.
///
/// All fields are expressed in the fast time `t`; the slow time is `tau = eps * t`.
pub trait SlowFastSystem: Send + Sync {
    fn n_slow(&self) -> usize;
    fn n_fast(&self) -> usize;
    fn epsilon(&self) -> f64;

    /// `X^eps(x, y)`.
    fn slow_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;
    /// `Y(x, y)`.
    fn fast_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;

    fn dslow_dx(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64>;
    fn dslow_dy(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64>;
    fn dfast_dx(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64>;
    fn dfast_dy(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64>;

    /// Closed-form critical manifold, when one is known.
    fn eta0_hint(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Full field `(X^eps, Y)` on the stacked state `z = (x, y)`.
    fn full_field(&self, z: &DVector<f64>) -> DVector<f64> {
        let (x, y) = split_state(z, self.n_slow());
        stack(&self.slow_field(&x, &y), &self.fast_field(&x, &y))
    }

    /// Jacobian of [`SlowFastSystem::full_field`].
    fn full_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let ns = self.n_slow();
        let nf = self.n_fast();
        let (x, y) = split_state(z, ns);
        let mut j = DMatrix::zeros(ns + nf, ns + nf);
        j.view_mut((0, 0), (ns, ns)).copy_from(&self.dslow_dx(&x, &y));
        j.view_mut((0, ns), (ns, nf)).copy_from(&self.dslow_dy(&x, &y));
        j.view_mut((ns, 0), (nf, ns)).copy_from(&self.dfast_dx(&x, &y));
        j.view_mut((ns, ns), (nf, nf)).copy_from(&self.dfast_dy(&x, &y));
        j
    }
}

/// A point `z = (x, y)` of the full phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl State {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.x, &self.y)
    }

    pub fn from_stacked(z: &DVector<f64>, n_slow: usize) -> Self {
        let (x, y) = split_state(z, n_slow);
        Self { x, y }
    }
}

pub fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

pub fn split_state(z: &DVector<f64>, n_slow: usize) -> (DVector<f64>, DVector<f64>) {
    (
        z.rows(0, n_slow).into_owned(),
        z.rows(n_slow, z.len() - n_slow).into_owned(),
    )
}

const ROOT_MAX_ITER: usize = 50;

/// Default residual tolerance for the critical-manifold root solve.
pub const ROOT_TOL: f64 = 1e-12;

/// Solves `Y(x, y) = 0` for `y` near `guess` (damped Newton, halving on increase).
///
/// When the system provides a closed form it is used directly, with a Newton
/// polish only if its residual is above `tol`.
pub fn critical_manifold(
    sys: &dyn SlowFastSystem,
    x: &DVector<f64>,
    guess: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let mut y = sys.eta0_hint(x).unwrap_or_else(|| guess.clone());
    let mut f = sys.fast_field(x, &y);
    let mut norm = f.norm();
    for it in 0..ROOT_MAX_ITER {
        if norm <= tol {
            return Ok(y);
        }
        let step = solve_fast(&sys.dfast_dy(x, &y), &f)?;
        let mut alpha = 1.0;
        loop {
            let trial = &y - alpha * &step;
            let ft = sys.fast_field(x, &trial);
            let nt = ft.norm();
            if nt < norm || alpha < 1e-6 {
                y = trial;
                f = ft;
                norm = nt;
                break;
            }
            alpha *= 0.5;
        }
        // rounding floor: accept when the Newton step is below resolution
        if alpha == 1.0 && step.norm() <= 4.0 * f64::EPSILON * (1.0 + y.norm()) && norm <= 1e3 * tol {
            return Ok(y);
        }
        if it + 1 == ROOT_MAX_ITER {
            break;
        }
    }
    if norm <= tol {
        Ok(y)
    } else {
        Err(Error::NonConvergence { iterations: ROOT_MAX_ITER, residual: norm })
    }
}

/// `d eta0 / dx = -(dY/dy)^{-1} dY/dx` at a point of the critical manifold.
pub fn d_eta0(sys: &dyn SlowFastSystem, x: &DVector<f64>, eta0: &DVector<f64>) -> Result<DMatrix<f64>> {
    let yy = sys.dfast_dy(x, eta0);
    let yx = sys.dfast_dx(x, eta0);
    let lu = yy.lu();
    if is_singular(&lu.u()) {
        return Err(Error::SingularJacobian);
    }
    lu.solve(&yx).map(|m| -m).ok_or(Error::SingularJacobian)
}

fn solve_fast(jac: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = jac.clone().lu();
    if is_singular(&lu.u()) {
        return Err(Error::SingularJacobian);
    }
    lu.solve(rhs).ok_or(Error::SingularJacobian)
}

/// Relative pivot test on an upper-triangular factor.
pub(crate) fn is_singular(u: &DMatrix<f64>) -> bool {
    let n = u.nrows().min(u.ncols());
    if n == 0 {
        return false;
    }
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    max == 0.0 || !(min > 1e-14 * max)
}

/// Largest relative discrepancy per Jacobian block against central differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobianReport {
    pub dslow_dx: f64,
    pub dslow_dy: f64,
    pub dfast_dx: f64,
    pub dfast_dy: f64,
}

impl JacobianReport {
    pub fn worst(&self) -> f64 {
        self.dslow_dx.max(self.dslow_dy).max(self.dfast_dx).max(self.dfast_dy)
    }
}

/// Compares the analytic Jacobian blocks with central differences of step `step`.
pub fn validate_jacobians(sys: &dyn SlowFastSystem, probes: &[State], step: f64) -> JacobianReport {
    let mut rep = JacobianReport { dslow_dx: 0.0, dslow_dy: 0.0, dfast_dx: 0.0, dfast_dy: 0.0 };
    for p in probes {
        let fd = |f: &dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>, wrt_x: bool| {
            let n = if wrt_x { p.x.len() } else { p.y.len() };
            let m = f(&p.x, &p.y).len();
            let mut j = DMatrix::zeros(m, n);
            for k in 0..n {
                let (mut xp, mut yp) = (p.x.clone(), p.y.clone());
                let (mut xm, mut ym) = (p.x.clone(), p.y.clone());
                if wrt_x {
                    xp[k] += step;
                    xm[k] -= step;
                } else {
                    yp[k] += step;
                    ym[k] -= step;
                }
                let col = (f(&xp, &yp) - f(&xm, &ym)) / (2.0 * step);
                j.set_column(k, &col);
            }
            j
        };
        let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).amax() / (1.0 + b.amax());
        let slow = |x: &DVector<f64>, y: &DVector<f64>| sys.slow_field(x, y);
        let fast = |x: &DVector<f64>, y: &DVector<f64>| sys.fast_field(x, y);
        rep.dslow_dx = rep.dslow_dx.max(rel(&fd(&slow, true), &sys.dslow_dx(&p.x, &p.y)));
        rep.dslow_dy = rep.dslow_dy.max(rel(&fd(&slow, false), &sys.dslow_dy(&p.x, &p.y)));
        rep.dfast_dx = rep.dfast_dx.max(rel(&fd(&fast, true), &sys.dfast_dx(&p.x, &p.y)));
        rep.dfast_dy = rep.dfast_dy.max(rel(&fd(&fast, false), &sys.dfast_dy(&p.x, &p.y)));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    use crate::models::{LindemannCanonical, LinearBvp, ReciprocalInhibition, Toy};

    #[test]
    fn critical_manifold_examples() {
        let lin = critical_manifold(&LinearBvp::new(0.1), &dvector![0.4], &dvector![0.0], ROOT_TOL).unwrap();
        assert_abs_diff_eq!(lin[0], 1.0, epsilon = 1e-12);
        let toy = critical_manifold(&Toy::new(1e-3), &dvector![0.0, 0.0], &dvector![0.0, 0.0], ROOT_TOL).unwrap();
        assert_abs_diff_eq!(toy, dvector![1.0, 0.0], epsilon = 1e-12);
        let ri = ReciprocalInhibition::new(1e-3);
        let q = dvector![-0.51723351869, -0.73434299772];
        let v = critical_manifold(&ri, &q, &dvector![-0.3, 1.7], ROOT_TOL).unwrap();
        assert!(ri.fast_field(&q, &v).norm() <= ROOT_TOL);
        // eta0 sits O(eps) away from the listed point on the slow manifold
        assert_abs_diff_eq!(v, dvector![-0.2789, 1.7109], epsilon = 5e-3);
    }

    #[test]
    fn critical_manifold_derivatives() {
        let toy = Toy::new(1e-3);
        let x = dvector![0.3, -0.4];
        let eta0 = critical_manifold(&toy, &x, &dvector![0.0, 0.0], ROOT_TOL).unwrap();
        let want = dmatrix![0.0, -(-0.4f64).sin(); 0.3f64.cos(), 0.0];
        assert_abs_diff_eq!(d_eta0(&toy, &x, &eta0).unwrap(), want, epsilon = 1e-12);
        let lin = LinearBvp::new(0.1);
        assert_eq!(d_eta0(&lin, &dvector![0.2], &dvector![1.0]).unwrap(), dmatrix![0.0]);
        let wz = LindemannCanonical::new(0.1);
        let z = critical_manifold(&wz, &dvector![1.0], &dvector![0.9], ROOT_TOL).unwrap();
        assert_abs_diff_eq!(d_eta0(&wz, &dvector![1.0], &z).unwrap()[(0, 0)], 1.0, epsilon = 0.2);
    }

    #[test]
    fn d_eta0_matches_differences_of_the_root() {
        let ri = ReciprocalInhibition::new(1e-3);
        let x = dvector![-0.51723351869, -0.73434299772];
        let root = |x: &DVector<f64>| critical_manifold(&ri, x, &dvector![-0.28, 1.71], 1e-14).unwrap();
        let d = d_eta0(&ri, &x, &root(&x)).unwrap();
        let step = 1e-5;
        for k in 0..2 {
            let mut e = DVector::zeros(2);
            e[k] = step;
            let fd = (root(&(&x + &e)) - root(&(&x - &e))) / (2.0 * step);
            assert!((fd - d.column(k)).amax() < 1e-7);
        }
    }

    #[test]
    fn stacking_round_trips() {
        let s = State::new(dvector![1.0, 2.0], dvector![3.0]);
        assert_eq!(State::from_stacked(&s.stacked(), 2), s);
    }
}
