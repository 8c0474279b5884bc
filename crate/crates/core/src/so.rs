//! Discretized straightening-out (SO) iteration for the slow manifold `y = eta(x)`.
//!
//! The invariance equation `-d eta(x) X^eps(x, eta) + Y(x, eta) = 0` is solved on a
//! [`LocalGrid`] with the derivative replaced by the Lagrange difference operator.
//! Each step applies one fixed factorization: the grid lift of
//! `A0 = -d eta0 dX/dy + dY/dy` (frozen at the center) together with the
//! transport term `-delta(.) X^eps` frozen at the center. Freezing only changes the
//! convergence path, never the fixed point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::differencing::{lagrange_diff, LocalGrid};
use crate::error::{Error, Result};
use crate::system::{critical_manifold, d_eta0, is_singular, SlowFastSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoConfig {
    /// Stop once the center residual is below this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Split off `d eta0` analytically (true) or difference `eta` itself (false).
    pub use_eta0_derivative: bool,
    /// Declare stagnation when the residual ratio exceeds this twice in a row.
    pub stagnation_factor: f64,
    /// Residual tolerance of the critical-manifold root solves.
    pub root_tol: f64,
    /// Stagnation at or below this level is rounding noise and is accepted as converged.
    pub noise_floor: f64,
}

impl Default for SoConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100, use_eta0_derivative: true, stagnation_factor: 0.9, root_tol: 1e-13, noise_floor: 1e-10 }
    }
}

impl SoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.stagnation_factor > 0.0 && self.stagnation_factor <= 1.0) {
            return Err(Error::BadParams(format!(
                "tol must be positive and stagnation_factor in (0, 1], got {} and {}",
                self.tol, self.stagnation_factor
            )));
        }
        Ok(())
    }
}

/// A converged point of the slow manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub x: DVector<f64>,
    pub eta: DVector<f64>,
    /// `d eta0 + delta(eta - eta0)` at the center (or `delta eta` for the plain variant).
    pub d_eta: DMatrix<f64>,
    pub residual: f64,
    /// Number of residual evaluations, counting the one that met the tolerance.
    pub iterations: usize,
}

impl ManifoldPoint {
    pub fn recompute_residual(&self, sys: &dyn SlowFastSystem) -> f64 {
        so_residual(sys, &self.x, &self.eta, &self.d_eta)
    }
}

/// Everything the SOF iteration needs from a finished SO solve.
#[derive(Debug, Clone)]
pub struct SoSolution {
    pub point: ManifoldPoint,
    pub grid: LocalGrid,
    /// `eta^h` at every grid point.
    pub eta: Vec<DVector<f64>>,
    pub eta0: Vec<DVector<f64>>,
    /// The derivative approximation at every grid point.
    pub d_eta: Vec<DMatrix<f64>>,
    pub a0: DMatrix<f64>,
    /// `X^eps(center, eta0(center))`, the frozen transport velocity.
    pub transport: DVector<f64>,
    /// Center residual before each update.
    pub history: Vec<f64>,
}

/// `|-d_eta X^eps(x, eta) + Y(x, eta)|`.
pub fn so_residual(sys: &dyn SlowFastSystem, x: &DVector<f64>, eta: &DVector<f64>, d_eta: &DMatrix<f64>) -> f64 {
    (-(d_eta * sys.slow_field(x, eta)) + sys.fast_field(x, eta)).norm()
}

/// Block operator `I (x) a + sign * sum_i D_i (x) (v_i I)` of size `len * n`.
pub(crate) fn lifted_operator(grid: &LocalGrid, a: &DMatrix<f64>, v: &DVector<f64>, sign: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let big = grid.len() * n;
    let mut l = DMatrix::zeros(big, big);
    for k in 0..grid.len() {
        for r in 0..n {
            for s in 0..n {
                l[(k * n + r, k * n + s)] += a[(r, s)];
            }
        }
        for axis in 0..grid.dim() {
            for (j, w) in grid.stencil(k, axis) {
                let c = sign * w * v[axis];
                for r in 0..n {
                    l[(k * n + r, j * n + r)] += c;
                }
            }
        }
    }
    l
}

/// Runs the SO iteration on `grid`, starting from the critical manifold branch near `guess`.
pub fn so_iterate(
    sys: &dyn SlowFastSystem,
    grid: &LocalGrid,
    guess: &DVector<f64>,
    cfg: &SoConfig,
) -> Result<SoSolution> {
    cfg.validate()?;
    let nf = sys.n_fast();
    let n = grid.len();
    let c = grid.center_index();
    let pts = grid.points();

    let eta0_c = critical_manifold(sys, &pts[c], guess, cfg.root_tol)?;
    let mut eta0 = Vec::with_capacity(n);
    for (k, p) in pts.iter().enumerate() {
        eta0.push(if k == c { eta0_c.clone() } else { critical_manifold(sys, p, &eta0_c, cfg.root_tol)? });
    }

    let de0: Option<Vec<DMatrix<f64>>> = if cfg.use_eta0_derivative {
        Some(pts.iter().zip(&eta0).map(|(p, e)| d_eta0(sys, p, e)).collect::<Result<_>>()?)
    } else {
        None
    };

    let d_a0 = match &de0 {
        Some(d) => d[c].clone(),
        None => lagrange_diff(grid, &eta0)[c].clone(),
    };
    let xc = grid.center();
    let a0 = -&d_a0 * sys.dslow_dy(xc, &eta0_c) + sys.dfast_dy(xc, &eta0_c);
    let transport = sys.slow_field(xc, &eta0_c);
    let lu = lifted_operator(grid, &a0, &transport, -1.0).lu();
    if is_singular(&lu.u()) {
        return Err(Error::SingularA0);
    }

    let derivative = |eta: &[DVector<f64>]| -> Vec<DMatrix<f64>> {
        match &de0 {
            Some(d) => {
                let dev: Vec<DVector<f64>> = eta.iter().zip(&eta0).map(|(e, e0)| e - e0).collect();
                lagrange_diff(grid, &dev).into_iter().zip(d).map(|(dd, d0)| d0 + dd).collect()
            }
            None => lagrange_diff(grid, eta),
        }
    };

    let mut eta = eta0.clone();
    let mut history = Vec::new();
    let mut slow_steps = 0;
    loop {
        let d = derivative(&eta);
        let rho: Vec<DVector<f64>> = (0..n)
            .map(|k| -(&d[k] * sys.slow_field(&pts[k], &eta[k])) + sys.fast_field(&pts[k], &eta[k]))
            .collect();
        let res = rho[c].norm();
        if !res.is_finite() {
            return Err(Error::NonConvergence { iterations: history.len(), residual: res });
        }
        if let Some(&prev) = history.last() {
            if res > cfg.stagnation_factor * prev {
                slow_steps += 1;
            } else {
                slow_steps = 0;
            }
        }
        history.push(res);
        if res <= cfg.tol || (slow_steps >= 2 && res <= cfg.noise_floor) {
            let point = ManifoldPoint {
                x: xc.clone(),
                eta: eta[c].clone(),
                d_eta: d[c].clone(),
                residual: res,
                iterations: history.len(),
            };
            return Ok(SoSolution { point, grid: grid.clone(), eta, eta0, d_eta: d, a0, transport, history });
        }
        if slow_steps >= 2 {
            return Err(Error::Stagnation { iteration: history.len(), residual: res });
        }
        if history.len() >= cfg.max_iter {
            return Err(Error::NonConvergence { iterations: history.len(), residual: res });
        }
        let mut stacked = DVector::zeros(n * nf);
        for (k, r) in rho.iter().enumerate() {
            stacked.rows_mut(k * nf, nf).copy_from(r);
        }
        let step = lu.solve(&stacked).ok_or(Error::SingularA0)?;
        for (k, e) in eta.iter_mut().enumerate() {
            *e -= step.rows(k * nf, nf);
        }
    }
}

/// Convenience wrapper: SO at `x` with spacing `h`.
pub fn slow_manifold_at(
    sys: &dyn SlowFastSystem,
    x: &DVector<f64>,
    h: f64,
    guess: &DVector<f64>,
    cfg: &SoConfig,
) -> Result<SoSolution> {
    so_iterate(sys, &LocalGrid::new(x.clone(), h), guess, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    use crate::models::{LinearBvp, Toy};
    use crate::series::toy_series;

    #[test]
    fn linear_bvp_is_exact_at_once() {
        let sys = LinearBvp::new(0.1);
        let so = slow_manifold_at(&sys, &dvector![0.3], 1e-2, &dvector![0.0], &SoConfig::default()).unwrap();
        assert!(so.point.iterations <= 1);
        assert_abs_diff_eq!(so.point.eta[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn toy_matches_series() {
        let eps = 1e-3;
        let cfg = SoConfig { tol: 1e-14, ..SoConfig::default() };
        let so = slow_manifold_at(&Toy::new(eps), &dvector![-0.5, -0.7], eps, &dvector![0.0, 0.0], &cfg).unwrap();
        let want = toy_series([-0.5, -0.7], 6, 8).eta_at(eps);
        let err = (so.point.eta[0] - want[0]).abs().max((so.point.eta[1] - want[1]).abs());
        assert!(err < 1e-9, "{err:e}");
        assert!(so.point.recompute_residual(&Toy::new(eps)) < 1e-10);
    }

    #[test]
    fn config_is_validated() {
        assert!(SoConfig { tol: 0.0, ..SoConfig::default() }.validate().is_err());
        assert!(SoConfig { stagnation_factor: 1.5, ..SoConfig::default() }.validate().is_err());
    }
}
