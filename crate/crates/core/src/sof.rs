//! Discretized SOF iteration: the matrix `phi` whose graph gives the tangent
//! spaces of the fast fibers at the slow manifold, and the coordinate maps built on it.
//!
//! `phi` solves `phi A + (delta phi) X^eps - B phi = dX/dy` on the grid with
//! `A = -d_eta dX/dy + dY/dy` and `B = dX/dx + dX/dy d_eta`. The iteration sums
//! increments `phi_n`; the first one is `dX/dy A0^{-1}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::differencing::lagrange_diff_axis;
use crate::error::{Error, Result};
use crate::so::{lifted_operator, SoConfig, SoSolution};
use crate::system::{is_singular, SlowFastSystem, State};

/// `phi^{eps,h}(x)` and the fiber tangent basis `[phi; I + d_eta phi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberProjection {
    pub x: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub d_eta: DMatrix<f64>,
    pub tangent_basis: DMatrix<f64>,
    /// Index of the last increment, the one below tolerance.
    pub iterations: usize,
    pub last_mu_norm: f64,
}

impl FiberProjection {
    pub fn new(x: DVector<f64>, phi: DMatrix<f64>, d_eta: DMatrix<f64>, iterations: usize, last_mu_norm: f64) -> Self {
        let tangent_basis = tangent_basis(&phi, &d_eta);
        Self { x, phi, d_eta, tangent_basis, iterations, last_mu_norm }
    }

    /// Fibers taken vertical (`phi = 0`).
    pub fn naive(x: DVector<f64>, d_eta: DMatrix<f64>) -> Self {
        let phi = DMatrix::zeros(x.len(), d_eta.nrows());
        Self::new(x, phi, d_eta, 0, 0.0)
    }
}

pub fn tangent_basis(phi: &DMatrix<f64>, d_eta: &DMatrix<f64>) -> DMatrix<f64> {
    let (ns, nf) = phi.shape();
    let mut t = DMatrix::zeros(ns + nf, nf);
    t.view_mut((0, 0), (ns, nf)).copy_from(phi);
    t.view_mut((ns, 0), (nf, nf)).copy_from(&(DMatrix::identity(nf, nf) + d_eta * phi));
    t
}

#[derive(Debug, Clone)]
pub struct SofSolution {
    pub projection: FiberProjection,
    /// `phi` at every grid point of the owning SO solve.
    pub phi: Vec<DMatrix<f64>>,
    pub history: Vec<f64>,
}

/// Runs SOF on the grid of a converged SO solve, reusing its `A0` and transport velocity.
pub fn sof_iterate(sys: &dyn SlowFastSystem, so: &SoSolution, cfg: &SoConfig) -> Result<SofSolution> {
    cfg.validate()?;
    let grid = &so.grid;
    let n = grid.len();
    let ns = sys.n_slow();
    let nf = sys.n_fast();
    let c = grid.center_index();
    let pts = grid.points();

    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut xy = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for k in 0..n {
        let (p, e, d) = (&pts[k], &so.eta[k], &so.d_eta[k]);
        let sxy = sys.dslow_dy(p, e);
        a.push(-d * &sxy + sys.dfast_dy(p, e));
        b.push(sys.dslow_dx(p, e) + &sxy * d);
        xy.push(sxy);
        vel.push(sys.slow_field(p, e));
    }

    let lu = lifted_operator(grid, &so.a0.transpose(), &so.transport, 1.0).lu();
    if is_singular(&lu.u()) {
        return Err(Error::SingularA0);
    }

    let mut phi = vec![DMatrix::zeros(ns, nf); n];
    let mut history = Vec::new();
    let mut slow_steps = 0;
    for it in 0..cfg.max_iter {
        let dphi: Vec<Vec<DMatrix<f64>>> = (0..grid.dim()).map(|i| lagrange_diff_axis(grid, &phi, i)).collect();
        let mut rhs = DMatrix::zeros(n * nf, ns);
        for k in 0..n {
            let mut r = &phi[k] * &a[k] - &b[k] * &phi[k] - &xy[k];
            for (i, di) in dphi.iter().enumerate() {
                r += &di[k] * vel[k][i];
            }
            rhs.view_mut((k * nf, 0), (nf, ns)).copy_from(&r.transpose());
        }
        let step = lu.solve(&rhs).ok_or(Error::SingularA0)?;
        for (k, p) in phi.iter_mut().enumerate() {
            *p -= step.view((k * nf, 0), (nf, ns)).transpose();
        }
        let inc = step.view((c * nf, 0), (nf, ns)).norm();
        if !inc.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual: inc });
        }
        if let Some(&prev) = history.last() {
            if inc > cfg.stagnation_factor * prev {
                slow_steps += 1;
            } else {
                slow_steps = 0;
            }
        }
        history.push(inc);
        if inc <= cfg.tol || (slow_steps >= 2 && inc <= cfg.noise_floor) {
            let projection = FiberProjection::new(
                grid.center().clone(),
                phi[c].clone(),
                so.point.d_eta.clone(),
                it,
                inc,
            );
            return Ok(SofSolution { projection, phi, history });
        }
        if slow_steps >= 2 {
            return Err(Error::Stagnation { iteration: it, residual: inc });
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, residual: history.last().copied().unwrap_or(f64::NAN) })
}

/// Base point of the fiber through `state`: `x0 = x - phi (y - eta(x))`.
pub fn project_to_manifold(fp: &FiberProjection, state: &State, eta_at_x: &DVector<f64>) -> DVector<f64> {
    &state.x - &fp.phi * (&state.y - eta_at_x)
}

/// `G = phi (I + d_eta phi)^{-1}`, the slow displacement per unit fast deviation.
pub fn fiber_gain(phi: &DMatrix<f64>, d_eta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nf = d_eta.nrows();
    let corr = DMatrix::identity(nf, nf) + d_eta * phi;
    let lu = corr.lu();
    if is_singular(&lu.u()) {
        return Err(Error::SingularCorrection);
    }
    let inv = lu.try_inverse().ok_or(Error::SingularCorrection)?;
    Ok(phi * inv)
}

/// Point on the fiber of `x0` with fast coordinate `y`:
/// `x = x0 + phi (I + d_eta phi)^{-1} (y - eta(x0))`.
pub fn fiber_offset_map(
    phi: &DMatrix<f64>,
    d_eta: &DMatrix<f64>,
    x0: &DVector<f64>,
    y: &DVector<f64>,
    eta_at_x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    Ok(x0 + fiber_gain(phi, d_eta)? * (y - eta_at_x0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    use crate::models::LinearBvp;
    use crate::so::slow_manifold_at;

    #[test]
    fn linear_bvp_fiber_in_one_step() {
        let eps = 0.1;
        let sys = LinearBvp::new(eps);
        let cfg = SoConfig::default();
        let so = slow_manifold_at(&sys, &dvector![0.3], 1e-2, &dvector![0.0], &cfg).unwrap();
        let sof = sof_iterate(&sys, &so, &cfg).unwrap();
        assert_eq!(sof.projection.iterations, 1);
        assert_abs_diff_eq!(sof.projection.phi[(0, 0)], -eps, epsilon = 1e-13);
    }

    #[test]
    fn naive_fibers_are_vertical() {
        let fp = FiberProjection::naive(dvector![0.0, 1.0], DMatrix::zeros(1, 2));
        assert_eq!(fp.tangent_basis, DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]));
    }
}
