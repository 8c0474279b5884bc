//! Cubic Hermite (Hermite-Simpson) collocation for two-point boundary value problems.
//!
//! On each interval the solution is the cubic matching values and derivatives at
//! both nodes; the ODE is enforced at the midpoint. Written in Simpson form,
//! `z_{i+1} - z_i - dt/6 (f_i + 4 f_m + f_{i+1}) = 0` with
//! `z_m = (z_i + z_{i+1})/2 + dt (f_i - f_{i+1})/8`.
//! Boundary conditions are affine: `C_start z(t_0) = d_start`, `C_end z(t_N) = d_end`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBc {
    pub rows: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl LinearBc {
    pub fn new(rows: DMatrix<f64>, rhs: DVector<f64>) -> Self {
        Self { rows, rhs }
    }

    pub fn none(dim: usize) -> Self {
        Self { rows: DMatrix::zeros(0, dim), rhs: DVector::zeros(0) }
    }

    pub fn count(&self) -> usize {
        self.rows.nrows()
    }

    pub fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.rows * z - &self.rhs
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Converged when the max-norm residual falls below this.
    pub residual_tol: f64,
    /// Or when a full step is below `step_tol * (1 + |Z|)`.
    pub step_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 50, residual_tol: 1e-13, step_tol: 1e-12 }
    }
}

/// A solved collocation mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HermiteMesh {
    pub t_nodes: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub derivs: Vec<DVector<f64>>,
    /// `z'_m - f(t_m, z_m)` of the interpolating cubic, per interval.
    pub midpoint_residuals: Vec<DVector<f64>>,
    pub newton_iterations: usize,
    /// Max-norm of the full residual (collocation and boundary rows) at exit.
    pub residual: f64,
}

impl HermiteMesh {
    /// Cubic Hermite interpolant at `t` (clamped to the mesh).
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let n = self.t_nodes.len();
        if n == 1 {
            return self.states[0].clone();
        }
        let i = match self.t_nodes.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        hermite(
            self.t_nodes[i],
            self.t_nodes[i + 1],
            &self.states[i],
            &self.derivs[i],
            &self.states[i + 1],
            &self.derivs[i + 1],
            t,
        )
    }
}

/// Cubic Hermite interpolation between `(t0, z0, d0)` and `(t1, z1, d1)`.
pub fn hermite(
    t0: f64,
    t1: f64,
    z0: &DVector<f64>,
    d0: &DVector<f64>,
    z1: &DVector<f64>,
    d1: &DVector<f64>,
    t: f64,
) -> DVector<f64> {
    let dt = t1 - t0;
    let s = (t - t0) / dt;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    z0 * h00 + d0 * (h10 * dt) + z1 * h01 + d1 * (h11 * dt)
}

/// Derivative of [`hermite`] with respect to `t`.
pub fn hermite_derivative(
    t0: f64,
    t1: f64,
    z0: &DVector<f64>,
    d0: &DVector<f64>,
    z1: &DVector<f64>,
    d1: &DVector<f64>,
    t: f64,
) -> DVector<f64> {
    let dt = t1 - t0;
    let s = (t - t0) / dt;
    let g00 = 6.0 * s * (s - 1.0) / dt;
    let g10 = (1.0 - s) * (1.0 - 3.0 * s);
    let g01 = -g00;
    let g11 = s * (3.0 * s - 2.0);
    z0 * g00 + d0 * g10 + z1 * g01 + d1 * g11
}

/// Midpoint defects `z'_m - f(t_m, z_m)` of the piecewise cubic through the given nodes.
pub fn midpoint_residuals<F>(f: &F, t: &[f64], z: &[DVector<f64>]) -> Vec<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let d: Vec<DVector<f64>> = t.iter().zip(z).map(|(&ti, zi)| f(ti, zi)).collect();
    (0..t.len().saturating_sub(1))
        .map(|i| {
            let dt = t[i + 1] - t[i];
            let zm = (&z[i] + &z[i + 1]) * 0.5 + (&d[i] - &d[i + 1]) * (dt / 8.0);
            let dm = (&z[i + 1] - &z[i]) * (1.5 / dt) - (&d[i] + &d[i + 1]) * 0.25;
            dm - f(0.5 * (t[i] + t[i + 1]), &zm)
        })
        .collect()
}

/// Solves the collocation system by damped Newton with an analytic banded Jacobian.
pub fn solve_collocation<F, J>(
    f: F,
    jac: J,
    t: &[f64],
    guess: Vec<DVector<f64>>,
    start: &LinearBc,
    end: &LinearBc,
    opts: &NewtonOptions,
) -> Result<HermiteMesh>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    J: Fn(f64, &DVector<f64>) -> DMatrix<f64>,
{
    let nodes = t.len();
    let m = guess.first().map_or(0, |g| g.len());
    if nodes < 2 || guess.len() != nodes || start.count() + end.count() != m {
        return Err(Error::Dimension(format!(
            "collocation needs >= 2 nodes, one guess per node and {m} boundary rows (got {} + {})",
            start.count(),
            end.count()
        )));
    }
    let k0 = start.count();
    let size = nodes * m;
    let kl = k0 + m - 1;
    let ku = (2 * m).saturating_sub(1 + k0).max(m - 1);

    let flat = |z: &[DVector<f64>]| {
        let mut v = DVector::zeros(size);
        for (i, zi) in z.iter().enumerate() {
            v.rows_mut(i * m, m).copy_from(zi);
        }
        v
    };
    let unflat = |v: &DVector<f64>| (0..nodes).map(|i| v.rows(i * m, m).into_owned()).collect::<Vec<_>>();

    let residual = |z: &[DVector<f64>]| -> DVector<f64> {
        let d: Vec<DVector<f64>> = t.iter().zip(z).map(|(&ti, zi)| f(ti, zi)).collect();
        let mut r = DVector::zeros(size);
        r.rows_mut(0, k0).copy_from(&start.residual(&z[0]));
        for i in 0..nodes - 1 {
            let dt = t[i + 1] - t[i];
            let zm = (&z[i] + &z[i + 1]) * 0.5 + (&d[i] - &d[i + 1]) * (dt / 8.0);
            let fm = f(0.5 * (t[i] + t[i + 1]), &zm);
            let c = &z[i + 1] - &z[i] - (&d[i] + fm * 4.0 + &d[i + 1]) * (dt / 6.0);
            r.rows_mut(k0 + i * m, m).copy_from(&c);
        }
        r.rows_mut(k0 + (nodes - 1) * m, end.count()).copy_from(&end.residual(&z[nodes - 1]));
        r
    };

    let jacobian = |z: &[DVector<f64>]| -> BandMatrix {
        let mut b = BandMatrix::zeros(size, kl, ku);
        for r in 0..k0 {
            for c in 0..m {
                b.add(r, c, start.rows[(r, c)]);
            }
        }
        let d: Vec<DVector<f64>> = t.iter().zip(z).map(|(&ti, zi)| f(ti, zi)).collect();
        let jn: Vec<DMatrix<f64>> = t.iter().zip(z).map(|(&ti, zi)| jac(ti, zi)).collect();
        let id = DMatrix::<f64>::identity(m, m);
        for i in 0..nodes - 1 {
            let dt = t[i + 1] - t[i];
            let zm = (&z[i] + &z[i + 1]) * 0.5 + (&d[i] - &d[i + 1]) * (dt / 8.0);
            let jm = jac(0.5 * (t[i] + t[i + 1]), &zm);
            let dzm_a = &id * 0.5 + &jn[i] * (dt / 8.0);
            let dzm_b = &id * 0.5 - &jn[i + 1] * (dt / 8.0);
            let ja = -&id - (&jn[i] + &jm * dzm_a * 4.0) * (dt / 6.0);
            let jb = &id - (&jn[i + 1] + &jm * dzm_b * 4.0) * (dt / 6.0);
            let row = k0 + i * m;
            for r in 0..m {
                for c in 0..m {
                    b.add(row + r, i * m + c, ja[(r, c)]);
                    b.add(row + r, (i + 1) * m + c, jb[(r, c)]);
                }
            }
        }
        let row = k0 + (nodes - 1) * m;
        for r in 0..end.count() {
            for c in 0..m {
                b.add(row + r, (nodes - 1) * m + c, end.rows[(r, c)]);
            }
        }
        b
    };

    let mut z = guess;
    let mut r = residual(&z);
    let mut rn = r.amax();
    let mut iterations = 0;
    loop {
        if !rn.is_finite() {
            return Err(Error::NewtonDivergence { iterations, residual: rn });
        }
        if rn <= opts.residual_tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NewtonDivergence { iterations, residual: rn });
        }
        iterations += 1;
        let lu = jacobian(&z).lu().map_err(|_| Error::NewtonDivergence { iterations, residual: rn })?;
        let step = lu.solve(&r);
        let zflat = flat(&z);
        let mut alpha = 1.0;
        let (znew, rnew, rnn) = loop {
            let cand = unflat(&(&zflat - &step * alpha));
            let rc = residual(&cand);
            let rcn = rc.amax();
            if (rcn.is_finite() && rcn < (1.0 - 0.25 * alpha) * rn) || alpha < 1.0 / 1024.0 {
                break (cand, rc, rcn);
            }
            alpha *= 0.5;
        };
        if !(rnn < rn) && alpha < 1.0 / 1024.0 {
            return Err(Error::NewtonDivergence { iterations, residual: rn });
        }
        z = znew;
        r = rnew;
        rn = rnn;
        if alpha == 1.0 && step.amax() <= opts.step_tol * (1.0 + zflat.amax()) {
            break;
        }
    }
    let derivs: Vec<DVector<f64>> = t.iter().zip(&z).map(|(&ti, zi)| f(ti, zi)).collect();
    let mids = midpoint_residuals(&f, t, &z);
    Ok(HermiteMesh {
        t_nodes: t.to_vec(),
        states: z,
        derivs,
        midpoint_residuals: mids,
        newton_iterations: iterations,
        residual: rn,
    })
}
