//! Checks shared by the property suites and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use slowfast::collocation::{solve_collocation, LinearBc, NewtonOptions};
use slowfast::differencing::{central_diff, lagrange_diff, LocalGrid};
use slowfast::experiments::fit_slope;
use slowfast::models::{Lindemann, Toy};
use slowfast::so::{slow_manifold_at, SoConfig};
use slowfast::sof::{fiber_offset_map, project_to_manifold, sof_iterate, FiberProjection};
use slowfast::spectral::{split_spectrum, DEFAULT_FLOOR};
use slowfast::State;

/// `V diag(lambdas) V^-1` with `V = I + perturbation`.
pub fn diagonalizable(lambdas: &[f64], perturbation: &[f64]) -> DMatrix<f64> {
    let n = lambdas.len();
    let v = DMatrix::identity(n, n) + DMatrix::from_row_slice(n, n, &perturbation[..n * n]);
    let vinv = v.clone().try_inverse().expect("perturbation keeps V invertible");
    &v * DMatrix::from_diagonal(&DVector::from_column_slice(lambdas)) * vinv
}

/// Largest defect of `pi_s + pi_u = I`, idempotence, `pi_s pi_u = 0`, and of each
/// projector annihilating the other subspace. Also checks the subspace dimensions.
pub fn projector_defect(a: &DMatrix<f64>, n_stable: usize) -> f64 {
    let s = split_spectrum(a, DEFAULT_FLOOR).expect("hyperbolic");
    assert_eq!(s.n_stable(), n_stable);
    assert_eq!(s.n_unstable(), a.nrows() - n_stable);
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    [
        (&s.pi_s + &s.pi_u - &id).amax(),
        (&s.pi_s * &s.pi_s - &s.pi_s).amax(),
        (&s.pi_u * &s.pi_u - &s.pi_u).amax(),
        (&s.pi_s * &s.pi_u).amax(),
        (&s.pi_u * &s.basis_s).amax(),
        (&s.pi_s * &s.basis_u).amax(),
        // invariance: A maps each subspace into itself
        (&s.pi_u * a * &s.basis_s).amax(),
        (&s.pi_s * a * &s.basis_u).amax(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `f_i(x) = c_i + b_i . x + sum_j q_ij x_j^2 + m_i x_0 x_last`; returns the largest
/// error of the central and all-point Lagrange Jacobians relative to the exact ones.
pub fn quadratic_diff_error(center: &[f64], h: f64, coeffs: &[f64]) -> f64 {
    let n = center.len();
    let m = 2;
    let take = |k: usize| coeffs[k % coeffs.len()];
    let f = |x: &DVector<f64>| {
        DVector::from_fn(m, |i, _| {
            let mut v = take(i);
            for j in 0..n {
                v += take(1 + i * n + j) * x[j] + take(7 + i * n + j) * x[j] * x[j];
            }
            v + take(13 + i) * x[0] * x[n - 1]
        })
    };
    let df = |x: &DVector<f64>| {
        DMatrix::from_fn(m, n, |i, j| {
            let mut d = take(1 + i * n + j) + 2.0 * take(7 + i * n + j) * x[j];
            if n > 1 {
                if j == 0 {
                    d += take(13 + i) * x[n - 1];
                }
                if j == n - 1 {
                    d += take(13 + i) * x[0];
                }
            } else {
                d += 2.0 * take(13 + i) * x[0];
            }
            d
        })
    };
    let grid = LocalGrid::new(DVector::from_column_slice(center), h);
    let values: Vec<DVector<f64>> = grid.points().iter().map(f).collect();
    let scale = 1.0 + coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs())) * (1.0 + DVector::from_column_slice(center).amax());
    let mut err = (central_diff(&grid, &values).unwrap() - df(grid.center())).amax();
    for (k, d) in lagrange_diff(&grid, &values).iter().enumerate() {
        err = err.max((d - df(&grid.point(k))).amax());
    }
    err / scale
}

/// Collocation of `z' = p'(t) + k (z - p(t))` with a cubic `p` on `mesh`; returns
/// the largest error at the nodes and at the interval midpoints.
pub fn hermite_cubic_error(p: [f64; 4], k: f64, mesh: &[f64]) -> f64 {
    let poly = |t: f64| p[0] + t * (p[1] + t * (p[2] + t * p[3]));
    let dpoly = |t: f64| p[1] + t * (2.0 * p[2] + t * 3.0 * p[3]);
    let f = |t: f64, z: &DVector<f64>| DVector::from_element(1, dpoly(t) + k * (z[0] - poly(t)));
    let jac = |_: f64, _: &DVector<f64>| DMatrix::from_element(1, 1, k);
    let guess = vec![DVector::zeros(1); mesh.len()];
    let start = LinearBc::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, poly(mesh[0])));
    let sol = solve_collocation(f, jac, mesh, guess, &start, &LinearBc::none(1), &NewtonOptions::default()).unwrap();
    let mut err: f64 = 0.0;
    for (i, &t) in mesh.iter().enumerate() {
        err = err.max((sol.states[i][0] - poly(t)).abs());
        if i + 1 < mesh.len() {
            let tm = 0.5 * (t + mesh[i + 1]);
            err = err.max((sol.eval(tm)[0] - poly(tm)).abs());
        }
    }
    let scale = 1.0 + p.iter().fold(0.0f64, |a, c| a.max(c.abs())) * 8.0;
    err / scale
}

/// Largest center residual over the SO history at the Lindemann equilibrium `x = 0`,
/// together with `|eta|` there.
pub fn lindemann_equilibrium_residuals(eps: f64, h: f64) -> (f64, f64) {
    let sys = Lindemann::new(eps);
    let so = slow_manifold_at(&sys, &DVector::zeros(1), h, &DVector::zeros(1), &SoConfig::default()).unwrap();
    let worst = so.history.iter().cloned().fold(so.point.residual, f64::max);
    (worst, so.point.eta.amax())
}

/// Round trip along the toy fiber: start at `x0` with fast deviation `s * dir`, map to
/// `x` with the fiber map of `x0`, then project back with the fiber data at `x`.
/// Returns the slope of `|x0' - x0|` against `s` over `scales`.
pub fn fiber_round_trip_slope(eps: f64, x0: [f64; 2], dir: [f64; 2], scales: &[f64]) -> f64 {
    let sys = Toy::new(eps);
    // with h = 1e-2 the SOF increments level off near 1e-9 (rounding) for eps near 0.1
    let cfg = SoConfig { tol: 1e-12, noise_floor: 1e-8, ..SoConfig::default() };
    let h = 1e-2;
    let x0 = DVector::from_column_slice(&x0);
    let dir = DVector::from_column_slice(&dir).normalize();
    let base = slow_manifold_at(&sys, &x0, h, &DVector::zeros(2), &cfg).unwrap();
    let base_phi = sof_iterate(&sys, &base, &cfg).unwrap().projection.phi;
    let data: Vec<(f64, f64)> = scales
        .iter()
        .map(|&s| {
            let y = &base.point.eta + &dir * s;
            let x = fiber_offset_map(&base_phi, &base.point.d_eta, &x0, &y, &base.point.eta).unwrap();
            let at = slow_manifold_at(&sys, &x, h, &base.point.eta, &cfg).unwrap();
            let phi = sof_iterate(&sys, &at, &cfg).unwrap().projection.phi;
            let fp = FiberProjection::new(x.clone(), phi, at.point.d_eta.clone(), 0, 0.0);
            let back = project_to_manifold(&fp, &State::new(x, y), &at.point.eta);
            (s, (back - &x0).norm())
        })
        .collect();
    fit_slope(&data).unwrap().slope
}
