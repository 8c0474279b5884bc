//! Convergence of the grid iterations against the epsilon-series, with `h = eps`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{Lindemann, Toy};
use crate::series::{lindemann_series, toy_series, Series};
use crate::so::{slow_manifold_at, SoConfig};
use crate::sof::sof_iterate;
use crate::system::SlowFastSystem;

pub const TOY_POINT: [f64; 2] = [-0.5, -0.7];
pub const LINDEMANN_POINT: f64 = 1.0;

/// Iterations run down to rounding so that the stopping error stays below the
/// truncation error even at the smallest `eps`.
pub fn sweep_config(split: bool) -> SoConfig {
    SoConfig { tol: 1e-16, use_eta0_derivative: split, ..SoConfig::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPoint {
    pub eps: f64,
    pub h: f64,
    /// `|eta^h - eta|` with the critical-manifold derivative split off.
    pub eta_error: f64,
    /// Same, differencing `eta` itself (toy only).
    pub eta_error_plain: Option<f64>,
    pub phi_error: f64,
    pub so_iterations: usize,
    pub sof_iterations: usize,
}

fn phi_error(phi: &DMatrix<f64>, reference: &[f64]) -> f64 {
    let (ns, nf) = phi.shape();
    let mut s = 0.0;
    for r in 0..ns {
        for c in 0..nf {
            s += (phi[(r, c)] - reference[r * nf + c]).powi(2);
        }
    }
    s.sqrt()
}

fn point(
    sys: &dyn SlowFastSystem,
    x: &DVector<f64>,
    h: f64,
    guess: &DVector<f64>,
    series: &Series,
    with_plain: bool,
) -> Result<OrderPoint> {
    let eps = sys.epsilon();
    let eta_ref = DVector::from_vec(series.eta_at(eps));
    let so = slow_manifold_at(sys, x, h, guess, &sweep_config(true))?;
    let sof = sof_iterate(sys, &so, &sweep_config(true))?;
    let eta_error_plain = if with_plain {
        let plain = slow_manifold_at(sys, x, h, guess, &sweep_config(false))?;
        Some((&plain.point.eta - &eta_ref).norm())
    } else {
        None
    };
    Ok(OrderPoint {
        eps,
        h,
        eta_error: (&so.point.eta - &eta_ref).norm(),
        eta_error_plain,
        phi_error: phi_error(&sof.projection.phi, &series.phi_at(eps)),
        so_iterations: so.point.iterations,
        sof_iterations: sof.projection.iterations,
    })
}

/// Toy system at [`TOY_POINT`]; `h = eps` unless `h` is given.
pub fn toy_order_sweep(eps: &[f64], h: Option<f64>) -> Result<Vec<OrderPoint>> {
    let series = toy_series(TOY_POINT, 9, 14);
    let x = DVector::from_column_slice(&TOY_POINT);
    eps.par_iter()
        .map(|&e| point(&Toy::new(e), &x, h.unwrap_or(e), &DVector::zeros(2), &series, true))
        .collect()
}

/// Lindemann mechanism at [`LINDEMANN_POINT`].
pub fn lindemann_order_sweep(eps: &[f64], h: Option<f64>) -> Result<Vec<OrderPoint>> {
    let series = lindemann_series(LINDEMANN_POINT, 12, 30);
    let x = DVector::from_element(1, LINDEMANN_POINT);
    let guess = DVector::from_element(1, LINDEMANN_POINT);
    eps.par_iter()
        .map(|&e| point(&Lindemann::new(e), &x, h.unwrap_or(e), &guess, &series, false))
        .collect()
}
