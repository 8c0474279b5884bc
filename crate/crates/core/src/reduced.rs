//! Fourth-order Runge-Kutta on the slow manifold: `x' = X^eps(x, eta(x)) / eps` in slow
//! time, with `eta` recomputed by the SO iteration at every stage point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::differencing::LocalGrid;
use crate::error::{Error, Result};
use crate::so::{so_iterate, ManifoldPoint, SoConfig, SoSolution};
use crate::sof::sof_iterate;
use crate::system::SlowFastSystem;

/// Nodes of a slow-time trajectory on the manifold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseTrajectory {
    pub tau_mesh: Vec<f64>,
    pub x_values: Vec<DVector<f64>>,
    pub eta_values: Vec<DVector<f64>>,
    pub d_eta_values: Vec<DMatrix<f64>>,
    pub phi_values: Option<Vec<DMatrix<f64>>>,
    pub residuals: Vec<f64>,
    pub dtau: f64,
    pub h_used: f64,
}

impl BaseTrajectory {
    pub fn len(&self) -> usize {
        self.tau_mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_mesh.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.tau_mesh.last().unwrap()
    }

    /// Columns: tau, x[..], eta[..], residual.
    pub fn csv_rows(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let ns = self.x_values[0].len();
        let nf = self.eta_values[0].len();
        let mut header = vec!["tau".to_string()];
        header.extend((0..ns).map(|i| format!("x{i}")));
        header.extend((0..nf).map(|i| format!("eta{i}")));
        header.push("residual".into());
        let rows = (0..self.len())
            .map(|k| {
                let mut r = vec![self.tau_mesh[k]];
                r.extend(self.x_values[k].iter());
                r.extend(self.eta_values[k].iter());
                r.push(self.residuals[k]);
                r
            })
            .collect();
        (header, rows)
    }
}

/// Slow-time field `Lambda(x) = X^eps(x, eta) / eps` at a converged manifold point.
pub fn reduced_velocity(sys: &dyn SlowFastSystem, mp: &ManifoldPoint) -> DVector<f64> {
    sys.slow_field(&mp.x, &mp.eta) / sys.epsilon()
}

fn manifold(sys: &dyn SlowFastSystem, x: &DVector<f64>, h: f64, guess: &DVector<f64>, cfg: &SoConfig) -> Result<SoSolution> {
    so_iterate(sys, &LocalGrid::new(x.clone(), h), guess, cfg)
}

/// One step of the modified scheme; returns `x_next` and the four stage points.
pub fn rk4_step(
    sys: &dyn SlowFastSystem,
    x: &DVector<f64>,
    dtau: f64,
    h: f64,
    guess: &DVector<f64>,
    cfg: &SoConfig,
) -> Result<(DVector<f64>, [ManifoldPoint; 4])> {
    let tag = |stage: usize| move |e: Error| Error::Stage { stage, source: Box::new(e) };
    let m1 = manifold(sys, x, h, guess, cfg).map_err(tag(1))?.point;
    let k1 = dtau * reduced_velocity(sys, &m1);
    let m2 = manifold(sys, &(x + 0.5 * &k1), h, &m1.eta, cfg).map_err(tag(2))?.point;
    let k2 = dtau * reduced_velocity(sys, &m2);
    let m3 = manifold(sys, &(x + 0.5 * &k2), h, &m2.eta, cfg).map_err(tag(3))?.point;
    let k3 = dtau * reduced_velocity(sys, &m3);
    let m4 = manifold(sys, &(x + &k3), h, &m3.eta, cfg).map_err(tag(4))?.point;
    let k4 = dtau * reduced_velocity(sys, &m4);
    let next = x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    Ok((next, [m1, m2, m3, m4]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Options of a reduced-flow run.
#[derive(Debug, Clone, Copy)]
pub struct ReducedOptions {
    pub so: SoConfig,
    pub h: f64,
    /// Also compute `phi` by SOF at every node.
    pub with_fibers: bool,
}

/// Node data at `x`: manifold point and optionally `phi`.
pub fn node(
    sys: &dyn SlowFastSystem,
    x: &DVector<f64>,
    guess: &DVector<f64>,
    opts: &ReducedOptions,
) -> Result<(ManifoldPoint, Option<DMatrix<f64>>)> {
    let so = manifold(sys, x, opts.h, guess, &opts.so)?;
    let phi = if opts.with_fibers { Some(sof_iterate(sys, &so, &opts.so)?.projection.phi) } else { None };
    Ok((so.point, phi))
}

/// Integrates the reduced flow over slow time `t_span` (>= 0) in the given direction.
///
/// The step count is `ceil(t_span / dtau)` with equal steps.
pub fn integrate_reduced(
    sys: &dyn SlowFastSystem,
    x0: &DVector<f64>,
    guess: &DVector<f64>,
    t_span: f64,
    dtau: f64,
    direction: Direction,
    opts: &ReducedOptions,
) -> Result<BaseTrajectory> {
    let steps = if t_span <= 0.0 { 0 } else { ((t_span / dtau) - 1e-9).ceil().max(1.0) as usize };
    let sign = if direction == Direction::Forward { 1.0 } else { -1.0 };
    let step = if steps == 0 { 0.0 } else { t_span / steps as f64 };
    integrate_steps(sys, x0, guess, step * sign, steps, opts, |_, _| false)
}

/// Fixed-step run of at most `max_steps`, stopping early once `stop(tau, x)` is true.
pub fn integrate_steps<S>(
    sys: &dyn SlowFastSystem,
    x0: &DVector<f64>,
    guess: &DVector<f64>,
    dtau: f64,
    max_steps: usize,
    opts: &ReducedOptions,
    mut stop: S,
) -> Result<BaseTrajectory>
where
    S: FnMut(f64, &DVector<f64>) -> bool,
{
    let mut traj = BaseTrajectory {
        tau_mesh: Vec::new(),
        x_values: Vec::new(),
        eta_values: Vec::new(),
        d_eta_values: Vec::new(),
        phi_values: opts.with_fibers.then(Vec::new),
        residuals: Vec::new(),
        dtau,
        h_used: LocalGrid::new(x0.clone(), opts.h).h(),
    };
    let push = |traj: &mut BaseTrajectory, tau: f64, mp: ManifoldPoint, phi: Option<DMatrix<f64>>| {
        traj.tau_mesh.push(tau);
        traj.x_values.push(mp.x);
        traj.eta_values.push(mp.eta);
        traj.d_eta_values.push(mp.d_eta);
        traj.residuals.push(mp.residual);
        if let (Some(v), Some(p)) = (traj.phi_values.as_mut(), phi) {
            v.push(p);
        }
    };
    let (mut mp, phi) = node(sys, x0, guess, opts)?;
    let mut x = x0.clone();
    let mut tau = 0.0;
    push(&mut traj, tau, mp.clone(), phi);
    for k in 1..=max_steps {
        if stop(tau, &x) {
            break;
        }
        let (next, _) = rk4_step(sys, &x, dtau, opts.h, &mp.eta, &opts.so)?;
        x = next;
        tau = k as f64 * dtau;
        let (m, phi) = node(sys, &x, &mp.eta, opts)?;
        mp = m;
        push(&mut traj, tau, mp.clone(), phi);
    }
    Ok(traj)
}
