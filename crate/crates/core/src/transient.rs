//! Entry and exit transients of a trajectory along a saddle-type slow manifold.
//!
//! The slow part comes from a [`BaseTrajectory`]. Near each end a boundary value
//! problem is solved for the fast variables only, in fast time, with the slow
//! variables slaved to the base point through the fiber map
//! `x = x0 + phi (I + d_eta phi)^{-1} (y - eta(x0))`. In between, `y = eta(x0)`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::collocation::{hermite, solve_collocation, HermiteMesh, LinearBc, NewtonOptions};
use crate::error::{Error, Result};
use crate::reduced::BaseTrajectory;
use crate::sof::fiber_gain;
use crate::spectral::{boundary_layer_time, split_spectrum, SpectralSplit, DEFAULT_FLOOR};
use crate::system::{stack, SlowFastSystem};

/// How the free fast components are fixed at an end of the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Pin {
    /// `y[index] = value` for each pair.
    Raw(Vec<(usize, f64)>),
    /// The stable (entry) or unstable (exit) part of `(I + d_eta phi)^{-1} (y - eta)`
    /// equals that part of the given vector.
    Split(DVector<f64>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransientConfig {
    /// Fast-time step of both layers.
    pub dt: f64,
    /// Deviation from the manifold regarded as zero at the inner end of a layer.
    pub tol: f64,
    pub newton: NewtonOptions,
    pub hyperbolicity_floor: f64,
}

impl Default for TransientConfig {
    fn default() -> Self {
        Self { dt: 0.01, tol: 1e-10, newton: NewtonOptions::default(), hyperbolicity_floor: DEFAULT_FLOOR }
    }
}

/// Cubic Hermite interpolation of a base trajectory in slow time.
///
/// `x0` and `eta` use the node derivatives `Lambda` and `d_eta Lambda`; `phi` and
/// `d_eta` are interpolated linearly.
pub struct BaseInterpolant<'a> {
    sys: &'a dyn SlowFastSystem,
    base: &'a BaseTrajectory,
    lambda: Vec<DVector<f64>>,
    eta_rate: Vec<DVector<f64>>,
}

impl<'a> BaseInterpolant<'a> {
    pub fn new(sys: &'a dyn SlowFastSystem, base: &'a BaseTrajectory) -> Result<Self> {
        if base.len() < 2 {
            return Err(Error::Dimension("base trajectory needs at least two nodes".into()));
        }
        if base.phi_values.is_none() {
            return Err(Error::Dimension("base trajectory was integrated without fibers".into()));
        }
        let eps = sys.epsilon();
        let lambda: Vec<DVector<f64>> =
            base.x_values.iter().zip(&base.eta_values).map(|(x, e)| sys.slow_field(x, e) / eps).collect();
        let eta_rate = base.d_eta_values.iter().zip(&lambda).map(|(d, l)| d * l).collect();
        Ok(Self { sys, base, lambda, eta_rate })
    }

    fn locate(&self, tau: f64) -> (usize, f64) {
        let t = &self.base.tau_mesh;
        let n = t.len();
        let i = match t.binary_search_by(|p| p.partial_cmp(&tau).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        (i, (tau - t[i]) / (t[i + 1] - t[i]))
    }

    pub fn x0(&self, tau: f64) -> DVector<f64> {
        let (i, _) = self.locate(tau);
        let b = self.base;
        hermite(b.tau_mesh[i], b.tau_mesh[i + 1], &b.x_values[i], &self.lambda[i], &b.x_values[i + 1], &self.lambda[i + 1], tau)
    }

    pub fn eta(&self, tau: f64) -> DVector<f64> {
        let (i, _) = self.locate(tau);
        let b = self.base;
        hermite(
            b.tau_mesh[i],
            b.tau_mesh[i + 1],
            &b.eta_values[i],
            &self.eta_rate[i],
            &b.eta_values[i + 1],
            &self.eta_rate[i + 1],
            tau,
        )
    }

    pub fn d_eta(&self, tau: f64) -> DMatrix<f64> {
        let (i, s) = self.locate(tau);
        &self.base.d_eta_values[i] * (1.0 - s) + &self.base.d_eta_values[i + 1] * s
    }

    pub fn phi(&self, tau: f64) -> DMatrix<f64> {
        let (i, s) = self.locate(tau);
        let p = self.base.phi_values.as_ref().unwrap();
        &p[i] * (1.0 - s) + &p[i + 1] * s
    }

    /// `phi (I + d_eta phi)^{-1}` at `tau`.
    pub fn gain(&self, tau: f64) -> Result<DMatrix<f64>> {
        fiber_gain(&self.phi(tau), &self.d_eta(tau))
    }

    /// `(I + d_eta phi)^{-1}` at `tau`.
    pub fn correction_inverse(&self, tau: f64) -> Result<DMatrix<f64>> {
        let nf = self.sys.n_fast();
        (DMatrix::identity(nf, nf) + self.d_eta(tau) * self.phi(tau)).try_inverse().ok_or(Error::SingularCorrection)
    }

    /// Stable/unstable split of `A = -d_eta dX/dy + dY/dy` at the base point.
    pub fn split(&self, tau: f64, floor: f64) -> Result<SpectralSplit> {
        let (x, e) = (self.x0(tau), self.eta(tau));
        let a = -self.d_eta(tau) * self.sys.dslow_dy(&x, &e) + self.sys.dfast_dy(&x, &e);
        split_spectrum(&a, floor)
    }

    /// Slow state attached to the fast state `y` at slow time `tau`.
    pub fn slow_state(&self, tau: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.x0(tau) + self.gain(tau)? * (y - self.eta(tau)))
    }
}

/// A solved boundary layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    /// Fast-time mesh and fast states; `t` is absolute fast time.
    pub mesh: HermiteMesh,
    pub duration: f64,
    /// Deviation size at the pinned end.
    pub r: f64,
    /// Decay rate used for the duration.
    pub rate: f64,
    pub pin_residual: f64,
    pub end_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Entry,
    Slow,
    Exit,
}

impl Segment {
    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Entry => "entry",
            Segment::Slow => "slow",
            Segment::Exit => "exit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchedPoint {
    pub t: f64,
    pub tau: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub segment: Segment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransientSolution {
    pub base: BaseTrajectory,
    pub entry: Option<Layer>,
    pub exit: Option<Layer>,
    pub entry_pin: Pin,
    pub exit_pin: Pin,
    pub t0: f64,
    pub t1: f64,
    pub stitched: Vec<StitchedPoint>,
    pub layer_seconds: f64,
}

impl TransientSolution {
    /// Largest boundary-condition residual over both layers.
    pub fn bc_residual(&self) -> f64 {
        [&self.entry, &self.exit]
            .iter()
            .filter_map(|l| l.as_ref())
            .map(|l| l.pin_residual.max(l.end_residual))
            .fold(0.0, f64::max)
    }

    /// Columns: t, tau, x.., y.., segment.
    pub fn csv_rows(&self) -> (Vec<String>, Vec<(Vec<f64>, &'static str)>) {
        let ns = self.stitched[0].x.len();
        let nf = self.stitched[0].y.len();
        let mut header = vec!["t".to_string(), "tau".to_string()];
        header.extend((0..ns).map(|i| format!("x{i}")));
        header.extend((0..nf).map(|i| format!("y{i}")));
        header.push("segment".into());
        let rows = self
            .stitched
            .iter()
            .map(|p| {
                let mut r = vec![p.t, p.tau];
                r.extend(p.x.iter());
                r.extend(p.y.iter());
                (r, p.segment.as_str())
            })
            .collect();
        (header, rows)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum End {
    Entry,
    Exit,
}

/// Rows and right-hand side of a pin in `y`, plus the deviation it prescribes.
fn pin_rows(
    pin: &Pin,
    interp: &BaseInterpolant,
    tau: f64,
    split: &SpectralSplit,
    end: End,
) -> Result<(LinearBc, DVector<f64>)> {
    let nf = interp.sys.n_fast();
    let eta = interp.eta(tau);
    let (rows_sel, basis) = match end {
        End::Entry => (split.stable_rows(), &split.basis_s),
        End::Exit => (split.unstable_rows(), &split.basis_u),
    };
    let k = basis.ncols();
    match pin {
        Pin::Raw(fix) => {
            if fix.len() != k || fix.iter().any(|&(i, _)| i >= nf) {
                return Err(Error::Dimension(format!("raw pin needs {k} in-range components, got {}", fix.len())));
            }
            let mut rows = DMatrix::zeros(k, nf);
            let mut rhs = DVector::zeros(k);
            let mut sub = DMatrix::zeros(k, k);
            let mut dev = DVector::zeros(k);
            for (r, &(i, v)) in fix.iter().enumerate() {
                rows[(r, i)] = 1.0;
                rhs[r] = v;
                sub.row_mut(r).copy_from(&basis.row(i));
                dev[r] = v - eta[i];
            }
            let c = sub.lu().solve(&dev).ok_or(Error::SingularJacobian)?;
            Ok((LinearBc::new(rows, rhs), basis * c))
        }
        Pin::Split(target) => {
            if target.len() != nf {
                return Err(Error::Dimension(format!("split pin needs {nf} components, got {}", target.len())));
            }
            let cinv = interp.correction_inverse(tau)?;
            let rows = &rows_sel * &cinv;
            let rhs = &rows * &eta + &rows_sel * target;
            let corr = DMatrix::identity(nf, nf) + interp.d_eta(tau) * interp.phi(tau);
            let dev = corr * basis * (&rows_sel * target);
            Ok((LinearBc::new(rows, rhs), dev))
        }
    }
}

fn layer_mesh(start: f64, duration: f64, dt: f64) -> Vec<f64> {
    let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|k| start + duration * k as f64 / n as f64).collect()
}

/// Fast-time duration of a layer with deviation `r` at its pinned end.
fn layer_duration(rate: f64, r: f64, cfg: &TransientConfig) -> Result<f64> {
    if r <= cfg.tol {
        return Ok(cfg.dt);
    }
    Ok(boundary_layer_time(rate, r, cfg.tol)?.max(cfg.dt))
}

struct LayerSpec {
    t: Vec<f64>,
    start: LinearBc,
    end: LinearBc,
    guess: Vec<DVector<f64>>,
}

fn solve_layer(sys: &dyn SlowFastSystem, interp: &BaseInterpolant, spec: LayerSpec, cfg: &TransientConfig) -> Result<HermiteMesh> {
    let eps = sys.epsilon();
    let f = |t: f64, y: &DVector<f64>| -> DVector<f64> {
        let tau = eps * t;
        let x = interp.x0(tau) + interp.gain(tau).expect("checked before the solve") * (y - interp.eta(tau));
        sys.fast_field(&x, y)
    };
    let jac = |t: f64, y: &DVector<f64>| -> DMatrix<f64> {
        let tau = eps * t;
        let g = interp.gain(tau).expect("checked before the solve");
        let x = interp.x0(tau) + &g * (y - interp.eta(tau));
        sys.dfast_dy(&x, y) + sys.dfast_dx(&x, y) * g
    };
    for &t in [spec.t[0], *spec.t.last().unwrap()].iter() {
        interp.gain(eps * t)?;
    }
    solve_collocation(f, jac, &spec.t, spec.guess, &spec.start, &spec.end, &cfg.newton)
}

/// Entry layer on `[0, t0]`: pinned stable part at 0, vanishing unstable part at `t0`.
///
/// Returns `None` when the fast linearization has no stable directions.
pub fn solve_entry_bvp(
    sys: &dyn SlowFastSystem,
    interp: &BaseInterpolant,
    pin: &Pin,
    cfg: &TransientConfig,
    max_duration: f64,
) -> Result<Option<Layer>> {
    let eps = sys.epsilon();
    let split0 = interp.split(0.0, cfg.hyperbolicity_floor)?;
    if split0.n_stable() == 0 {
        return Ok(None);
    }
    let (start, dev) = pin_rows(pin, interp, 0.0, &split0, End::Entry)?;
    let r = dev.norm();
    let rate = split0.lambda_s;
    let duration = layer_duration(rate, r, cfg)?.min(max_duration);
    let t = layer_mesh(0.0, duration, cfg.dt);
    let t_end = *t.last().unwrap();
    let split1 = interp.split(eps * t_end, cfg.hyperbolicity_floor)?;
    let u = split1.unstable_rows();
    let end = LinearBc::new(u.clone(), &u * interp.eta(eps * t_end));
    let guess = t.iter().map(|&tk| interp.eta(eps * tk) + &dev * (1.0 - tk / duration)).collect();
    let mesh = solve_layer(sys, interp, LayerSpec { t, start: start.clone(), end: end.clone(), guess }, cfg)?;
    let pin_residual = start.residual(&mesh.states[0]).amax();
    let end_residual = end.residual(mesh.states.last().unwrap()).amax();
    Ok(Some(Layer { mesh, duration, r, rate, pin_residual, end_residual }))
}

/// Exit layer on `[T/eps - t1, T/eps]`, the mirror image of [`solve_entry_bvp`].
pub fn solve_exit_bvp(
    sys: &dyn SlowFastSystem,
    interp: &BaseInterpolant,
    pin: &Pin,
    cfg: &TransientConfig,
    max_duration: f64,
) -> Result<Option<Layer>> {
    let eps = sys.epsilon();
    let big_t = interp.base.end_time();
    let split_t = interp.split(big_t, cfg.hyperbolicity_floor)?;
    if split_t.n_unstable() == 0 {
        return Ok(None);
    }
    let (end, dev) = pin_rows(pin, interp, big_t, &split_t, End::Exit)?;
    let r = dev.norm();
    let rate = split_t.lambda_u;
    let duration = layer_duration(rate, r, cfg)?.min(max_duration);
    let t_final = big_t / eps;
    let t_start = t_final - duration;
    let mut t = layer_mesh(t_start, duration, cfg.dt);
    *t.last_mut().unwrap() = t_final;
    let split_l = interp.split(eps * t_start, cfg.hyperbolicity_floor)?;
    let s = split_l.stable_rows();
    let start = LinearBc::new(s.clone(), &s * interp.eta(eps * t_start));
    let guess = t.iter().map(|&tk| interp.eta(eps * tk) + &dev * ((tk - t_start) / duration)).collect();
    let mesh = solve_layer(sys, interp, LayerSpec { t, start: start.clone(), end: end.clone(), guess }, cfg)?;
    let pin_residual = end.residual(mesh.states.last().unwrap()).amax();
    let end_residual = start.residual(&mesh.states[0]).amax();
    Ok(Some(Layer { mesh, duration, r, rate, pin_residual, end_residual }))
}

/// Solves both layers (concurrently) and stitches them to the base trajectory.
pub fn assemble_transient(
    sys: &dyn SlowFastSystem,
    base: BaseTrajectory,
    entry_pin: Pin,
    exit_pin: Pin,
    cfg: &TransientConfig,
) -> Result<TransientSolution> {
    let clock = Instant::now();
    let eps = sys.epsilon();
    let (entry, exit, t0, t1, stitched) = {
        let interp = BaseInterpolant::new(sys, &base)?;
        let span = base.end_time() / eps;
        // each layer may take at most half the span when both are present
        let (entry, exit) = rayon::join(
            || solve_entry_bvp(sys, &interp, &entry_pin, cfg, span),
            || solve_exit_bvp(sys, &interp, &exit_pin, cfg, span),
        );
        let (mut entry, mut exit) = (entry?, exit?);
        let t0 = entry.as_ref().map_or(0.0, |l| l.duration);
        let t1 = exit.as_ref().map_or(0.0, |l| l.duration);
        if t0 + t1 > span {
            entry = solve_entry_bvp(sys, &interp, &entry_pin, cfg, 0.5 * span)?;
            exit = solve_exit_bvp(sys, &interp, &exit_pin, cfg, 0.5 * span)?;
        }
        let t0 = entry.as_ref().map_or(0.0, |l| l.duration);
        let t1 = exit.as_ref().map_or(0.0, |l| l.duration);
        let stitched = stitch(&interp, entry.as_ref(), exit.as_ref(), eps, t0, t1)?;
        (entry, exit, t0, t1, stitched)
    };
    Ok(TransientSolution {
        base,
        entry,
        exit,
        entry_pin,
        exit_pin,
        t0,
        t1,
        stitched,
        layer_seconds: clock.elapsed().as_secs_f64(),
    })
}

fn stitch(
    interp: &BaseInterpolant,
    entry: Option<&Layer>,
    exit: Option<&Layer>,
    eps: f64,
    t0: f64,
    t1: f64,
) -> Result<Vec<StitchedPoint>> {
    let base = interp.base;
    let big_t = base.end_time();
    let mut out = Vec::new();
    let margin = 1e-6 * base.dtau.abs();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    if let Some(l) = entry {
        for (t, y) in l.mesh.t_nodes.iter().zip(&l.mesh.states) {
            let tau = eps * t;
            out.push(StitchedPoint { t: *t, tau, x: interp.slow_state(tau, y)?, y: y.clone(), segment: Segment::Entry });
        }
        lo = eps * t0;
    }
    if exit.is_some() {
        hi = big_t - eps * t1;
    }
    for k in 0..base.len() {
        let tau = base.tau_mesh[k];
        let inside = (entry.is_none() || tau > lo + margin) && (exit.is_none() || tau < hi - margin);
        if inside {
            out.push(StitchedPoint {
                t: tau / eps,
                tau,
                x: base.x_values[k].clone(),
                y: base.eta_values[k].clone(),
                segment: Segment::Slow,
            });
        }
    }
    if let Some(l) = exit {
        for (t, y) in l.mesh.t_nodes.iter().zip(&l.mesh.states) {
            let tau = eps * t;
            out.push(StitchedPoint { t: *t, tau, x: interp.slow_state(tau, y)?, y: y.clone(), segment: Segment::Exit });
        }
    }
    Ok(out)
}

/// Boundary conditions for the full-space reference matching a transient solution:
/// the slow state at `tau = 0` and the same fast pins at both ends.
pub fn reference_bcs(sys: &dyn SlowFastSystem, sol: &TransientSolution, cfg: &TransientConfig) -> Result<(LinearBc, LinearBc)> {
    let ns = sys.n_slow();
    let nf = sys.n_fast();
    let m = ns + nf;
    let interp = BaseInterpolant::new(sys, &sol.base)?;
    let big_t = sol.base.end_time();
    let lift = |bc: &LinearBc| {
        let mut rows = DMatrix::zeros(bc.count(), m);
        rows.view_mut((0, ns), (bc.count(), nf)).copy_from(&bc.rows);
        (rows, bc.rhs.clone())
    };
    let (s_rows, s_rhs) = if sol.entry.is_some() {
        let split = interp.split(0.0, cfg.hyperbolicity_floor)?;
        lift(&pin_rows(&sol.entry_pin, &interp, 0.0, &split, End::Entry)?.0)
    } else {
        (DMatrix::zeros(0, m), DVector::zeros(0))
    };
    let (e_rows, e_rhs) = if sol.exit.is_some() {
        let split = interp.split(big_t, cfg.hyperbolicity_floor)?;
        lift(&pin_rows(&sol.exit_pin, &interp, big_t, &split, End::Exit)?.0)
    } else {
        (DMatrix::zeros(0, m), DVector::zeros(0))
    };
    let k0 = ns + s_rows.nrows();
    let mut rows = DMatrix::zeros(k0, m);
    let mut rhs = DVector::zeros(k0);
    for i in 0..ns {
        rows[(i, i)] = 1.0;
        rhs[i] = sol.stitched[0].x[i];
    }
    rows.view_mut((ns, 0), (s_rows.nrows(), m)).copy_from(&s_rows);
    rhs.rows_mut(ns, s_rows.nrows()).copy_from(&s_rhs);
    Ok((LinearBc::new(rows, rhs), LinearBc::new(e_rows, e_rhs)))
}

/// Full-space collocation in slow time with field `(X^eps, Y) / eps` on the given
/// slow-time mesh, started from `guess` (stacked `(x, y)` per node).
pub fn smst_reference(
    sys: &dyn SlowFastSystem,
    tau: &[f64],
    guess: Vec<DVector<f64>>,
    start: &LinearBc,
    end: &LinearBc,
    newton: &NewtonOptions,
) -> Result<HermiteMesh> {
    let eps = sys.epsilon();
    let f = |_: f64, z: &DVector<f64>| sys.full_field(z) / eps;
    let jac = |_: f64, z: &DVector<f64>| sys.full_jacobian(z) / eps;
    solve_collocation(f, jac, tau, guess, start, end, newton)
}

/// Runs [`smst_reference`] on the stitched mesh of `sol`, started from the stitched states.
pub fn reference_for(sys: &dyn SlowFastSystem, sol: &TransientSolution, cfg: &TransientConfig) -> Result<HermiteMesh> {
    let (start, end) = reference_bcs(sys, sol, cfg)?;
    let tau: Vec<f64> = sol.stitched.iter().map(|p| p.tau).collect();
    let guess = sol.stitched.iter().map(|p| stack(&p.x, &p.y)).collect();
    smst_reference(sys, &tau, guess, &start, &end, &cfg.newton)
}

/// Largest node-wise Euclidean distance between a stitched solution and a reference mesh on the same nodes.
pub fn max_deviation(sol: &TransientSolution, reference: &HermiteMesh) -> f64 {
    sol.stitched
        .iter()
        .zip(&reference.states)
        .map(|(p, z)| (stack(&p.x, &p.y) - z).norm())
        .fold(0.0, f64::max)
}

/// Scaling part `eps r^2 / lambda` of the transient error estimate.
pub fn transient_error_bound(lambda: f64, epsilon: f64, r: f64) -> f64 {
    epsilon * r * r / lambda
}
