//! Base trajectories on the slow manifold and their references.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::differencing::choose_h;
use crate::error::{Error, Result};
use crate::models::{ReciprocalInhibition, Toy, HORIZON, Q_START, V_START};
use crate::ode::{Control, Dopri5, OdeOptions};
use crate::reduced::{integrate_reduced, BaseTrajectory, Direction, ReducedOptions};
use crate::series::toy_series;
use crate::so::{slow_manifold_at, SoConfig};
use crate::sof::{sof_iterate, tangent_basis};
use crate::spectral::{fast_linearization, split_spectrum, DEFAULT_FLOOR};
use crate::system::{critical_manifold, stack, split_state, SlowFastSystem};

/// Reduced toy flow `x' = X(x, eta(x))` with `eta` from the epsilon-series, sampled at `times` (sorted).
pub fn toy_reduced_reference(eps: f64, x0: &DVector<f64>, times: &[f64]) -> Result<Vec<DVector<f64>>> {
    let f = |_: f64, x: &DVector<f64>| {
        let e = toy_series([x[0], x[1]], 5, 6).eta_at(eps);
        DVector::from_vec(vec![x[0].cos() + e[0] + e[1] * x[1].cos(), -x[1].sin() + e[1] + e[0] * x[0].sin()])
    };
    let ode = Dopri5::new(f, OdeOptions::tight(1e-12));
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut x) = (0.0, x0.clone());
    for &tk in times {
        if tk != t {
            x = ode.solve(t, &x, tk)?.last().1.clone();
            t = tk;
        }
        out.push(x.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rk4Run {
    pub dtau: f64,
    pub h: f64,
    /// Largest Euclidean distance to the reference over all nodes.
    pub max_deviation: f64,
    pub end_deviation: f64,
    pub trajectory: BaseTrajectory,
    pub reference: Vec<DVector<f64>>,
}

pub const TOY_START: [f64; 2] = [-0.5, -0.7];
pub const TOY_HORIZON: f64 = 10.0;

/// Modified RK4 on the toy model for each step in `dtaus`, compared with
/// [`toy_reduced_reference`]. `h` defaults to [`choose_h`].
pub fn toy_rk4(eps: f64, dtaus: &[f64], horizon: f64, h: Option<f64>) -> Result<Vec<Rk4Run>> {
    let sys = Toy::new(eps);
    let x0 = DVector::from_column_slice(&TOY_START);
    let runs: Vec<(f64, f64, BaseTrajectory)> = dtaus
        .par_iter()
        .map(|&dtau| {
            let h = h.unwrap_or_else(|| choose_h(dtau, eps));
            let opts = ReducedOptions { so: SoConfig::default(), h, with_fibers: false };
            integrate_reduced(&sys, &x0, &DVector::zeros(2), horizon, dtau, Direction::Forward, &opts).map(|t| (dtau, h, t))
        })
        .collect::<Result<_>>()?;
    let mut times: Vec<f64> = runs.iter().flat_map(|r| r.2.tau_mesh.iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let reference = toy_reduced_reference(eps, &x0, &times)?;
    let lookup = |t: f64| &reference[times.binary_search_by(|p| p.total_cmp(&t)).expect("node time is sampled")];
    Ok(runs
        .into_iter()
        .map(|(dtau, h, trajectory)| {
            let refs: Vec<DVector<f64>> = trajectory.tau_mesh.iter().map(|&t| lookup(t).clone()).collect();
            let devs: Vec<f64> = trajectory.x_values.iter().zip(&refs).map(|(x, r)| (x - r).norm()).collect();
            Rk4Run {
                dtau,
                h,
                max_deviation: devs.iter().cloned().fold(0.0, f64::max),
                end_deviation: *devs.last().unwrap(),
                trajectory,
                reference: refs,
            }
        })
        .collect())
}

/// Base trajectory of the reciprocal-inhibition segment from [`Q_START`] over [`HORIZON`].
pub fn ri_base(sys: &ReciprocalInhibition, dtau: f64, h: f64, with_fibers: bool) -> Result<BaseTrajectory> {
    let opts = ReducedOptions { so: SoConfig::default(), h, with_fibers };
    integrate_reduced(
        sys,
        &DVector::from_column_slice(&Q_START),
        &DVector::from_column_slice(&V_START),
        HORIZON,
        dtau,
        Direction::Forward,
        &opts,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleBracket {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    /// Unit direction in the full space along which the starts are displaced.
    pub direction: Vec<f64>,
    pub displacements: Vec<f64>,
    /// Side (+1 / -1, 0 if still close at the end) of the `+d` and `-d` runs.
    pub sides: Vec<(i8, i8)>,
    /// `log10` of the largest displacement whose pair leaves to the same side;
    /// `None` when every pair separates.
    pub bracket_exponent: Option<i32>,
}

/// Displaces the manifold point at `x` by `+-d` along the unstable fiber direction and
/// integrates the full system (fast time, up to `t_max`) until the fast deviation
/// exceeds `leave`.
pub fn saddle_bracket(
    sys: &dyn SlowFastSystem,
    x: &DVector<f64>,
    h: f64,
    guess: &DVector<f64>,
    exponents: &[i32],
    leave: f64,
    t_max: f64,
) -> Result<SaddleBracket> {
    let cfg = SoConfig::default();
    let so = slow_manifold_at(sys, x, h, guess, &cfg)?;
    let sof = sof_iterate(sys, &so, &cfg)?;
    let mp = &so.point;
    let split = split_spectrum(&fast_linearization(sys, mp), DEFAULT_FLOOR)?;
    if split.n_unstable() == 0 {
        return Err(Error::BadParams("the manifold has no unstable directions".into()));
    }
    let dir = tangent_basis(&sof.projection.phi, &mp.d_eta) * split.basis_u.column(0);
    let dir = dir.normalize();
    let probe = split.unstable_rows().row(0).transpose();
    let ns = sys.n_slow();
    let base = stack(x, &mp.eta);
    let ode = Dopri5::new(|_: f64, z: &DVector<f64>| sys.full_field(z), OdeOptions::tight(1e-13));
    let side = |d: f64| -> Result<i8> {
        let start = &base + &dir * d;
        let mut guess = mp.eta.clone();
        let mut out = 0i8;
        let mut fail = None;
        ode.solve_with(0.0, &start, t_max, |_, z| {
            let (xs, ys) = split_state(z, ns);
            let eta0 = match sys.eta0_hint(&xs) {
                Some(e) => e,
                None => match critical_manifold(sys, &xs, &guess, 1e-12) {
                    Ok(e) => e,
                    Err(e) => {
                        fail = Some(e);
                        return Control::Stop;
                    }
                },
            };
            let w = probe.dot(&(ys - &eta0));
            guess = eta0;
            if w.abs() > leave {
                out = w.signum() as i8;
                return Control::Stop;
            }
            Control::Continue
        })?;
        match fail {
            Some(e) => Err(e),
            None => Ok(out),
        }
    };
    let displacements: Vec<f64> = exponents.iter().map(|&k| 10f64.powi(k)).collect();
    let sides: Vec<(i8, i8)> = displacements
        .par_iter()
        .map(|&d| Ok((side(d)?, side(-d)?)))
        .collect::<Result<_>>()?;
    let bracket_exponent = exponents.iter().zip(&sides).find(|(_, s)| s.0 == s.1).map(|(k, _)| *k);
    Ok(SaddleBracket {
        x: x.iter().copied().collect(),
        eta: mp.eta.iter().copied().collect(),
        direction: dir.iter().copied().collect(),
        displacements,
        sides,
        bracket_exponent,
    })
}
