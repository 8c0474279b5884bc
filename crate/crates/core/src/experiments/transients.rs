//! Trajectories with entry and exit transients, and their full-space references.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{LinearBvp, ReciprocalInhibition};
use crate::reduced::{integrate_reduced, BaseTrajectory, Direction, ReducedOptions};
use crate::so::{slow_manifold_at, SoConfig};
use crate::sof::sof_iterate;
use crate::transient::{assemble_transient, max_deviation, reference_for, Pin, TransientConfig, TransientSolution};

use super::flows::ri_base;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearBvpResult {
    pub so_iterations: usize,
    /// `|eta - 1|` after the SO solve.
    pub eta_error: f64,
    pub sof_iterations: usize,
    /// `|phi + eps|` after the SOF solve.
    pub phi_error: f64,
    /// Sup-norm of `u - (tau + exp(-tau/eps))` over the stitched nodes.
    pub max_error: f64,
    pub base_seconds: f64,
    pub solution: TransientSolution,
}

/// `eps u'' + u' = 1`, `u(0) = u(1) = 1`: base from `u = 0` and a stable entry layer.
pub fn linear_bvp(eps: f64, dtau: f64, h: f64, cfg: &TransientConfig) -> Result<LinearBvpResult> {
    let sys = LinearBvp::new(eps);
    let so_cfg = SoConfig::default();
    let x_mid = DVector::from_element(1, 0.5);
    let so = slow_manifold_at(&sys, &x_mid, h, &DVector::from_element(1, 1.0), &so_cfg)?;
    let sof = sof_iterate(&sys, &so, &so_cfg)?;
    let opts = ReducedOptions { so: so_cfg, h, with_fibers: true };
    let (base, base_seconds) = timed(|| integrate_reduced(&sys, &DVector::zeros(1), &DVector::from_element(1, 1.0), 1.0, dtau, Direction::Forward, &opts));
    let base = base?;
    // u'(0) = 1 - 1/eps, so the deviation from eta = 1 is -1/eps
    let solution = assemble_transient(&sys, base, Pin::Split(DVector::from_element(1, -1.0 / eps)), Pin::Raw(vec![]), cfg)?;
    let max_error = solution.stitched.iter().map(|p| (p.x[0] - sys.exact(p.tau)).abs()).fold(0.0, f64::max);
    Ok(LinearBvpResult {
        so_iterations: so.point.iterations,
        eta_error: (so.point.eta[0] - 1.0).abs(),
        sof_iterations: sof.projection.iterations,
        phi_error: (sof.projection.phi[(0, 0)] + eps).abs(),
        max_error,
        base_seconds,
        solution,
    })
}

/// Pins `v2(0) = eta2 + r` and `v1(T) = eta1 + r` on a reciprocal-inhibition base.
pub fn ri_pins(base: &BaseTrajectory, r: f64) -> (Pin, Pin) {
    let first = &base.eta_values[0];
    let last = base.eta_values.last().unwrap();
    (Pin::Raw(vec![(1, first[1] + r)]), Pin::Raw(vec![(0, last[0] + r)]))
}

/// Wall-clock seconds per phase of a run (or of a whole sweep).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub base_seconds: f64,
    pub layer_seconds: f64,
    pub reference_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransientRun {
    pub eps: f64,
    pub r: f64,
    pub solution: TransientSolution,
    pub bc_residual: f64,
    /// Largest node-wise distance to the full-space reference, when it converged.
    pub deviation: Option<f64>,
    pub reference_iterations: Option<usize>,
    pub reference_error: Option<String>,
    pub timings: PhaseTimings,
}

impl TransientRun {
    pub fn entry_iterations(&self) -> usize {
        self.solution.entry.as_ref().map_or(0, |l| l.mesh.newton_iterations)
    }

    pub fn exit_iterations(&self) -> usize {
        self.solution.exit.as_ref().map_or(0, |l| l.mesh.newton_iterations)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let clock = Instant::now();
    let out = f();
    (out, clock.elapsed().as_secs_f64())
}

/// Reciprocal-inhibition transients for each `(eps, r)` case. Base trajectories are
/// shared between cases with the same `eps`. Phases run one after the other, each
/// in parallel over its cases.
pub fn ri_runs(
    sys: &ReciprocalInhibition,
    cases: &[(f64, f64)],
    dtau: f64,
    h: f64,
    cfg: &TransientConfig,
    with_reference: bool,
) -> Result<(Vec<TransientRun>, PhaseTimings)> {
    let mut eps: Vec<f64> = Vec::new();
    for &(e, _) in cases {
        if !eps.contains(&e) {
            eps.push(e);
        }
    }
    let system = |e: f64| ReciprocalInhibition { epsilon: e, ..sys.clone() };

    let (bases, base_seconds) = timed(|| {
        eps.par_iter()
            .map(|&e| {
                let (b, secs) = timed(|| ri_base(&system(e), dtau, h, true));
                b.map(|b| (b, secs))
            })
            .collect::<Result<Vec<_>>>()
    });
    let bases = bases?;
    let base_of = |e: f64| &bases[eps.iter().position(|&v| v == e).unwrap()];

    let (solutions, layer_seconds) = timed(|| {
        cases
            .par_iter()
            .map(|&(e, r)| {
                let base = base_of(e).0.clone();
                let (entry, exit) = ri_pins(&base, r);
                assemble_transient(&system(e), base, entry, exit, cfg)
            })
            .collect::<Result<Vec<_>>>()
    });
    let solutions = solutions?;

    let (references, reference_seconds) = timed(|| {
        solutions
            .par_iter()
            .zip(cases)
            .map(|(sol, &(e, _))| {
                if !with_reference {
                    return (None, 0.0);
                }
                let (res, secs) = timed(|| reference_for(&system(e), sol, cfg));
                (Some(res), secs)
            })
            .collect::<Vec<_>>()
    });

    let runs = solutions
        .into_iter()
        .zip(references)
        .zip(cases)
        .map(|((solution, (reference, ref_secs)), &(e, r))| {
            let (deviation, reference_iterations, reference_error) = match reference {
                Some(Ok(mesh)) => (Some(max_deviation(&solution, &mesh)), Some(mesh.newton_iterations), None),
                Some(Err(err)) => (None, None, Some(err.to_string())),
                None => (None, None, None),
            };
            TransientRun {
                eps: e,
                r,
                bc_residual: solution.bc_residual(),
                timings: PhaseTimings {
                    base_seconds: base_of(e).1,
                    layer_seconds: solution.layer_seconds,
                    reference_seconds: ref_secs,
                },
                solution,
                deviation,
                reference_iterations,
                reference_error,
            }
        })
        .collect();
    Ok((runs, PhaseTimings { base_seconds, layer_seconds, reference_seconds: if with_reference { reference_seconds } else { 0.0 } }))
}
