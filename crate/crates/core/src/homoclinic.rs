//! Homoclinic orbit of the FitzHugh-Nagumo traveling-wave system, assembled from
//! four pieces: a fast jump from the rest state up to the right branch `M^r`, a
//! slow segment on `M^r`, a fast jump down to the left branch `M^l`, and a slow
//! return along `M^l`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FitzHughNagumo;
use crate::ode::{Crossing, Dopri5, OdeOptions};
use crate::reduced::{node, rk4_step, BaseTrajectory, ReducedOptions};
use crate::so::{slow_manifold_at, ManifoldPoint, SoConfig};
use crate::sof::{sof_iterate, tangent_basis};
use crate::spectral::split_spectrum;
use crate::system::{stack, SlowFastSystem};
use crate::transient::{assemble_transient, Pin, TransientConfig, TransientSolution};

/// Knobs of the pipeline. All of them are echoed in the JSON summary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HomoclinicConfig {
    pub epsilon: f64,
    pub c_bracket: (f64, f64),
    /// Bisection stops once the bracket is narrower than this.
    pub tol_c: f64,
    /// Offset of the first shot along the strong unstable eigenvector of the rest state.
    pub shot_offset: f64,
    /// A shot is "up" once `y1` exceeds this level.
    pub up_level: f64,
    /// A shot is "down" once `y1` falls below this level with `y2 < 0` after `down_after`.
    pub down_level: f64,
    pub down_after: f64,
    pub shot_t_max: f64,
    /// `y1` of the matching section.
    pub section: f64,
    /// Distance from a slow manifold along its fiber direction where matching shots start.
    pub displacement: f64,
    pub match_tol: f64,
    pub match_max_iter: usize,
    /// Number of points in the `F(x, x)` scan used to start the matching Newton.
    pub scan_points: usize,
    /// Slow coordinate where the backward sweep of `M^l` starts.
    pub ml_offset: f64,
    /// `gamma_4` stops once `|z|` is below this radius.
    pub gamma4_radius: f64,
    pub h: f64,
    pub dtau: f64,
    pub ode_tol: f64,
}

impl HomoclinicConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            c_bracket: (1.2, 1.3),
            tol_c: 1e-12,
            shot_offset: 1e-8,
            up_level: 1.5,
            down_level: 0.5,
            down_after: 5.0,
            shot_t_max: 2000.0,
            section: 0.5,
            displacement: 1e-6,
            match_tol: 1e-10,
            match_max_iter: 30,
            scan_points: 24,
            ml_offset: 1e-8,
            gamma4_radius: 1e-6,
            h: 1e-4,
            dtau: 0.01,
            ode_tol: 1e-12,
        }
    }

    fn ode(&self) -> OdeOptions {
        OdeOptions::tight(self.ode_tol)
    }

    fn reduced(&self, with_fibers: bool) -> ReducedOptions {
        ReducedOptions { so: SoConfig::default(), h: self.h, with_fibers }
    }
}

/// A trajectory piece: independent variable and full states `(x, y1, y2)`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Orbit {
    pub t: Vec<f64>,
    pub z: Vec<DVector<f64>>,
}

impl Orbit {
    pub fn first(&self) -> &DVector<f64> {
        &self.z[0]
    }

    pub fn last(&self) -> &DVector<f64> {
        self.z.last().unwrap()
    }

    pub fn csv_rows(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let header = ["t", "x", "y1", "y2"].iter().map(|s| s.to_string()).collect();
        let rows = self.t.iter().zip(&self.z).map(|(t, z)| vec![*t, z[0], z[1], z[2]]).collect();
        (header, rows)
    }
}

fn full_field(sys: &FitzHughNagumo) -> impl Fn(f64, &DVector<f64>) -> DVector<f64> + '_ {
    move |_, z| sys.full_field(z)
}

/// Start of the first shot: `offset` along the eigenvector of the largest eigenvalue
/// of the linearization at the rest state, oriented towards `y1 > 0`.
pub fn strong_unstable_start(sys: &FitzHughNagumo, offset: f64) -> Result<DVector<f64>> {
    let z0 = DVector::zeros(3);
    let j = sys.full_jacobian(&z0);
    let eig = j.clone().complex_eigenvalues();
    let lambda = eig.iter().filter(|l| l.im.abs() < 1e-12).map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !(lambda > 0.0) {
        return Err(Error::NonHyperbolic { real_part: lambda });
    }
    // the eigenvector spans the kernel of J - lambda I
    let shifted = j - DMatrix::identity(3, 3) * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.ok_or(Error::SingularJacobian)?;
    let k = svd.singular_values.imin();
    let mut v: DVector<f64> = vt.row(k).transpose();
    if v[1] < 0.0 {
        v = -v;
    }
    Ok(v.normalize() * offset)
}

/// Which side of the stable manifold of `M^r` the first shot ends up on:
/// `+1` above, `-1` below, `0` undecided within `shot_t_max`.
pub fn classify_speed(sys: &FitzHughNagumo, cfg: &HomoclinicConfig) -> Result<i8> {
    let z0 = strong_unstable_start(sys, cfg.shot_offset)?;
    let mut side = 0;
    Dopri5::new(full_field(sys), cfg.ode()).solve_with(0.0, &z0, cfg.shot_t_max, |t, z| {
        if z[1] > cfg.up_level {
            side = 1;
        } else if t > cfg.down_after && z[1] < cfg.down_level && z[2] < 0.0 {
            side = -1;
        }
        if side != 0 {
            crate::ode::Control::Stop
        } else {
            crate::ode::Control::Continue
        }
    })?;
    Ok(side)
}

/// Wave speed separating the two behaviours of the first shot, by multisection over
/// `jobs + 1` subintervals per round (bisection for `jobs = 1`).
pub fn find_wave_speed(base: &FitzHughNagumo, cfg: &HomoclinicConfig, jobs: usize) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = cfg.c_bracket;
    let classify = |c: f64| classify_speed(&base.with_speed(c), cfg);
    if lo == hi {
        return match classify(lo)? {
            0 => Err(Error::NoBracket { lo, hi }),
            _ => Ok((lo, 0.0)),
        };
    }
    let (s_lo, s_hi) = (classify(lo)?, classify(hi)?);
    if s_lo == 0 || s_hi == 0 || s_lo == s_hi {
        return Err(Error::NoBracket { lo, hi });
    }
    let k = jobs.max(1);
    while hi - lo > cfg.tol_c {
        let cs: Vec<f64> = (1..=k).map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64).collect();
        let sides: Vec<i8> = cs.par_iter().map(|&c| classify(c)).collect::<Result<_>>()?;
        let mut new_lo = lo;
        let mut new_hi = hi;
        for (c, s) in cs.iter().zip(&sides) {
            if *s == s_lo {
                new_lo = *c;
            } else if *s == s_hi {
                new_hi = *c;
                break;
            } else {
                return Err(Error::NoBracket { lo: new_lo, hi: *c });
            }
        }
        if new_hi - new_lo >= hi - lo {
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }
    Ok((0.5 * (lo + hi), hi - lo))
}

/// The first shot at speed `c`, ended at its first falling zero of `y2` after reaching `y1 > section`.
pub fn gamma1(sys: &FitzHughNagumo, cfg: &HomoclinicConfig) -> Result<Orbit> {
    let z0 = strong_unstable_start(sys, cfg.shot_offset)?;
    let (sol, hit) = Dopri5::new(full_field(sys), cfg.ode()).solve_until(
        0.0,
        &z0,
        cfg.shot_t_max,
        |_, z| z[2],
        Crossing::Falling,
        |_, z| z[1] > cfg.section,
    )?;
    if hit.is_none() {
        return Err(Error::SectionMiss);
    }
    Ok(Orbit { t: sol.t, z: sol.z })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
}

impl Branch {
    fn guess(self) -> DVector<f64> {
        match self {
            Branch::Left => DVector::from_vec(vec![-0.2, 0.0]),
            Branch::Right => DVector::from_vec(vec![1.0, 0.0]),
        }
    }
}

/// Manifold point and `phi` at `x` on the given branch.
pub fn branch_point(sys: &FitzHughNagumo, x: f64, branch: Branch, cfg: &HomoclinicConfig) -> Result<(ManifoldPoint, DMatrix<f64>)> {
    let so = slow_manifold_at(sys, &DVector::from_element(1, x), cfg.h, &branch.guess(), &SoConfig::default())?;
    let phi = sof_iterate(sys, &so, &SoConfig::default())?.projection.phi;
    Ok((so.point, phi))
}

/// Base point `x0 = x - phi(x) (y - eta(x))` of the fiber through `z`; `phi = 0` when `naive`.
pub fn project_onto_branch(sys: &FitzHughNagumo, z: &DVector<f64>, branch: Branch, naive: bool, cfg: &HomoclinicConfig) -> Result<f64> {
    if naive {
        return Ok(z[0]);
    }
    let (mp, phi) = branch_point(sys, z[0], branch, cfg)?;
    let y = z.rows(1, 2).into_owned();
    Ok(z[0] - (phi * (y - mp.eta))[0])
}

/// Section hit of a shot started off a slow manifold, with the derivative of
/// `(x, y2)` at the hit with respect to the base abscissa.
#[derive(Debug, Clone)]
pub struct SectionHit {
    pub value: Vector2<f64>,
    pub derivative: Vector2<f64>,
    pub orbit: Orbit,
}

/// Shoots from `(x_b, eta(x_b))` displaced along the unstable (right branch, forward)
/// or stable (left branch, backward) fiber direction to the section `y1 = section`.
pub fn branch_shot(sys: &FitzHughNagumo, x_b: f64, branch: Branch, cfg: &HomoclinicConfig) -> Result<SectionHit> {
    let (mp, phi) = branch_point(sys, x_b, branch, cfg)?;
    let a = -&mp.d_eta * sys.dslow_dy(&mp.x, &mp.eta) + sys.dfast_dy(&mp.x, &mp.eta);
    let split = split_spectrum(&a, crate::spectral::DEFAULT_FLOOR)?;
    let dir = match branch {
        Branch::Right => split.basis_u.column(0).into_owned(),
        Branch::Left => split.basis_s.column(0).into_owned(),
    };
    let mut v = (tangent_basis(&phi, &mp.d_eta) * dir).normalize();
    // head for the section
    let towards = if mp.eta[0] > cfg.section { -1.0 } else { 1.0 };
    if v[1] * towards < 0.0 {
        v = -v;
    }
    let base = stack(&mp.x, &mp.eta);
    let z0 = &base + &v * cfg.displacement;
    let dz0 = DVector::from_vec(vec![1.0, mp.d_eta[(0, 0)], mp.d_eta[(1, 0)]]);

    // state and its derivative along dz0, integrated together
    let aug = |_: f64, w: &DVector<f64>| {
        let z = w.rows(0, 3).into_owned();
        let dz = w.rows(3, 3).into_owned();
        let mut out = DVector::zeros(6);
        out.rows_mut(0, 3).copy_from(&sys.full_field(&z));
        out.rows_mut(3, 3).copy_from(&(sys.full_jacobian(&z) * dz));
        out
    };
    let mut w0 = DVector::zeros(6);
    w0.rows_mut(0, 3).copy_from(&z0);
    w0.rows_mut(3, 3).copy_from(&dz0);
    let t_end = match branch {
        Branch::Right => cfg.shot_t_max,
        Branch::Left => -cfg.shot_t_max,
    };
    let crossing = if towards < 0.0 { Crossing::Falling } else { Crossing::Rising };
    let (sol, hit) = Dopri5::new(aug, cfg.ode()).solve_until(0.0, &w0, t_end, |_, w| w[1] - cfg.section, crossing, |_, _| true)?;
    let (_, w) = hit.ok_or(Error::SectionMiss)?;
    let z = w.rows(0, 3).into_owned();
    let dz = w.rows(3, 3).into_owned();
    // moving the hit time keeps y1 on the section
    let f = sys.full_field(&z);
    if f[1].abs() < 1e-14 {
        return Err(Error::SectionMiss);
    }
    let corrected = &dz - &f * (dz[1] / f[1]);
    let orbit = Orbit { t: sol.t, z: sol.z.iter().map(|w| w.rows(0, 3).into_owned()).collect() };
    Ok(SectionHit {
        value: Vector2::new(z[0], z[2]),
        derivative: Vector2::new(corrected[0], corrected[2]),
        orbit,
    })
}

#[derive(Debug, Clone)]
pub struct Connection {
    pub x_b_r: f64,
    pub x_b_l: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Forward shot from `M^r` followed by the reversed backward shot from `M^l`.
    pub gamma3: Orbit,
}

/// `F(x, x)` on a grid of `[lo, hi]`; returns a starting pair at the first sign change of its `y2` part.
pub fn scan_connection(sys: &FitzHughNagumo, lo: f64, hi: f64, cfg: &HomoclinicConfig) -> Result<(f64, f64)> {
    let n = cfg.scan_points.max(2);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<Option<f64>> = xs
        .par_iter()
        .map(|&x| {
            let r = branch_shot(sys, x, Branch::Right, cfg).ok()?;
            let l = branch_shot(sys, x, Branch::Left, cfg).ok()?;
            Some(r.value[1] - l.value[1])
        })
        .collect();
    for i in 0..n - 1 {
        if let (Some(a), Some(b)) = (vals[i], vals[i + 1]) {
            if a * b <= 0.0 {
                let x = xs[i] - a * (xs[i + 1] - xs[i]) / (b - a);
                return Ok((x, x));
            }
        }
    }
    Err(Error::NoBracket { lo, hi })
}

/// Newton on `F(x_b^r, x_b^l) = hit_r(x_b^r) - hit_l(x_b^l)`.
pub fn match_connection(sys: &FitzHughNagumo, guess: (f64, f64), cfg: &HomoclinicConfig) -> Result<Connection> {
    let (mut xr, mut xl) = guess;
    let eval = |xr: f64, xl: f64| -> Result<(SectionHit, SectionHit)> {
        let (r, l) = rayon::join(|| branch_shot(sys, xr, Branch::Right, cfg), || branch_shot(sys, xl, Branch::Left, cfg));
        Ok((r?, l?))
    };
    let (mut r, mut l) = eval(xr, xl)?;
    let mut f = r.value - l.value;
    // variational Jacobian to start, Broyden updates afterwards: the slope of the
    // computed eta(x) can differ from the SO derivative close to a fold
    let mut jac = Matrix2::from_columns(&[r.derivative, -l.derivative]);
    let mut iterations = 0;
    while f.norm() > cfg.match_tol {
        if iterations >= cfg.match_max_iter {
            return Err(Error::NewtonDivergence { iterations, residual: f.norm() });
        }
        iterations += 1;
        let step = jac.lu().solve(&f).ok_or(Error::SingularJacobian)?;
        let mut alpha = 1.0;
        loop {
            let (nr, nl) = (xr - alpha * step[0], xl - alpha * step[1]);
            match eval(nr, nl) {
                Ok((a, b)) if (a.value - b.value).norm() < f.norm() => {
                    let s = Vector2::new(nr - xr, nl - xl);
                    let fnew = a.value - b.value;
                    jac += (fnew - f - jac * s) * s.transpose() / s.norm_squared();
                    xr = nr;
                    xl = nl;
                    r = a;
                    l = b;
                    f = fnew;
                    break;
                }
                _ if alpha > 1.0 / 64.0 => alpha *= 0.5,
                _ => return Err(Error::NewtonDivergence { iterations, residual: f.norm() }),
            }
        }
    }
    let mut gamma3 = r.orbit.clone();
    let t_hit = *gamma3.t.last().unwrap();
    let back = &l.orbit;
    for k in (0..back.t.len().saturating_sub(1)).rev() {
        gamma3.t.push(t_hit - back.t[back.t.len() - 1] + back.t[k]);
        gamma3.z.push(back.z[k].clone());
    }
    Ok(Connection { x_b_r: xr, x_b_l: xl, residual: f.norm(), iterations, gamma3 })
}

/// Reduced flow on a branch from `x0` until `x` reaches `x_target`; the last step is shortened to land on it.
pub fn integrate_to(
    sys: &FitzHughNagumo,
    x0: f64,
    x_target: f64,
    branch: Branch,
    with_fibers: bool,
    naive: bool,
    cfg: &HomoclinicConfig,
) -> Result<BaseTrajectory> {
    let opts = cfg.reduced(with_fibers);
    let mut x = DVector::from_element(1, x0);
    let (mut mp, phi) = node(sys, &x, &branch.guess(), &opts)?;
    let dir = (x_target - x0).signum();
    let zero_phi = |p: Option<DMatrix<f64>>| if naive { p.map(|m| m * 0.0) } else { p };
    let mut traj = BaseTrajectory {
        tau_mesh: vec![0.0],
        x_values: vec![x.clone()],
        eta_values: vec![mp.eta.clone()],
        d_eta_values: vec![mp.d_eta.clone()],
        phi_values: zero_phi(phi).map(|p| vec![p]),
        residuals: vec![mp.residual],
        dtau: cfg.dtau,
        h_used: cfg.h,
    };
    let velocity = |mp: &ManifoldPoint| sys.slow_field(&mp.x, &mp.eta)[0] / sys.epsilon();
    if velocity(&mp) * dir <= 0.0 {
        return Err(Error::BadParams(format!("reduced flow at x = {x0} does not move towards {x_target}")));
    }
    let mut tau = 0.0;
    for _ in 0..100_000 {
        if (x_target - x[0]) * dir <= 1e-13 {
            break;
        }
        // a full step whose stages would pass the target is never taken: near the
        // fold of M^r the SO iteration stops contracting
        let euler = (x_target - x[0]) / velocity(&mp);
        let (next, step) = if euler > 1.25 * cfg.dtau {
            (rk4_step(sys, &x, cfg.dtau, cfg.h, &mp.eta, &opts.so)?.0, cfg.dtau)
        } else {
            // secant on the step length of the final step
            let g = |s: f64| -> Result<(DVector<f64>, f64)> {
                let next = rk4_step(sys, &x, s, cfg.h, &mp.eta, &opts.so)?.0;
                let gap = next[0] - x_target;
                Ok((next, gap))
            };
            let (mut s0, mut g0) = (0.0, x[0] - x_target);
            let (mut s1, (mut next, mut g1)) = (euler, g(euler)?);
            for _ in 0..30 {
                if g1 == g0 || g1.abs() <= 1e-15 {
                    break;
                }
                let s2 = s1 - g1 * (s1 - s0) / (g1 - g0);
                s0 = s1;
                g0 = g1;
                s1 = s2;
                (next, g1) = g(s1)?;
            }
            (next, s1)
        };
        x = next;
        tau += step;
        let (m, phi) = node(sys, &x, &mp.eta, &opts)?;
        mp = m;
        traj.tau_mesh.push(tau);
        traj.x_values.push(x.clone());
        traj.eta_values.push(mp.eta.clone());
        traj.d_eta_values.push(mp.d_eta.clone());
        traj.residuals.push(mp.residual);
        if let (Some(v), Some(p)) = (traj.phi_values.as_mut(), zero_phi(phi)) {
            v.push(p);
        }
    }
    Ok(traj)
}

/// Backward sweep of `M^l` from `ml_offset` out to `x_max`.
pub fn sweep_left_branch(sys: &FitzHughNagumo, x_max: f64, cfg: &HomoclinicConfig) -> Result<BaseTrajectory> {
    let opts = cfg.reduced(false);
    crate::reduced::integrate_steps(
        sys,
        &DVector::from_element(1, cfg.ml_offset),
        &Branch::Left.guess(),
        -cfg.dtau,
        100_000,
        &opts,
        |_, x| x[0] >= x_max,
    )
}

/// Slow return along `M^l` from `x_b_l` until `|(x, eta(x))| < gamma4_radius`.
pub fn gamma4(sys: &FitzHughNagumo, x_b_l: f64, cfg: &HomoclinicConfig) -> Result<Orbit> {
    let opts = cfg.reduced(false);
    let traj = crate::reduced::integrate_steps(
        sys,
        &DVector::from_element(1, x_b_l),
        &Branch::Left.guess(),
        cfg.dtau,
        100_000,
        &opts,
        |_, x| {
            // the critical branch has |y1| ~ 10 |x| near the rest state
            x[0].abs() * 11.0 < cfg.gamma4_radius
        },
    )?;
    let z: Vec<DVector<f64>> = traj.x_values.iter().zip(&traj.eta_values).map(|(x, e)| stack(x, e)).collect();
    let end = z.last().unwrap().norm();
    if end >= cfg.gamma4_radius {
        return Err(Error::NonConvergence { iterations: z.len(), residual: end });
    }
    let eps = sys.epsilon();
    Ok(Orbit { t: traj.tau_mesh.iter().map(|t| t / eps).collect(), z })
}

/// The `M^r` part: transient from the end of `gamma_1` onto the slow manifold, then slow flow to `x_b_r`.
pub fn gamma2(
    sys: &FitzHughNagumo,
    gamma1_end: &DVector<f64>,
    x_b_r: f64,
    naive: bool,
    cfg: &HomoclinicConfig,
    tcfg: &TransientConfig,
) -> Result<TransientSolution> {
    let x0 = project_onto_branch(sys, gamma1_end, Branch::Right, naive, cfg)?;
    let base = integrate_to(sys, x0, x_b_r, Branch::Right, true, naive, cfg)?;
    let nf = 2;
    let y = gamma1_end.rows(1, nf).into_owned();
    let corr = DMatrix::identity(nf, nf) + &base.d_eta_values[0] * &base.phi_values.as_ref().unwrap()[0];
    let dev = corr.try_inverse().ok_or(Error::SingularCorrection)? * (y - &base.eta_values[0]);
    assemble_transient(sys, base, Pin::Split(dev), Pin::Split(DVector::zeros(nf)), tcfg)
}

fn orbit_of(sol: &TransientSolution) -> Orbit {
    Orbit { t: sol.stitched.iter().map(|p| p.t).collect(), z: sol.stitched.iter().map(|p| stack(&p.x, &p.y)).collect() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomoclinicResult {
    pub config: HomoclinicConfig,
    pub c_star: f64,
    pub bracket_width: f64,
    pub x_b_r: f64,
    pub x_b_l: f64,
    pub match_residual: f64,
    pub match_iterations: usize,
    /// Gap between the end of `gamma_1` and the start of `gamma_2` with the SOF projection.
    pub projection_discrepancy: f64,
    /// The same gap with vertical fibers.
    pub naive_discrepancy: f64,
    /// Gaps at the `gamma_2 -> gamma_3` and `gamma_3 -> gamma_4` joins.
    pub departure_gap: f64,
    pub entry_gap: f64,
    pub gamma4_end_norm: f64,
    #[serde(skip)]
    pub gammas: [Orbit; 4],
    #[serde(skip)]
    pub left_branch: Option<BaseTrajectory>,
}

/// Runs the whole pipeline at `cfg.epsilon` with default model parameters.
pub fn assemble_homoclinic(cfg: &HomoclinicConfig, jobs: usize) -> Result<HomoclinicResult> {
    assemble_homoclinic_for(&FitzHughNagumo::new(cfg.epsilon, cfg.c_bracket.0), cfg, jobs)
}

/// Same as [`assemble_homoclinic`] with the remaining model parameters taken from
/// `template`; its `epsilon` and `c` are replaced.
pub fn assemble_homoclinic_for(template: &FitzHughNagumo, cfg: &HomoclinicConfig, jobs: usize) -> Result<HomoclinicResult> {
    let tag = |stage: usize| move |e: Error| Error::Stage { stage, source: Box::new(e) };
    let model = FitzHughNagumo { epsilon: cfg.epsilon, ..template.with_speed(cfg.c_bracket.0) };
    let (c_star, width) = find_wave_speed(&model, cfg, jobs).map_err(tag(1))?;
    let sys = model.with_speed(c_star);
    let g1 = gamma1(&sys, cfg).map_err(tag(1))?;
    let end1 = g1.last().clone();

    let x0 = project_onto_branch(&sys, &end1, Branch::Right, false, cfg).map_err(tag(2))?;
    // the jump down happens before the fold of M^r
    let fold_r = 0.13;
    let (gr, gl) = scan_connection(&sys, x0 + 0.02, fold_r - 0.01, cfg).map_err(tag(4))?;
    let conn = match_connection(&sys, (gr, gl), cfg).map_err(tag(4))?;
    let left = sweep_left_branch(&sys, conn.x_b_l, cfg).map_err(tag(3))?;

    let tcfg = TransientConfig::default();
    let g2 = gamma2(&sys, &end1, conn.x_b_r, false, cfg, &tcfg).map_err(tag(2))?;
    let g2_naive = gamma2(&sys, &end1, conn.x_b_r, true, cfg, &tcfg).map_err(tag(2))?;
    let gap = |sol: &TransientSolution| (stack(&sol.stitched[0].x, &sol.stitched[0].y) - &end1).norm();
    let projection_discrepancy = gap(&g2);
    let naive_discrepancy = gap(&g2_naive);

    let g4 = gamma4(&sys, conn.x_b_l, cfg).map_err(tag(5))?;
    let g2o = orbit_of(&g2);
    let departure_gap = (conn.gamma3.first() - g2o.last()).norm();
    let entry_gap = (conn.gamma3.last() - g4.first()).norm();
    Ok(HomoclinicResult {
        config: *cfg,
        c_star,
        bracket_width: width,
        x_b_r: conn.x_b_r,
        x_b_l: conn.x_b_l,
        match_residual: conn.residual,
        match_iterations: conn.iterations,
        projection_discrepancy,
        naive_discrepancy,
        departure_gap,
        entry_gap,
        gamma4_end_norm: g4.last().norm(),
        gammas: [g1, g2o, conn.gamma3, g4],
        left_branch: Some(left),
    })
}
