//! Dormand-Prince 5(4) with per-step error control and event location.
//!
//! Used for full-system reference trajectories and the fast segments of the
//! homoclinic pipeline. Events are located by re-stepping from the last accepted
//! point with secant-adjusted step sizes, so the returned event state is as
//! accurate as an ordinary step.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, initial_step: None, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }
}

impl OdeOptions {
    pub fn tight(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

/// Accepted steps of a run.
#[derive(Debug, Clone, Default)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub z: Vec<DVector<f64>>,
}

impl OdeSolution {
    pub fn last(&self) -> (f64, &DVector<f64>) {
        (*self.t.last().unwrap(), self.z.last().unwrap())
    }

    fn push(&mut self, t: f64, z: DVector<f64>) {
        self.t.push(t);
        self.z.push(z);
    }
}

/// Sign change of a scalar event function along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

impl Crossing {
    fn matches(self, before: f64, after: f64) -> bool {
        match self {
            Crossing::Rising => before < 0.0 && after >= 0.0,
            Crossing::Falling => before > 0.0 && after <= 0.0,
            Crossing::Either => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

/// What the observer wants after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub struct Dopri5<F> {
    f: F,
    opts: OdeOptions,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl<F> Dopri5<F>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    pub fn new(f: F, opts: OdeOptions) -> Self {
        Self { f, opts }
    }

    /// One step of size `h`; returns the new state, its derivative and the scaled error.
    fn step(&self, t: f64, z: &DVector<f64>, k1: &DVector<f64>, h: f64) -> (DVector<f64>, DVector<f64>, f64) {
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(k1.clone());
        for s in 1..7 {
            let mut zs = z.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    zs.axpy(h * A[s][j], kj, 1.0);
                }
            }
            k.push((self.f)(t + C[s] * h, &zs));
        }
        // row 6 of A is the fifth-order solution, so k[6] is f at the new point (FSAL)
        let mut znew = z.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                znew.axpy(h * A[6][j], kj, 1.0);
            }
        }
        let mut err = DVector::zeros(z.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err.axpy(h * E[j], kj, 1.0);
            }
        }
        let mut acc = 0.0;
        for i in 0..z.len() {
            let sc = self.opts.atol + self.opts.rtol * z[i].abs().max(znew[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        let en = (acc / z.len().max(1) as f64).sqrt();
        (znew, k.pop().unwrap(), en)
    }

    fn initial_step(&self, t: f64, z: &DVector<f64>, k1: &DVector<f64>, dir: f64) -> f64 {
        if let Some(h) = self.opts.initial_step {
            return h.abs();
        }
        let sc = |v: &DVector<f64>| {
            (v.iter().zip(z.iter()).map(|(a, b)| (a / (self.opts.atol + self.opts.rtol * b.abs())).powi(2)).sum::<f64>()
                / z.len().max(1) as f64)
                .sqrt()
        };
        let d0 = sc(z);
        let d1 = sc(k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let z1 = z + dir * h0 * k1;
        let k2 = (self.f)(t + dir * h0, &z1);
        let d2 = sc(&(k2 - k1)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(self.opts.max_step)
    }

    /// Integrates from `t0` to `t_end` (either direction), calling `observer` after each step.
    pub fn solve_with<O>(&self, t0: f64, z0: &DVector<f64>, t_end: f64, mut observer: O) -> Result<OdeSolution>
    where
        O: FnMut(f64, &DVector<f64>) -> Control,
    {
        let mut sol = OdeSolution::default();
        sol.push(t0, z0.clone());
        if t_end == t0 {
            return Ok(sol);
        }
        let dir = (t_end - t0).signum();
        let mut t = t0;
        let mut z = z0.clone();
        let mut k1 = (self.f)(t, &z);
        let mut h = self.initial_step(t, &z, &k1, dir);
        let mut steps = 0;
        while dir * (t_end - t) > 0.0 {
            if steps >= self.opts.max_steps {
                return Err(Error::NonConvergence { iterations: steps, residual: t });
            }
            let last = dir * (t + dir * h - t_end) >= 0.0;
            let hs = if last { t_end - t } else { dir * h };
            let (zn, kn, err) = self.step(t, &z, &k1, hs);
            steps += 1;
            if err <= 1.0 && zn.iter().all(|v| v.is_finite()) {
                t = if last { t_end } else { t + hs };
                z = zn;
                k1 = kn;
                sol.push(t, z.clone());
                if observer(t, &z) == Control::Stop {
                    break;
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (hs.abs() * fac).min(self.opts.max_step);
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = hs.abs() * fac;
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::StepSizeUnderflow { t });
                }
            }
        }
        Ok(sol)
    }

    pub fn solve(&self, t0: f64, z0: &DVector<f64>, t_end: f64) -> Result<OdeSolution> {
        self.solve_with(t0, z0, t_end, |_, _| Control::Continue)
    }

    /// Integrates until `event` crosses zero in the requested sense (ignoring crossings
    /// where `armed` is false). Returns the run and the located event point, if any.
    pub fn solve_until<G, P>(
        &self,
        t0: f64,
        z0: &DVector<f64>,
        t_end: f64,
        event: G,
        crossing: Crossing,
        armed: P,
    ) -> Result<(OdeSolution, Option<(f64, DVector<f64>)>)>
    where
        G: Fn(f64, &DVector<f64>) -> f64,
        P: Fn(f64, &DVector<f64>) -> bool,
    {
        let mut prev = (t0, z0.clone(), event(t0, z0));
        let mut bracket = None;
        let mut sol = self.solve_with(t0, z0, t_end, |t, z| {
            let g = event(t, z);
            if armed(t, z) && crossing.matches(prev.2, g) {
                bracket = Some((prev.0, prev.1.clone(), prev.2, t, g));
                return Control::Stop;
            }
            prev = (t, z.clone(), g);
            Control::Continue
        })?;
        let Some((ta, za, ga, tb, gb)) = bracket else {
            return Ok((sol, None));
        };
        let (te, ze) = self.locate(ta, &za, ga, tb, gb, &event)?;
        sol.t.pop();
        sol.z.pop();
        sol.push(te, ze.clone());
        Ok((sol, Some((te, ze))))
    }

    fn locate<G>(&self, ta: f64, za: &DVector<f64>, ga: f64, tb: f64, gb: f64, event: &G) -> Result<(f64, DVector<f64>)>
    where
        G: Fn(f64, &DVector<f64>) -> f64,
    {
        let ka = (self.f)(ta, za);
        // Illinois variant of regula falsi on the step length from the bracket start
        let (mut lo, mut hi) = (0.0, tb - ta);
        let (mut glo, mut ghi) = (ga, gb);
        let mut side = 0;
        let mut best = (tb, self.step(ta, za, &ka, tb - ta).0);
        for _ in 0..60 {
            let s = hi - ghi * (hi - lo) / (ghi - glo);
            let (zs, _, _) = self.step(ta, za, &ka, s);
            let gs = event(ta + s, &zs);
            best = (ta + s, zs);
            if gs == 0.0 || (hi - lo).abs() <= 1e-15 * (1.0 + ta.abs()) || gs.abs() <= 1e-15 {
                break;
            }
            if (gs > 0.0) == (ghi > 0.0) {
                hi = s;
                ghi = gs;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            } else {
                lo = s;
                glo = gs;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let ode = Dopri5::new(|_t: f64, z: &DVector<f64>| -z, OdeOptions::tight(1e-12));
        let sol = ode.solve(0.0, &DVector::from_element(1, 1.0), 3.0).unwrap();
        let (t, z) = sol.last();
        assert_eq!(t, 3.0);
        assert!((z[0] - (-3f64).exp()).abs() < 1e-11);
    }
}
