use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::system::SlowFastSystem;

/// FitzHugh-Nagumo traveling waves `u(t, s) = x(s + c t)`, `v = y1`, `y2 = y1'`.
///
/// Substituting the wave ansatz into `u_t = eps (v - gamma u)` gives the slow
/// equation `x' = (eps / c) (y1 - gamma x)`.
#[derive(Debug, Clone)]
pub struct FitzHughNagumo {
    pub epsilon: f64,
    pub a: f64,
    pub d: f64,
    pub p: f64,
    pub c: f64,
    pub gamma: f64,
}

impl FitzHughNagumo {
    pub fn new(epsilon: f64, c: f64) -> Self {
        Self { epsilon, a: 0.1, d: 5.0, p: 0.0, c, gamma: 1.0 }
    }

    /// `f_a(y) = y (y - a) (1 - y)`.
    pub fn cubic(&self, y: f64) -> f64 {
        y * (y - self.a) * (1.0 - y)
    }

    pub fn cubic_prime(&self, y: f64) -> f64 {
        -3.0 * y * y + 2.0 * (1.0 + self.a) * y - self.a
    }

    pub fn with_speed(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }
}

impl SlowFastSystem for FitzHughNagumo {
    fn n_slow(&self) -> usize {
        1
    }
    fn n_fast(&self) -> usize {
        2
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn slow_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        dvector![self.epsilon / self.c * (y[0] - self.gamma * x[0])]
    }
    fn fast_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        dvector![y[1], (self.c * y[1] - self.cubic(y[0]) + x[0] - self.p) / self.d]
    }
    fn dslow_dx(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-self.epsilon / self.c * self.gamma]
    }
    fn dslow_dy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![self.epsilon / self.c, 0.0]
    }
    fn dfast_dx(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![0.0; 1.0 / self.d]
    }
    fn dfast_dy(&self, _x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![0.0, 1.0; -self.cubic_prime(y[0]) / self.d, self.c / self.d]
    }
}
