use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::system::SlowFastSystem;

/// `eps u'' + u' = 1` in first-order form `x = u`, `y = u'` (fast time).
#[derive(Debug, Clone)]
pub struct LinearBvp {
    pub epsilon: f64,
}

impl LinearBvp {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon }
    }

    /// `u(tau) = tau + exp(-tau / eps)`, which meets `u(0) = 1` and `u(1) = 1` up to `exp(-1/eps)`.
    pub fn exact(&self, tau: f64) -> f64 {
        tau + (-tau / self.epsilon).exp()
    }

    pub fn exact_derivative(&self, tau: f64) -> f64 {
        1.0 - (-tau / self.epsilon).exp() / self.epsilon
    }
}

impl SlowFastSystem for LinearBvp {
    fn n_slow(&self) -> usize {
        1
    }
    fn n_fast(&self) -> usize {
        1
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn slow_field(&self, _x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        dvector![self.epsilon * y[0]]
    }
    fn fast_field(&self, _x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        dvector![1.0 - y[0]]
    }
    fn dslow_dx(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![0.0]
    }
    fn dslow_dy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![self.epsilon]
    }
    fn dfast_dx(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![0.0]
    }
    fn dfast_dy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-1.0]
    }
    fn eta0_hint(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(dvector![1.0])
    }
}
