use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::system::SlowFastSystem;

/// Two slow, two fast variables; `dY/dy = diag(-1, 1)` so the slow manifold is a saddle.
#[derive(Debug, Clone)]
pub struct Toy {
    pub epsilon: f64,
}

impl Toy {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon }
    }
}

impl SlowFastSystem for Toy {
    fn n_slow(&self) -> usize {
        2
    }
    fn n_fast(&self) -> usize {
        2
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn slow_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.epsilon
            * dvector![x[0].cos() + y[0] + y[1] * x[1].cos(), -x[1].sin() + y[1] + y[0] * x[0].sin()]
    }
    fn fast_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        dvector![x[1].cos() - y[0], -x[0].sin() + y[1]]
    }
    fn dslow_dx(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        self.epsilon
            * dmatrix![-x[0].sin(), -y[1] * x[1].sin();
                       y[0] * x[0].cos(), -x[1].cos()]
    }
    fn dslow_dy(&self, x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        self.epsilon * dmatrix![1.0, x[1].cos(); x[0].sin(), 1.0]
    }
    fn dfast_dx(&self, x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![0.0, -x[1].sin(); -x[0].cos(), 0.0]
    }
    fn dfast_dy(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-1.0, 0.0; 0.0, 1.0]
    }
    fn eta0_hint(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(dvector![x[1].cos(), x[0].sin()])
    }
}
