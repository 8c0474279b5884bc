use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::system::SlowFastSystem;

/// Lindemann mechanism in its original chart, `x' = -x (x - y)`, `y' = x (x - y) - eps y`.
///
/// Not in canonical form: `X^eps` carries no factor `eps`.
#[derive(Debug, Clone)]
pub struct Lindemann {
    pub epsilon: f64,
}

impl Lindemann {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon }
    }
}

impl SlowFastSystem for Lindemann {
    fn n_slow(&self) -> usize {
        1
    }
    fn n_fast(&self) -> usize {
        1
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn slow_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        dvector![-x[0] * (x[0] - y[0])]
    }
    fn fast_field(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        dvector![x[0] * (x[0] - y[0]) - self.epsilon * y[0]]
    }
    fn dslow_dx(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-(2.0 * x[0] - y[0])]
    }
    fn dslow_dy(&self, x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![x[0]]
    }
    fn dfast_dx(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![2.0 * x[0] - y[0]]
    }
    fn dfast_dy(&self, x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-x[0] - self.epsilon]
    }
    fn eta0_hint(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let d = x[0] + self.epsilon;
        (d != 0.0).then(|| dvector![x[0] * x[0] / d])
    }
}

/// The same mechanism in canonical coordinates `(w, z) = (x + y, 2 y)`.
#[derive(Debug, Clone)]
pub struct LindemannCanonical {
    pub epsilon: f64,
}

impl LindemannCanonical {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon }
    }

    pub fn from_original(x: f64, y: f64) -> (f64, f64) {
        (x + y, 2.0 * y)
    }

    pub fn to_original(w: f64, z: f64) -> (f64, f64) {
        (w - 0.5 * z, 0.5 * z)
    }
}

impl SlowFastSystem for LindemannCanonical {
    fn n_slow(&self) -> usize {
        1
    }
    fn n_fast(&self) -> usize {
        1
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn slow_field(&self, _w: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        dvector![-0.5 * self.epsilon * z[0]]
    }
    fn fast_field(&self, w: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let (w, z) = (w[0], z[0]);
        dvector![2.0 * w * w - (3.0 * w + self.epsilon) * z + z * z]
    }
    fn dslow_dx(&self, _w: &DVector<f64>, _z: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![0.0]
    }
    fn dslow_dy(&self, _w: &DVector<f64>, _z: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-0.5 * self.epsilon]
    }
    fn dfast_dx(&self, w: &DVector<f64>, z: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![4.0 * w[0] - 3.0 * z[0]]
    }
    fn dfast_dy(&self, w: &DVector<f64>, z: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-(3.0 * w[0] + self.epsilon) + 2.0 * z[0]]
    }
}
