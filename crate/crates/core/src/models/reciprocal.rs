use nalgebra::{dmatrix, dvector, DMatrix, DVector};

use crate::system::SlowFastSystem;

/// Slow state at the start of the published trajectory segment.
pub const Q_START: [f64; 2] = [-0.51723351869, -0.73434299772];
/// Published slow state at the end of the segment, slow time [`HORIZON`] later.
pub const Q_END: [f64; 2] = [-0.39340933174, 0.00310289762];
pub const V_START: [f64; 2] = [-0.27894449516, 1.71095643157];
pub const V_END: [f64; 2] = [-0.15410414452, 0.72034762953];
pub const HORIZON: f64 = 0.5;

/// Two neurons coupled by reciprocal inhibition: gating `q` slow, potentials `v` fast.
#[derive(Debug, Clone)]
pub struct ReciprocalInhibition {
    pub epsilon: f64,
    pub omega: f64,
    pub gamma: f64,
    pub r: f64,
    pub theta: f64,
    pub a: f64,
    pub s: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl ReciprocalInhibition {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            omega: 0.03,
            gamma: 10.0,
            r: -4.0,
            theta: 0.01333,
            a: 1.0,
            s: 1.0,
            sigma1: 3.0,
            sigma2: 1.2652372051,
        }
    }

    /// Synaptic sigmoid `f(v) = 1 / (1 + exp(-4 gamma (v - theta)))`.
    pub fn sigmoid(&self, v: f64) -> f64 {
        1.0 / (1.0 + (-4.0 * self.gamma * (v - self.theta)).exp())
    }

    fn sigmoid_prime(&self, v: f64) -> f64 {
        let f = self.sigmoid(v);
        4.0 * self.gamma * f * (1.0 - f)
    }

    fn sech2(u: f64) -> f64 {
        let c = u.cosh();
        1.0 / (c * c)
    }
}

impl SlowFastSystem for ReciprocalInhibition {
    fn n_slow(&self) -> usize {
        2
    }
    fn n_fast(&self) -> usize {
        2
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn slow_field(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.epsilon * dvector![-q[0] + self.s * v[0], -q[1] + self.s * v[1]]
    }
    fn fast_field(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let a = self.a;
        dvector![
            -(v[0] - a * (self.sigma1 * v[0] / a).tanh() + q[0] + self.omega * self.sigmoid(v[1]) * (v[0] - self.r)),
            -(v[1] - a * (self.sigma2 * v[1] / a).tanh() + q[1] + self.omega * self.sigmoid(v[0]) * (v[1] - self.r))
        ]
    }
    fn dslow_dx(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-self.epsilon, 0.0; 0.0, -self.epsilon]
    }
    fn dslow_dy(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![self.epsilon * self.s, 0.0; 0.0, self.epsilon * self.s]
    }
    fn dfast_dx(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        dmatrix![-1.0, 0.0; 0.0, -1.0]
    }
    fn dfast_dy(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let a = self.a;
        let d11 = 1.0 - self.sigma1 * Self::sech2(self.sigma1 * v[0] / a) + self.omega * self.sigmoid(v[1]);
        let d12 = self.omega * self.sigmoid_prime(v[1]) * (v[0] - self.r);
        let d21 = self.omega * self.sigmoid_prime(v[0]) * (v[1] - self.r);
        let d22 = 1.0 - self.sigma2 * Self::sech2(self.sigma2 * v[1] / a) + self.omega * self.sigmoid(v[0]);
        -dmatrix![d11, d12; d21, d22]
    }
}
