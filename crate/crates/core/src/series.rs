//! Formal epsilon-series of the slow manifold and fiber map, from truncated Taylor jets.
//!
//! Used as reference values for the order sweeps. Coefficients are Taylor jets in `x`
//! around the base point, so `x`-derivatives of earlier orders are available exactly.
//! Order `k` consumes one derivative, so a jet degree of at least `orders` is needed.

use std::ops::{Add, Mul, Neg, Sub};

/// Bivariate jet truncated at total degree `deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    deg: usize,
    c: Vec<f64>,
}

impl Jet2 {
    pub fn zero(deg: usize) -> Self {
        Self { deg, c: vec![0.0; (deg + 1) * (deg + 1)] }
    }

    pub fn constant(deg: usize, v: f64) -> Self {
        let mut j = Self::zero(deg);
        j.c[0] = v;
        j
    }

    fn at(&self, i: usize, k: usize) -> f64 {
        self.c[i * (self.deg + 1) + k]
    }

    fn at_mut(&mut self, i: usize, k: usize) -> &mut f64 {
        &mut self.c[i * (self.deg + 1) + k]
    }

    /// Jet of `sin(a + t)` (or `cos`) in the variable `axis`.
    pub fn trig(deg: usize, a: f64, axis: usize, cosine: bool) -> Self {
        let (s, c) = a.sin_cos();
        let cycle = if cosine { [c, -s, -c, s] } else { [s, c, -s, -c] };
        let mut j = Self::zero(deg);
        let mut fact = 1.0;
        for n in 0..=deg {
            if n > 0 {
                fact *= n as f64;
            }
            let v = cycle[n % 4] / fact;
            if axis == 0 {
                *j.at_mut(n, 0) = v;
            } else {
                *j.at_mut(0, n) = v;
            }
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let mut r = Self::zero(self.deg);
        for i in 0..=self.deg {
            for k in 0..=self.deg - i {
                let (src, f) = if axis == 0 { ((i + 1, k), i + 1) } else { ((i, k + 1), k + 1) };
                if src.0 + src.1 <= self.deg {
                    *r.at_mut(i, k) = f as f64 * self.at(src.0, src.1);
                }
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { deg: self.deg, c: self.c.iter().map(|v| v * s).collect() }
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, o: &Jet2) -> Jet2 {
        Jet2 { deg: self.deg, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, o: &Jet2) -> Jet2 {
        Jet2 { deg: self.deg, c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, o: &Jet2) -> Jet2 {
        let d = self.deg;
        let mut r = Jet2::zero(d);
        for i in 0..=d {
            for k in 0..=d - i {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for p in 0..=d - i - k {
                    for q in 0..=d - i - k - p {
                        *r.at_mut(i + p, k + q) += a * o.at(p, q);
                    }
                }
            }
        }
        r
    }
}

/// Univariate jet truncated at degree `deg`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1(pub Vec<f64>);

impl Jet1 {
    pub fn zero(deg: usize) -> Self {
        Jet1(vec![0.0; deg + 1])
    }

    /// The jet of `a + t`.
    pub fn variable(deg: usize, a: f64) -> Self {
        let mut j = Self::zero(deg);
        j.0[0] = a;
        if deg > 0 {
            j.0[1] = 1.0;
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn derivative(&self) -> Self {
        let mut r = Self::zero(self.0.len() - 1);
        for n in 1..self.0.len() {
            r.0[n - 1] = n as f64 * self.0[n];
        }
        r
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet1(self.0.iter().map(|v| v * s).collect())
    }

    pub fn recip(&self) -> Self {
        let n = self.0.len();
        let mut r = Self::zero(n - 1);
        r.0[0] = 1.0 / self.0[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.0[j] * r.0[k - j]).sum();
            r.0[k] = -s / self.0[0];
        }
        r
    }
}

impl Add for &Jet1 {
    type Output = Jet1;
    fn add(self, o: &Jet1) -> Jet1 {
        Jet1(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Jet1 {
    type Output = Jet1;
    fn sub(self, o: &Jet1) -> Jet1 {
        Jet1(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul for &Jet1 {
    type Output = Jet1;
    fn mul(self, o: &Jet1) -> Jet1 {
        let n = self.0.len();
        let mut r = Jet1::zero(n - 1);
        for i in 0..n {
            for j in 0..n - i {
                r.0[i + j] += self.0[i] * o.0[j];
            }
        }
        r
    }
}

/// Coefficients `eta_k`, `phi_k` at a base point, so that `eta = sum eps^k eta_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    /// `eta[k]` has `n_f` entries.
    pub eta: Vec<Vec<f64>>,
    /// `phi[k]` is row-major `n_s x n_f`.
    pub phi: Vec<Vec<f64>>,
}

impl Series {
    /// Partial sum of the manifold series.
    pub fn eta_at(&self, eps: f64) -> Vec<f64> {
        sum_orders(&self.eta, eps)
    }

    pub fn phi_at(&self, eps: f64) -> Vec<f64> {
        sum_orders(&self.phi, eps)
    }
}

fn sum_orders(terms: &[Vec<f64>], eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; terms[0].len()];
    // Horner from the highest order
    for t in terms.iter().rev() {
        for (o, v) in out.iter_mut().zip(t) {
            *o = *o * eps + v;
        }
    }
    out
}

type Mat2<T> = [[T; 2]; 2];

fn mat2_mul(p: &Mat2<Jet2>, q: &Mat2<Jet2>) -> Mat2<Jet2> {
    let entry = |i: usize, j: usize| &(&p[i][0] * &q[0][j]) + &(&p[i][1] * &q[1][j]);
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

/// Series for the toy system around `x`, orders `0..=orders` (`phi[0]` is zero).
pub fn toy_series(x: [f64; 2], orders: usize, degree: usize) -> Series {
    let d = degree.max(orders + 1);
    let c1 = Jet2::trig(d, x[0], 0, true);
    let s1 = Jet2::trig(d, x[0], 0, false);
    let c2 = Jet2::trig(d, x[1], 1, true);
    let s2 = Jet2::trig(d, x[1], 1, false);
    let one = Jet2::constant(d, 1.0);
    let lin = |y: &[Jet2; 2]| [&y[0] + &(&y[1] * &c2), &y[1] + &(&y[0] * &s1)];

    // slow field X = cos x1 + y1 + y2 cos x2, -sin x2 + y2 + y1 sin x1, split into
    // the y-independent part and the part linear in y
    let mut eta: Vec<[Jet2; 2]> = vec![[c2.clone(), s1.clone()]];
    let l0 = lin(&eta[0]);
    let mut field: Vec<[Jet2; 2]> = vec![[&c1 + &l0[0], &l0[1] - &s2]];
    for k in 1..=orders {
        let mut acc = [Jet2::zero(d), Jet2::zero(d)];
        for j in 0..k {
            let l = k - 1 - j;
            for (r, a) in acc.iter_mut().enumerate() {
                let t = &(&eta[j][r].derivative(0) * &field[l][0]) + &(&eta[j][r].derivative(1) * &field[l][1]);
                *a = &*a + &t;
            }
        }
        let next = [-&acc[0], acc[1].clone()];
        field.push(lin(&next));
        eta.push(next);
    }

    let b: Mat2<Jet2> = [[one.clone(), c2.clone()], [s1.clone(), one.clone()]];
    let jac = |v: &[Jet2; 2]| -> Mat2<Jet2> {
        [[v[0].derivative(0), v[0].derivative(1)], [v[1].derivative(0), v[1].derivative(1)]]
    };
    let d_field: Vec<Mat2<Jet2>> = field.iter().map(jac).collect();
    let d_eta: Vec<Mat2<Jet2>> = eta.iter().map(jac).collect();
    let zero = || -> Mat2<Jet2> { [[Jet2::zero(d), Jet2::zero(d)], [Jet2::zero(d), Jet2::zero(d)]] };
    let mut phi: Vec<Mat2<Jet2>> = vec![zero()];
    for k in 1..=orders {
        let m = k - 1;
        let mut acc = if m == 0 { b.clone() } else { zero() };
        for j in 1..=m {
            let l = m - j;
            let t = mat2_mul(&d_field[l], &phi[j]);
            let t2 = mat2_mul(&phi[j], &mat2_mul(&d_eta[l], &b));
            for r in 0..2 {
                for c in 0..2 {
                    let p = &phi[j][r][c];
                    let transport = &(&p.derivative(0) * &field[l][0]) + &(&p.derivative(1) * &field[l][1]);
                    acc[r][c] = &(&(&acc[r][c] + &t[r][c]) - &transport) + &t2[r][c];
                }
            }
        }
        phi.push([[-&acc[0][0], acc[0][1].clone()], [-&acc[1][0], acc[1][1].clone()]]);
    }

    Series {
        eta: eta.iter().map(|e| vec![e[0].value(), e[1].value()]).collect(),
        phi: phi.iter().map(|p| vec![p[0][0].value(), p[0][1].value(), p[1][0].value(), p[1][1].value()]).collect(),
    }
}

/// Series for the Lindemann mechanism (original chart) around `x`.
pub fn lindemann_series(x: f64, orders: usize, degree: usize) -> Series {
    let d = degree.max(orders + 1);
    let xj = Jet1::variable(d, x);
    let xi = xj.recip();
    let mut eta = vec![xj.clone()];
    let mut u = vec![Jet1::zero(d)];
    for k in 1..=orders {
        let mut s = &eta[k - 1] * &xi;
        for j in 1..k {
            s = &s - &(&u[j] * &eta[k - j].derivative());
        }
        let uk = s.scale(0.5);
        eta.push(uk.scale(-1.0));
        u.push(uk);
    }

    let two_x = xj.scale(2.0);
    let mut c = vec![two_x.clone()];
    for k in 1..=orders {
        let mut ck = &eta[k] + &(&two_x * &eta[k].derivative());
        if k == 1 {
            ck.0[0] += 1.0;
        }
        c.push(ck);
    }
    let inv_two_x = two_x.recip();
    let mut phi: Vec<Jet1> = Vec::new();
    for k in 0..=orders {
        let mut s = if k == 0 { xj.scale(-1.0) } else { Jet1::zero(d) };
        for j in 0..k {
            s = &s - &(&phi[j] * &c[k - j]);
            s = &s - &(&(&phi[j].derivative() * &xj) * &u[k - j]);
        }
        phi.push(&s * &inv_two_x);
    }

    Series {
        eta: eta.iter().map(|e| vec![e.value()]).collect(),
        phi: phi.iter().map(|p| vec![p.value()]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn toy_low_orders() {
        let s = toy_series([-0.5, -0.7], 3, 6);
        // eta0 = (cos x2, sin x1)
        assert_abs_diff_eq!(s.eta[0][0], (-0.7f64).cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.eta[0][1], (-0.5f64).sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.eta[1][0], 0.13006, epsilon = 1e-5);
        assert_abs_diff_eq!(s.eta[1][1], 1.11957, epsilon = 1e-5);
        assert!(s.phi[0].iter().all(|v| *v == 0.0));
        for (got, want) in s.phi[1].iter().zip([-1.0, 0.76484, 0.47943, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
    }

    #[test]
    fn lindemann_coefficients_at_one() {
        let s = lindemann_series(1.0, 4, 30);
        let eta: Vec<f64> = s.eta.iter().map(|e| e[0]).collect();
        let phi: Vec<f64> = s.phi.iter().map(|p| p[0]).collect();
        for (got, want) in eta.iter().zip([1.0, -0.5, 0.25, -0.1875, 0.21875]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        for (got, want) in phi.iter().zip([-0.5, 0.125, -0.0625, 0.125, -0.2265625]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_sum_is_horner() {
        let s = Series { eta: vec![vec![1.0], vec![2.0], vec![3.0]], phi: vec![vec![0.0]] };
        assert_abs_diff_eq!(s.eta_at(0.1)[0], 1.23, epsilon = 1e-15);
    }

    #[test]
    fn jet1_reciprocal() {
        // 1 / (1 + t) = 1 - t + t^2 - ...
        let j = Jet1::variable(4, 1.0).recip();
        for (k, c) in j.0.iter().enumerate() {
            assert_abs_diff_eq!(*c, if k % 2 == 0 { 1.0 } else { -1.0 }, epsilon = 1e-15);
        }
    }
}
