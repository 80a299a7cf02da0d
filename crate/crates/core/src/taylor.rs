//! Truncated Taylor arithmetic.
//!
//! `Taylor<N>` carries the first `N` Taylor coefficients of a function at a
//! point, so evaluating a closed form on `Taylor::var(x)` yields exact
//! derivatives up to order `N - 1`.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor<const N: usize> {
    pub c: [f64; N],
}

/// Value, first and second derivative.
pub type Jet = Taylor<3>;

impl<const N: usize> Taylor<N> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }

    /// The independent variable at `x`.
    pub fn var(x: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x;
        if N > 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative.
    pub fn deriv(&self, k: usize) -> f64 {
        let mut f = 1.0;
        for i in 2..=k {
            f *= i as f64;
        }
        self.c[k] * f
    }

    pub fn scale(self, a: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|x| *x *= a);
        Self { c }
    }

    pub fn powf(self, a: f64) -> Self {
        let f = &self.c;
        let mut g = [0.0; N];
        g[0] = f[0].powf(a);
        for n in 1..N {
            let mut s = 0.0;
            for k in 1..=n {
                s += (a * k as f64 - (n - k) as f64) * f[k] * g[n - k];
            }
            g[n] = s / (n as f64 * f[0]);
        }
        Self { c: g }
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        let mut out = self;
        for _ in 1..n.abs() {
            out = out * self;
        }
        if n < 0 {
            Self::constant(1.0) / out
        } else {
            out
        }
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn exp(self) -> Self {
        let f = &self.c;
        let mut g = [0.0; N];
        g[0] = f[0].exp();
        for n in 1..N {
            let mut s = 0.0;
            for k in 1..=n {
                s += k as f64 * f[k] * g[n - k];
            }
            g[n] = s / n as f64;
        }
        Self { c: g }
    }

    pub fn ln(self) -> Self {
        let f = &self.c;
        let mut g = [0.0; N];
        g[0] = f[0].ln();
        for n in 1..N {
            let mut s = n as f64 * f[n];
            for k in 1..n {
                s -= k as f64 * g[k] * f[n - k];
            }
            g[n] = s / (n as f64 * f[0]);
        }
        Self { c: g }
    }
}

impl<const N: usize> Add for Taylor<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut c = self.c;
        for i in 0..N {
            c[i] += o.c[i];
        }
        Self { c }
    }
}

impl<const N: usize> Sub for Taylor<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut c = self.c;
        for i in 0..N {
            c[i] -= o.c[i];
        }
        Self { c }
    }
}

impl<const N: usize> Neg for Taylor<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Taylor<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Self { c }
    }
}

impl<const N: usize> Div for Taylor<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut q = [0.0; N];
        for n in 0..N {
            let mut s = self.c[n];
            for k in 1..=n {
                s -= o.c[k] * q[n - k];
            }
            q[n] = s / o.c[0];
        }
        Self { c: q }
    }
}

impl<const N: usize> Add<f64> for Taylor<N> {
    type Output = Self;
    fn add(mut self, a: f64) -> Self {
        self.c[0] += a;
        self
    }
}

impl<const N: usize> Sub<f64> for Taylor<N> {
    type Output = Self;
    fn sub(mut self, a: f64) -> Self {
        self.c[0] -= a;
        self
    }
}

impl<const N: usize> Mul<f64> for Taylor<N> {
    type Output = Self;
    fn mul(self, a: f64) -> Self {
        self.scale(a)
    }
}

impl<const N: usize> Div<f64> for Taylor<N> {
    type Output = Self;
    fn div(self, a: f64) -> Self {
        self.scale(1.0 / a)
    }
}

impl<const N: usize> Add<Taylor<N>> for f64 {
    type Output = Taylor<N>;
    fn add(self, t: Taylor<N>) -> Taylor<N> {
        t + self
    }
}

impl<const N: usize> Sub<Taylor<N>> for f64 {
    type Output = Taylor<N>;
    fn sub(self, t: Taylor<N>) -> Taylor<N> {
        -t + self
    }
}

impl<const N: usize> Mul<Taylor<N>> for f64 {
    type Output = Taylor<N>;
    fn mul(self, t: Taylor<N>) -> Taylor<N> {
        t.scale(self)
    }
}

impl<const N: usize> Div<Taylor<N>> for f64 {
    type Output = Taylor<N>;
    fn div(self, t: Taylor<N>) -> Taylor<N> {
        Taylor::constant(self) / t
    }
}
