//! Scalar abstraction shared by plain `f64` and forward-mode dual numbers.
//!
//! Geometry kernels are written once against [`Real`] so the design optimizer
//! can push a fixed number of tangent directions through exactly the same code
//! that produces the values.

use nalgebra::Vector3;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    nalgebra::Scalar
    + Copy
    + Debug
    + PartialOrd
    + num_traits::Zero
    + num_traits::One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
    fn cst(v: f64) -> Self;
    fn re(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn acos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    fn sq(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn acos(self) -> Self {
        f64::acos(self.clamp(-1.0, 1.0))
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// Value plus `N` directional derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// The `i`-th independent variable with value `v`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }

    /// Chain rule for a unary function with value `f` and derivative `df`.
    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= df;
        }
        Self { v: f, d }
    }
}

impl<const N: usize> PartialOrd for Dual<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.v.partial_cmp(&other.v)
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}
impl<const N: usize> AddAssign for Dual<N> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.v += o.v;
        for (a, b) in self.d.iter_mut().zip(o.d.iter()) {
            *a += b;
        }
    }
}
impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        self -= o;
        self
    }
}
impl<const N: usize> SubAssign for Dual<N> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.v -= o.v;
        for (a, b) in self.d.iter_mut().zip(o.d.iter()) {
            *a -= b;
        }
    }
}
impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Self { v: self.v * o.v, d }
    }
}
impl<const N: usize> MulAssign for Dual<N> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}
impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - q * o.d[i]) * inv;
        }
        Self { v: q, d }
    }
}
impl<const N: usize> DivAssign for Dual<N> {
    #[inline]
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}
impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.v, -1.0)
    }
}
impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: f64) -> Self {
        self.v += o;
        self
    }
}
impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: f64) -> Self {
        self.v -= o;
        self
    }
}
impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        self.chain(self.v * o, o)
    }
}
impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, o: f64) -> Self {
        self.chain(self.v / o, 1.0 / o)
    }
}

impl<const N: usize> num_traits::Zero for Dual<N> {
    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.v == 0.0 && self.d.iter().all(|x| *x == 0.0)
    }
}
impl<const N: usize> num_traits::One for Dual<N> {
    fn one() -> Self {
        Self::constant(1.0)
    }
}

impl<const N: usize> Real for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn re(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = self.v * self.v + x.v * x.v;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (x.v * self.d[i] - self.v * x.d[i]) / r2;
        }
        Self { v: self.v.atan2(x.v), d }
    }
    fn acos(self) -> Self {
        let c = self.v.clamp(-1.0, 1.0);
        let den = (1.0 - c * c).max(1e-300).sqrt();
        self.chain(c.acos(), -1.0 / den)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
}

pub fn norm<T: Real>(v: &Vector3<T>) -> T {
    v.dot(v).sqrt()
}

pub fn normalize<T: Real>(v: &Vector3<T>) -> Vector3<T> {
    let n = norm(v);
    v.map(|c| c / n)
}

pub fn lift<T: Real>(v: &Vector3<f64>) -> Vector3<T> {
    v.map(T::cst)
}

pub fn value<T: Real>(v: &Vector3<T>) -> Vector3<f64> {
    v.map(|c| c.re())
}

pub fn scale<T: Real>(v: &Vector3<T>, s: T) -> Vector3<T> {
    v.map(|c| c * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    type D = Dual<2>;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn unary_derivatives_match_finite_differences() {
        let x = 0.37;
        let d = D::var(x, 0);
        let cases: Vec<(D, f64)> = vec![
            (d.sqrt(), fd(f64::sqrt, x)),
            (d.sin(), fd(f64::sin, x)),
            (d.cos(), fd(f64::cos, x)),
            (d.acos(), fd(f64::acos, x)),
            (d.exp(), fd(f64::exp, x)),
            (d.ln(), fd(f64::ln, x)),
            (d * d / (d + 1.0), fd(|t| t * t / (t + 1.0), x)),
        ];
        for (got, want) in cases {
            assert!((got.d[0] - want).abs() < 1e-8, "{} vs {}", got.d[0], want);
            assert_eq!(got.d[1], 0.0);
        }
    }

    #[test]
    fn atan2_partials() {
        let (y, x) = (0.3, -0.8);
        let r = D::var(y, 0).atan2(D::var(x, 1));
        assert!((r.d[0] - fd(|t| t.atan2(x), y)).abs() < 1e-8);
        assert!((r.d[1] - fd(|t| y.atan2(t), x)).abs() < 1e-8);
    }

    #[test]
    fn nalgebra_vector_ops_propagate() {
        let a = Vector3::new(D::var(1.0, 0), D::constant(2.0), D::constant(0.5));
        let b = Vector3::new(D::constant(-1.0), D::var(3.0, 1), D::constant(2.0));
        let c = a.cross(&b);
        let s = a.dot(&b);
        assert_eq!(s.v, -1.0 + 6.0 + 1.0);
        assert_eq!(s.d, [-1.0, 2.0]);
        // c.z = a.x*b.y - a.y*b.x
        assert_eq!(c.z.v, 3.0 + 2.0);
        assert_eq!(c.z.d, [3.0, 1.0]);
        let n = norm(&a);
        assert!((n.d[0] - 1.0 / n.v).abs() < 1e-15);
    }
}
