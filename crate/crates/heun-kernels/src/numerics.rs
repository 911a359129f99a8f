//! Complex arithmetic and bivariate second-order jets.
//!
//! A [`Jet2`] carries a value together with the five partials
//! ∂x, ∂y, ∂²x, ∂x∂y, ∂²y through every arithmetic operation, so a
//! differential operator can be applied to any evaluable expression
//! without symbolic differentiation.  Second order is enough: the Heun
//! operator and the kernel equation contain at most second derivatives.
//!
//! Branch convention: principal logarithm with the cut on (−∞, 0].
//! Powers and logarithms reject operands on the cut instead of picking
//! a side silently.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// True when `z` lies on the branch cut (−∞, 0] of the principal logarithm.
pub fn on_cut(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0
}

/// Relative distance used when two complex values are compared.
pub fn rel_diff(u: C64, v: C64) -> f64 {
    let scale = u.norm().max(v.norm()).max(1e-300);
    (u - v).norm() / scale
}

/// Bivariate 2-jet over ℂ: value, gradient and (symmetric) Hessian.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub v: C64,
    pub dx: C64,
    pub dy: C64,
    pub dxx: C64,
    pub dxy: C64,
    pub dyy: C64,
}

impl Jet2 {
    pub fn constant(v: C64) -> Self {
        Jet2 { v, dx: ZERO, dy: ZERO, dxx: ZERO, dxy: ZERO, dyy: ZERO }
    }

    /// Coordinate jet for the first variable: dx = 1, everything else 0.
    pub fn var_x(v: C64) -> Self {
        Jet2 { v, dx: ONE, dy: ZERO, dxx: ZERO, dxy: ZERO, dyy: ZERO }
    }

    /// Coordinate jet for the second variable: dy = 1, everything else 0.
    pub fn var_y(v: C64) -> Self {
        Jet2 { v, dx: ZERO, dy: ONE, dxx: ZERO, dxy: ZERO, dyy: ZERO }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.dx.is_finite()
            && self.dy.is_finite()
            && self.dxx.is_finite()
            && self.dxy.is_finite()
            && self.dyy.is_finite()
    }

    pub fn mul(self, w: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * w.v,
            dx: self.dx * w.v + self.v * w.dx,
            dy: self.dy * w.v + self.v * w.dy,
            dxx: self.dxx * w.v + 2.0 * self.dx * w.dx + self.v * w.dxx,
            dxy: self.dxy * w.v + self.dx * w.dy + self.dy * w.dx + self.v * w.dxy,
            dyy: self.dyy * w.v + 2.0 * self.dy * w.dy + self.v * w.dyy,
        }
    }

    pub fn add(self, w: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + w.v,
            dx: self.dx + w.dx,
            dy: self.dy + w.dy,
            dxx: self.dxx + w.dxx,
            dxy: self.dxy + w.dxy,
            dyy: self.dyy + w.dyy,
        }
    }

    pub fn neg(self) -> Jet2 {
        Jet2 {
            v: -self.v,
            dx: -self.dx,
            dy: -self.dy,
            dxx: -self.dxx,
            dxy: -self.dxy,
            dyy: -self.dyy,
        }
    }

    pub fn sub(self, w: Jet2) -> Jet2 {
        self.add(w.neg())
    }

    pub fn scale(self, k: C64) -> Jet2 {
        Jet2 {
            v: k * self.v,
            dx: k * self.dx,
            dy: k * self.dy,
            dxx: k * self.dxx,
            dxy: k * self.dxy,
            dyy: k * self.dyy,
        }
    }

    /// Chain rule through a scalar map with value `f0` and derivatives
    /// `f1`, `f2` at `self.v`.
    fn chain(self, f0: C64, f1: C64, f2: C64) -> Jet2 {
        Jet2 {
            v: f0,
            dx: f1 * self.dx,
            dy: f1 * self.dy,
            dxx: f2 * self.dx * self.dx + f1 * self.dxx,
            dxy: f2 * self.dx * self.dy + f1 * self.dxy,
            dyy: f2 * self.dy * self.dy + f1 * self.dyy,
        }
    }

    pub fn inv(self) -> Result<Jet2> {
        if self.v == ZERO {
            return Err(Error::DivisionByZero);
        }
        let i = ONE / self.v;
        Ok(self.chain(i, -i * i, 2.0 * i * i * i))
    }

    pub fn div(self, w: Jet2) -> Result<Jet2> {
        Ok(self.mul(w.inv()?))
    }

    /// Principal branch `self^e = exp(e·log self)`, cut on (−∞, 0].
    pub fn pow(self, e: C64) -> Result<Jet2> {
        if self.v == ZERO {
            // z^e at 0 is fine only for plain positive integer powers,
            // which callers expand by multiplication; reject here.
            return Err(Error::SingularPower);
        }
        if on_cut(self.v) {
            return Err(Error::BranchCut);
        }
        let f0 = self.v.powc(e);
        let f1 = e * f0 / self.v;
        let f2 = e * (e - ONE) * f0 / (self.v * self.v);
        Ok(self.chain(f0, f1, f2))
    }

    pub fn exp(self) -> Jet2 {
        let f0 = self.v.exp();
        self.chain(f0, f0, f0)
    }

    pub fn ln(self) -> Result<Jet2> {
        if self.v == ZERO {
            return Err(Error::DivisionByZero);
        }
        if on_cut(self.v) {
            return Err(Error::BranchCut);
        }
        let i = ONE / self.v;
        Ok(self.chain(self.v.ln(), i, -i * i))
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2::add(self, o)
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2::sub(self, o)
    }
}

impl std::ops::Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2::mul(self, o)
    }
}

impl std::ops::Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2::neg(self)
    }
}

/// Common surface for plain complex values and jets, so the special
/// functions evaluate on either without duplication.
pub trait CValue: Copy {
    fn from_c(z: C64) -> Self;
    fn value(&self) -> C64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn div(self, o: Self) -> Result<Self>;
    fn powc(self, e: C64) -> Result<Self>;
    fn exp(self) -> Self;
    fn ln(self) -> Result<Self>;
    fn is_finite(&self) -> bool;

    fn add_c(self, z: C64) -> Self {
        self.add(Self::from_c(z))
    }
    fn mul_c(self, z: C64) -> Self {
        self.mul(Self::from_c(z))
    }
}

impl CValue for C64 {
    fn from_c(z: C64) -> Self {
        z
    }
    fn value(&self) -> C64 {
        *self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div(self, o: Self) -> Result<Self> {
        if o == ZERO {
            return Err(Error::DivisionByZero);
        }
        Ok(self / o)
    }
    fn powc(self, e: C64) -> Result<Self> {
        if self == ZERO {
            return Err(Error::SingularPower);
        }
        if on_cut(self) {
            return Err(Error::BranchCut);
        }
        Ok(C64::powc(self, e))
    }
    fn exp(self) -> Self {
        C64::exp(self)
    }
    fn ln(self) -> Result<Self> {
        if self == ZERO {
            return Err(Error::DivisionByZero);
        }
        if on_cut(self) {
            return Err(Error::BranchCut);
        }
        Ok(C64::ln(self))
    }
    fn is_finite(&self) -> bool {
        C64::is_finite(*self)
    }
}

impl CValue for Jet2 {
    fn from_c(z: C64) -> Self {
        Jet2::constant(z)
    }
    fn value(&self) -> C64 {
        self.v
    }
    fn add(self, o: Self) -> Self {
        Jet2::add(self, o)
    }
    fn sub(self, o: Self) -> Self {
        Jet2::sub(self, o)
    }
    fn mul(self, o: Self) -> Self {
        Jet2::mul(self, o)
    }
    fn neg(self) -> Self {
        Jet2::neg(self)
    }
    fn div(self, o: Self) -> Result<Self> {
        Jet2::div(self, o)
    }
    fn powc(self, e: C64) -> Result<Self> {
        Jet2::pow(self, e)
    }
    fn exp(self) -> Self {
        Jet2::exp(self)
    }
    fn ln(self) -> Result<Self> {
        Jet2::ln(self)
    }
    fn is_finite(&self) -> bool {
        Jet2::is_finite(&self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(u: C64, v: C64, tol: f64) {
        assert!(rel_diff(u, v) < tol, "{u} vs {v}");
    }

    #[test]
    fn coordinate_product() {
        let x = Jet2::var_x(cr(2.0));
        let y = Jet2::var_y(cr(3.0));
        let p = x * y;
        assert_eq!(p.v, cr(6.0));
        assert_eq!(p.dx, cr(3.0));
        assert_eq!(p.dy, cr(2.0));
        assert_eq!(p.dxy, cr(1.0));
        assert_eq!(p.dxx, ZERO);
        assert_eq!(p.dyy, ZERO);
    }

    #[test]
    fn multiplicative_identity() {
        let u = Jet2 {
            v: c(1.5, 0.25),
            dx: c(0.4, -0.3),
            dy: c(-0.2, 0.8),
            dxx: c(0.1, 0.1),
            dxy: c(-0.5, 0.2),
            dyy: c(0.7, -0.6),
        };
        assert_eq!(u * Jet2::constant(ONE), u);
    }

    #[test]
    fn square_product() {
        // x²·y² at (1,1): hand differentiation of x²y².
        let x = Jet2::var_x(cr(1.0));
        let y = Jet2::var_y(cr(1.0));
        let p = (x * x) * (y * y);
        assert_eq!(p.v, cr(1.0));
        assert_eq!(p.dx, cr(2.0));
        assert_eq!(p.dy, cr(2.0));
        assert_eq!(p.dxx, cr(2.0));
        assert_eq!(p.dyy, cr(2.0));
        assert_eq!(p.dxy, cr(4.0));
    }

    #[test]
    fn constant_sqrt() {
        let u = Jet2::constant(cr(4.0)).pow(cr(0.5)).unwrap();
        assert_eq!(u, Jet2::constant(cr(2.0)));
    }

    #[test]
    fn polynomial_power() {
        let u = Jet2::var_x(cr(3.0)).pow(cr(2.0)).unwrap();
        assert_close(u.v, cr(9.0), 1e-14);
        assert_close(u.dx, cr(6.0), 1e-14);
        assert_close(u.dxx, cr(2.0), 1e-14);
    }

    #[test]
    fn exp_of_coordinate() {
        let u = Jet2::var_x(cr(1.0)).exp();
        let e = cr(std::f64::consts::E);
        assert_close(u.v, e, 1e-15);
        assert_close(u.dx, e, 1e-15);
        assert_close(u.dxx, e, 1e-15);
        assert_eq!(Jet2::constant(ZERO).exp().v, ONE);
    }

    #[test]
    fn log_exp_round_trip() {
        for k in 1..20 {
            let x0 = cr(0.1 * k as f64);
            let u = Jet2::var_x(x0).exp().ln().unwrap();
            assert_close(u.v, x0, 1e-13);
            assert_close(u.dx, ONE, 1e-13);
            assert!(u.dxx.norm() < 1e-12);
        }
    }

    #[test]
    fn guards() {
        assert_eq!(Jet2::constant(cr(-1.0)).pow(cr(0.5)), Err(Error::BranchCut));
        assert_eq!(Jet2::constant(ZERO).pow(cr(-1.0)), Err(Error::SingularPower));
        assert_eq!(Jet2::constant(cr(1.0)).div(Jet2::constant(ZERO)), Err(Error::DivisionByZero));
        assert_eq!(Jet2::constant(cr(-2.0)).ln(), Err(Error::BranchCut));
    }

    /// Central finite difference of the value map of `f`, compared with
    /// the stored partials.  Oracle for the jet chain rules.  First
    /// partials use step 1e-5 at tolerance `tol`; second partials use a
    /// larger step (second differences at 1e-5 would drown in f64
    /// roundoff) at tolerance 1e-7.
    fn check_against_fd(f: impl Fn(Jet2, Jet2) -> Jet2, x0: C64, y0: C64, tol: f64) {
        let h = 1e-5;
        let h2 = 2e-4;
        let val = |x: C64, y: C64| f(Jet2::constant(x), Jet2::constant(y)).v;
        let j = f(Jet2::var_x(x0), Jet2::var_y(y0));
        let fd_x = (val(x0 + h, y0) - val(x0 - h, y0)) / (2.0 * h);
        let fd_y = (val(x0, y0 + h) - val(x0, y0 - h)) / (2.0 * h);
        let fd_xx = (val(x0 + h2, y0) - 2.0 * val(x0, y0) + val(x0 - h2, y0)) / (h2 * h2);
        let fd_yy = (val(x0, y0 + h2) - 2.0 * val(x0, y0) + val(x0, y0 - h2)) / (h2 * h2);
        let fd_xy = (val(x0 + h2, y0 + h2) - val(x0 + h2, y0 - h2) - val(x0 - h2, y0 + h2)
            + val(x0 - h2, y0 - h2))
            / (4.0 * h2 * h2);
        for (got, want) in [(j.dx, fd_x), (j.dy, fd_y)] {
            let scale = got.norm().max(want.norm()).max(1.0);
            assert!((got - want).norm() / scale < tol, "{got} vs fd {want}");
        }
        for (got, want) in [(j.dxx, fd_xx), (j.dyy, fd_yy), (j.dxy, fd_xy)] {
            let scale = got.norm().max(want.norm()).max(1.0);
            assert!((got - want).norm() / scale < 1e-7, "{got} vs fd {want}");
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let e = c(0.5, 0.5);
        check_against_fd(
            |x, y| x.pow(e).unwrap() * y,
            c(2.0, 0.3),
            c(1.5, -0.2),
            1e-8,
        );
        check_against_fd(
            |x, y| (x * y + Jet2::constant(cr(0.5))).exp(),
            c(0.4, 0.1),
            c(0.7, 0.2),
            1e-8,
        );
        check_against_fd(
            |x, y| x.div(y + Jet2::constant(cr(2.0))).unwrap().ln().unwrap(),
            c(1.2, 0.4),
            c(0.3, 0.1),
            1e-8,
        );
    }

    #[test]
    fn half_power_against_fd_oracle() {
        // x^(0.5+0.5i) at x = 2, relative 1e-8 against central differences.
        check_against_fd(|x, _| x.pow(c(0.5, 0.5)).unwrap(), cr(2.0), cr(1.0), 1e-8);
    }
}
