//! Double-double arithmetic: unevaluated sums of two f64s giving ~106-bit
//! mantissas. Used only where double precision provably runs out (borderline
//! exact-period tests, fiber coefficients for deep periods).
//!
//! Algorithms are the classical error-free transformations (Dekker, Knuth);
//! `two_prod` relies on `f64::mul_add` being a single correctly rounded fma.

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // requires |a| >= |b|
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn scale(self, k: f64) -> Dd {
        let (p, e) = two_prod(self.hi, k);
        let e = e + self.lo * k;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.scale(q1));
        let q2 = r.hi / o.hi;
        let r2 = r.sub(o.scale(q2));
        let q3 = r2.hi / o.hi;
        Dd::from_f64(q1).add(Dd::from_f64(q2)).add(Dd::from_f64(q3))
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // One Newton step on x = sqrt(a) from the double estimate.
        let x = self.hi.sqrt();
        let x_dd = Dd::from_f64(x);
        let err = self.sub(x_dd.mul(x_dd)).scale(0.5 / x);
        x_dd.add(err)
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    #[inline]
    pub fn lt(self, o: Dd) -> bool {
        self.hi < o.hi || (self.hi == o.hi && self.lo < o.lo)
    }
}

/// Complex number with double-double components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DdComplex {
    pub re: Dd,
    pub im: Dd,
}

impl DdComplex {
    pub const ZERO: DdComplex = DdComplex { re: Dd::ZERO, im: Dd::ZERO };

    pub fn from_c64(z: num_complex::Complex64) -> DdComplex {
        DdComplex { re: Dd::from_f64(z.re), im: Dd::from_f64(z.im) }
    }

    pub fn to_c64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn add(self, o: DdComplex) -> DdComplex {
        DdComplex { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    #[inline]
    pub fn sub(self, o: DdComplex) -> DdComplex {
        DdComplex { re: self.re.sub(o.re), im: self.im.sub(o.im) }
    }

    #[inline]
    pub fn mul(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    #[inline]
    pub fn scale(self, k: f64) -> DdComplex {
        DdComplex { re: self.re.scale(k), im: self.im.scale(k) }
    }

    pub fn conj(self) -> DdComplex {
        DdComplex { re: self.re, im: self.im.neg() }
    }

    pub fn div(self, o: DdComplex) -> DdComplex {
        let num = self.mul(o.conj());
        let den = o.norm_sqr();
        DdComplex { re: num.re.div(den), im: num.im.div(den) }
    }

    pub fn norm_sqr(self) -> Dd {
        self.re.mul(self.re).add(self.im.mul(self.im))
    }

    pub fn norm(self) -> Dd {
        self.norm_sqr().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_keeps_small_term() {
        // 1e16 + 1 - 1e16 loses the 1 in f64 but not in dd.
        let big = Dd::from_f64(1e16);
        let s = big.add(Dd::from_f64(1.0)).sub(big);
        assert_eq!(s.to_f64(), 1.0);
    }

    #[test]
    fn mul_matches_exact_small_ints() {
        let a = Dd::from_f64(3.0);
        let b = Dd::from_f64(7.0);
        assert_eq!(a.mul(b).to_f64(), 21.0);
        assert_eq!(a.mul(b).lo, 0.0);
    }

    #[test]
    fn mul_recovers_rounding_error() {
        // (1 + 2^-53)^2 = 1 + 2^-52 + 2^-106; the 2^-52 term survives in dd.
        let x = Dd { hi: 1.0, lo: 2f64.powi(-53) };
        let sq = x.mul(x);
        let excess = sq.sub(Dd::from_f64(1.0));
        assert!((excess.to_f64() - 2f64.powi(-52)).abs() < 1e-30);
    }

    #[test]
    fn div_roundtrips() {
        let a = Dd::from_f64(1.0).div(Dd::from_f64(3.0));
        let back = a.mul(Dd::from_f64(3.0));
        assert!((back.to_f64() - 1.0).abs() < 1e-31);
        assert!(back.sub(Dd::from_f64(1.0)).abs().to_f64() < 1e-31);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Dd::from_f64(2.0).sqrt();
        let err = a.mul(a).sub(Dd::from_f64(2.0)).abs();
        assert!(err.to_f64() < 1e-31);
    }

    #[test]
    fn complex_mul_matches_f64_coarsely() {
        let z = num_complex::Complex64::new(0.3, -1.7);
        let w = num_complex::Complex64::new(-2.1, 0.4);
        let dd = DdComplex::from_c64(z).mul(DdComplex::from_c64(w)).to_c64();
        assert!((dd - z * w).norm() < 1e-15);
    }
}
