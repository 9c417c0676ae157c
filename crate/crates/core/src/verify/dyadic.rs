//! Exact arithmetic on numbers of the form `m · 2^e` with integer `m`.
//! Every finite `f64` is such a number, so sums and products of inputs are
//! carried out without rounding.

use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};

#[derive(Clone, Debug)]
pub struct Dyadic {
    m: BigInt,
    e: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Self { m: BigInt::zero(), e: 0 }
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "dyadic conversion of {x}");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        let m = BigInt::from(mant);
        Self {
            m: if x < 0.0 { -m } else { m },
            e,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn abs(&self) -> Self {
        Self {
            m: self.m.abs(),
            e: self.e,
        }
    }

    /// Nearest `f64` to the non-negative quotient `self / other`, within one
    /// unit in the last place.
    pub fn ratio_f64(&self, other: &Dyadic) -> f64 {
        assert!(!other.is_zero(), "division by zero");
        if self.is_zero() {
            return 0.0;
        }
        let num = self.m.abs();
        let den = other.m.abs();
        let sign = if (self.m.sign() == Sign::Minus) != (other.m.sign() == Sign::Minus) {
            -1.0
        } else {
            1.0
        };
        let shift = (den.bits() as i64 - num.bits() as i64 + 64).max(0);
        let q: BigInt = (num << shift as u64) / den;
        // q has at least 64 significant bits; keep the top ones
        let extra = (q.bits() as i64 - 64).max(0);
        let top = (q >> extra as u64).to_f64().expect("64-bit quotient");
        sign * ldexp(top, self.e - other.e - shift + extra)
    }
}

fn ldexp(mut x: f64, mut k: i64) -> f64 {
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k as i32)
}

impl Add for &Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.e.min(rhs.e);
        let a = &self.m << (self.e - e) as u64;
        let b = &rhs.m << (rhs.e - e) as u64;
        Dyadic { m: a + b, e }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;

    fn neg(self) -> Dyadic {
        Dyadic { m: -&self.m, e: self.e }
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;

    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic {
            m: &self.m * &rhs.m,
            e: self.e + rhs.e,
        }
    }
}

pub type DVec = [Dyadic; 3];

pub fn dvec(v: [f64; 3]) -> DVec {
    v.map(Dyadic::from_f64)
}

pub fn ddot(a: &DVec, b: &DVec) -> Dyadic {
    let s = &(&a[0] * &b[0]) + &(&a[1] * &b[1]);
    &s + &(&a[2] * &b[2])
}

/// `a·x + b·y` componentwise with dyadic scalars.
pub fn dcomb(a: &Dyadic, x: &DVec, b: &Dyadic, y: &DVec) -> DVec {
    std::array::from_fn(|k| &(a * &x[k]) + &(b * &y[k]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_exact_sums() {
        for x in [1.0, -0.1, 3e-310, 1e300, 2f64.powi(-1074)] {
            let d = Dyadic::from_f64(x);
            assert_eq!(d.ratio_f64(&Dyadic::from_f64(1.0)), x);
        }
        // 0.1 + 0.2 - 0.3 is not zero exactly
        let s = &(&Dyadic::from_f64(0.1) + &Dyadic::from_f64(0.2)) - &Dyadic::from_f64(0.3);
        assert_eq!(s.ratio_f64(&Dyadic::from_f64(1.0)), 2f64.powi(-55));
        let big = Dyadic::from_f64(1e16);
        let one = Dyadic::from_f64(1.0);
        assert_eq!((&(&big + &one) - &big).ratio_f64(&one), 1.0);
    }

    #[test]
    fn quotient() {
        let a = Dyadic::from_f64(1.0);
        let b = Dyadic::from_f64(3.0);
        assert_eq!(a.ratio_f64(&b), 1.0 / 3.0);
        assert_eq!((-&a).ratio_f64(&b), -1.0 / 3.0);
    }
}
