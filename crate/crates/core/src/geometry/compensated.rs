//! Error-free transformations used where cancellation would otherwise
//! dominate (near-parallel line pairs).

pub(crate) type V3 = [f64; 3];

/// `a*b - c*d` with a single rounding error of the result (Kahan).
#[inline]
pub(crate) fn diff_of_products(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let w = c * d;
    let err = (-c).mul_add(d, w);
    let f = a.mul_add(b, -w);
    f + err
}

#[inline]
pub(crate) fn cross(a: V3, b: V3) -> V3 {
    [
        diff_of_products(a[1], b[2], a[2], b[1]),
        diff_of_products(a[2], b[0], a[0], b[2]),
        diff_of_products(a[0], b[1], a[1], b[0]),
    ]
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Dot product accumulated in twice working precision (Ogita–Rump–Oishi).
#[derive(Default, Clone, Copy)]
pub(crate) struct Dot2 {
    hi: f64,
    lo: f64,
}

impl Dot2 {
    #[inline]
    pub(crate) fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let perr = a.mul_add(b, -p);
        let (s, serr) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += perr + serr;
    }

    #[inline]
    pub(crate) fn add_dot(&mut self, a: V3, b: V3) {
        for k in 0..3 {
            self.add_product(a[k], b[k]);
        }
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.hi + self.lo
    }
}

#[inline]
pub(crate) fn dot2(a: V3, b: V3) -> f64 {
    let mut acc = Dot2::default();
    acc.add_dot(a, b);
    acc.value()
}

#[inline]
pub(crate) fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: V3) -> f64 {
    a[0].hypot(a[1]).hypot(a[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_of_products_survives_cancellation() {
        // (1 + 2^-30)^2 - (1 + 2^-29) = 2^-60 exactly
        let a = 1.0 + 2f64.powi(-30);
        assert_eq!(diff_of_products(a, a, 1.0 + 2f64.powi(-29), 1.0), 2f64.powi(-60));
        assert_eq!(a * a - (1.0 + 2f64.powi(-29)), 0.0);
    }

    #[test]
    fn dot2_recovers_cancelled_terms() {
        let big = 1e16;
        assert_eq!(dot2([big, 1.0, -big], [1.0, 1.0, 1.0]), 1.0);
    }
}
