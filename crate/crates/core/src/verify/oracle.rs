//! Independent reference values for geometric and rendering quantities.

use super::dyadic::{dcomb, ddot, dvec, Dyadic};

/// Distance between the lines `o1 + s·d1` and `o2 + t·d2`, from the
/// least-squares closest points solved in exact arithmetic. Only the final
/// quotient and square root round.
pub fn line_distance_exact(o1: [f64; 3], d1: [f64; 3], o2: [f64; 3], d2: [f64; 3]) -> f64 {
    let (o1, d1, o2, d2) = (dvec(o1), dvec(d1), dvec(o2), dvec(d2));
    let w0: [Dyadic; 3] = std::array::from_fn(|k| &o1[k] - &o2[k]);
    let a = ddot(&d1, &d1);
    let b = ddot(&d1, &d2);
    let c = ddot(&d2, &d2);
    let d = ddot(&d1, &w0);
    let e = ddot(&d2, &w0);
    let den = &(&a * &c) - &(&b * &b);
    if den.is_zero() {
        // parallel: project w0 off d1; the result is scaled by a
        let scaled = dcomb(&a, &w0, &(-&d), &d1);
        let n2 = ddot(&scaled, &scaled);
        return n2.ratio_f64(&(&a * &a)).sqrt();
    }
    // den·s = b e − c d, den·t = a e − b d; den·w = den·w0 + (den·s) d1 − (den·t) d2
    let s = &(&b * &e) - &(&c * &d);
    let t = &(&a * &e) - &(&b * &d);
    let partial = dcomb(&den, &w0, &s, &d1);
    let w: [Dyadic; 3] = std::array::from_fn(|k| &partial[k] - &(&t * &d2[k]));
    let n2 = ddot(&w, &w);
    n2.ratio_f64(&(&den * &den)).sqrt()
}

/// `1 − exp(−σ L)`: opacity of a homogeneous segment, which is also its
/// color for unit emission over a black background.
pub fn homogeneous_opacity(sigma: f64, length: f64) -> f64 {
    -(-sigma * length).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let z = [0.0, 0.0, 0.0];
        assert_eq!(line_distance_exact(z, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]), 1.0);
        assert_eq!(line_distance_exact(z, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]), 1.0);
        assert_eq!(line_distance_exact(z, [0.0, 0.0, 1.0], [0.0, 3.0, 5.0], [0.0, 0.0, -2.0]), 3.0);
        assert_eq!(
            line_distance_exact([1.0, 2.0, 3.0], [1.0, 1.0, 0.0], [1.0, 2.0, 3.0], [0.0, 1.0, 1.0]),
            0.0
        );
    }

    #[test]
    fn agrees_with_float_closed_form_on_generic_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut v = || std::array::from_fn::<f64, 3, _>(|_| rng.random_range(-2.0..2.0));
        for _ in 0..200 {
            let (o1, d1, o2, d2) = (v(), v(), v(), v());
            let c = [
                d1[1] * d2[2] - d1[2] * d2[1],
                d1[2] * d2[0] - d1[0] * d2[2],
                d1[0] * d2[1] - d1[1] * d2[0],
            ];
            let w = [o1[0] - o2[0], o1[1] - o2[1], o1[2] - o2[2]];
            let cn = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            let expect = (w[0] * c[0] + w[1] * c[1] + w[2] * c[2]).abs() / cn;
            let got = line_distance_exact(o1, d1, o2, d2);
            assert!((got - expect).abs() < 1e-9 * (1.0 + expect), "{got} vs {expect}");
        }
    }
}
