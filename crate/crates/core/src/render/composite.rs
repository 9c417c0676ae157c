//! Emission–absorption quadrature along rays.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

/// Result of compositing one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct Composite<T> {
    pub rgb: [T; 3],
    /// `Σ T_i α_i`.
    pub opacity: T,
    /// `T_1 … T_{r+1}`: transmittance before each sample and after the last.
    pub transmittance: Vec<T>,
}

/// `α_i = 1 − exp(−σ_i δ_i)`, `T_i = Π_{j<i} (1 − α_j)`,
/// `rgb = Σ T_i α_i c_i + T_{r+1} · background`. `colors` holds `r` RGB
/// triples back to back.
pub fn composite<T: Real>(colors: &[T], sigmas: &[T], deltas: &[T], background: [T; 3]) -> Composite<T> {
    let r = sigmas.len();
    debug_assert!(colors.len() == 3 * r && deltas.len() == r);
    let mut rgb = [T::zero(); 3];
    let mut opacity = T::zero();
    let mut trans = Vec::with_capacity(r + 1);
    let mut t = T::one();
    trans.push(t);
    for i in 0..r {
        let keep = (-sigmas[i] * deltas[i]).exp();
        let w = t * (T::one() - keep);
        for k in 0..3 {
            rgb[k] += w * colors[3 * i + k];
        }
        opacity += w;
        t *= keep;
        trans.push(t);
    }
    for k in 0..3 {
        rgb[k] += t * background[k];
    }
    Composite {
        rgb,
        opacity,
        transmittance: trans,
    }
}

impl<T: Real> Tape<T> {
    /// Composites `rays` rays of `samples` consecutive samples each.
    /// `colors: [rays·samples, 3]`, `sigmas: [rays·samples, 1]`, constant
    /// segment lengths `deltas`; returns `[rays, 3]`.
    pub fn composite(&self, colors: Var, sigmas: Var, samples: usize, deltas: &[T], background: [T; 3]) -> Result<Var> {
        let (cv, sv) = (self.value(colors), self.value(sigmas));
        let total = deltas.len();
        if samples == 0 || !total.is_multiple_of(samples) || cv.shape() != [total, 3] || sv.numel() != total {
            return Err(Error::dim(format!(
                "composite: colors {:?}, sigmas {:?}, {total} deltas, {samples} samples per ray",
                cv.shape(),
                sv.shape()
            )));
        }
        if deltas.iter().any(|d| !(*d > T::zero())) {
            return Err(Error::contract("segment lengths must be positive"));
        }
        let rays = total / samples;
        let mut out = Vec::with_capacity(rays * 3);
        let mut trans = Vec::with_capacity(rays * (samples + 1));
        for ray in 0..rays {
            let s = ray * samples;
            let c = composite(
                &cv.data()[3 * s..3 * (s + samples)],
                &sv.data()[s..s + samples],
                &deltas[s..s + samples],
                background,
            );
            out.extend(c.rgb);
            trans.extend(c.transmittance);
        }
        let deltas = deltas.to_vec();
        let result = Tensor::from_parts(vec![rays, 3], out);
        Ok(self.push_op(result, &[colors, sigmas], move |g, sink| {
            let col = cv.data();
            let mut dc = vec![T::zero(); total * 3];
            let mut ds = vec![T::zero(); total];
            for ray in 0..rays {
                let s = ray * samples;
                let gr = &g[3 * ray..3 * ray + 3];
                let tr = &trans[ray * (samples + 1)..(ray + 1) * (samples + 1)];
                let dot = |v: &[T]| v[0] * gr[0] + v[1] * gr[1] + v[2] * gr[2];
                // suffix = Σ_{j>i} w_j (c_j·g) + T_end (bg·g)
                let mut suffix = tr[samples] * dot(&background);
                for i in (0..samples).rev() {
                    let w = tr[i] - tr[i + 1];
                    let ci = &col[3 * (s + i)..3 * (s + i) + 3];
                    let cg = dot(ci);
                    for k in 0..3 {
                        dc[3 * (s + i) + k] = w * gr[k];
                    }
                    ds[s + i] = deltas[s + i] * (tr[i + 1] * cg - suffix);
                    suffix += w * cg;
                }
            }
            sink.add_slice(colors, &dc);
            sink.add_slice(sigmas, &ds);
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_space_shows_background() {
        let c = composite(&[0.3; 12], &[0.0; 4], &[0.5; 4], [1.0, 0.5, 0.25]);
        assert_eq!(c.rgb, [1.0, 0.5, 0.25]);
        assert_eq!(c.opacity, 0.0);
    }

    #[test]
    fn opaque_first_sample() {
        let colors = [0.2f64, 0.4, 0.6, 1.0, 1.0, 1.0];
        let c = composite(&colors, &[1e9, 3.0], &[0.1, 0.1], [1.0; 3]);
        for k in 0..3 {
            assert!((c.rgb[k] - colors[k]).abs() <= 1e-9);
        }
        assert!((c.opacity - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn homogeneous_segment_converges_to_closed_form() {
        let r = 64;
        let deltas = vec![1.0 / r as f64; r];
        let c = composite(&vec![1.0; 3 * r], &vec![1.0; r], &deltas, [0.0; 3]);
        let exact = 1.0 - (-1.0f64).exp();
        assert!((c.rgb[0] - exact).abs() <= 2e-3);
    }

    #[test]
    fn conservation_and_monotone_transmittance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let r = rng.random_range(1..40);
            let sig: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..20.0)).collect();
            let del: Vec<f64> = (0..r).map(|_| rng.random_range(0.001..0.2)).collect();
            let c = composite(&vec![0.5; 3 * r], &sig, &del, [1.0; 3]);
            let end = *c.transmittance.last().unwrap();
            assert!((c.opacity + end - 1.0).abs() <= 1e-12);
            assert!(c.transmittance.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (rays, s) = (3, 5);
        let colors = Tensor::uniform([rays * s, 3], 0.0, 1.0, &mut rng);
        let sigmas = Tensor::uniform([rays * s, 1], 0.0, 3.0, &mut rng);
        let deltas: Vec<f64> = (0..rays * s).map(|_| rng.random_range(0.05..0.4)).collect();
        let w = Tensor::uniform([rays, 3], -1.0, 1.0, &mut rng);
        let bg = [1.0, 0.9, 0.8];
        let err = grad_check(
            |t, c| {
                let sg = t.constant(sigmas.clone());
                let out = t.composite(c, sg, s, &deltas, bg)?;
                t.weighted_sum(out, &w)
            },
            &colors,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
        let err = grad_check(
            |t, sg| {
                let c = t.constant(colors.clone());
                let out = t.composite(c, sg, s, &deltas, bg)?;
                let sq = t.mul(out, out)?;
                t.weighted_sum(sq, &w)
            },
            &sigmas,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
    }
}
