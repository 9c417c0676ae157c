//! Property checks shared by the `selfcheck` command and the acceptance
//! suite: line-distance oracle, parameterization invariance, gradients of
//! every differentiable operation, attention bias behavior and compositing.

use std::fmt;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::homogeneous_opacity;
use super::sweeps::{line_distance_sweep, origin_invariance_sweep, random_ray_pairs};
use crate::error::Result;
use crate::geometry::{distance_matrix, line_distance, Camera, PluckerLine, Vec3};
use crate::image::Image;
use crate::model::{attention_weights, biased_attention, DistancePenalty, GridGeometry, Model, ModelConfig, ViewInput};
use crate::render::{composite, render_rays, FieldVars, RaySampling};
use crate::tensor::{grad_check, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    /// Observed worst value; compared against `bound` with `<=`.
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
        }
    }

    fn failed_to_run(name: impl Into<String>, bound: f64) -> Self {
        Self {
            name: name.into(),
            value: f64::INFINITY,
            bound,
            passed: false,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<36} {:.3e} (bound {:.0e})", self.name, self.value, self.bound)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Worst relative error over the gradient checks.
    pub fn max_gradient_error(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with("grad/"))
            .map(|c| c.value)
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(f, "max gradient error {:.3e}", self.max_gradient_error())?;
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

pub const DISTANCE_TOL: f64 = 1e-7;
pub const INVARIANCE_TOL: f64 = 1e-12;
pub const GRAD_TOL: f64 = 1e-5;
pub const RENDER_GRAD_TOL: f64 = 1e-4;
pub const ATTENTION_TOL: f64 = 1e-12;
pub const CONSERVATION_TOL: f64 = 1e-12;
pub const CLOSED_FORM_TOL: f64 = 2e-3;

/// Oracle sweep of `distance` over `pairs` random pairs, plus symmetry.
pub fn distance_checks(distance: impl Fn(&PluckerLine, &PluckerLine) -> f64, pairs: usize, seed: u64) -> Vec<Check> {
    let sample = random_ray_pairs(pairs, seed);
    let report = line_distance_sweep(&distance, &sample);
    let mut asym = 0.0f64;
    for &(o1, d1, o2, d2) in &sample {
        if let (Ok(a), Ok(b)) = (PluckerLine::from_ray(o1, d1), PluckerLine::from_ray(o2, d2)) {
            asym = asym.max((distance(&a, &b) - distance(&b, &a)).abs());
        }
    }
    vec![
        Check::at_most("geometry/line_distance_vs_oracle", report.max_abs_err, DISTANCE_TOL),
        Check::at_most("geometry/line_distance_symmetry", asym, INVARIANCE_TOL),
    ]
}

pub fn invariance_checks(rays: usize, seed: u64) -> Vec<Check> {
    let (shift, incidence) = origin_invariance_sweep(rays, seed);
    vec![
        Check::at_most("geometry/origin_shift_invariance", shift, INVARIANCE_TOL),
        Check::at_most("geometry/direction_moment_orthogonal", incidence, INVARIANCE_TOL),
    ]
}

fn random(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::uniform(shape.to_vec(), lo, hi, rng)
}

/// Scalar probe `Σ w ⊙ y` with fixed irregular weights, so that permuted or
/// transposed gradients do not cancel.
fn probe(tape: &Tape<f64>, y: Var) -> Result<Var> {
    let shape = tape.shape(y);
    let w = Tensor::from_fn(shape, |i| ((i * 7919 + 13) % 17) as f64 / 17.0 - 0.45);
    tape.weighted_sum(y, &w)
}

type Unary = Box<dyn Fn(&Tape<f64>, Var) -> Result<Var>>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Tensor<f64>, Unary)> {
    let mut cases: Vec<(&'static str, Tensor<f64>, Unary)> = Vec::new();
    let x34 = random(&[3, 4], -1.5, 1.5, rng);
    let c34 = random(&[3, 4], -1.0, 1.0, rng);
    let w45 = random(&[4, 5], -1.0, 1.0, rng);
    let b5 = random(&[5], -0.5, 0.5, rng);
    let pos = random(&[3, 4], 0.5, 2.0, rng);

    cases.push(("gelu", x34.clone(), Box::new(|t, x| probe(t, t.gelu(x)))));
    cases.push(("sigmoid", x34.clone(), Box::new(|t, x| probe(t, t.sigmoid(x)))));
    cases.push(("softplus", x34.clone(), Box::new(|t, x| probe(t, t.softplus(x)))));
    cases.push(("tanh", x34.clone(), Box::new(|t, x| probe(t, t.tanh(x)))));
    cases.push(("exp", x34.clone(), Box::new(|t, x| probe(t, t.exp(x)))));
    cases.push(("ln", pos, Box::new(|t, x| probe(t, t.ln(x)))));
    cases.push(("scale", x34.clone(), Box::new(|t, x| probe(t, t.scale(x, -1.7)))));
    {
        let c = c34.clone();
        cases.push(("add", x34.clone(), Box::new(move |t, x| probe(t, t.add(x, t.constant(c.clone()))?))));
    }
    {
        let c = c34.clone();
        cases.push(("sub", x34.clone(), Box::new(move |t, x| probe(t, t.sub(t.constant(c.clone()), x)?))));
    }
    {
        let c = c34.clone();
        cases.push(("mul", x34.clone(), Box::new(move |t, x| probe(t, t.mul(x, t.constant(c.clone()))?))));
    }
    cases.push(("mul_self", x34.clone(), Box::new(|t, x| probe(t, t.mul(x, x)?))));
    {
        let c = c34.clone();
        cases.push((
            "add_bias",
            random(&[4], -1.0, 1.0, rng),
            Box::new(move |t, b| probe(t, t.add_bias(t.constant(c.clone()), b)?)),
        ));
    }
    cases.push(("sum", x34.clone(), Box::new(|t, x| Ok(t.sum(x)))));
    cases.push(("mean", x34.clone(), Box::new(|t, x| Ok(t.mean(x)))));
    {
        let c = c34.clone();
        cases.push(("mse", x34.clone(), Box::new(move |t, x| t.mse(x, t.constant(c.clone())))));
    }
    {
        let w = w45.clone();
        cases.push((
            "matmul_left",
            x34.clone(),
            Box::new(move |t, x| probe(t, t.matmul(x, t.constant(w.clone()))?)),
        ));
    }
    {
        let a = x34.clone();
        cases.push((
            "matmul_right",
            w45.clone(),
            Box::new(move |t, w| probe(t, t.matmul(t.constant(a.clone()), w)?)),
        ));
    }
    {
        let a = random(&[2, 3, 4], -1.0, 1.0, rng);
        cases.push((
            "matmul_batched",
            random(&[2, 4, 3], -1.0, 1.0, rng),
            Box::new(move |t, w| probe(t, t.matmul(t.constant(a.clone()), w)?)),
        ));
    }
    {
        let (w, b) = (w45.clone(), b5.clone());
        cases.push((
            "linear_input",
            x34.clone(),
            Box::new(move |t, x| probe(t, t.linear(x, t.constant(w.clone()), Some(t.constant(b.clone())))?)),
        ));
    }
    {
        let (a, b) = (x34.clone(), b5.clone());
        cases.push((
            "linear_weight",
            w45.clone(),
            Box::new(move |t, w| probe(t, t.linear(t.constant(a.clone()), w, Some(t.constant(b.clone())))?)),
        ));
    }
    {
        let (a, w) = (x34.clone(), w45.clone());
        cases.push((
            "linear_bias",
            b5,
            Box::new(move |t, b| probe(t, t.linear(t.constant(a.clone()), t.constant(w.clone()), Some(b))?)),
        ));
    }
    cases.push(("reshape", x34.clone(), Box::new(|t, x| probe(t, t.reshape(x, &[2, 6])?))));
    cases.push(("transpose", x34.clone(), Box::new(|t, x| probe(t, t.transpose(x)?))));
    cases.push((
        "swap_leading",
        random(&[2, 3, 4], -1.0, 1.0, rng),
        Box::new(|t, x| probe(t, t.swap_leading(x)?)),
    ));
    {
        let c = random(&[2, 4], -1.0, 1.0, rng);
        cases.push((
            "concat_rows",
            x34.clone(),
            Box::new(move |t, x| probe(t, t.concat_rows(&[t.constant(c.clone()), x, x])?)),
        ));
    }
    {
        let c = random(&[3, 2], -1.0, 1.0, rng);
        cases.push((
            "concat_cols",
            x34.clone(),
            Box::new(move |t, x| probe(t, t.concat_cols(&[x, t.constant(c.clone())])?)),
        ));
    }
    cases.push(("slice_cols", x34.clone(), Box::new(|t, x| probe(t, t.slice_cols(x, 1, 3)?))));
    cases.push(("slice_rows", x34.clone(), Box::new(|t, x| probe(t, t.slice_rows(x, 1, 3)?))));
    cases.push((
        "scatter_rows",
        x34.clone(),
        Box::new(|t, x| probe(t, t.scatter_rows(x, &[4, 0, 2], 5, &[0.3, 0.2, 0.1, 0.9])?)),
    ));
    cases.push((
        "softmax",
        random(&[2, 3, 4], -2.0, 2.0, rng),
        Box::new(|t, x| probe(t, t.softmax(x)?)),
    ));
    {
        let (g, b) = (random(&[4], 0.5, 1.5, rng), random(&[4], -0.5, 0.5, rng));
        cases.push((
            "layer_norm_input",
            x34.clone(),
            Box::new(move |t, x| probe(t, t.layer_norm(x, t.constant(g.clone()), t.constant(b.clone()), 1e-5)?)),
        ));
    }
    {
        let (a, b) = (x34.clone(), random(&[4], -0.5, 0.5, rng));
        cases.push((
            "layer_norm_gain",
            random(&[4], 0.5, 1.5, rng),
            Box::new(move |t, g| probe(t, t.layer_norm(t.constant(a.clone()), g, t.constant(b.clone()), 1e-5)?)),
        ));
    }
    {
        let k = random(&[3, 2, 2, 2], -1.0, 1.0, rng);
        cases.push((
            "transposed_conv_input",
            random(&[3, 2, 2], -1.0, 1.0, rng),
            Box::new(move |t, x| probe(t, t.transposed_conv_2x(x, t.constant(k.clone()))?)),
        ));
    }
    {
        let x = random(&[3, 2, 2], -1.0, 1.0, rng);
        cases.push((
            "transposed_conv_kernel",
            random(&[3, 2, 2, 2], -1.0, 1.0, rng),
            Box::new(move |t, k| probe(t, t.transposed_conv_2x(t.constant(x.clone()), k)?)),
        ));
    }
    {
        let d = Rc::new(random(&[3, 4], 0.0, 2.0, rng));
        let d2 = Rc::clone(&d);
        let s = Tensor::scalar(0.7);
        cases.push((
            "distance_bias_logits",
            random(&[2, 3, 4], -1.0, 1.0, rng),
            Box::new(move |t, x| probe(t, t.sub_scaled_const(x, t.constant(s.clone()), &d)?)),
        ));
        let x = random(&[2, 3, 4], -1.0, 1.0, rng);
        cases.push((
            "distance_bias_gamma",
            Tensor::new(vec![1], vec![0.7]).unwrap(),
            Box::new(move |t, s| probe(t, t.sub_scaled_const(t.constant(x.clone()), s, &d2)?)),
        ));
    }
    {
        let (k, v) = (random(&[2, 5, 4], -1.0, 1.0, rng), random(&[2, 5, 3], -1.0, 1.0, rng));
        let d = Rc::new(random(&[3, 5], 0.0, 2.0, rng));
        cases.push((
            "biased_attention_query",
            random(&[2, 3, 4], -1.0, 1.0, rng),
            Box::new(move |t, q| {
                let gamma = t.constant(Tensor::new(vec![1], vec![0.8])?);
                let pen = DistancePenalty { gamma, distances: &d };
                probe(t, biased_attention(t, q, t.constant(k.clone()), t.constant(v.clone()), Some(pen))?)
            }),
        ));
    }
    let coords: Vec<(f64, f64)> = (0..6).map(|_| (rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2))).collect();
    cases.push((
        "sample_plane",
        random(&[3, 3, 2], -1.0, 1.0, rng),
        Box::new(move |t, g| probe(t, t.sample_plane(g, &coords)?)),
    ));
    {
        let points: Vec<[f64; 3]> = (0..6).map(|_| [0; 3].map(|_: i32| rng.random_range(-1.0..1.0))).collect();
        let others = [random(&[3, 3, 2], -1.0, 1.0, rng), random(&[3, 3, 2], -1.0, 1.0, rng)];
        cases.push((
            "point_features",
            random(&[3, 3, 2], -1.0, 1.0, rng),
            Box::new(move |t, g| {
                let planes = [t.constant(others[0].clone()), g, t.constant(others[1].clone())];
                probe(t, t.point_features(planes, &points)?)
            }),
        ));
    }
    {
        let (samples, rays) = (5, 2);
        let deltas: Vec<f64> = (0..samples * rays).map(|_| rng.random_range(0.05..0.4)).collect();
        let d2 = deltas.clone();
        let sig = random(&[samples * rays, 1], 0.1, 3.0, rng);
        let col = random(&[samples * rays, 3], 0.0, 1.0, rng);
        cases.push((
            "composite_colors",
            col.clone(),
            Box::new(move |t, c| probe(t, t.composite(c, t.constant(sig.clone()), samples, &deltas, [1.0, 0.5, 0.0])?)),
        ));
        let sig = random(&[samples * rays, 1], 0.1, 3.0, rng);
        cases.push((
            "composite_sigmas",
            sig,
            Box::new(move |t, s| probe(t, t.composite(t.constant(col.clone()), s, samples, &d2, [1.0, 0.5, 0.0])?)),
        ));
    }
    cases
}

/// `grad_check` on every differentiable tape operation.
pub fn operation_gradient_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    op_cases(&mut rng)
        .into_iter()
        .map(|(name, x, f)| match grad_check(|t, v| f(t, v), &x) {
            Ok(err) => Check::at_most(format!("grad/{name}"), err, GRAD_TOL),
            Err(_) => Check::failed_to_run(format!("grad/{name}"), GRAD_TOL),
        })
        .collect()
}

fn tiny_camera(size: usize) -> Camera {
    let k = Camera::intrinsics_from_fov(40.0, size, size);
    Camera::look_at(Vec3::new(1.6, -2.0, 1.1), Vec3::zeros(), Vec3::z(), k, size, size).expect("valid camera")
}

fn pixel_rays(cam: &Camera) -> Vec<(Vec3, Vec3)> {
    let n = cam.width();
    (0..n * n)
        .map(|p| (cam.center(), cam.ray_direction((p % n) as f64 + 0.5, (p / n) as f64 + 0.5)))
        .collect()
}

/// Render a 2×2 image from a random field and take the MSE against a fixed
/// target; checks the gradient with respect to every plane and decoder
/// parameter.
pub fn render_gradient_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, c, hidden) = (4, 3, 6);
    let mut params = [
        random(&[m, m, c], -1.0, 1.0, &mut rng),
        random(&[m, m, c], -1.0, 1.0, &mut rng),
        random(&[m, m, c], -1.0, 1.0, &mut rng),
        random(&[c, hidden], -1.0, 1.0, &mut rng),
        random(&[hidden], -0.5, 0.5, &mut rng),
        random(&[hidden, 4], -1.0, 1.0, &mut rng),
        random(&[4], -0.5, 0.5, &mut rng),
    ];
    params[6].data_mut()[3] = 1.0;
    let names = [
        "plane_xy",
        "plane_yz",
        "plane_zx",
        "fc1_weight",
        "fc1_bias",
        "fc2_weight",
        "fc2_bias",
    ];
    let cam = tiny_camera(2);
    let rays = pixel_rays(&cam);
    let target = random(&[4, 3], 0.0, 1.0, &mut rng);
    let sampling = RaySampling {
        samples: 12,
        jitter: false,
        background: [1.0; 3],
    };
    (0..params.len())
        .map(|i| {
            let f = |t: &Tape<f64>, x: Var| -> Result<Var> {
                let v: Vec<Var> = (0..params.len())
                    .map(|j| if j == i { x } else { t.constant(params[j].clone()) })
                    .collect();
                let field = FieldVars {
                    planes: [v[0], v[1], v[2]],
                    fc1: (v[3], v[4]),
                    fc2: (v[5], v[6]),
                };
                let img = render_rays(t, &field, &rays, &sampling, None)?;
                t.mse(img, t.constant(target.clone()))
            };
            let name = format!("grad/render_mse_2x2/{}", names[i]);
            match grad_check(f, &params[i]) {
                Ok(err) => Check::at_most(name, err, RENDER_GRAD_TOL),
                Err(_) => Check::failed_to_run(name, RENDER_GRAD_TOL),
            }
        })
        .collect()
}

/// Images and cameras to rendered pixels through a tiny model, checked
/// against selected parameters.
pub fn model_gradient_checks(seed: u64) -> Vec<Check> {
    let cfg = ModelConfig {
        layers: 1,
        hidden: 8,
        heads: 2,
        grid: 2,
        triplane_dim: 3,
        patch: 4,
        image_dim: 4,
        ffn_ratio: 2,
        field_hidden: 4,
        density_bias_init: 1.0,
        ..ModelConfig::default()
    };
    let model = Model::<f64>::new(cfg.clone(), seed).expect("valid toy model");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let size = 4;
    let img = Image::new(size, size, (0..size * size * 3).map(|_| rng.random_range(0.0..1.0)).collect()).expect("sized");
    let cam = tiny_camera(size);
    let rays: Vec<_> = pixel_rays(&cam).into_iter().step_by(5).collect();
    let target = random(&[rays.len(), 3], 0.0, 1.0, &mut rng);
    let grid = GridGeometry::<f64>::new(cfg.grid);
    let sampling = RaySampling {
        samples: 6,
        jitter: false,
        background: [1.0; 3],
    };
    let names = [
        "layer0/cross/gamma_raw",
        "layer0/self/gamma_raw",
        "layer0/cross/k/weight",
        "layer0/self/q/weight",
        "layer0/ffn/fc1/weight",
        "query/proj/weight",
        "embed/proj/weight",
        "upsample/kernel",
        "field/fc2/bias",
    ];
    names
        .iter()
        .map(|&name| {
            let x = model.params.get(name).expect("named parameter").clone();
            let f = |t: &Tape<f64>, v: Var| -> Result<Var> {
                let mut b = model.params.bind(t);
                b.rebind(name, v)?;
                let views = [ViewInput { image: &img, camera: &cam }];
                let enc = model.encode(t, &b, &grid, &views)?;
                let field = FieldVars::from_bindings(enc.planes, &b)?;
                let out = render_rays(t, &field, &rays, &sampling, None)?;
                t.mse(out, t.constant(target.clone()))
            };
            let label = format!("grad/model_render_mse/{name}");
            match grad_check(f, &x) {
                Ok(err) => Check::at_most(label, err, RENDER_GRAD_TOL),
                Err(_) => Check::failed_to_run(label, RENDER_GRAD_TOL),
            }
        })
        .collect()
}

/// γ = 0 reduction, single-entry monotonicity and zero CLS columns.
pub fn attention_checks(trials: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reduction = 0.0f64;
    let mut not_lowered = 0usize;
    let mut cls_bias = 0.0f64;
    for _ in 0..trials {
        let (h, nq, nk, dh) = (
            rng.random_range(1..4),
            rng.random_range(1..6),
            rng.random_range(2..7),
            rng.random_range(1..5),
        );
        let q = random(&[h, nq, dh], -2.0, 2.0, &mut rng);
        let k = random(&[h, nk, dh], -2.0, 2.0, &mut rng);
        let v = random(&[h, nk, 3], -2.0, 2.0, &mut rng);
        let d = random(&[nq, nk], 0.0, 3.0, &mut rng);
        let tape = Tape::<f64>::new();
        let (qv, kv, vv) = (tape.constant(q), tape.constant(k), tape.constant(v));
        let zero = tape.constant(Tensor::new(vec![1], vec![0.0]).expect("scalar"));
        let dist = Rc::new(d.clone());
        let pen = DistancePenalty {
            gamma: zero,
            distances: &dist,
        };
        let (Ok(a), Ok(b)) = (
            biased_attention(&tape, qv, kv, vv, Some(pen)),
            biased_attention(&tape, qv, kv, vv, None),
        ) else {
            reduction = f64::INFINITY;
            continue;
        };
        reduction = reduction.max(tape.value(a).max_abs_diff(&tape.value(b)).unwrap_or(f64::INFINITY));

        let gamma = tape.constant(Tensor::new(vec![1], vec![rng.random_range(0.1..2.0)]).expect("scalar"));
        let (i, j) = (rng.random_range(0..nq), rng.random_range(0..nk));
        let mut raised = d.clone();
        raised.data_mut()[i * nk + j] += rng.random_range(0.01..1.0);
        let raised = Rc::new(raised);
        let w0 = attention_weights(&tape, qv, kv, Some(DistancePenalty { gamma, distances: &dist }));
        let w1 = attention_weights(&tape, qv, kv, Some(DistancePenalty { gamma, distances: &raised }));
        match (w0, w1) {
            (Ok(w0), Ok(w1)) => {
                let (w0, w1) = (tape.value(w0), tape.value(w1));
                for head in 0..h {
                    let at = head * nq * nk + i * nk + j;
                    if !(w1.data()[at] < w0.data()[at]) {
                        not_lowered += 1;
                    }
                }
            }
            _ => not_lowered += 1,
        }

        let line = |rng: &mut ChaCha8Rng| {
            let o = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0);
            PluckerLine::from_ray(o, dir).expect("non-degenerate")
        };
        let queries: Vec<PluckerLine> = (0..nq).map(|_| line(&mut rng)).collect();
        let keys: Vec<Option<PluckerLine>> = (0..nk).map(|c| if c % 3 == 0 { None } else { Some(line(&mut rng)) }).collect();
        let dm = distance_matrix(&queries, &keys);
        for (c, key) in keys.iter().enumerate() {
            if key.is_none() {
                for r in 0..nq {
                    cls_bias = cls_bias.max(dm.get(r, c).abs());
                }
            }
        }
    }
    vec![
        Check::at_most("attention/zero_gamma_reduction", reduction, ATTENTION_TOL),
        Check::at_most("attention/raised_distance_not_lowered", not_lowered as f64, 0.0),
        Check::at_most("attention/cls_column_bias", cls_bias, 0.0),
    ]
}

/// Conservation on random rays and the constant-density closed form.
pub fn compositing_checks(rays: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conservation = 0.0f64;
    for _ in 0..rays {
        let r = rng.random_range(1..96);
        let colors: Vec<f64> = (0..3 * r).map(|_| rng.random_range(0.0..1.0)).collect();
        let sigmas: Vec<f64> = (0..r).map(|_| 10f64.powf(rng.random_range(-3.0..2.0))).collect();
        let deltas: Vec<f64> = (0..r).map(|_| rng.random_range(1e-3..0.2)).collect();
        let c = composite(&colors, &sigmas, &deltas, [1.0; 3]);
        let t_final = *c.transmittance.last().expect("r + 1 entries");
        conservation = conservation.max((c.opacity + t_final - 1.0).abs());
    }
    let mut closed = 0.0f64;
    for (sigma, near, far) in [(1.0, 0.0, 1.0), (0.5, 0.3, 2.1), (2.0, 1.0, 2.0), (0.05, 0.2, 3.4)] {
        // 64 equal segments tiling [near, far]
        let deltas = vec![(far - near) / 64.0; 64];
        let c = composite(&vec![0.0; 3 * 64], &vec![sigma; 64], &deltas, [0.0; 3]);
        closed = closed.max((c.opacity - homogeneous_opacity(sigma, far - near)).abs());
    }
    vec![
        Check::at_most("composite/conservation", conservation, CONSERVATION_TOL),
        Check::at_most("composite/constant_density_closed_form", closed, CLOSED_FORM_TOL),
    ]
}

/// Sizes of the randomized sweeps.
#[derive(Clone, Copy, Debug)]
pub struct SelfcheckSizes {
    pub line_pairs: usize,
    pub rays: usize,
    pub attention_trials: usize,
    pub composite_rays: usize,
}

impl Default for SelfcheckSizes {
    fn default() -> Self {
        Self {
            line_pairs: 10_000,
            rays: 1_000,
            attention_trials: 100,
            composite_rays: 1_000,
        }
    }
}

pub fn selfcheck(sizes: SelfcheckSizes, seed: u64) -> Report {
    selfcheck_with(line_distance, sizes, seed)
}

/// [`selfcheck`] with a substitute line-distance routine, so a mutated
/// routine can be shown to fail.
pub fn selfcheck_with(distance: impl Fn(&PluckerLine, &PluckerLine) -> f64, sizes: SelfcheckSizes, seed: u64) -> Report {
    let mut checks = distance_checks(distance, sizes.line_pairs, seed);
    checks.extend(invariance_checks(sizes.rays, seed.wrapping_add(1)));
    checks.extend(operation_gradient_checks(seed.wrapping_add(2)));
    checks.extend(render_gradient_checks(seed.wrapping_add(3)));
    checks.extend(model_gradient_checks(seed.wrapping_add(4)));
    checks.extend(attention_checks(sizes.attention_trials, seed.wrapping_add(5)));
    checks.extend(compositing_checks(sizes.composite_rays, seed.wrapping_add(6)));
    Report { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SelfcheckSizes {
        SelfcheckSizes {
            line_pairs: 500,
            rays: 100,
            attention_trials: 20,
            composite_rays: 100,
        }
    }

    #[test]
    fn fresh_build_passes() {
        let report = selfcheck(small(), 3);
        assert!(report.all_passed(), "{report}");
        assert!(report.max_gradient_error() > 0.0);
        assert!(report.to_string().contains("max gradient error"));
    }

    #[test]
    fn sign_mutation_fails_the_oracle() {
        // moment sum with the wrong sign on the second moment
        let mutated = |a: &PluckerLine, b: &PluckerLine| {
            let n = a.direction().cross(&b.direction());
            let num = (a.direction().dot(&(-b.moment())) + b.direction().dot(&a.moment())).abs();
            if n.norm() > 1e-9 {
                num / n.norm()
            } else {
                line_distance(a, b)
            }
        };
        let checks = distance_checks(mutated, 500, 1);
        assert!(!checks[0].passed);
    }
}
