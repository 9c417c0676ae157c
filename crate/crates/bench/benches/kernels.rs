use std::hint::black_box;
use std::rc::Rc;

use criterion::{criterion_group, criterion_main, Criterion};

use linefield_bench::{desk_config, desk_scene, random_lines, rng};
use linefield_core::geometry::{distance_matrix, line_distance};
use linefield_core::model::{biased_attention, DistancePenalty, GridGeometry};
use linefield_core::render::{render_rays, FieldVars};
use linefield_core::tensor::{Tape, Tensor};
use linefield_core::train::{reconstruct, train_step, NoPerceptual, TrainState};

fn geometry(c: &mut Criterion) {
    let lines = random_lines(1024, 1);
    c.bench_function("line_distance/1k_pairs", |b| {
        b.iter(|| lines.windows(2).map(|w| line_distance(&w[0], &w[1])).sum::<f64>())
    });
    let queries = random_lines(384, 2);
    let keys: Vec<_> = random_lines(130, 3).into_iter().map(Some).collect();
    c.bench_function("distance_matrix/384x130", |b| {
        b.iter(|| distance_matrix(black_box(&queries), &keys))
    });
}

fn attention(c: &mut Criterion) {
    let mut r = rng(4);
    let (h, nq, nk, dh) = (8, 384, 130, 8);
    let q = Tensor::<f64>::uniform([h, nq, dh], -1.0, 1.0, &mut r);
    let k = Tensor::<f64>::uniform([h, nk, dh], -1.0, 1.0, &mut r);
    let v = Tensor::<f64>::uniform([h, nk, dh], -1.0, 1.0, &mut r);
    let d = Rc::new(Tensor::<f64>::uniform([nq, nk], 0.0, 2.0, &mut r));
    c.bench_function("biased_attention/forward_backward", |b| {
        b.iter(|| {
            let tape = Tape::<f64>::new();
            let qv = tape.leaf(q.clone());
            let gamma = tape.leaf(Tensor::new(vec![1], vec![0.5]).unwrap());
            let pen = DistancePenalty { gamma, distances: &d };
            let out = biased_attention(&tape, qv, tape.constant(k.clone()), tape.constant(v.clone()), Some(pen)).unwrap();
            let loss = tape.sum(out);
            tape.backward(loss).unwrap()
        })
    });
}

fn rendering(c: &mut Criterion) {
    let cfg = desk_config();
    let scene = desk_scene();
    let state = TrainState::<f64>::new(&cfg).unwrap();
    let grid = GridGeometry::<f64>::new(cfg.model.grid);
    let rec = reconstruct(&state.model, &grid, &scene, &[0, 4], cfg.pose_frame).unwrap();
    let cam = &rec.cameras[2];
    let rays: Vec<_> = (0..256)
        .map(|i| (cam.center(), cam.ray_direction((i % 64) as f64 + 0.5, (i / 4) as f64 + 0.5)))
        .collect();
    c.bench_function("render_rays/256x64_forward_backward", |b| {
        b.iter(|| {
            let tape = Tape::<f64>::new();
            let field: FieldVars = rec.field.bind(&tape);
            let img = render_rays(&tape, &field, &rays, &cfg.render, Some(&mut rng(5))).unwrap();
            let loss = tape.sum(img);
            tape.backward(loss).unwrap()
        })
    });
}

fn training(c: &mut Criterion) {
    let cfg = desk_config();
    let data = vec![desk_scene()];
    let grid = GridGeometry::<f64>::new(cfg.model.grid);
    let mut state = TrainState::<f64>::new(&cfg).unwrap();
    let mut g = c.benchmark_group("train_step");
    g.sample_size(10);
    g.bench_function("desk_overfit", |b| {
        b.iter(|| train_step(&mut state, &data, &grid, &cfg, &NoPerceptual).unwrap())
    });
    g.finish();
}

criterion_group!(benches, geometry, attention, rendering, training);
criterion_main!(benches);
