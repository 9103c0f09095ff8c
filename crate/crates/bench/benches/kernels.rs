use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rotdet_core::{
    assign, average_precision, fit, match_frame, nms, total_loss, AngleLossKind, CodecParams, Detection, FitConfig,
    FitInit, HeadLayout, LossConfig, NmsConfig, RawPrediction, RawPredictions, RotatedBox,
};

fn random_box(r: &mut ChaCha8Rng, extent: f64) -> RotatedBox {
    let w = r.random_range(10.0..40.0);
    RotatedBox::new(
        r.random_range(0.0..extent),
        r.random_range(0.0..extent),
        w,
        w * r.random_range(1.5..3.0),
        r.random_range(-PI / 2.0..PI / 2.0),
    )
    .unwrap()
}

fn random_dets(r: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Detection> {
    (0..n).map(|_| Detection::new(random_box(r, extent), r.random())).collect()
}

fn bench_iou(c: &mut Criterion) {
    let a = RotatedBox::new(50.0, 50.0, 20.0, 50.0, 0.3).unwrap();
    let b = RotatedBox::new(58.0, 46.0, 22.0, 48.0, -0.4).unwrap();
    let far = RotatedBox::new(500.0, 50.0, 20.0, 50.0, 0.3).unwrap();
    c.bench_function("iou/overlapping", |bn| bn.iter(|| rotdet_core::iou(black_box(&a), black_box(&b))));
    c.bench_function("iou/disjoint", |bn| bn.iter(|| rotdet_core::iou(black_box(&a), black_box(&far))));
}

fn bench_nms(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let dets = random_dets(&mut r, 300, 300.0);
    let cfg = NmsConfig { conf_threshold: 0.0, iou_threshold: 0.45 };
    c.bench_function("nms/300", |bn| bn.iter(|| nms(black_box(&dets), &cfg)));
}

fn bench_loss(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let layout = HeadLayout::default_layout();
    let gts: Vec<RotatedBox> = (0..8).map(|_| random_box(&mut r, 600.0)).collect();
    let slots = (0..layout.num_slots())
        .map(|_| RawPrediction {
            tx: r.random_range(-1.0..1.0),
            ty: r.random_range(-1.0..1.0),
            tw: r.random_range(-0.5..0.5),
            th: r.random_range(-0.5..0.5),
            tangle: r.random_range(-2.0..2.0),
            tconf: r.random_range(-4.0..0.0),
        })
        .collect();
    let raw = RawPredictions::from_slots(layout.clone(), slots).unwrap();
    let params = CodecParams::wide();
    let assignment = assign(&gts, &layout, 0.7, Some((&raw, &params))).unwrap();
    let cfg = LossConfig::default();
    c.bench_function("total_loss/608px", |bn| {
        bn.iter(|| total_loss(black_box(&raw), &gts, &assignment, &cfg, &params).unwrap())
    });
    c.bench_function("assign/608px", |bn| bn.iter(|| assign(black_box(&gts), &layout, 0.7, Some((&raw, &params)))));
}

fn bench_ap(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let frames: Vec<(Vec<Detection>, Vec<RotatedBox>)> = (0..50)
        .map(|_| {
            let gts: Vec<RotatedBox> = (0..6).map(|_| random_box(&mut r, 300.0)).collect();
            let mut preds = random_dets(&mut r, 10, 300.0);
            preds.extend(gts.iter().map(|g| Detection::new(*g, r.random())));
            (preds, gts)
        })
        .collect();
    c.bench_function("match_and_ap/50_frames", |bn| {
        bn.iter(|| {
            let evals: Vec<_> = frames.iter().map(|(p, g)| match_frame(p, g, 0.5).unwrap()).collect();
            average_precision(&evals).unwrap()
        })
    });
}

fn bench_fit(c: &mut Criterion) {
    let gt = RotatedBox::new(64.0, 64.0, 24.0, 60.0, -1.45).unwrap();
    let mut cfg = FitConfig::new(AngleLossKind::PeriodicL1, CodecParams::wide(), FitInit::angle(2.5));
    cfg.steps = 50;
    c.bench_function("fit/50_steps", |bn| {
        bn.iter_batched(|| cfg.clone(), |cfg| fit(&cfg, black_box(&gt)).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, bench_iou, bench_nms, bench_loss, bench_ap, bench_fit);
criterion_main!(benches);
