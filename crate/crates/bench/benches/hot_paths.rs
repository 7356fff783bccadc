use criterion::{black_box, criterion_group, criterion_main, Criterion};
use pcav::concepts::{fit_pattern_cav, fit_svm, HookPoint, LabelSource, SvmConfig};
use pcav::clarc::pclarc_map;
use pcav::models::{softmax_cross_entropy, Mode, NetworkModel};
use pcav::numerics::{norm, Rng, Tensor};

fn labeled_features(n: usize, d: usize, seed: u64) -> (Tensor, Vec<f64>) {
    let mut rng = Rng::from_seed(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut row: Vec<f64> = (0..d).map(|_| rng.gaussian(0.0, 1.0)).collect();
        row[0] += 2.0 * label;
        rows.push(row);
        y.push(label);
    }
    (Tensor::from_rows(&rows).unwrap(), y)
}

fn bench_pattern_fit(c: &mut Criterion) {
    let (x, y) = labeled_features(500, 128, 1);
    c.bench_function("fit_pattern_cav 500x128", |b| {
        b.iter(|| {
            fit_pattern_cav(
                black_box(&x),
                black_box(&y),
                HookPoint::Input,
                LabelSource::GroundTruth,
                1e-12,
            )
            .unwrap()
        })
    });
}

fn bench_svm_fit(c: &mut Criterion) {
    let (x, y) = labeled_features(200, 64, 2);
    let cfg = SvmConfig {
        epochs: 50,
        ..SvmConfig::default()
    };
    c.bench_function("pegasos 200x64 50ep", |b| {
        b.iter(|| fit_svm(black_box(&x), black_box(&y), &cfg).unwrap())
    });
}

fn bench_projection(c: &mut Criterion) {
    let mut rng = Rng::from_seed(3);
    let d = 1024;
    let v: Vec<f64> = (0..d).map(|_| rng.gaussian(0.0, 1.0)).collect();
    let len = norm(&v);
    let v: Vec<f64> = v.iter().map(|x| x / len).collect();
    let x: Vec<f64> = (0..d).map(|_| rng.gaussian(0.0, 1.0)).collect();
    let z: Vec<f64> = (0..d).map(|_| rng.gaussian(0.0, 1.0)).collect();
    c.bench_function("pclarc_map d=1024", |b| {
        b.iter(|| pclarc_map(black_box(&x), &v, &z).unwrap())
    });
}

fn bench_conv_forward(c: &mut Criterion) {
    let model = NetworkModel::conv_classifier((1, 16, 16), 10, 0).unwrap();
    let mut rng = Rng::from_seed(4);
    let data: Vec<f64> = (0..32 * 256).map(|_| rng.uniform()).collect();
    let x = Tensor::new(vec![32, 256], data).unwrap();
    c.bench_function("conv forward batch=32", |b| {
        b.iter(|| model.logits_eval(black_box(&x), None).unwrap())
    });
}

fn bench_conv_backward(c: &mut Criterion) {
    let model = NetworkModel::conv_classifier((1, 16, 16), 10, 0).unwrap();
    let mut rng = Rng::from_seed(5);
    let data: Vec<f64> = (0..32 * 256).map(|_| rng.uniform()).collect();
    let x = Tensor::new(vec![32, 256], data).unwrap();
    let targets: Vec<usize> = (0..32).map(|i| i % 10).collect();
    c.bench_function("conv fwd+bwd batch=32", |b| {
        b.iter(|| {
            let (logits, cache) = model.forward(black_box(&x), None, Mode::Eval, None).unwrap();
            let (_, dlogits) = softmax_cross_entropy(&logits, &targets);
            model.backward(&cache, &dlogits, 0)
        })
    });
}

criterion_group!(
    benches,
    bench_pattern_fit,
    bench_svm_fit,
    bench_projection,
    bench_conv_forward,
    bench_conv_backward
);
criterion_main!(benches);
