use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use datgan_bench::{cloud, conditioning, net, rng, uniform};
use datgan_core::decision::{chain_backward, decision_chain, decision_chain_taped, OutputCotangent};
use datgan_core::transport::{w_exact, w_sinkhorn, SinkhornConfig};
use datgan_core::DecisionParams;
use std::hint::black_box;

fn bench_chain(c: &mut Criterion) {
    let params = DecisionParams::default();
    let mut r = rng(1);
    let cond = conditioning(40, 4, &params, &mut r);
    let block = uniform(4, 4, 0.05, &mut r);
    c.bench_function("decision_chain/k4_d4", |b| {
        b.iter(|| decision_chain(black_box(&block), &cond, &params).unwrap())
    });
    let cot: Vec<OutputCotangent> = (0..4).map(|_| OutputCotangent::utility(1.0)).collect();
    c.bench_function("decision_chain/k4_d4_backward", |b| {
        b.iter(|| {
            let (_, tape) = decision_chain_taped(black_box(&block), &cond.ma, &params).unwrap();
            chain_backward(&tape, &cot).unwrap()
        })
    });
}

fn bench_transport(c: &mut Criterion) {
    let mut group = c.benchmark_group("w_exact");
    group.sample_size(10);
    for n in [64, 256, 512] {
        let mut r = rng(n as u64);
        let a = cloud(n, 4, &mut r);
        let b = cloud(n, 4, &mut r);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| w_exact(black_box(&a), black_box(&b)).unwrap().distance)
        });
    }
    group.finish();

    let mut r = rng(7);
    let a = cloud(256, 4, &mut r);
    let b = cloud(256, 4, &mut r);
    let cfg = SinkhornConfig::default();
    let mut group = c.benchmark_group("w_sinkhorn");
    group.sample_size(10);
    group.bench_function("256", |bch| bch.iter(|| w_sinkhorn(&a, &b, &cfg).unwrap().distance));
    group.finish();
}

fn bench_nn(c: &mut Criterion) {
    let mut r = rng(3);
    for shape in [[13usize, 4, 1], [24, 8, 1]] {
        let n = net(&shape, &mut r);
        let x: Vec<f64> = (0..shape[0]).map(|i| (i as f64 * 0.1).sin()).collect();
        let name = format!("{}x{}x{}", shape[0], shape[1], shape[2]);
        c.bench_function(&format!("net_forward/{name}"), |b| {
            b.iter(|| n.predict(black_box(&x)).unwrap())
        });
        c.bench_function(&format!("net_backward/{name}"), |b| {
            b.iter(|| {
                let (_, tape) = n.forward(black_box(&x)).unwrap();
                n.backward(&tape, &[1.0]).unwrap()
            })
        });
    }
}

criterion_group!(benches, bench_chain, bench_transport, bench_nn);
criterion_main!(benches);
