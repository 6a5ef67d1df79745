use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use nlskam::ham::{lie_transform_with, norm, poisson_bracket, LieOptions};
use nlskam::kam::kam_step;
use nlskam::NormKind;
use nlskam_bench::{nls, step_zero};

fn bracket(c: &mut Criterion) {
    let mut g = c.benchmark_group("bracket");
    for radius in [1u32, 2, 3] {
        let h = nls(1, radius, 8);
        let f = nls(1, radius, 8).scale(nlskam::Complex64::new(0.0, 1.0));
        g.bench_with_input(BenchmarkId::new("nls_1d", radius), &radius, |b, _| {
            b.iter(|| poisson_bracket(black_box(&h), black_box(&f)).unwrap())
        });
    }
    let h = nls(2, 1, 8);
    g.bench_function("nls_2d_r1", |b| b.iter(|| poisson_bracket(black_box(&h), black_box(&h)).unwrap()));
    g.finish();
}

fn norms(c: &mut Criterion) {
    let h = nls(1, 4, 8);
    let mut g = c.benchmark_group("norm");
    for kind in [NormKind::Sup, NormKind::Star, NormKind::Plus] {
        g.bench_function(format!("{kind:?}").to_lowercase(), |b| b.iter(|| norm(black_box(&h), kind, 0.3).unwrap()));
    }
    g.finish();
}

fn lie(c: &mut Criterion) {
    let (cfg, st, f) = step_zero();
    let h = st.remainder();
    let opts = LieOptions { order_cap: cfg.lie_order_cap, rho: st.sched.rho, ..Default::default() };
    c.bench_function("lie_transform", |b| b.iter(|| lie_transform_with(black_box(&h), black_box(&f), &opts).unwrap()));
    c.bench_function("kam_step", |b| b.iter(|| kam_step(black_box(&st), &cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bracket, norms, lie
}
criterion_main!(benches);
