use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hazardboost::{fit, grow_tree, init_f0, FitConfig};
use hazardboost_bench::fixture;

fn tree_growth(c: &mut Criterion) {
    let mut group = c.benchmark_group("grow_tree");
    for irrelevant in [0, 20] {
        let (data, grid) = fixture(2000, irrelevant);
        let f0 = init_f0(&data).unwrap();
        let constant = move |_: f64, _: &[f64]| f0;
        for l in [1, 4] {
            group.bench_with_input(BenchmarkId::new(format!("p{}", irrelevant + 1), l), &l, |b, &l| {
                b.iter(|| grow_tree(&data, &grid, &constant, l))
            });
        }
    }
    group.finish();
}

fn boosting(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    let (data, grid) = fixture(2000, 0);
    for (m, l) in [(50, 1), (50, 3)] {
        group.bench_function(format!("m{m}_l{l}"), |b| b.iter(|| fit(&data, &grid, FitConfig::new(m, l)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, tree_growth, boosting);
criterion_main!(benches);
