use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use skewclust::em::{Family, FitConfig};
use skewclust::grid::{run_grid, Execution, GridSpec};
use skewclust::scale::ScaleModel;
use skewclust::simgen::{builtin_design, generate};

fn grid(c: &mut Criterion) {
    let (data, _) = generate(&builtin_design("sim1", 1).unwrap()).unwrap();
    let spec = GridSpec {
        families: vec![Family::Gaussian, Family::SkewNormal],
        models: vec![ScaleModel::EII, ScaleModel::VVI, ScaleModel::EEE, ScaleModel::VVV],
        g_min: 1,
        g_max: 3,
        extend_to: None,
        config: FitConfig { n_starts: 2, ..FitConfig::default() },
        ..GridSpec::default()
    };
    let mut modes = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        modes.push(("parallel", Execution::Parallel));
    }
    let mut group = c.benchmark_group("grid_sim1_24_cells");
    group.sample_size(10);
    for (name, execution) in modes {
        let spec = GridSpec { execution, ..spec.clone() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_grid(&data, &spec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, grid);
criterion_main!(benches);
