//! Criterion benchmarks for the hot kernels: jet evaluation with parameter
//! gradients, ISTA on a tall design, and the explicit reference solver.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use cpde_core::{
    ista_solve, solve_fd, BenchmarkName, BenchmarkSpec, JetComponent, LassoProblem, Point,
    SpaceTimeDomain, SurrogateNet,
};

fn bench_jet_eval(c: &mut Criterion) {
    let net = SurrogateNet::init(&[2, 32, 32, 32, 1], 3.0, 7).unwrap();
    let p = Point::xt(0.37, 0.59);
    c.bench_function("surrogate_eval_jet_32x3", |b| {
        b.iter(|| std::hint::black_box(net.eval_jet(p)))
    });
    c.bench_function("surrogate_param_grad_32x3", |b| {
        b.iter(|| std::hint::black_box(net.eval_param_grad(p, JetComponent::Dt)))
    });
}

fn bench_ista(c: &mut Criterion) {
    let mut rng = cpde_core::rng::Rng::new(11);
    let (n, m) = (200, 10);
    let mut a = vec![0.0; n * m];
    for v in &mut a {
        *v = rng.normal();
    }
    let mut truth = vec![0.0; m];
    truth[3] = 1.2;
    truth[8] = -0.7;
    let b: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|j| a[i * m + j] * truth[j]).sum())
        .collect();
    c.bench_function("ista_200x10_planted", |bch| {
        bch.iter_batched(
            || LassoProblem::new(a.clone(), b.clone(), n, m, 0.05).unwrap(),
            |p| std::hint::black_box(ista_solve(&p, None).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

fn bench_solver(c: &mut Criterion) {
    let spec = BenchmarkSpec::by_name(BenchmarkName::Reaction1d);
    let domain = SpaceTimeDomain::dim1(0.0, 1.0, 1.0, 61, 1201).unwrap();
    c.bench_function("solve_fd_reaction_61x1201", |b| {
        b.iter(|| std::hint::black_box(solve_fd(&spec.true_model, &spec.ic, &domain).unwrap()))
    });
}

criterion_group!(benches, bench_jet_eval, bench_ista, bench_solver);
criterion_main!(benches);
