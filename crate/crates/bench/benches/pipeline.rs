use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ionladder::ed::{build_spin_model, IsingOperator, Tail};
use ionladder::lightforce::{commensurate_kx, exact_couplings};
use ionladder::linalg::SymmetricOperator;
use ionladder::{find_equilibrium, normal_modes, LaserConfig, TrapConfig};
use std::hint::black_box;

fn pipeline(c: &mut Criterion) {
    let trap = TrapConfig::new(30, 6.1, 100.0).unwrap();
    c.bench_function("equilibrium_30", |b| b.iter(|| find_equilibrium(black_box(&trap), 0).unwrap()));

    let crystal = find_equilibrium(&trap, 0).unwrap();
    c.bench_function("normal_modes_30", |b| b.iter(|| normal_modes(black_box(&crystal)).unwrap()));

    let spectrum = normal_modes(&crystal).unwrap();
    let kx = commensurate_kx(&crystal, 14, 1).unwrap();
    let laser = LaserConfig { kx, ky: 396.0, rabi: 4.0, beat: 104.0, ldy: 0.1, length_ratio: None };
    c.bench_function("exact_couplings_30", |b| {
        b.iter(|| exact_couplings(black_box(&crystal), &spectrum, &laser).unwrap())
    });

    let model = build_spin_model(-1.0, 0.5, 0.3, 20, 6, Tail::Dipolar).unwrap();
    let op = IsingOperator::from_model(&model);
    let x: Vec<f64> = (0..op.dim()).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
    c.bench_function("ising_matvec_20", |b| {
        b.iter_batched_ref(|| vec![0.0; op.dim()], |y| op.apply(black_box(&x), y), BatchSize::LargeInput)
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = pipeline
}
criterion_main!(benches);
