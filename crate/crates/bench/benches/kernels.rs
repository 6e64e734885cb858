use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fraclab::energy::{f_s, gagliardo_seminorm};
use fraclab::field::sample;
use fraclab::flatnorm::{flat_norm, SolverOptions};
use fraclab::riesz::potential;
use fraclab::topology::jacobian;
use fraclab::vortex::{block_value, build_block};
use fraclab::{make_params, DiracSum, FlatInput, FlatVariant, Grid2, Normalization};

fn kernels(c: &mut Criterion) {
    let g = Grid2::centered(4.0, 128).unwrap();
    let u = sample(|x| block_value(x, [0.0, 0.0], 1), g, 1.5).unwrap();
    let params = make_params(0.95, 4.0).unwrap();

    c.bench_function("potential 128", |b| b.iter(|| potential(black_box(&u), &params, Normalization::Normalized).unwrap()));
    c.bench_function("seminorm 128", |b| b.iter(|| gagliardo_seminorm(black_box(&u), 0.95, None).unwrap()));
    c.bench_function("f_s 128", |b| b.iter(|| f_s(black_box(&u), &params).unwrap()));

    let block = build_block(g.snap_to_cell_center([0.1, 0.2]), 2, g).unwrap();
    c.bench_function("jacobian 128", |b| b.iter(|| jacobian(black_box(&block))));

    let fg = Grid2::centered(2.0, 32).unwrap();
    let region = fg.mask(|p| p[0].hypot(p[1]) <= 0.95);
    let mu = DiracSum::new(vec![([-0.3, 0.1], 1), ([0.4, -0.2], -1)]).unwrap();
    let input = FlatInput::atoms_only(fg, mu, region, FlatVariant::Closed);
    c.bench_function("flat norm dipole 32", |b| b.iter(|| flat_norm(black_box(&input), SolverOptions::default()).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
