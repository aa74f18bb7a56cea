//! Hot paths of a simulation run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relaysim_bench::scenario;
use relaysim_core::phy::time_on_air;
use relaysim_core::propagation::is_los;
use relaysim_core::{run, Architecture, BandId, LinkTable, RadioParams, SpreadingFactor};

fn airtime(c: &mut Criterion) {
    let params = RadioParams::new(
        BandId::Eu868,
        SpreadingFactor::new(9).unwrap(),
        125_000,
        14.0,
    )
    .unwrap();
    c.bench_function("time_on_air", |b| {
        b.iter(|| time_on_air(black_box(&params), black_box(51)))
    });
}

fn line_of_sight(c: &mut Criterion) {
    let s = scenario(Architecture::SubGhzOnly, 200, 0);
    c.bench_function("is_los/200 links", |b| {
        b.iter(|| {
            s.eds
                .iter()
                .filter(|ed| is_los(&ed.position, &s.gateway, &s.grid))
                .count()
        })
    });
}

fn link_table(c: &mut Criterion) {
    let s = scenario(Architecture::Proposal, 500, 5);
    c.bench_function("link_table/N=500 R=5", |b| {
        b.iter(|| LinkTable::build(black_box(&s)))
    });
}

fn full_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    for (architecture, n_relays) in [
        (Architecture::SubGhzOnly, 0),
        (Architecture::TwoPointFourOnly, 0),
        (Architecture::Proposal, 5),
    ] {
        let s = scenario(architecture, 500, n_relays);
        group.bench_with_input(BenchmarkId::new(architecture.name(), 500), &s, |b, s| {
            b.iter(|| run(s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, airtime, line_of_sight, link_table, full_run);
criterion_main!(benches);
