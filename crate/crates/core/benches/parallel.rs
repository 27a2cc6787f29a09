//! Sequential against rayon-parallel execution of the heavy kernels.

use coopsurface::bands::{band_structure, damped_sum, SumConfig, ZeemanField};
use coopsurface::exec::{self, Mode};
use coopsurface::lattice::{bz_path, make_emitter_set, Lattice};
use coopsurface::realspace::{thermal_ensemble, DisorderSpec, DriveSpec, SolverOptions};
use coopsurface::scattering::{polarizer_scan, ScanAxis};
use coopsurface::C64;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(Mode, &str); 2] = [(Mode::Sequential, "sequential"), (Mode::Parallel, "parallel")];

fn lattice_sum(c: &mut Criterion) {
    let lat = Lattice::honeycomb(0.4).unwrap();
    let cfg = SumConfig::default();
    let mut g = c.benchmark_group("lattice_sum");
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| damped_sum(&lat, black_box([0.3, 0.1]), &cfg).unwrap())
        });
    }
    g.finish();
}

fn bands(c: &mut Criterion) {
    let lat = Lattice::square(0.6).unwrap();
    let path = bz_path(&lat, &["G", "X", "M", "G"], 8).unwrap();
    let cfg = SumConfig::default();
    let mut g = c.benchmark_group("band_structure");
    g.sample_size(10);
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| band_structure(&lat, &path, ZeemanField::new(1.0, 0.0, 0.0), &cfg).unwrap())
        });
    }
    g.finish();
}

fn polarizer(c: &mut Criterion) {
    let a = ScanAxis::new("a", 0.2, 0.9, 16).unwrap();
    let d = ScanAxis::new("delta", -5.0, 5.0, 101).unwrap();
    let cfg = SumConfig::default();
    let mut g = c.benchmark_group("polarizer_scan");
    g.sample_size(10);
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| polarizer_scan(&a, &d, ZeemanField::new(3.0, 0.0, 0.0), [C64::ONE, C64::ONE], &cfg).unwrap())
        });
    }
    g.finish();
}

fn disorder(c: &mut Criterion) {
    let set = make_emitter_set(&Lattice::square(0.8).unwrap(), 10, 10, 0.0, 0).unwrap();
    let drive = DriveSpec::normal(0.0, [C64::ONE, C64::ZERO], ZeemanField::new(1.0, 0.0, 0.0));
    let dis = DisorderSpec {
        sigma_xy: 0.1,
        sigma_z: 0.0,
        n_configs: 16,
        seed: 1,
    };
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("disorder_ensemble");
    g.sample_size(10);
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| thermal_ensemble(&set, &drive, &dis, None, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lattice_sum, bands, polarizer, disorder);
criterion_main!(benches);
