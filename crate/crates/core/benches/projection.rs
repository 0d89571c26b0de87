//! Compares the data-parallel and sequential projection paths.
//!
//! With the `parallel` feature the same workload runs inside a one-thread
//! rayon pool and the default pool; without it only the sequential fallback
//! exists. Results are bitwise identical across modes, so the comparison is
//! purely about throughput.

use criterion::{criterion_group, criterion_main, Criterion};
use meshtomo_core::geometry::{make_icosphere, MaterialTable, Mesh, ScanGeometry};
use meshtomo_core::projector::{backward, forward};
use meshtomo_core::raycast::cast_forward;
use nalgebra::Point3;

struct Setup {
    mesh: Mesh,
    materials: MaterialTable,
    geometry: ScanGeometry,
    d_p: Vec<f64>,
}

fn setup() -> Setup {
    let mesh = make_icosphere(3, 0.6, Point3::origin());
    let materials = MaterialTable::new(vec![0.0, 1.0]).unwrap();
    let geometry = ScanGeometry::circular(16, 0.0, 180.0, 64, 64, 0.025, 2.0).unwrap();
    let d_p = vec![1.0; geometry.n_pixels()];
    Setup {
        mesh,
        materials,
        geometry,
        d_p,
    }
}

fn bench_workloads(c: &mut Criterion, label: &str, run: impl Fn(&(dyn Fn() + Sync))) {
    let s = setup();
    let mut group = c.benchmark_group("projection");
    group.sample_size(20);
    group.bench_function(format!("forward/{label}"), |b| {
        b.iter(|| run(&|| drop(forward(&s.mesh, &s.materials, &s.geometry).unwrap())))
    });
    group.bench_function(format!("backward/{label}"), |b| {
        b.iter(|| run(&|| drop(backward(&s.mesh, &s.materials, &s.geometry, &s.d_p).unwrap())))
    });
    group.bench_function(format!("raycast/{label}"), |b| {
        b.iter(|| run(&|| drop(cast_forward(&s.mesh, &s.materials, &s.geometry).unwrap())))
    });
    group.finish();
}

#[cfg(feature = "parallel")]
fn bench_all(c: &mut Criterion) {
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    bench_workloads(c, "1-thread", |f| single.install(f));
    let pool = rayon::ThreadPoolBuilder::new().build().unwrap();
    bench_workloads(c, "default-pool", |f| pool.install(f));
}

#[cfg(not(feature = "parallel"))]
fn bench_all(c: &mut Criterion) {
    bench_workloads(c, "sequential", |f| f());
}

criterion_group!(benches, bench_all);
criterion_main!(benches);
