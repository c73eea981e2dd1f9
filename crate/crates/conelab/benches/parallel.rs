use conelab::cone_algebra::{builtin_cone, TriangularFactor};
use conelab::par::{map_indexed_with, stream_rng, Execution};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

/// Sum of ln Q over all pairwise sums y_j + y_k: the inner loop of kernel assembly.
fn pairwise_log_q(c: &mut Criterion) {
    let mut group = c.benchmark_group("pairwise_log_q");
    group.sample_size(10);
    for name in ["sym2", "omegaE"] {
        let cone = builtin_cone(name).unwrap();
        let mut rng = stream_rng(1, 0);
        let points: Vec<_> = (0..120).map(|_| TriangularFactor::random(&cone, &mut rng, 1.0).apply_to_identity().embedded).collect();
        for (label, mode) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, name), &mode, |b, &mode| {
                b.iter(|| {
                    let rows = map_indexed_with(mode, points.len(), |j| {
                        points.iter().map(|yk| cone.q_values(&points[j].add(yk)).unwrap().iter().map(|v| v.ln()).sum::<f64>()).sum::<f64>()
                    });
                    black_box(rows.iter().sum::<f64>())
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, pairwise_log_q);
criterion_main!(benches);
