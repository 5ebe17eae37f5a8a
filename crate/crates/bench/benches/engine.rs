use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use fisher_bench::fixture;
use fisher_core::autodiff::{Tape, Var};
use fisher_core::model::batch::{Order, Workspace};
use fisher_core::model::ModelKind;
use fisher_core::training::{adam_step, frozen_weights, total_loss_generic, Objective, OptimizerState};

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_batch");
    for &n in &[256usize, 1024] {
        let f = fixture(ModelKind::WavePinn, false, n);
        let mut ws = Workspace::new();
        g.throughput(Throughput::Elements(n as u64));
        for (name, order) in [("value", Order::Value), ("jet", Order::Jet)] {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    f.net.forward_batch(&f.params.values, &f.batch.collocation, order, &mut ws);
                    black_box(ws.outputs()[0])
                })
            });
        }
    }
    g.finish();
}

fn epoch(c: &mut Criterion) {
    let mut g = c.benchmark_group("loss_and_gradient");
    for kind in ModelKind::ALL {
        for generalizing in [false, true] {
            let f = fixture(kind, generalizing, 1024);
            let mut obj = Objective::new();
            let mut grad = vec![0.0; f.params.len()];
            let id = format!("{kind}/{}", if generalizing { "range" } else { "fixed" });
            g.bench_function(id, |b| {
                b.iter(|| {
                    obj.loss_and_gradient(&f.net, &f.problem, f.kind, &f.params.values, &f.batch, &mut grad)
                        .unwrap()
                        .total
                })
            });
        }
    }
    g.finish();
}

fn training_step(c: &mut Criterion) {
    let f = fixture(ModelKind::WavePinn, false, 1024);
    let mut obj = Objective::new();
    let mut params = f.params.values.clone();
    let mut grad = vec![0.0; params.len()];
    let mut state = OptimizerState::new(params.len());
    c.bench_function("adam_epoch/wave-pinn", |b| {
        b.iter(|| {
            obj.loss_and_gradient(&f.net, &f.problem, f.kind, &params, &f.batch, &mut grad).unwrap();
            adam_step(&mut params, &grad, &mut state, 1e-3).unwrap()
        })
    });
}

/// The scalar reverse-mode tape on the same loss, for comparison.
fn tape(c: &mut Criterion) {
    let mut g = c.benchmark_group("tape_gradient");
    g.sample_size(20);
    for &n in &[16usize, 64] {
        let f = fixture(ModelKind::WavePinn, false, n);
        let weights = frozen_weights(&f.net, &f.problem, &f.params.values, &f.batch);
        g.bench_with_input(BenchmarkId::new("wave-pinn", n), &n, |b, _| {
            b.iter(|| {
                let t = Tape::new();
                let vars = t.parameters(&f.params.values);
                let loss: Var = total_loss_generic(&f.net, &f.problem, f.kind, &vars, &f.batch, &weights).unwrap();
                t.gradient(loss).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, forward, epoch, training_step, tape);
criterion_main!(benches);
