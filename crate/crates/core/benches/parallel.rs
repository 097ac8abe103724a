//! Sequential vs thread-pool execution of the per-sequence work that
//! training and evaluation fan out.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gruwe::data::synth::{gen_decay_process, gen_hawkes_events, DecayProcessConfig, HawkesConfig};
use gruwe::eval::{eval_events, eval_forecast, EventEvalConfig};
use gruwe::model::{Grads, GruweParams, ModelDims, Task};
use gruwe::numerics::RngState;
use gruwe::parallel::Executor;
use gruwe::training::{event_loss, forecast_loss, ForecastProtocol};

fn executors() -> Vec<(String, Executor)> {
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get()).max(2);
    let mut out = vec![("sequential".to_string(), Executor::sequential())];
    let pool = Executor::new(threads).unwrap();
    if pool.is_parallel() {
        out.push((format!("rayon-{threads}"), pool));
    }
    out
}

fn forecast_setup() -> (GruweParams, Vec<gruwe::data::IrregularSeries>) {
    let cfg = DecayProcessConfig {
        n_seq: 64,
        ..Default::default()
    };
    let (series, _) = gen_decay_process(&mut RngState::new(1), &cfg).unwrap();
    let dims = ModelDims {
        input_dim: 3,
        hidden_dim: 32,
        output_dim: 3,
    };
    (GruweParams::init(Task::Forecast, dims, &mut RngState::new(2)).unwrap(), series)
}

fn events_setup() -> (GruweParams, Vec<gruwe::data::EventSequence>) {
    let cfg = HawkesConfig {
        n_seq: 64,
        num_types: 2,
        ..Default::default()
    };
    let (seqs, _) = gen_hawkes_events(&mut RngState::new(3), &cfg).unwrap();
    let dims = ModelDims {
        input_dim: 2,
        hidden_dim: 32,
        output_dim: 2,
    };
    (GruweParams::init(Task::Tpp, dims, &mut RngState::new(4)).unwrap(), seqs)
}

fn batch_gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_gradients");
    let (fp, series) = forecast_setup();
    let (tp, seqs) = events_setup();
    let protocol = ForecastProtocol::default();
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::new("forecast", &name), &exec, |b, exec| {
            b.iter(|| {
                let grads = exec
                    .try_map(&series, |_, s| {
                        let mut g = Grads::zeros_like(&fp);
                        forecast_loss(s, &fp, &protocol, Some(&mut g)).map(|_| g)
                    })
                    .unwrap();
                let mut total = Grads::zeros_like(&fp);
                for g in &grads {
                    total.add_assign(g);
                }
                black_box(total)
            })
        });
        group.bench_with_input(BenchmarkId::new("tpp", &name), &exec, |b, exec| {
            b.iter(|| {
                let grads = exec
                    .try_map(&seqs, |i, s| {
                        let mut g = Grads::zeros_like(&tp);
                        let mut rng = RngState::derive(5, &[i as u64]);
                        event_loss(s, &tp, 20, &mut rng, Some(&mut g)).map(|_| g)
                    })
                    .unwrap();
                let mut total = Grads::zeros_like(&tp);
                for g in &grads {
                    total.add_assign(g);
                }
                black_box(total)
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluation");
    group.sample_size(20);
    let (fp, series) = forecast_setup();
    let (tp, seqs) = events_setup();
    let ec = EventEvalConfig {
        max_horizon: 20.0,
        grid: 500,
        mc_samples: 20,
        seed: 1,
    };
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::new("forecast", &name), &exec, |b, exec| {
            b.iter(|| black_box(eval_forecast(&fp, &series, 0.5, exec).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("tpp", &name), &exec, |b, exec| {
            b.iter(|| black_box(eval_events(&tp, &seqs, &ec, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, batch_gradients, evaluation);
criterion_main!(benches);
