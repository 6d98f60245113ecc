use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sher_bench::{batch, critic, critic_input, ddpg_agent, sac_agent, ACTION_DIM};
use sher_core::agents::sac::sample_noise;
use sher_core::diffcore::Tape;

fn update_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("update_on_batch");
    for size in [32, 128, 256] {
        let b = batch(size, 1);
        let noise = sample_noise(size, ACTION_DIM, &mut ChaCha8Rng::seed_from_u64(2));
        let mut sac = sac_agent(0);
        group.bench_with_input(BenchmarkId::new("sher", size), &size, |bench, _| {
            bench.iter(|| sac.update_on_batch(&b, &noise).unwrap())
        });
        let mut ddpg = ddpg_agent(0);
        group.bench_with_input(BenchmarkId::new("her-ddpg", size), &size, |bench, _| {
            bench.iter(|| ddpg.update_on_batch(&b).unwrap())
        });
    }
    group.finish();
}

fn forward_backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("critic");
    for hidden in [[64, 64], [256, 256]] {
        let net = critic(&hidden, 3);
        let x = critic_input(128, 4);
        let label = format!("{}x{}", hidden[0], hidden[1]);
        group.bench_function(BenchmarkId::new("predict", &label), |bench| bench.iter(|| net.predict(&x).unwrap()));
        group.bench_function(BenchmarkId::new("forward_backward", &label), |bench| {
            bench.iter(|| {
                let mut tape = Tape::new();
                let input = tape.constant(x.clone());
                let nodes = net.forward(&mut tape, input).unwrap();
                let loss = tape.mean(nodes.output);
                let grads = tape.backward(loss).unwrap();
                nodes.gradients(&grads)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, update_step, forward_backward);
criterion_main!(benches);
