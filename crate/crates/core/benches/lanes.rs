use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tandem_core::env::obs::ObsMode;
use tandem_core::env::EnvSpec;
use tandem_core::par::Lanes;
use tandem_core::ppo::{ppo_update, Collector, Condition, Learner, PpoConfig, TrainSpec};
use tandem_core::rng::{self, Purpose};

fn spec() -> TrainSpec {
    TrainSpec {
        env: EnvSpec::Kitchen { layout: "cramped_room".into(), horizon: 400 },
        condition: Condition::Multi,
        family: "kitchen".into(),
        obs: ObsMode::Full,
        switch: None,
        ppo: PpoConfig::desk(1_000_000),
        seed: 0,
        encoder: None,
    }
}

fn lanes(c: &mut Criterion) {
    let spec = spec();
    let cfg = &spec.ppo;
    let net = spec.policy_config();
    let policy = tandem_core::nn::Policy::<f32>::new(net, 1).unwrap();
    let mut group = c.benchmark_group("lanes");
    group.sample_size(10);
    for (name, par) in [("sequential", Lanes::Sequential), ("parallel", Lanes::Parallel)] {
        let mut collector = Collector::new(&spec.env, spec.env_options(), spec.sampler().unwrap(), cfg.num_envs, net.hidden, 0, par).unwrap();
        group.bench_function(BenchmarkId::new("collect", name), |b| b.iter(|| collector.collect(&policy, cfg.num_steps, &cfg.shaping, 0.0)));

        let batch = collector.collect(&policy, cfg.num_steps, &cfg.shaping, 0.0);
        let one_epoch = PpoConfig { update_epochs: 1, ..cfg.clone() };
        group.bench_function(BenchmarkId::new("update", name), |b| {
            b.iter_batched(
                || (policy.clone(), Learner::new(policy.num_params(), &one_epoch), rng::stream(0, Purpose::Shuffle, 0)),
                |(mut p, mut l, mut r)| ppo_update(&mut p, &mut l, &batch, &one_epoch, &mut r, par).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, lanes);
criterion_main!(benches);
