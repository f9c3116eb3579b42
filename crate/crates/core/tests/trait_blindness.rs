use tandem_core::env::obs::ObsMode;
use tandem_core::env::{CoopEnv, EnvOptions, EnvSpec};
use tandem_core::nn::{Policy, PolicyConfig, Trunk};
use tandem_core::par::Lanes;
use tandem_core::partner::{PartnerTraits, Phase, Profile, TraitDistribution};
use tandem_core::ppo::{ppo_update, Collector, Learner, PartnerSampler, PpoConfig, ShapingConfig};
use tandem_core::rng::{self, Purpose};

#[test]
fn update_never_reads_partner_traits() {
    let spec = EnvSpec::Kitchen { layout: "cramped_room".into(), horizon: 64 };
    let cfg = PpoConfig { num_envs: 4, num_steps: 64, num_minibatches: 2, seq_len: 16, grad_chunk: 2, total_timesteps: 4096, ..PpoConfig::default() };
    let sampler = PartnerSampler { dist: TraitDistribution::named("kitchen").unwrap(), phase: Phase::Train, switch: None };
    let net = PolicyConfig::kitchen(ObsMode::Full, Trunk::Gru);
    let policy = Policy::<f32>::new(net, 2).unwrap();
    let mut c = Collector::new(&spec, EnvOptions::default(), sampler, cfg.num_envs, net.hidden, 8, Lanes::Sequential).unwrap();
    let batch = c.collect(&policy, cfg.num_steps, &ShapingConfig::default(), 0.1);
    assert!(batch.trait_labels.iter().any(|p| *p != batch.trait_labels[0]));

    let mut blanked = batch.clone();
    blanked.trait_labels = vec![Profile::Cooldown { v: [0, 0] }; batch.trait_labels.len()];
    let run = |b| {
        let mut p = policy.clone();
        let mut l = Learner::new(p.num_params(), &cfg);
        let mut r = rng::stream(1, Purpose::Shuffle, 0);
        ppo_update(&mut p, &mut l, b, &cfg, &mut r, Lanes::Sequential).unwrap();
        p.params
    };
    assert_eq!(run(&batch), run(&blanked));
}

#[test]
fn observations_do_not_depend_on_traits() {
    let cases = [
        (EnvSpec::Kitchen { layout: "coord_ring".into(), horizon: 50 }, [Profile::Cooldown { v: [0, 10] }, Profile::Cooldown { v: [10, 0] }]),
        (EnvSpec::CoinGame { side: 5, horizon: 50 }, [Profile::Skill { s: [0.1, 0.9] }, Profile::Skill { s: [0.9, 0.1] }]),
    ];
    for (spec, [a, b]) in cases {
        for obs in [ObsMode::Full, ObsMode::Blind] {
            let opts = EnvOptions { obs, ..EnvOptions::default() };
            let mut x = spec.build(opts).unwrap();
            let mut y = spec.build(opts).unwrap();
            for seed in 0..20 {
                x.reset(PartnerTraits::new(a), seed);
                y.reset(PartnerTraits::new(b), seed);
                let (mut ox, mut oy) = (vec![0.0; x.obs_shape().dim()], vec![0.0; y.obs_shape().dim()]);
                x.observe(&mut ox);
                y.observe(&mut oy);
                assert_eq!(ox, oy, "{} seed {seed}", spec.name());
            }
        }
    }
}
