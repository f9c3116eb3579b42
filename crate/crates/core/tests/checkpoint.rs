use tandem_core::env::obs::ObsMode;
use tandem_core::nn::{checkpoint, Policy, PolicyConfig, Trunk};
use tandem_core::rng::{self, Purpose};
use tandem_core::Error;

fn batch(cfg: &PolicyConfig, rows: usize) -> Vec<f32> {
    let mut r = rng::stream(4, Purpose::Init, 9);
    (0..rows * cfg.obs.dim()).map(|_| if rng::unit_f64(&mut r) < 0.1 { 1.0 } else { 0.0 }).collect()
}

#[test]
fn save_load_gives_bit_identical_logits() {
    let dir = tempfile::tempdir().unwrap();
    for (name, cfg) in [
        ("kitchen", PolicyConfig::kitchen(ObsMode::Full, Trunk::Gru)),
        ("coingame-mlp", PolicyConfig::coingame(ObsMode::Full, Trunk::Mlp)),
    ] {
        let mut p = Policy::<f32>::new(cfg, 21).unwrap();
        for (i, v) in p.params.iter_mut().enumerate() {
            *v += (i as f32 * 0.618).sin() * 1e-3;
        }
        let path = dir.path().join(format!("{name}.ckpt"));
        checkpoint::save(&path, &p, serde_json::json!({ "name": name })).unwrap();
        let (q, meta) = checkpoint::load(&path).unwrap();
        assert_eq!(meta["name"], name);
        let obs = batch(&cfg, 12);
        let h = vec![0.25f32; 12 * cfg.hidden];
        let a = p.step(&obs, &h, 12);
        let b = q.step(&obs, &h, 12);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.logits), bits(&b.logits), "{name}");
        assert_eq!(bits(&a.values), bits(&b.values), "{name}");
        assert_eq!(bits(&a.hidden), bits(&b.hidden), "{name}");
    }
}

#[test]
fn corrupt_and_missing_checkpoints_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = checkpoint::load(&dir.path().join("nope.ckpt"));
    assert!(matches!(missing, Err(Error::MissingArtifact(_))));
    let p = Policy::<f32>::new(PolicyConfig::coingame(ObsMode::Full, Trunk::Gru), 1).unwrap();
    let mut bytes = checkpoint::to_bytes(&p, serde_json::Value::Null).unwrap();
    let n = bytes.len();
    assert!(checkpoint::from_bytes(&bytes[..n - 2]).is_err());
    assert!(checkpoint::from_bytes(&bytes[..n - 4]).is_err());
    bytes[0] ^= 0xff;
    assert!(checkpoint::from_bytes(&bytes).is_err());
}
