use cyclocap::checkpoint::Checkpoint;
use cyclocap::dataset::{Dataset, GenerationConfig};
use cyclocap::eval::evaluate;
use cyclocap::features::{FeatureKind, FeatureScaling};
use cyclocap::model::{argmax, build_cap, CapConfig};
use cyclocap::nn::{Parameterized, Tensor};
use cyclocap::pipeline::prepare;
use cyclocap::preprocess::PreprocessConfig;
use cyclocap::signal::ModulationScheme;
use cyclocap::train::{frame_inputs, split_dataset, train, SplitSpec, TrainConfig, TrainEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_data(schemes: &[ModulationScheme], per_class: usize, seed: u64) -> Dataset {
    let gen = GenerationConfig {
        name: "tiny".into(),
        frames_per_class: per_class,
        schemes: schemes.to_vec(),
        cfo_low: -0.01,
        cfo_high: 0.01,
        t0_min: 4,
        t0_max: 8,
        beta_min: 0.3,
        beta_max: 0.5,
        snr_min_db: 12.0,
        snr_max_db: 20.0,
        snr_center_db: 16.0,
        frame_length: 256,
        master_seed: seed,
    };
    prepare(&gen, &PreprocessConfig::default()).unwrap()
}

fn tiny_topology(classes: usize) -> CapConfig {
    CapConfig {
        frame_length: 256,
        classes,
        filters: vec![4, 6, 8],
        kernel: 7,
        branches: FeatureKind::ALL.to_vec(),
    }
}

fn quick_config(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        batch_size: 8,
        max_epochs: epochs,
        split: SplitSpec {
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            seed: 3,
        },
        ..TrainConfig::default()
    }
}

fn params(net: &impl Parameterized<f32>) -> Vec<u32> {
    let mut out = Vec::new();
    net.visit_params(&mut |p| out.extend(p.value.iter().map(|v| v.to_bits())));
    out
}

#[test]
fn zero_learning_rate_leaves_weights_and_training_predictions_alone() {
    let schemes = [ModulationScheme::Bpsk, ModulationScheme::Qpsk];
    let ds = tiny_data(&schemes, 16, 1);
    let topo = tiny_topology(2);
    let cfg = TrainConfig {
        standardize_features: false,
        ..quick_config(1, 0.0)
    };
    let out = train(&ds, &topo, &cfg, &mut |_| {}).unwrap();
    let init = build_cap::<f32>(&topo, cfg.seed).unwrap();
    assert_eq!(params(&out.checkpoint.network), params(&init));

    let inputs = frame_inputs(&ds, &out.split.test, &FeatureScaling::default(), &topo.branches).unwrap();
    let (a, _) = out.checkpoint.network.clone().forward_train(&inputs).unwrap();
    let (b, _) = init.clone().forward_train(&inputs).unwrap();
    let bits = |l: &[Vec<f32>]| l.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let pa: Vec<usize> = a.iter().map(|l| argmax(&l.iter().map(|v| *v as f64).collect::<Vec<_>>())).collect();
    let pb: Vec<usize> = b.iter().map(|l| argmax(&l.iter().map(|v| *v as f64).collect::<Vec<_>>())).collect();
    assert_eq!(pa, pb);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let schemes = [ModulationScheme::Bpsk, ModulationScheme::Msk];
    let ds = tiny_data(&schemes, 12, 2);
    let topo = tiny_topology(2);
    let cfg = quick_config(2, 1e-3);
    let a = train(&ds, &topo, &cfg, &mut |_| {}).unwrap();
    let b = train(&ds, &topo, &cfg, &mut |_| {}).unwrap();
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    assert_eq!(a.log, b.log);
    let c = train(&ds, &topo, &TrainConfig { seed: 9, ..cfg }, &mut |_| {}).unwrap();
    assert_ne!(a.checkpoint.to_bytes(), c.checkpoint.to_bytes());
}

#[test]
fn toy_problem_is_learned_above_chance() {
    let schemes = [ModulationScheme::Bpsk, ModulationScheme::Qpsk, ModulationScheme::Msk];
    let ds = tiny_data(&schemes, 40, 4);
    let topo = tiny_topology(3);
    let mut epochs = 0;
    let out = train(&ds, &topo, &quick_config(8, 3e-3), &mut |e| {
        if let TrainEvent::Epoch(_) = e {
            epochs += 1
        }
    })
    .unwrap();
    assert_eq!(epochs, out.log.len());
    let first = &out.log[0];
    let last = out.log.last().unwrap();
    assert!(last.train_loss < first.train_loss, "{:?}", out.log);
    let report = evaluate(&out.checkpoint, &ds, &out.split.test).unwrap();
    assert!(report.p_cc >= 0.7, "test accuracy {}", report.p_cc);
}

#[test]
fn reloaded_checkpoint_scores_identically() {
    let schemes = [ModulationScheme::Bpsk, ModulationScheme::Qpsk];
    let ds = tiny_data(&schemes, 12, 5);
    let out = train(&ds, &tiny_topology(2), &quick_config(1, 1e-3), &mut |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    out.checkpoint.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.to_bytes(), out.checkpoint.to_bytes());
    let split = split_dataset(&ds.manifest, &quick_config(1, 1e-3).split).unwrap();
    assert_eq!(split, out.split);
    assert_eq!(
        evaluate(&back, &ds, &split.test).unwrap(),
        evaluate(&out.checkpoint, &ds, &split.test).unwrap()
    );
    let prov = back.provenance.unwrap();
    assert_eq!(prov.dataset, ds.manifest.config);
    assert_eq!(prov.preprocess, Some(PreprocessConfig::default()));
}

#[test]
fn branch_inputs_are_bound_to_their_feature() {
    let ds = tiny_data(&[ModulationScheme::Bpsk, ModulationScheme::Qpsk], 6, 6);
    let topo = tiny_topology(2);
    let net = build_cap::<f32>(&topo, 0).unwrap();
    let mut input = frame_inputs(&ds, &[0], &FeatureScaling::default(), &topo.branches).unwrap().remove(0);
    assert!(net.forward(&input).is_ok());
    input.swap(0, 4);
    assert!(net.forward(&input).is_err());
}

#[test]
fn untrained_networks_are_unbiased_on_average() {
    let topo = CapConfig::reference(256, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mean = [0.0f64; 8];
    let inits = 100;
    for seed in 0..inits {
        let net = build_cap::<f32>(&topo, seed).unwrap();
        let input: Vec<_> = topo
            .branches
            .iter()
            .map(|&k| {
                let ch = k.channels();
                let data = (0..256 * ch).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
                (k, Tensor::from_vec(256, ch, data).unwrap())
            })
            .collect();
        for (m, p) in mean.iter_mut().zip(net.forward(&input).unwrap()) {
            *m += p / inits as f64;
        }
    }
    for (c, m) in mean.iter().enumerate() {
        assert!((m - 0.125).abs() <= 0.03, "class {c}: mean probability {m}");
    }
}
