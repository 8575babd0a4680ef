use oppmodel::corpus::synthetic::{generate_synthetic, SynthConfig};
use oppmodel::ranker::RankerConfig;
use oppmodel::train::{
    batch_gradients, ema_at_k, instance_gradients, train_model, AnyModel, Checkpoint, ModelKind,
    TrainConfig, Trainable,
};
use oppmodel::{Instance, Source};
use oppmodel_neural::{Adam, AdamConfig};

fn corpus(count: usize, seed: u64) -> Vec<Instance> {
    let config = SynthConfig {
        count,
        ..SynthConfig::default()
    };
    generate_synthetic(&config, seed).unwrap()
}

fn small_ranker(epochs: usize) -> TrainConfig {
    TrainConfig {
        model: ModelKind::Ranker,
        lr: Some(1e-3),
        epochs,
        batch: 10,
        mixture: vec![Source::Syn],
        seed: 11,
        ranker: RankerConfig {
            d: 16,
            heads: 2,
            ff_hidden: 32,
            min_freq: 1,
            ..RankerConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn refs(v: &[Instance]) -> Vec<&Instance> {
    v.iter().collect()
}

#[test]
fn checkpoint_round_trip_keeps_tune_score() {
    let data = corpus(60, 1);
    let (train, tune) = data.split_at(45);
    let out = train_model(&small_ranker(2), &refs(train), &refs(tune)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    out.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, out.checkpoint);
    let model = loaded.model().unwrap();
    let ema = ema_at_k(&refs(tune), &model, 5).unwrap();
    assert_eq!(ema, out.checkpoint.tune_ema_at_5);
}

#[test]
fn same_seed_same_checkpoint() {
    let data = corpus(30, 2);
    let config = small_ranker(1);
    let a = train_model(&config, &refs(&data), &[]).unwrap();
    let b = train_model(&config, &refs(&data), &[]).unwrap();
    assert_eq!(a.checkpoint.digest(), b.checkpoint.digest());
}

#[test]
fn overfits_a_small_set() {
    let data = corpus(50, 3);
    let mut config = small_ranker(100);
    config.dropout = 0.0;
    config.loss.loss_dropout = 0.0;
    // full batch, so the first epochs are plain descent steps
    config.batch = 50;
    config.lr = Some(5e-3);
    let set = refs(&data);
    let out = train_model(&config, &set, &set).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert!(
        losses[1] <= losses[0] && losses[2] <= losses[1],
        "{losses:?}"
    );
    assert_eq!(
        out.checkpoint.tune_ema_at_5,
        Some(100.0),
        "{:?}",
        out.history
    );
}

#[test]
fn one_step_moves_every_parameter_with_gradient() {
    let data = corpus(25, 4);
    let config = small_ranker(1);
    let set = refs(&data);
    let AnyModel::Ranker(mut model) = AnyModel::initialise(&config, &set).unwrap() else {
        panic!("expected a ranker");
    };
    let batch: Vec<(&Instance, u64)> = set.iter().map(|&i| (i, 9)).collect();
    let (_, grads) = batch_gradients(&model, &batch, &config).unwrap();
    let before = model.params().clone();
    let mut adam = Adam::new(model.params(), AdamConfig::with_lr(1e-3));
    adam.step(model.params_mut(), &grads).unwrap();

    let (mut with_grad, mut moved) = (0usize, 0usize);
    for (id, g) in grads.iter() {
        let (old, new) = (before.get(id), model.params().get(id));
        for ((gv, a), b) in g.iter().zip(old.iter()).zip(new.iter()) {
            if *gv != 0.0 {
                with_grad += 1;
                moved += usize::from(a != b);
            }
        }
    }
    assert!(with_grad > 0);
    assert!(
        moved as f64 >= 0.99 * with_grad as f64,
        "{moved}/{with_grad}"
    );
}

#[test]
fn batch_gradient_is_the_mean_of_instance_gradients() {
    let data = corpus(6, 5);
    let config = small_ranker(1);
    let set = refs(&data);
    let model = AnyModel::initialise(&config, &set).unwrap();
    let model = model.as_ranker().unwrap();
    let batch: Vec<(&Instance, u64)> = set
        .iter()
        .enumerate()
        .map(|(n, &i)| (i, n as u64))
        .collect();
    let (loss, grads) = batch_gradients(model, &batch, &config).unwrap();

    let mut mean_loss = 0.0;
    let singles: Vec<_> = batch
        .iter()
        .map(|(inst, seed)| instance_gradients(model, inst, &config, *seed).unwrap())
        .collect();
    for (l, _) in &singles {
        mean_loss += l / singles.len() as f64;
    }
    assert!((loss - mean_loss).abs() < 1e-12);
    for (id, g) in grads.iter() {
        for (idx, v) in g.indexed_iter() {
            let expect: f64 = singles
                .iter()
                .filter_map(|(_, s)| s.get(id).map(|t| t[idx]))
                .sum::<f64>()
                / singles.len() as f64;
            assert!((v - expect).abs() < 1e-12);
        }
    }
}
